"""
Proximity operators
===================

prox_R(y) = argmin_g 0.5*||g - y||^2 + R(g). Indicators give projections,
the l1 norm gives soft thresholding, total variation gives piecewise
constant fits.
"""

import numpy as np

from proxfwi.regularizers import TV1D, Box, L1Ball, L1Penalty, TV2DAnisotropic

y = np.array([2.0, -0.5, -3.0, 0.2])
print("y                 ", y)
print("soft threshold 1.0", L1Penalty(1.0).prox(y))
print("box [0, 1]        ", Box(0.0, 1.0).prox(y))
g = L1Ball(1.0).prox(y)
print("l1 ball tau=1     ", g, "norm", np.abs(g).sum())

# a noisy step: TV recovers the two plateaus
rng = np.random.default_rng(1)
step = np.r_[np.zeros(20), np.ones(20)]
noisy = step + 0.2 * rng.standard_normal(40)
fit = TV1D(0.5).prox(noisy)
print("TV1D distinct levels:", np.unique(np.round(fit, 6)).size)
print("error noisy %.3f, TV fit %.3f" % (np.linalg.norm(noisy - step), np.linalg.norm(fit - step)))

# the 2D anisotropic version on a blocky image
img = np.zeros((12, 12))
img[3:9, 4:10] = 1.0
noisy = img + 0.2 * rng.standard_normal(img.shape)
tv = TV2DAnisotropic(0.3, img.shape)
fit = tv.prox(noisy.ravel(order="F")).reshape(img.shape, order="F")
print("TV2D error noisy %.3f, TV fit %.3f" % (np.linalg.norm(noisy - img), np.linalg.norm(fit - img)))
