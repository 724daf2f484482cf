"""
Misfit penalties and their influence functions
==============================================

Least squares grows without bound, Huber turns linear past kappa and
Student's t re-descends, so a single huge residual barely moves it.
"""

import numpy as np

from proxfwi.penalties import Huber, LeastSquares, StudentT

# residual moduli from small to outlier-sized
a = np.array([0.0, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0])
r = a.astype(complex)

for pen in (LeastSquares(), Huber(kappa=1.0), StudentT(nu=1.0)):
    # value of each entry on its own, and the size of its gradient
    vals = [pen.value(np.array([x])) for x in r]
    infl = np.abs(pen.gradient(r))
    print(type(pen).__name__)
    print("  value    ", np.round(vals, 3))
    print("  influence", np.round(infl, 3))

# the Student's t influence peaks at |r| = sqrt(nu) with height 1/sqrt(nu)
nu = 0.25
t = np.linspace(0, 5, 50001)
g = np.abs(StudentT(nu).gradient(t.astype(complex)))
print("Student's t peak influence at", t[g.argmax()], "height", g.max())

# penalties see only |r|, so a global phase rotation changes nothing
rng = np.random.default_rng(0)
R = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
print("phase invariant:", np.isclose(StudentT(1.0).value(R), StudentT(1.0).value(R * 1j)))
