"""
Sparsity in the Haar domain
===========================

A layered model is almost entirely described by a handful of Haar
coefficients, which is what makes an l1 penalty on the coefficients a
reasonable prior.
"""

import numpy as np

from proxfwi.experiment import synth_model
from proxfwi.transforms import HaarWavelet2D

spec = {"kind": "layered", "nz": 32, "nx": 32, "h": 10.0,
        "layers": [{"top": 0, "v": 2000.0}, {"top": 12, "v": 2500.0}, {"top": 22, "v": 3000.0}]}
m = synth_model(spec).m

for levels in (1, 3, 5):
    C = HaarWavelet2D((32, 32), levels)
    y = C.adjoint(m)
    big = np.abs(y) > 1e-6 * np.abs(y).max()
    print(f"levels={levels}: {big.sum()} of {y.size} coefficients are non-negligible")

# orthonormal: synthesis undoes analysis and norms are kept
C = HaarWavelet2D((32, 32), 5)
y = C.adjoint(m)
print("round trip error", np.abs(C.apply(y) - m).max())
print("norm ratio", np.linalg.norm(y) / np.linalg.norm(m))
