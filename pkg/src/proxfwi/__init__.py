"""Proximal quasi-Newton composite optimization for 2-D frequency-domain waveform inversion.

Minimizes ``phi(y) = sum_w rho(S H(C y)^{-1} Q - D_w) + R(y)`` with a
differentiable misfit ``rho``, a regularizer ``R`` with a cheap prox and a
linear transform ``C``.
"""

from .helmholtz import AcquisitionGeometry, FrequencyData, Grid, GridModel2D, predict_data
from .objective import CompositeProblem, EvalRecord, SmoothProblem
from .penalties import Huber, LeastSquares, StudentT
from .pqn import SolverConfig, minimize, spg_prox_solve
from .quasinewton import LbfgsMemory
from .regularizers import TV1D, Box, L1Ball, L1Penalty, TV2DAnisotropic, Zero
from .transforms import HaarWavelet2D, Identity

__version__ = "0.1.0"

__all__ = [
    "AcquisitionGeometry",
    "Box",
    "CompositeProblem",
    "EvalRecord",
    "FrequencyData",
    "Grid",
    "GridModel2D",
    "HaarWavelet2D",
    "Huber",
    "Identity",
    "L1Ball",
    "L1Penalty",
    "LbfgsMemory",
    "LeastSquares",
    "SmoothProblem",
    "SolverConfig",
    "StudentT",
    "TV1D",
    "TV2DAnisotropic",
    "Zero",
    "minimize",
    "predict_data",
    "spg_prox_solve",
]
