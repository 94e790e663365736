"""MAP estimation for edge-preserving hierarchical priors on a periodic 1-D mesh.

The unknown signal ``u`` and an edge indicator ``v`` are estimated jointly
from blurred Fourier data by alternating minimization of a discretized
Ambrosio-Tortorelli type objective.
"""

from .grid import Mesh, NodalSignal, CellSignal, SpectralVector
from .params import ModelParams
from .signals import PiecewisePolySignal, PLFunction, make_signal
from .solver import MapEstimate, SolveTrace, alternate_minimize, ms_bruteforce, solve_tikhonov
from .stochastic import NoiseSpec, make_rng, synthesize_measurement

__all__ = [
    "Mesh",
    "NodalSignal",
    "CellSignal",
    "SpectralVector",
    "ModelParams",
    "PiecewisePolySignal",
    "PLFunction",
    "make_signal",
    "MapEstimate",
    "SolveTrace",
    "alternate_minimize",
    "ms_bruteforce",
    "solve_tikhonov",
    "NoiseSpec",
    "make_rng",
    "synthesize_measurement",
]
__version__ = "0.1.0"
