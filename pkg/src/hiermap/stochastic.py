"""Samplers for the measurement noise, the hierarchical prior and synthetic data.

Randomness comes from an explicit ``numpy.random.Generator`` (PCG64 bit
generator, Gaussian draws via numpy's ziggurat ``standard_normal``), so every
sample is a deterministic function of its inputs and the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .grid import (
    Mesh,
    NodalSignal,
    SpectralVector,
    cell_average,
    dq_matrix,
    forward_apply,
    mass_matrix,
    pl_fourier,
    stiffness_matrix,
)
from .params import ModelParams
from .signals import PiecewisePolySignal

__all__ = [
    "NoiseSpec",
    "PriorSample",
    "make_rng",
    "sample_noise",
    "prior_v_precision",
    "prior_u_precision",
    "sample_prior_v",
    "sample_prior_u",
    "sample_prior",
    "truth_fourier",
    "synthesize_measurement",
]


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise magnitude ``sigma`` and scaling exponent; variance is ``sigma^2 N^-kappa``."""

    sigma: float
    kappa: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @classmethod
    def from_params(cls, p: ModelParams, seed=None) -> "NoiseSpec":
        return cls(p.sigma, p.noise_exponent, seed)


@dataclass(frozen=True)
class PriorSample:
    v: NodalSignal
    u: NodalSignal

    def __post_init__(self):
        if self.v.mesh != self.u.mesh:
            raise ValueError("prior sample pair must share a mesh")


def sample_noise(mesh: Mesh, spec: NoiseSpec, rng: np.random.Generator | None = None) -> SpectralVector:
    """Real white noise on the span of ``e_j``, ``|j| <= N``.

    The DC coefficient is N(0, var), and for ``j >= 1`` the real and imaginary
    parts are independent N(0, var/2), with ``c_{-j} = conj(c_j)``.  Draws are
    consumed in frequency order, so the same seed at two levels gives the same
    standardized coefficients for the shared frequencies.
    """
    rng = make_rng(spec.seed) if rng is None else rng
    N = mesh.N
    var = spec.sigma**2 * float(N) ** (-spec.kappa)
    # frequency-major draw order: a fixed seed gives nested realizations across N
    z = rng.standard_normal(2 * N + 1)
    pairs = z[1:].reshape(N, 2)
    pos = np.sqrt(var / 2.0) * (pairs[:, 0] + 1j * pairs[:, 1])
    coeffs = np.concatenate([np.conj(pos[::-1]), [np.sqrt(var) * z[0]], pos])
    return SpectralVector(N, coeffs)


def prior_v_precision(mesh: Mesh, p: ModelParams) -> np.ndarray:
    """``N^alpha (eps K + B / (4 eps))`` in roof-top coordinates."""
    N = mesh.N
    return float(N) ** p.alpha * (p.eps * stiffness_matrix(mesh) + mass_matrix(mesh) / (4.0 * p.eps))


def prior_u_precision(v: NodalSignal, p: ModelParams) -> np.ndarray:
    """``N^(alpha-1) D_q^T Lambda(Q_n v) D_q`` in roof-top coordinates."""
    N = v.mesh.N
    D = dq_matrix(v.mesh, p.eps, p.q)
    lam = p.eps**2 + cell_average(v).values ** 2
    return float(N) ** (p.alpha - 1.0) * (D.T * lam) @ D


def _sample_precision(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # P = R^T R (upper Cholesky); z = R^-1 xi has covariance P^-1
    R = scipy.linalg.cholesky(P, lower=False)
    xi = rng.standard_normal(P.shape[0])
    return scipy.linalg.solve_triangular(R, xi, lower=False)


def sample_prior_v(mesh: Mesh, p: ModelParams, rng: np.random.Generator) -> NodalSignal:
    return NodalSignal(mesh, 1.0 + _sample_precision(prior_v_precision(mesh, p), rng))


def sample_prior_u(v: NodalSignal, p: ModelParams, rng: np.random.Generator) -> NodalSignal:
    return NodalSignal(v.mesh, _sample_precision(prior_u_precision(v, p), rng))


def sample_prior(mesh: Mesh, p: ModelParams, rng: np.random.Generator) -> PriorSample:
    v = sample_prior_v(mesh, p, rng)
    return PriorSample(v, sample_prior_u(v, p, rng))


def truth_fourier(u_true: Union[NodalSignal, PiecewisePolySignal], N: int) -> SpectralVector:
    if isinstance(u_true, NodalSignal):
        return pl_fourier(u_true, N)
    return u_true.fourier(N)


def synthesize_measurement(u_true: Union[NodalSignal, PiecewisePolySignal], mesh: Mesh, p: ModelParams,
                           rng: np.random.Generator | None = None) -> SpectralVector:
    """``m = P_n A u_true + noise`` with noise variance ``sigma^2 N^-kappa``."""
    clean = forward_apply(truth_fourier(u_true, mesh.N), p.s)
    if rng is None:
        return clean
    return clean + sample_noise(mesh, NoiseSpec.from_params(p), rng)
