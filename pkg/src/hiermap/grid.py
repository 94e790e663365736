"""Discrete operators on the uniform periodic mesh of the unit circle.

Piecewise-linear functions are stored by their nodal values in the roof-top
(hat function) basis, piecewise-constant functions by their cell values.
Fourier coefficients follow ``c_j = int_0^1 f(t) exp(-2 pi i j t) dt`` so that
``f(t) = sum_j c_j exp(2 pi i j t)`` and Parseval reads
``||f||^2 = sum_j |c_j|^2``.

All L2 integrals of PL/PC quantities are evaluated exactly through the mass
matrix, the stiffness matrix or (1/N)-weighted cell sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "NodalSignal",
    "CellSignal",
    "SpectralVector",
    "dq_matrix",
    "difference_matrix",
    "cell_average",
    "cell_average_matrix",
    "mass_matrix",
    "stiffness_matrix",
    "forward_multiplier",
    "forward_apply",
    "roof_fourier",
    "pl_fourier",
    "measurement_matrix",
    "apply_measurement",
    "apply_measurement_adjoint",
    "normal_matrix",
]


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh with ``N = 2**n`` cells on the circle [0, 1)."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"refinement level must be a nonnegative integer, got {self.n}")

    @property
    def N(self) -> int:
        return 2 ** int(self.n)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) / self.N

    @classmethod
    def from_size(cls, N: int) -> "Mesh":
        n = int(round(np.log2(N)))
        if 2**n != N:
            raise ValueError(f"cell count must be a power of two, got {N}")
        return cls(n)


def _as_values(values, N: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (N,):
        raise ValueError(f"expected {N} values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NodalSignal:
    """Periodic piecewise-linear function ``sum_j values[j] * phi_j``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.mesh.N))

    @classmethod
    def constant(cls, mesh: Mesh, c: float) -> "NodalSignal":
        return cls(mesh, np.full(mesh.N, float(c)))

    @classmethod
    def sample(cls, mesh: Mesh, f) -> "NodalSignal":
        return cls(mesh, f(mesh.nodes))

    def __call__(self, t) -> np.ndarray:
        """Evaluate the piecewise-linear interpolant at points ``t`` (mod 1)."""
        N = self.mesh.N
        x = np.mod(np.asarray(t, dtype=float), 1.0) * N
        k = np.minimum(np.floor(x).astype(int), N - 1)
        w = x - k
        return (1 - w) * self.values[k] + w * self.values[(k + 1) % N]

    def integral(self) -> float:
        return float(self.values.sum() / self.mesh.N)

    def l2_norm_sq(self) -> float:
        x = self.values
        return float(x @ (mass_matrix(self.mesh, sparse=True) @ x))

    def slopes(self) -> np.ndarray:
        return self.mesh.N * (np.roll(self.values, -1) - self.values)


@dataclass(frozen=True, eq=False)
class CellSignal:
    """Periodic piecewise-constant function, ``values[j]`` on ``[j/N, (j+1)/N)``."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.mesh.N))

    def __call__(self, t) -> np.ndarray:
        N = self.mesh.N
        k = np.minimum(np.floor(np.mod(np.asarray(t, dtype=float), 1.0) * N).astype(int), N - 1)
        return self.values[k]

    def integral(self) -> float:
        return float(self.values.sum() / self.mesh.N)

    def l2_norm_sq(self) -> float:
        return float(np.sum(self.values**2) / self.mesh.N)


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """Fourier coefficients ``c_j`` for ``j = -N..N``; ``coeffs[j + N]`` holds ``c_j``."""

    N: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex)
        if arr.shape != (2 * self.N + 1,):
            raise ValueError(f"expected {2 * self.N + 1} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, N: int) -> "SpectralVector":
        return cls(N, np.zeros(2 * N + 1, dtype=complex))

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, j: int) -> complex:
        if abs(j) > self.N:
            raise IndexError(f"frequency {j} outside |j| <= {self.N}")
        return complex(self.coeffs[j + self.N])

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        self._check(other)
        return SpectralVector(self.N, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralVector") -> "SpectralVector":
        self._check(other)
        return SpectralVector(self.N, self.coeffs - other.coeffs)

    def _check(self, other):
        if self.N != other.N:
            raise ValueError(f"truncation mismatch: {self.N} vs {other.N}")

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def is_real(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        scale = 1.0 + np.max(np.abs(c))
        return bool(np.max(np.abs(c - np.conj(c[::-1]))) <= tol * scale)

    def __call__(self, t) -> np.ndarray:
        """Evaluate the real part of the trigonometric polynomial at ``t``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(2j * np.pi * np.multiply.outer(t, self.freqs))
        return np.real(phase @ self.coeffs)


# ---------------------------------------------------------------------------
# differentiation and projections
# ---------------------------------------------------------------------------

def difference_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Sparse forward difference ``(Du)_j = N (u_{j+1} - u_j)`` with wraparound."""
    N = mesh.N
    idx = np.arange(N)
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([(idx + 1) % N, idx])
    data = np.concatenate([np.full(N, float(N)), np.full(N, -float(N))])
    return sp.csr_matrix((data, (rows, cols)), shape=(N, N))


def dq_matrix(mesh: Mesh, eps: float, q: float) -> np.ndarray:
    """Dense matrix of the perturbed derivative ``D + eps**q Q`` from PL(n) to PC(n)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    N = mesh.N
    return difference_matrix(mesh).toarray() + eps**q / N


def cell_average_matrix(mesh: Mesh) -> sp.csr_matrix:
    N = mesh.N
    idx = np.arange(N)
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([idx, (idx + 1) % N])
    return sp.csr_matrix((np.full(2 * N, 0.5), (rows, cols)), shape=(N, N))


def cell_average(v: NodalSignal) -> CellSignal:
    """L2 projection of a PL function onto PC(n): the midpoint value of each piece."""
    x = v.values
    return CellSignal(v.mesh, 0.5 * (x + np.roll(x, -1)))


def _assemble(mesh: Mesh, local: np.ndarray, sparse: bool):
    N = mesh.N
    idx = np.arange(N)
    pairs = [(idx, idx), (idx, (idx + 1) % N), ((idx + 1) % N, idx), ((idx + 1) % N, (idx + 1) % N)]
    rows = np.concatenate([p[0] for p in pairs])
    cols = np.concatenate([p[1] for p in pairs])
    data = np.concatenate([np.full(N, local[a, b]) for a, b in ((0, 0), (0, 1), (1, 0), (1, 1))])
    mat = sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()
    return mat if sparse else mat.toarray()


def mass_matrix(mesh: Mesh, sparse: bool = False):
    """Gram matrix ``<phi_j, phi_k>`` of the roof-top basis."""
    h = mesh.h
    return _assemble(mesh, h * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]]), sparse)


def stiffness_matrix(mesh: Mesh, sparse: bool = False):
    """Matrix of ``int |Dv|^2 dt`` on PL(n); kernel is the constants."""
    N = mesh.N
    return _assemble(mesh, N * np.array([[1.0, -1.0], [-1.0, 1.0]]), sparse)


# ---------------------------------------------------------------------------
# forward operator and measurements
# ---------------------------------------------------------------------------

def _check_order(s: float):
    if not 0 < s < 0.5:
        raise ValueError(f"smoothing order must lie in (0, 1/2), got {s}")


def forward_multiplier(j, s: float) -> np.ndarray:
    """Fourier multiplier of ``(I - Laplacian)^(-s/2)`` at frequency ``j``."""
    j = np.asarray(j, dtype=float)
    return (1.0 + 4.0 * np.pi**2 * j**2) ** (-s / 2.0)


def _roof_sinc2(j, N: int) -> np.ndarray:
    j = np.asarray(j)
    out = np.sinc(j / N) ** 2
    return np.where((j % N == 0) & (j != 0), 0.0, out)


def roof_fourier(j: int, k: int, N: int) -> complex:
    """``int phi_k(t) exp(-2 pi i j t) dt`` for the hat function centred at ``k/N``."""
    return complex(_roof_sinc2(j, N) / N * np.exp(-2j * np.pi * j * k / N))


def pl_fourier(u: NodalSignal, N_out: int | None = None) -> SpectralVector:
    """Exact Fourier coefficients of a PL function, truncated at ``|j| <= N_out``."""
    N = u.mesh.N
    N_out = N if N_out is None else N_out
    j = np.arange(-N_out, N_out + 1)
    dft = np.fft.fft(u.values)[j % N]
    return SpectralVector(N_out, _roof_sinc2(j, N) / N * dft)


def forward_apply(u: Union[NodalSignal, SpectralVector], s: float) -> SpectralVector:
    """Apply ``A = (I - Laplacian)^(-s/2)``; PL input is expanded exactly up to ``|j| <= N``."""
    _check_order(s)
    c = pl_fourier(u) if isinstance(u, NodalSignal) else u
    return SpectralVector(c.N, forward_multiplier(c.freqs, s) * c.coeffs)


def _measurement_symbol(N: int, s: float) -> np.ndarray:
    j = np.arange(-N, N + 1)
    return forward_multiplier(j, s) * _roof_sinc2(j, N) / N


def measurement_matrix(mesh: Mesh, s: float) -> np.ndarray:
    """Dense complex matrix of shape (2N+1, N); row ``j + N`` holds frequency ``j``."""
    _check_order(s)
    N = mesh.N
    j = np.arange(-N, N + 1)
    k = np.arange(N)
    phase = np.exp(-2j * np.pi * np.outer(j, k) / N)
    return _measurement_symbol(N, s)[:, None] * phase


def apply_measurement(u_values: np.ndarray, s: float) -> np.ndarray:
    """Fast ``A_n u`` for nodal values; returns the 2N+1 complex coefficients."""
    N = len(u_values)
    j = np.arange(-N, N + 1)
    return _measurement_symbol(N, s) * np.fft.fft(u_values)[j % N]


def apply_measurement_adjoint(m_coeffs: np.ndarray, s: float) -> np.ndarray:
    """``Re(A_n^H m)`` for a coefficient vector of length 2N+1."""
    N = (len(m_coeffs) - 1) // 2
    j = np.arange(-N, N + 1)
    folded = np.zeros(N, dtype=complex)
    np.add.at(folded, j % N, _measurement_symbol(N, s) * m_coeffs)
    # sum_j w_j m_j exp(+2 pi i j k / N) = N * ifft(folded)
    return np.real(N * np.fft.ifft(folded))


def normal_matrix(mesh: Mesh, s: float) -> np.ndarray:
    """Dense circulant ``Re(A_n^H A_n)``."""
    _check_order(s)
    N = mesh.N
    j = np.arange(-N, N + 1)
    folded = np.zeros(N)
    np.add.at(folded, j % N, _measurement_symbol(N, s) ** 2)
    col = np.real(N * np.fft.ifft(folded))
    return scipy.linalg.circulant(col)
