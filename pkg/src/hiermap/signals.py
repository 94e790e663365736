"""Continuum signal representations and the default test signals.

``PLFunction`` is a continuous periodic piecewise-linear function on an
arbitrary sorted set of breakpoints (the output of folding).

``PiecewisePolySignal`` is a periodic function with an explicit jump set:
the circle is cut at ``breakpoints`` and each piece is stored as samples on
a uniform subgrid spanning the piece (both endpoints included), interpolated
linearly.  Polynomial pieces of degree <= 1 are therefore represented exactly;
smoother pieces are resolved to the subgrid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Mesh, NodalSignal, SpectralVector

__all__ = [
    "PLFunction",
    "PiecewisePolySignal",
    "linear_segment_fourier",
    "step_signal",
    "piecewise_smooth_signal",
    "sawtooth_signal",
    "make_signal",
    "SIGNAL_JUMPS",
]


def _phi1(x: np.ndarray) -> np.ndarray:
    """(exp(x) - 1) / x, stable near 0."""
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = 1 + xs / 2 + xs**2 / 6 + xs**3 / 24 + xs**4 / 120
    xl = x[~small]
    out[~small] = np.expm1(xl) / xl
    return out


def _phi2(x: np.ndarray) -> np.ndarray:
    """(exp(x) (x - 1) + 1) / x**2, stable near 0."""
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = 0.5 + xs / 3 + xs**2 / 8 + xs**3 / 30 + xs**4 / 144
    xl = x[~small]
    out[~small] = (np.exp(xl) * (xl - 1) + 1) / xl**2
    return out


def linear_segment_fourier(a, b, fa, fb, freqs) -> np.ndarray:
    """Sum over segments of ``int_a^b f(t) exp(-2 pi i j t) dt`` with ``f`` linear.

    ``a, b, fa, fb`` are arrays over segments; returns one value per frequency.
    The integral is evaluated in closed form.
    """
    a, b, fa, fb = (np.asarray(x, dtype=float) for x in (a, b, fa, fb))
    L = b - a
    out = np.empty(len(freqs), dtype=complex)
    for i, j in enumerate(freqs):
        z = -2j * np.pi * j
        x = z * L
        e0 = np.exp(z * a)
        out[i] = np.sum(e0 * (fa * L * _phi1(x) + (fb - fa) * L * _phi2(x)))
    return out


@dataclass(frozen=True, eq=False)
class PLFunction:
    """Continuous periodic PL function with nodes ``breakpoints`` in [0, 1)."""

    breakpoints: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != x.shape or len(t) == 0:
            raise ValueError("breakpoints and values must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= 1:
            raise ValueError("breakpoints must be strictly increasing in [0, 1)")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", x)

    @classmethod
    def from_nodal(cls, u: NodalSignal) -> "PLFunction":
        return cls(u.mesh.nodes, u.values.copy())

    def segments(self):
        """(t0, t1, v0, v1) per segment; the last one wraps to ``t0[0] + 1``."""
        t, x = self.breakpoints, self.values
        t1 = np.append(t[1:], t[0] + 1.0)
        return t, t1, x, np.roll(x, -1)

    def __call__(self, s) -> np.ndarray:
        t, x = self.breakpoints, self.values
        tt = np.append(np.append(t[-1] - 1.0, t), t[0] + 1.0)
        xx = np.append(np.append(x[-1], x), x[0])
        return np.interp(np.mod(np.asarray(s, dtype=float), 1.0), tt, xx)

    def derivative_energy(self) -> float:
        t0, t1, v0, v1 = self.segments()
        return float(np.sum((v1 - v0) ** 2 / (t1 - t0)))

    def refine(self, extra) -> "PLFunction":
        """Same function with additional breakpoints inserted."""
        extra = np.mod(np.asarray(extra, dtype=float), 1.0)
        t = np.union1d(self.breakpoints, extra)
        return PLFunction(t, self(t))


@dataclass(frozen=True, eq=False)
class PiecewisePolySignal:
    """Periodic signal with jump set ``breakpoints`` and sampled pieces.

    ``pieces[i]`` samples the function uniformly on
    ``[breakpoints[i], breakpoints[i+1]]`` where the last piece ends at
    ``breakpoints[0] + 1``.
    """

    breakpoints: np.ndarray = field(repr=False)
    pieces: tuple = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        if b.ndim != 1 or len(b) == 0:
            raise ValueError("at least one breakpoint is required")
        if np.any(np.diff(b) <= 0) or b[0] < 0 or b[-1] >= 1:
            raise ValueError("breakpoints must be distinct, sorted and in [0, 1)")
        pieces = tuple(np.asarray(p, dtype=float) for p in self.pieces)
        if len(pieces) != len(b):
            raise ValueError("piece count must equal breakpoint count")
        if any(p.ndim != 1 or len(p) < 2 for p in pieces):
            raise ValueError("each piece needs at least two samples")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def from_functions(cls, breakpoints: Sequence[float], funcs: Sequence[Callable],
                       samples_per_unit: int = 8192) -> "PiecewisePolySignal":
        """Sample ``funcs[i]`` (called with unwrapped t) on each piece."""
        b = np.asarray(breakpoints, dtype=float)
        ends = np.append(b[1:], b[0] + 1.0)
        pieces = []
        for a, e, f in zip(b, ends, funcs):
            m = max(2, int(np.ceil((e - a) * samples_per_unit)) + 1)
            t = np.linspace(a, e, m)
            pieces.append(np.broadcast_to(np.asarray(f(t), dtype=float), t.shape).copy())
        return cls(b, tuple(pieces))

    @classmethod
    def constant(cls, c: float) -> "PiecewisePolySignal":
        return cls(np.array([0.0]), (np.array([c, c]),))

    @property
    def ends(self) -> np.ndarray:
        b = self.breakpoints
        return np.append(b[1:], b[0] + 1.0)

    def _piece_grid(self, i: int) -> np.ndarray:
        return np.linspace(self.breakpoints[i], self.ends[i], len(self.pieces[i]))

    def __call__(self, t) -> np.ndarray:
        b = self.breakpoints
        t = np.asarray(t, dtype=float)
        tt = b[0] + np.mod(t - b[0], 1.0)
        idx = np.searchsorted(b, tt, side="right") - 1
        out = np.empty_like(tt)
        for i in range(len(b)):
            sel = idx == i
            if np.any(sel):
                out[sel] = np.interp(tt[sel], self._piece_grid(i), self.pieces[i])
        return out

    def one_sided_limits(self):
        """(left, right) limits at each breakpoint."""
        right = np.array([p[0] for p in self.pieces])
        left = np.array([p[-1] for p in self.pieces])
        return np.roll(left, 1), right

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(p)) for p in self.pieces))

    def jump_set(self, rel_tol: float = 1e-9) -> np.ndarray:
        """Breakpoints where the one-sided limits differ by more than
        ``rel_tol * (1 + sup|u|)``."""
        left, right = self.one_sided_limits()
        tol = rel_tol * (1.0 + self.sup_norm())
        return self.breakpoints[np.abs(right - left) > tol]

    def gradient_energy(self) -> float:
        """``int_{T \\ K} |u'|^2 dt`` by differences on each piece's subgrid."""
        total = 0.0
        for i, p in enumerate(self.pieces):
            hstep = (self.ends[i] - self.breakpoints[i]) / (len(p) - 1)
            total += float(np.sum(np.diff(p) ** 2) / hstep)
        return total

    def fourier(self, N: int) -> SpectralVector:
        """Fourier coefficients for ``|j| <= N`` (exact for the sampled representation)."""
        a, b, fa, fb = [], [], [], []
        for i, p in enumerate(self.pieces):
            g = self._piece_grid(i)
            a.append(g[:-1]); b.append(g[1:]); fa.append(p[:-1]); fb.append(p[1:])
        freqs = np.arange(-N, N + 1)
        coeffs = linear_segment_fourier(np.concatenate(a), np.concatenate(b),
                                        np.concatenate(fa), np.concatenate(fb), freqs)
        return SpectralVector(N, coeffs)

    def sample(self, mesh: Mesh) -> NodalSignal:
        return NodalSignal(mesh, self(mesh.nodes))


# ---------------------------------------------------------------------------
# default test signals
# ---------------------------------------------------------------------------

def step_signal() -> PiecewisePolySignal:
    """``u = 1`` on [0.2, 0.6), else 0."""
    return PiecewisePolySignal(np.array([0.2, 0.6]), (np.array([1.0, 1.0]), np.array([0.0, 0.0])))


def piecewise_smooth_signal(samples_per_unit: int = 8192) -> PiecewisePolySignal:
    """Four jumps at 0.15, 0.35, 0.5, 0.8 with quadratic and linear pieces.

    The jump at 0.5 (height 0.35) is the shallowest feature.
    """
    funcs = [
        lambda t: 1.0 + 10.0 * (t - 0.15) * (0.35 - t),
        lambda t: -0.5 + 2.0 * (t - 0.35),
        lambda t: 0.6 - 20.0 * (t - 0.65) ** 2,
        lambda t: -0.3 + 0.0 * t,
    ]
    return PiecewisePolySignal.from_functions([0.15, 0.35, 0.5, 0.8], funcs, samples_per_unit)


def sawtooth_signal() -> PiecewisePolySignal:
    """``u(t) = t`` on [0, 1): unit slope, one jump at 0."""
    return PiecewisePolySignal(np.array([0.0]), (np.array([0.0, 1.0]),))


SIGNAL_JUMPS = {"step": 2, "piecewise-smooth": 4}


def make_signal(name: str) -> PiecewisePolySignal:
    if name == "step":
        return step_signal()
    if name == "piecewise-smooth":
        return piecewise_smooth_signal()
    raise ValueError(f"unknown signal {name!r}")
