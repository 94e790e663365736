"""Closed-form evaluation of the variational functionals.

Covers the discrete posterior objective, the Ambrosio-Tortorelli pieces, the
log-barrier and perturbation terms, the Mumford-Shah energy, the scalar
potentials used in the divergence and domain arguments, and folding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .grid import (
    Mesh,
    NodalSignal,
    SpectralVector,
    apply_measurement,
    cell_average,
    mass_matrix,
    stiffness_matrix,
)
from .params import ModelParams
from .signals import PiecewisePolySignal, PLFunction

__all__ = [
    "ObjectiveBreakdown",
    "eval_discrete_objective",
    "perturbed_slopes",
    "cell_integral_v2",
    "eval_AT",
    "eval_L",
    "eval_S",
    "eval_MS",
    "fold_value",
    "fold",
    "fold_domain",
    "continuum_terms",
    "g_eps",
    "minimize_g",
    "g_N",
    "min_gN",
    "eval_G",
    "grad_G",
    "minimize_G",
    "PiecewisePolySignal",
]

SIMPSON_SUBINTERVALS = 8


@dataclass(frozen=True)
class ObjectiveBreakdown:
    log_term: float
    grad_term: float
    v_smooth: float
    v_fidelity: float
    residual: float

    @property
    def total(self) -> float:
        return self.log_term + self.grad_term + self.v_smooth + self.v_fidelity + self.residual

    def as_dict(self) -> dict:
        return {
            "log_term": self.log_term,
            "grad_term": self.grad_term,
            "v_smooth": self.v_smooth,
            "v_fidelity": self.v_fidelity,
            "residual": self.residual,
            "total": self.total,
        }


def _same_mesh(*signals):
    meshes = {s.mesh for s in signals}
    if len(meshes) != 1:
        raise ValueError(f"mesh mismatch: {sorted(m.n for m in meshes)}")


def perturbed_slopes(u: NodalSignal, eps: float, q: float) -> np.ndarray:
    """Cell values of ``D_q u = Du + eps**q * mean(u)``."""
    return u.slopes() + eps**q * u.integral()


def cell_integral_v2(v: np.ndarray, N: int) -> np.ndarray:
    """Exact ``int_{I_j} v^2 dt`` for a linear piece."""
    a, b = v, np.roll(v, -1)
    return (a * a + a * b + b * b) / (3.0 * N)


def eval_discrete_objective(u: NodalSignal, v: NodalSignal, m: SpectralVector,
                            p: ModelParams) -> ObjectiveBreakdown:
    _same_mesh(u, v)
    mesh = u.mesh
    N = mesh.N
    if m.N != N:
        raise ValueError(f"measurement truncation {m.N} does not match mesh N={N}")
    eps = p.eps
    lam_diag = eps**2 + cell_average(v).values ** 2
    d = perturbed_slopes(u, eps, p.q)
    one_minus = 1.0 - v.values
    B = mass_matrix(mesh, sparse=True)
    resid = apply_measurement(u.values, p.s) - m.coeffs
    return ObjectiveBreakdown(
        log_term=float(-p.logdet_weight(N) * np.sum(np.log(lam_diag))),
        grad_term=float(np.sum(lam_diag * d * d) / N),
        v_smooth=float(eps * np.sum(v.slopes() ** 2) / N),
        v_fidelity=float(one_minus @ (B @ one_minus) / (4.0 * eps)),
        residual=float(p.residual_weight * np.sum(np.abs(resid) ** 2)),
    )


def eval_AT(u: NodalSignal, v: NodalSignal, eps: float) -> float:
    """``int (eps^2 + v^2)|Du|^2 + eps|Dv|^2 + (1-v)^2/(4 eps) dt``, exact on PL(n)."""
    _same_mesh(u, v)
    N = u.mesh.N
    weight = eps**2 / N + cell_integral_v2(v.values, N)
    one_minus = 1.0 - v.values
    B = mass_matrix(u.mesh, sparse=True)
    return float(np.sum(weight * u.slopes() ** 2)
                 + eps * np.sum(v.slopes() ** 2) / N
                 + one_minus @ (B @ one_minus) / (4.0 * eps))


def _simpson_cells(f: Callable[[np.ndarray], np.ndarray], v: NodalSignal) -> float:
    """Composite Simpson on every cell with ``SIMPSON_SUBINTERVALS`` subintervals."""
    N = v.mesh.N
    k = SIMPSON_SUBINTERVALS
    w = np.ones(k + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= 1.0 / (3.0 * k * N)
    s = np.linspace(0.0, 1.0, k + 1)
    a, b = v.values, np.roll(v.values, -1)
    vals = np.outer(a, 1 - s) + np.outer(b, s)
    return float(np.sum(f(vals) @ w))


def eval_L(v: NodalSignal, eps: float) -> float:
    """Log barrier ``-int log(eps^2 + v^2) dt`` (composite Simpson, 8 subintervals per cell)."""
    return -_simpson_cells(lambda x: np.log(eps**2 + x * x), v)


def eval_S(u: NodalSignal, v: NodalSignal, eps: float, q: float) -> float:
    """Perturbation ``int (eps^2+v^2)(2 eps^q (Qu) Du + eps^{2q} (Qu)^2) dt``, exact."""
    _same_mesh(u, v)
    N = u.mesh.N
    weight = eps**2 / N + cell_integral_v2(v.values, N)
    mean = u.integral()
    return float(np.sum(weight * (2 * eps**q * mean * u.slopes() + eps ** (2 * q) * mean**2)))


def eval_MS(u: PiecewisePolySignal, lam: float = 1.0, m: Optional[SpectralVector] = None,
            s: float = 0.35, jump_tol: float = 1e-9) -> float:
    """Mumford-Shah energy ``int_{T\\K}|u'|^2 + #K`` plus ``lam ||Au - m||^2`` if ``m`` is given."""
    value = u.gradient_energy() + len(u.jump_set(jump_tol))
    if m is not None:
        from .grid import forward_apply
        Au = forward_apply(u.fourier(m.N), s)
        value += lam * (Au - m).norm_sq()
    return float(value)


# ---------------------------------------------------------------------------
# folding
# ---------------------------------------------------------------------------

def fold_value(x, r: float):
    """Periodic reflection of the real line onto [0, r]."""
    y = np.mod(np.asarray(x, dtype=float), 2.0 * r)
    return r - np.abs(r - y)


def _compose_isometry(v: Union[NodalSignal, PLFunction], levels: Callable, mapping: Callable,
                      level_values: Callable) -> PLFunction:
    """Compose ``v`` with a piecewise isometry whose kinks sit at ``levels``.

    Every crossing of a kink level is inserted as a breakpoint so that the
    result is exactly piecewise linear.
    """
    f = PLFunction.from_nodal(v) if isinstance(v, NodalSignal) else v
    t0, t1, a, b = f.segments()
    new_t, new_x = [f.breakpoints], [mapping(f.values)]
    for i in range(len(t0)):
        lo, hi = min(a[i], b[i]), max(a[i], b[i])
        lv = levels(lo, hi)
        lv = lv[(lv > lo) & (lv < hi)]
        if len(lv) == 0:
            continue
        tc = t0[i] + (lv - a[i]) / (b[i] - a[i]) * (t1[i] - t0[i])
        new_t.append(np.mod(tc, 1.0))
        new_x.append(level_values(lv))
    t = np.concatenate(new_t)
    x = np.concatenate(new_x)
    order = np.argsort(t, kind="stable")
    t, x = t[order], x[order]
    keep = np.concatenate([[True], np.diff(t) > 0])
    return PLFunction(t[keep], x[keep])


def fold(v: Union[NodalSignal, PLFunction], r: float) -> PLFunction:
    """Fold ``v`` into [0, r]; breakpoints gain every crossing of a multiple of ``r``."""
    if not r > 0:
        raise ValueError(f"fold radius must be positive, got {r}")

    def levels(lo, hi):
        return r * np.arange(np.floor(lo / r), np.ceil(hi / r) + 1)

    def level_values(lv):
        k = np.rint(lv / r).astype(int)
        return np.where(k % 2 == 0, 0.0, r)

    return _compose_isometry(v, levels, lambda x: fold_value(x, r), level_values)


def fold_domain(v: Union[NodalSignal, PLFunction], eps: float, width: float = 30.0) -> PLFunction:
    """Map ``v`` into [0, 1 + width*eps] piecewise, as in the domain-reduction argument.

    Negative parts are folded with radius 1, values above ``1 + width*eps`` are
    folded back with radius ``width*eps`` about 1, the rest is untouched.
    """
    top = 1.0 + width * eps
    r = width * eps

    def mapping(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        neg = x < 0
        out[neg] = fold_value(x[neg], 1.0)
        hi = x > top
        out[hi] = fold_value(x[hi] - 1.0, r) + 1.0
        return out

    def levels(lo, hi):
        neg = np.arange(np.floor(min(lo, 0.0)), 1.0)
        pos = 1.0 + r * np.arange(1.0, max(np.ceil((hi - 1.0) / r), 1.0) + 1)
        return np.concatenate([neg, pos])

    return _compose_isometry(v, levels, mapping, mapping)


def continuum_terms(u: NodalSignal, v: Union[NodalSignal, PLFunction], eps: float,
                    q: float, gauss_points: int = 8) -> dict:
    """``L``, ``AT + S`` and their sum for PL ``u`` on the mesh and PL ``v`` on any breakpoints.

    All polynomial parts are exact on the merged breakpoint set; the log
    barrier uses Gauss-Legendre with ``gauss_points`` nodes per segment.
    """
    vf = PLFunction.from_nodal(v) if isinstance(v, NodalSignal) else v
    vf = vf.refine(u.mesh.nodes)
    t0, t1, a, b = vf.segments()
    L = t1 - t0
    mid = np.mod(0.5 * (t0 + t1), 1.0)
    N = u.mesh.N
    cell = np.minimum(np.floor(mid * N).astype(int), N - 1)
    dq = perturbed_slopes(u, eps, q)[cell]
    int_v2 = L * (a * a + a * b + b * b) / 3.0
    fid = L * ((1 - a) ** 2 + (1 - a) * (1 - b) + (1 - b) ** 2) / 3.0
    at_s = np.sum((eps**2 * L + int_v2) * dq**2) + eps * np.sum((b - a) ** 2 / L) + np.sum(fid) / (4 * eps)
    xg, wg = np.polynomial.legendre.leggauss(gauss_points)
    s = 0.5 * (xg + 1.0)
    vals = np.outer(a, 1 - s) + np.outer(b, s)
    log_part = -np.sum(L * (np.log(eps**2 + vals**2) @ (0.5 * wg)))
    return {"L": float(log_part), "AT_S": float(at_s), "total": float(log_part + at_s)}


# ---------------------------------------------------------------------------
# scalar potentials
# ---------------------------------------------------------------------------

def g_eps(t, eps: float):
    """``-log(eps^2 + t^2) + (1 - t)^2 / (4 eps)``."""
    t = np.asarray(t, dtype=float)
    return -np.log(eps**2 + t * t) + (1.0 - t) ** 2 / (4.0 * eps)


def g_N(s, N: float, eps: float, b: float = 1.0):
    """``-N log(eps^2 + s^2) + b (1 - s)^2 / (4 eps)``."""
    s = np.asarray(s, dtype=float)
    return -N * np.log(eps**2 + s * s) + b * (1.0 - s) ** 2 / (4.0 * eps)


def _g_argmin(N: float, eps: float, b: float = 1.0) -> float:
    # stationary points: b (s - 1)(eps^2 + s^2) = 4 eps N s
    roots = np.roots([b, -b, b * eps**2 - 4 * eps * N, -b * eps**2])
    real = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots))].real
    real = real[real > 0]
    vals = g_N(real, N, eps, b)
    s = float(real[np.argmin(vals)])
    # one Newton polish on the cubic
    c = np.array([b, -b, b * eps**2 - 4 * eps * N, -b * eps**2])
    f, df = np.polyval(c, s), np.polyval(np.polyder(c), s)
    if df != 0:
        s -= f / df
    return s


def minimize_g(eps: float):
    """Global minimizer ``(t_min, g_min)`` of ``g_eps``."""
    t = _g_argmin(1.0, eps)
    return t, float(g_eps(t, eps))


def min_gN(N: int, eps: float, b: float = 1.0):
    """Minimizer ``(s*, g_N(s*))`` over ``s > 0``."""
    s = _g_argmin(float(N), eps, b)
    return s, float(g_N(s, N, eps, b))


def eval_G(v: NodalSignal, b: float, eps: float) -> float:
    """``int -N log(eps^2 + (Q_n v)^2) + b (1 - v)^2 / (4 eps) dt``, exact on PL(n)."""
    w = cell_average(v).values
    one_minus = 1.0 - v.values
    B = mass_matrix(v.mesh, sparse=True)
    return float(-np.sum(np.log(eps**2 + w * w)) + b * (one_minus @ (B @ one_minus)) / (4 * eps))


def grad_G(v: NodalSignal, b: float, eps: float) -> np.ndarray:
    """Gradient of :func:`eval_G` with respect to the nodal values."""
    w = cell_average(v).values
    cw = -2.0 * w / (eps**2 + w * w)
    # transpose of the cell average: each node collects half of its two cells
    g_log = 0.5 * (cw + np.roll(cw, 1))
    B = mass_matrix(v.mesh, sparse=True)
    return g_log - b * (B @ (1.0 - v.values)) / (2.0 * eps)


def minimize_G(mesh: Mesh, b: float, eps: float, v0: Optional[NodalSignal] = None,
               gtol: float = 1e-10) -> tuple:
    """Minimize :func:`eval_G` over PL(n) by quasi-Newton descent from ``v0``.

    ``v0`` defaults to the constant ``1 + sqrt(eps)``.  Returns ``(v, value)``.
    """
    from scipy.optimize import minimize

    start = NodalSignal.constant(mesh, 1.0 + np.sqrt(eps)) if v0 is None else v0

    def fun(x):
        sig = NodalSignal(mesh, x)
        return eval_G(sig, b, eps), grad_G(sig, b, eps)

    res = minimize(fun, start.values, jac=True, method="L-BFGS-B",
                   options={"gtol": gtol, "ftol": 1e-15, "maxiter": 10_000})
    v = NodalSignal(mesh, res.x)
    return v, eval_G(v, b, eps)
