"""Alternating minimization for the hierarchical MAP estimate, plus baselines.

The joint objective is quadratic in ``u`` for fixed ``v``; that step is an
exact dense Cholesky solve.  The ``v`` step is a descent method with Armijo
backtracking.  By default the search direction is the gradient
preconditioned with the positive part of the Hessian (a sparse cyclic
tridiagonal matrix); ``preconditioned=False`` gives plain steepest descent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .functionals import ObjectiveBreakdown, eval_discrete_objective, fold_domain, min_gN, perturbed_slopes
from .grid import (
    Mesh,
    NodalSignal,
    SpectralVector,
    apply_measurement,
    apply_measurement_adjoint,
    cell_average_matrix,
    difference_matrix,
    forward_multiplier,
    mass_matrix,
    normal_matrix,
    stiffness_matrix,
)
from .params import ModelParams
from .signals import PiecewisePolySignal, _phi1, _phi2

__all__ = [
    "SolveTrace",
    "MapEstimate",
    "VStepInfo",
    "u_system",
    "solve_u_step",
    "v_objective",
    "v_gradient",
    "solve_v_step",
    "descend_v",
    "alternate_minimize",
    "solve_tikhonov",
    "MSResult",
    "ms_candidates",
    "ms_bruteforce",
    "ms_energy_nodal",
    "ms_reading",
    "ms_energy",
    "diverge_alpha0",
]

STOP_DELTA = "decrease-below-delta"
STOP_MAXITER = "max-iterations"
STOP_STALLED = "line-search-stalled"


@dataclass
class SolveTrace:
    iterates: List[Tuple[int, ObjectiveBreakdown]] = field(default_factory=list)
    stop_reason: Optional[str] = None
    inner: List["VStepInfo"] = field(default_factory=list)

    @property
    def totals(self) -> np.ndarray:
        return np.array([b.total for _, b in self.iterates])


@dataclass
class MapEstimate:
    u: NodalSignal
    v: NodalSignal
    trace: SolveTrace


@dataclass
class VStepInfo:
    iterations: int
    stop_reason: str
    values: List[float]


@lru_cache(maxsize=8)
def _normal_cached(n: int, s: float) -> np.ndarray:
    mat = normal_matrix(Mesh(n), s)
    mat.setflags(write=False)
    return mat


# ---------------------------------------------------------------------------
# u step
# ---------------------------------------------------------------------------

def u_system(v: NodalSignal, m: SpectralVector, p: ModelParams):
    """Matrix and right-hand side of the normal equations in ``u`` at fixed ``v``.

    ``((1/N) D_q^T Lambda D_q + lam Re(A^H A)) u = lam Re(A^H m)``.
    """
    mesh = v.mesh
    N = mesh.N
    lam = p.eps**2 + (cell_average_matrix(mesh) @ v.values) ** 2
    D = difference_matrix(mesh)
    c = p.eps**p.q / N
    # D_q = D + c 11^T expanded so that only the sparse part is multiplied
    DtL1 = D.T @ lam
    M = (D.T @ sp.diags(lam) @ D).toarray()
    M += c * (DtL1[:, None] + DtL1[None, :])
    M += c * c * lam.sum()
    M /= N
    M += p.residual_weight * _normal_cached(mesh.n, p.s)
    rhs = p.residual_weight * apply_measurement_adjoint(m.coeffs, p.s)
    return M, rhs


def _spd_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    factor = scipy.linalg.cho_factor(M, lower=False, check_finite=False)
    x = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    # one step of iterative refinement
    x += scipy.linalg.cho_solve(factor, rhs - M @ x, check_finite=False)
    return x


def solve_u_step(v: NodalSignal, m: SpectralVector, p: ModelParams) -> NodalSignal:
    """Exact minimizer over ``u`` of the objective at fixed ``v``."""
    if m.N != v.mesh.N:
        raise ValueError("measurement truncation does not match mesh")
    M, rhs = u_system(v, m, p)
    return NodalSignal(v.mesh, _spd_solve(M, rhs))


# ---------------------------------------------------------------------------
# v step
# ---------------------------------------------------------------------------

class _VProblem:
    """Objective in ``v`` at fixed ``u`` (terms independent of ``v`` dropped)."""

    def __init__(self, u: NodalSignal, p: ModelParams):
        mesh = u.mesh
        self.N = mesh.N
        self.p = p
        self.g = perturbed_slopes(u, p.eps, p.q) ** 2
        self.c_log = p.logdet_weight(self.N)
        self.K = stiffness_matrix(mesh, sparse=True)
        self.B = mass_matrix(mesh, sparse=True)
        self.Q = cell_average_matrix(mesh)

    def value(self, v: np.ndarray) -> float:
        e2 = self.p.eps**2
        w = 0.5 * (v + np.roll(v, -1))
        r = 1.0 - v
        return float(-self.c_log * np.sum(np.log(e2 + w * w))
                     + np.sum((e2 + w * w) * self.g) / self.N
                     + self.p.eps * (v @ (self.K @ v))
                     + (r @ (self.B @ r)) / (4.0 * self.p.eps))

    def gradient(self, v: np.ndarray) -> np.ndarray:
        e2 = self.p.eps**2
        w = 0.5 * (v + np.roll(v, -1))
        dw = -self.c_log * 2.0 * w / (e2 + w * w) + 2.0 * w * self.g / self.N
        return (0.5 * (dw + np.roll(dw, 1))
                + 2.0 * self.p.eps * (self.K @ v)
                - (self.B @ (1.0 - v)) / (2.0 * self.p.eps))

    def metric(self, v: np.ndarray) -> sp.csc_matrix:
        """Positive part of the Hessian: exact for the quadratic terms, clipped for the log."""
        e2 = self.p.eps**2
        w = 0.5 * (v + np.roll(v, -1))
        curv = 2.0 * self.g / self.N + np.maximum(
            0.0, -self.c_log * 2.0 * (e2 - w * w) / (e2 + w * w) ** 2)
        H = self.Q.T @ sp.diags(curv) @ self.Q + 2.0 * self.p.eps * self.K + self.B / (2.0 * self.p.eps)
        return sp.csc_matrix(H)


def v_objective(u: NodalSignal, v: NodalSignal, p: ModelParams) -> float:
    """The ``v``-dependent part of the objective."""
    return _VProblem(u, p).value(v.values)


def v_gradient(u: NodalSignal, v: NodalSignal, p: ModelParams) -> np.ndarray:
    """Analytic gradient of :func:`v_objective` in nodal coordinates."""
    return _VProblem(u, p).gradient(v.values)


def descend_v(u: NodalSignal, v_init: NodalSignal, p: ModelParams) -> Tuple[NodalSignal, VStepInfo]:
    """Descent with Armijo backtracking; returns the iterate and run statistics."""
    prob = _VProblem(u, p)
    v = v_init.values.copy()
    f = prob.value(v)
    values = [f]
    reason = STOP_MAXITER
    it = 0
    for it in range(1, p.inner_max_iter + 1):
        grad = prob.gradient(v)
        if p.preconditioned:
            d = -spla.spsolve(prob.metric(v), grad)
        else:
            d = -grad
        slope = float(grad @ d)
        if not slope < 0:
            reason = STOP_STALLED
            it -= 1
            break
        step = p.initial_step
        accepted = False
        for _ in range(p.max_backtracks + 1):
            trial = v + step * d
            f_trial = prob.value(trial)
            if np.isfinite(f_trial) and f_trial <= f + p.armijo * step * slope:
                accepted = True
                break
            step *= p.backtrack
        if not accepted:
            reason = STOP_STALLED
            it -= 1
            break
        improvement = f - f_trial
        v, f = trial, f_trial
        values.append(f)
        if improvement <= p.inner_tol * (1.0 + abs(f)):
            reason = "converged"
            break
    return NodalSignal(v_init.mesh, v), VStepInfo(it, reason, values)


def solve_v_step(u: NodalSignal, v_init: NodalSignal, p: ModelParams) -> NodalSignal:
    if u.mesh != v_init.mesh:
        raise ValueError("mesh mismatch")
    return descend_v(u, v_init, p)[0]


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------

def alternate_minimize(m: SpectralVector, p: ModelParams,
                       init: Optional[Tuple[NodalSignal, NodalSignal]] = None) -> MapEstimate:
    """Alternate exact ``u`` solves and ``v`` descents until the decrease falls below ``delta``."""
    mesh = Mesh.from_size(m.N)
    if init is None:
        u, v = NodalSignal.constant(mesh, 0.0), NodalSignal.constant(mesh, 1.0)
    else:
        u, v = init
    trace = SolveTrace()
    prev = eval_discrete_objective(u, v, m, p)
    trace.iterates.append((0, prev))
    delta = 1e-8 * (1.0 + abs(prev.total)) if p.delta is None else p.delta
    trace.stop_reason = STOP_MAXITER
    for j in range(1, p.max_iter + 1):
        u = solve_u_step(v, m, p)
        v, info = descend_v(u, v, p)
        trace.inner.append(info)
        cur = eval_discrete_objective(u, v, m, p)
        trace.iterates.append((j, cur))
        if not cur.total <= prev.total - delta:
            trace.stop_reason = STOP_STALLED if info.iterations == 0 else STOP_DELTA
            break
        prev = cur
    if p.fold_v:
        w = fold_domain(v, p.eps)
        v = NodalSignal(mesh, w(mesh.nodes))
    return MapEstimate(u, v, trace)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def solve_tikhonov(m: SpectralVector, mesh: Mesh, lam: float, s: float = 0.35) -> NodalSignal:
    """Minimize ``int |Du|^2 + lam ||A_n u - m||^2`` over PL(n)."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    M = stiffness_matrix(mesh) + lam * _normal_cached(mesh.n, s)
    rhs = lam * apply_measurement_adjoint(m.coeffs, s)
    return NodalSignal(mesh, _spd_solve(M, rhs))


class MSResult(NamedTuple):
    signal: PiecewisePolySignal
    jumps: np.ndarray
    value: float
    u: NodalSignal


def ms_candidates(mesh: Mesh, jump_grid: int) -> np.ndarray:
    """Candidate jump positions: midpoints of ``jump_grid`` evenly spread cells."""
    if not 1 <= jump_grid <= mesh.N:
        raise ValueError("jump_grid must lie in [1, N]")
    cells = np.floor((np.arange(jump_grid) + 0.5) * mesh.N / jump_grid).astype(int)
    return (cells + 0.5) / mesh.N


class _JumpSpace:
    """PL functions on the mesh refined by a jump set, discontinuous at the jumps.

    Every breakpoint carries a left and a right degree of freedom; the two
    coincide except at jump points.
    """

    def __init__(self, N: int, jumps):
        jumps = np.mod(np.asarray(jumps, dtype=float), 1.0)
        nodes = np.arange(N) / N
        # snap jumps that sit on a node so the node is not duplicated
        snapped = np.where(np.abs(jumps * N - np.rint(jumps * N)) < 1e-9, np.rint(jumps * N) / N, jumps)
        snapped = np.mod(snapped, 1.0)
        pts = np.union1d(nodes, snapped)
        is_jump = np.isin(pts, snapped)
        left = np.empty(len(pts), dtype=int)
        right = np.empty(len(pts), dtype=int)
        k = 0
        for i, jmp in enumerate(is_jump):
            left[i] = k
            right[i] = k + 1 if jmp else k
            k = right[i] + 1
        self.N, self.pts, self.is_jump, self.ndof = N, pts, is_jump, k
        self.left, self.right = left, right
        self.a = pts
        self.b = np.append(pts[1:], pts[0] + 1.0)
        self.dof_a = right
        self.dof_b = np.roll(left, -1)

    def gradient_matrix(self) -> np.ndarray:
        G = np.zeros((self.ndof, self.ndof))
        w = 1.0 / (self.b - self.a)
        np.add.at(G, (self.dof_a, self.dof_a), w)
        np.add.at(G, (self.dof_b, self.dof_b), w)
        np.add.at(G, (self.dof_a, self.dof_b), -w)
        np.add.at(G, (self.dof_b, self.dof_a), -w)
        return G

    def measurement_matrix(self, s: float) -> np.ndarray:
        N = self.N
        j = np.arange(-N, N + 1)
        L = self.b - self.a
        z = -2j * np.pi * j[:, None]
        x = (z * L[None, :]).ravel()
        p1 = _phi1(x).reshape(len(j), -1)
        p2 = _phi2(x).reshape(len(j), -1)
        e0 = np.exp(z * self.a[None, :]) * L[None, :]
        F = np.zeros((self.ndof, 2 * N + 1), dtype=complex)
        np.add.at(F, self.dof_a, (e0 * (p1 - p2)).T)
        np.add.at(F, self.dof_b, (e0 * p2).T)
        return forward_multiplier(j, s)[:, None] * F.T

    def signal(self, x: np.ndarray) -> PiecewisePolySignal:
        """Exact signal for the coefficient vector ``x`` when the breakpoints
        of each piece are commensurate; otherwise resolved to 1/64 of a cell."""
        if not self.is_jump.any():
            vals = x[self.left]
            return PiecewisePolySignal(np.array([0.0]), (np.append(vals, vals[0]),))
        M = len(self.pts)
        jidx = np.flatnonzero(self.is_jump)
        pieces = []
        for n_, i in enumerate(jidx):
            stop = jidx[(n_ + 1) % len(jidx)]
            count = (stop - i) % M or M
            span = (i + np.arange(count + 1)) % M
            t = self.pts[i] + np.mod(self.pts[span] - self.pts[i], 1.0)
            t[-1] = t[0] + (np.mod(self.pts[stop] - self.pts[i], 1.0) or 1.0)
            vals = np.concatenate([[x[self.right[span[0]]]], x[self.left[span[1:]]]])
            h = np.min(np.diff(t))
            ratio = (t - t[0]) / h
            if not np.allclose(ratio, np.rint(ratio), atol=1e-9):
                h = 1.0 / (64 * self.N)
            m = int(np.rint((t[-1] - t[0]) / h)) + 1
            pieces.append(np.interp(np.linspace(t[0], t[-1], m), t, vals))
        return PiecewisePolySignal(self.pts[jidx], tuple(pieces))


def ms_bruteforce(m: SpectralVector, mesh: Mesh, lam: float, k_max: int = 2, jump_grid: int = 16,
                  s: float = 0.35) -> MSResult:
    """Global minimizer of ``int_{T\\K}|Du|^2 + #K + lam||A_n u - m||^2`` over gridded jump sets.

    Every jump set of size ``0..k_max`` drawn from :func:`ms_candidates` is
    enumerated.  For each one the quadratic over nodal ``u`` is solved with
    the derivative penalty dropped on the cells holding a jump.  The returned
    signal reads the free cells as jumps at the candidate points.
    """
    N = mesh.N
    if m.N != N:
        raise ValueError("measurement truncation does not match mesh")
    if not lam > 0:
        raise ValueError("lam must be positive")
    cand = ms_candidates(mesh, jump_grid)
    D = difference_matrix(mesh).toarray()
    C = lam * _normal_cached(mesh.n, s)
    rhs = lam * apply_measurement_adjoint(m.coeffs, s)
    best = None
    for k in range(k_max + 1):
        for K in itertools.combinations(range(jump_grid), k):
            cells = np.floor(cand[list(K)] * N).astype(int)
            keep = np.ones(N, dtype=bool)
            keep[cells] = False
            Dk = D[keep]
            u = _spd_solve(Dk.T @ Dk / N + C, rhs)
            resid = float(np.sum(np.abs(apply_measurement(u, s) - m.coeffs) ** 2))
            value = float(np.sum((Dk @ u) ** 2) / N) + k + lam * resid
            if best is None or value < best[0]:
                best = (value, cells, u)
    value, cells, u = best
    un = NodalSignal(mesh, u)
    sig, _ = ms_reading(un, cells)
    return MSResult(sig, (cells + 0.5) / N, value, un)


def ms_energy_nodal(u: NodalSignal, jump_cells, m: SpectralVector, lam: float, s: float = 0.35) -> float:
    """The quadratic-plus-count energy minimized by :func:`ms_bruteforce`, at nodal ``u``."""
    d = u.slopes()
    keep = np.ones(u.mesh.N, dtype=bool)
    keep[list(jump_cells)] = False
    resid = apply_measurement(u.values, s) - m.coeffs
    return float(np.sum(d[keep] ** 2) / u.mesh.N + len(jump_cells) + lam * np.sum(np.abs(resid) ** 2))


def ms_reading(u: NodalSignal, jump_cells) -> Tuple[PiecewisePolySignal, float]:
    """Read nodal ``u`` as a function with a jump at the midpoint of each cell in ``jump_cells``.

    Inside a jump cell ``u`` is held at the adjacent nodal value on each side
    of the midpoint; elsewhere it is the usual interpolant.  Returns the
    signal together with its gradient energy off the jump set.
    """
    space, x = _reading_dofs(u, jump_cells)
    return space.signal(x), float(x @ space.gradient_matrix() @ x)


def _reading_dofs(u: NodalSignal, jump_cells):
    N = u.mesh.N
    cells = sorted(int(c) % N for c in jump_cells)
    space = _JumpSpace(N, (np.array(cells, dtype=float) + 0.5) / N)
    x = np.empty(space.ndof)
    node_idx = np.rint(space.pts * N).astype(int)
    on_node = ~space.is_jump
    x[space.left[on_node]] = u.values[node_idx[on_node]]
    jmp = np.flatnonzero(space.is_jump)
    c = np.floor(space.pts[jmp] * N).astype(int)
    x[space.left[jmp]] = u.values[c]
    x[space.right[jmp]] = u.values[(c + 1) % N]
    return space, x


def ms_energy(u: NodalSignal, jump_cells, m: SpectralVector, lam: float, s: float = 0.35) -> float:
    """Mumford-Shah energy of the jump reading of ``u`` (see :func:`ms_reading`)."""
    space, x = _reading_dofs(u, jump_cells)
    A = space.measurement_matrix(s)
    resid = A @ x - m.coeffs
    return float(x @ space.gradient_matrix() @ x) + len(jump_cells) + lam * float(np.sum(np.abs(resid) ** 2))


def diverge_alpha0(n_range, eps: float, b: float = 1.0) -> np.ndarray:
    """Rows ``(N, s*, min g_N)`` for each level in ``n_range``."""
    rows = []
    for n in n_range:
        N = 2**n
        s_star, val = min_gN(N, eps, b)
        rows.append((N, s_star, val))
    return np.array(rows)
