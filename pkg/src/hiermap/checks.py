"""Self-verification suite: fast numerical checks of the library's invariants.

Each check returns a :class:`CheckResult`; ``run_all`` collects them.  The
suite backs the ``verify`` command and is cheap enough for a release gate.
"""

from __future__ import annotations

from typing import Callable, Dict, List, NamedTuple

import numpy as np
from scipy import integrate

from .functionals import (
    eval_discrete_objective,
    fold,
    fold_domain,
    g_eps,
    g_N,
    min_gN,
    minimize_G,
    minimize_g,
)
from .grid import (
    Mesh,
    NodalSignal,
    SpectralVector,
    forward_apply,
    mass_matrix,
    measurement_matrix,
    normal_matrix,
    stiffness_matrix,
)
from .params import ModelParams
from .signals import PLFunction
from .solver import ms_bruteforce, solve_tikhonov, solve_u_step, u_system, v_gradient, v_objective
from .stochastic import NoiseSpec, make_rng, prior_v_precision, sample_noise, sample_prior_v

__all__ = ["CheckResult", "run_all", "CHECKS", "minimizer_upper_bound", "potential_claims", "infimum_sandwich", "fold_properties"]


class CheckResult(NamedTuple):
    name: str
    ok: bool
    numbers: Dict[str, float]

    def line(self) -> str:
        nums = " ".join(f"{k}={v:.6g}" for k, v in self.numbers.items())
        return f"{self.name}\t{'PASS' if self.ok else 'FAIL'}\t{nums}"


def _hat(mesh: Mesh, k: int):
    N = mesh.N

    def f(t):
        d = np.abs(((t - k / N) + 0.5) % 1.0 - 0.5) * N
        return np.maximum(0.0, 1.0 - d)

    return f


def check_mass_matrix(perturb: float = 0.0) -> CheckResult:
    mesh = Mesh(3)
    B = mass_matrix(mesh) * (1.0 + perturb)
    ref = np.empty_like(B)
    breaks = list(mesh.nodes)
    for i in range(mesh.N):
        for j in range(mesh.N):
            fi, fj = _hat(mesh, i), _hat(mesh, j)
            ref[i, j] = integrate.quad(lambda t: fi(t) * fj(t), 0, 1, points=breaks, epsabs=1e-14)[0]
    err = float(np.max(np.abs(B - ref)))
    return CheckResult("mass-matrix", err < 1e-12, {"max_abs_err": err})


def check_stiffness() -> CheckResult:
    mesh = Mesh(5)
    K = stiffness_matrix(mesh)
    rng = make_rng(1)
    u = rng.standard_normal(mesh.N)
    energy = float(u @ K @ u)
    direct = float(np.sum(NodalSignal(mesh, u).slopes() ** 2) / mesh.N)
    null = float(np.max(np.abs(K @ np.ones(mesh.N))))
    ok = abs(energy - direct) < 1e-9 * abs(direct) and null < 1e-9
    return CheckResult("stiffness-matrix", ok, {"energy_err": abs(energy - direct), "constant_residual": null})


def check_normal_matrix() -> CheckResult:
    mesh = Mesh(5)
    A = measurement_matrix(mesh, 0.35)
    err = float(np.max(np.abs(normal_matrix(mesh, 0.35) - np.real(A.conj().T @ A))))
    return CheckResult("normal-matrix", err < 1e-12, {"max_abs_err": err})


def check_objective_example() -> CheckResult:
    mesh = Mesh(1)
    p = ModelParams(eps=0.1, alpha=1.0, lam=1.0)
    br = eval_discrete_objective(NodalSignal.constant(mesh, 0.0), NodalSignal.constant(mesh, 1.0),
                                 SpectralVector.zeros(2), p)
    want = -np.log(1.01)
    return CheckResult("objective-small-case", abs(br.total - want) < 1e-14,
                       {"total": br.total, "expected": want})


def minimizer_upper_bound(eps: float) -> float:
    """Root of ``t (t - 1) = 4 eps``; ``g_eps' >= -2/t + (t-1)/(2 eps)`` vanishes there."""
    return 1.0 + 0.5 * (np.sqrt(1.0 + 16.0 * eps) - 1.0)


def potential_claims(eps: float, pairs: int = 100_000, seed: int = 0) -> Dict[str, float]:
    """Minimizer bound and the three comparison claims for ``g_eps`` on random pairs.

    Returns the minimizer, the bound and the number of violations per claim.
    """
    rng = make_rng(seed)
    t_min, g_min = minimize_g(eps)
    top = 1.0 + 30.0 * eps
    # (i): 1 <= t <= 1+30eps < s
    t = rng.uniform(1.0, top, pairs)
    s = top + rng.exponential(1.0, pairs) * rng.choice([1e-3, 1e-1, 10.0], pairs)
    v1 = int(np.sum(g_eps(t, eps) > g_eps(s, eps)))
    # (ii): t in [0, 1], s <= -1
    t = rng.uniform(0.0, 1.0, pairs)
    s = -1.0 - rng.exponential(1.0, pairs) * rng.choice([1e-3, 1e-1, 10.0], pairs)
    v2 = int(np.sum(g_eps(t, eps) > g_eps(s, eps)))
    # (iii): t in [0, 1], s = -t
    t = rng.uniform(0.0, 1.0, pairs)
    v3 = int(np.sum(g_eps(t, eps) > g_eps(-t, eps)))
    return {"t_min": t_min, "g_min": g_min, "upper": minimizer_upper_bound(eps), "level_top": top,
            "viol_i": v1, "viol_ii": v2, "viol_iii": v3}


def check_potential(eps_values=(0.12, 0.06, 0.01), pairs: int = 20_000) -> List[CheckResult]:
    out = []
    for eps in eps_values:
        r = potential_claims(eps, pairs)
        ok = (1.0 <= r["t_min"] <= min(r["upper"], r["level_top"]) and r["g_min"] <= g_eps(1.0, eps)
              and r["viol_i"] == r["viol_ii"] == r["viol_iii"] == 0)
        out.append(CheckResult(f"g-eps-minimizer[eps={eps}]", ok, r))
    return out


def infimum_sandwich(n: int, eps: float, b: float = 1.0) -> Dict[str, float]:
    mesh = Mesh(n)
    N = mesh.N
    _, value = minimize_G(mesh, b, eps)
    witness = float(g_N(1.0 + np.sqrt(eps), N, eps, b))
    lower = -(4.0 / b + 2.0) * eps * N**2
    return {"value": value, "witness": witness, "lower": lower}


def check_sandwich(cases=((8, 0.01),)) -> List[CheckResult]:
    out = []
    for n, eps in cases:
        r = infimum_sandwich(n, eps)
        out.append(CheckResult(f"G-sandwich[n={n},eps={eps}]", r["lower"] <= r["value"] <= r["witness"], r))
    return out


def fold_properties(f: PLFunction, r: float) -> Dict[str, float]:
    """Largest violations of the three folding properties for one PL function."""
    g = fold(f, r)
    t = g.breakpoints
    fv, gv = f(t), g.values
    # inserted breakpoints are crossings of multiples of r, where f equals that multiple
    crossing = ~np.isin(t, f.breakpoints)
    fv[crossing] = r * np.rint(fv[crossing] / r)
    slack = 8 * np.finfo(float).eps * (np.abs(fv) + r)
    return {
        "abs_excess": float(np.max(np.abs(gv) - np.abs(fv) - slack)),
        "dist_excess": float(np.max(np.abs(r - gv) - np.abs(r - fv) - slack)),
        "energy_rel_err": abs(g.derivative_energy() - f.derivative_energy()) / max(f.derivative_energy(), 1e-300),
    }


def random_pl(rng: np.random.Generator, max_nodes: int = 40, scale: float = 3.0) -> PLFunction:
    k = int(rng.integers(2, max_nodes))
    t = np.sort(rng.choice(4096, size=k, replace=False)) / 4096.0
    return PLFunction(t, scale * rng.standard_normal(k) + rng.uniform(-2, 3))


def check_folding(samples: int = 100) -> CheckResult:
    rng = make_rng(11)
    worst = {"abs_excess": -np.inf, "dist_excess": -np.inf, "energy_rel_err": 0.0}
    for _ in range(samples):
        f = random_pl(rng)
        for r in (1.0, 1.0 + 30 * 0.01):
            d = fold_properties(f, r)
            worst = {k: max(worst[k], d[k]) for k in worst}
    ok = worst["abs_excess"] <= 0 and worst["dist_excess"] <= 0 and worst["energy_rel_err"] <= 1e-12
    return CheckResult("folding-lemma", ok, worst)


def check_domain_fold() -> CheckResult:
    from .functionals import continuum_terms

    rng = make_rng(5)
    eps, mesh = 0.05, Mesh(5)
    worst = -np.inf
    for _ in range(20):
        u = NodalSignal(mesh, rng.standard_normal(mesh.N))
        v = NodalSignal(mesh, 3.0 * rng.standard_normal(mesh.N) + 1.0)
        before = continuum_terms(u, v, eps, 2.0)["total"]
        after = continuum_terms(u, fold_domain(v, eps), eps, 2.0)["total"]
        worst = max(worst, after - before)
    return CheckResult("domain-fold-decrease", worst <= 1e-9, {"max_increase": worst})


def check_divergence() -> CheckResult:
    vals = np.array([min_gN(2**n, 0.01)[1] for n in range(6, 15)])
    ok = bool(np.all(np.diff(vals) < 0) and vals[-1] < -1e3)
    return CheckResult("alpha0-divergence", ok, {"value_n6": vals[0], "value_n14": vals[-1]})


def check_noise_energy(draws: int = 2000) -> CheckResult:
    mesh = Mesh(6)
    spec = NoiseSpec(5e-3, 1.0)
    rng = make_rng(2)
    e = np.array([sample_noise(mesh, spec, rng).norm_sq() for _ in range(draws)])
    want = (2 * mesh.N + 1) * spec.sigma**2 / mesh.N
    se = e.std(ddof=1) / np.sqrt(draws)
    return CheckResult("noise-energy", abs(e.mean() - want) < 3 * se,
                       {"mean": e.mean(), "expected": want, "stderr": se})


def check_prior_v(draws: int = 2000) -> CheckResult:
    mesh = Mesh(4)
    p = ModelParams(eps=0.1)
    rng = make_rng(3)
    B = mass_matrix(mesh)
    P = prior_v_precision(mesh, p)
    want = float(np.trace(B @ np.linalg.inv(P)))
    z = np.array([sample_prior_v(mesh, p, rng).values - 1.0 for _ in range(draws)])
    e = np.einsum("ki,ij,kj->k", z, B, z)
    se = e.std(ddof=1) / np.sqrt(draws)
    return CheckResult("prior-v-variance", abs(e.mean() - want) < 3 * se,
                       {"mean": e.mean(), "expected": want, "stderr": se})


def _solver_case():
    mesh = Mesh(5)
    rng = make_rng(4)
    p = ModelParams(eps=0.05, lam=50.0)
    u = NodalSignal(mesh, rng.standard_normal(mesh.N))
    v = NodalSignal(mesh, 1.0 + 0.3 * rng.standard_normal(mesh.N))
    m = forward_apply(NodalSignal(mesh, rng.standard_normal(mesh.N)), p.s)
    return mesh, p, u, v, m


def check_u_step() -> CheckResult:
    mesh, p, _, v, m = _solver_case()
    u = solve_u_step(v, m, p)
    M, rhs = u_system(v, m, p)
    res = float(np.linalg.norm(M @ u.values - rhs) / np.linalg.norm(rhs))
    return CheckResult("u-step-optimality", res < 1e-8, {"relative_residual": res})


def check_v_gradient() -> CheckResult:
    mesh, p, u, v, m = _solver_case()
    g = v_gradient(u, v, p)
    rng = make_rng(6)
    worst = 0.0
    for _ in range(5):
        d = rng.standard_normal(mesh.N)
        h = 1e-6
        fd = (v_objective(u, NodalSignal(mesh, v.values + h * d), p)
              - v_objective(u, NodalSignal(mesh, v.values - h * d), p)) / (2 * h)
        worst = max(worst, abs(fd - g @ d) / max(abs(fd), 1e-12))
    return CheckResult("v-gradient", worst < 1e-6, {"max_rel_err": worst})


def check_ms_reduces_to_tikhonov() -> CheckResult:
    mesh, _, _, _, m = _solver_case()
    a = ms_bruteforce(m, mesh, 10.0, k_max=0).u.values
    b = solve_tikhonov(m, mesh, 10.0).values
    err = float(np.max(np.abs(a - b)))
    return CheckResult("ms-empty-jump-set", err < 1e-10, {"max_abs_err": err})


CHECKS: Dict[str, Callable[..., object]] = {
    "mass-matrix": check_mass_matrix,
    "stiffness-matrix": check_stiffness,
    "normal-matrix": check_normal_matrix,
    "objective-small-case": check_objective_example,
    "g-eps": check_potential,
    "G-sandwich": check_sandwich,
    "folding-lemma": check_folding,
    "domain-fold-decrease": check_domain_fold,
    "alpha0-divergence": check_divergence,
    "noise-energy": check_noise_energy,
    "prior-v-variance": check_prior_v,
    "u-step-optimality": check_u_step,
    "v-gradient": check_v_gradient,
    "ms-empty-jump-set": check_ms_reduces_to_tikhonov,
}


def run_all(perturb_mass: float = 0.0) -> List[CheckResult]:
    """Run every check.  ``perturb_mass`` scales the mass matrix under test (negative control)."""
    results: List[CheckResult] = []
    for name, fn in CHECKS.items():
        out = fn(perturb_mass) if name == "mass-matrix" else fn()
        results.extend(out if isinstance(out, list) else [out])
    return results
