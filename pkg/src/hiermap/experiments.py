"""Experiment driver: configuration, reconstruction runs, sweeps and file output."""

from __future__ import annotations

import os
import platform
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .checks import CheckResult, run_all
from .functionals import ObjectiveBreakdown
from .grid import Mesh, NodalSignal, mass_matrix
from .io import ConfigError, read_signal_csv, write_csv, write_signal_csv, write_svg
from .metrics import detect_wells, fidelity_integral, relative_l2
from .params import ModelParams
from .signals import SIGNAL_JUMPS, PiecewisePolySignal, make_signal
from .solver import alternate_minimize, diverge_alpha0
from .stochastic import make_rng, prior_v_precision, sample_prior, synthesize_measurement

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "load_truth",
    "cmd_reconstruct",
    "cmd_sweep",
    "cmd_diverge",
    "cmd_sample_prior",
    "cmd_verify",
    "record_metrics",
    "metrics_from_files",
    "runtime_metadata",
]

COMMANDS = ("reconstruct", "sweep", "diverge", "sample-prior", "verify")
SIGNALS = ("step", "piecewise-smooth", "custom-file")
FINE_SAMPLES = 1 << 14


def _floats(x) -> Tuple[float, ...]:
    if isinstance(x, str):
        x = [p for p in x.replace(" ", "").split(",") if p]
    elif np.isscalar(x):
        x = [x]
    return tuple(float(v) for v in x)


def _ints(x) -> Tuple[int, ...]:
    vals = _floats(x)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {vals}")
    return tuple(int(v) for v in vals)


def _opt_float(x) -> Optional[float]:
    if x is None or (isinstance(x, str) and x.strip().lower() in ("", "none", "default")):
        return None
    return float(x)


def _bool(x) -> bool:
    if isinstance(x, bool):
        return x
    s = str(x).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {x!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.  ``n`` and ``eps`` are explicit lists."""

    command: str = "reconstruct"
    n: Tuple[int, ...] = (9,)
    eps: Tuple[float, ...] = (0.01,)
    alpha: float = 1.0
    q: float = 2.0
    s: float = 0.35
    sigma: float = 5e-3
    lam: Optional[float] = None
    kappa: Optional[float] = None
    signal: str = "step"
    signal_file: Optional[str] = None
    seed: int = 0
    delta: Optional[float] = None
    max_iter: int = 50
    out_dir: Optional[str] = None
    samples: int = 4
    draws: int = 2000
    full_solves: bool = False
    fold_v: bool = False

    _PARSERS = None  # filled below

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.signal not in SIGNALS:
            raise ConfigError(f"unknown signal {self.signal!r}; choose from {', '.join(SIGNALS)}")
        if self.signal == "custom-file" and not self.signal_file:
            raise ConfigError("signal = custom-file needs signal_file")
        if not self.n or any(not 1 <= k <= 16 for k in self.n):
            raise ConfigError(f"mesh levels must lie in [1, 16], got {self.n}")
        if not self.eps:
            raise ConfigError("at least one eps value is required")
        if self.samples < 1 or self.draws < 2:
            raise ConfigError("samples must be >= 1 and draws >= 2")
        for e in self.eps:
            try:
                self.params(e)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    @classmethod
    def from_mapping(cls, data: Dict[str, object]) -> "ExperimentConfig":
        """Build from string (or typed) values; unknown keys are an error."""
        aliases = {"lambda": "lam", "out": "out_dir", "max_iter": "max_iter"}
        parsers = {
            "command": str, "n": _ints, "eps": _floats, "alpha": float, "q": float, "s": float,
            "sigma": float, "lam": _opt_float, "kappa": _opt_float, "signal": str,
            "signal_file": lambda x: None if x in (None, "") else str(x), "seed": lambda x: int(float(x)),
            "delta": _opt_float, "max_iter": lambda x: int(float(x)), "out_dir": lambda x: None if x in (None, "") else str(x),
            "samples": lambda x: int(float(x)), "draws": lambda x: int(float(x)),
            "full_solves": _bool, "fold_v": _bool,
        }
        kwargs = {}
        for key, value in data.items():
            key = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
            if key not in parsers:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                kwargs[key] = parsers[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
        return cls(**kwargs)

    def params(self, eps: float) -> ModelParams:
        return ModelParams(eps=eps, alpha=self.alpha, q=self.q, s=self.s, sigma=self.sigma, lam=self.lam,
                           kappa=self.kappa, delta=self.delta, max_iter=self.max_iter, fold_v=self.fold_v)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def snapshot(self) -> Dict[str, object]:
        d = {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}
        d["n"], d["eps"] = list(self.n), list(self.eps)
        return d

    def to_text(self) -> str:
        lines = []
        for k, v in self.snapshot().items():
            if isinstance(v, list):
                v = ", ".join(format(x, ".17g") if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = format(v, ".17g")
            lines.append(f"{k} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


def runtime_metadata() -> Dict[str, str]:
    """Library versions and thread settings that affect floating-point determinism."""
    import scipy

    meta = {
        "hiermap": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "cpu_count": str(os.cpu_count()),
    }
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        meta[var.lower()] = os.environ.get(var, "unset")
    return meta


def load_truth(cfg: ExperimentConfig):
    """The true signal: a built-in generator or a uniformly sampled periodic CSV (t, value)."""
    if cfg.signal != "custom-file":
        return make_signal(cfg.signal)
    try:
        t, x = read_signal_csv(cfg.signal_file)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load signal file: {exc}") from exc
    M = len(x)
    if M < 2 or M & (M - 1) or not np.allclose(t, np.arange(M) / M):
        raise ConfigError("custom signal must be sampled at t = k/M with M a power of two")
    return NodalSignal(Mesh.from_size(M), x)


@dataclass
class RunRecord:
    config: Dict[str, object]
    params: Dict[str, object]
    N: int
    eps: float
    trace: List[Tuple[int, ObjectiveBreakdown]]
    stop_reason: str
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    m_values: np.ndarray
    metrics: Dict[str, object]
    metadata: Dict[str, str] = field(default_factory=runtime_metadata)
    run_dir: Optional[Path] = None

    def u_signal(self) -> NodalSignal:
        return NodalSignal(Mesh.from_size(self.N), self.u)

    def v_signal(self) -> NodalSignal:
        return NodalSignal(Mesh.from_size(self.N), self.v)


def record_metrics(u: NodalSignal, v: NodalSignal, eps: float, truth=None) -> Dict[str, object]:
    wells = detect_wells(v)
    out: Dict[str, object] = {
        "well_count": len(wells),
        "well_locations": [w.location for w in wells],
        "well_depths": [w.depth for w in wells],
        "min_v": float(v.values.min()),
        "max_v": float(v.values.max()),
        "fidelity": fidelity_integral(v),
        "fidelity_over_eps": fidelity_integral(v) / eps,
    }
    if truth is not None:
        out["l2_error"] = relative_l2(u, truth, FINE_SAMPLES)
    return out


def _write_run(rec: RunRecord, truth, run_dir: Path, cfg_text: str) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    write_signal_csv(run_dir / "u.csv", rec.t, rec.u)
    write_signal_csv(run_dir / "v.csv", rec.t, rec.v)
    write_signal_csv(run_dir / "m.csv", rec.t, rec.m_values)
    names = ["log_term", "grad_term", "v_smooth", "v_fidelity", "residual", "total"]
    write_csv(run_dir / "trace.csv", ["iteration"] + names,
              ([it] + [br.as_dict()[k] for k in names] for it, br in rec.trace))
    scalar = {k: v for k, v in rec.metrics.items() if not isinstance(v, list)}
    rows = [(k, v) for k, v in scalar.items()] + [("stop_reason", rec.stop_reason)]
    rows += [(f"well_{i}_location", loc) for i, loc in enumerate(rec.metrics["well_locations"])]
    rows += [(f"well_{i}_depth", d) for i, d in enumerate(rec.metrics["well_depths"])]
    write_csv(run_dir / "metrics.csv", ["key", "value"], rows)
    write_csv(run_dir / "metadata.csv", ["key", "value"], rec.metadata.items())
    (run_dir / "config.txt").write_text(cfg_text)
    fine = np.linspace(0.0, 1.0, 2049)
    series = [("truth", fine, truth(fine))] if truth is not None else []
    series += [("measurement", rec.t, rec.m_values), ("u MAP", rec.t, rec.u), ("v MAP", rec.t, rec.v)]
    write_svg(run_dir / "plot.svg", series, title=f"N={rec.N}, eps={rec.eps:g}")


def _run_dir(cfg: ExperimentConfig, N: int, eps: float) -> Optional[Path]:
    if cfg.out_dir is None:
        return None
    return Path(cfg.out_dir) / f"run-N{N}-eps{eps:g}"


def cmd_reconstruct(cfg: ExperimentConfig, n: Optional[int] = None, eps: Optional[float] = None,
                    write: bool = True) -> RunRecord:
    """Synthesize data, compute the MAP estimate and (optionally) write its files."""
    n = cfg.n[0] if n is None else n
    eps = cfg.eps[0] if eps is None else eps
    p = cfg.params(eps)
    mesh = Mesh(n)
    truth = load_truth(cfg)
    m = synthesize_measurement(truth, mesh, p, make_rng(cfg.seed))
    est = alternate_minimize(m, p)
    rec = RunRecord(
        config=cfg.snapshot(), params=p.as_dict(), N=mesh.N, eps=eps,
        trace=list(est.trace.iterates), stop_reason=est.trace.stop_reason,
        t=mesh.nodes, u=est.u.values, v=est.v.values, m_values=np.real(m(mesh.nodes)),
        metrics=record_metrics(est.u, est.v, eps, truth),
    )
    rec.metrics["objective"] = est.trace.iterates[-1][1].total
    rec.metrics["iterations"] = est.trace.iterates[-1][0]
    if write and cfg.out_dir is not None:
        rec.run_dir = _run_dir(cfg, mesh.N, eps)
        _write_run(rec, truth, rec.run_dir, cfg.with_(n=(n,), eps=(eps,)).to_text())
    return rec


def metrics_from_files(run_dir, eps: float, truth=None) -> Dict[str, object]:
    """Recompute the run metrics from the written u and v tables."""
    run_dir = Path(run_dir)
    t, u = read_signal_csv(run_dir / "u.csv")
    _, v = read_signal_csv(run_dir / "v.csv")
    mesh = Mesh.from_size(len(t))
    return record_metrics(NodalSignal(mesh, u), NodalSignal(mesh, v), eps, truth)


@dataclass
class SweepResult:
    records: List[RunRecord]
    rows: List[Dict[str, object]]


def cmd_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Reconstruct at every (n, eps) pair and compare the estimates.

    Across ``n`` (fixed eps) consecutive relative L2 distances between the
    u-estimates are reported; across ``eps`` (fixed n) the fidelity ratio and
    the deepest well value.
    """
    points = [(n, e) for n in cfg.n for e in cfg.eps]
    if len(points) < 2:
        raise ConfigError("a sweep needs at least two points")
    records = [cmd_reconstruct(cfg, n, e) for n, e in points]
    by_point = {(n, e): r for (n, e), r in zip(points, records)}
    rows = []
    for e in cfg.eps:
        levels = sorted(cfg.n)
        for a, b in zip(levels, levels[1:]):
            ra, rb = by_point[(a, e)], by_point[(b, e)]
            d = relative_l2(ra.u_signal(), rb.u_signal(), FINE_SAMPLES)
            rows.append({"kind": "n-distance", "eps": e, "n_a": a, "n_b": b, "value": d})
    for n in cfg.n:
        for e in cfg.eps:
            r = by_point[(n, e)]
            rows.append({"kind": "fidelity-over-eps", "eps": e, "n_a": n, "n_b": n,
                         "value": r.metrics["fidelity_over_eps"]})
            rows.append({"kind": "deepest-well", "eps": e, "n_a": n, "n_b": n,
                         "value": min(r.metrics["well_depths"], default=r.metrics["min_v"])})
            rows.append({"kind": "well-count", "eps": e, "n_a": n, "n_b": n,
                         "value": float(r.metrics["well_count"])})
    if cfg.out_dir is not None:
        write_csv(Path(cfg.out_dir) / "sweep.csv", ["kind", "eps", "n_a", "n_b", "value"],
                  ([r["kind"], r["eps"], r["n_a"], r["n_b"], r["value"]] for r in rows))
    return SweepResult(records, rows)


@dataclass
class DivergeResult:
    table: np.ndarray
    solves: List[Dict[str, float]]


def cmd_diverge(cfg: ExperimentConfig) -> DivergeResult:
    """Scalar-potential table for alpha = 0 and, optionally, full MAP solves over n."""
    if cfg.alpha != 0:
        raise ConfigError(f"diverge requires alpha = 0, got alpha = {cfg.alpha}")
    eps = cfg.eps[0]
    levels = sorted(cfg.n)
    table = diverge_alpha0(levels, eps)
    solves = []
    if cfg.full_solves:
        for n in levels:
            rec = cmd_reconstruct(cfg, n, eps, write=False)
            solves.append({"N": rec.N, "max_v": float(np.max(rec.v)), "objective": rec.metrics["objective"]})
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        write_csv(out / "diverge.csv", ["N", "s_star", "value"], table.tolist())
        if solves:
            write_csv(out / "diverge_solves.csv", ["N", "max_v", "objective"],
                      ([s["N"], s["max_v"], s["objective"]] for s in solves))
    return DivergeResult(table, solves)


@dataclass
class PriorReport:
    v: np.ndarray
    u: np.ndarray
    analytic: float
    empirical: float
    stderr: float


def cmd_sample_prior(cfg: ExperimentConfig) -> PriorReport:
    """Draw prior pairs and compare ``E||V - 1||^2`` with ``trace(B P^-1)``."""
    n, eps = cfg.n[0], cfg.eps[0]
    p = cfg.params(eps)
    mesh = Mesh(n)
    rng = make_rng(cfg.seed)
    pairs = [sample_prior(mesh, p, rng) for _ in range(cfg.samples)]
    B = mass_matrix(mesh)
    P = prior_v_precision(mesh, p)
    analytic = float(np.trace(np.linalg.solve(P, B)))
    # the variance comparison uses its own stream so the written samples stay seed-stable
    vrng = make_rng([cfg.seed, 1])
    from .stochastic import sample_prior_v

    z = np.array([sample_prior_v(mesh, p, vrng).values - 1.0 for _ in range(cfg.draws)])
    e = np.einsum("ki,ij,kj->k", z, B, z)
    rep = PriorReport(np.array([s.v.values for s in pairs]), np.array([s.u.values for s in pairs]),
                      analytic, float(e.mean()), float(e.std(ddof=1) / np.sqrt(len(e))))
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        header = ["t"] + [f"{k}{i}" for i in range(cfg.samples) for k in ("v", "u")]
        cols = [mesh.nodes] + [c for i in range(cfg.samples) for c in (rep.v[i], rep.u[i])]
        write_csv(out / "prior_samples.csv", header, np.column_stack(cols).tolist())
        t = np.append(mesh.nodes, 1.0)
        series = [(f"v{i}", t, np.append(rep.v[i], rep.v[i][0])) for i in range(cfg.samples)]
        series += [(f"u{i}", t, np.append(rep.u[i], rep.u[i][0])) for i in range(cfg.samples)]
        write_svg(out / "prior_samples.svg", series, title=f"prior samples, N={mesh.N}, alpha={cfg.alpha:g}")
    return rep


def cmd_verify(perturb_mass: float = 0.0) -> List[CheckResult]:
    return run_all(perturb_mass)
