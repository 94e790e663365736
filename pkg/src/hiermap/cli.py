"""Command-line entry point: ``hiermap {reconstruct,sweep,diverge,sample-prior,verify}``."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .experiments import (
    ExperimentConfig,
    cmd_diverge,
    cmd_reconstruct,
    cmd_sample_prior,
    cmd_sweep,
    cmd_verify,
)
from .io import ConfigError, read_config

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2

_FLAGS = {
    "n": "mesh level(s) n, N = 2**n; comma-separated list",
    "eps": "sharpness value(s); comma-separated list",
    "alpha": "prior scaling exponent",
    "q": "exponent of the mean perturbation (default 2)",
    "s": "smoothing order of the forward operator (default 0.35)",
    "sigma": "noise level (default 5e-3)",
    "lambda": "residual weight (default 1/sigma^2)",
    "kappa": "noise scaling exponent (default alpha)",
    "signal": "step | piecewise-smooth | custom-file",
    "signal-file": "CSV (t,value) used when --signal custom-file",
    "seed": "RNG seed",
    "max-iter": "outer iteration cap (default 50)",
    "delta": "outer decrease threshold",
    "out": "output directory",
    "samples": "number of prior sample pairs to write",
    "draws": "Monte-Carlo draws for the prior variance comparison",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hiermap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("reconstruct", "sweep", "diverge", "sample-prior", "verify"):
        sp = sub.add_parser(name)
        if name == "verify":
            sp.add_argument("--perturb-mass", type=float, default=0.0, help=argparse.SUPPRESS)
            continue
        sp.add_argument("--config", metavar="PATH", help="key = value configuration file")
        for flag, help_text in _FLAGS.items():
            sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"), default=None, help=help_text)
        sp.add_argument("--full-solves", dest="full_solves", action="store_const", const="true", default=None,
                        help="also run full MAP solves (diverge)")
        sp.add_argument("--fold-v", dest="fold_v", action="store_const", const="true", default=None,
                        help="fold the final v into [0, 1 + 30 eps]")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = read_config(args.config) if args.config else {}
    data.pop("command", None)
    for key in list(_FLAGS) + ["full-solves", "fold-v"]:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            data[{"out": "out_dir", "lambda": "lam"}.get(key, key.replace("-", "_"))] = value
    data["command"] = args.command
    return ExperimentConfig.from_mapping(data)


def _fmt(x) -> str:
    return format(x, ".6g") if isinstance(x, float) else str(x)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        results = cmd_verify(args.perturb_mass)
        for r in results:
            print(r.line())
        return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY
    try:
        cfg = config_from_args(args)
        if args.command == "reconstruct":
            for n in cfg.n:
                for e in cfg.eps:
                    rec = cmd_reconstruct(cfg, n, e)
                    print(f"N={rec.N} eps={e:g} stop={rec.stop_reason} "
                          + " ".join(f"{k}={_fmt(v)}" for k, v in rec.metrics.items() if not isinstance(v, list))
                          + f" wells={[round(w, 4) for w in rec.metrics['well_locations']]}")
        elif args.command == "sweep":
            res = cmd_sweep(cfg)
            for row in res.rows:
                print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
        elif args.command == "diverge":
            res = cmd_diverge(cfg)
            print("N\ts_star\tvalue")
            for N, s, val in res.table:
                print(f"{int(N)}\t{s:.10g}\t{val:.10g}")
            for row in res.solves:
                print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
        elif args.command == "sample-prior":
            rep = cmd_sample_prior(cfg)
            print(f"E||V-1||^2 analytic={rep.analytic:.6g} empirical={rep.empirical:.6g} stderr={rep.stderr:.3g}")
    except ConfigError as exc:
        print(f"hiermap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
