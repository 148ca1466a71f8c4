"""Command line entry point: simulate, bounds, sweep, probe, verify.

Exit codes: 0 ok, 1 usage or config error, 2 numerical blowup, 3 invariant failure.
Machine-readable output is JSON on stdout; logs go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import bounds as tb
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config, replace_in
from .io import dump_json

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_INVARIANT = 0, 1, 2, 3
log = logging.getLogger("fracsqg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    sys.stdout.write(dump_json(obj))
    sys.stdout.flush()


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    if getattr(args, "output", None):
        cfg = replace_in(cfg, "output.directory", args.output)
    if getattr(args, "seed", None) is not None:
        cfg = replace_in(cfg, "seed", args.seed)
    return cfg.validate()


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args) -> int:
    from .experiment import emit_plots, run_experiment

    cfg = _config(args)
    rep = run_experiment(cfg)
    path = Path(cfg.output.directory) / "report.json"
    if args.plots:
        emit_plots([path])
    out = {"report": str(path), "termination_reason": rep.termination_reason}
    if rep.blowup:
        out["blowup"] = rep.blowup
    _emit(out)
    return EXIT_OK if rep.termination_reason == "completed" else EXIT_BLOWUP


def _finite_positive(name, v):
    if v is None or not math.isfinite(v) or v <= 0:
        raise UsageError(f"--{name} must be a finite positive number, got {v}")


def cmd_bounds(args) -> int:
    cfg = _config(args) if (args.config or args.set) else ExperimentConfig()
    constants = cfg.theory
    gamma0 = cfg.solver.gamma0
    if args.gamma1_only:
        if args.R is None:
            raise UsageError("--gamma1-only needs --R")
        _finite_positive("R", args.R)
        th = tb.gamma1(args.R, constants, gamma0=gamma0)
        _emit({"R": args.R, "gamma1": th.gamma1, "status": th.status,
               "constants": constants.to_dict()})
        return EXIT_OK
    gamma = args.gamma if args.gamma is not None else cfg.solver.gamma
    if not 0.0 < gamma < 1.0:
        raise UsageError(f"gamma {gamma} out of (0, 1)")
    if args.l2 is None and args.h2 is None and args.linf is None:
        from .experiment import build_datum, measure_norms

        norms = measure_norms(build_datum(cfg.datum, cfg.solver.n, cfg.seed))
    else:
        for name in ("l2", "h2", "linf"):
            _finite_positive(name, getattr(args, name))
        norms = tb.DatumNorms(args.l2, args.h2, args.linf)
    rep = tb.certify(norms, gamma, constants, gamma0=gamma0)
    _emit(rep.to_dict())
    return EXIT_OK


def _parse_axis(items) -> dict:
    axis = {}
    for item in items or []:
        key, _, vals = item.partition("=")
        if not vals:
            raise UsageError(f"--axis {item!r} is not KEY=V1,V2,...")
        try:
            axis[key] = [float(v) if key != "n" else int(v) for v in vals.split(",")]
        except ValueError as exc:
            raise UsageError(f"--axis {item!r}: {exc}") from exc
    if not axis:
        raise UsageError("sweep needs at least one --axis")
    return axis


def cmd_sweep(args) -> int:
    from .experiment import emit_plots, sweep

    cfg = _config(args)
    try:
        agg = sweep(cfg, _parse_axis(args.axis), workers=args.workers,
                    theory_only=args.theory_only)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = Path(cfg.output.directory) / "sweep.json"
    if args.plots:
        emit_plots([path])
    _emit({"sweep": str(path), "summary": agg["summary"]})
    return EXIT_OK


def cmd_probe(args) -> int:
    from .diagnostics import (DegenerateProbe, HolderProbe, ShiftSet, dissipation_functional,
                              holder_seminorm, lp_norm, nonlinear_bound_probe, v_quotient)
    from .experiment import build_datum
    from .io import read_snapshot

    cfg = _config(args)
    if args.snapshot:
        f, gamma, t = read_snapshot(args.snapshot)
    else:
        f, gamma, t = build_datum(cfg.datum, cfg.solver.n, cfg.seed), cfg.solver.gamma, 0.0
    alpha = args.alpha if args.alpha is not None else cfg.probes[0].alpha
    shifts = ShiftSet.default(f.grid)
    v, (x, h) = v_quotient(f, HolderProbe(alpha, args.xi, shifts))
    out = {
        "t": t, "gamma": gamma, "alpha": alpha, "xi": args.xi,
        "linf": lp_norm(f, math.inf),
        "holder_seminorm": holder_seminorm(f, alpha, shifts),
        "v_sup": v, "v_argmax": {"x": list(x), "h": list(h)},
        "dgamma_min": float(dissipation_functional(f, gamma).values.min()),
    }
    if 1.0 - gamma < alpha < 1.0:
        try:
            out["c0_estimate"] = nonlinear_bound_probe(f, gamma, alpha, ShiftSet.axis(f.grid))
        except DegenerateProbe as exc:
            out["c0_estimate"] = None
            log.warning("nonlinear bound probe skipped: %s", exc)
    _emit(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    cfg = _config(args)
    try:
        results = run_checks(cfg, args.check, lam=args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for r in results:
        print(f"{r.name:<15} {'PASS' if r.passed else 'FAIL'}  measured {r.measured:.3e}  "
              f"tol {r.tolerance:.1e}  {r.detail}", file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    _emit({"checks": [r.to_dict() for r in results], "all_passed": not failed,
           "failed": failed})
    return EXIT_INVARIANT if failed else EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML experiment config")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override a config key (repeatable), e.g. solver.gamma=0.9")
    common.add_argument("--output", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="experiment seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="fracsqg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="run one configured simulation")
    s.add_argument("--plots", action="store_true", help="also write gnuplot scripts")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", parents=[common], help="evaluate the theoretical bounds")
    b.add_argument("--gamma", type=float)
    b.add_argument("--l2", type=float)
    b.add_argument("--h2", type=float)
    b.add_argument("--linf", type=float)
    b.add_argument("--R", type=float, help="critical-size bound for --gamma1-only")
    b.add_argument("--gamma1-only", action="store_true", help="print only gamma1(R)")
    b.set_defaults(func=cmd_bounds)

    w = sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    w.add_argument("--axis", action="append", metavar="KEY=V1,V2,...",
                   help="sweep axis: gamma, amplitude or n (repeat for a product)")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--theory-only", action="store_true", help="bounds only, no PDE runs")
    w.add_argument("--plots", action="store_true")
    w.set_defaults(func=cmd_sweep)

    q = sub.add_parser("probe", parents=[common], help="Hölder and dissipation probes of one field")
    q.add_argument("--snapshot", metavar="PATH", help="SQGF snapshot (default: config datum)")
    q.add_argument("--alpha", type=float)
    q.add_argument("--xi", type=float, default=0.0)
    q.set_defaults(func=cmd_probe)

    v = sub.add_parser("verify", parents=[common], help="run the invariant checks")
    v.add_argument("--check", action="append", metavar="NAME",
                   help="run only this check (repeatable)")
    v.add_argument("--lambda", dest="lam", type=int, default=2, metavar="K",
                   help="scaling factor for the scaling check")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else
                        logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
