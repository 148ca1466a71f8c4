"""Runs, sweeps and plot-script emission on top of the solver, diagnostics and bounds."""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds as tb
from .config import ExperimentConfig, InitialDatumSpec, config_hash, replace_in, to_plain
from .diagnostics import HolderProbe, ShiftSet, compute_record, lp_norm, sobolev_norm
from .io import CsvSink, csv_columns, dump_json, read_csv, record_row, write_snapshot
from .solver import (RESOLUTION_ERROR, RESOLUTION_WARN, RunResult, SolverState,
                     UnresolvedDatum, high_mode_fraction, run)
from .spectral import Grid, ScalarField, SpectralField, forward_transform, inverse_transform

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- datum


def _half_plane(k_max: int):
    """Canonical representatives of +-k pairs with 0 < |k| <= k_max, in a fixed order."""
    for a in range(0, k_max + 1):
        for b in range(-k_max, k_max + 1):
            if a == 0 and b <= 0:
                continue
            if a * a + b * b <= k_max * k_max:
                yield a, b


def build_datum(spec: InitialDatumSpec, n: int, seed: int = 0) -> ScalarField:
    """Realize an initial datum on an ``n x n`` grid.

    ``random_spectrum`` draws one phase per +-k pair in a fixed order, so the
    same seed gives the same function at every resolution; ``amplitude`` then
    sets its L2 norm.
    """
    grid = Grid(n)
    if spec.kind == "modes":
        x1, x2 = grid.coords
        v = np.zeros((n, n))
        for m in spec.modes:
            k1, k2 = m.k
            v += m.amplitude * np.cos(2 * np.pi * (k1 * x1 + k2 * x2) + m.phase)
        v *= spec.amplitude
        return ScalarField(grid, v - v.mean())
    if spec.kind != "random_spectrum":
        raise ValueError(f"unknown datum kind {spec.kind!r}")
    if 2 * spec.k_max >= n:
        raise ValueError(f"k_max={spec.k_max} does not fit below Nyquist at n={n}")
    rng = np.random.default_rng(spec.seed if spec.seed is not None else seed)
    modes = {}
    for a, b in _half_plane(spec.k_max):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        modes[(a, b)] = math.hypot(a, b) ** (-spec.slope) * np.exp(1j * phase)
    F = SpectralField.from_modes(grid, modes)
    norm = sobolev_norm(F, 0.0)
    F = SpectralField(grid, F.coeffs * (spec.amplitude / norm if norm > 0 else 0.0))
    f = inverse_transform(F)
    return ScalarField(grid, f.values - f.values.mean())


def measure_norms(f: ScalarField) -> tb.DatumNorms:
    F = forward_transform(f)
    return tb.DatumNorms(l2=sobolev_norm(F, 0.0), h2=sobolev_norm(F, 2.0),
                         linf=lp_norm(f, math.inf))


def bounds_for(norms: tb.DatumNorms, gamma: float, constants: tb.UniversalConstants,
               gamma0: float = 0.05) -> Optional[tb.BoundsReport]:
    if not 0.0 < gamma < 1.0:
        return None  # the critical endpoint has no supercritical bounds
    return tb.certify(norms, gamma, constants, gamma0=gamma0)


# ---------------------------------------------------------------- single run


@dataclass
class RunReport:
    config: dict
    termination_reason: str
    final_record: dict
    bounds: Optional[dict]
    manifest: dict
    config_hash: str
    wall_clock_seconds: float = 0.0
    blowup: Optional[dict] = None
    resolution: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("wall_clock_seconds")  # lives in metadata.json so report.json is reproducible
        return d


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run one configured simulation and write CSV, snapshots and report.json.

    Output is deterministic for a fixed config; timing goes to metadata.json.
    Partial outputs survive a numerical abort.
    """
    cfg.validate()
    started = time.perf_counter()
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    sc = cfg.solver
    gamma = sc.gamma
    datum = build_datum(cfg.datum, sc.n, cfg.seed)
    norms = measure_norms(datum)
    report_bounds = bounds_for(norms, gamma, cfg.theory, sc.gamma0)

    alphas = [p.alpha for p in cfg.probes]
    shifts = ShiftSet.default(datum.grid)
    vprobe = cfg.probes[0] if cfg.probes else None
    xi_init = 0.0
    if vprobe is not None and vprobe.xi_schedule and 0 < gamma < 1 and norms.linf > 0:
        xi_init = tb.xi0(gamma, vprobe.alpha, norms.linf, cfg.theory)

    csv_path = out / "diagnostics.csv"
    sink_csv = CsvSink(csv_path, csv_columns(alphas))
    snap_dir = out / "snapshots"
    if cfg.output.snapshots:
        snap_dir.mkdir(exist_ok=True)
    snapshots: list[str] = []
    e0 = norms.l2**2
    last: dict = {}

    def sink(state):
        resid = (sobolev_norm(state.theta_hat, 0.0) ** 2 - e0 + state.dissipated)
        resid = resid / e0 if e0 > 0 else 0.0
        probe = None
        if vprobe is not None:
            xi = (tb.xi_trajectory(state.t, xi_init, gamma, vprobe.alpha, cfg.theory)
                  if xi_init > 0 else 0.0)
            probe = HolderProbe(vprobe.alpha, xi, shifts)
        rec = compute_record(state.theta_hat, state.t, gamma, alphas=alphas, shifts=shifts,
                             v_probe=probe, energy_residual=resid)
        sink_csv.write(record_row(rec, gamma, alphas))
        last["record"] = rec
        if cfg.output.snapshots:
            name = f"snapshots/snap_{len(snapshots):05d}.sqgf"
            f = inverse_transform(state.theta_hat)
            write_snapshot(out / name, f, gamma, state.t)
            snapshots.append(name)

    try:
        result = run(datum, sc, sink, cadence_steps=cfg.output.cadence_steps,
                     cadence_dt=cfg.output.cadence_dt)
    except UnresolvedDatum as exc:
        # refused before the first step; reported like a numerical abort
        state = SolverState(theta_hat=forward_transform(datum), gamma=gamma)
        sink(state)
        result = RunResult(state=state, reason="unresolved",
                           blowup={"reason": "unresolved_datum", "t": 0.0, "step": 0,
                                   "message": str(exc),
                                   "note": "numerical blowup; not evidence about the PDE"},
                           resolution_fraction=high_mode_fraction(state.theta_hat))
    finally:
        sink_csv.close()

    report = RunReport(
        config=to_plain(cfg),
        termination_reason=result.reason,
        final_record=last["record"].to_dict() if last else {},
        bounds=report_bounds.to_dict() if report_bounds else None,
        manifest={"csv": csv_path.name, "snapshots": snapshots, "report": "report.json",
                  "metadata": "metadata.json"},
        config_hash=config_hash(cfg),
        blowup=result.blowup,
        resolution={"high_mode_fraction": result.resolution_fraction,
                    "warn_above": RESOLUTION_WARN, "error_above": RESOLUTION_ERROR},
    )
    dump_json(report.to_json_dict(), out / "report.json")
    report.wall_clock_seconds = time.perf_counter() - started
    dump_json({"wall_clock_seconds": report.wall_clock_seconds,
               "finished_at": datetime.now(timezone.utc).isoformat()}, out / "metadata.json")
    return report


# ---------------------------------------------------------------- sweeps

AXES = {"gamma": "solver.gamma", "amplitude": "datum.amplitude", "n": "solver.n"}
SWEEP_COLUMNS = ["index", "gamma", "amplitude", "n", "termination", "t_star_composed",
                 "t_star_theorem", "t1", "certified", "criterion_holds", "criterion_margin",
                 "final_l2", "final_linf"]


def _point_configs(base: ExperimentConfig, axis: dict, root: Path):
    keys = list(axis)
    for k in keys:
        if k not in AXES:
            raise ValueError(f"unknown sweep axis {k!r}; expected one of {sorted(AXES)}")
        if not axis[k]:
            raise ValueError(f"sweep axis {k!r} is empty")
    for i, combo in enumerate(itertools.product(*(axis[k] for k in keys))):
        cfg = base
        for k, v in zip(keys, combo):
            cfg = replace_in(cfg, AXES[k], type(_get(base, AXES[k]))(v))
        cfg = replace_in(cfg, "output.directory", str(root / f"point_{i:03d}"))
        yield i, cfg


def _get(cfg, dotted):
    for p in dotted.split("."):
        cfg = getattr(cfg, p)
    return cfg


def _theory_point(cfg: ExperimentConfig) -> dict:
    datum = build_datum(cfg.datum, cfg.solver.n, cfg.seed)
    b = bounds_for(measure_norms(datum), cfg.solver.gamma, cfg.theory, cfg.solver.gamma0)
    return {"termination": "theory_only", "bounds": b.to_dict() if b else None,
            "final_record": {}}


def _sweep_point(args) -> dict:
    cfg, theory_only = args
    try:
        cfg.validate()
        if theory_only:
            return _theory_point(cfg)
        rep = run_experiment(cfg)
        return {"termination": rep.termination_reason, "bounds": rep.bounds,
                "final_record": rep.final_record}
    except Exception as exc:  # recorded, the sweep continues
        return {"termination": "error", "error": f"{type(exc).__name__}: {exc}",
                "bounds": None, "final_record": {}}


def sweep(base: ExperimentConfig, axis: dict, *, workers: int = 1, theory_only: bool = False,
          root: Optional[Path] = None) -> dict:
    """Run every point of ``axis`` (Cartesian product of the given lists) and aggregate.

    Points are isolated in their own subdirectories; the aggregate is reduced in
    index order, so it does not depend on ``workers``.
    """
    if not axis:
        raise ValueError("sweep axis is empty")
    root = Path(root or base.output.directory)
    root.mkdir(parents=True, exist_ok=True)
    points = list(_point_configs(base, axis, root))
    jobs = [(cfg, theory_only) for _, cfg in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]

    rows = []
    for (i, cfg), res in zip(points, results):
        b = res.get("bounds") or {}
        fr = res.get("final_record") or {}
        rows.append({
            "index": i,
            "gamma": cfg.solver.gamma,
            "amplitude": cfg.datum.amplitude,
            "n": cfg.solver.n,
            "termination": res["termination"],
            "t_star_composed": b.get("t_star_composed"),
            "t_star_theorem": b.get("t_star_theorem"),
            "t1": b.get("t1"),
            "certified": b.get("certified"),
            "criterion_holds": b.get("criterion_holds"),
            "criterion_margin": b.get("criterion_margin"),
            "final_l2": fr.get("l2_norm"),
            "final_linf": fr.get("linf_norm"),
            "directory": cfg.output.directory,
            **({"error": res["error"]} if "error" in res else {}),
        })
    summary = summarize(rows)
    agg = {"axis": {k: list(v) for k, v in axis.items()}, "theory_only": theory_only,
           "points": rows, "summary": summary, "table": "sweep.csv"}
    dump_json(agg, root / "sweep.json")
    with open(root / "sweep.csv", "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_cell(r.get(c)) for c in SWEEP_COLUMNS) + "\n")
    return agg


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _first_persistent(gammas, flags):
    """Smallest gamma from which ``flags`` stays true up to the largest gamma."""
    out = None
    for g, f in sorted(zip(gammas, flags), reverse=True):
        if not f:
            break
        out = g
    return out


def summarize(rows: list[dict]) -> dict:
    by_gamma: dict = {}
    for r in rows:
        if r["termination"] == "completed":
            g = r["gamma"]
            by_gamma[g] = max(by_gamma.get(g, -math.inf), r["amplitude"])
    theory = [r for r in rows if r["t_star_composed"] is not None and r["t1"] is not None]
    gammas = [r["gamma"] for r in theory]
    crossing = _first_persistent(gammas, [r["t_star_composed"] <= r["t1"] for r in theory])
    crit = _first_persistent(gammas, [bool(r["criterion_holds"]) for r in theory])
    return {
        "max_stable_amplitude": {format(g, "g"): a for g, a in sorted(by_gamma.items())},
        "termination_counts": _count(r["termination"] for r in rows),
        "crossing_gamma": crossing,
        "criterion_gamma": crit,
    }


def _count(items) -> dict:
    out: dict = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------- plots

NEEDED = ("t", "l2", "linf", "h2")


def _gp_header(title: str, out_png: str) -> str:
    return (f"set terminal pngcairo size 900,600\nset output '{out_png}'\n"
            f"set title '{title}'\nset datafile separator ','\nset key autotitle columnhead\n")


def _bounds_vs_gamma(norms: tb.DatumNorms, constants, gammas) -> list[tuple]:
    rows = []
    for g in gammas:
        b = tb.certify(norms, g, constants, with_gamma1=False)
        rows.append((g, b.t_star_composed, b.t1, b.criterion_holds))
    return rows


def emit_plots(report_paths: Sequence, out_dir: Optional[Path] = None) -> list[Path]:
    """Write gnuplot scripts (plus the data files they read) for runs and sweeps.

    A run report yields norms.gp, holder.gp, xi.gp and bounds_gamma.gp; a sweep
    report yields bounds_gamma.gp with the T_star <= T_1 crossing marked.
    """
    import json

    if not report_paths:
        raise ValueError("nothing to plot")
    written: list[Path] = []
    for rp in report_paths:
        rp = Path(rp)
        data = json.loads(rp.read_text())
        dest = Path(out_dir) if out_dir else rp.parent / "plots"
        dest.mkdir(parents=True, exist_ok=True)
        if "points" in data:
            written += _sweep_plot(data, rp.parent, dest)
        else:
            written += _run_plots(data, rp.parent, dest)
    return written


def _rel(target: Path, start: Path) -> str:
    import os

    return os.path.relpath(target, start)


def _run_plots(rep: dict, run_dir: Path, dest: Path) -> list[Path]:
    csv_path = run_dir / rep["manifest"]["csv"]
    cols = read_csv(csv_path)
    missing = [c for c in NEEDED if c not in cols]
    holder_cols = [c for c in cols if c.startswith("holder_")]
    if missing or not holder_cols:
        raise ValueError(f"{csv_path}: missing columns {missing or ['holder_*']}")
    csv_rel = _rel(csv_path, dest)
    b = rep.get("bounds") or {}
    cfg = rep["config"]
    gamma = cfg["solver"]["gamma"]
    out = []

    p = dest / "norms.gp"
    p.write_text(_gp_header("norms vs t", "norms.png") + "set logscale y\nset xlabel 't'\n"
                 f"plot '{csv_rel}' using 't':'l2' with lines, '' using 't':'linf' with lines, "
                 "'' using 't':'h2' with lines\n")
    out.append(p)

    M = b.get("M")
    p = dest / "holder.gp"
    lines = ", ".join(f"'{csv_rel}' using 't':'{c}' with lines" for c in holder_cols)
    extra = f", {M!r} title 'ceiling M' with lines dt 2" if M else ""
    p.write_text(_gp_header("Hölder seminorm vs t", "holder.png") + "set xlabel 't'\n"
                 f"plot {lines}{extra}\n")
    out.append(p)

    xi_dat = dest / "xi.csv"
    alpha = b.get("alpha")
    x0 = b.get("xi0") or 0.0
    t_end = cfg["solver"]["t_end"]
    consts = tb.UniversalConstants(**{k: v for k, v in (b.get("constants") or {}).items()
                                      if k != "c_star"})
    with open(xi_dat, "w") as fh:
        fh.write("t,xi\n")
        for t in np.linspace(0.0, t_end, 201):
            xi = tb.xi_trajectory(float(t), x0, gamma, alpha, consts) if alpha and x0 else 0.0
            fh.write(f"{t:.17g},{xi:.17g}\n")
    p = dest / "xi.gp"
    p.write_text(_gp_header("xi(t) and v_sup", "xi.png") + "set xlabel 't'\nset y2tics\n"
                 f"plot 'xi.csv' using 't':'xi' with lines, '{csv_rel}' using 't':'v_sup' "
                 "axes x1y2 with lines\n")
    out += [xi_dat, p]

    norms = tb.DatumNorms(**b["norms"]) if b.get("norms") else None
    bg = dest / "bounds_gamma.csv"
    crossing = None
    with open(bg, "w") as fh:
        fh.write("gamma,t_star_composed,t1,criterion_holds\n")
        if norms and norms.linf > 0:
            rows = _bounds_vs_gamma(norms, consts, np.round(np.arange(0.70, 0.995, 0.01), 2))
            crossing = _first_persistent([r[0] for r in rows], [r[1] <= r[2] for r in rows])
            for g, ts, t1, ch in rows:
                fh.write(f"{g:.17g},{ts:.17g},{t1:.17g},{int(ch)}\n")
    out += [bg, _bounds_script(dest, "bounds_gamma.csv", crossing)]
    return out


def _bounds_script(dest: Path, data_name: str, crossing) -> Path:
    p = dest / "bounds_gamma.gp"
    mark = (f"set arrow from {crossing!r}, graph 0 to {crossing!r}, graph 1 nohead dt 3\n"
            f"set label 'T* <= T1 from gamma = {crossing:g}' at {crossing!r}, graph 0.9\n"
            if crossing is not None else "")
    p.write_text(_gp_header("T* and T1 vs gamma", "bounds_gamma.png")
                 + "set logscale y\nset xlabel 'gamma'\n" + mark
                 + f"plot '{data_name}' using 'gamma':'t_star_composed' with linespoints, "
                   f"'' using 'gamma':'t1' with linespoints\n")
    return p


def _sweep_plot(data: dict, root: Path, dest: Path) -> list[Path]:
    rows = [r for r in data["points"] if r.get("t_star_composed") is not None]
    if not rows:
        raise ValueError("sweep has no theory columns to plot")
    bg = dest / "bounds_gamma.csv"
    with open(bg, "w") as fh:
        fh.write("gamma,t_star_composed,t1,criterion_holds\n")
        for r in sorted(rows, key=lambda r: r["gamma"]):
            fh.write(f"{r['gamma']:.17g},{r['t_star_composed']:.17g},{r['t1']:.17g},"
                     f"{int(bool(r['criterion_holds']))}\n")
    crossing = data["summary"].get("crossing_gamma")
    return [bg, _bounds_script(dest, "bounds_gamma.csv", crossing)]
