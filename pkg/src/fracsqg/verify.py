"""Built-in invariant checks run by the ``verify`` subcommand."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import ExperimentConfig, InitialDatumSpec
from .diagnostics import dissipation_functional, scaling_check, sobolev_norm
from .experiment import build_datum
from .solver import run
from .spectral import (Grid, ScalarField, SpectralField, _to_physical, forward_transform,
                       fractional_laplacian, gradient, inverse_transform, riesz_perp_velocity)

TWO_PI = 2.0 * np.pi


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.measured = float(self.measured)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _phys(F: SpectralField) -> np.ndarray:
    return _to_physical(F.coeffs, F.grid.n)


def check_operators(cfg: ExperimentConfig, tol: float = 1e-12) -> CheckResult:
    """Eigenfunction tests for Lambda^sigma, grad and the perpendicular Riesz velocity.

    Errors are measured relative to the sup norm of the exact answer.
    """
    grid = Grid(cfg.solver.n)
    x1, x2 = grid.coords
    kmax = grid.n // 2 - 1
    worst, where = 0.0, ""
    for k1, k2 in [(1, 0), (0, 1), (2, 3), (-3, 5), (kmax, 1)]:
        ph = TWO_PI * (k1 * x1 + k2 * x2)
        F = forward_transform(ScalarField(grid, np.cos(ph)))
        kk = math.hypot(k1, k2)
        cases = [(f"Lambda^{s}", _phys(fractional_laplacian(F, s)), (TWO_PI * kk) ** s * np.cos(ph))
                 for s in (0.5, 0.8, 1.0, 2.0)]
        g = gradient(F)
        cases += [("d1", _phys(g.u1), -TWO_PI * k1 * np.sin(ph)),
                  ("d2", _phys(g.u2), -TWO_PI * k2 * np.sin(ph))]
        u = riesz_perp_velocity(F)
        cases += [("u1", _phys(u.u1), k2 / kk * np.sin(ph)),
                  ("u2", _phys(u.u2), -k1 / kk * np.sin(ph))]
        for label, got, exact in cases:
            scale = max(1.0, float(np.abs(exact).max()))
            err = float(np.abs(got - exact).max()) / scale
            if err > worst:
                worst, where = err, f"{label} at k=({k1},{k2})"
    return CheckResult("operators", worst <= tol, worst, tol, where)


def _mode_datum(grid: Grid) -> tuple[ScalarField, dict]:
    modes = {(1, 0): 1.0, (2, 1): 0.5 - 0.25j, (-1, 3): 0.2j}
    F = SpectralField.from_modes(grid, modes)
    return inverse_transform(F), modes


def check_linear_decay(cfg: ExperimentConfig, tol: float = 1e-10,
                       gammas=(0.6, 0.9), t_end: float = 1.0) -> CheckResult:
    """Nonlinearity off: every mode decays as exp(-(2 pi |k|)^gamma t)."""
    grid = Grid(cfg.solver.n)
    datum, modes = _mode_datum(grid)
    worst, where = 0.0, ""
    for g in gammas:
        sc = dataclasses.replace(cfg.solver, gamma=g, linear_only=True, t_end=t_end,
                                 flip_dissipation_sign=False)
        res = run(datum, sc)
        for (k1, k2), z in modes.items():
            exact = z * math.exp(-((TWO_PI * math.hypot(k1, k2)) ** g) * res.state.t)
            got = res.state.theta_hat.coeff(k1, k2)
            err = abs(got - exact) / abs(exact)
            if err > worst:
                worst, where = err, f"gamma={g} k=({k1},{k2})"
    return CheckResult("linear_decay", worst <= tol, worst, tol, where)


@dataclass
class _Trace:
    t: list
    linf: list
    energy: list
    dissipated: list
    reason: str


def _trace(cfg: ExperimentConfig) -> _Trace:
    datum = build_datum(cfg.datum, cfg.solver.n, cfg.seed)
    tr = _Trace([], [], [], [], "")

    def sink(state):
        c = state.theta_hat.coeffs
        tr.t.append(state.t)
        tr.linf.append(float(np.abs(_to_physical(c, state.grid.n)).max()))
        tr.energy.append(float(np.sum(np.abs(c) ** 2)))
        tr.dissipated.append(state.dissipated)

    tr.reason = run(datum, cfg.solver, sink, cadence_steps=1).reason
    return tr


def check_max_principle(cfg: ExperimentConfig, trace: Optional[_Trace] = None,
                        tol: float = 1e-6) -> CheckResult:
    """||theta(t)||_inf never rises above its running minimum by more than tol ||theta0||_inf."""
    tr = trace or _trace(cfg)
    linf = np.array(tr.linf)
    if linf[0] == 0:
        return CheckResult("max_principle", True, 0.0, tol, "zero datum")
    rise = float(np.max(linf - np.minimum.accumulate(linf))) / linf[0]
    ok = rise <= tol and tr.reason == "completed"
    return CheckResult("max_principle", ok, rise, tol,
                       f"{len(linf)} samples, termination {tr.reason}")


def check_energy_balance(cfg: ExperimentConfig, trace: Optional[_Trace] = None,
                         tol: float = 1e-6) -> CheckResult:
    """||theta||^2 + 2 int ||Lambda^{gamma/2} theta||^2 stays at ||theta0||^2."""
    tr = trace or _trace(cfg)
    e = np.array(tr.energy)
    if e[0] == 0:
        return CheckResult("energy_balance", True, 0.0, tol, "zero datum")
    resid = float(np.max(np.abs(e + np.array(tr.dissipated) - e[0]))) / e[0]
    return CheckResult("energy_balance", resid <= tol, resid, tol, f"{len(e)} samples")


def rescaled_datum(fa: ScalarField, n_b: int, lam: int, gamma: float) -> ScalarField:
    """lam^(gamma-1) f(lam x) on an n_b grid, built by moving coefficient k to lam k."""
    na = fa.grid.n
    ca = np.where(fa.grid.nyquist_mask, 0.0, forward_transform(fa).coeffs)
    k = np.fft.fftfreq(na, 1.0 / na).astype(int)
    cb = np.zeros((n_b, n_b), dtype=complex)
    rows = (lam * k) % n_b
    cb[np.ix_(rows, rows)] = lam ** (gamma - 1.0) * ca
    return ScalarField(Grid(n_b), _to_physical(cb, n_b))


def check_scaling(cfg: ExperimentConfig, lam: int = 2, tol: float = 1e-4) -> CheckResult:
    """Compare a run from the rescaled datum with the rescaled run on a coarser grid."""
    sb = dataclasses.replace(cfg.solver, linear_only=False, flip_dissipation_sign=False)
    if sb.n // lam < 16 or sb.n % lam:
        return CheckResult("scaling", False, math.inf, tol, f"n={sb.n} too small for lambda={lam}")
    gamma = sb.gamma
    fac = lam**gamma
    sa = dataclasses.replace(sb, n=sb.n // lam, t_end=fac * sb.t_end, dt_max=fac * sb.dt_max)
    fa = build_datum(cfg.datum, sa.n, cfg.seed)
    fb = rescaled_datum(fa, sb.n, lam, gamma)
    cad = cfg.output.cadence_dt or sb.t_end / 10

    def collect(store):
        return lambda s: store.append((s.t, inverse_transform(s.theta_hat)))

    ta, tb = [], []
    ra = run(fa, sa, collect(ta), cadence_dt=fac * cad)
    rb = run(fb, sb, collect(tb), cadence_dt=cad)
    if ra.reason != "completed" or rb.reason != "completed":
        return CheckResult("scaling", False, math.inf, tol,
                           f"runs aborted ({ra.reason}, {rb.reason})")
    mismatch = scaling_check(ta, tb, lam, gamma)
    return CheckResult("scaling", mismatch <= tol, mismatch, tol,
                       f"lambda={lam}, n_a={sa.n}, n_b={sb.n}, {len(tb)} checkpoints")


def check_dgamma(cfg: ExperimentConfig, tol: float = 1e-8, count: int = 20,
                 gammas=(0.6, 0.8, 1.0)) -> CheckResult:
    """mean(D_gamma) equals 2 ||Lambda^{gamma/2} f||^2 and D_gamma >= -tol * scale."""
    n = min(cfg.solver.n, 64)
    rng = np.random.default_rng(cfg.seed)
    worst_id, worst_neg = 0.0, 0.0
    for i in range(count):
        spec = InitialDatumSpec(kind="random_spectrum", slope=3.0 + rng.uniform(0.0, 2.0),
                                k_max=min(8, n // 4), seed=int(rng.integers(2**32)))
        f = build_datum(spec, n)
        for g in gammas:
            D = dissipation_functional(f, g).values
            target = 2.0 * sobolev_norm(forward_transform(f), g / 2.0) ** 2
            worst_id = max(worst_id, abs(D.mean() - target) / target)
            lam = _phys(fractional_laplacian(forward_transform(f), g))
            scale = float(np.abs(f.values).max() * np.abs(lam).max())
            worst_neg = max(worst_neg, float(-D.min()) / scale)
    measured = max(worst_id, worst_neg)
    return CheckResult("dgamma", measured <= tol, measured, tol,
                       f"identity {worst_id:.2e}, negativity {worst_neg:.2e}")


CHECKS: dict[str, Callable] = {
    "operators": check_operators,
    "linear_decay": check_linear_decay,
    "max_principle": check_max_principle,
    "energy_balance": check_energy_balance,
    "scaling": check_scaling,
    "dgamma": check_dgamma,
}


def run_checks(cfg: ExperimentConfig, names=None, lam: int = 2) -> list[CheckResult]:
    names = list(names or CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    trace = None
    out = []
    for name in names:
        t0 = time.perf_counter()
        if name in ("max_principle", "energy_balance"):
            trace = trace or _trace(cfg)
            res = CHECKS[name](cfg, trace)
        elif name == "scaling":
            res = check_scaling(cfg, lam)
        else:
            res = CHECKS[name](cfg)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out

