"""Integrating-factor RK4 integration of d/dt theta + u.grad theta + Lambda^gamma theta = 0."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .spectral import (
    TWO_PI,
    Grid,
    ScalarField,
    SpectralField,
    _to_physical,
    _to_spectral,
    forward_transform,
)

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-8
RESOLUTION_WARN = 1e-8
RESOLUTION_ERROR = 1e-2


class NumericalBlowup(RuntimeError):
    """Raised when a step produces non-finite values or exceeds the L-infinity ceiling.

    These aborts say nothing about the PDE itself: the simulator cannot tell
    genuine singularity formation from under-resolution.
    """

    def __init__(self, reason: str, t: float, step: int, history: list):
        super().__init__(f"numerical blowup ({reason}) at t={t:.6g}, step {step}")
        self.reason = reason
        self.t = t
        self.step = step
        self.history = history

    def report(self) -> dict:
        return {
            "reason": self.reason,
            "t": self.t,
            "step": self.step,
            "history": [list(h) for h in self.history],
            "note": "numerical blowup; not evidence about the PDE",
        }


class UnresolvedDatum(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    n: int = 64
    gamma: float = 0.8
    cfl_number: float = 0.5
    dt_max: float = 0.01
    t_end: float = 1.0
    blowup_threshold: float = 10.0
    gamma0: float = 0.05
    linear_only: bool = False
    # Test hook: run the dissipation backwards (must break the maximum principle).
    flip_dissipation_sign: bool = False

    def violations(self) -> list[str]:
        out = []
        if not 0.0 < self.gamma0 < 1.0:
            out.append(f"gamma0 {self.gamma0} out of (0, 1)")
        if not self.gamma0 <= self.gamma <= 1.0:
            out.append(f"gamma {self.gamma} out of [gamma0={self.gamma0}, 1]")
        if not 0.0 < self.cfl_number <= 1.0:
            out.append(f"cfl_number {self.cfl_number} out of (0, 1]")
        if not self.dt_max > 0:
            out.append("dt_max must be > 0")
        if not self.t_end > 0:
            out.append("t_end must be > 0")
        if not self.blowup_threshold > 0:
            out.append("blowup_threshold must be > 0")
        try:
            Grid(self.n)
        except ValueError as exc:
            out.append(str(exc))
        return out

    def validate(self) -> "SolverConfig":
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))
        return self


@dataclass(frozen=True)
class SolverState:
    theta_hat: SpectralField
    t: float = 0.0
    gamma: float = 0.8
    step_count: int = 0
    dt_last: float = 0.0
    # 2 * int_0^t ||Lambda^{gamma/2} theta||^2 ds, accumulated with the RK4 weights.
    dissipated: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.theta_hat.grid


class _Operators:
    """Per-(grid, gamma) cached multipliers shared by every step."""

    _cache: dict = {}

    def __new__(cls, grid: Grid, gamma: float, flip: bool = False):
        key = (grid.n, float(gamma), bool(flip))
        obj = cls._cache.get(key)
        if obj is None:
            obj = super().__new__(cls)
            obj._init(grid, gamma, flip)
            cls._cache[key] = obj
        return obj

    def _init(self, grid, gamma, flip):
        self.grid = grid
        self.rate = grid.symbol(gamma) * (-1.0 if flip else 1.0)
        keep = (grid.kmag > 0) & ~grid.nyquist_mask
        inv = np.zeros_like(grid.kmag)
        inv[keep] = 1.0 / grid.kmag[keep]
        # theta_hat -> u_hat and grad theta_hat multipliers
        self.u1 = -1j * grid.k2 * inv
        self.u2 = 1j * grid.k1 * inv
        d = np.where(grid.nyquist_mask, 0.0, TWO_PI)
        self.d1 = 1j * grid.k1 * d
        self.d2 = 1j * grid.k2 * d
        self.mask = grid.dealias_mask.astype(float)
        self._decay: dict = {}

    def decay(self, dt: float) -> np.ndarray:
        e = self._decay.get(dt)
        if e is None:
            e = np.exp(-self.rate * dt)
            if len(self._decay) > 64:
                self._decay.clear()
            self._decay[dt] = e
        return e

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        n = self.grid.n
        u1 = _to_physical(self.u1 * c, n)
        u2 = _to_physical(self.u2 * c, n)
        g1 = _to_physical(self.d1 * c, n)
        g2 = _to_physical(self.d2 * c, n)
        prod = u1 * g1 + u2 * g2
        if not np.all(np.isfinite(prod)):
            raise FloatingPointError("non-finite values in nonlinear term")
        return -_to_spectral(prod, n) * self.mask

    def dissipation_rate(self, c: np.ndarray) -> float:
        """2 ||Lambda^{gamma/2} theta||^2 for coefficient array ``c``."""
        return 2.0 * float(np.sum(self.rate * (c.real**2 + c.imag**2)))

    def max_speed(self, c: np.ndarray) -> float:
        n = self.grid.n
        u1 = _to_physical(self.u1 * c, n)
        u2 = _to_physical(self.u2 * c, n)
        return float(np.sqrt(np.max(u1 * u1 + u2 * u2)))


def nonlinear_term(theta_hat: SpectralField) -> SpectralField:
    """Spectral coefficients of ``-u.grad theta`` (pseudo-spectral, 2/3-dealiased)."""
    ops = _Operators(theta_hat.grid, 1.0)
    try:
        out = ops.nonlinear(theta_hat.coeffs)
    except FloatingPointError as exc:
        raise NumericalBlowup("nan", float("nan"), -1, []) from exc
    return SpectralField(theta_hat.grid, out)


def _rk4(ops: _Operators, c: np.ndarray, dt: float, linear_only: bool):
    """One Lawson (integrating-factor) RK4 step; returns (new coeffs, dissipated increment)."""
    e1 = ops.decay(dt)
    if linear_only:
        # Same quadrature as the nonlinear scheme, with exact stage values.
        eh = ops.decay(0.5 * dt)
        p = ops.dissipation_rate
        mid = p(eh * c)
        return e1 * c, dt / 6.0 * (p(c) + 4.0 * mid + p(e1 * c))
    eh = ops.decay(0.5 * dt)
    N = ops.nonlinear
    p = ops.dissipation_rate
    k1 = N(c)
    a = eh * (c + 0.5 * dt * k1)
    k2 = N(a)
    b = eh * c + 0.5 * dt * k2
    k3 = N(b)
    d = e1 * c + dt * eh * k3
    k4 = N(d)
    new = e1 * c + dt / 6.0 * (e1 * k1 + 2.0 * eh * (k2 + k3) + k4)
    diss = dt / 6.0 * (p(c) + 2.0 * p(a) + 2.0 * p(b) + p(d))
    return new, diss


def step(state: SolverState, dt: float, *, linear_only: bool = False,
         flip_dissipation_sign: bool = False) -> SolverState:
    """Advance ``state`` by ``dt``.

    Dissipation is applied through the exact factor exp(-(2 pi |k|)^gamma dt);
    with ``linear_only`` the step is exact per mode.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return state
    ops = _Operators(state.grid, state.gamma, flip_dissipation_sign)
    try:
        new, diss = _rk4(ops, state.theta_hat.coeffs, dt, linear_only)
    except FloatingPointError:
        new = None
    if new is None or not np.all(np.isfinite(new)):
        raise NumericalBlowup("nan", state.t + dt, state.step_count + 1, [])
    return SolverState(
        theta_hat=SpectralField(state.grid, new),
        t=state.t + dt,
        gamma=state.gamma,
        step_count=state.step_count + 1,
        dt_last=dt,
        dissipated=state.dissipated + diss,
    )


def adaptive_dt(state: SolverState, config: SolverConfig,
                next_checkpoint: Optional[float] = None) -> float:
    """CFL-limited time step, capped by ``dt_max`` and the next checkpoint."""
    ops = _Operators(state.grid, state.gamma)
    umax = ops.max_speed(state.theta_hat.coeffs)
    dt = min(config.dt_max, config.cfl_number * state.grid.spacing / max(umax, EPS_FLOOR))
    if next_checkpoint is not None:
        remaining = next_checkpoint - state.t
        if remaining > 0:
            dt = min(dt, remaining)
    return dt


def high_mode_fraction(theta_hat: SpectralField) -> float:
    """Fraction of L2 energy in modes with max(|k1|, |k2|) > n/4."""
    g = theta_hat.grid
    e = np.abs(theta_hat.coeffs) ** 2
    total = float(e.sum())
    if total == 0.0:
        return 0.0
    high = np.maximum(np.abs(g.k1), np.abs(g.k2)) * 4 > g.n
    return float(e[high].sum()) / total


@dataclass
class RunResult:
    state: SolverState
    reason: str  # completed | blowup_threshold | nan
    history: list = field(default_factory=list)
    blowup: Optional[dict] = None
    resolution_fraction: float = 0.0


Sink = Callable[[SolverState], None]


def _linf(c: np.ndarray, n: int) -> float:
    return float(np.abs(_to_physical(c, n)).max())


def run(datum: ScalarField, config: SolverConfig, sink: Optional[Sink] = None, *,
        cadence_steps: Optional[int] = None, cadence_dt: Optional[float] = None,
        history_len: int = 200) -> RunResult:
    """Integrate from ``datum`` to ``config.t_end`` or until an abort.

    ``sink`` is called with the initial state, at each cadence point and with
    the final state. ``cadence_dt`` forces steps to land on multiples of it.
    """
    config.validate()
    if datum.grid.n != config.n:
        raise ValueError(f"datum grid {datum.grid.n} != config n {config.n}")
    datum.require_zero_mean(1e-10)
    grid = datum.grid
    theta_hat = forward_transform(datum)
    frac = high_mode_fraction(theta_hat)
    if frac > RESOLUTION_ERROR:
        raise UnresolvedDatum(
            f"datum has {frac:.2e} of its energy above n/4 (limit {RESOLUTION_ERROR})")
    if frac > RESOLUTION_WARN:
        log.warning("datum energy above n/4 is %.2e of total (warn level %.0e)",
                    frac, RESOLUTION_WARN)

    state = SolverState(theta_hat=theta_hat, gamma=config.gamma)
    n = grid.n
    linf0 = _linf(theta_hat.coeffs, n)
    ceiling = config.blowup_threshold * linf0
    history: deque = deque(maxlen=history_len)
    l2 = float(np.sqrt(np.sum(np.abs(theta_hat.coeffs) ** 2)))
    history.append((0.0, l2, linf0))
    if sink:
        sink(state)

    def checkpoint_after(t):
        if cadence_dt is None:
            return config.t_end
        k = np.floor(t / cadence_dt + 1e-9) + 1
        return min(config.t_end, k * cadence_dt)

    reason = "completed"
    blowup = None
    t_end = config.t_end
    next_cp = checkpoint_after(0.0)
    while state.t < t_end:
        dt = adaptive_dt(state, config, next_cp)
        if state.t + dt > t_end or t_end - (state.t + dt) < 1e-12 * t_end:
            dt = t_end - state.t
        try:
            new = step(state, dt, linear_only=config.linear_only,
                       flip_dissipation_sign=config.flip_dissipation_sign)
        except NumericalBlowup as exc:
            exc.history = list(history)
            reason, blowup = "nan", exc.report()
            break
        # snap accumulated time onto checkpoints and t_end
        if abs(new.t - next_cp) <= 1e-12 * max(1.0, next_cp):
            new = replace(new, t=next_cp)
        state = new
        linf = _linf(state.theta_hat.coeffs, n)
        l2 = float(np.sqrt(np.sum(np.abs(state.theta_hat.coeffs) ** 2)))
        history.append((state.t, l2, linf))
        if linf > ceiling and linf0 > 0:
            exc = NumericalBlowup("blowup_threshold", state.t, state.step_count, list(history))
            reason, blowup = "blowup_threshold", exc.report()
            break
        at_cp = state.t >= next_cp
        if at_cp:
            next_cp = checkpoint_after(state.t)
        if sink and state.t < t_end:
            if (cadence_steps and state.step_count % cadence_steps == 0) or (
                    cadence_dt is not None and at_cp):
                sink(state)
    if sink and (reason != "completed" or state.t >= t_end):
        sink(state)
    if blowup:
        log.warning("run aborted: %s", blowup["reason"])
    return RunResult(state=state, reason=reason, history=list(history), blowup=blowup,
                     resolution_fraction=frac)
