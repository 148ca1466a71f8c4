"""Closed-form regularity bounds: xi(t), eventual regularization time, Hölder ceiling,
local existence time, H^2 growth bound, the large-data criterion and gamma_1(R).

Absolute values depend on universal constants that are only known to exist;
they are configuration (:class:`UniversalConstants`) and echoed in every report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

log = logging.getLogger(__name__)

GAMMA_TOP = 1.0 - 1e-9


@dataclass(frozen=True)
class UniversalConstants:
    """c0: nonlinear lower bound constant; c1: initial-xi constant; C0: local-time constant.

    ``c_star = 1 / (16 c0)`` is derived, never set independently.
    """

    c0: float = 1.0
    c1: float = 1.0
    C0: float = 2.0
    C_embed: float = 1.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be > 0")
        if not self.c1 >= 1 and not math.isclose(self.c1, 1.0):
            log.warning("c1=%g is below 1", self.c1)
        if not self.C0 > 0:
            raise ValueError("C0 must be > 0")
        if self.C0 < 2:
            log.debug("C0=%g is below the default floor 2", self.C0)
        if not self.C_embed > 0:
            raise ValueError("C_embed must be > 0")

    @property
    def c_star(self) -> float:
        return 1.0 / (16.0 * self.c0)

    @classmethod
    def with_c_star(cls, c_star: float, **kw) -> "UniversalConstants":
        return cls(c0=1.0 / (16.0 * c_star), **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_star"] = self.c_star
        return d


@dataclass(frozen=True)
class DatumNorms:
    l2: float
    h2: float
    linf: float

    def __post_init__(self):
        for name in ("l2", "h2", "linf"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def R(self, gamma: float) -> float:
        """Scale-invariant size ||.||_L2^(gamma/2) ||.||_H2^(1 - gamma/2)."""
        return self.l2 ** (gamma / 2) * self.h2 ** (1 - gamma / 2)

    def embedding_ok(self, C_embed: float) -> bool:
        return self.linf <= C_embed * math.sqrt(self.l2 * self.h2) * (1 + 1e-12)


@dataclass
class BoundsReport:
    gamma: float
    alpha: float
    alpha_valid: bool
    xi0: float
    t_star_composed: float
    t_star_theorem: float
    t_star_ratio: float
    M: float
    M_theorem: float
    t1: float
    gamma1: Optional[float]
    R: float
    criterion_holds: bool
    criterion_margin: float
    certified: bool
    zero_datum: bool
    embedding_ok: bool
    norms: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


class AlphaChoice(NamedTuple):
    alpha: float
    valid: bool


def alpha_choice(gamma: float) -> AlphaChoice:
    """alpha = min(2 (1 - gamma), 1/2), flagged valid iff alpha in (1 - gamma, 1)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    a = min(2.0 * (1.0 - gamma), 0.5)
    return AlphaChoice(a, 1.0 - gamma < a < 1.0)


def _check_pair(gamma: float, alpha: float) -> None:
    # The theorems want alpha in (1 - gamma, 1); the formulas only need alpha in (0, 1].
    # Validity against the theorem range is tracked by callers (see certify).
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def xi0(gamma: float, alpha: float, linf: float, constants: UniversalConstants) -> float:
    """Initial regularization length (c1 alpha ||theta0||_inf)^(1 / (1 - gamma)); 0 for a zero datum."""
    _check_pair(gamma, alpha)
    if linf < 0:
        raise ValueError("linf must be >= 0")
    if linf == 0:
        return 0.0
    return (constants.c1 * alpha * linf) ** (1.0 / (1.0 - gamma))


def regularization_time(xi_init: float, gamma: float, alpha: float,
                        constants: UniversalConstants) -> float:
    """Time at which xi reaches zero: alpha xi0^gamma / (gamma c_star)."""
    return alpha / (gamma * constants.c_star) * xi_init**gamma


def xi_trajectory(t: float, xi_init: float, gamma: float, alpha: float,
                  constants: UniversalConstants) -> float:
    """Solution of d(xi)/dt = -(c_star / alpha) xi^(1 - gamma), xi(0) = xi_init, frozen at 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t >= regularization_time(xi_init, gamma, alpha, constants):
        return 0.0
    base = xi_init**gamma - gamma * constants.c_star / alpha * t
    if base <= 0.0:
        return 0.0
    return base ** (1.0 / gamma)


class TStar(NamedTuple):
    composed: float
    theorem: float
    ratio: float  # composed / theorem


def t_star(gamma: float, alpha: float, linf: float, constants: UniversalConstants,
           C: Optional[float] = None) -> TStar:
    """Both forms of the eventual regularization time.

    ``composed`` substitutes xi0 into alpha xi0^gamma / (gamma c_star);
    ``theorem`` is C alpha^(gamma (2 - gamma) / (1 - gamma)) linf^(gamma / (1 - gamma))
    with C defaulting to ``constants.C0``. The alpha exponents differ by 1 - gamma.
    """
    x0 = xi0(gamma, alpha, linf, constants)
    composed = regularization_time(x0, gamma, alpha, constants)
    C = constants.C0 if C is None else C
    theorem = C * alpha ** (gamma * (2 - gamma) / (1 - gamma)) * linf ** (gamma / (1 - gamma))
    ratio = composed / theorem if theorem > 0 else math.nan
    return TStar(composed, theorem, ratio)


class HolderCeiling(NamedTuple):
    M: float
    theorem: float


def holder_ceiling(gamma: float, alpha: float, linf: float, constants: UniversalConstants,
                   C: Optional[float] = None) -> HolderCeiling:
    """M = 4 linf / xi0^alpha, plus C alpha^(-alpha/(1-gamma)) linf^(-(gamma+alpha-1)/(1-gamma))."""
    x0 = xi0(gamma, alpha, linf, constants)
    if x0 == 0.0:
        raise ValueError("xi0 = 0: the ceiling is undefined for a zero datum")
    M = 4.0 * linf / x0**alpha
    C = 4.0 * constants.c1 ** (-alpha / (1 - gamma)) if C is None else C
    theorem = C * alpha ** (-alpha / (1 - gamma)) * linf ** (-(gamma + alpha - 1) / (1 - gamma))
    return HolderCeiling(M, theorem)


def t_local(gamma: float, l2: float, h2: float, constants: UniversalConstants) -> float:
    """Local existence time 1 / (C0 l2^(gamma/2) h2^(2 - gamma/2)); inf if a norm vanishes."""
    if l2 < 0 or h2 < 0:
        raise ValueError("norms must be >= 0")
    if l2 == 0 or h2 == 0:
        return math.inf
    return 1.0 / (constants.C0 * l2 ** (gamma / 2) * h2 ** (2 - gamma / 2))


class GrowthBound(NamedTuple):
    value: float
    blowup_time: float
    diverged: bool


def h2_growth_bound(t: float, y0: float, gamma: float, A: float) -> GrowthBound:
    """Riccati bound y0 / (1 - (2 - gamma/2) A y0^(2 - gamma/2) t)^(1 / (2 - gamma/2))."""
    p = 2.0 - gamma / 2.0
    rate = p * A * y0**p
    tb = math.inf if rate == 0 else 1.0 / rate
    if t >= tb:
        return GrowthBound(math.inf, tb, True)
    return GrowthBound(y0 / (1.0 - rate * t) ** (1.0 / p), tb, False)


def fit_riccati_constant(times, y, gamma: float) -> float:
    """Smallest A >= 0 with dy/dt <= A y^(3 - gamma/2) along a sampled trajectory.

    Slopes are forward differences divided by the left-endpoint power, which
    errs on the large side when y grows.
    """
    A = 0.0
    q = 3.0 - gamma / 2.0
    for i in range(len(times) - 1):
        dt = times[i + 1] - times[i]
        if dt <= 0 or y[i] <= 0:
            continue
        A = max(A, (y[i + 1] - y[i]) / dt / y[i] ** q)
    return A


class Criterion(NamedTuple):
    holds: bool
    margin: float
    holds_norm_form: bool


def criterion_check(gamma: float, R: float, constants: UniversalConstants) -> Criterion:
    """Large-data criterion R^(-1/gamma) C0^(-2(1-gamma)/(gamma(2-gamma))) >= alpha.

    ``margin`` is log(LHS) - log(alpha). The equivalent form
    C0^-2 alpha^(-gamma(2-gamma)/(1-gamma)) >= R^((2-gamma)/(1-gamma)) is evaluated in
    log space and must agree.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not R > 0:
        raise ValueError("R must be > 0")
    alpha = alpha_choice(gamma).alpha
    C0 = constants.C0
    log_lhs = -math.log(R) / gamma - 2 * (1 - gamma) / (gamma * (2 - gamma)) * math.log(C0)
    margin = log_lhs - math.log(alpha)
    left = -2 * math.log(C0) - gamma * (2 - gamma) / (1 - gamma) * math.log(alpha)
    right = (2 - gamma) / (1 - gamma) * math.log(R)
    holds = margin >= 0
    holds_other = left >= right
    # the two forms differ by the positive factor gamma(2-gamma)/(1-gamma); only
    # round-off at margin ~ 0 can split them
    scaled = (left - right) * (1 - gamma) / (gamma * (2 - gamma))
    if holds != holds_other and abs(scaled - margin) > 1e-9 * max(1.0, abs(margin)):
        raise ArithmeticError("criterion forms disagree")
    return Criterion(holds, margin, holds_other)


class Threshold(NamedTuple):
    gamma1: float
    status: str  # bisected | saturated | unreached


def gamma1(R: float, constants: UniversalConstants, gamma0: float = 0.05,
           tol: float = 1e-9, scan_step: float = 1e-3) -> Threshold:
    """Smallest gamma in [gamma0, 1) from which the criterion holds all the way to 1.

    A scan on a ``scan_step`` grid first confirms that the criterion, once true,
    stays true; bisection then refines the switch point to ``tol``.
    """
    if not R > 0:
        raise ValueError("R must be > 0")
    if not 0.0 < gamma0 < 1.0:
        raise ValueError("gamma0 must lie in (0, 1)")
    k = int(math.ceil((GAMMA_TOP - gamma0) / scan_step))
    grid = [min(gamma0 + i * scan_step, GAMMA_TOP) for i in range(k + 1)]
    if grid[-1] != GAMMA_TOP:
        grid.append(GAMMA_TOP)
    flags = [criterion_check(g, R, constants).holds for g in grid]
    first = next((i for i, f in enumerate(flags) if f), None)
    if first is None:
        return Threshold(1.0, "unreached")
    if not all(flags[first:]):
        raise ArithmeticError(f"criterion is not monotone in gamma for R={R}")
    if first == 0:
        return Threshold(gamma0, "saturated")
    lo, hi = grid[first - 1], grid[first]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if criterion_check(mid, R, constants).holds:
            hi = mid
        else:
            lo = mid
    return Threshold(hi, "bisected")


def certify(norms: DatumNorms, gamma: float, constants: UniversalConstants,
            alpha: Optional[float] = None, with_gamma1: bool = True,
            gamma0: float = 0.05) -> BoundsReport:
    """Assemble every bound for one datum and decide whether T_star <= T_1 is certified."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    choice = alpha_choice(gamma)
    if alpha is None:
        alpha, valid = choice
    else:
        valid = 1.0 - gamma < alpha < 1.0
    emb = norms.embedding_ok(constants.C_embed)
    if not emb:
        log.warning("supplied norms violate linf <= C_embed sqrt(l2 h2)")
    R = norms.R(gamma)
    zero = norms.linf == 0 or norms.l2 == 0 or norms.h2 == 0
    t1 = t_local(gamma, norms.l2, norms.h2, constants)
    if zero:
        x0 = ts_c = ts_t = M = M_t = 0.0
        ratio = math.nan
        crit_holds, margin = True, math.inf
    else:
        if valid:
            x0 = xi0(gamma, alpha, norms.linf, constants)
            ts = t_star(gamma, alpha, norms.linf, constants)
            ts_c, ts_t, ratio = ts
            M, M_t = holder_ceiling(gamma, alpha, norms.linf, constants)
        else:
            x0 = ts_c = ts_t = M = M_t = ratio = math.nan
        crit = criterion_check(gamma, R, constants)
        crit_holds, margin = crit.holds, crit.margin
    g1 = None
    if with_gamma1 and R > 0:
        g1 = gamma1(R, constants, gamma0=gamma0).gamma1
    certified = bool(zero or (valid and ts_c <= t1))
    return BoundsReport(
        gamma=gamma, alpha=alpha, alpha_valid=valid, xi0=x0,
        t_star_composed=ts_c, t_star_theorem=ts_t, t_star_ratio=ratio,
        M=M, M_theorem=M_t, t1=t1, gamma1=g1, R=R,
        criterion_holds=crit_holds, criterion_margin=margin,
        certified=certified, zero_datum=zero, embedding_ok=emb,
        norms=asdict(norms), constants=constants.to_dict(),
    )
