"""Norms, Hölder quotients and the pointwise dissipation functional on gridded fields.

All sup-type quantities are lattice lower bounds: the sup runs over grid
points x and over a finite set of lattice shifts h.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .spectral import (
    Grid,
    ScalarField,
    SpectralField,
    _to_physical,
    _to_spectral,
    forward_transform,
    pad_coefficients,
)


class DegenerateProbe(ValueError):
    """No admissible sample points remain for the constant estimate."""


@dataclass(frozen=True)
class ShiftSet:
    """Lattice shifts ``h = offsets * spacing`` with torus lengths."""

    grid: Grid
    offsets: np.ndarray  # (m, 2) integer lattice steps

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 2) % self.grid.n
        if len(off) == 0:
            raise ValueError("shift set is empty")
        if np.any(np.all(off == 0, axis=1)):
            raise ValueError("zero shift is not allowed")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)

    @property
    def lengths(self) -> np.ndarray:
        """Torus length of each shift (minimum over periodic images)."""
        n = self.grid.n
        a = np.minimum(self.offsets, n - self.offsets)
        return np.sqrt((a**2).sum(axis=1)) / n

    def vectors(self) -> np.ndarray:
        """Shifts as the shortest representative vectors in physical units."""
        n = self.grid.n
        off = np.where(self.offsets > n // 2, self.offsets - n, self.offsets)
        return off / n

    def __len__(self):
        return len(self.offsets)

    @classmethod
    def default(cls, grid: Grid) -> "ShiftSet":
        """All axis-aligned shifts plus dyadic diagonals, at most 4n of them."""
        n = grid.n
        j = np.arange(1, n)
        rows = [np.stack([j, np.zeros_like(j)], 1), np.stack([np.zeros_like(j), j], 1)]
        d = 1
        diag = []
        while d <= n // 2:
            diag += [(d, d), (d, n - d)]
            d *= 2
        rows.append(np.array(diag))
        off = np.concatenate(rows)[: 4 * n]
        return cls(grid, off)

    @classmethod
    def axis(cls, grid: Grid) -> "ShiftSet":
        n = grid.n
        j = np.arange(1, n)
        return cls(grid, np.concatenate([np.stack([j, 0 * j], 1), np.stack([0 * j, j], 1)]))

    @classmethod
    def from_vectors(cls, grid: Grid, hs: Sequence[Sequence[float]]) -> "ShiftSet":
        return cls(grid, np.array([_lattice(grid, h) for h in hs]))


@dataclass(frozen=True)
class HolderProbe:
    alpha: float
    xi: float
    shift_set: ShiftSet

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")

    def check_against(self, gamma: float) -> None:
        """Raise unless alpha lies in (1 - gamma, 1)."""
        if not 1.0 - gamma < self.alpha < 1.0:
            raise ValueError(f"alpha={self.alpha} not in (1 - gamma, 1) for gamma={gamma}")


@dataclass
class DiagnosticsRecord:
    t: float
    l2_norm: float
    linf_norm: float
    sobolev_norms: dict = field(default_factory=dict)
    holder_seminorm: dict = field(default_factory=dict)
    v_sup: float = 0.0
    energy_residual: float = 0.0
    dgamma_min: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _lattice(grid: Grid, h) -> tuple[int, int]:
    a = np.asarray(h, dtype=float) * grid.n
    r = np.rint(a)
    if np.any(np.abs(a - r) > 1e-9):
        raise ValueError(f"shift {tuple(h)} is not on the grid lattice")
    return int(r[0]) % grid.n, int(r[1]) % grid.n


def _shift(values: np.ndarray, off) -> np.ndarray:
    """values(x + h) for lattice offset ``off``."""
    return np.roll(values, (-int(off[0]), -int(off[1])), axis=(0, 1))


def lp_norm(f: ScalarField, p: float) -> float:
    """Riemann-sum L^p norm; p = inf gives the max of |f| over the grid."""
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


def sobolev_norm(F: SpectralField, s: float) -> float:
    """Homogeneous norm ``||Lambda^s f||_L2`` for s in [-2, 4]."""
    if not -2.0 <= s <= 4.0:
        raise ValueError(f"s must lie in [-2, 4], got {s}")
    c = F.coeffs
    w = F.grid.symbol(2.0 * s)
    return float(np.sqrt(np.sum(w * (c.real**2 + c.imag**2))))


def dissipation_functional(f: ScalarField, gamma: float) -> ScalarField:
    """Pointwise ``D_gamma[f] = 2 f Lambda^gamma f - Lambda^gamma(f^2)``.

    The square is formed on a grid twice as fine so it is alias-free for the
    trigonometric interpolant of ``f``; values are returned at the original
    grid points. The result does not have zero mean.
    """
    grid = f.grid
    n = grid.n
    m = 2 * n
    cp = pad_coefficients(forward_transform(f).coeffs, m)
    fine = _to_physical(cp, m)
    sym = Grid(m).symbol(gamma)
    lam_f = _to_physical(cp * sym, m)
    sq = _to_spectral(fine * fine, m)
    lam_sq = _to_physical(sq * sym, m)
    d = 2.0 * fine * lam_f - lam_sq
    return ScalarField(grid, d[::2, ::2])


def finite_difference(f: ScalarField, h) -> ScalarField:
    """``delta_h f(x) = f(x + h) - f(x)`` for a lattice vector h (physical units)."""
    off = _lattice(f.grid, h)
    return ScalarField(f.grid, _shift(f.values, off) - f.values)


def _quotient_sup(values: np.ndarray, shifts: ShiftSet, alpha: float, xi: float):
    """sup_{x,h} |delta_h f(x)| / (xi^2 + |h|^2)^(alpha/2) with lexicographic argmax."""
    best = -1.0
    arg = None
    lengths = shifts.lengths
    for idx, off in enumerate(shifts.offsets):
        denom = (xi * xi + lengths[idx] ** 2) ** (alpha / 2.0)
        d = np.abs(_shift(values, off) - values)
        flat = int(np.argmax(d))
        q = float(d.flat[flat]) / denom
        if q > best:
            best, arg = q, (flat, idx)
    return best, arg


def holder_seminorm(f: ScalarField, alpha: float, shifts: ShiftSet) -> float:
    """Lattice lower bound for ``[f]_{C^alpha}`` (torus metric)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if shifts is None or len(shifts) == 0:
        raise ValueError("empty shift set")
    return _quotient_sup(f.values, shifts, alpha, 0.0)[0]


def v_quotient(f: ScalarField, probe: HolderProbe):
    """sup of ``|delta_h f| / (xi^2 + |h|^2)^(alpha/2)`` and where it is attained.

    Returns ``(v_sup, (x, h))`` with x and h in physical units.
    """
    best, (flat, idx) = _quotient_sup(f.values, probe.shift_set, probe.alpha, probe.xi)
    n = f.grid.n
    i, j = divmod(flat, n)
    x = (i / n, j / n)
    h = tuple(float(v) for v in probe.shift_set.vectors()[idx])
    return best, (x, h)


def nonlinear_bound_probe(f: ScalarField, gamma: float, alpha: float,
                          shifts: ShiftSet, rel_skip: float = 1e-12) -> float:
    """Smallest c0 for which the nonlinear lower bound on D_gamma[delta_h f] holds on the samples.

    The bound reads
        D_gamma[delta_h f](x) >= (|v| / ||v||)^(gamma / (1 - alpha)) |delta_h f(x)|^2 / (c0 |h|^gamma)
    with v = delta_h f / |h|^alpha. Points with D below ``rel_skip * scale`` are skipped.
    This is an empirical estimate over the lattice, not a bound.
    """
    if not 1.0 - gamma < alpha < 1.0:
        raise ValueError(f"alpha={alpha} not in (1 - gamma, 1) for gamma={gamma}")
    lengths = shifts.lengths
    deltas, ds = [], []
    scale = 0.0
    for off in shifts.offsets:
        d = _shift(f.values, off) - f.values
        df = ScalarField(f.grid, d)
        D = dissipation_functional(df, gamma).values
        lam = np.abs(_to_physical(forward_transform(df).coeffs * f.grid.symbol(gamma), f.grid.n))
        scale = max(scale, float(np.abs(d).max() * lam.max()))
        deltas.append(d)
        ds.append(D)
    vmax = max(float(np.abs(d).max()) / lengths[i] ** alpha for i, d in enumerate(deltas))
    if vmax == 0.0 or scale == 0.0:
        raise DegenerateProbe("field has no nonzero finite differences")
    best = -np.inf
    expo = gamma / (1.0 - alpha)
    for i, (d, D) in enumerate(zip(deltas, ds)):
        ok = D > rel_skip * scale
        if not np.any(ok):
            continue
        v = np.abs(d[ok]) / lengths[i] ** alpha
        ratio = (v / vmax) ** expo * d[ok] ** 2 / (lengths[i] ** gamma * D[ok])
        best = max(best, float(ratio.max()))
    if not np.isfinite(best):
        raise DegenerateProbe("all sample points are degenerate")
    return best


Trajectory = Sequence[tuple[float, ScalarField]]


def scaling_check(run_a: Trajectory, run_b: Trajectory, lam: int, gamma: float,
                  ttol: float = 1e-9) -> float:
    """Max relative L2 mismatch between run_b and the rescaled run_a.

    ``run_b`` starts from lam^(gamma-1) theta0(lam x); at each of its
    checkpoints t_b it is compared with lam^(gamma-1) theta_a(lam x, lam^gamma t_b).
    The sample at ``lam x`` must lie on run_a's grid.
    """
    if lam < 1 or int(lam) != lam:
        raise ValueError("lambda must be a positive integer")
    times_a = np.array([t for t, _ in run_a])
    worst = 0.0
    for tb, fb in run_b:
        ta = lam**gamma * tb
        hit = np.nonzero(np.abs(times_a - ta) <= ttol * max(1.0, ta))[0]
        if len(hit) == 0:
            raise ValueError(f"no run_a checkpoint at t={ta:.12g} (matching t_b={tb:.12g})")
        fa = run_a[int(hit[0])][1]
        na, nb = fa.grid.n, fb.grid.n
        if (lam * na) % nb:
            raise ValueError(f"lam*x is not on run_a's grid (n_a={na}, n_b={nb}, lam={lam})")
        idx = (np.arange(nb) * lam * na // nb) % na
        pred = lam ** (gamma - 1.0) * fa.values[np.ix_(idx, idx)]
        ref = np.sqrt(np.mean(pred**2))
        err = np.sqrt(np.mean((fb.values - pred) ** 2))
        if ref == 0.0:
            rel = 0.0 if err == 0.0 else math.inf
        else:
            rel = err / ref
        worst = max(worst, rel)
    return worst


def compute_record(theta_hat: SpectralField, t: float, gamma: float, *,
                   alphas: Sequence[float] = (), shifts: Optional[ShiftSet] = None,
                   v_probe: Optional[HolderProbe] = None, energy_residual: float = 0.0,
                   sobolev_s: Optional[Sequence[float]] = None) -> DiagnosticsRecord:
    """Sample every configured diagnostic at one time point."""
    f = ScalarField(theta_hat.grid, _to_physical(theta_hat.coeffs, theta_hat.grid.n))
    if sobolev_s is None:
        sobolev_s = (gamma / 2.0, 2.0, 2.0 + gamma / 2.0)
    shifts = shifts or ShiftSet.default(f.grid)
    rec = DiagnosticsRecord(
        t=t,
        l2_norm=sobolev_norm(theta_hat, 0.0),
        linf_norm=lp_norm(f, math.inf),
        sobolev_norms={float(s): sobolev_norm(theta_hat, s) for s in sobolev_s},
        holder_seminorm={float(a): holder_seminorm(f, a, shifts) for a in alphas},
        energy_residual=energy_residual,
        dgamma_min=float(dissipation_functional(f, gamma).values.min()),
    )
    if v_probe is not None:
        rec.v_sup = v_quotient(f, v_probe)[0]
    return rec
