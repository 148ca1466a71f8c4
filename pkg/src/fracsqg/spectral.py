"""Grid bookkeeping, FFTs and Fourier multipliers on the unit torus [0, 1]^2.

Conventions
-----------
* ``values[i, j]`` is the sample at ``(i / n, j / n)``; axis 0 is x1.
* Fourier basis ``exp(2 pi i k.x)``. The forward transform divides by ``n**2`` so
  ``coeffs`` are true Fourier coefficients and Parseval reads
  ``||f||_L2^2 = sum |coeffs|^2``.
* The fractional Laplacian ``Lambda^s`` has symbol ``(2 pi |k|)^s`` so that
  ``Lambda^2 = -Delta`` on this torus.
* Mode (0, 0) is pinned to zero after every transform and operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft

TWO_PI = 2.0 * np.pi


class FieldError(ValueError):
    """A field violates one of its invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform ``n x n`` grid on the unit torus."""

    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n!r}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @cached_property
    def k1(self) -> np.ndarray:
        """Integer wavenumbers along axis 0, broadcastable to (n, n).

        The Nyquist index is labelled +n/2, so k lies in {-n/2+1, ..., n/2}.
        """
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        k[self.n // 2] = self.n // 2
        return _frozen(k[:, None])

    @cached_property
    def k2(self) -> np.ndarray:
        return _frozen(self.k1.reshape(1, -1))

    @cached_property
    def kmag(self) -> np.ndarray:
        return _frozen(np.sqrt((self.k1**2 + self.k2**2).astype(float)))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on rows/columns holding the Nyquist wavenumber."""
        h = self.n // 2
        return _frozen((np.abs(self.k1) == h) | (np.abs(self.k2) == h))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where a coefficient survives the 2/3 rule."""
        kmax = np.maximum(np.abs(self.k1), np.abs(self.k2))
        return _frozen(3 * kmax <= self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.spacing
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        return _frozen(x1), _frozen(x2)

    def symbol(self, s: float) -> np.ndarray:
        """``(2 pi |k|)^s`` with the zero mode set to 0 (any real s). Read-only."""
        return _symbol(self.n, float(s))


@dataclass(frozen=True)
class ScalarField:
    """Real samples of a periodic scalar on ``grid``.

    Only finiteness is enforced on construction. Zero mean is a property of
    solution fields (see :meth:`require_zero_mean`), not of derived
    quantities such as the dissipation functional.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise FieldError(f"expected shape {(self.grid.n,) * 2}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    def mean(self) -> float:
        return float(self.values.mean())

    def require_zero_mean(self, rtol: float = 1e-12) -> "ScalarField":
        scale = float(np.abs(self.values).max()) if self.values.size else 0.0
        if abs(self.mean()) > rtol * scale:
            raise FieldError(f"field mean {self.mean():.3e} is not zero")
        return self

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.n, grid.n)))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients in numpy FFT index order, mode (0, 0) pinned to 0."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n, self.grid.n):
            raise FieldError(f"expected shape {(self.grid.n,) * 2}, got {c.shape}")
        c[0, 0] = 0.0
        object.__setattr__(self, "coeffs", _frozen(c))

    def coeff(self, k1: int, k2: int) -> complex:
        n = self.grid.n
        return complex(self.coeffs[k1 % n, k2 % n])

    def hermitian_defect(self) -> float:
        """max |c(-k) - conj(c(k))| relative to max |c|."""
        c = self.coeffs
        scale = float(np.abs(c).max())
        if scale == 0.0:
            return 0.0
        return float(np.abs(_reflect(c) - np.conj(c)).max()) / scale

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    @classmethod
    def from_modes(cls, grid: Grid, modes: dict[tuple[int, int], complex]) -> "SpectralField":
        """Build from ``{(k1, k2): coeff}``; conjugate partners are filled in."""
        c = np.zeros((grid.n, grid.n), dtype=complex)
        n = grid.n
        for (a, b), z in modes.items():
            c[a % n, b % n] = z
            if (-a) % n != a % n or (-b) % n != b % n:
                c[(-a) % n, (-b) % n] = np.conj(z)
        return cls(grid, c)


@dataclass(frozen=True)
class VectorSpectralField:
    u1: SpectralField
    u2: SpectralField

    def divergence(self) -> np.ndarray:
        g = self.u1.grid
        return g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs


@lru_cache(maxsize=64)
def _symbol(n: int, s: float) -> np.ndarray:
    kmag = Grid(n).kmag
    out = np.zeros((n, n))
    nz = kmag > 0
    out[nz] = (TWO_PI * kmag[nz]) ** s
    return _frozen(out)


def _reflect(c: np.ndarray) -> np.ndarray:
    """Return ``c`` re-indexed at -k."""
    return np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1))


def forward_transform(f: ScalarField) -> SpectralField:
    """Physical samples to Fourier coefficients (divided by n^2)."""
    n = f.grid.n
    return SpectralField(f.grid, scipy.fft.fft2(f.values) / (n * n))


def inverse_transform(F: SpectralField, tol: float = 1e-10) -> ScalarField:
    """Fourier coefficients to real samples.

    Raises :class:`FieldError` when the Hermitian defect exceeds ``tol``.
    """
    defect = F.hermitian_defect()
    if defect > tol:
        raise FieldError(f"coefficients are not Hermitian (defect {defect:.2e})")
    n = F.grid.n
    return ScalarField(F.grid, _to_physical(F.coeffs, n))


def _to_physical(c: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.ifft2(c).real * (n * n)


def _to_spectral(v: np.ndarray, n: int) -> np.ndarray:
    c = scipy.fft.fft2(v) / (n * n)
    c[0, 0] = 0.0
    return c


def fractional_laplacian(F: SpectralField, sigma: float) -> SpectralField:
    """Apply ``Lambda^sigma`` for sigma in (0, 2]."""
    if not 0.0 < sigma <= 2.0:
        raise ValueError(f"sigma must lie in (0, 2], got {sigma}")
    return SpectralField(F.grid, F.coeffs * F.grid.symbol(sigma))


def inverse_fractional_laplacian(F: SpectralField, sigma: float) -> SpectralField:
    """Apply ``Lambda^-sigma`` on zero-mean fields, sigma in (0, 2]."""
    if not 0.0 < sigma <= 2.0:
        raise ValueError(f"sigma must lie in (0, 2], got {sigma}")
    return SpectralField(F.grid, F.coeffs * F.grid.symbol(-sigma))


def riesz_perp_velocity(theta_hat: SpectralField) -> VectorSpectralField:
    """``u = grad_perp Lambda^-1 theta``: u_hat(k) = i (-k2, k1) / |k| theta_hat(k).

    Nyquist rows are dropped so both components stay Hermitian.
    """
    g = theta_hat.grid
    s = np.zeros_like(theta_hat.coeffs)
    keep = (g.kmag > 0) & ~g.nyquist_mask
    s[keep] = 1j * theta_hat.coeffs[keep] / g.kmag[keep]
    return VectorSpectralField(SpectralField(g, -g.k2 * s), SpectralField(g, g.k1 * s))


def gradient(F: SpectralField) -> VectorSpectralField:
    """Spectral gradient; Nyquist rows are dropped."""
    g = F.grid
    c = np.where(g.nyquist_mask, 0.0, F.coeffs) * (TWO_PI * 1j)
    return VectorSpectralField(SpectralField(g, g.k1 * c), SpectralField(g, g.k2 * c))


def dealias(F: SpectralField) -> SpectralField:
    """2/3 rule: zero every mode with max(|k1|, |k2|) > n/3."""
    return SpectralField(F.grid, np.where(F.grid.dealias_mask, F.coeffs, 0.0))


def _pad_axis(c: np.ndarray, m: int, axis: int) -> np.ndarray:
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0]
    h = n // 2
    out = np.zeros((m,) + c.shape[1:], dtype=complex)
    out[:h] = c[:h]
    out[m - h + 1:] = c[h + 1:]
    out[h] += 0.5 * c[h]
    out[m - h] += 0.5 * c[h]
    return np.moveaxis(out, 0, axis)


def pad_coefficients(c: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad an ``n x n`` coefficient array to ``m x m`` (m >= n).

    Nyquist coefficients are split evenly between +n/2 and -n/2 so the
    padded trigonometric interpolant stays real.
    """
    n = c.shape[0]
    if m < n:
        raise ValueError("padding target smaller than source")
    if m == n:
        return c.copy()
    return _pad_axis(_pad_axis(c, m, 0), m, 1)


def interpolate(F: SpectralField, m: int) -> np.ndarray:
    """Samples of the trigonometric interpolant of ``F`` on an ``m x m`` grid."""
    return _to_physical(pad_coefficients(F.coeffs, m), m)
