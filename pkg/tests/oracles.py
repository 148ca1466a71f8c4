"""Independent reference computations used by the tests.

None of these share code paths with the package beyond building fields.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as Gamma


def rk4(rhs, y0: float, t_end: float, steps: int) -> float:
    """Classical fixed-step RK4 for a scalar ODE y' = rhs(y)."""
    y = float(y0)
    h = t_end / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def kernel_constant(gamma: float) -> float:
    """Normalization of the singular-integral form of Lambda^gamma in two dimensions."""
    return 2.0**gamma * Gamma(1.0 + gamma / 2.0) / (math.pi * abs(Gamma(-gamma / 2.0)))


def trig_eval(coeffs: np.ndarray, m: int, shift: float = 0.0) -> np.ndarray:
    """Evaluate the trigonometric polynomial with n x n coefficients on the points (i + shift)/m."""
    n = coeffs.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0  # test fields carry no Nyquist content
    x = (np.arange(m) + shift) / m
    E = np.exp(2j * np.pi * np.outer(x, k))  # (m, n)
    return (E @ coeffs @ E.T).real


def dgamma_quadrature(values: np.ndarray, gamma: float, m: int = 256, radius: float = 3.0):
    """D_gamma[f](x) = C int (f(x) - f(x+z))^2 / |z|^(2+gamma) dz at the grid points of f.

    Midpoint rule on a cell-centred offset lattice of spacing 1/m inside |z| <= radius,
    folded onto one period; outside, (f(x) - f(x+z))^2 is replaced by its angular
    average f(x)^2 + mean(f^2), which integrates in closed form.
    """
    n = values.shape[0]
    coeffs = np.fft.fft2(values) / n**2
    h = 1.0 / m
    g = trig_eval(coeffs, m, shift=0.5)  # f at (j + 1/2) h
    tiles = int(math.ceil(radius))
    W = np.zeros((m, m))
    j = np.arange(m)
    for a in range(-tiles, tiles):
        for b in range(-tiles, tiles):
            z1 = (a * m + j[:, None] + 0.5) * h
            z2 = (b * m + j[None, :] + 0.5) * h
            r2 = z1**2 + z2**2
            W += np.where(r2 <= radius**2, r2 ** (-(2.0 + gamma) / 2.0), 0.0) * h * h
    S = W.sum()
    corr = lambda u: np.fft.ifft2(np.conj(np.fft.fft2(W)) * np.fft.fft2(u)).real
    step = m // n
    f = values
    cg = corr(g)[::step, ::step]
    cg2 = corr(g * g)[::step, ::step]
    inner = f * f * S - 2.0 * f * cg + cg2
    tail = (f * f + np.mean(g * g)) * 2.0 * math.pi * radius ** (-gamma) / gamma
    return kernel_constant(gamma) * (inner + tail)


def sinusoid_sum(modes, n: int):
    """Physical values, gradient and perpendicular Riesz velocity of sum a cos(2 pi k.x + p).

    Each mode is handled in closed form: for c = cos(phase), s = sin(phase),
    grad = -2 pi k a s, u = (k2, -k1) a s / |k|.
    """
    x = np.arange(n) / n
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    theta = np.zeros((n, n))
    g1, g2, u1, u2 = (np.zeros((n, n)) for _ in range(4))
    for (k1, k2), a, p in modes:
        ph = 2 * np.pi * (k1 * x1 + k2 * x2) + p
        kk = math.hypot(k1, k2)
        theta += a * np.cos(ph)
        g1 += -2 * np.pi * k1 * a * np.sin(ph)
        g2 += -2 * np.pi * k2 * a * np.sin(ph)
        u1 += k2 / kk * a * np.sin(ph)
        u2 += -k1 / kk * a * np.sin(ph)
    return theta, (g1, g2), (u1, u2)


def centered_gradient(values: np.ndarray):
    n = values.shape[0]
    d = n / 2.0
    return ((np.roll(values, -1, 0) - np.roll(values, 1, 0)) * d,
            (np.roll(values, -1, 1) - np.roll(values, 1, 1)) * d)
