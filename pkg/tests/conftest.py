import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracsqg.spectral import Grid, ScalarField, SpectralField, inverse_transform

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile("default")


def random_field(n: int, seed: int, k_max: int = None, slope: float = 2.0) -> ScalarField:
    """Seeded real zero-mean trigonometric polynomial with decaying random coefficients."""
    rng = np.random.default_rng(seed)
    grid = Grid(n)
    k_max = k_max or n // 4
    modes = {}
    for a in range(0, k_max + 1):
        for b in range(-k_max, k_max + 1):
            if (a == 0 and b <= 0) or a * a + b * b > k_max * k_max:
                continue
            amp = (1.0 + a * a + b * b) ** (-slope / 2)
            modes[(a, b)] = amp * (rng.normal() + 1j * rng.normal())
    return inverse_transform(SpectralField.from_modes(grid, modes))


def coords(n: int):
    x = np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


@pytest.fixture
def grid64():
    return Grid(64)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
