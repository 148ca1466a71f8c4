import dataclasses
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coords, random_field
from fracsqg.solver import (NumericalBlowup, SolverConfig, SolverState, UnresolvedDatum,
                            adaptive_dt, nonlinear_term, run, step)
from fracsqg.spectral import Grid, ScalarField, SpectralField, forward_transform, inverse_transform
from oracles import sinusoid_sum

TWO_PI = 2 * math.pi


def _state(f: ScalarField, gamma=0.8) -> SolverState:
    return SolverState(theta_hat=forward_transform(f), gamma=gamma)


def _smooth(n, seed=3, amp=1.0):
    f = random_field(n, seed, k_max=6, slope=3.0)
    return ScalarField(f.grid, amp * f.values / np.abs(f.values).max())


class TestSolverConfig:
    def test_defaults_valid(self):
        assert SolverConfig().violations() == []

    def test_gamma_out_of_range(self):
        bad = SolverConfig(gamma=1.5).violations()
        assert any("gamma 1.5 out of [gamma0=0.05, 1]" in b for b in bad)

    def test_collects_every_violation(self):
        cfg = SolverConfig(n=24, cfl_number=0.0, dt_max=-1.0, t_end=0.0, blowup_threshold=0.0)
        assert len(cfg.violations()) == 5
        with pytest.raises(ValueError):
            cfg.validate()


class TestNonlinearTerm:
    def test_zero(self):
        assert not nonlinear_term(SpectralField.zeros(Grid(16))).coeffs.any()

    def test_single_mode_is_steady(self):
        x1, _ = coords(32)
        F = forward_transform(ScalarField(Grid(32), np.sin(TWO_PI * x1)))
        assert np.abs(inverse_transform(nonlinear_term(F)).values).max() <= 1e-12

    def test_sine_plus_cosine(self):
        # u = (sin 2 pi x2, cos 2 pi x1), grad = (2 pi cos 2 pi x1, -2 pi sin 2 pi x2):
        # the four products cancel pairwise
        x1, x2 = coords(32)
        v = np.sin(TWO_PI * x1) + np.cos(TWO_PI * x2)
        out = inverse_transform(nonlinear_term(forward_transform(ScalarField(Grid(32), v))))
        assert np.abs(out.values).max() <= 1e-12

    def test_general_modes_against_closed_form(self):
        # max |k| = 5, so the product lives below 10 <= 64/3 and dealiasing is inert
        modes = [((1, 2), 0.7, 0.3), ((-3, 1), 0.4, 1.1), ((4, -3), 0.2, -2.0), ((0, 1), 1.0, 0.0)]
        theta, (g1, g2), (u1, u2) = sinusoid_sum(modes, 64)
        out = nonlinear_term(forward_transform(ScalarField(Grid(64), theta)))
        exact = -(u1 * g1 + u2 * g2)
        assert np.abs(inverse_transform(out).values - exact).max() <= 1e-12 * np.abs(exact).max()
        assert out.coeff(0, 0) == 0


class TestStep:
    def test_pure_dissipation_factor(self):
        x1, _ = coords(16)
        s = _state(ScalarField(Grid(16), np.sin(TWO_PI * x1)), gamma=1.0)
        new = step(s, 0.1, linear_only=True)
        ratio = new.theta_hat.coeff(1, 0) / s.theta_hat.coeff(1, 0)
        assert ratio.real == pytest.approx(math.exp(-0.2 * math.pi), rel=1e-14)
        assert round(ratio.real, 6) == 0.533488

    def test_zero_dt(self):
        s = _state(_smooth(32))
        assert step(s, 0.0) is s

    def test_negative_dt(self):
        with pytest.raises(ValueError):
            step(_state(_smooth(32)), -0.1)

    def test_richardson_order(self):
        s0 = _state(_smooth(64, amp=2.0))

        def diff(dt):
            one = step(s0, dt).theta_hat.coeffs
            two = step(step(s0, dt / 2), dt / 2).theta_hat.coeffs
            return np.abs(one - two).max()

        d = [diff(dt) for dt in (0.02, 0.01, 0.005)]
        orders = np.log2(np.array(d[:-1]) / np.array(d[1:]))
        # one-step error is O(dt^5); global order 4 means local order at least 3.8 + 1
        assert orders.min() >= 3.8

    def test_nonfinite_aborts(self):
        s = _state(ScalarField(Grid(16), 1e200 * _smooth(16).values))
        with np.errstate(all="ignore"):
            with pytest.raises(NumericalBlowup):
                step(s, 1.0)


class TestAdaptiveDt:
    def test_zero_field_gives_dt_max(self):
        s = _state(ScalarField.zeros(Grid(16)))
        assert adaptive_dt(s, SolverConfig(n=16, dt_max=0.02)) == 0.02

    def test_unit_speed(self):
        x1, _ = coords(256)
        s = _state(ScalarField(Grid(256), np.sin(TWO_PI * x1)))
        cfg = SolverConfig(n=256, cfl_number=0.5, dt_max=1.0)
        assert adaptive_dt(s, cfg) == pytest.approx(0.001953125, rel=1e-14)
        assert adaptive_dt(s, dataclasses.replace(cfg, dt_max=0.001)) == 0.001

    def test_doubled_resolution_halves_dt(self):
        def dt_at(n):
            x1, x2 = coords(n)
            v = np.sin(TWO_PI * x1) + 0.5 * np.cos(TWO_PI * 2 * x2)
            return adaptive_dt(_state(ScalarField(Grid(n), v)), SolverConfig(n=n, dt_max=1.0))

        assert dt_at(64) == pytest.approx(2 * dt_at(128), rel=1e-12)

    def test_checkpoint_cap(self):
        s = _state(ScalarField.zeros(Grid(16)))
        assert adaptive_dt(s, SolverConfig(n=16, dt_max=0.5), next_checkpoint=0.125) == 0.125


class TestRun:
    def test_zero_datum(self):
        res = run(ScalarField.zeros(Grid(16)), SolverConfig(n=16, t_end=0.1))
        assert res.reason == "completed"
        assert not res.state.theta_hat.coeffs.any()
        assert res.state.t == 0.1

    def test_single_mode_linear(self):
        x1, _ = coords(32)
        f = ScalarField(Grid(32), np.cos(TWO_PI * x1))
        res = run(f, SolverConfig(n=32, gamma=0.5, t_end=1.0, linear_only=True))
        exact = 0.5 * math.exp(-TWO_PI**0.5 * 1.0)
        assert abs(res.state.theta_hat.coeff(1, 0) - exact) <= 1e-10 * 0.5

    def test_mean_pinned_and_cadence(self):
        seen = []

        def sink(s):
            assert s.theta_hat.coeff(0, 0) == 0
            seen.append(s.t)

        run(_smooth(32), SolverConfig(n=32, t_end=0.3), sink, cadence_dt=0.1)
        assert seen == pytest.approx([0.0, 0.1, 0.2, 0.3], abs=1e-15)

    def test_cadence_steps(self):
        steps = []
        run(_smooth(32), SolverConfig(n=32, t_end=0.1, dt_max=0.01), lambda s: steps.append(
            s.step_count), cadence_steps=3)
        assert steps[:4] == [0, 3, 6, 9]

    def test_unresolved_datum(self):
        x1, _ = coords(16)
        f = ScalarField(Grid(16), np.cos(TWO_PI * 6 * x1))
        with pytest.raises(UnresolvedDatum):
            run(f, SolverConfig(n=16))

    def test_marginal_resolution_warns(self, caplog):
        x1, _ = coords(16)
        f = ScalarField(Grid(16), np.cos(TWO_PI * x1) + 1e-3 * np.cos(TWO_PI * 5 * x1))
        with caplog.at_level(logging.WARNING):
            run(f, SolverConfig(n=16, t_end=0.01))
        assert "above n/4" in caplog.text

    def test_flipped_dissipation_aborts(self):
        res = run(_smooth(32), SolverConfig(n=32, t_end=2.0, flip_dissipation_sign=True))
        assert res.reason == "blowup_threshold"
        assert res.blowup["history"] and "not evidence" in res.blowup["note"]

    @settings(max_examples=5)
    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.3, 1.0))
    def test_max_principle_and_energy(self, seed, gamma):
        f = _smooth(32, seed=seed)
        rows = []
        run(f, SolverConfig(n=32, gamma=gamma, t_end=0.2),
            lambda s: rows.append((np.abs(inverse_transform(s.theta_hat).values).max(),
                                   np.sum(np.abs(s.theta_hat.coeffs) ** 2), s.dissipated)),
            cadence_steps=1)
        linf, e, d = map(np.array, zip(*rows))
        assert np.max(linf - np.minimum.accumulate(linf)) <= 1e-6 * linf[0]
        assert np.max(np.abs(e + d - e[0])) <= 1e-6 * e[0]

    @pytest.mark.slow
    def test_resolution_refinement(self):
        from fracsqg.config import InitialDatumSpec
        from fracsqg.experiment import build_datum

        spec = InitialDatumSpec(kind="random_spectrum", k_max=8, slope=4.0, seed=11)
        finals = {}
        for n in (128, 256):
            res = run(build_datum(spec, n), SolverConfig(n=n, gamma=0.8, t_end=1.0))
            finals[n] = res.state.theta_hat.coeffs
        # compare the common modes; everything else is round-off
        a, b = finals[128], finals[256]
        k = np.fft.fftfreq(128, 1 / 128).astype(int)
        sub = b[np.ix_(k % 256, k % 256)]
        rel = math.sqrt(np.sum(np.abs(a - sub) ** 2) / np.sum(np.abs(a) ** 2))
        assert rel <= 1e-6
