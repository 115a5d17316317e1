import math

import numpy as np
import pytest

from rotolock.errors import ConfigError, PreconditionError
from rotolock.reference import (
    EmissionFit,
    SpotGeometry,
    TrapezoidFit,
    detect_period,
    emission_intensity,
    fit_trapezoid_cosine,
    reference_waveform,
    synth_demod_reference,
    transmitted_fraction,
    transmitted_fraction_mc,
)
from rotolock.signals import SampledSignal, TimeGrid


class TestEmission:
    def test_peak_intensity_on_axis(self):
        em = EmissionFit()
        assert emission_intensity(em, 0.0) == pytest.approx(4.113 + 4.227)
        assert emission_intensity(em, 0.0) == pytest.approx(8.340, abs=1e-12)

    def test_cosine_zero_leaves_offset(self):
        em = EmissionFit()
        beta = (math.pi / 2.0) / em.k
        assert beta == pytest.approx(0.3475, abs=1e-4)
        assert emission_intensity(em, beta) == pytest.approx(em.c, abs=1e-12)

    @pytest.mark.parametrize("beta", [0.05, 0.17, 0.31])
    def test_even_in_angle(self, beta):
        em = EmissionFit()
        assert emission_intensity(em, beta) == emission_intensity(em, -beta)

    def test_out_of_lobe_warns(self):
        em = EmissionFit()
        with pytest.warns(UserWarning, match="extrapolating"):
            emission_intensity(em, 1.2 * math.pi / em.k)

    def test_k_is_stored_per_radian(self):
        assert EmissionFit().k == pytest.approx(0.0789 * 180.0 / math.pi)


class TestGeometry:
    def test_default_theta_max(self):
        g = SpotGeometry()
        assert g.theta_max == pytest.approx(math.asin(0.5 / 6.0))
        assert math.degrees(g.theta_max) == pytest.approx(4.78, abs=0.01)

    def test_spot_must_sit_outside_center(self):
        with pytest.raises(PreconditionError):
            SpotGeometry(r0=7.0, R0=6.0)

    def test_large_spot_regime_rejected(self):
        # blade cannot fully cover a spot wider than its sector
        g = SpotGeometry(r0=2.0, R0=6.0, theta_gnd=math.radians(30.0))
        with pytest.raises(ConfigError, match="never block"):
            transmitted_fraction(g, 0.0)


class TestTransmittedFraction:
    def test_far_blade_passes_everything(self):
        g = SpotGeometry()
        assert transmitted_fraction(g, -math.pi / 2.0) == 1.0
        assert transmitted_fraction(g, -3.0) == 1.0

    def test_blocked_band_passes_nothing(self):
        g = SpotGeometry()
        assert transmitted_fraction(g, math.radians(10.0)) == 0.0
        assert transmitted_fraction(g, math.radians(20.0)) == 0.0

    def test_edge_through_center_splits_evenly(self):
        # emission weight is radially symmetric, so a diameter cut gives 1/2
        assert transmitted_fraction(SpotGeometry(), 0.0) == pytest.approx(0.5, abs=1e-9)

    def test_bounded_and_continuous_across_boundaries(self):
        g = SpotGeometry()
        eps = 1e-7
        boundaries = [-g.theta_max, 0.0, g.theta_max,
                      g.theta_gnd - g.theta_max, g.theta_gnd + g.theta_max]
        for b in boundaries:
            lo = transmitted_fraction(g, b - eps)
            hi = transmitted_fraction(g, b + eps)
            assert 0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0
            assert abs(hi - lo) < 1e-4  # continuous up to the sweep rate * eps

    def test_quadrature_agrees_with_monte_carlo(self):
        g = SpotGeometry()
        rng = np.random.default_rng(7)
        thetas = rng.uniform(-g.theta_max, g.theta_max, size=4)
        for i, th in enumerate(thetas):
            q = transmitted_fraction(g, th)
            mc, se = transmitted_fraction_mc(g, th, n_samples=200_000, seed=100 + i)
            assert abs(q - mc) < 3.0 * se

    def test_trailing_edge_transition_is_partial(self):
        g = SpotGeometry()
        th = g.theta_gnd  # trailing edge bisects the spot
        assert transmitted_fraction(g, th) == pytest.approx(0.5, abs=1e-9)


F_ROT = 2500.0
REF_SPP = 2000


@pytest.fixture(scope="module")
def one_period():
    grid = TimeGrid(dt=1.0 / (F_ROT * REF_SPP), n=REF_SPP, t0=0.0)
    return reference_waveform(SpotGeometry(), grid, F_ROT)


class TestReferenceWaveform:
    F_ROT = F_ROT
    SPP = REF_SPP

    def test_zero_plateau_duty(self, one_period):
        g = SpotGeometry()
        expected = (g.theta_gnd - 2.0 * g.theta_max) / (2.0 * math.pi)
        assert expected == pytest.approx(0.0568, abs=1e-4)
        duty = np.mean(one_period.values == 0.0)
        assert duty == pytest.approx(expected, abs=2.0 / self.SPP)

    def test_unit_plateau_is_exactly_one(self, one_period):
        g = SpotGeometry()
        theta = (2.0 * np.pi * self.F_ROT * one_period.times() + np.pi) % (2 * np.pi) - np.pi
        far = (theta < -g.theta_max - 1e-3) | (theta > g.theta_gnd + g.theta_max + 1e-3)
        assert np.all(one_period.values[far] == 1.0)

    def test_transitions_monotone(self, one_period):
        v = one_period.values
        interior = (v > 0.0) & (v < 1.0)
        # first run: falling edge; second run: rising edge
        runs = []
        start = None
        for i, flag in enumerate(interior):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                runs.append(slice(start - 1, i + 1))
                start = None
        assert len(runs) == 2
        assert np.all(np.diff(v[runs[0]]) <= 1e-12)
        assert np.all(np.diff(v[runs[1]]) >= -1e-12)

    def test_periodic_across_revolutions(self):
        g = SpotGeometry()
        grid = TimeGrid(dt=1.0 / (self.F_ROT * 40), n=80, t0=0.0)
        two = reference_waveform(g, grid, self.F_ROT)
        assert np.array_equal(two.values[:40], two.values[40:])


class TestFitTrapezoidCosine:
    F_ROT = 2500.0

    def test_round_trip_recovers_parameters(self):
        truth = TrapezoidFit(B=0.5, u=18.8, phi=2.2, c2=0.5)
        grid = TimeGrid(dt=1.0 / (self.F_ROT * 2000), n=400, t0=0.0)
        theta = 2.0 * np.pi * self.F_ROT * grid.times()
        signal = SampledSignal(grid, truth(theta))
        fit, resid = fit_trapezoid_cosine(signal, self.F_ROT)
        got, want = fit.canonical(), truth.canonical()
        assert got.B == pytest.approx(want.B, abs=1e-6)
        assert got.u == pytest.approx(want.u, abs=1e-6)
        assert got.phi == pytest.approx(want.phi, abs=1e-6)
        assert got.c2 == pytest.approx(want.c2, abs=1e-6)
        assert resid < 1e-9

    def test_default_transition_fits_within_two_percent(self):
        grid = TimeGrid(dt=1.0 / (self.F_ROT * 2000), n=2000, t0=0.0)
        wave = reference_waveform(SpotGeometry(), grid, self.F_ROT)
        _, resid = fit_trapezoid_cosine(wave, self.F_ROT)
        assert resid < 0.02  # plateau height is 1

    def test_measured_fit_width_is_same_order_as_sweep_angle(self):
        # a transition fit measured on the stock optical switch: its cosine
        # half-period should be on the scale of the geometric sweep 2*theta_max
        measured = TrapezoidFit(B=2.653, u=-4.8316, phi=4.4065, c2=4.1773)
        width = math.pi / abs(measured.u)
        sweep = 2.0 * SpotGeometry().theta_max
        assert 0.1 < width / sweep < 10.0

    def test_constant_signal_has_no_transition(self):
        grid = TimeGrid(dt=1e-5, n=100)
        with pytest.raises(PreconditionError, match="no transition"):
            fit_trapezoid_cosine(SampledSignal(grid, np.ones(100)), self.F_ROT)

    def test_canonical_form_is_equivalent(self):
        fit = TrapezoidFit(B=-1.5, u=-3.0, phi=0.7, c2=0.2)
        can = fit.canonical()
        assert can.B >= 0 and can.u >= 0 and 0 <= can.phi < 2 * math.pi
        theta = np.linspace(-2, 2, 101)
        assert np.allclose(fit(theta), can(theta), atol=1e-12)


class TestDetectPeriod:
    def test_square_wave_period_is_exact(self):
        period = 4e-4
        grid = TimeGrid(dt=2e-6, n=2000, t0=0.0)
        v = ((grid.times() % period) < period / 2.0).astype(float)
        assert detect_period(SampledSignal(grid, v), 0.5) == pytest.approx(period, abs=1e-15)

    def test_reference_waveform_period_matches_rotation(self):
        f_rot = 2500.0
        spp = 500
        grid = TimeGrid(dt=1.0 / (f_rot * spp), n=3 * spp, t0=0.0)
        wave = reference_waveform(SpotGeometry(), grid, f_rot)
        assert detect_period(wave, 0.5) == pytest.approx(1.0 / f_rot, abs=grid.dt)

    def test_constant_signal_fails(self):
        grid = TimeGrid(dt=1e-5, n=100)
        with pytest.raises(PreconditionError):
            detect_period(SampledSignal(grid, np.full(100, 2.0)), 0.5)

    def test_single_crossing_fails(self):
        grid = TimeGrid(dt=1e-5, n=100)
        v = np.concatenate([np.ones(50), np.zeros(50)])
        with pytest.raises(PreconditionError, match="2 downward"):
            detect_period(SampledSignal(grid, v), 0.5)


class TestSynthDemodReference:
    def test_sine_at_zero_phase(self):
        ref = synth_demod_reference(4e-4, "sine", l=3, phase=0.0)
        assert ref.dc == 0.0
        assert ref.f_fund == pytest.approx(2500.0)
        assert np.allclose(ref.cos_coeffs, [1.0, 0.0, 0.0])
        assert np.allclose(ref.sin_coeffs, [0.0, 0.0, 0.0])

    def test_square_at_zero_phase(self):
        # oracle: unit square-wave harmonic amplitudes 4/(pi*j), odd j only
        ref = synth_demod_reference(4e-4, "square", l=7, phase=0.0)
        expected = [4 / math.pi, 0, 4 / (3 * math.pi), 0, 4 / (5 * math.pi), 0, 4 / (7 * math.pi)]
        assert np.allclose(ref.cos_coeffs, expected, atol=1e-15)
        assert np.allclose(ref.sin_coeffs, 0.0)

    @pytest.mark.parametrize("kind", ["sine", "square"])
    @pytest.mark.parametrize("phase", [0.0, 0.4, math.pi / 6.0, math.pi])
    def test_dc_always_zero(self, kind, phase):
        assert synth_demod_reference(1e-3, kind, l=5, phase=phase).dc == 0.0

    def test_phase_delay_rotates_each_harmonic(self):
        phase = math.pi / 6.0
        ref = synth_demod_reference(4e-4, "square", l=3, phase=phase)
        a1, a3 = 4 / math.pi, 4 / (3 * math.pi)
        assert ref.cos_coeffs[0] == pytest.approx(a1 * math.cos(phase))
        assert ref.sin_coeffs[0] == pytest.approx(a1 * math.sin(phase))
        assert ref.cos_coeffs[2] == pytest.approx(a3 * math.cos(3 * phase))
        assert ref.sin_coeffs[2] == pytest.approx(a3 * math.sin(3 * phase))

    def test_unknown_kind_rejected(self):
        with pytest.raises(PreconditionError, match="kind"):
            synth_demod_reference(1e-3, "triangle", l=3, phase=0.0)
