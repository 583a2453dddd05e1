"""Scenario driver tests: sampling, fits, analytics, full-pipeline runs."""

import numpy as np
import pytest
from scipy import stats

from spinbath import (
    AnalyticReference,
    ConfigError,
    FrequencySpec,
    RunConfig,
    analytic_polarization,
    fit_beta_prime,
    late_window,
    make_config,
    run_scenario,
    sample_frequencies,
    time_average,
)
from spinbath.ensemble import ObservableSeries
from spinbath.scenarios import frequency_quantile


class TestFrequencySampling:
    def test_quantile_endpoint(self):
        spec = FrequencySpec("debye", omega_c=1.0, seed=0)
        assert frequency_quantile(spec, 1.0) == pytest.approx(1.0)
        assert frequency_quantile(FrequencySpec("box"), 1.0) == pytest.approx(1.0)

    def test_debye_median_of_octant(self):
        spec = FrequencySpec("debye", omega_c=1.0, seed=0)
        assert frequency_quantile(spec, 0.125) == pytest.approx(0.5, abs=1e-15)

    def test_debye_mean(self):
        spec = FrequencySpec("debye", omega_c=1.0, seed=99)
        w = sample_frequencies(spec, 1_000_000)
        assert w.mean() == pytest.approx(0.75, abs=1e-3)

    @pytest.mark.parametrize("kind,cdf", [
        ("debye", lambda w: w**3),
        ("box", lambda w: w),
    ])
    def test_empirical_cdf_matches_target(self, kind, cdf):
        spec = FrequencySpec(kind, omega_c=1.0, seed=4)
        w = sample_frequencies(spec, 100_000)
        assert np.all((w > 0) & (w <= 1.0))
        ks = stats.kstest(w, cdf).statistic
        assert ks < 0.01

    def test_deterministic_per_seed(self):
        spec = FrequencySpec("debye", omega_c=1.0, seed=7)
        assert np.array_equal(sample_frequencies(spec, 10),
                              sample_frequencies(spec, 10))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FrequencySpec("gaussian")


class TestAnalyticPolarization:
    def test_initial_condition(self):
        ref = AnalyticReference(beta_tilde=-9.99, omega0=0.8288)
        assert analytic_polarization(ref, 0.0) == pytest.approx([0, 0, 1], abs=1e-15)

    def test_zero_beta_tilde_is_static(self):
        ref = AnalyticReference(beta_tilde=0.0, omega0=0.8288)
        p = analytic_polarization(ref, np.linspace(0, 50, 100))
        assert np.abs(p - [0.0, 0.0, 1.0]).max() < 1e-15

    def test_unit_modulus(self):
        ref = AnalyticReference(beta_tilde=-9.99, omega0=0.8288)
        p = analytic_polarization(ref, np.linspace(0, 20, 400))
        mod = np.linalg.norm(p, axis=-1)
        assert np.abs(mod - 1.0).max() < 1e-12

    def test_rabi_frequency_bounds(self):
        ref = AnalyticReference(beta_tilde=-9.99, omega0=0.8288)
        assert ref.omega_rabi >= abs(ref.omega0)
        assert ref.omega_rabi >= 2 * abs(ref.beta_tilde)
        assert ref.omega_rabi == pytest.approx(20.0, abs=0.03)


class TestBetaPrimeFit:
    def _series(self, px, hi):
        n = len(px)
        rho = np.zeros((n, 2, 2), dtype=complex)
        rho[:, 0, 0] = 0.5 - 1e-9
        rho[:, 1, 1] = 0.5 + 1e-9
        rho[:, 0, 1] = np.asarray(px) / 2.0
        rho[:, 1, 0] = np.asarray(px) / 2.0
        return ObservableSeries(np.linspace(0, 20, n), rho, np.asarray(hi))

    def test_proportional_series_recovers_constant(self):
        t = np.linspace(0, 20, 200)
        px = 0.08 * (1 - np.cos(20 * t))
        series = self._series(px, -10.0 * px)
        bp, flat = fit_beta_prime(series)
        assert bp == pytest.approx(-10.0, rel=1e-9)
        assert flat == pytest.approx(0.0, abs=1e-9)

    def test_masking_excludes_zero_crossings(self):
        t = np.linspace(0, 20, 500)
        px = np.sin(3 * t)
        hi = 2.5 * px + 1e-13 * np.cos(17 * t)  # noise blows up near zeros
        bp, flat = fit_beta_prime(self._series(px, hi))
        assert bp == pytest.approx(2.5, rel=1e-6)
        assert flat < 1e-6

    def test_insufficient_points(self):
        px = np.zeros(50)
        px[:3] = 1.0
        with pytest.raises(ValueError):
            fit_beta_prime(self._series(px, px))

    def test_vanishing_px_rejected(self):
        with pytest.raises(ValueError):
            fit_beta_prime(self._series(np.zeros(50), np.zeros(50)))


class TestTimeAverage:
    def test_constant(self):
        t = np.linspace(0, 10, 50)
        assert time_average(t, np.full(50, 3.3), (0, 10)) == pytest.approx(3.3)

    def test_zero_mean_oscillation(self):
        t = np.linspace(0, 10, 2001)  # integer number of sin periods
        v = np.sin(2 * np.pi * t)
        assert abs(time_average(t, v, (0, 10))) < 1e-3

    def test_window_restriction(self):
        t = np.linspace(0, 10, 101)
        v = np.where(t < 5, 0.0, 2.0)
        assert time_average(t, v, (6, 10)) == pytest.approx(2.0)

    def test_empty_window(self):
        t = np.linspace(0, 10, 11)
        with pytest.raises(ValueError):
            time_average(t, t, (20, 30))

    def test_late_window_conventions(self):
        assert late_window(250.0) == (150.0, 250.0)
        assert late_window(2500.0) == (1500.0, 2500.0)
        assert late_window(20.0) == (12.0, 20.0)


class TestConfig:
    def test_scenario_defaults(self):
        cfg = make_config("antiferro-scan", n=10)
        assert cfg.lambdas == (0.0, 1.0, 2.0, 5.0, 10.0)
        assert cfg.kts == (0.02,)
        assert cfg.tmax == 250.0
        assert cfg.m == 20
        assert cfg.omega0 == 0.8288
        assert cfg.beta == 0.01
        assert cfg.lambda0 == 1.0

    def test_isolation_check_decouples(self):
        cfg = make_config("isolation-check", n=4)
        assert cfg.lambda0 == 0.0

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            make_config("banana-scan", n=4)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            make_config("antiferro-scan", n=4, wavelength=3)

    def test_nonpositive_temperature(self):
        with pytest.raises(ConfigError):
            make_config("antiferro-scan", n=4, kts=(-1.0,))

    def test_bad_n(self):
        with pytest.raises(ConfigError):
            make_config("antiferro-scan", n=0)


class TestRunScenario:
    def test_decoupled_spin_stays_pure(self):
        cfg = make_config("isolation-check", n=4, seed=3)
        result = run_scenario(cfg)
        series = result.series[0]
        assert series.entropy.max() < 1e-10
        assert series.interaction.max() == pytest.approx(0.0, abs=1e-14)

    def test_isolation_matches_analytic(self):
        cfg = make_config("isolation-check", n=4, seed=3)
        series = run_scenario(cfg).series[0]
        ref = AnalyticReference(beta_tilde=cfg.beta, omega0=cfg.omega0)
        exact = analytic_polarization(ref, series.times)
        assert np.abs(series.polarization - exact).max() < 1e-6

    def test_bitwise_deterministic(self):
        cfg = make_config("antiferro-scan", n=4, seed=11,
                          lambdas=(0.0, 2.0), tmax=20.0, dt_out=0.5)
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        for sa, sb in zip(a.series, b.series):
            assert np.array_equal(sa.rho, sb.rho)
            assert np.array_equal(sa.interaction, sb.interaction)
        for pa, pb in zip(a.spectra, b.spectra):
            assert np.array_equal(pa["energies"], pb["energies"])
            assert np.array_equal(pa["sigma_x"], pb["sigma_x"])
        assert a.summary == b.summary

    def test_rk_and_spectral_routes_agree(self):
        base = dict(n=4, seed=5, lambdas=(1.5,), tmax=10.0, dt_out=0.5)
        spec_run = run_scenario(make_config("antiferro-scan", propagator="spectral", **base))
        rk_run = run_scenario(make_config("antiferro-scan", propagator="rk", **base))
        s, r = spec_run.series[0], rk_run.series[0]
        assert np.abs(s.rho - r.rho).max() < 1e-8
        assert np.abs(s.interaction - r.interaction).max() < 1e-8

    def test_sigma_x_spectrum_skips_evolution(self):
        cfg = make_config("sigma-x-spectrum", n=4, seed=2)
        result = run_scenario(cfg)
        assert result.series == []
        assert len(result.spectra) == 2
        assert len(result.summary) == 2
        assert all(np.isnan(row["S0_late_avg"]) for row in result.summary)
        assert all(np.isfinite(row["avg_sigma_x"]) for row in result.summary)

    def test_distribution_swap_keeps_ordering(self):
        # decoherence suppression by strong coupling is distribution-agnostic
        late = {}
        for dist in ("debye", "box"):
            cfg = make_config("antiferro-scan", n=6, seed=8, dist=dist,
                              lambdas=(0.0, 10.0), tmax=100.0, dt_out=0.5)
            rows = run_scenario(cfg).summary
            late[dist] = [row["S0_late_avg"] for row in rows]
        for dist in ("debye", "box"):
            assert late[dist][0] > late[dist][1]

    def test_diagnostics_recorded(self):
        cfg = make_config("antiferro-scan", n=4, seed=1,
                          lambdas=(1.0,), tmax=10.0, dt_out=1.0)
        diag = run_scenario(cfg).diagnostics
        assert diag["solver_method"] == "bath=dense+sx;prop=spectral"
        assert diag["max_norm_drift"] == 0.0
        assert diag["truncation_bound"] is not None
        assert 0.0 <= diag["ratio_r"] <= 1.0
        assert diag["max_residual"] < 1e-9
