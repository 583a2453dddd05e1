"""Experiment drivers: frequency sampling, parameter scans and summaries.

Each scenario reproduces one study from the decoherence phenomenology:
antiferromagnetic and ferromagnetic coupling scans, temperature sweeps,
odd/even bath-size contrast, the Sigma_x spectral diagnostic, the
interaction-average decay and the isolated-spin consistency check.

A scenario makes one frequency draw per seed and reuses it across every
(lambda, kT) point, so the coupling strength is the only variable inside
a scan.  All randomness is derived from the configured seed; rerunning a
configuration reproduces every number bit for bit.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .eigensolve import (
    DENSE_DIM_GUARD,
    dense_spectrum,
    lanczos_lowest,
    resolve_sigma_x_multiplets,
)
from .ensemble import (
    ObservableSeries,
    avg_sigma_x,
    build_thermal_ensemble,
    embed_initial_states,
    sigma_x_expectations,
    spectral_observable_series,
)
from .errors import ConfigError, TruncationError
from .hilbert import (
    BathHamiltonianAction,
    HamiltonianAction,
    SpinBathModel,
    apply_interaction,
)
from .propagate import PropagationSettings, _steps, output_grid

__all__ = [
    "FrequencySpec",
    "frequency_quantile",
    "sample_frequencies",
    "AnalyticReference",
    "analytic_polarization",
    "fit_beta_prime",
    "time_average",
    "late_window",
    "RunConfig",
    "make_config",
    "ScenarioResult",
    "run_scenario",
    "SCENARIOS",
]


@dataclass(frozen=True)
class FrequencySpec:
    """Distribution of the random bath frequencies."""

    kind: str = "debye"
    omega_c: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("debye", "box"):
            raise ValueError(f"unknown frequency distribution {self.kind!r}")


def frequency_quantile(spec, u):
    """Inverse CDF of the frequency density at probability u.

    Debye density p(w) = 3 w^2 / wc^3 on (0, wc) inverts to
    w = wc * u^(1/3); the box alternative is w = wc * u.
    """
    u = np.asarray(u, dtype=float)
    if spec.kind == "debye":
        return spec.omega_c * np.cbrt(u)
    return spec.omega_c * u


def sample_frequencies(spec, n):
    """Draw n bath frequencies by inverse CDF, deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one frequency")
    return frequency_quantile(spec, np.random.default_rng(spec.seed).random(n))


@dataclass(frozen=True)
class AnalyticReference:
    """Closed-form precession of an isolated spin with renormalized beta."""

    beta_tilde: float
    omega0: float

    @property
    def omega_rabi(self):
        return math.hypot(self.omega0, 2.0 * self.beta_tilde)


def analytic_polarization(ref, t):
    """Polarization of the renormalized free spin from Pz(0)=1.

    Px = 2 bt w0 (1 - cos Wt)/W^2, Py = -2 bt sin(Wt)/W,
    Pz = 1 - 4 bt^2 (1 - cos Wt)/W^2 with W = sqrt(w0^2 + 4 bt^2).
    Returns shape t.shape + (3,).
    """
    t = np.asarray(t, dtype=float)
    big_omega = ref.omega_rabi
    out = np.zeros(t.shape + (3,))
    if big_omega == 0.0:
        out[..., 2] = 1.0
        return out
    bt = ref.beta_tilde
    one_m_cos = 1.0 - np.cos(big_omega * t)
    out[..., 0] = 2.0 * bt * ref.omega0 * one_m_cos / big_omega**2
    out[..., 1] = -2.0 * bt * np.sin(big_omega * t) / big_omega
    out[..., 2] = 1.0 - 4.0 * bt**2 * one_m_cos / big_omega**2
    return out


def fit_beta_prime(series, window=(0.0, 20.0), mask_frac=0.05):
    """Estimate beta' from <HI>(t) / Px(t) over a fit window.

    Times where |Px| falls below mask_frac * max|Px| are masked out (the
    ratio blows up at the zero crossings).  Returns (median ratio,
    flatness = interquartile range / |median|).
    """
    inside = (series.times >= window[0]) & (series.times <= window[1])
    px = series.polarization[inside, 0]
    hi = series.interaction[inside]
    if len(px) == 0:
        raise ValueError("fit window holds no samples")
    px_max = np.abs(px).max()
    if px_max == 0.0:
        raise ValueError("Px vanishes identically on the fit window")
    keep = np.abs(px) >= mask_frac * px_max
    if keep.sum() < 4:
        raise ValueError("fit window holds too few unmasked samples")
    ratios = hi[keep] / px[keep]
    med = float(np.median(ratios))
    iqr = float(np.percentile(ratios, 75) - np.percentile(ratios, 25))
    if med == 0.0:
        flatness = 0.0 if iqr == 0.0 else math.inf
    else:
        flatness = iqr / abs(med)
    return med, flatness


def time_average(times, values, window):
    """Trapezoidal mean of a sampled series over [t1, t2]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t1, t2 = window
    inside = (times >= t1 - 1e-12) & (times <= t2 + 1e-12)
    if inside.sum() < 2:
        raise ValueError(f"window [{t1}, {t2}] holds fewer than two samples")
    tt = times[inside]
    return float(np.trapezoid(values[inside], tt) / (tt[-1] - tt[0]))


def late_window(tmax):
    """The asymptotic averaging window for a run of length tmax."""
    if tmax >= 2500.0:
        return (1500.0, 2500.0)
    return (0.6 * tmax, tmax)


# scenario name -> configuration defaults; `evolve` False skips propagation
SCENARIOS = {
    "antiferro-scan": dict(lambdas=(0.0, 1.0, 2.0, 5.0, 10.0), kts=(0.02,),
                           tmax=250.0, dt_out=0.5, evolve=True),
    "ferro-scan": dict(lambdas=(0.0, -1.0, -2.0, -5.0, -10.0), kts=(0.02,),
                       tmax=20.0, dt_out=0.05, evolve=True),
    "temp-scan": dict(lambdas=(10.0,), kts=(0.02, 0.2, 2.0, 300.0),
                      tmax=2500.0, dt_out=0.5, evolve=True),
    "odd-even": dict(lambdas=(0.0, 1.0, 10.0), kts=(0.02,),
                     tmax=250.0, dt_out=0.5, evolve=True),
    "sigma-x-spectrum": dict(lambdas=(0.0, 10.0), kts=(0.02,),
                             tmax=0.0, dt_out=0.5, evolve=False),
    "interaction-average": dict(lambdas=(0.0, 1.0, 2.0, 5.0, 10.0), kts=(0.02,),
                                tmax=2500.0, dt_out=0.5, evolve=True),
    "isolation-check": dict(lambdas=(0.0,), kts=(0.02,), tmax=20.0,
                            dt_out=0.05, evolve=True, lambda0=0.0),
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one scenario run."""

    scenario: str
    n: int
    lambdas: tuple
    kts: tuple
    m: int = 20
    seed: int = 0
    dist: str = "debye"
    omega_c: float = 1.0
    omega0: float = 0.8288
    beta: float = 0.01
    lambda0: float = 1.0
    tmax: float = 250.0
    dt_out: float = 0.5
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    propagator: str = "auto"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.n < 1:
            raise ConfigError("n must be a positive bath size")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        object.__setattr__(self, "kts", tuple(float(x) for x in self.kts))
        if not self.lambdas:
            raise ConfigError("lambda list must not be empty")
        if not self.kts or any(kt <= 0 for kt in self.kts):
            raise ConfigError("kt values must be positive")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.dist not in ("debye", "box"):
            raise ConfigError(f"unknown distribution {self.dist!r}")
        if self.tmax < 0 or self.dt_out <= 0:
            raise ConfigError("tmax must be >= 0 and dt_out > 0")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.propagator not in ("auto", "rk", "spectral"):
            raise ConfigError(f"unknown propagator {self.propagator!r}")

    @property
    def evolve(self):
        return SCENARIOS[self.scenario]["evolve"]


def make_config(scenario, n, **overrides):
    """RunConfig with per-scenario defaults filled for unset fields."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    defaults = {k: v for k, v in SCENARIOS[scenario].items() if k != "evolve"}
    defaults.update(overrides)
    valid = {f.name for f in fields(RunConfig)}
    unknown = set(defaults) - valid
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(scenario=scenario, n=n, **defaults)


@dataclass
class ScenarioResult:
    """Everything a scenario produces, ready for serialization."""

    config: RunConfig
    series: list
    spectra: list
    summary: list
    diagnostics: dict


def _lanczos_seed(config, job_index):
    return int(np.random.SeedSequence([config.seed, job_index]).generate_state(1)[0])


def _solve_bath(model, config, job_index):
    """Bath spectrum: dense up to the resource guard, Lanczos beyond."""
    action = BathHamiltonianAction(model)
    if model.bath_dim <= DENSE_DIM_GUARD:
        spectrum = dense_spectrum(action, model.bath_dim)
    else:
        spectrum = lanczos_lowest(action, model.bath_dim, config.m,
                                  seed=_lanczos_seed(config, job_index))
    return resolve_sigma_x_multiplets(spectrum)


def _build_ensemble(spectrum, kT, config, notes):
    """Thermal ensemble at the configured truncation, widened if unsafe.

    When the truncation diagnostic fails but the complete spectrum is at
    hand, the exact (untruncated) ensemble is used instead of failing;
    partial spectra have nothing to widen to, so there the error stands.
    """
    try:
        return build_thermal_ensemble(spectrum, kT, m=config.m)
    except TruncationError:
        if not spectrum.complete:
            raise
        notes.append(f"kT={kT}: truncation to m={config.m} unsafe, using full spectrum")
        return build_thermal_ensemble(spectrum, kT, m=None)


def _rk_series(model, ensemble, times, config, metadata):
    """Propagate each ensemble member and accumulate observables per time.

    Streams one trajectory at a time: only the running state and the
    (n_times, 2, 2) accumulators live in memory, never the full set of
    evolved states.  Members are reduced in a fixed order, so the result
    is independent of any scheduling.
    """
    settings = PropagationSettings(output_grid=times, rel_tol=config.rel_tol,
                                   abs_tol=config.abs_tol)
    action = HamiltonianAction(model)
    initial = embed_initial_states(ensemble)
    n_t = len(times)
    rho = np.zeros((n_t, 2, 2), dtype=np.complex128)
    hi = np.zeros(n_t)
    max_drift = 0.0
    max_edrift = 0.0
    for w, psi0 in zip(ensemble.weights, initial):
        e_ref = None
        for j, _t, psi in _steps(action, psi0, settings):
            view = psi.reshape(-1, 2)
            rho[j, 0, 0] += w * np.real(np.vdot(view[:, 0], view[:, 0]))
            rho[j, 1, 1] += w * np.real(np.vdot(view[:, 1], view[:, 1]))
            rho[j, 0, 1] += w * np.vdot(view[:, 1], view[:, 0])
            hi[j] += w * float(np.real(np.vdot(psi, apply_interaction(model, psi))))
            max_drift = max(max_drift, abs(float(np.linalg.norm(psi)) - 1.0))
            energy = float(np.real(np.vdot(psi, action(psi))))
            e_ref = energy if e_ref is None else e_ref
            max_edrift = max(max_edrift, abs(energy - e_ref))
    rho[:, 1, 0] = np.conj(rho[:, 0, 1])
    meta = dict(metadata)
    meta.update({"method": "rk8", "max_norm_drift": max_drift,
                 "max_energy_drift": max_edrift})
    return ObservableSeries(times, rho, hi, meta)


def _summary_row(config, lam, kT, bath_spectrum, series):
    row = {
        "lambda": lam,
        "kT": kT,
        "S0_late_avg": math.nan,
        "Pz_late_avg": math.nan,
        "HI_time_avg": math.nan,
        "avg_sigma_x": avg_sigma_x(bath_spectrum, min(20, bath_spectrum.count)),
        "beta_prime": math.nan,
        "flatness": math.nan,
    }
    if series is None:
        return row
    win = late_window(config.tmax)
    row["S0_late_avg"] = time_average(series.times, series.entropy, win)
    row["Pz_late_avg"] = time_average(series.times, series.polarization[:, 2], win)
    row["HI_time_avg"] = time_average(series.times, series.interaction,
                                      (0.0, config.tmax))
    try:
        bp, flat = fit_beta_prime(series, window=(0.0, min(20.0, config.tmax)))
        row["beta_prime"], row["flatness"] = bp, flat
    except ValueError:
        pass  # fit undefined (e.g. Px pinned at zero); keep NaN
    return row


def run_scenario(config):
    """Execute every (lambda, kT) job of a scenario configuration.

    One frequency draw per config seed is shared across all jobs.  The
    bath spectrum is solved densely up to the resource guard and with
    Lanczos beyond it; time evolution uses the exact spectral route when
    the full Hamiltonian fits the dense guard and the 8th-order
    Runge-Kutta integrator otherwise (`config.propagator` overrides).
    """
    freq_spec = FrequencySpec(config.dist, config.omega_c, config.seed)
    omegas = tuple(sample_frequencies(freq_spec, config.n))
    do_evolve = config.evolve
    times = output_grid(config.tmax, config.dt_out) if do_evolve else np.array([0.0])

    series_list = []
    spectra_list = []
    summary = []
    notes = []
    max_drift = 0.0
    max_edrift = 0.0
    max_residual = 0.0
    worst_bound = None
    worst_ratio = 0.0
    prop_methods = set()
    bath_methods = set()

    for i_lam, lam in enumerate(config.lambdas):
        model = SpinBathModel(
            n_bath=config.n, omega0=config.omega0, beta=config.beta,
            lambda0=config.lambda0, lam=lam, omegas=omegas,
            omega_c=config.omega_c,
        )
        bath_spectrum = _solve_bath(model, config, i_lam)
        bath_methods.add(bath_spectrum.method)
        max_residual = max(max_residual, float(bath_spectrum.residuals.max()))
        spectra_list.append({
            "lambda": lam,
            "energies": bath_spectrum.energies.copy(),
            "sigma_x": sigma_x_expectations(bath_spectrum),
        })

        full_spectrum = None
        for kT in config.kts:
            ensemble = _build_ensemble(bath_spectrum, kT, config, notes)
            if ensemble.truncation_bound is not None:
                worst_bound = max(worst_bound or 0.0, ensemble.truncation_bound)
            worst_ratio = max(worst_ratio, ensemble.ratio_r)

            series = None
            if do_evolve:
                method = config.propagator
                if method == "auto":
                    method = "spectral" if model.dim <= DENSE_DIM_GUARD else "rk"
                metadata = {
                    "lambda": lam, "kT": kT, "seed": config.seed,
                    "m": ensemble.count, "bath_method": bath_spectrum.method,
                    "truncation_bound": ensemble.truncation_bound,
                    "ratio_r": ensemble.ratio_r,
                }
                if method == "spectral":
                    if full_spectrum is None:
                        full_spectrum = dense_spectrum(
                            HamiltonianAction(model), model.dim
                        )
                    series = spectral_observable_series(
                        model, ensemble, times, full_spectrum, metadata
                    )
                else:
                    series = _rk_series(model, ensemble, times, config, metadata)
                prop_methods.add(series.metadata["method"])
                max_drift = max(max_drift, series.metadata["max_norm_drift"])
                max_edrift = max(max_edrift, series.metadata["max_energy_drift"])
                series_list.append(series)

            summary.append(_summary_row(config, lam, kT, bath_spectrum, series))

    diagnostics = {
        "solver_method": "bath=" + "/".join(sorted(bath_methods))
                         + ";prop=" + ("/".join(sorted(prop_methods)) or "none"),
        "truncation_bound": worst_bound,
        "ratio_r": worst_ratio,
        "max_norm_drift": max_drift,
        "max_energy_drift": max_edrift,
        "max_residual": max_residual,
        "notes": notes,
    }
    return ScenarioResult(config, series_list, spectra_list, summary, diagnostics)
