"""Matrix-free exact dynamics of a central spin in a self-interacting spin bath."""

__version__ = "0.1.0"

from .eigensolve import (
    BathSpectrum,
    EigenPair,
    dense_spectrum,
    lanczos_lowest,
    resolve_sigma_x_multiplets,
)
from .ensemble import (
    ObservableSeries,
    ReducedDensity,
    ThermalEnsemble,
    avg_sigma_x,
    build_thermal_ensemble,
    embed_initial_states,
    entropy_from_polarization,
    interaction_average,
    reduced_density,
    sigma_x_expectations,
    spectral_observable_series,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    IntegrationQualityError,
    OperatorContractError,
    ResourceLimitError,
    SpinBathError,
    StiffnessError,
    TruncationError,
)
from .hilbert import (
    BathHamiltonianAction,
    HamiltonianAction,
    SpinBathModel,
    apply_bath_hamiltonian,
    apply_hamiltonian,
    apply_interaction,
    apply_sigma_x,
    apply_sigma_z,
    apply_total_sigma_x,
    parity,
)
from .propagate import (
    PropagationSettings,
    TrajectorySet,
    evolve,
    evolve_ensemble,
    output_grid,
)
from .scenarios import (
    AnalyticReference,
    FrequencySpec,
    RunConfig,
    ScenarioResult,
    analytic_polarization,
    fit_beta_prime,
    late_window,
    make_config,
    run_scenario,
    sample_frequencies,
    time_average,
)
