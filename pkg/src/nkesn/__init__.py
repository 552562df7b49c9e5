"""Echo state network controllers trained by probe-neuron selection on NK landscapes."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .dynamics import (
    STANDARD_START,
    CartPoleState,
    IntegrationError,
    PhysicsParams,
    SuccessDomain,
    derivatives,
    in_success_domain,
    mechanical_energy,
    rk4_step,
)
from .landscape import (
    NkLandscape,
    Solution,
    SolverKind,
    evaluate,
    pattern,
    random_landscape,
    solve,
    solve_adjacent_dp,
    solve_exhaustive,
    solve_local_search,
)
from .network import (
    EchoNetwork,
    MaskTable,
    Neighborhood,
    NetworkConfig,
    build_network,
    scale_spectral_radius,
    spectral_radius,
)
from .trainer import (
    DegenerateEnsembleError,
    EnsembleWeights,
    EpisodeCounter,
    EpisodeSettings,
    ExperimentResult,
    FitnessComponents,
    GeneralizationReport,
    build_landscape,
    ensemble_output,
    ensemble_weights,
    generalization_start_states,
    generalization_test,
    run_episode,
    run_experiment,
    top_m_ensemble,
    trajectory,
)

__version__ = "0.1.0"
