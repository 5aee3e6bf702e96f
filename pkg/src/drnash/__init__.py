"""Equilibrium seeking for quadratic-bilinear games under per-agent
Wasserstein ambiguity: dual reformulation to a finite variational
inequality, golden-ratio-type solvers, and seeded experiment tooling."""

from .experiments import (
    DistributionConfig,
    ScenarioConfig,
    gen_illustrative,
    gen_portfolio,
    run_sweep,
    zeta_sweep,
)
from .model import (
    AgentSpec,
    GameSpec,
    GameValidationError,
    ValidatedGame,
    agent,
    deterministic_cost,
    game,
    load_game,
    save_game,
    validate_game,
)
from .projections import LocalSet, box, nonnegative, project_local, project_z, simplex
from .randomness import SeededStream
from .reformulation import (
    InfiniteSupremumError,
    RotatedAgentData,
    VIProblem,
    agent_objective,
    build_vi_problem,
    inner_sup,
    mapping,
    natural_residual,
    rotate_agent,
)
from .solvers import (
    RunReport,
    SolverParams,
    agraal_solve,
    default_start,
    default_switch_predicate,
    hybrid_solve,
    never_switch,
)
from .spectral import SpectralDecomposition, eigendecompose

__all__ = [
    "AgentSpec",
    "DistributionConfig",
    "GameSpec",
    "GameValidationError",
    "InfiniteSupremumError",
    "LocalSet",
    "RotatedAgentData",
    "RunReport",
    "ScenarioConfig",
    "SeededStream",
    "SolverParams",
    "SpectralDecomposition",
    "VIProblem",
    "ValidatedGame",
    "agent",
    "agent_objective",
    "agraal_solve",
    "box",
    "build_vi_problem",
    "default_start",
    "default_switch_predicate",
    "deterministic_cost",
    "eigendecompose",
    "game",
    "gen_illustrative",
    "gen_portfolio",
    "hybrid_solve",
    "inner_sup",
    "load_game",
    "mapping",
    "natural_residual",
    "never_switch",
    "nonnegative",
    "project_local",
    "project_z",
    "rotate_agent",
    "run_sweep",
    "save_game",
    "simplex",
    "validate_game",
    "zeta_sweep",
]
