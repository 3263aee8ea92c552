"""Grammar-guided evolution of non-pharmaceutical interventions for agent-based epidemic models."""
from .bans import (
    AllAlternativesBanned,
    BanTemplate,
    InterventionEdge,
    ResolvedBanSet,
    check_tree,
    default_bans,
    filter_alternatives,
    load_bans,
    resolve_bans,
    segment_edges,
)
from .generate import GenConfig, GenerationExhausted, generate_tree, sample_population
from .gggp import (
    GgpParams,
    GoalFunction,
    Individual,
    Scenario,
    crossover,
    evaluate,
    mutate,
    run_evolution,
    tournament_select,
)
from .grammar import (
    AmbiguityError,
    ExtendedGrammar,
    Node,
    NPISyntaxError,
    builtin_core_grammar,
    default_grammar,
    extend_grammar,
    load_extension,
    parse_intervention,
    render_phenotype,
    validate_grammar,
)
from .interventions import compile_npi, compile_tree, default_binding
from .sim import DiseaseParams, Metrics, PopulationParams, SimWorld, run_episode, synthesize_population

__version__ = "0.1.0"
