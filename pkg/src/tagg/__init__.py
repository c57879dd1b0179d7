"""Temporal action-graph games: model, induced networks and exact expected utility."""
from .factor import BudgetExceeded, Factor
from .filtering import FilterStats, csi_terms, interface_expectation, interface_filter
from .gameops import (
    METHODS,
    EuBreakdown,
    best_response_single_decision,
    expected_decision_payoff,
    expected_utility,
    iterated_best_response,
    regret,
)
from .generators import IceCreamSpec, TollboothSpec, embed_agg, make_icecream, make_tollbooth
from .inference import InferenceStats, variable_elimination
from .io import GameFormatError, GameValidationError, parse_game, parse_profile, serialize_game, serialize_profile
from .model import (
    BehaviorProfile,
    ChanceVariable,
    Decision,
    DecisionStrategy,
    TaggGame,
    UtilityFunction,
    ValidationReport,
    enumerate_observation_contexts,
    pure_profile,
    random_profile,
    uniform_profile,
    validate_game,
    validate_profile,
)
from .network import InducedNet, build_induced_net
from .transform import (
    apply_causal_decomposition,
    apply_markov_copies,
    compute_interface,
    effective_variables,
    transform,
)
