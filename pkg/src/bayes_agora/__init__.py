"""Exact simulation and analysis of repeated Bayesian learning on networks."""

from .engine import (
    ACTION_SETS,
    OWN_INITIAL,
    PREFER_ONE,
    PREFER_ZERO,
    DynamicsRun,
    ProfileSpace,
    TieBreak,
    parse_tiebreak,
    run_exact,
    seeded_coin,
)
from .graphs import (
    SocialGraph,
    ball,
    chain,
    complete,
    cycle,
    gnp_connected,
    graph_from_edges,
    is_l_locally_strongly_connected,
    local_distance,
    read_graph_file,
    rooted_isomorphic,
    royal_family,
    star,
    write_graph_file,
)
from .local import BallSimulator, RealizedProfile, run_local, sample_world
from .signals import (
    SignalModel,
    SignalPosterior,
    belief_of_signal,
    first_round_accuracy,
    make_binary_model,
    make_model,
    make_quantile_model,
    model_from_config,
    model_to_config,
    tv_distance,
)
from .stats import (
    FiniteJointDistribution,
    delta_independence_gap,
    degree_accuracy_curve,
    epsilon_p,
    eta_p,
    far_ball_independence,
    majority_accuracy,
    map_three_bits,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
