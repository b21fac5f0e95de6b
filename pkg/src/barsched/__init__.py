"""Exact simulation of non-clairvoyant scheduling with progress-bar feedback."""

from .bars import (
    RNG_ALGORITHM,
    accurate_bar,
    bar_from_prediction,
    binomial_bar,
    derive_rng,
    expected_commit_elapsed,
    poisson_bar,
    poisson_jump_points,
    single_signal_bar,
    stochastic_levels,
)
from .combining import (
    Candidate,
    DelayOracle,
    all_pairs,
    combine,
    default_pair_count,
    make_order_oracle,
    make_rr_oracle,
    make_signal_commit_oracle,
    oracle_total_cost,
    order_candidate,
    rr_candidate,
    signal_commit_candidate,
)
from .engine import SimState, next_event_horizon, run, run_fixed_step
from .experiments import (
    ArmSpec,
    ExperimentConfig,
    TrialRecord,
    aggregate,
    brittleness_instance,
    check_high_probability_etc,
    gen_gaussian_predictions,
    gen_pareto_instance,
    preset,
    random_case,
    run_figure,
    with_bars,
)
from .model import (
    Instance,
    Job,
    ScheduleOutcome,
    SimEvent,
    StepProgressBar,
    check_delay_decomposition,
    error_terms,
    event_log_dump,
    instance_from_json,
    instance_to_json,
    make_instance,
    opt_cost,
    total_cost,
)
from .policies import (
    CommitOnSignal,
    ExploreThenCommit,
    ExploreThenRank,
    FollowOrder,
    MultiMachineBoost,
    RoundRobin,
    ShortestElapsedFirst,
    ShortestFirst,
    TimeShare,
    WindowedCommit,
    policy_from_config,
)

__version__ = "0.1.0"
