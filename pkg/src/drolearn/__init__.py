"""Streaming distributionally robust learning under Wasserstein ambiguity.

The library plays an online game against an adversary that may perturb the
empirical distribution of the observed samples within a 1-Wasserstein ball:
each round the worst-case oracle computes the adversary's best response for
a piecewise concave loss, and the learner answers with a projected
subgradient step.  The oracle reduces the infinite-dimensional worst-case
expectation to a transport-budget allocation across samples, solved by dual
bisection over nested golden-section searches.
"""

from .budget import (
    BudgetAllocation,
    DiscreteDistribution,
    allocate_budget,
    assemble_worst_case,
    empirical_distribution,
    expected_loss,
    solve_subproblem,
    wasserstein_oracle,
)
from .inner_max import InnerSolution, perspective_max
from .learner import LearnerState, RunTrace, StreamExhausted, initial_state, run, step, step_size
from .model import (
    AbsDevPart,
    AffinePart,
    AmbiguitySpec,
    DecisionSpace,
    FrozenLoss,
    FrozenPiece,
    LossModel,
    RadialPart,
    SampleBuffer,
    SeparablePiece,
    make_separable_loss,
)
from .reference import (
    GridSpec,
    ScaleError,
    brute_force_master,
    brute_force_pair,
    discrete_w1,
    finite_diff_check,
    gap_estimate,
    robust_risk,
)
from .utility import PairSolution, ToleranceConfig, pair_utility, sample_utility

__all__ = [
    "AbsDevPart",
    "AffinePart",
    "AmbiguitySpec",
    "BudgetAllocation",
    "DecisionSpace",
    "DiscreteDistribution",
    "FrozenLoss",
    "FrozenPiece",
    "GridSpec",
    "InnerSolution",
    "LearnerState",
    "LossModel",
    "PairSolution",
    "RadialPart",
    "RunTrace",
    "SampleBuffer",
    "ScaleError",
    "SeparablePiece",
    "StreamExhausted",
    "ToleranceConfig",
    "allocate_budget",
    "assemble_worst_case",
    "brute_force_master",
    "brute_force_pair",
    "discrete_w1",
    "empirical_distribution",
    "expected_loss",
    "finite_diff_check",
    "gap_estimate",
    "initial_state",
    "make_separable_loss",
    "pair_utility",
    "perspective_max",
    "robust_risk",
    "run",
    "sample_utility",
    "solve_subproblem",
    "step",
    "step_size",
    "wasserstein_oracle",
]

__version__ = "0.1.0"
