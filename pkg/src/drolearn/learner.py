"""Online distributional best-response learning.

Each round appends the newly revealed sample to the buffer, asks the
worst-case oracle for an adversarial distribution over the updated ball,
takes one projected subgradient step against that distribution's expected
loss, and maintains the running average of the decisions played.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .budget import allocate_budget, assemble_worst_case, expected_loss
from .model import AmbiguitySpec, Array, DecisionSpace, LossModel, SampleBuffer, as_vector
from .utility import ToleranceConfig


@dataclass(frozen=True)
class LearnerState:
    """Decision state after ``t`` samples.

    ``x`` is the decision for the next round (the (t+1)-th iterate) and
    ``x_bar`` the exact mean of all t+1 iterates generated so far, maintained
    incrementally.
    """

    x: Array
    x_bar: Array
    t: int
    buffer: SampleBuffer


@dataclass(frozen=True)
class StepRecord:
    t: int
    f_current: float
    oracle_value: float
    budget_total: float
    lam: float
    eta: float
    distribution: object  # the round's worst-case DiscreteDistribution


@dataclass(frozen=True)
class TraceRow:
    t: int
    f_current: float
    f_comparator: float
    oracle_value: float
    budget_total: float
    lam: float
    eta: float
    wall_time: float
    x_bar: Array  # running average of the decisions played up to round t


@dataclass
class RunTrace:
    rows: list
    x_bar: Array
    avg_regret: float

    def prefix_avg_regret(self, upto: int) -> float:
        rows = [r for r in self.rows if r.t <= upto]
        return float(np.mean([r.f_current - r.f_comparator for r in rows]))

    def x_bar_at(self, t: int) -> Array:
        for r in self.rows:
            if r.t == t:
                return r.x_bar
        raise KeyError(f"no trace row for round {t}")


class StreamExhausted(RuntimeError):
    """Raised when the sample stream ends before the requested horizon."""

    def __init__(self, round_reached: int, trace: "RunTrace"):
        super().__init__(f"stream exhausted at round {round_reached}")
        self.round_reached = round_reached
        self.trace = trace


def step_size(t: int, diameter: float, lip_x: float) -> float:
    """Projected-subgradient step for round t: diameter / (lip_x * sqrt(t))."""
    if t < 1:
        raise ValueError("round index starts at 1")
    if diameter <= 0 or lip_x <= 0:
        raise ValueError("diameter and lip_x must be positive")
    return diameter / (lip_x * math.sqrt(t))


def initial_state(space: DecisionSpace, sample_dim: int, x0=None) -> LearnerState:
    x = space.project(as_vector(x0, dim=space.dim, name="x0")) if x0 is not None else space.midpoint()
    return LearnerState(x=x, x_bar=x.copy(), t=0, buffer=SampleBuffer.empty(sample_dim))


def step(
    state: LearnerState,
    xi_new,
    loss: LossModel,
    space: DecisionSpace,
    amb: AmbiguitySpec,
    tol: ToleranceConfig,
    use_kernel: bool | None = None,
) -> tuple[LearnerState, StepRecord]:
    """One best-response round against the ball around the updated buffer.

    Appends the sample, queries the oracle at the current decision, steps
    x <- project(x - eta * grad) where grad averages the argmax-piece
    subgradients over the adversary's atoms, and updates the iterate average.
    """
    buffer = state.buffer.appended(xi_new)
    t = buffer.t
    x_t = state.x
    frozen = loss.at(x_t)
    try:
        allocation = allocate_budget(frozen, buffer, amb, tol, use_kernel=use_kernel)
        dist = assemble_worst_case(buffer, allocation, eps_alpha=tol.eps_alpha)
    except Exception as exc:
        raise RuntimeError(f"worst-case oracle failed at round {t}") from exc

    f_current = expected_loss(dist, loss, x_t)
    grad = np.zeros_like(x_t)
    for atom, w in zip(dist.atoms, dist.weights):
        grad += w * loss.subgrad_x(x_t, atom)
    eta = step_size(t, space.diameter, loss.lip_x)
    x_next = space.project(x_t - eta * grad)
    n = state.t + 1  # iterates averaged so far
    x_bar = (n * state.x_bar + x_next) / (n + 1)

    new_state = LearnerState(x=x_next, x_bar=x_bar, t=t, buffer=buffer)
    record = StepRecord(
        t=t,
        f_current=f_current,
        oracle_value=allocation.objective,
        budget_total=allocation.total,
        lam=allocation.lam,
        eta=eta,
        distribution=dist,
    )
    return new_state, record


def run(
    loss: LossModel,
    space: DecisionSpace,
    amb: AmbiguitySpec,
    tol: ToleranceConfig,
    stream,
    horizon: int,
    comparator,
    x0=None,
    use_kernel: bool | None = None,
) -> RunTrace:
    """Run the best-response loop for ``horizon`` rounds.

    ``stream`` is any iterable of sample vectors; ``comparator`` is the fixed
    decision against which per-round regret is recorded.  Returns the trace
    (one row per round, including the running average of the decisions
    played), the final average, and the mean regret.  A stream that ends
    early raises StreamExhausted carrying the partial trace.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    comparator = as_vector(comparator, dim=space.dim, name="comparator")
    it = iter(stream)

    state = None
    rows: list[TraceRow] = []
    played_sum = np.zeros(space.dim)
    t0 = time.perf_counter()
    for round_idx in range(1, horizon + 1):
        xi = next(it, None)
        if xi is None:
            raise StreamExhausted(round_idx - 1, _finish_trace(rows, played_sum, round_idx - 1))
        xi = as_vector(xi, name="xi")
        if state is None:
            state = initial_state(space, sample_dim=xi.shape[0], x0=x0)
        x_played = state.x
        state, rec = step(state, xi, loss, space, amb, tol, use_kernel=use_kernel)
        played_sum += x_played
        rows.append(
            TraceRow(
                t=round_idx,
                f_current=rec.f_current,
                f_comparator=expected_loss(rec.distribution, loss, comparator),
                oracle_value=rec.oracle_value,
                budget_total=rec.budget_total,
                lam=rec.lam,
                eta=rec.eta,
                wall_time=time.perf_counter() - t0,
                x_bar=played_sum / round_idx,
            )
        )
    return _finish_trace(rows, played_sum, horizon)


def _finish_trace(rows, played_sum, rounds) -> RunTrace:
    x_bar = played_sum / max(rounds, 1)
    regret = float(np.mean([r.f_current - r.f_comparator for r in rows])) if rows else math.nan
    return RunTrace(rows=rows, x_bar=x_bar, avg_regret=regret)
