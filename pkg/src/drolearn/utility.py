"""Per-sample transport-budget utility functions.

For a sample point xi_hat and a budget b >= 0, the utility is the largest
expected-loss contribution achievable by splitting the sample's probability
mass over at most two loss pieces while spending transport at most b:

    utility(b)    = max over piece pairs (k1 < k2) of pair_utility(k1, k2, b)
    pair_utility  = max { a1 * l_k1(xi_hat - q1/a1) + a2 * l_k2(xi_hat - q2/a2) :
                          ||q1|| <= c1, ||q2|| <= c2, c1 + c2 = b,
                          a1 + a2 = 1, a1, a2 >= 0 }

The pair problem is solved by a nested golden-section search: the outer
search runs over the weight a1 (restricted to the interior; the two
endpoints are handled exactly as single-piece ball maximizations), the inner
search over the budget split c1, and each probe costs two perspective
maximizations.  The value returned is within 4 * delta_eval of the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inner_max import perspective_max
from .model import Array, FrozenLoss, as_vector

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ToleranceConfig:
    """Accuracy knobs of the oracle stack and their coupling rules.

    delta is the oracle tolerance; delta_eval = delta / 2 drives every
    subordinate search.  eta_in and eta_b are golden-section interval floors
    tied to delta_eval / lip_xi; eta_out and eta_lambda act as caps, the
    effective per-call floors also involve instance-dependent surrogates
    (see pair_utility and allocate_budget).
    """

    delta: float
    delta_eval: float
    eta_in: float
    eta_out: float
    eta_b: float
    eta_lambda: float
    eps_alpha: float = 1e-8
    phi: float = GOLDEN

    def __post_init__(self):
        for name in ("delta", "delta_eval", "eta_in", "eta_out", "eta_b", "eta_lambda", "eps_alpha"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if abs(self.delta_eval - 0.5 * self.delta) > 1e-12 * max(1.0, self.delta):
            raise ValueError("delta_eval must equal delta / 2")
        if abs(self.phi - GOLDEN) > 1e-12:
            raise ValueError("phi must be the golden-section ratio (sqrt(5)-1)/2")

    @classmethod
    def from_delta(cls, delta: float, lip_xi: float, eta_out: float = 1e-4) -> "ToleranceConfig":
        """Standard coupling: eta_in = eta_b = delta_eval / lip_xi."""
        if delta <= 0:
            raise ValueError("delta must be positive")
        if lip_xi <= 0:
            raise ValueError("lip_xi must be positive")
        d_eval = 0.5 * delta
        floor = d_eval / lip_xi
        return cls(
            delta=delta,
            delta_eval=d_eval,
            eta_in=floor,
            eta_out=eta_out,
            eta_b=floor,
            eta_lambda=floor,
        )

    def check_loss(self, lip_xi: float) -> None:
        """Verify the floors against a given Lipschitz bound."""
        slack = 1e-12
        if self.eta_in > self.delta_eval / lip_xi + slack:
            raise ValueError("eta_in exceeds delta_eval / lip_xi")
        if self.eta_b > self.delta_eval / lip_xi + slack:
            raise ValueError("eta_b exceeds delta_eval / lip_xi")


@dataclass(frozen=True)
class PairSolution:
    """Feasible point of the two-piece problem: weights, budget split, movers.

    alpha sums to 1, beta sums to the budget, and ||q_j|| <= beta_j.  For the
    single-piece path (one loss piece in total) k1 == k2 and the second
    component carries zero weight.
    """

    k1: int
    k2: int
    alpha: Array  # (2,)
    beta: Array  # (2,)
    q1: Array
    q2: Array
    value: float


def golden_section_max(f, lo: float, hi: float, floor: float):
    """Golden-section maximization of a unimodal f over [lo, hi].

    f returns (value, payload); one new probe per iteration.  Ties advance
    the left edge (a strictly larger left probe is needed to shrink from the
    right), the orientation used by both nested weight/split searches.

    Returns (value, point, payload) of the better of the two live probes.
    """
    if hi < lo:
        raise ValueError("empty interval")
    if hi - lo <= floor:
        mid = 0.5 * (lo + hi)
        val, payload = f(mid)
        return val, mid, payload
    z1 = hi - GOLDEN * (hi - lo)
    z2 = lo + GOLDEN * (hi - lo)
    f1, p1 = f(z1)
    f2, p2 = f(z2)
    while hi - lo > floor:
        if f1 > f2:
            hi = z2
            z2, f2, p2 = z1, f1, p1
            z1 = hi - GOLDEN * (hi - lo)
            f1, p1 = f(z1)
        else:
            lo = z1
            z1, f1, p1 = z2, f2, p2
            z2 = lo + GOLDEN * (hi - lo)
            f2, p2 = f(z2)
    if f1 >= f2:
        return f1, z1, p1
    return f2, z2, p2


def _endpoint_solution(loss: FrozenLoss, xi_hat, k_active, k_other, budget, tol, active_first):
    """Single-piece candidate: all weight and budget on one piece."""
    sol = perspective_max(loss.pieces[k_active], xi_hat, 1.0, budget, tol.delta_eval)
    zero = np.zeros_like(sol.q_star)
    if active_first:
        return PairSolution(
            k1=k_active, k2=k_other,
            alpha=np.array([1.0, 0.0]), beta=np.array([budget, 0.0]),
            q1=sol.q_star, q2=zero, value=sol.value,
        )
    return PairSolution(
        k1=k_other, k2=k_active,
        alpha=np.array([0.0, 1.0]), beta=np.array([0.0, budget]),
        q1=zero, q2=sol.q_star, value=sol.value,
    )


def pair_utility(loss: FrozenLoss, xi_hat, k1: int, k2: int, budget: float, tol: ToleranceConfig) -> PairSolution:
    """Evaluate the two-piece utility at the given budget to within 4 * delta_eval.

    Both weight endpoints are evaluated exactly as single-piece problems
    (there the optimal mover of the vanishing component is zero); the nested
    golden-section search covers the interior weights only.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if not (0 <= k1 < k2 < loss.num_pieces):
        raise ValueError("need piece indices k1 < k2 inside the model")
    xi_hat = as_vector(xi_hat, dim=loss.dim, name="xi_hat")
    p1, p2 = loss.pieces[k1], loss.pieces[k2]

    if budget == 0.0:
        v1, v2 = p1.value(xi_hat), p2.value(xi_hat)
        zero = np.zeros_like(xi_hat)
        if v1 >= v2:
            return PairSolution(k1, k2, np.array([1.0, 0.0]), np.zeros(2), zero, zero, v1)
        return PairSolution(k1, k2, np.array([0.0, 1.0]), np.zeros(2), zero, zero, v2)

    best = _endpoint_solution(loss, xi_hat, k1, k2, budget, tol, active_first=True)
    cand = _endpoint_solution(loss, xi_hat, k2, k1, budget, tol, active_first=False)
    if cand.value > best.value:
        best = cand

    # interior weights: outer search over a1, inner over the budget split
    eps_inner = 0.5 * tol.delta_eval
    lip_guess = loss.lip_xi * (1.0 + float(np.linalg.norm(xi_hat)) + budget)
    eta_out_eff = min(tol.eta_out, 2.0 * tol.delta_eval / lip_guess)

    def weight_objective(a1: float):
        def split_objective(c1: float):
            s1 = perspective_max(p1, xi_hat, a1, c1, eps_inner)
            s2 = perspective_max(p2, xi_hat, 1.0 - a1, budget - c1, eps_inner)
            return s1.value + s2.value, (s1, s2)

        val, c1, (s1, s2) = golden_section_max(split_objective, 0.0, budget, tol.eta_in)
        return val, (c1, s1, s2)

    val, a1, (c1, s1, s2) = golden_section_max(
        weight_objective, tol.eps_alpha, 1.0 - tol.eps_alpha, eta_out_eff
    )
    if val > best.value:
        best = PairSolution(
            k1, k2,
            alpha=np.array([a1, 1.0 - a1]),
            beta=np.array([c1, budget - c1]),
            q1=s1.q_star, q2=s2.q_star, value=val,
        )
    return best


def sample_utility(
    loss: FrozenLoss, xi_hat, budget: float, tol: ToleranceConfig, use_kernel: bool | None = None
) -> tuple[float, PairSolution]:
    """Utility of one sample at the given budget: max over piece pairs.

    Within 4 * delta_eval of the truth; ties across pairs resolve to the
    lexicographically smallest (k1, k2).  For a single-piece model the pair
    search degenerates to one ball maximization.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    xi_hat = as_vector(xi_hat, dim=loss.dim, name="xi_hat")

    if use_kernel is not False:
        enc = loss.kernel()
        if enc is not None:
            from . import _kernel

            return _kernel.sample_utility_encoded(enc, xi_hat, budget, tol)
        if use_kernel is True:
            raise ValueError("loss is not encodable for the compiled path")

    if loss.num_pieces == 1:
        sol = perspective_max(loss.pieces[0], xi_hat, 1.0, budget, tol.delta_eval)
        zero = np.zeros_like(sol.q_star)
        ps = PairSolution(0, 0, np.array([1.0, 0.0]), np.array([budget, 0.0]), sol.q_star, zero, sol.value)
        return ps.value, ps

    best = None
    for k1 in range(loss.num_pieces - 1):
        for k2 in range(k1 + 1, loss.num_pieces):
            cand = pair_utility(loss, xi_hat, k1, k2, budget, tol)
            if best is None or cand.value > best.value:
                best = cand
    return best.value, best
