"""Independent validators for the oracle stack.

Everything here deliberately avoids the search machinery it checks: utilities
are maximized over dense cartesian grids, the master problem over a shared
budget lattice, and transport distances come from an exact coupling (sorted
quantiles in one dimension, successive-shortest-path min-cost flow in
general).  Grid maxima are lower bounds of the truth with a quantifiable
resolution, which is what the acceptance tolerances lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .budget import DiscreteDistribution, wasserstein_oracle
from .model import AmbiguitySpec, Array, FrozenLoss, FrozenPiece, LossModel, SampleBuffer, as_vector
from .utility import ToleranceConfig


class ScaleError(ValueError):
    """Raised when an instance exceeds the desk-scale guards of a validator."""


@dataclass(frozen=True)
class GridSpec:
    """Resolutions of the brute-force grids; ranges always cover the feasible sets.

    ``q_points`` counts points per coordinate axis of the mover grid;
    ``alpha_points`` and ``beta_points`` discretize the weight and budget
    split; ``b_points`` discretizes per-sample budgets in the master search.
    """

    alpha_points: int = 201
    beta_points: int = 201
    q_points: int = 201
    b_points: int = 201

    def __post_init__(self):
        for name in ("alpha_points", "beta_points", "q_points", "b_points"):
            if getattr(self, name) < 10:
                raise ValueError(f"{name} must be at least 10")

    def value_resolution(self, lip_xi: float, dim: int, budget: float, xi_norm: float) -> float:
        """Worst-case value gap between the grid maximum and the true maximum.

        Mover and split offsets cost at most lip_xi per unit; the weight axis
        is charged with the same local-slope surrogate the searches use,
        lip_xi * (1 + ||xi|| + budget).
        """
        if budget <= 0:
            return 0.0
        h_q = 2.0 * budget / (self.q_points - 1)
        h_beta = budget / (self.beta_points - 1)
        h_b = budget / (self.b_points - 1)
        h_alpha = 1.0 / (self.alpha_points - 1)
        slope_guess = lip_xi * (1.0 + xi_norm + budget)
        return lip_xi * (math.sqrt(dim) * h_q + 2.0 * h_beta + h_b) + h_alpha * slope_guess


# ---------------------------------------------------------------------------
# grid maximization of the pair objective


def _mover_grid(budget: float, dim: int, q_points: int) -> tuple[Array, Array]:
    """Cartesian mover grid on [-budget, budget]^dim sorted by norm.

    The origin is always included so the zero-budget column is exact.
    """
    axis = np.linspace(-budget, budget, q_points)
    if dim == 1:
        pts = axis[:, None]
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = np.vstack([np.zeros((1, dim)), pts])
    norms = np.linalg.norm(pts, axis=1)
    order = np.argsort(norms, kind="stable")
    return pts[order], norms[order]


def _scaled_piece_rows(piece: FrozenPiece, xi_hat: Array, alphas: Array, pts: Array, norms: Array) -> Array:
    """Rows of alpha * piece(xi_hat - q/alpha) over the mover grid, one per alpha.

    The alpha = 0 row is the horizon limit -lip * ||q||, whose grid maximum
    sits at q = 0 just like the true limit's.
    """
    n_a, n_q = alphas.shape[0], pts.shape[0]
    out = np.empty((n_a, n_q))
    prof = piece.radial
    if prof is not None:
        d_vec = xi_hat - prof.center
        dd = float(np.dot(d_vec, d_vec))
        qd = pts @ d_vec
        qq = norms * norms
        for row, a in enumerate(alphas):
            sq = qq - 2.0 * a * qd + (a * a) * dd
            np.maximum(sq, 0.0, out=sq)
            if prof.smooth:
                out[row] = a * prof.base - prof.slope * np.sqrt(a * a + sq)
            else:
                out[row] = a * prof.base - prof.slope * np.sqrt(sq)
        return out
    for row, a in enumerate(alphas):
        if a == 0.0:
            out[row] = -piece.xi_lipschitz * norms
        else:
            for col in range(n_q):
                out[row, col] = a * piece.value(xi_hat - pts[col] / a)
    return out


def _prefix_max_at(rows: Array, norms: Array, radii: Array) -> Array:
    """Per-row running max over the norm-sorted grid, sampled at given radii."""
    running = np.maximum.accumulate(rows, axis=1)
    idx = np.searchsorted(norms, radii, side="right") - 1
    if np.any(idx < 0):
        raise RuntimeError("mover grid misses the zero point")
    return running[:, idx]


def brute_force_pair(
    loss: FrozenLoss, xi_hat, k1: int, k2: int, budget: float, grid: GridSpec
) -> float:
    """Grid maximum of the two-piece objective at one budget.

    Cartesian product of a weight grid (endpoints included), a budget-split
    grid and per-piece mover grids; exact at budget 0.  Guarded to sample
    dimension <= 2.
    """
    xi_hat = as_vector(xi_hat, dim=loss.dim, name="xi_hat")
    if xi_hat.shape[0] > 2:
        raise ScaleError("brute-force pair evaluation is limited to dimension <= 2")
    if not (0 <= k1 < k2 < loss.num_pieces):
        raise ValueError("need piece indices k1 < k2 inside the model")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    p1, p2 = loss.pieces[k1], loss.pieces[k2]
    if budget == 0.0:
        return max(p1.value(xi_hat), p2.value(xi_hat))

    pts, norms = _mover_grid(budget, xi_hat.shape[0], grid.q_points)
    alphas = np.linspace(0.0, 1.0, grid.alpha_points)
    betas = np.linspace(0.0, budget, grid.beta_points)
    g1 = _prefix_max_at(_scaled_piece_rows(p1, xi_hat, alphas, pts, norms), norms, betas)
    g2 = _prefix_max_at(_scaled_piece_rows(p2, xi_hat, 1.0 - alphas, pts, norms), norms, betas)
    # same weight row of g1 and g2 share alpha; reversed split column is b - beta
    total = g1 + g2[:, ::-1]
    return float(total.max())


def _utility_tables(
    loss: FrozenLoss, xi_hat: Array, b_grid: Array, grid: GridSpec
) -> Array:
    """Sample utility on a shared budget lattice, max over piece pairs."""
    n_b = b_grid.shape[0]
    budget_max = float(b_grid[-1])
    if budget_max == 0.0:
        return np.full(n_b, loss.value(xi_hat))
    pts, norms = _mover_grid(budget_max, xi_hat.shape[0], grid.q_points)
    alphas = np.linspace(0.0, 1.0, grid.alpha_points)
    rows = [
        _prefix_max_at(_scaled_piece_rows(p, xi_hat, alphas, pts, norms), norms, b_grid)
        for p in loss.pieces
    ]
    rows_flip = [
        _prefix_max_at(_scaled_piece_rows(p, xi_hat, 1.0 - alphas, pts, norms), norms, b_grid)
        for p in loss.pieces
    ]
    best = np.full(n_b, -np.inf)
    n_pieces = loss.num_pieces
    if n_pieces == 1:
        return rows[0][-1]  # alpha = 1 row: the single-piece ball maximum
    for k1 in range(n_pieces - 1):
        for k2 in range(k1 + 1, n_pieces):
            pair = np.full((grid.alpha_points, n_b), -np.inf)
            g1, g2 = rows[k1], rows_flip[k2]
            for j in range(n_b):
                np.maximum(pair[:, j:], g1[:, j][:, None] + g2[:, : n_b - j], out=pair[:, j:])
            np.maximum(best, pair.max(axis=0), out=best)
    return best


def brute_force_master(
    loss: FrozenLoss, samples: SampleBuffer, radius: float, grid: GridSpec
) -> float:
    """Grid maximum of the budget-allocation master problem.

    Splits radius * t over the samples on a shared uniform lattice (every
    enumerated split is feasible, so this lower-bounds the truth) with each
    sample's utility taken from its own grid maximization.  Guarded to
    t <= 4, K <= 3, dimension <= 2.
    """
    t = samples.t
    if t == 0:
        raise ValueError("need at least one sample")
    if t > 4 or loss.num_pieces > 3 or samples.dim > 2:
        raise ScaleError("brute-force master is limited to t <= 4, K <= 3, dim <= 2")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0.0:
        return float(np.mean([loss.value(s) for s in samples.samples]))

    budget_total = radius * t
    b_grid = np.linspace(0.0, budget_total, grid.b_points)
    tables = [_utility_tables(loss, samples.samples[i], b_grid, grid) for i in range(t)]
    acc = tables[0]
    n_b = b_grid.shape[0]
    for i in range(1, t):
        nxt = np.full(n_b, -np.inf)
        u = tables[i]
        for j in range(n_b):
            np.maximum(nxt[j:], u[j] + acc[: n_b - j], out=nxt[j:])
        acc = nxt
    return float(acc.max()) / t


# ---------------------------------------------------------------------------
# exact discrete 1-Wasserstein distance


def discrete_w1(p: DiscreteDistribution, q: DiscreteDistribution, method: str = "auto") -> float:
    """Exact transport distance between finitely supported measures.

    One-dimensional supports use the sorted quantile coupling; otherwise a
    successive-shortest-path min-cost flow runs on the bipartite atom graph
    with Euclidean costs, with weights scaled to a common denominator so the
    flow arithmetic is integral.
    """
    if p.dim != q.dim:
        raise ValueError("supports have different dimensions")
    if abs(float(p.weights.sum()) - float(q.weights.sum())) > 1e-9:
        raise ValueError("weight totals differ by more than 1e-9")
    if method == "auto":
        method = "sorted" if p.dim == 1 else "flow"
    if method == "sorted":
        if p.dim != 1:
            raise ValueError("sorted coupling applies to 1-D supports only")
        return float(_w1_sorted(p, q))
    if method == "flow":
        return float(_w1_flow(p, q))
    raise ValueError(f"unknown method {method!r}")


def _w1_sorted(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    xs = p.atoms[:, 0]
    ys = q.atoms[:, 0]
    ox, oy = np.argsort(xs, kind="stable"), np.argsort(ys, kind="stable")
    xs, wx = xs[ox], p.weights[ox]
    ys, wy = ys[oy], q.weights[oy]
    i = j = 0
    ri, rj = wx[0], wy[0]
    cost = 0.0
    while i < xs.shape[0] and j < ys.shape[0]:
        move = min(ri, rj)
        cost += move * abs(xs[i] - ys[j])
        ri -= move
        rj -= move
        if ri <= 1e-18 and i + 1 < xs.shape[0]:
            i += 1
            ri = wx[i]
        elif ri <= 1e-18:
            i += 1
        if rj <= 1e-18 and j + 1 < ys.shape[0]:
            j += 1
            rj = wy[j]
        elif rj <= 1e-18:
            j += 1
    return cost


_FLOW_DENOMINATOR = 10**12


def _integerize(weights: Array) -> np.ndarray:
    scaled = np.rint(weights * _FLOW_DENOMINATOR).astype(np.int64)
    drift = _FLOW_DENOMINATOR - int(scaled.sum())
    scaled[int(np.argmax(scaled))] += drift
    if np.any(scaled < 0):
        raise ValueError("weights too small to integerize")
    return scaled


def _w1_flow(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    supply = _integerize(p.weights)
    demand = _integerize(q.weights)
    n, m = supply.shape[0], demand.shape[0]
    diff = p.atoms[:, None, :] - q.atoms[None, :, :]
    cost = np.sqrt(np.sum(diff * diff, axis=2))
    flow = np.zeros((n, m), dtype=np.int64)
    u = np.zeros(n)
    v = np.zeros(m)
    residual_supply = supply.astype(np.int64).copy()
    residual_demand = demand.astype(np.int64).copy()

    while residual_supply.sum() > 0:
        # multi-source Dijkstra over the residual graph with reduced costs
        dist_s = np.where(residual_supply > 0, 0.0, np.inf)
        dist_t = np.full(m, np.inf)
        par_t = np.full(m, -1, dtype=np.int64)  # source feeding each sink
        par_s = np.full(n, -1, dtype=np.int64)  # sink feeding each source (backward arc)
        done_s = np.zeros(n, dtype=bool)
        done_t = np.zeros(m, dtype=bool)
        target = -1
        while True:
            cand_s = np.where(~done_s, dist_s, np.inf)
            cand_t = np.where(~done_t, dist_t, np.inf)
            bs, bt = int(np.argmin(cand_s)), int(np.argmin(cand_t))
            if min(cand_s[bs], cand_t[bt]) == np.inf:
                break
            if cand_s[bs] <= cand_t[bt]:
                done_s[bs] = True
                rc = cost[bs] - u[bs] - v + dist_s[bs]
                better = rc < dist_t - 1e-15
                dist_t = np.where(better, rc, dist_t)
                par_t = np.where(better, bs, par_t)
            else:
                done_t[bt] = True
                if residual_demand[bt] > 0:
                    target = bt
                    break
                # backward arcs j -> i exist where flow is positive; tight, cost 0
                back = flow[:, bt] > 0
                better = back & (dist_t[bt] < dist_s - 1e-15)
                dist_s = np.where(better, dist_t[bt], dist_s)
                par_s = np.where(better, bt, par_s)
        if target < 0:
            raise RuntimeError("flow search stalled; unbalanced instance")

        d_star = dist_t[target]
        u += d_star - np.minimum(dist_s, d_star)
        v -= d_star - np.minimum(dist_t, d_star)

        # trace the augmenting path and find its bottleneck
        path = []  # alternating (source, sink) arcs
        j = target
        bottleneck = residual_demand[j]
        while True:
            i = int(par_t[j])
            path.append((i, j))
            prev_sink = int(par_s[i])
            if prev_sink < 0:
                bottleneck = min(bottleneck, residual_supply[i])
                break
            bottleneck = min(bottleneck, flow[i, prev_sink])
            j = prev_sink
        i_first = path[-1][0]
        residual_supply[i_first] -= bottleneck
        residual_demand[target] -= bottleneck
        for step_idx, (i, j) in enumerate(path):
            flow[i, j] += bottleneck
            if step_idx + 1 < len(path):
                flow[i, path[step_idx + 1][1]] -= bottleneck
    return float(np.sum(flow * cost) / _FLOW_DENOMINATOR)


# ---------------------------------------------------------------------------
# derivative checks and gap estimation


def finite_diff_check(piece: FrozenPiece, xi, h: float) -> float:
    """Max coordinate deviation of central differences from the supergradient."""
    if h <= 0:
        raise ValueError("step h must be positive")
    xi = as_vector(xi, name="xi")
    g = piece.supergrad(xi)
    worst = 0.0
    for j in range(xi.shape[0]):
        e = np.zeros_like(xi)
        e[j] = h
        fd = (piece.value(xi + e) - piece.value(xi - e)) / (2.0 * h)
        worst = max(worst, abs(fd - g[j]))
    return worst


def robust_risk(
    loss: LossModel, x, samples: SampleBuffer, amb: AmbiguitySpec, tol: ToleranceConfig,
    use_kernel: bool | None = None,
) -> float:
    """Worst-case expected loss of decision x over the ball around the samples."""
    frozen = loss.at(as_vector(x, name="x"))
    return wasserstein_oracle(frozen, samples, amb, tol, use_kernel=use_kernel)[1]


def gap_estimate(
    x_bar,
    holdout: SampleBuffer,
    loss: LossModel,
    space,
    amb: AmbiguitySpec,
    tol: ToleranceConfig,
    points_per_axis: int = 33,
    use_kernel: bool | None = None,
) -> float:
    """Excess worst-case risk of x_bar against the grid minimum over the space.

    The ball is centered at the supplied hold-out empirical measure, a proxy
    for the unknown data-generating distribution; the result inherits the
    grid resolution and the proxy's sampling error.  Guarded to decision
    dimension <= 2.
    """
    if space.dim > 2:
        raise ScaleError("gap estimation is limited to decision dimension <= 2")
    val = robust_risk(loss, x_bar, holdout, amb, tol, use_kernel=use_kernel)
    best = math.inf
    for g in space.axis_grid(points_per_axis):
        best = min(best, robust_risk(loss, g, holdout, amb, tol, use_kernel=use_kernel))
    return val - best
