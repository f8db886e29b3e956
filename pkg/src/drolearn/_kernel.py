"""Compiled fast path for losses whose frozen pieces are radial profiles.

Transliterates the golden-section machinery of utility.py and budget.py into
numba-jitted scalar code.  A frozen piece is encoded by (kind, base, slope,
center) with value(xi) = base - slope * r (kind 0) or base - slope *
sqrt(1 + r^2) (kind 1), r = ||xi - center||; the exact ball maximization then
only needs the center distances, so the whole per-sample pipeline runs on a
handful of floats.  The python implementations remain the reference; tests
pin the two paths against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

# the sandbox TBB is too old; OpenMP avoids a noisy fallback warning
_numba_config.THREADING_LAYER = "omp"

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KernelLoss:
    kinds: np.ndarray  # (K,) int64, 0 cone / 1 saturating
    bases: np.ndarray  # (K,) float64
    slopes: np.ndarray  # (K,)
    centers: np.ndarray  # (K, m)
    lip_xi: float


def encode(frozen) -> KernelLoss | None:
    """Array encoding of a FrozenLoss, or None if any piece is non-radial."""
    kinds, bases, slopes, centers = [], [], [], []
    for p in frozen.pieces:
        if p.radial is None:
            return None
        prof = p.radial
        kinds.append(1 if prof.smooth else 0)
        bases.append(prof.base)
        slopes.append(prof.slope)
        centers.append(prof.center)
    return KernelLoss(
        kinds=np.asarray(kinds, dtype=np.int64),
        bases=np.asarray(bases, dtype=np.float64),
        slopes=np.asarray(slopes, dtype=np.float64),
        centers=np.asarray(centers, dtype=np.float64),
        lip_xi=float(frozen.lip_xi),
    )


def distances(enc: KernelLoss, samples: np.ndarray) -> np.ndarray:
    """(t, K) center distances; the only per-sample data the kernel needs."""
    diff = samples[:, None, :] - enc.centers[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


@njit(cache=True)
def _inner_val(kind, base, slope, dist, alpha, beta):
    # exact max of alpha * piece(xi_hat - q/alpha) over ||q|| <= beta
    if beta <= 0.0:
        r = dist
    else:
        reach = beta / alpha
        r = dist - reach if dist > reach else 0.0
    if kind == 0:
        w = base - slope * r
    else:
        w = base - slope * math.sqrt(1.0 + r * r)
    return alpha * w


@njit(cache=True)
def _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, c1, budget):
    v1 = _inner_val(kinds[k1], bases[k1], slopes[k1], d1, a1, c1)
    v2 = _inner_val(kinds[k2], bases[k2], slopes[k2], d2, 1.0 - a1, budget - c1)
    return v1 + v2


@njit(cache=True)
def _split_max(kinds, bases, slopes, d1, d2, k1, k2, a1, budget, floor):
    # golden-section over the budget split; ties advance the left edge
    lo = 0.0
    hi = budget
    if hi - lo <= floor:
        mid = 0.5 * (lo + hi)
        return _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, mid, budget), mid
    z1 = hi - GOLDEN * (hi - lo)
    z2 = lo + GOLDEN * (hi - lo)
    f1 = _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, z1, budget)
    f2 = _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, z2, budget)
    while hi - lo > floor:
        if not (f1 > f2):
            lo = z1
            z1 = z2
            f1 = f2
            z2 = lo + GOLDEN * (hi - lo)
            f2 = _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, z2, budget)
        else:
            hi = z2
            z2 = z1
            f2 = f1
            z1 = hi - GOLDEN * (hi - lo)
            f1 = _psi(kinds, bases, slopes, d1, d2, k1, k2, a1, z1, budget)
    if f1 >= f2:
        return f1, z1
    return f2, z2


@njit(cache=True)
def _pair_eval(kinds, bases, slopes, d1, d2, k1, k2, budget, xi_norm, lip_xi,
               delta_eval, eta_in, eta_out_cap, eps_alpha):
    # returns (value, a1, c1)
    if budget <= 0.0:
        v1 = _inner_val(kinds[k1], bases[k1], slopes[k1], d1, 1.0, 0.0)
        v2 = _inner_val(kinds[k2], bases[k2], slopes[k2], d2, 1.0, 0.0)
        if v1 >= v2:
            return v1, 1.0, 0.0
        return v2, 0.0, 0.0

    best = _inner_val(kinds[k1], bases[k1], slopes[k1], d1, 1.0, budget)
    best_a1 = 1.0
    best_c1 = budget
    other = _inner_val(kinds[k2], bases[k2], slopes[k2], d2, 1.0, budget)
    if other > best:
        best = other
        best_a1 = 0.0
        best_c1 = 0.0

    lip_guess = lip_xi * (1.0 + xi_norm + budget)
    eta_out = 2.0 * delta_eval / lip_guess
    if eta_out_cap < eta_out:
        eta_out = eta_out_cap

    lo = eps_alpha
    hi = 1.0 - eps_alpha
    if hi - lo <= eta_out:
        mid = 0.5 * (lo + hi)
        val, c1 = _split_max(kinds, bases, slopes, d1, d2, k1, k2, mid, budget, eta_in)
        if val > best:
            return val, mid, c1
        return best, best_a1, best_c1
    z1 = hi - GOLDEN * (hi - lo)
    z2 = lo + GOLDEN * (hi - lo)
    f1, c1a = _split_max(kinds, bases, slopes, d1, d2, k1, k2, z1, budget, eta_in)
    f2, c1b = _split_max(kinds, bases, slopes, d1, d2, k1, k2, z2, budget, eta_in)
    while hi - lo > eta_out:
        if not (f1 > f2):
            lo = z1
            z1 = z2
            f1 = f2
            c1a = c1b
            z2 = lo + GOLDEN * (hi - lo)
            f2, c1b = _split_max(kinds, bases, slopes, d1, d2, k1, k2, z2, budget, eta_in)
        else:
            hi = z2
            z2 = z1
            f2 = f1
            c1b = c1a
            z1 = hi - GOLDEN * (hi - lo)
            f1, c1a = _split_max(kinds, bases, slopes, d1, d2, k1, k2, z1, budget, eta_in)
    if f1 >= f2:
        val, a1, c1 = f1, z1, c1a
    else:
        val, a1, c1 = f2, z2, c1b
    if val > best:
        return val, a1, c1
    return best, best_a1, best_c1


@njit(cache=True)
def _sample_eval(kinds, bases, slopes, dists, budget, xi_norm, lip_xi,
                 delta_eval, eta_in, eta_out_cap, eps_alpha):
    # returns (value, k1, k2, a1, c1); k1 == k2 marks the single-piece path
    n_pieces = kinds.shape[0]
    if n_pieces == 1:
        val = _inner_val(kinds[0], bases[0], slopes[0], dists[0], 1.0, budget)
        return val, 0, 0, 1.0, budget
    best = -np.inf
    bk1 = 0
    bk2 = 1
    ba1 = 1.0
    bc1 = budget
    for k1 in range(n_pieces - 1):
        for k2 in range(k1 + 1, n_pieces):
            val, a1, c1 = _pair_eval(
                kinds, bases, slopes, dists[k1], dists[k2], k1, k2, budget,
                xi_norm, lip_xi, delta_eval, eta_in, eta_out_cap, eps_alpha,
            )
            if val > best:
                best = val
                bk1 = k1
                bk2 = k2
                ba1 = a1
                bc1 = c1
    return best, bk1, bk2, ba1, bc1


@njit(cache=True)
def _cached_value(kinds, bases, slopes, dists, budget, xi_norm, lip_xi,
                  delta_eval, eta_in, eta_out_cap, eps_alpha, ckeys, cvals, clen):
    # utility values keyed by exact budget; probes repeat bitwise across the
    # dual bisection whenever a sample's bracket is stable
    n = clen[0]
    for idx in range(n):
        if ckeys[idx] == budget:
            return cvals[idx]
    val = _sample_eval(kinds, bases, slopes, dists, budget, xi_norm, lip_xi,
                       delta_eval, eta_in, eta_out_cap, eps_alpha)[0]
    if n < ckeys.shape[0]:
        ckeys[n] = budget
        cvals[n] = val
        clen[0] = n + 1
    return val


@njit(cache=True)
def _subproblem(kinds, bases, slopes, dists, lam, b_lo, b_hi, xi_norm, lip_xi,
                delta_eval, eta_in, eta_out_cap, eps_alpha, eta_b,
                ckeys, cvals, clen):
    # golden-section over the budget of utility(b) - lam * b; ties shrink the
    # right edge, and the returned point is the final left edge.  The utility
    # saturates once the atom can reach the farthest profile center, so the
    # smallest maximizer never exceeds that distance.
    sat = 0.0
    for k in range(dists.shape[0]):
        if dists[k] > sat:
            sat = dists[k]
    cap = sat + 4.0 * eta_b
    lo = b_lo
    hi = b_hi if b_hi < cap else cap
    if hi < lo:
        hi = lo
    if hi - lo > eta_b:
        z1 = hi - GOLDEN * (hi - lo)
        z2 = lo + GOLDEN * (hi - lo)
        f1 = _cached_value(kinds, bases, slopes, dists, z1, xi_norm, lip_xi,
                           delta_eval, eta_in, eta_out_cap, eps_alpha, ckeys, cvals, clen) - lam * z1
        f2 = _cached_value(kinds, bases, slopes, dists, z2, xi_norm, lip_xi,
                           delta_eval, eta_in, eta_out_cap, eps_alpha, ckeys, cvals, clen) - lam * z2
        while hi - lo > eta_b:
            if f1 < f2:
                lo = z1
                z1 = z2
                f1 = f2
                z2 = lo + GOLDEN * (hi - lo)
                f2 = _cached_value(kinds, bases, slopes, dists, z2, xi_norm, lip_xi,
                                   delta_eval, eta_in, eta_out_cap, eps_alpha, ckeys, cvals, clen) - lam * z2
            else:
                hi = z2
                z2 = z1
                f2 = f1
                z1 = hi - GOLDEN * (hi - lo)
                f1 = _cached_value(kinds, bases, slopes, dists, z1, xi_norm, lip_xi,
                                   delta_eval, eta_in, eta_out_cap, eps_alpha, ckeys, cvals, clen) - lam * z1
    return lo


@njit(cache=True, parallel=True)
def _solve_all(kinds, bases, slopes, dist_mat, xi_norms, lam, b_los, b_his,
               lip_xi, delta_eval, eta_in, eta_out_cap, eps_alpha, eta_b,
               budgets, ckeys, cvals, clens):
    t = dist_mat.shape[0]
    for i in prange(t):
        budgets[i] = _subproblem(
            kinds, bases, slopes, dist_mat[i], lam, b_los[i], b_his[i],
            xi_norms[i], lip_xi, delta_eval, eta_in, eta_out_cap, eps_alpha, eta_b,
            ckeys[i], cvals[i], clens[i : i + 1],
        )


@njit(cache=True, parallel=True)
def _eval_all(kinds, bases, slopes, dist_mat, xi_norms, budgets,
              lip_xi, delta_eval, eta_in, eta_out_cap, eps_alpha,
              vals, k1s, k2s, a1s, c1s):
    t = dist_mat.shape[0]
    for i in prange(t):
        v, k1, k2, a1, c1 = _sample_eval(
            kinds, bases, slopes, dist_mat[i], budgets[i], xi_norms[i],
            lip_xi, delta_eval, eta_in, eta_out_cap, eps_alpha,
        )
        vals[i] = v
        k1s[i] = k1
        k2s[i] = k2
        a1s[i] = a1
        c1s[i] = c1


def allocate_encoded(enc: KernelLoss, samples: np.ndarray, rho_t: float, tol,
                     eta_lambda_eff: float, warm_brackets: bool = True):
    """Dual bisection over the compiled subproblem solver.

    Returns (budgets, lam_hat, vals, k1s, k2s, a1s, c1s).  Mirrors
    budget.allocate_budget: probe lam = 0 first, bisect on infeasibility,
    keep the feasible-side allocation, then top up any slack from the
    lam_low caps in index order.
    """
    t = samples.shape[0]
    dist_mat = distances(enc, samples)
    xi_norms = np.linalg.norm(samples, axis=1)
    lip = enc.lip_xi
    cache_keys = np.full((t, 192), -1.0)
    cache_vals = np.zeros((t, 192))
    cache_lens = np.zeros(t, dtype=np.int64)

    def solve(lam, b_los, b_his):
        budgets = np.empty(t)
        _solve_all(enc.kinds, enc.bases, enc.slopes, dist_mat, xi_norms, lam,
                   b_los, b_his, lip, tol.delta_eval, tol.eta_in, tol.eta_out,
                   tol.eps_alpha, tol.eta_b, budgets,
                   cache_keys, cache_vals, cache_lens)
        return budgets

    def evaluate(budgets):
        vals = np.empty(t)
        k1s = np.empty(t, dtype=np.int64)
        k2s = np.empty(t, dtype=np.int64)
        a1s = np.empty(t)
        c1s = np.empty(t)
        _eval_all(enc.kinds, enc.bases, enc.slopes, dist_mat, xi_norms, budgets,
                  lip, tol.delta_eval, tol.eta_in, tol.eta_out, tol.eps_alpha,
                  vals, k1s, k2s, a1s, c1s)
        return vals, k1s, k2s, a1s, c1s

    full_lo = np.zeros(t)
    full_hi = np.full(t, rho_t)
    budgets0 = solve(0.0, full_lo, full_hi)
    if float(np.sum(budgets0)) <= rho_t:
        return (budgets0, 0.0) + evaluate(budgets0)

    lam_lo, lam_hi = 0.0, lip
    lo_caps = budgets0  # allocation at lam_lo, over budget
    hi_budgets = np.zeros(t)  # lam >= lip_xi forces zero budgets
    rho = rho_t / t
    while lam_hi - lam_lo > eta_lambda_eff:
        # two duality-based exits: once the bracket's allocations agree to
        # t * eta_b in total budget, or once the price gap times the radius
        # is below delta_eval / 2, the topped-up value can no longer move
        # beyond the accounted slack
        if float(np.sum(lo_caps - hi_budgets)) <= t * tol.eta_b:
            break
        if (lam_hi - lam_lo) * rho <= 0.5 * tol.delta_eval:
            break
        mid = 0.5 * (lam_lo + lam_hi)
        if warm_brackets:
            spread = lo_caps - hi_budgets
            margin = 4.0 * tol.eta_b + 0.05 * np.abs(spread)
            b_los = np.clip(hi_budgets - margin, 0.0, rho_t)
            b_his = np.clip(lo_caps + margin, 0.0, rho_t)
        else:
            b_los, b_his = full_lo, full_hi
        budgets = solve(mid, b_los, b_his)
        if float(np.sum(budgets)) > rho_t:
            lam_lo = mid
            lo_caps = budgets
        else:
            lam_hi = mid
            hi_budgets = budgets

    # top up unspent budget toward the lam_lo caps, in index order
    final = hi_budgets.copy()
    residual = rho_t - float(np.sum(final))
    for i in range(t):
        if residual <= 0:
            break
        room = max(lo_caps[i] - final[i], 0.0)
        add = min(room, residual)
        final[i] += add
        residual -= add
    return (final, lam_hi) + evaluate(final)


def pair_solution_from_scalars(enc: KernelLoss, xi_hat, budget, val, k1, k2, a1, c1):
    """Rebuild the vector movers q1, q2 from the scalar search output."""
    from .utility import PairSolution

    alpha = np.array([a1, 1.0 - a1])
    beta = np.array([c1, budget - c1])
    qs = []
    for j, k in enumerate((k1, k2)):
        a_j, b_j = alpha[j], beta[j]
        if a_j <= 0.0 or b_j <= 0.0:
            qs.append(np.zeros_like(xi_hat))
            continue
        d_vec = xi_hat - enc.centers[k]
        d = float(np.linalg.norm(d_vec))
        if d == 0.0:
            qs.append(np.zeros_like(xi_hat))
            continue
        move = min(d, b_j / a_j)
        qs.append(a_j * move * (d_vec / d))
    return PairSolution(k1=int(k1), k2=int(k2), alpha=alpha, beta=beta,
                        q1=qs[0], q2=qs[1], value=float(val))


def sample_utility_encoded(enc: KernelLoss, xi_hat, budget, tol):
    dists = np.sqrt(np.sum((xi_hat[None, :] - enc.centers) ** 2, axis=1))
    val, k1, k2, a1, c1 = _sample_eval(
        enc.kinds, enc.bases, enc.slopes, dists, float(budget),
        float(np.linalg.norm(xi_hat)), enc.lip_xi, tol.delta_eval,
        tol.eta_in, tol.eta_out, tol.eps_alpha,
    )
    ps = pair_solution_from_scalars(enc, xi_hat, float(budget), val, k1, k2, a1, c1)
    return float(val), ps


def subproblem_encoded(enc: KernelLoss, xi_hat, lam, rho_t, tol):
    dists = np.sqrt(np.sum((xi_hat[None, :] - enc.centers) ** 2, axis=1))
    xi_norm = float(np.linalg.norm(xi_hat))
    b = _subproblem(
        enc.kinds, enc.bases, enc.slopes, dists, float(lam), 0.0, float(rho_t),
        xi_norm, enc.lip_xi, tol.delta_eval,
        tol.eta_in, tol.eta_out, tol.eps_alpha, tol.eta_b,
        np.full(192, -1.0), np.zeros(192), np.zeros(1, dtype=np.int64),
    )
    val, k1, k2, a1, c1 = _sample_eval(
        enc.kinds, enc.bases, enc.slopes, dists, float(b), xi_norm, enc.lip_xi,
        tol.delta_eval, tol.eta_in, tol.eta_out, tol.eps_alpha,
    )
    ps = pair_solution_from_scalars(enc, xi_hat, float(b), val, k1, k2, a1, c1)
    return float(b), ps
