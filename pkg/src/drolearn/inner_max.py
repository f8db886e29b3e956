"""Maximization of the perspective objective alpha * piece(xi_hat - q/alpha).

This is the innermost subroutine of the worst-case oracle: for one concave
piece, a mixing weight ``alpha`` in (0, 1] and a transport allowance ``beta``,
compute, up to accuracy ``eps``,

    max { alpha * piece(xi_hat - q / alpha) : ||q|| <= beta }.

After the substitution v = q / alpha the problem is the maximization of the
concave map v -> piece(xi_hat - v) over the ball ||v|| <= beta / alpha, scaled
by alpha.  Three routes are implemented:

* exact: when the piece is a nonincreasing radial profile around a center,
  the maximizer moves xi_hat straight toward the center and clips at the ball
  boundary.  Both shipped families have this structure.
* subgradient: projected supergradient ascent with the fixed step
  beta / (alpha * gamma * sqrt(N)) for N = ceil((beta * gamma / eps)^2)
  iterations, gamma the piece's Lipschitz bound.  Standard O(1/eps^2)
  guarantee for nonsmooth concave maximization from a cold start.
* smooth: projected gradient ascent with an explicit first-order gap
  certificate max_{||z||<=R} <grad, z - v>, stopping once the certificate
  (scaled by alpha) drops below eps.  Accepts a warm start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Array, FrozenPiece, as_vector


@dataclass(frozen=True)
class InnerSolution:
    q_star: Array
    value: float
    iterations: int


def _project_ball(v: Array, radius: float) -> Array:
    n = float(np.linalg.norm(v))
    if n <= radius:
        return v
    return (radius / n) * v


def perspective_max(
    piece: FrozenPiece,
    xi_hat,
    alpha: float,
    beta: float,
    eps: float,
    start: Array | None = None,
    method: str = "auto",
) -> InnerSolution:
    """eps-accurate maximization of alpha * piece(xi_hat - q/alpha) over ||q|| <= beta.

    Returns q_star with ||q_star|| <= beta and value >= optimum - eps.  The
    degenerate endpoint alpha = 0 is never evaluated here; callers resolve it
    analytically (the optimal q is then 0).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    xi_hat = as_vector(xi_hat, name="xi_hat")

    if beta == 0.0:
        return InnerSolution(np.zeros_like(xi_hat), alpha * piece.value(xi_hat), 0)

    if method == "auto":
        if piece.radial is not None:
            method = "exact"
        elif piece.smooth:
            method = "smooth"
        else:
            method = "subgradient"

    if method == "exact":
        return _radial_max(piece, xi_hat, alpha, beta)
    if method == "subgradient":
        return _subgradient_max(piece, xi_hat, alpha, beta, eps)
    if method == "smooth":
        return _smooth_max(piece, xi_hat, alpha, beta, eps, start)
    raise ValueError(f"unknown method {method!r}")


def _radial_max(piece: FrozenPiece, xi_hat: Array, alpha: float, beta: float) -> InnerSolution:
    prof = piece.radial
    if prof is None:
        raise ValueError("piece has no radial structure")
    d = xi_hat - prof.center
    r = float(np.linalg.norm(d))
    reach = beta / alpha
    if r <= reach:
        v = d  # the moved point lands exactly on the profile center
        r_new = 0.0
    else:
        v = (reach / r) * d
        r_new = r - reach
    return InnerSolution(alpha * v, alpha * prof.value_at(r_new), 0)


def _subgradient_max(
    piece: FrozenPiece, xi_hat: Array, alpha: float, beta: float, eps: float
) -> InnerSolution:
    gamma = piece.xi_lipschitz
    if gamma * beta <= eps:
        # staying put is already eps-optimal: the objective varies by at most
        # gamma * beta over the feasible ball
        return InnerSolution(np.zeros_like(xi_hat), alpha * piece.value(xi_hat), 0)
    radius = beta / alpha
    n_steps = int(math.ceil((beta * gamma / eps) ** 2))
    step = beta / (alpha * gamma * math.sqrt(n_steps))
    v = np.zeros_like(xi_hat)
    best_val = -math.inf
    best_v = v
    for _ in range(n_steps):
        point = xi_hat - v
        val = piece.value(point)
        if val > best_val:
            best_val, best_v = val, v
        g = -piece.supergrad(point)  # ascent direction of v -> piece(xi_hat - v)
        v = _project_ball(v + step * g, radius)
    val = piece.value(xi_hat - v)
    if val > best_val:
        best_val, best_v = val, v
    return InnerSolution(alpha * best_v, alpha * best_val, n_steps)


def _smooth_max(
    piece: FrozenPiece,
    xi_hat: Array,
    alpha: float,
    beta: float,
    eps: float,
    start: Array | None,
) -> InnerSolution:
    radius = beta / alpha
    v = _project_ball(as_vector(start, name="start").copy(), radius) if start is not None else np.zeros_like(xi_hat)
    lip_grad = piece.grad_lipschitz
    step = 1.0 / lip_grad if lip_grad else 1.0
    val = piece.value(xi_hat - v)
    max_iter = 64 + int(math.ceil(8.0 * (lip_grad or 1.0) * radius * radius * alpha / eps))
    it = 0
    while it < max_iter:
        g = -piece.supergrad(xi_hat - v)
        # first-order optimality gap over the ball, valid by concavity
        cert = radius * float(np.linalg.norm(g)) - float(np.dot(g, v))
        if alpha * cert <= eps:
            break
        h = step
        while True:
            v_new = _project_ball(v + h * g, radius)
            val_new = piece.value(xi_hat - v_new)
            dv = v_new - v
            if val_new >= val + 0.5 * float(np.dot(g, dv)) or h < 1e-14:
                break
            h *= 0.5
        if val_new <= val and float(np.linalg.norm(dv)) < 1e-15:
            break  # projected step has stalled at the boundary
        v, val = v_new, val_new
        it += 1
    else:
        raise RuntimeError("smooth ascent failed to certify the requested accuracy")
    return InnerSolution(alpha * v, alpha * val, it)
