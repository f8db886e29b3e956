"""Problem data: decision spaces, piecewise concave losses, and sample buffers.

The loss abstraction is ``l(x, xi) = max_k piece_k(x, xi)`` where every piece
is convex in the decision ``x`` and concave (and bounded above) in the sample
``xi``.  The shipped reference family is separable, ``piece(x, xi) = u(x) +
w(xi)``, with ``u`` affine or absolute-deviation and ``w`` a radially
decreasing profile around a center point.  Anything exposing the same piece
interface plugs into the rest of the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray


def as_vector(x, dim: int | None = None, name: str = "x") -> Array:
    """Coerce to a float 1-D array, optionally checking its dimension."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    return v


# ---------------------------------------------------------------------------
# decision space


@dataclass(frozen=True)
class DecisionSpace:
    """Convex compact decision set with a closed-form Euclidean projection.

    Two kinds are supported: axis-aligned boxes and Euclidean balls.
    ``diameter`` is the exact diameter of the described set.
    """

    kind: str
    lower: Array | None = None
    upper: Array | None = None
    center: Array | None = None
    radius: float = 0.0

    @staticmethod
    def box(lower, upper) -> "DecisionSpace":
        lo = as_vector(lower, name="lower")
        hi = as_vector(upper, dim=lo.shape[0], name="upper")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(hi < lo):
            raise ValueError("box is empty: upper < lower on some axis")
        return DecisionSpace(kind="box", lower=lo, upper=hi)

    @staticmethod
    def ball(center, radius: float) -> "DecisionSpace":
        c = as_vector(center, name="center")
        r = float(radius)
        if not (math.isfinite(r) and r >= 0.0):
            raise ValueError("ball radius must be finite and nonnegative")
        return DecisionSpace(kind="ball", center=c, radius=r)

    @property
    def dim(self) -> int:
        return self.lower.shape[0] if self.kind == "box" else self.center.shape[0]

    @property
    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        return 2.0 * self.radius

    def project(self, y) -> Array:
        """Euclidean projection onto the set; identity on interior points."""
        y = as_vector(y, dim=self.dim, name="y")
        if self.kind == "box":
            return np.clip(y, self.lower, self.upper)
        d = y - self.center
        n = float(np.linalg.norm(d))
        if n <= self.radius:
            return y
        return self.center + (self.radius / n) * d

    def contains(self, y, tol: float = 1e-9) -> bool:
        y = as_vector(y, dim=self.dim, name="y")
        if self.kind == "box":
            return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))
        return float(np.linalg.norm(y - self.center)) <= self.radius + tol

    def midpoint(self) -> Array:
        if self.kind == "box":
            return 0.5 * (self.lower + self.upper)
        return self.center.copy()

    def axis_grid(self, points_per_axis: int) -> Array:
        """Regular grid covering the set, shape (n_points, dim).

        For balls the grid covers the bounding box and is filtered to the
        ball, always keeping the center.
        """
        if points_per_axis < 2:
            raise ValueError("need at least 2 points per axis")
        if self.kind == "box":
            lo, hi = self.lower, self.upper
        else:
            lo = self.center - self.radius
            hi = self.center + self.radius
        axes = [np.linspace(lo[j], hi[j], points_per_axis) for j in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        if self.kind == "ball":
            keep = np.linalg.norm(pts - self.center, axis=1) <= self.radius + 1e-12
            pts = np.vstack([pts[keep], self.center])
        return pts


# ---------------------------------------------------------------------------
# decision-side parts of the separable reference family


@dataclass(frozen=True)
class AffinePart:
    """u(x) = coef . x + offset."""

    coef: Array
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coef", as_vector(self.coef, name="coef"))

    def value(self, x: Array) -> float:
        return float(np.dot(self.coef, x)) + self.offset

    def subgrad(self, x: Array) -> Array:
        return self.coef

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.coef))


@dataclass(frozen=True)
class AbsDevPart:
    """u(x) = scale * sum_j |x_j - anchor_j|; subgradient 0 at kinks."""

    scale: float
    anchor: Array

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_vector(self.anchor, name="anchor"))
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    def value(self, x: Array) -> float:
        return self.scale * float(np.sum(np.abs(x - self.anchor)))

    def subgrad(self, x: Array) -> Array:
        return self.scale * np.sign(x - self.anchor)

    @property
    def lipschitz(self) -> float:
        return self.scale * math.sqrt(self.anchor.shape[0])


# ---------------------------------------------------------------------------
# sample-side parts


@dataclass(frozen=True)
class RadialPart:
    """Concave sample-side part, a nonincreasing profile of r = ||xi - center||.

    ``smooth=False``: w(xi) = peak - slope * r          (cone, kinked at r=0)
    ``smooth=True`` : w(xi) = peak - slope * sqrt(1+r^2) (saturating, C^inf)

    Both are concave in xi, bounded above, and ``slope``-Lipschitz.
    """

    peak: float
    slope: float
    center: Array
    smooth: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, name="center"))
        if not (math.isfinite(self.slope) and self.slope >= 0):
            raise ValueError(
                "slope must be finite and nonnegative; a negative slope grows "
                "without bound in xi"
            )

    def radial_value(self, r: float) -> float:
        if self.smooth:
            return self.peak - self.slope * math.sqrt(1.0 + r * r)
        return self.peak - self.slope * r

    def value(self, xi: Array) -> float:
        return self.radial_value(float(np.linalg.norm(xi - self.center)))

    def supergrad(self, xi: Array) -> Array:
        d = xi - self.center
        r = float(np.linalg.norm(d))
        if self.smooth:
            return -self.slope * d / math.sqrt(1.0 + r * r)
        if r == 0.0:
            return np.zeros_like(d)  # minimal-norm element at the kink
        return -self.slope * d / r

    @property
    def upper_bound(self) -> float:
        return self.peak - self.slope if self.smooth else self.peak

    @property
    def grad_lipschitz(self) -> float | None:
        # |d^2/dr^2 sqrt(1+r^2)| <= 1, so the gradient is slope-Lipschitz.
        return self.slope if self.smooth else None


@dataclass(frozen=True)
class SeparablePiece:
    """One loss piece u(x) + w(xi): convex in x, concave bounded-above in xi."""

    x_part: AffinePart | AbsDevPart
    xi_part: RadialPart

    def value(self, x: Array, xi: Array) -> float:
        return self.x_part.value(x) + self.xi_part.value(xi)

    def subgrad_x(self, x: Array, xi: Array) -> Array:
        return self.x_part.subgrad(x)

    def supergrad_xi(self, x: Array, xi: Array) -> Array:
        return self.xi_part.supergrad(xi)

    @property
    def xi_lipschitz(self) -> float:
        return self.xi_part.slope

    @property
    def smooth(self) -> bool:
        return self.xi_part.smooth

    def upper_bound(self, x: Array) -> float:
        return self.x_part.value(x) + self.xi_part.upper_bound


# ---------------------------------------------------------------------------
# frozen (decision held fixed) views used by the oracle stack


@dataclass(frozen=True)
class RadialProfile:
    """value(xi) = base - slope * r  or  base - slope * sqrt(1+r^2).

    Exposes the exact ball-maximization structure: the profile is
    nonincreasing in r = ||xi - center||, so maximizing over a transport ball
    moves the point straight toward ``center``.
    """

    center: Array
    base: float
    slope: float
    smooth: bool

    def value_at(self, r: float) -> float:
        if self.smooth:
            return self.base - self.slope * math.sqrt(1.0 + r * r)
        return self.base - self.slope * r


@dataclass(frozen=True)
class FrozenPiece:
    """A single concave piece of xi alone (decision variable already fixed)."""

    value: Callable[[Array], float]
    supergrad: Callable[[Array], Array]
    xi_lipschitz: float
    smooth: bool
    upper_bound: float
    grad_lipschitz: float | None = None
    radial: RadialProfile | None = None


class FrozenLoss:
    """max_k piece_k(xi) with the decision variable fixed.

    Carries the per-piece concave functions plus the bound
    ``lip_xi = max_k xi_lipschitz_k`` on the Lipschitz constant in xi.
    ``dim`` may be None when the sample dimension is not discoverable from
    the pieces; dimension checks are then skipped.
    """

    def __init__(self, pieces: Sequence[FrozenPiece], dim: int | None):
        if len(pieces) < 1:
            raise ValueError("need at least one piece")
        self.pieces = tuple(pieces)
        self.dim = dim
        self.lip_xi = max(p.xi_lipschitz for p in self.pieces)
        self._kernel = None
        self._kernel_tried = False

    @property
    def num_pieces(self) -> int:
        return len(self.pieces)

    def value(self, xi) -> float:
        return self.value_and_piece(xi)[0]

    def value_and_piece(self, xi) -> tuple[float, int]:
        """Max over pieces and the argmax index (ties go to the smallest)."""
        xi = as_vector(xi, dim=self.dim, name="xi")
        best, k_best = -math.inf, 0
        for k, p in enumerate(self.pieces):
            v = p.value(xi)
            if v > best:
                best, k_best = v, k
        return best, k_best

    def kernel(self):
        """Array encoding for the compiled fast path, or None if not radial."""
        if not self._kernel_tried:
            from . import _kernel

            self._kernel = _kernel.encode(self)
            self._kernel_tried = True
        return self._kernel


# ---------------------------------------------------------------------------
# the loss model


@dataclass(frozen=True)
class LossModel:
    """l(x, xi) = max_k piece_k(x, xi), convex in x and piecewise concave in xi.

    ``lip_x`` bounds the Lipschitz constant of l(., xi) uniformly in xi;
    ``lip_xi`` bounds max_k of the per-piece Lipschitz constants in xi.
    """

    pieces: tuple
    lip_x: float
    lip_xi: float

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise ValueError("need at least one piece")

    @property
    def num_pieces(self) -> int:
        return len(self.pieces)

    def value(self, x, xi) -> float:
        return self.value_and_piece(x, xi)[0]

    def value_and_piece(self, x, xi) -> tuple[float, int]:
        """Loss value and the argmax piece index (ties -> smallest index)."""
        x = as_vector(x, name="x")
        xi = as_vector(xi, name="xi")
        best, k_best = -math.inf, 0
        for k, p in enumerate(self.pieces):
            v = p.value(x, xi)
            if v > best:
                best, k_best = v, k
        return best, k_best

    def subgrad_x(self, x, xi) -> Array:
        """Subgradient of l(., xi) at x, taken from the argmax piece."""
        x = as_vector(x, name="x")
        xi = as_vector(xi, name="xi")
        _, k = self.value_and_piece(x, xi)
        return np.asarray(self.pieces[k].subgrad_x(x, xi), dtype=float)

    def at(self, x) -> FrozenLoss:
        """Freeze the decision variable, yielding concave functions of xi."""
        x = as_vector(x, name="x")
        frozen = [_freeze_piece(p, x) for p in self.pieces]
        # the sample dimension comes from radial centers or an explicit
        # sample_dim attribute; otherwise checks are left to the callers
        dims = [fp.radial.center.shape[0] for fp in frozen if fp.radial is not None]
        dims += [p.sample_dim for p in self.pieces if hasattr(p, "sample_dim")]
        return FrozenLoss(frozen, dim=dims[0] if dims else None)


def _freeze_piece(piece, x: Array) -> FrozenPiece:
    if isinstance(piece, SeparablePiece):
        u = piece.x_part.value(x)
        w = piece.xi_part
        prof = RadialProfile(center=w.center, base=u + w.peak, slope=w.slope, smooth=w.smooth)
        return FrozenPiece(
            value=lambda xi, u=u, w=w: u + w.value(xi),
            supergrad=lambda xi, w=w: w.supergrad(xi),
            xi_lipschitz=w.slope,
            smooth=w.smooth,
            upper_bound=u + w.upper_bound,
            grad_lipschitz=w.grad_lipschitz,
            radial=prof,
        )
    # generic piece protocol: value/subgrad_x/supergrad_xi/xi_lipschitz/smooth/upper_bound
    return FrozenPiece(
        value=lambda xi, p=piece, x=x: p.value(x, xi),
        supergrad=lambda xi, p=piece, x=x: p.supergrad_xi(x, xi),
        xi_lipschitz=piece.xi_lipschitz,
        smooth=piece.smooth,
        upper_bound=piece.upper_bound(x),
        grad_lipschitz=getattr(piece, "grad_lipschitz", None),
        radial=None,
    )


def make_separable_loss(pieces: Iterable) -> LossModel:
    """Build the reference piecewise loss from separable pieces.

    Accepts ``SeparablePiece`` objects or ``(x_part, xi_part)`` tuples.  Every
    sample-side part must be bounded above (the shipped radial families are);
    an unbounded part is rejected because the worst-case expectation would
    not be attained.
    """
    built = []
    for p in pieces:
        if isinstance(p, tuple):
            p = SeparablePiece(x_part=p[0], xi_part=p[1])
        if not isinstance(p, SeparablePiece):
            raise ValueError(f"expected SeparablePiece or (x_part, xi_part), got {type(p)}")
        if not math.isfinite(p.xi_part.upper_bound):
            raise ValueError("sample-side part is unbounded above")
        built.append(p)
    if not built:
        raise ValueError("need at least one piece")
    dims = {p.xi_part.center.shape[0] for p in built}
    if len(dims) != 1:
        raise ValueError("pieces disagree on the sample dimension")
    lip_x = max(p.x_part.lipschitz for p in built)
    lip_xi = max(p.xi_part.slope for p in built)
    return LossModel(pieces=tuple(built), lip_x=lip_x, lip_xi=lip_xi)


# ---------------------------------------------------------------------------
# ambiguity set and sample buffer


@dataclass(frozen=True)
class AmbiguitySpec:
    """Order-1 Wasserstein ball of the given radius around the empirical measure."""

    radius: float
    order: int = 1

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("ambiguity radius must be nonnegative")
        if self.order != 1:
            raise ValueError("only order p=1 transport costs are supported")


@dataclass(frozen=True)
class SampleBuffer:
    """Observed samples; the empirical measure puts weight exactly 1/t on each."""

    samples: Array  # (t, m)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2:
            raise ValueError("samples must be a (t, m) array")
        object.__setattr__(self, "samples", s)

    @staticmethod
    def empty(dim: int) -> "SampleBuffer":
        return SampleBuffer(np.zeros((0, dim)))

    @staticmethod
    def from_rows(rows) -> "SampleBuffer":
        return SampleBuffer(np.atleast_2d(np.asarray(rows, dtype=float)))

    @property
    def t(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def appended(self, xi) -> "SampleBuffer":
        xi = as_vector(xi, dim=self.dim, name="xi")
        return SampleBuffer(np.vstack([self.samples, xi[None, :]]))
