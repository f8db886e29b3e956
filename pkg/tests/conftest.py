import numpy as np
import pytest

import drolearn as dl


def two_cone_pieces():
    """The workhorse 1-D instance: max(-|xi - 1|, -|xi + 1|), no x part."""
    return [
        (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
        (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
    ]


@pytest.fixture(scope="session")
def two_cone_loss():
    return dl.make_separable_loss(two_cone_pieces())


@pytest.fixture(scope="session")
def two_cone_frozen(two_cone_loss):
    return two_cone_loss.at([0.0])


@pytest.fixture(scope="session")
def tol_e3(two_cone_loss):
    return dl.ToleranceConfig.from_delta(1e-3, two_cone_loss.lip_xi)


def reference_learning_loss():
    """1-D loss with real x dependence: max(x - |xi-1|, -x - |xi+1|)."""
    return dl.make_separable_loss([
        (dl.AffinePart(coef=[1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
        (dl.AffinePart(coef=[-1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
    ])


def random_frozen_instance(rng, dim=None, max_pieces=3):
    """Random desk-scale frozen loss plus its LossModel, mixed cone/smooth."""
    m = int(rng.integers(1, 3)) if dim is None else dim
    n_pieces = int(rng.integers(1, max_pieces + 1))
    pieces = []
    for _ in range(n_pieces):
        pieces.append(
            (
                dl.AffinePart(coef=np.zeros(1), offset=float(rng.uniform(-1, 1))),
                dl.RadialPart(
                    peak=float(rng.uniform(-1, 1)),
                    slope=float(rng.uniform(0.3, 2.0)),
                    center=rng.uniform(-1.5, 1.5, m),
                    smooth=bool(rng.integers(0, 2)),
                ),
            )
        )
    loss = dl.make_separable_loss(pieces)
    return loss, loss.at(np.zeros(1)), m


class CappedL1Piece:
    """Generic non-radial test piece: min(cap, peak - slope * ||xi - center||_1).

    Concave, bounded above, nonsmooth; exercises the iterative inner
    maximization because it carries no radial structure.
    """

    def __init__(self, peak, slope, center, cap):
        self.peak = float(peak)
        self.slope = float(slope)
        self.center = np.asarray(center, dtype=float)
        self.cap = float(cap)
        self.smooth = False

    @property
    def xi_lipschitz(self):
        return self.slope * np.sqrt(self.center.shape[0])

    def value(self, x, xi):
        return min(self.cap, self.peak - self.slope * float(np.sum(np.abs(xi - self.center))))

    def subgrad_x(self, x, xi):
        return np.zeros_like(np.atleast_1d(x))

    def supergrad_xi(self, x, xi):
        base = self.peak - self.slope * float(np.sum(np.abs(xi - self.center)))
        if base > self.cap:
            return np.zeros_like(self.center)
        return -self.slope * np.sign(xi - self.center)

    def upper_bound(self, x):
        return min(self.cap, self.peak)
