"""Worst-case expectation oracle on a small piecewise concave loss.

Builds the two-cone loss max(-|xi - 1|, -|xi + 1|), solves the worst-case
expectation over transport balls of growing radius around a three-point
empirical measure, and cross-checks each value against the brute-force grid
oracle.  The worst-case measures concentrate on the loss peaks at +-1 as the
radius grows.
"""

import numpy as np

import drolearn as dl

loss = dl.make_separable_loss([
    (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
    (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
])
frozen = loss.at([0.0])
tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)

samples = dl.SampleBuffer.from_rows([[0.0], [0.4], [-0.6]])
empirical = dl.empirical_distribution(samples)
grid = dl.GridSpec(q_points=1001)

print("empirical mean loss:", np.mean([frozen.value(s) for s in samples.samples]))
print(f"{'radius':>8} {'oracle':>10} {'brute':>10} {'W1(Q, emp)':>12}  atoms")
for radius in (0.0, 0.1, 0.25, 0.5, 1.0):
    amb = dl.AmbiguitySpec(radius)
    dist, value = dl.wasserstein_oracle(frozen, samples, amb, tol)
    brute = dl.brute_force_master(frozen, samples, radius, grid)
    w1 = dl.discrete_w1(dist, empirical)
    atoms = ", ".join(
        f"{a[0]:+.3f} (w={w:.2f})" for a, w in zip(dist.atoms, dist.weights) if w > 1e-6
    )
    print(f"{radius:8.2f} {value:10.4f} {brute:10.4f} {w1:12.4f}  {atoms}")

print()
print("The transport cost of every worst-case measure stays within the radius,")
print("and beyond radius ~0.67 all mass sits on the peaks, so the value saturates at 0.")
