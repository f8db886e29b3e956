"""Streaming robust learning on the 1-D reference problem.

Each round reveals one Gaussian sample; the learner best-responds to the
worst distribution within transport radius 0.2 of everything seen so far and
takes a projected subgradient step.  The average regret against the offline
comparator obeys the lip_x * diameter * (1 + log T) / sqrt(T) bound.
"""

import math

import numpy as np

import drolearn as dl

loss = dl.make_separable_loss([
    (dl.AffinePart(coef=[1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
    (dl.AffinePart(coef=[-1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
])
space = dl.DecisionSpace.box([-1.0], [1.0])
amb = dl.AmbiguitySpec(0.2)
tol = dl.ToleranceConfig.from_delta(1e-2, loss.lip_xi)

horizon = 200
stream = np.random.default_rng(7).standard_normal((horizon, 1))

# offline comparator: the robust-risk grid minimizer over the full stream
buffer = dl.SampleBuffer(stream)
grid = space.axis_grid(41)
risks = [dl.robust_risk(loss, g, buffer, amb, tol) for g in grid]
comparator = grid[int(np.argmin(risks))]
print(f"offline comparator: x = {comparator[0]:+.3f} with robust risk {min(risks):.4f}")

trace = dl.run(loss, space, amb, tol, stream, horizon, comparator=comparator)

print(f"{'T':>6} {'avg regret':>12} {'bound':>10} {'x_bar':>8} {'lam':>8}")
for horizon_check in (25, 50, 100, 200):
    bound = (
        loss.lip_x * space.diameter * (1 + math.log(horizon_check)) / math.sqrt(horizon_check)
        + 2 * tol.delta
    )
    row = trace.rows[horizon_check - 1]
    print(
        f"{horizon_check:6d} {trace.prefix_avg_regret(horizon_check):12.4f} "
        f"{bound:10.4f} {row.x_bar[0]:+8.3f} {row.lam:8.3f}"
    )
print(f"\nfinal averaged decision: {trace.x_bar[0]:+.4f}")
