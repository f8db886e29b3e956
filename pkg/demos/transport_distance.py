"""Exact 1-Wasserstein distances between small discrete measures.

One-dimensional supports are handled by the sorted quantile coupling;
anything else runs a successive-shortest-path min-cost flow.  On 1-D inputs
the two agree to numerical precision, which is one of the library's
self-consistency checks.
"""

import numpy as np

import drolearn as dl

pairs = [
    ("point masses at 0 and 1",
     dl.DiscreteDistribution([[0.0]], [1.0]),
     dl.DiscreteDistribution([[1.0]], [1.0])),
    ("uniform{0,2} vs uniform{1,3}",
     dl.DiscreteDistribution([[0.0], [2.0]], [0.5, 0.5]),
     dl.DiscreteDistribution([[1.0], [3.0]], [0.5, 0.5])),
    ("lopsided weights",
     dl.DiscreteDistribution([[0.0], [4.0]], [0.9, 0.1]),
     dl.DiscreteDistribution([[1.0]], [1.0])),
]

for label, p, q in pairs:
    sorted_val = dl.discrete_w1(p, q, method="sorted")
    flow_val = dl.discrete_w1(p, q, method="flow")
    print(f"{label:32s} sorted={sorted_val:.6f}  flow={flow_val:.6f}")

rng = np.random.default_rng(1)
p = dl.DiscreteDistribution(rng.uniform(-2, 2, (4, 2)), np.full(4, 0.25))
q = dl.DiscreteDistribution(rng.uniform(-2, 2, (3, 2)), np.array([0.5, 0.3, 0.2]))
print(f"{'random 2-D supports':32s} flow={dl.discrete_w1(p, q):.6f}")
