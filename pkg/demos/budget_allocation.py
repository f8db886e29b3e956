"""Dual decomposition of the worst-case problem as budget allocation.

For each candidate price lam, every sample independently maximizes
utility(b) - lam * b; the bisection hunts the price at which total demand
matches the available transport budget radius * t.  This script prints the
per-sample demand curves and the allocation the oracle settles on.
"""

import numpy as np

import drolearn as dl

loss = dl.make_separable_loss([
    (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
    (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=-0.2, slope=0.6, center=[-1.5])),
])
frozen = loss.at([0.0])
tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)

samples = dl.SampleBuffer.from_rows([[0.0], [0.8], [-0.9]])
rho = 0.3
rho_t = rho * samples.t

print("utility saturation: each sample stops benefiting once its atom reaches a peak")
print(f"{'lam':>6}", *[f"  b_{i}(lam)" for i in range(samples.t)], "   total")
for lam in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
    budgets = [
        dl.solve_subproblem(frozen, samples.samples[i], lam, rho_t, tol)[0]
        for i in range(samples.t)
    ]
    print(f"{lam:6.2f}", *[f"{b:10.4f}" for b in budgets], f"{sum(budgets):8.4f}")

alloc = dl.allocate_budget(frozen, samples, dl.AmbiguitySpec(rho), tol)
print()
print(f"allocation at radius {rho}: budgets={np.round(alloc.budgets, 4)}")
print(f"price lam_hat={alloc.lam:.4f}, spent={alloc.total:.4f} (cap {rho_t})")
print(f"worst-case expectation: {alloc.objective:.4f}")

dist = dl.assemble_worst_case(samples, alloc)
print("worst-case atoms:")
for a, w in zip(dist.atoms, dist.weights):
    if w > 1e-6:
        print(f"  {a[0]:+.4f}  weight {w:.4f}")
