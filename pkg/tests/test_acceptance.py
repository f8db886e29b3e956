"""Acceptance suite: one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``.  The slowest pieces are
criterion 1/2 (around 200 brute-force comparisons) and criterion 6 (five
streaming runs to horizon 800 plus an out-of-sample risk sweep).
"""

import math
import time

import numpy as np
import pytest

import drolearn as dl
from conftest import reference_learning_loss

RNG_SEED = 20250809


def _random_instance(rng, rho):
    m = int(rng.integers(1, 3))
    n_pieces = int(rng.integers(1, 4))
    t = int(rng.integers(1, 5))
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
    samples = dl.SampleBuffer(rng.uniform(-1.5, 1.5, (t, m)))
    return loss, loss.at(np.zeros(1)), samples


@pytest.fixture(scope="module")
def oracle_corpus():
    """Criterion 1/2 shared corpus: 200 solved desk-scale instances."""
    rng = np.random.default_rng(RNG_SEED)
    radii = [0.0, 0.1, 0.5, 1.0]
    records = []
    t_start = time.perf_counter()
    for idx in range(200):
        rho = radii[idx % len(radii)]
        loss, frozen, samples = _random_instance(rng, rho)
        tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
        dist, value = dl.wasserstein_oracle(frozen, samples, dl.AmbiguitySpec(rho), tol)
        m = samples.dim
        grid = dl.GridSpec(alpha_points=201, beta_points=201,
                           q_points=1001 if m == 1 else 201, b_points=201)
        brute = dl.brute_force_master(frozen, samples, rho, grid)
        xi_norm = float(np.max(np.linalg.norm(samples.samples, axis=1)))
        resolution = grid.value_resolution(loss.lip_xi, m, rho * samples.t, xi_norm)
        records.append(
            dict(loss=loss, frozen=frozen, samples=samples, rho=rho, tol=tol,
                 value=value, dist=dist, brute=brute, resolution=resolution)
        )
    return dict(records=records, elapsed=time.perf_counter() - t_start)


def test_criterion_1_oracle_equivalence(oracle_corpus):
    records = oracle_corpus["records"]
    elapsed = oracle_corpus["elapsed"]
    worst = -math.inf
    failures = 0
    for rec in records:
        margin = rec["tol"].delta + rec["resolution"]
        dev = abs(rec["value"] - rec["brute"])
        worst = max(worst, dev - margin)
        if dev > margin:
            failures += 1
    ok = failures == 0 and elapsed < 300.0
    print(
        f"[criterion 1] {'PASS' if ok else 'FAIL'}: oracle vs brute force on "
        f"{len(records)} instances, failures={failures}, "
        f"worst dev-margin={worst:.3e}, runtime={elapsed:.0f}s (< 300s)"
    )
    assert failures == 0
    assert elapsed < 300.0


def test_criterion_2_transport_feasibility(oracle_corpus):
    records = oracle_corpus["records"]
    violations = 0
    worst = -math.inf
    for rec in records:
        emp = dl.empirical_distribution(rec["samples"])
        w1 = dl.discrete_w1(rec["dist"], emp)
        slack = rec["rho"] + rec["tol"].eta_b + 1e-8
        worst = max(worst, w1 - slack)
        if w1 > slack:
            violations += 1
    ok = violations == 0
    print(
        f"[criterion 2] {'PASS' if ok else 'FAIL'}: transport distance within "
        f"radius + eta_b on {len(records)} worst-case measures, "
        f"violations={violations}, worst excess={worst:.3e}"
    )
    assert violations == 0


def test_criterion_3_utility_structure():
    rng = np.random.default_rng(RNG_SEED + 1)
    checks = 0
    failures = []
    while checks < 100:
        loss, frozen, samples = _random_instance(rng, 0.0)
        tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
        d_eval = tol.delta_eval
        xi = samples.samples[0]
        b1, b2 = np.sort(rng.uniform(0.0, 2.5, 2))
        v1, _ = dl.sample_utility(frozen, xi, b1, tol)
        v2, _ = dl.sample_utility(frozen, xi, b2, tol)
        vm, _ = dl.sample_utility(frozen, xi, 0.5 * (b1 + b2), tol)
        if not v2 >= v1 - 8 * d_eval:
            failures.append("monotone")
        if not vm >= 0.5 * (v1 + v2) - 12 * d_eval:
            failures.append("concave")
        if not abs(v2 - v1) <= loss.lip_xi * (b2 - b1) + 8 * d_eval:
            failures.append("lipschitz")
        checks += 1
    ok = not failures
    print(
        f"[criterion 3] {'PASS' if ok else 'FAIL'}: utility monotone/concave/"
        f"Lipschitz on {checks} random triples, failures={len(failures)}"
    )
    assert not failures


def test_criterion_4_dual_monotonicity():
    rng = np.random.default_rng(RNG_SEED + 2)
    violations = 0
    instances = 0
    for _ in range(25):
        loss, frozen, samples = _random_instance(rng, 0.0)
        tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
        t = samples.t
        rho_t = 2.0
        lams = np.linspace(0.0, loss.lip_xi, 6)
        totals = []
        for lam in lams:
            total = sum(
                dl.solve_subproblem(frozen, samples.samples[i], lam, rho_t, tol)[0]
                for i in range(t)
            )
            totals.append(total)
        for small, large in zip(totals, totals[1:]):
            if large > small + 2 * t * tol.eta_b:
                violations += 1
        instances += 1
    ok = violations == 0
    print(
        f"[criterion 4] {'PASS' if ok else 'FAIL'}: total budget non-increasing "
        f"along the price grid on {instances} instances, violations={violations}"
    )
    assert violations == 0


def test_criterion_5_regret_bound():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    amb = dl.AmbiguitySpec(0.2)
    delta = 1e-2
    tol = dl.ToleranceConfig.from_delta(delta, loss.lip_xi)
    stream = np.random.default_rng(RNG_SEED + 3).standard_normal((400, 1))
    t_start = time.perf_counter()

    # offline comparator: grid minimizer of the robust risk over the ball
    # centered at the full stream
    buffer = dl.SampleBuffer(stream)
    grid = space.axis_grid(41)
    comparator = grid[int(np.argmin([dl.robust_risk(loss, g, buffer, amb, tol) for g in grid]))]

    trace = dl.run(loss, space, amb, tol, stream, 400, comparator=comparator)
    elapsed = time.perf_counter() - t_start

    failures = []
    report = []
    for horizon in (50, 100, 200, 400):
        bound = loss.lip_x * space.diameter * (1 + math.log(horizon)) / math.sqrt(horizon) + 2 * delta
        regret = trace.prefix_avg_regret(horizon)
        report.append(f"T={horizon}: {regret:.4f} <= {bound:.4f}")
        if regret > bound:
            failures.append(horizon)
    ok = not failures and elapsed < 120.0
    print(
        f"[criterion 5] {'PASS' if ok else 'FAIL'}: average regret within the "
        f"step-size bound at every checkpoint ({'; '.join(report)}), "
        f"runtime={elapsed:.0f}s (< 120s)"
    )
    assert not failures
    assert elapsed < 120.0


def test_criterion_6_gap_rate():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    amb = dl.AmbiguitySpec(0.2)
    tol_run = dl.ToleranceConfig.from_delta(2e-2, loss.lip_xi)
    tol_gap = dl.ToleranceConfig.from_delta(5e-3, loss.lip_xi)
    checkpoints = [50, 100, 200, 400, 800]
    seeds = [RNG_SEED + k for k in range(5)]
    gap_floor = 1e-4

    holdout = dl.SampleBuffer(np.random.default_rng(424242).standard_normal((2048, 1)))
    grid = space.axis_grid(33)
    grid_min = min(dl.robust_risk(loss, g, holdout, amb, tol_gap) for g in grid)

    log_t, log_gap = [], []
    per_seed = []
    for seed in seeds:
        stream = np.random.default_rng(seed).standard_normal((800, 1))
        trace = dl.run(loss, space, amb, tol_run, stream, 800, comparator=[0.0])
        gaps = []
        for horizon in checkpoints:
            x_bar = trace.x_bar_at(horizon)
            gap = dl.robust_risk(loss, x_bar, holdout, amb, tol_gap) - grid_min
            gaps.append(max(gap, gap_floor))
        per_seed.append(gaps)
        log_t.extend(np.log(checkpoints))
        log_gap.extend(np.log(gaps))
    slope = float(np.polyfit(log_t, log_gap, 1)[0])
    ok = slope <= -0.35
    print(
        f"[criterion 6] {'PASS' if ok else 'FAIL'}: log-gap vs log-T slope "
        f"{slope:.3f} <= -0.35 over {len(seeds)} seeds "
        f"(mean gaps {[round(float(np.mean(g)), 5) for g in np.array(per_seed).T]})"
    )
    assert slope <= -0.35


def test_criterion_7_zero_radius_degeneration():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    stream = np.random.default_rng(RNG_SEED + 4).standard_normal((100, 1))

    state = dl.initial_state(space, sample_dim=1, x0=[0.0])
    iterates = [state.x]
    for xi in stream:
        state, _ = dl.step(state, xi, loss, space, dl.AmbiguitySpec(0.0), tol)
        iterates.append(state.x)

    # standalone online projected subgradient on the empirical atoms
    x = np.zeros(1)
    worst = 0.0
    seen = []
    for t, xi in enumerate(stream, start=1):
        seen.append(np.asarray(xi))
        grad = np.mean([loss.subgrad_x(x, s) for s in seen], axis=0)
        x = space.project(x - dl.step_size(t, space.diameter, loss.lip_x) * grad)
        worst = max(worst, float(np.max(np.abs(iterates[t] - x))))
    ok = worst <= 1e-10
    print(
        f"[criterion 7] {'PASS' if ok else 'FAIL'}: zero-radius trajectory matches "
        f"plain projected subgradient over 100 rounds, max deviation={worst:.2e} <= 1e-10"
    )
    assert worst <= 1e-10


def test_criterion_8_validator_self_consistency():
    rng = np.random.default_rng(RNG_SEED + 5)
    metric_failures = 0
    for _ in range(100):
        dim = int(rng.integers(1, 3))

        def rand_dist():
            n = int(rng.integers(1, 5))
            w = rng.uniform(0.1, 1.0, n)
            return dl.DiscreteDistribution(rng.uniform(-3, 3, (n, dim)), w / w.sum())

        p, q, r = rand_dist(), rand_dist(), rand_dist()
        d_pq = dl.discrete_w1(p, q, method="flow")
        d_qp = dl.discrete_w1(q, p, method="flow")
        d_pr = dl.discrete_w1(p, r, method="flow")
        d_rq = dl.discrete_w1(r, q, method="flow")
        d_pp = dl.discrete_w1(p, p, method="flow")
        if d_pq < -1e-12 or abs(d_pq - d_qp) > 1e-8 or d_pq > d_pr + d_rq + 1e-8 or abs(d_pp) > 1e-9:
            metric_failures += 1

    grad_failures = 0
    for _ in range(50):
        m = int(rng.integers(1, 3))
        loss = dl.make_separable_loss(
            [
                (
                    dl.AffinePart(coef=[0.0]),
                    dl.RadialPart(peak=float(rng.uniform(-1, 1)), slope=float(rng.uniform(0.3, 2.0)),
                                  center=rng.uniform(-1, 1, m), smooth=True),
                )
            ]
        )
        piece = loss.at([0.0]).pieces[0]
        if dl.finite_diff_check(piece, rng.uniform(-2, 2, m), 1e-5) > 1e-6:
            grad_failures += 1
    ok = metric_failures == 0 and grad_failures == 0
    print(
        f"[criterion 8] {'PASS' if ok else 'FAIL'}: transport metric axioms on 100 "
        f"triples (failures={metric_failures}); smooth-piece gradient deviations "
        f"<= 1e-6 on 50 checks (failures={grad_failures})"
    )
    assert metric_failures == 0
    assert grad_failures == 0
