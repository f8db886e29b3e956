import numpy as np
import pytest

import drolearn as dl
from drolearn.reference import _w1_sorted
from conftest import random_frozen_instance


def dist(atoms, weights=None):
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    n = atoms.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float)
    return dl.DiscreteDistribution(atoms, w)


def test_w1_point_masses():
    assert dl.discrete_w1(dist([[0.0]]), dist([[1.0]])) == pytest.approx(1.0)
    assert dl.discrete_w1(dist([[0.0], [2.0]]), dist([[0.0], [2.0]])) == pytest.approx(0.0)


def test_w1_shifted_uniform_pair():
    p = dist([[0.0], [2.0]])
    q = dist([[1.0], [3.0]])
    assert dl.discrete_w1(p, q) == pytest.approx(1.0)
    assert dl.discrete_w1(p, q, method="flow") == pytest.approx(1.0, abs=1e-9)


def test_w1_weight_mismatch_rejected():
    p = dl.DiscreteDistribution([[0.0]], [1.0])
    q = dl.DiscreteDistribution([[0.0], [1.0]], [0.5, 0.5])
    bad = dl.DiscreteDistribution.__new__(dl.DiscreteDistribution)
    object.__setattr__(bad, "atoms", np.array([[0.0]]))
    object.__setattr__(bad, "weights", np.array([0.9]))
    with pytest.raises(ValueError):
        dl.discrete_w1(p, bad)
    assert dl.discrete_w1(p, q) >= 0


def test_w1_metric_axioms_and_path_agreement():
    rng = np.random.default_rng(79)
    for _ in range(60):
        dim = int(rng.integers(1, 3))
        def rand_dist():
            n = int(rng.integers(1, 6))
            w = rng.uniform(0.1, 1.0, n)
            return dist(rng.uniform(-3, 3, (n, dim)), w / w.sum())
        p, q, r = rand_dist(), rand_dist(), rand_dist()
        method = "flow"
        d_pq = dl.discrete_w1(p, q, method=method)
        d_qp = dl.discrete_w1(q, p, method=method)
        d_pr = dl.discrete_w1(p, r, method=method)
        d_rq = dl.discrete_w1(r, q, method=method)
        assert d_pq >= -1e-12
        assert d_pq == pytest.approx(d_qp, abs=1e-8)
        assert d_pq <= d_pr + d_rq + 1e-8
        assert dl.discrete_w1(p, p, method=method) == pytest.approx(0.0, abs=1e-9)
        if dim == 1:
            assert d_pq == pytest.approx(_w1_sorted(p, q), abs=1e-8)


def test_brute_force_pair_examples(two_cone_frozen):
    grid = dl.GridSpec(q_points=1001)
    xi = np.array([0.0])
    assert dl.brute_force_pair(two_cone_frozen, xi, 0, 1, 0.0, grid) == pytest.approx(-1.0)
    # the grid contains the exact optimizer q = -1 at a unit budget
    assert dl.brute_force_pair(two_cone_frozen, xi, 0, 1, 1.0, grid) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        dl.brute_force_pair(two_cone_frozen, xi, 1, 1, 1.0, grid)
    big = dl.make_separable_loss([
        (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=np.zeros(3))),
        (dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=np.ones(3))),
    ]).at([0.0])
    with pytest.raises(dl.ScaleError):
        dl.brute_force_pair(big, np.zeros(3), 0, 1, 1.0, grid)


def test_brute_force_master_examples(two_cone_frozen):
    grid = dl.GridSpec(q_points=1001)
    buf = dl.SampleBuffer.from_rows([[0.0], [0.5]])
    # zero radius collapses to the empirical mean loss
    want = np.mean([two_cone_frozen.value(s) for s in buf.samples])
    assert dl.brute_force_master(two_cone_frozen, buf, 0.0, grid) == pytest.approx(want)
    # single sample: the master equals the sample utility at the full budget
    one = dl.SampleBuffer.from_rows([[0.0]])
    val_master = dl.brute_force_master(two_cone_frozen, one, 0.5, grid)
    val_pair = dl.brute_force_pair(two_cone_frozen, np.array([0.0]), 0, 1, 0.5, grid)
    assert val_master == pytest.approx(val_pair, abs=1e-9)
    # symmetric two-sample instance: optimum is the equal split
    two = dl.SampleBuffer.from_rows([[0.0], [0.0]])
    val_sym = dl.brute_force_master(two_cone_frozen, two, 0.5, grid)
    assert val_sym == pytest.approx(val_pair, abs=5e-3)
    with pytest.raises(dl.ScaleError):
        dl.brute_force_master(two_cone_frozen, dl.SampleBuffer(np.zeros((5, 1))), 0.1, grid)


def test_brute_force_never_exceeds_the_truth(two_cone_frozen, tol_e3):
    # grid maxima lower-bound the true maximum, which the search value
    # tracks to within its tolerance
    grid = dl.GridSpec(q_points=501)
    rng = np.random.default_rng(83)
    for _ in range(5):
        xi = rng.uniform(-1, 1, 1)
        b = float(rng.uniform(0.1, 1.5))
        brute = dl.brute_force_pair(two_cone_frozen, xi, 0, 1, b, grid)
        ps = dl.pair_utility(two_cone_frozen, xi, 0, 1, b, tol_e3)
        assert brute <= ps.value + 4 * tol_e3.delta_eval + 1e-12


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        dl.GridSpec(alpha_points=5)
    res = dl.GridSpec().value_resolution(1.0, 1, 0.0, 1.0)
    assert res == 0.0


def test_finite_diff_smooth_family():
    loss = dl.make_separable_loss(
        [(dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[0.0], smooth=True))]
    )
    piece = loss.at([0.0]).pieces[0]
    dev = dl.finite_diff_check(piece, [1.0], 1e-5)
    assert dev <= 1e-6
    # locally affine region of the cone family: central differences are exact
    cone = dl.make_separable_loss(
        [(dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.3, slope=0.7, center=[1.0]))]
    ).at([0.0]).pieces[0]
    assert dl.finite_diff_check(cone, [2.5], 1e-5) <= 1e-10
    with pytest.raises(ValueError):
        dl.finite_diff_check(piece, [1.0], 0.0)


def test_finite_diff_second_order_ratio():
    loss = dl.make_separable_loss(
        [(dl.AffinePart(coef=[0.0]), dl.RadialPart(peak=0.0, slope=1.3, center=[0.2, -0.4], smooth=True))]
    )
    piece = loss.at([0.0]).pieces[0]
    xi = np.array([0.9, 0.6])
    d1 = dl.finite_diff_check(piece, xi, 2e-3)
    d2 = dl.finite_diff_check(piece, xi, 1e-3)
    assert d1 / max(d2, 1e-15) >= 2.0  # central differences converge at order h^2


def test_gap_estimate_zero_at_grid_minimizer():
    loss = dl.make_separable_loss([
        (dl.AffinePart(coef=[1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
        (dl.AffinePart(coef=[-1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
    ])
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    amb = dl.AmbiguitySpec(0.2)
    hold = dl.SampleBuffer(np.random.default_rng(3).standard_normal((40, 1)))
    pts = space.axis_grid(17)
    vals = [dl.robust_risk(loss, g, hold, amb, tol) for g in pts]
    x_min = pts[int(np.argmin(vals))]
    gap = dl.gap_estimate(x_min, hold, loss, space, amb, tol, points_per_axis=17)
    assert abs(gap) <= 2 * tol.delta


def test_gap_estimate_zero_radius_is_empirical_excess_risk():
    loss = dl.make_separable_loss([
        (dl.AffinePart(coef=[1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0])),
        (dl.AffinePart(coef=[-1.0]), dl.RadialPart(peak=0.0, slope=1.0, center=[-1.0])),
    ])
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    hold = dl.SampleBuffer(np.random.default_rng(9).standard_normal((30, 1)))
    x_bar = np.array([0.5])
    gap = dl.gap_estimate(x_bar, hold, loss, space, dl.AmbiguitySpec(0.0), tol, points_per_axis=21)
    emp = np.mean([loss.value(x_bar, s) for s in hold.samples])
    grid_min = min(
        np.mean([loss.value(g, s) for s in hold.samples]) for g in space.axis_grid(21)
    )
    assert gap == pytest.approx(emp - grid_min, abs=2 * tol.delta)


def test_gap_estimate_scale_guard():
    loss = dl.make_separable_loss(
        [(dl.AffinePart(coef=np.zeros(3)), dl.RadialPart(peak=0.0, slope=1.0, center=[0.0]))]
    )
    space = dl.DecisionSpace.box(np.zeros(3), np.ones(3))
    tol = dl.ToleranceConfig.from_delta(1e-3, 1.0)
    with pytest.raises(dl.ScaleError):
        dl.gap_estimate(np.zeros(3), dl.SampleBuffer(np.zeros((2, 1))), loss, space,
                        dl.AmbiguitySpec(0.1), tol)


def test_master_brute_force_agreement_on_random_instances():
    rng = np.random.default_rng(89)
    for _ in range(6):
        loss, frozen, m = random_frozen_instance(rng)
        tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
        t = int(rng.integers(1, 5))
        buf = dl.SampleBuffer(rng.uniform(-1.5, 1.5, (t, m)))
        rho = float(rng.choice([0.1, 0.5]))
        grid = dl.GridSpec(q_points=1001 if m == 1 else 201)
        brute = dl.brute_force_master(frozen, buf, rho, grid)
        _, val = dl.wasserstein_oracle(frozen, buf, dl.AmbiguitySpec(rho), tol)
        res = grid.value_resolution(loss.lip_xi, m, rho * t,
                                    float(np.max(np.linalg.norm(buf.samples, axis=1))))
        assert abs(val - brute) <= tol.delta + res
