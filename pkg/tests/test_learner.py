import numpy as np
import pytest

import drolearn as dl
from drolearn.learner import initial_state, step
from conftest import reference_learning_loss


def test_step_size_examples():
    assert dl.step_size(1, 2.0, 1.0) == pytest.approx(2.0)
    assert dl.step_size(4, 2.0, 1.0) == pytest.approx(1.0)
    assert dl.step_size(100, 1.0, 2.0) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        dl.step_size(0, 2.0, 1.0)


def test_first_step_clamps_to_the_box():
    # at x=0 and xi=1 the active piece is x - |xi-1| with subgradient +1;
    # eta_1 = D/G = 2, so the update 0 - 2*1 clamps to the box edge
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    state = initial_state(space, sample_dim=1, x0=[0.0])
    state, rec = step(state, [1.0], loss, space, dl.AmbiguitySpec(0.0), tol)
    assert state.x == pytest.approx([-1.0])
    assert rec.eta == pytest.approx(2.0)
    assert rec.f_current == pytest.approx(0.0)  # x - |xi - 1| at (0, 1)


def test_zero_subgradient_is_a_fixed_point():
    # the decision part kinks at 0.3, where the chosen subgradient is zero
    loss = dl.make_separable_loss(
        [(dl.AbsDevPart(scale=1.0, anchor=[0.3]), dl.RadialPart(peak=0.0, slope=1.0, center=[1.0]))]
    )
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    state = initial_state(space, sample_dim=1, x0=[0.3])
    state2, _ = step(state, [0.5], loss, space, dl.AmbiguitySpec(0.1), tol)
    np.testing.assert_allclose(state2.x, state.x)


def test_zero_radius_matches_plain_projected_subgradient():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    rng = np.random.default_rng(71)
    stream = rng.standard_normal((30, 1))

    state = initial_state(space, sample_dim=1, x0=[0.0])
    xs = [state.x]
    for xi in stream:
        state, _ = step(state, xi, loss, space, dl.AmbiguitySpec(0.0), tol)
        xs.append(state.x)

    # standalone online projected subgradient on the empirical atoms
    x = np.zeros(1)
    xs_ref = [x]
    seen = []
    for t, xi in enumerate(stream, start=1):
        seen.append(np.asarray(xi))
        grad = np.mean([loss.subgrad_x(x, s) for s in seen], axis=0)
        x = space.project(x - dl.step_size(t, space.diameter, loss.lip_x) * grad)
        xs_ref.append(x)

    for a, b in zip(xs, xs_ref):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_iterate_average_identity():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    rng = np.random.default_rng(73)
    state = initial_state(space, sample_dim=1, x0=[0.4])
    seen = [state.x]
    for xi in rng.standard_normal((15, 1)):
        prev = state
        state, _ = step(state, xi, loss, space, dl.AmbiguitySpec(0.1), tol)
        seen.append(state.x)
        n = prev.t + 1
        expected = (n * prev.x_bar + state.x) / (n + 1)
        assert np.linalg.norm(state.x_bar - expected) <= 1e-12
        np.testing.assert_allclose(state.x_bar, np.mean(seen, axis=0), atol=1e-12)
        assert space.contains(state.x)
        assert space.contains(state.x_bar)


def test_run_single_round_returns_first_iterate():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    trace = dl.run(loss, space, dl.AmbiguitySpec(0.1), tol,
                   [[0.5]], 1, comparator=[0.0], x0=[0.25])
    assert trace.x_bar == pytest.approx([0.25])
    assert len(trace.rows) == 1


def test_run_deterministic_trace():
    from drolearn.bench_cli import write_trace
    import tempfile, pathlib

    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-2, loss.lip_xi)
    stream = np.random.default_rng(5).standard_normal((25, 1))
    texts = []
    for _ in range(2):
        trace = dl.run(loss, space, dl.AmbiguitySpec(0.2), tol, stream, 25, comparator=[0.1])
        with tempfile.TemporaryDirectory() as d:
            p = pathlib.Path(d) / "trace.tsv"
            write_trace(p, trace)
            texts.append(p.read_bytes())
    assert texts[0] == texts[1]


def test_run_stream_exhaustion_carries_partial_trace():
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    with pytest.raises(dl.StreamExhausted) as err:
        dl.run(loss, space, dl.AmbiguitySpec(0.1), tol,
               [[0.1], [0.2]], 5, comparator=[0.0])
    assert err.value.round_reached == 2
    assert len(err.value.trace.rows) == 2


def test_single_atom_stream_converges_to_pointwise_minimizer():
    # with rho = 0 and a single repeated atom the run is plain subgradient
    # descent on l(., xi); the averaged iterate obeys the regret-rate bound
    loss = reference_learning_loss()
    space = dl.DecisionSpace.box([-1.0], [1.0])
    tol = dl.ToleranceConfig.from_delta(1e-3, loss.lip_xi)
    atom = np.array([0.3])
    horizon = 100
    stream = np.tile(atom, (horizon, 1))
    # closed form: max(x - 0.7, -x - 1.3) is minimized at the crossing -0.3
    x_star, f_star = -0.3, -1.0
    trace = dl.run(loss, space, dl.AmbiguitySpec(0.0), tol, stream, horizon, comparator=[x_star])
    bound = loss.lip_x * space.diameter * (1 + np.log(horizon)) / np.sqrt(horizon)
    assert loss.value(trace.x_bar, atom) - f_star <= bound
    assert abs(trace.x_bar[0] - x_star) <= 0.5
