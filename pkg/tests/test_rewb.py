import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from adversary.attack import AttackPolicy, measure_all
from adversary.trajectory import ParameterTrajectory, theta_star
from graph.balancing import balance_weights
from graph.digraph import bidirectional_ring, generate_random_digraph
from protocol.params import ProtocolParams
from protocol.rewb import (
    GammaSystem,
    advance,
    gamma_coefficient_threshold,
    gamma_step,
    initial_gamma,
    innovation_gain,
    innovation_gains,
    local_update,
    rewb_step,
    rewb_step_agentwise,
    rewb_step_matrix,
    row_blocks,
    simulate_gamma,
)
from utils.errors import DimensionError, DivergenceError, ValidationError


@pytest.mark.parametrize("y, x, gamma, expected", [
    ([3.0, 4.0], [0.0, 0.0], 10.0, 1.0),
    ([3.0, 4.0], [0.0, 0.0], 5.0, 1.0),
    ([3.0, 4.0], [0.0, 0.0], 2.5, 0.5),
    ([1.0], [1.0], 0.0, 1.0),
    ([2.0], [1.0], 0.0, 0.0),
])
def test_innovation_gain(y, x, gamma, expected):
    assert innovation_gain(y, x, gamma) == pytest.approx(expected)


def test_gain_caps_step_norm():
    y = np.array([[30.0, 40.0], [0.5, 0.0]])
    x = np.zeros((2, 2))
    gains = innovation_gains(y, x, 5.0)
    np.testing.assert_allclose(gains, [0.1, 1.0])
    steps = gains[:, np.newaxis] * (y - x)
    assert np.all(np.linalg.norm(steps, axis=1) <= 5.0 + 1e-12)


def test_negative_gamma_rejected():
    with pytest.raises(ValidationError):
        innovation_gain([1.0], [0.0], -1.0)


def test_gamma_first_step():
    params = ProtocolParams()
    gs = gamma_step(initial_gamma(params), params, n=100)
    assert gs.t == 1
    assert gs.gamma1 == pytest.approx(80.5)
    assert gs.gamma2 == pytest.approx(50.905)
    assert gs.gamma == pytest.approx(131.405)


def test_simulate_gamma_matches_stepwise():
    params = ProtocolParams()
    trajectory = simulate_gamma(params, 100, 50)
    gs = initial_gamma(params)
    for _ in range(50):
        gs = gamma_step(gs, params, 100)
    assert trajectory.gamma1[-1] == pytest.approx(gs.gamma1, rel=1e-12)
    assert trajectory.gamma2[-1] == pytest.approx(gs.gamma2, rel=1e-12)


def test_zero_stays_near_zero_without_forcing():
    # c2 = 0 и быстро затухающий член 1/(1+t)^theta1 начиная с t = 1
    params = ProtocolParams(c2=0.0, theta1=200.0)
    gs = GammaSystem(gamma1=0.0, gamma2=0.0, t=1)
    for _ in range(20):
        gs = gamma_step(gs, params, 10)
    assert gs.t == 21
    assert abs(gs.gamma) < 1e-50


def test_gamma_stays_nonnegative():
    trajectory = simulate_gamma(ProtocolParams(), 100, 20000)
    assert np.all(trajectory.gamma >= 0)


def test_gamma_system_long_horizon():
    horizon = 10 ** 6
    trajectory = simulate_gamma(ProtocolParams(), 100, horizon)
    gamma = trajectory.gamma

    assert np.all(np.isfinite(trajectory.gamma1))
    assert np.all(np.isfinite(trajectory.gamma2))
    assert np.all(np.diff(gamma[1000:]) <= 0)
    assert gamma[-1] < 0.2 * gamma.max()

    scaled = (np.arange(horizon + 1) + 1.0) ** 0.025 * gamma
    assert scaled[10 ** 5:].max() <= scaled[:10 ** 5].max()


def test_coefficient_threshold_for_published_parameters():
    assert gamma_coefficient_threshold(ProtocolParams(), 100, 10 ** 5) is None
    assert gamma_coefficient_threshold(ProtocolParams(c1=0.1), 100, 1000) == 0


def test_divergent_gamma_detected():
    params = ProtocolParams(alpha0=5.0, alpha1=0.02, mu1=0.015, beta1=0.01, s=0.0)
    with pytest.raises(DivergenceError):
        simulate_gamma(params, 10 ** 6, 20000)


def test_row_blocks_cover_rows():
    blocks = row_blocks(10, 3)
    covered = np.concatenate([np.arange(10)[b] for b in blocks])
    np.testing.assert_array_equal(covered, np.arange(10))
    assert len(row_blocks(2, 8)) == 2


def test_agent_update_uses_local_data_only(fig1):
    params = ProtocolParams()
    x = np.array([[1.0], [5.0], [9.0]])
    w = np.array([0.2, 0.6, 0.4])
    y = np.array([[2.0], [2.0], [20.0]])

    expected = rewb_step_agentwise(x, w, y, 3.0, params, fig1, t=4)
    neighbors = fig1.in_neighbors(1)
    single = local_update(x[1], x[neighbors], w[neighbors], w[1], int(fig1.out_degree[1]), y[1], 3.0,
                          0.01 / 5 ** 0.075, 0.01 / 5 ** 0.01)
    np.testing.assert_allclose(single, expected[1], rtol=1e-14)


@given(seed=st.integers(0, 2 ** 32), n=st.integers(2, 9), m=st.integers(1, 3), t=st.integers(0, 1000))
def test_three_forms_agree(seed, n, m, t):
    g = generate_random_digraph(n, 0.5, seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, m))
    y = rng.normal(size=(n, m)) * 5
    w = rng.uniform(0.05, 1.0, size=n)
    params = ProtocolParams()

    vectorized = rewb_step(x, w, y, 2.0, params, g, t)
    np.testing.assert_allclose(rewb_step_agentwise(x, w, y, 2.0, params, g, t), vectorized, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(rewb_step_matrix(x, w, y, 2.0, params, g, t), vectorized, rtol=1e-12, atol=1e-12)


def test_block_partition_is_bit_identical():
    g = generate_random_digraph(40, 0.3, seed=8)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 2))
    y = rng.normal(size=(40, 2))
    w = rng.uniform(0.1, 1.0, size=40)
    params = ProtocolParams()

    serial = advance(x, w, y, 1.0, params, g, 3)
    with ThreadPoolExecutor(max_workers=4) as executor:
        parallel = advance(x, w, y, 1.0, params, g, 3, executor=executor, blocks=row_blocks(40, 7))
    np.testing.assert_array_equal(serial.x, parallel.x)
    np.testing.assert_array_equal(serial.gains, parallel.gains)


def test_balanced_weights_preserve_consensus(fig1):
    w_inf = balance_weights(fig1, np.full(3, 0.1)).w_inf
    x = np.full((3, 1), 7.0)
    following = rewb_step(x, w_inf, x.copy(), 1.0, ProtocolParams(), fig1, 0)
    np.testing.assert_allclose(following, x, atol=1e-12)


def test_unit_weights_break_consensus_on_unbalanced_graph(fig1):
    x = np.full((3, 1), 7.0)
    following = rewb_step(x, np.ones(3), x.copy(), 1.0, ProtocolParams(), fig1, 0)
    assert np.max(np.abs(following - x)) > 1e-3


def test_consensus_step_conserves_sum(fig1):
    x = np.array([[1.0], [5.0], [9.0]])
    following = rewb_step(x, np.array([0.3, 0.2, 0.9]), np.zeros((3, 1)), 1.0, ProtocolParams(), fig1, 0,
                          innovation=False)
    assert following.sum() == pytest.approx(15.0, rel=1e-14)


def test_round_input_checks(fig1):
    params = ProtocolParams()
    with pytest.raises(DimensionError):
        rewb_step(np.zeros((2, 1)), np.ones(3), np.zeros((2, 1)), 1.0, params, fig1, 0)
    with pytest.raises(DimensionError):
        rewb_step(np.zeros((3, 1)), np.ones(3), np.zeros((3, 2)), 1.0, params, fig1, 0)
    with pytest.raises(DivergenceError):
        rewb_step(np.full((3, 1), np.nan), np.ones(3), np.zeros((3, 1)), 1.0, params, fig1, 0)


def test_symmetric_ring_with_unit_weights_is_balanced():
    g = bidirectional_ring(5)
    x = np.full((5, 1), -2.0)
    following = rewb_step(x, np.ones(5), x.copy(), 1.0, ProtocolParams(), g, 10)
    np.testing.assert_allclose(following, x, atol=1e-14)
    assert math.isclose(float(following.mean()), -2.0)


@given(seed=st.integers(0, 2 ** 32), n=st.integers(4, 9), t=st.integers(0, 1000), shift=st.floats(-1e3, 1e3))
def test_agent_ignores_non_neighbors(seed, n, t, shift):
    g = generate_random_digraph(n, 0.3, seed)
    rng = np.random.default_rng(seed)
    i = int(rng.integers(n))
    outsiders = np.setdiff1d(np.arange(n), np.append(g.in_neighbors(i), i))
    assume(outsiders.size > 0)
    j = int(rng.choice(outsiders))

    x = rng.normal(size=(n, 2))
    y = rng.normal(size=(n, 2)) * 5
    w = rng.uniform(0.05, 1.0, size=n)
    params = ProtocolParams()
    before = rewb_step(x, w, y, 2.0, params, g, t)

    x[j] += shift
    y[j] -= shift
    w[j] *= 3.0
    after = rewb_step(x, w, y, 2.0, params, g, t)
    np.testing.assert_array_equal(after[i], before[i])


def test_good_agents_take_full_gain_inside_gamma():
    g = bidirectional_ring(8)
    params = ProtocolParams()
    policy = AttackPolicy(s=0.25, seed=2)
    traj = ParameterTrajectory()
    rng = np.random.default_rng(1)
    gamma = 30.0

    checked = 0
    for t in range(50):
        x = theta_star(traj, t) + rng.uniform(-40.0, 40.0, size=(8, 1))
        y, mask = measure_all(traj, policy, t, 8)
        gains = advance(x, np.full(8, 0.1), y, gamma, params, g, t).gains
        inside = ~mask & (np.linalg.norm(theta_star(traj, t) - x, axis=1) <= gamma)
        np.testing.assert_array_equal(gains[inside], 1.0)
        checked += int(inside.sum())
    assert checked > 0
