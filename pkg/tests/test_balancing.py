import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graph.balancing import (
    BalancingState,
    balance_relative,
    balance_residual,
    balance_weights,
    balancing_initial_bound,
    default_max_iterations,
    fit_geometric_envelope,
    laplacian,
    psi,
    weight_update_step,
)
from graph.digraph import bidirectional_ring, generate_random_digraph
from utils.errors import BalancingError, DimensionError, NotStronglyConnectedError, ValidationError


def _exact_balancing(g):
    """Нормированное решение w_i d_i^out = sum_{j in N_i} w_j (ядро D^out - A)"""
    base = np.diag(g.out_degree.astype(float)) - g.adjacency
    _, _, vh = np.linalg.svd(base)
    kernel = np.abs(vh[-1])
    return kernel / kernel.max()


def test_single_step_from_unit_weights(fig1):
    np.testing.assert_allclose(weight_update_step(fig1, np.ones(3)), [0.75, 1.5, 1.0])


def test_state_step_increments_counter(fig1):
    state = BalancingState(w=np.ones(3)).step(fig1)
    assert state.t == 1
    np.testing.assert_allclose(state.w, [0.75, 1.5, 1.0])


def test_unit_weights_do_not_balance_fixture(fig1):
    lap = laplacian(fig1, np.ones(3))
    np.testing.assert_allclose(lap.sum(axis=0), np.zeros(3), atol=1e-15)
    assert np.max(np.abs(lap @ np.ones(3))) > 0.5


def test_fixture_converges_to_known_weights(fig1):
    result = balance_weights(fig1, np.full(3, 0.1))
    np.testing.assert_allclose(result.normalized, [1 / 3, 1.0, 2 / 3], atol=1e-6)
    assert result.final_residual < 1e-10


def test_fixed_point_is_stationary(fig1):
    w = np.array([0.5, 1.5, 1.0])
    np.testing.assert_allclose(weight_update_step(fig1, w), w, atol=1e-15)
    assert balance_residual(fig1, w) == pytest.approx(0.0, abs=1e-15)


def test_returned_weights_satisfy_tolerance(fig1):
    tol = 1e-10
    result = balance_weights(fig1, np.full(3, 0.1), tol=tol)
    assert np.max(np.abs(weight_update_step(fig1, result.w_inf) - result.w_inf)) <= tol
    assert len(result.residual_history) == result.iterations + 1
    assert len(result.gap_history) == result.iterations + 1


def test_symmetric_graph_is_balanced_immediately(pair):
    result = balance_weights(pair, np.full(2, 0.3))
    assert result.iterations == 0
    np.testing.assert_allclose(result.w_inf, [0.3, 0.3])


def test_budget_exhaustion_reports_history(fig1):
    with pytest.raises(BalancingError) as exc:
        balance_weights(fig1, np.full(3, 0.1), tol=1e-15, max_iter=3)
    assert len(exc.value.residual_history) == 4


@pytest.mark.parametrize("w0", [np.zeros(3), np.array([0.1, -0.1, 0.1])])
def test_non_positive_weights_rejected(fig1, w0):
    with pytest.raises(ValidationError):
        balance_weights(fig1, w0)


def test_weight_dimension_checked(fig1):
    with pytest.raises(DimensionError):
        weight_update_step(fig1, np.ones(4))


def test_sink_rejected(path3):
    with pytest.raises(NotStronglyConnectedError):
        weight_update_step(path3, np.ones(3))


@given(seed=st.integers(0, 2 ** 32), n=st.integers(2, 10))
def test_weights_stay_positive(seed, n):
    g = generate_random_digraph(n, 0.5, seed)
    w = np.full(n, 1e-3)
    for _ in range(50):
        following = weight_update_step(g, w)
        assert np.all(following >= 0.5 * w)
        w = following


@given(seed=st.integers(0, 2 ** 32), n=st.integers(2, 10))
def test_column_sums_vanish_for_any_weights(seed, n):
    g = generate_random_digraph(n, 0.5, seed)
    w = np.random.default_rng(seed).uniform(0.1, 2.0, n)
    np.testing.assert_allclose(laplacian(g, w).sum(axis=0), np.zeros(n), atol=1e-12)


def test_residual_envelope_on_random_graphs():
    rng = np.random.default_rng(2024)
    for k in range(20):
        n = int(rng.integers(5, 51))
        g = generate_random_digraph(n, 0.3, seed=k)
        state = BalancingState(w=np.full(n, 0.1))
        residuals = [balance_residual(g, state.w)]
        while state.t < 500:
            state = state.step(g)
            residuals.append(balance_residual(g, state.w))

        assert min(residuals) <= 1e-8
        envelope = fit_geometric_envelope(residuals)
        assert envelope.slope < 0
        assert envelope.eta < 1


def test_matches_exact_solution_on_small_graphs():
    for k in range(200):
        n = 2 + k % 5
        g = generate_random_digraph(n, 0.5, seed=1000 + k)
        result = balance_relative(g, np.full(n, 0.1))
        np.testing.assert_allclose(result.normalized, _exact_balancing(g), atol=1e-8)


def test_envelope_covers_every_point():
    residuals = [1.0, 0.4, 0.2, 0.09, 0.04, 0.02]
    envelope = fit_geometric_envelope(residuals)
    steps = np.arange(len(residuals))
    assert np.all(np.asarray(residuals) <= envelope.C * envelope.eta ** steps * (1 + 1e-12))


def test_envelope_needs_points():
    with pytest.raises(ValidationError):
        fit_geometric_envelope([1.0, 0.0, 0.0])


def test_psi_and_bound_for_fixture(fig1):
    assert psi(fig1) == pytest.approx(1 / 12)
    assert balancing_initial_bound(fig1) == pytest.approx(0.5 ** 5)
    assert default_max_iterations(fig1) == 60


def test_relative_balance_with_tiny_weights():
    g = bidirectional_ring(5)
    w0 = np.full(5, 1e-9)
    w0[0] = 2e-9
    result = balance_relative(g, w0)
    assert balance_residual(g, result.w_inf) <= 1e-9 * 1e-8


@given(seed=st.integers(0, 2 ** 32), n=st.integers(2, 10), k=st.integers(-20, 20))
def test_update_commutes_with_power_of_two_scaling(seed, n, k):
    g = generate_random_digraph(n, 0.4, seed)
    w = np.random.default_rng(seed).uniform(0.1, 2.0, size=n)
    c = 2.0 ** k
    np.testing.assert_array_equal(weight_update_step(g, c * w), c * weight_update_step(g, w))


@pytest.mark.parametrize("c", [1e-6, 0.37, 3.0, 1e5])
def test_balanced_direction_does_not_depend_on_scale(fig1, c):
    w0 = np.array([0.2, 0.7, 0.1])
    reference = balance_relative(fig1, w0)
    scaled = balance_relative(fig1, c * w0)
    np.testing.assert_allclose(scaled.w_inf / c, reference.w_inf, rtol=1e-9)
    np.testing.assert_allclose(scaled.normalized, reference.normalized, atol=1e-10)
