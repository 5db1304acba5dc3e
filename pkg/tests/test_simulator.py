import numpy as np
import pandas as pd
import pytest

from adversary.attack import AttackPolicy, measure_all
from adversary.trajectory import ParameterTrajectory
from engine.experiment import ExperimentConfig, GraphSource, RunSettings, config_differences
from engine.simulator import (
    AGENT_COLUMNS,
    CSV_COLUMNS,
    compare,
    fitted_exponent,
    rate_fit,
    run,
    sweep,
)
from graph.balancing import weight_update_step
from graph.digraph import bidirectional_ring
from protocol.params import ProtocolParams, compliant_params
from protocol.rewb import gamma_step, initial_gamma, rewb_step_agentwise
from utils.errors import (
    DimensionError,
    DivergenceError,
    EnvelopeViolationError,
    ParameterError,
    ValidationError,
)


def _config(name='bidirectional_ring', n=6, protocol=None, trajectory=None, attack=None, **run_settings):
    run_settings.setdefault('horizon', 200)
    run_settings.setdefault('stride', 1)
    return ExperimentConfig(
        graph=GraphSource(kind='fixture', name=name, n=n),
        protocol=protocol or ProtocolParams(),
        trajectory=trajectory or ParameterTrajectory(),
        attack=attack or AttackPolicy(),
        run=RunSettings(**run_settings)
    )


def test_frame_layout():
    record = run(_config(horizon=95, stride=10))
    assert list(record.frame.columns) == list(CSV_COLUMNS + AGENT_COLUMNS)
    assert list(record.csv_frame().columns) == list(CSV_COLUMNS)
    assert record.column('t').tolist() == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]
    assert record.frame['bound'].iloc[0] == pytest.approx(np.sqrt(6) * 50.0)
    assert record.summary['horizon'] == 95
    assert record.summary['bad_count'] == 2


def test_same_seed_same_record():
    config = _config(seed=3, checkpoints=(0, 100))
    first = run(config)
    second = run(config)
    assert first.same_as(second)
    assert first.summary['config_hash'] == config.config_hash


def test_different_seed_changes_record():
    assert not run(_config(seed=1)).same_as(run(_config(seed=2)))


def test_thread_count_does_not_change_results(threads):
    config = _config(name='complete', n=9, seed=5, checkpoints=(200,))
    serial = run(config, workers=1)
    parallel = run(config, workers=4)
    assert serial.same_as(parallel)
    np.testing.assert_array_equal(serial.snapshots[200], parallel.snapshots[200])


def _reference_loop(config, horizon, weights_first=False):
    g = config.graph.build(config.run.seed)
    params = config.protocol
    w = np.full(g.n, params.initial_weight)
    gs = initial_gamma(params)
    x = np.zeros((g.n, config.trajectory.dimension))
    for t in range(horizon):
        y, _ = measure_all(config.trajectory, config.attack, t, g.n)
        if weights_first:
            w = weight_update_step(g, w)
        x = rewb_step_agentwise(x, w, y, gs.gamma, params, g, t)
        if not weights_first:
            w = weight_update_step(g, w)
        gs = gamma_step(gs, params, g.n)
    return x, w, gs


@pytest.mark.parametrize("name, n", [('bidirectional_ring', 6), ('balancing', 3), ('cycle', 5)])
def test_matches_agentwise_reference_loop(name, n):
    config = _config(name=name, n=n, seed=4, horizon=60, checkpoints=(60,))
    record = run(config)
    x, w, gs = _reference_loop(config, 60)

    np.testing.assert_allclose(record.snapshots[60], x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(record.weights, w, rtol=1e-12)
    assert record.final_row['gamma'] == pytest.approx(gs.gamma, rel=1e-12)


def test_state_update_reads_weights_before_their_update():
    config = _config(name='balancing', n=3, seed=4, horizon=30, checkpoints=(30,))
    record = run(config)

    g = config.graph.build(0)
    w0 = np.full(3, config.protocol.initial_weight)
    assert np.max(np.abs(weight_update_step(g, w0) - w0)) > 1e-3

    x_late, _, _ = _reference_loop(config, 30)
    x_early, _, _ = _reference_loop(config, 30, weights_first=True)
    assert np.max(np.abs(x_early - x_late)) > 1e-9
    np.testing.assert_allclose(record.snapshots[30], x_late, rtol=1e-12, atol=1e-12)
    assert not np.allclose(record.snapshots[30], x_early, rtol=1e-12, atol=1e-12)


def test_trivial_fixed_point():
    config = _config(
        trajectory=ParameterTrajectory(kind='constant', base=25.0),
        attack=AttackPolicy(s=0.0),
        initial_state='truth',
        horizon=2000,
        stride=1
    )
    record = run(config)
    assert record.frame['error_l2'].max() <= 1e-10
    assert record.summary['envelope_violations'] == 0


def test_no_adversaries_converges():
    record = run(_config(name='complete', n=5, attack=AttackPolicy(s=0.0), horizon=3000, stride=100))
    assert record.summary['final_error'] < 1e-2
    assert record.summary['bad_count'] == 0
    assert record.summary['final_bad_max_error'] == 0.0


def test_consensus_conserves_sum_without_innovation():
    config = _config(
        name='balancing', n=3,
        trajectory=ParameterTrajectory(kind='constant', base=5.0),
        initial_state=(1.0, 5.0, 9.0),
        innovation=False,
        checkpoints=(0, 50, 200)
    )
    record = run(config)
    for t in (0, 50, 200):
        assert record.snapshots[t].sum() == pytest.approx(15.0, rel=1e-12)
    np.testing.assert_allclose(record.frame['mean_dist'], 0.0, atol=1e-12)
    assert record.frame['k_max'].max() == 0.0


def test_initial_state_dimension_checked():
    with pytest.raises(DimensionError):
        run(_config(initial_state=(1.0, 2.0)))


def test_divergence_aborts():
    with pytest.raises(DivergenceError) as exc:
        run(_config(protocol=ProtocolParams(beta0=1e3), horizon=2000))
    assert exc.value.step > 0


def test_hard_parameter_error_aborts():
    with pytest.raises(ParameterError):
        run(_config(protocol=ProtocolParams(eta=1.5)))


def test_envelope_violation_is_counted():
    record = run(_config(gamma2_0=0.0, horizon=50))
    assert record.summary['first_violation_step'] == 0
    assert record.summary['envelope_violations'] >= 1
    assert record.summary['max_envelope_ratio'] == float('inf')


def test_negative_gamma_is_a_violation_not_an_abort():
    # gamma1(2) = -0.81 * 75 + ... + 37.5 < 0 при gamma(0) = 0
    record = run(_config(gamma2_0=0.0, horizon=50))
    summary = record.summary
    assert summary['negative_gamma_step'] == 2
    assert record.frame['gamma'].iloc[2] < 0

    negative = record.frame['gamma'] < 0
    assert summary['envelope_violations'] >= int(negative.sum()) + 1
    # k_i(t) считается по max(gamma, 0) = 0
    assert (record.frame.loc[negative, 'k_max'] == 0.0).all()
    assert np.all(np.isfinite(record.frame['error_l2']))


def test_published_gamma_never_negative():
    assert run(_config(horizon=300)).summary['negative_gamma_step'] is None


def test_envelope_violation_raises_in_strict_mode():
    g = bidirectional_ring(4)
    params, _ = compliant_params(g)
    config = _config(n=4, protocol=params, attack=AttackPolicy(s=0.25), strict=True, gamma2_0=0.0, horizon=20)
    with pytest.raises(EnvelopeViolationError) as exc:
        run(config)
    assert exc.value.step == 0
    assert exc.value.bound == 0.0
    assert "sqrt(N) gamma(t)=0 на шаге 0" in str(exc.value)


def test_strict_mode_rejects_published_parameters_on_small_graph():
    with pytest.raises(ParameterError):
        run(_config(strict=True))


def test_strict_mode_rejects_trajectory_violations():
    g = bidirectional_ring(4)
    params, _ = compliant_params(g)
    config = _config(n=4, protocol=params, attack=AttackPolicy(s=0.25), strict=True,
                     trajectory=ParameterTrajectory(kind='constant', base=80.0))
    with pytest.raises(ValidationError):
        run(config)


def test_compliant_run_respects_envelope():
    g = bidirectional_ring(4)
    params, _ = compliant_params(g)
    config = _config(n=4, protocol=params, attack=AttackPolicy(s=0.25), strict=True, horizon=2000)
    record = run(config)
    assert record.summary['envelope_violations'] == 0
    assert record.summary['max_envelope_ratio'] <= 1.0


def test_summary_contents():
    record = run(_config(horizon=300))
    summary = record.summary
    for key in ('config_hash', 'final_error', 'final_bound', 'envelope_violations', 'fitted_exponent',
                'delta0_bound', 'delta1_bound', 'saturation_steps', 'min_gain', 'warnings'):
        assert key in summary
    assert summary['delta0_bound'] == pytest.approx(0.05)
    assert summary['delta1_bound'] == pytest.approx(0.065)
    assert 'initial_weight_bound' in summary['warnings']


def test_rate_fit():
    record = run(_config(horizon=1000, stride=1))
    fit = rate_fit(record, delta=0.03)
    assert fit.tail_start == 100
    assert fit.tail_sup > 0
    assert isinstance(fit.decreasing, bool)

    with pytest.raises(ValidationError):
        rate_fit(run(_config(horizon=50)), delta=0.03)


def test_rate_fit_rejects_too_fast_exponent():
    fit = rate_fit(run(_config(horizon=1000, stride=1)), delta=1.0)
    assert fit.decreasing is False
    assert fit.slope > 0


def test_frozen_unit_weights_match_balanced_ring():
    dynamic = _config(seed=3, horizon=300, checkpoints=(300,)).with_protocol(initial_weight=1.0)
    frozen = dynamic.with_protocol(weight_mode='frozen')
    a = run(dynamic)
    b = run(frozen)
    pd.testing.assert_frame_equal(a.frame, b.frame)
    np.testing.assert_array_equal(a.snapshots[300], b.snapshots[300])
    np.testing.assert_array_equal(a.weights, np.ones(6))
    assert (a.frame['balance_residual'] == 0.0).all()


def test_fitted_exponent_of_power_law():
    steps = np.arange(0, 10001, 10)
    frame = pd.DataFrame({'t': steps, 'error_l2': 3.0 * (steps + 1.0) ** -0.5})
    assert fitted_exponent(frame) == pytest.approx(0.5, rel=1e-9)


def test_self_compare_has_unit_ratios():
    config = _config(horizon=100)
    comparison = compare(config, config)
    assert comparison.error_ratio == 1.0
    assert comparison.disagreement_ratio == 1.0
    assert comparison.differences == []
    assert len(comparison.aligned) == 101


def test_compare_reports_differences():
    dynamic = _config(name='balancing', n=3, horizon=100)
    frozen = dynamic.with_protocol(weight_mode='frozen', initial_weight=1.0)
    comparison = compare(dynamic, frozen)
    assert config_differences(dynamic, frozen) == ['protocol.initial_weight', 'protocol.weight_mode']
    assert comparison.differences == ['protocol.initial_weight', 'protocol.weight_mode']
    assert comparison.summary()['b']['weight_mode'] == 'frozen'


def test_sweep_medians():
    result = sweep(_config(horizon=100), seeds=[1, 2, 3])
    assert result.seeds == [1, 2, 3]
    assert result.table['seed'].tolist() == [1, 2, 3]
    assert result.medians['final_error'] == pytest.approx(result.table['final_error'].median())

    with pytest.raises(ValidationError):
        sweep(_config(horizon=100), seeds=[])


def test_parallel_sweep_matches_sequential(threads):
    config = _config(horizon=100)
    sequential = sweep(config, seeds=[1, 2, 3], workers=1)
    parallel = sweep(config, seeds=[1, 2, 3], workers=2)
    for a, b in zip(sequential.records, parallel.records):
        assert a.same_as(b)
