"""
Модуль команд командной строки

Каждая команда детерминирована при фиксированных входах; результаты пишутся
атомарно через ResultStore и содержат хеш конфигурации.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from adversary.trajectory import validate_trajectory, variation_scale
from cli.config_file import apply_overrides, load_config
from cli.plots import render_error_chart
from engine.experiment import ExperimentConfig
from engine.simulator import (
    CSV_COLUMNS,
    CSV_SCHEMA,
    MIN_RATE_FIT_ROWS,
    Comparison,
    RunRecord,
    SweepResult,
    compare_async,
    rate_fit,
    run,
    sweep_async,
)
from graph.balancing import (
    balance_relative,
    balance_weights,
    balancing_initial_bound,
    fit_geometric_envelope,
    psi,
)
from graph.digraph import diameter, dump_digraph, generate_random_digraph, load_digraph, require_protocol_ready
from graph.spectral import spectral_report
from protocol.params import validate_params
from protocol.rewb import gamma_coefficient_threshold
from storage.results import ResultStore
from utils.converters import DataConverter
from utils.errors import ValidationError
from utils.logger import logger

BALANCE_SCHEMA = 'rewb-balance/1'
COMPARE_SCHEMA = 'rewb-compare/1'
SWEEP_SCHEMA = 'rewb-sweep/1'


def cmd_gen_graph(n: int, p: float, seed: int, out_path: str, store: Optional[ResultStore] = None) -> Path:
    """Генерация сильно связного случайного графа и запись JSON"""
    target = Path(out_path)
    if store is None:
        store = ResultStore(target.parent)
        target = Path(target.name)
    graph = generate_random_digraph(n, p, seed)
    return store.write_text(dump_digraph(graph), target)


def cmd_balance(graph_path: str, tol: float, out_dir: str, w0: Optional[float] = None,
                store: Optional[ResultStore] = None) -> Dict[str, Any]:
    """
    Балансировка весов графа из файла.

    Пишет weights.json (веса, нормированные к максимуму 1, и сырые w_inf) и
    residuals.csv (t, ||L(t) 1||_inf, ||L(t) - L_inf||_inf).
    """
    store = store or ResultStore(out_dir)
    graph = load_digraph(graph_path)
    require_protocol_ready(graph)

    initial = 0.1 if w0 is None else float(w0)
    result = balance_weights(graph, np.full(graph.n, initial), tol=tol)

    try:
        envelope = fit_geometric_envelope(result.residual_history)
        envelope_data = {'C': envelope.C, 'eta': envelope.eta, 'points': envelope.points}
    except ValidationError:
        envelope_data = None

    payload = {
        'n': graph.n,
        'tol': tol,
        'w0': initial,
        'iterations': result.iterations,
        'weights': DataConverter.normalize_max(result.w_inf),
        'w_inf': result.w_inf,
        'final_residual': result.final_residual,
        'psi': psi(graph),
        'diameter': diameter(graph),
        'initial_weight_bound': balancing_initial_bound(graph),
        'envelope': envelope_data,
    }
    store.write_json(payload, 'weights.json')

    residuals = pd.DataFrame({
        't': np.arange(len(result.residual_history), dtype=np.int64),
        'residual': result.residual_history,
        'laplacian_gap': result.gap_history,
    })
    store.write_csv(residuals, 'residuals.csv', BALANCE_SCHEMA)
    logger.info(f"Балансировка {graph_path}: {result.iterations} итераций, остаток {result.final_residual:.3e}")
    return payload


def cmd_validate(config_path: Optional[str], strict: bool = False) -> Dict[str, Any]:
    """
    Листинг диагностик параметров, спектральных величин и ограничений траектории.

    Raises:
        ParameterError: В строгом режиме при нарушениях
    """
    config = apply_overrides(load_config(config_path), strict=strict or None)
    graph = config.graph.build(config.run.seed)
    params = config.protocol
    w0 = np.full(graph.n, params.initial_weight)

    diagnostics = validate_params(params, graph, w0, strict=config.run.strict)

    listing: Dict[str, Any] = {
        'config_hash': config.config_hash,
        'diagnostics': [d.to_dict() for d in diagnostics],
        'errors': sum(1 for d in diagnostics if d.is_error),
        'warnings': sum(1 for d in diagnostics if d.severity == 'warning'),
    }

    if not listing['errors']:
        w_inf = balance_relative(graph, w0).w_inf
        listing['spectral'] = spectral_report(graph, w_inf, params.beta0).to_dict()
        listing['gamma_coefficient_threshold'] = gamma_coefficient_threshold(params, graph.n, config.run.horizon)

    violations = validate_trajectory(config.trajectory, config.run.horizon)
    listing['trajectory_violations'] = len(violations)
    listing['trajectory_variation_scale'] = variation_scale(config.trajectory, config.run.horizon)
    if violations and config.run.strict:
        listing['errors'] += 1

    for diagnostic in diagnostics:
        logger.info(f"[{diagnostic.severity}] {diagnostic.code}: {diagnostic.message}")
    return listing


def write_run_outputs(record: RunRecord, config: ExperimentConfig, store: ResultStore) -> List[Path]:
    """CSV, сводка JSON, необязательные SVG и снимки состояний"""
    outputs = config.run.outputs
    config_hash = config.config_hash
    written = []

    if outputs.csv:
        written.append(store.write_csv(record.csv_frame(), outputs.csv, CSV_SCHEMA, config_hash))
    if outputs.summary:
        written.append(store.write_json({
            'summary': record.summary,
            'diagnostics': [d.to_dict() for d in record.diagnostics],
            'config': config.to_dict(),
        }, outputs.summary))
    if outputs.svg:
        written.append(store.write_text(render_error_chart(record.frame, title=config.run.label), outputs.svg))
    if outputs.states and record.snapshots:
        written.append(store.write_states(record.snapshots, outputs.states, config_hash))
    return written


def cmd_run(config_path: Optional[str], out_dir: Optional[str] = None, seed: Optional[int] = None,
            strict: Optional[bool] = None, stride: Optional[int] = None,
            horizon: Optional[int] = None, config: Optional[ExperimentConfig] = None) -> RunRecord:
    """Прогон эксперимента и запись результатов"""
    config = config or load_config(config_path)
    config = apply_overrides(config, seed=seed, strict=strict, stride=stride, horizon=horizon)
    store = ResultStore(out_dir)

    record = run(config)
    if len(record.frame) >= MIN_RATE_FIT_ROWS:
        fit = rate_fit(record, (config.protocol.alpha1 - config.protocol.beta1) / 2.0)
        record.summary['rate_fit'] = {'delta': fit.delta, 'tail_sup': fit.tail_sup, 'decreasing': fit.decreasing}
    write_run_outputs(record, config, store)
    return record


def comparison_frame(comparison: Comparison) -> pd.DataFrame:
    """Ряды двух прогонов бок о бок по t"""
    columns = ['t'] + [f"{c}_{side}" for side in ('a', 'b') for c in CSV_COLUMNS if c != 't']
    return comparison.aligned.loc[:, columns]


async def cmd_compare(config_a_path: str, config_b_path: str, out_dir: Optional[str] = None,
                      seed: Optional[int] = None, horizon: Optional[int] = None,
                      stride: Optional[int] = None, workers: Optional[int] = None) -> Comparison:
    """Сравнение двух конфигураций: compare.csv и compare.json с отношениями B/A"""
    config_a = apply_overrides(load_config(config_a_path), seed=seed, horizon=horizon, stride=stride)
    config_b = apply_overrides(load_config(config_b_path), seed=seed, horizon=horizon, stride=stride)
    store = ResultStore(out_dir)

    comparison = await compare_async(config_a, config_b, workers)
    store.write_csv(comparison_frame(comparison), 'compare.csv', COMPARE_SCHEMA,
                    f"{config_a.config_hash},{config_b.config_hash}")
    store.write_json(comparison.summary(), 'compare.json')
    logger.info(f"Отношения B/A: ошибка {comparison.error_ratio:.6g}, "
                f"рассогласование {comparison.disagreement_ratio:.6g}")
    return comparison


async def cmd_sweep(config_path: Optional[str], seeds: Sequence[int], out_dir: Optional[str] = None,
                    horizon: Optional[int] = None, stride: Optional[int] = None,
                    workers: Optional[int] = None) -> SweepResult:
    """Серия по seed: sweep.csv с итоговыми метриками и sweep.json с медианами"""
    config = apply_overrides(load_config(config_path), horizon=horizon, stride=stride)
    store = ResultStore(out_dir)

    result = await sweep_async(config, seeds, workers)
    store.write_csv(result.table, 'sweep.csv', SWEEP_SCHEMA, config.config_hash)
    store.write_json({'seeds': result.seeds, 'medians': result.medians, 'config_hash': config.config_hash},
                     'sweep.json')
    return result
