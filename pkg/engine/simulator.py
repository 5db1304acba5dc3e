"""
Модуль симулятора: синхронный цикл протокола, метрики прогона, сравнения и серии по seed

Порядок раунда t: измерения y(t) -> gamma(t) -> обновление x по w(t) -> обновление w -> обновление gamma.
"""
import asyncio
import math
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from adversary.attack import measure_all
from adversary.trajectory import TrajectoryViolation, theta_star_series, validate_trajectory
from engine.experiment import ExperimentConfig, config_differences
from graph.balancing import balance_residual, weight_update_step
from graph.digraph import Digraph, require_protocol_ready
from protocol.params import Diagnostic, validate_params
from protocol.rewb import advance, gamma_step, initial_gamma, innovation_gains, row_blocks
from utils.config import Config
from utils.converters import DataConverter
from utils.errors import DimensionError, DivergenceError, EnvelopeViolationError, ParameterError, ValidationError
from utils.logger import logger, run_context

CSV_COLUMNS = (
    't', 'error_l2', 'bound', 'gamma', 'gamma1', 'gamma2', 'disagreement',
    'mean_dist', 'balance_residual', 'k_min', 'k_max', 'theta_star_norm',
)
AGENT_COLUMNS = ('max_agent_error', 'good_max_error', 'bad_max_error')
CSV_SCHEMA = 'rewb-run/1'

MIN_RATE_FIT_ROWS = 100
RATE_FIT_BLOCKS = 10


@dataclass
class RunRecord:
    """
    Результат прогона.

    Attributes:
        frame: Логируемые строки (CSV_COLUMNS + AGENT_COLUMNS), t строго возрастает
        summary: Итоговые метрики
        snapshots: Полные состояния x(t) в контрольных точках
        diagnostics: Диагностики параметров
        trajectory_violations: Нарушения ограничений траектории
        weights: Веса w(T)
        wall_time: Время выполнения (не участвует в сравнении прогонов)
    """
    frame: pd.DataFrame
    summary: Dict[str, Any]
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)
    trajectory_violations: List[TrajectoryViolation] = field(default_factory=list)
    weights: Optional[np.ndarray] = None
    wall_time: float = 0.0

    def csv_frame(self) -> pd.DataFrame:
        return self.frame.loc[:, list(CSV_COLUMNS)]

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy()

    @property
    def final_row(self) -> pd.Series:
        return self.frame.iloc[-1]

    def same_as(self, other: 'RunRecord') -> bool:
        """Побитовое совпадение результатов без учета времени выполнения"""
        if not self.frame.equals(other.frame):
            return False
        if self.summary != other.summary:
            return False
        if set(self.snapshots) != set(other.snapshots):
            return False
        return all(np.array_equal(self.snapshots[t], other.snapshots[t]) for t in self.snapshots)


@dataclass(frozen=True)
class RateFit:
    """Диагностика скорости: sup хвоста (t+1)^delta max_i ||x_i - theta*|| и его убывание"""
    delta: float
    tail_start: int
    tail_sup: float
    decreasing: bool
    slope: float


@dataclass
class Comparison:
    """Сравнение двух прогонов: отношения B/A итоговой ошибки и рассогласования"""
    record_a: RunRecord
    record_b: RunRecord
    aligned: pd.DataFrame
    error_ratio: float
    disagreement_ratio: float
    differences: List[str] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            'error_ratio': self.error_ratio,
            'disagreement_ratio': self.disagreement_ratio,
            'differences': self.differences,
            'a': self.record_a.summary,
            'b': self.record_b.summary,
        }


@dataclass
class SweepResult:
    """Серия одного эксперимента по нескольким master seed"""
    seeds: List[int]
    records: List[RunRecord]
    table: pd.DataFrame
    medians: Dict[str, float]


def _initial_state(config: ExperimentConfig, n: int, truth0: np.ndarray) -> np.ndarray:
    initial = config.run.initial_state
    if initial == 'zero':
        return np.zeros((n, truth0.size))
    if initial == 'truth':
        return np.tile(truth0, (n, 1))
    if np.isscalar(initial):
        return np.full((n, truth0.size), float(initial))

    values = np.asarray(initial, dtype=float)
    if values.shape == (n,):
        values = np.repeat(values[:, np.newaxis], truth0.size, axis=1)
    if values.shape != (n, truth0.size):
        raise DimensionError(f"Начальное состояние размера {values.shape}, ожидается ({n}, {truth0.size})")
    return values.copy()


def _row(t: int, x: np.ndarray, truth: np.ndarray, gs, gains: np.ndarray,
         w: np.ndarray, g: Digraph, mask: np.ndarray, error: float) -> Dict[str, float]:
    mean = x.mean(axis=0)
    agent_errors = np.linalg.norm(x - truth, axis=1)
    good = agent_errors[~mask]
    bad = agent_errors[mask]
    return {
        't': t,
        'error_l2': error,
        'bound': math.sqrt(g.n) * gs.gamma,
        'gamma': gs.gamma,
        'gamma1': gs.gamma1,
        'gamma2': gs.gamma2,
        'disagreement': float(np.linalg.norm(x - mean)),
        'mean_dist': float(np.linalg.norm(mean - truth)),
        'balance_residual': balance_residual(g, w),
        'k_min': float(gains.min()),
        'k_max': float(gains.max()),
        'theta_star_norm': float(np.linalg.norm(truth)),
        'max_agent_error': float(agent_errors.max()),
        'good_max_error': float(good.max()) if good.size else 0.0,
        'bad_max_error': float(bad.max()) if bad.size else 0.0,
    }


def fitted_exponent(frame: pd.DataFrame, column: str = 'error_l2') -> Optional[float]:
    """Показатель затухания: -наклон log e(t) по log(t+1) на последней декаде записанных шагов"""
    steps = frame['t'].to_numpy(dtype=float)
    values = frame[column].to_numpy(dtype=float)
    if steps.size == 0:
        return None
    used = (steps >= steps[-1] / 10.0) & (steps > 0) & (values > 0)
    if np.count_nonzero(used) < 2:
        return None
    slope, _ = np.polyfit(np.log(steps[used] + 1.0), np.log(values[used]), 1)
    return float(-slope)


def _prepare(config: ExperimentConfig):
    g = config.graph.build(config.run.seed)
    require_protocol_ready(g)

    params = config.protocol
    w0 = np.full(g.n, params.initial_weight)
    diagnostics = validate_params(params, g, w0, strict=config.run.strict)
    errors = [d for d in diagnostics if d.is_error]
    if errors:
        logger.error(f"Параметры протокола не прошли проверку: {', '.join(d.code for d in errors)}")
        raise ParameterError(f"Нарушены ограничения параметров: {', '.join(d.code for d in errors)}",
                             diagnostics=diagnostics)

    violations = validate_trajectory(config.trajectory, config.run.horizon)
    if violations and config.run.strict:
        raise ValidationError(f"Траектория нарушает ограничения в строгом режиме: первая при t={violations[0].t}")
    return g, w0, diagnostics, violations


def run(config: ExperimentConfig, workers: Optional[int] = None) -> RunRecord:
    """
    Прогон протокола на T шагах.

    Args:
        config: Описание эксперимента
        workers: Число потоков внутри прогона (по умолчанию config.run.workers, с ограничением REWB_THREADS)

    Returns:
        RunRecord; результат не зависит от числа потоков
    """
    with run_context(config.run.label, config.run.seed):
        return _run(config, workers)


def _run(config: ExperimentConfig, workers: Optional[int]) -> RunRecord:
    settings = config.run
    started = time.perf_counter()
    g, w, diagnostics, violations = _prepare(config)

    params = config.protocol
    horizon = settings.horizon
    thread_count = Config().worker_cap(settings.workers if workers is None else workers)
    blocks = row_blocks(g.n, thread_count)
    checkpoints = set(settings.checkpoints)

    for _ in range(settings.pre_balance_rounds):
        w = weight_update_step(g, w)

    truth_series = theta_star_series(config.trajectory, horizon)
    x = _initial_state(config, g.n, truth_series[0])
    gs = initial_gamma(params, settings.gamma1_0, settings.gamma2_0)
    root_n = math.sqrt(g.n)

    logger.info(f"Запуск прогона '{settings.label}': N={g.n}, T={horizon}, seed={settings.seed}, "
                f"режим весов={params.weight_mode}, потоков={len(blocks)}")

    rows = []
    snapshots = {}
    violation_count = 0
    first_violation = None
    max_ratio = 0.0
    saturation_steps = 0
    min_gain = 1.0
    initial_error = None
    negative_gamma_step = None

    pool = ThreadPoolExecutor(max_workers=len(blocks)) if len(blocks) > 1 else nullcontext()
    with pool as executor:
        for t in range(horizon + 1):
            y, mask = measure_all(config.trajectory, config.attack, t, g.n)
            truth = truth_series[t]
            gamma = gs.gamma

            error = float(np.linalg.norm(x - truth))
            bound = root_n * gamma
            if initial_error is None:
                initial_error = error

            # Отрицательная gamma(t) сама по себе нарушает границу (e(t) >= 0 > bound)
            if gamma < 0 and negative_gamma_step is None:
                negative_gamma_step = t
                logger.warning(f"gamma(t)={gamma:.6g} < 0 на шаге {t}, для k_i(t) используется 0")
            gain_gamma = max(gamma, 0.0)

            if error > bound:
                violation_count += 1
                if first_violation is None:
                    first_violation = t
                    logger.warning(f"Ошибка {error:.6g} превысила границу {bound:.6g} на шаге {t}")
                if settings.strict:
                    logger.error(f"Нарушение границы ошибки в строгом режиме на шаге {t}")
                    raise EnvelopeViolationError(
                        f"e(t)={DataConverter.format_float(error)} > sqrt(N) gamma(t)="
                        f"{DataConverter.format_float(bound)} на шаге {t}",
                        step=t, error=error, bound=bound
                    )
            if bound > 0:
                ratio = error / bound
            else:
                ratio = math.inf if error > bound else 0.0
            max_ratio = max(max_ratio, ratio)

            if t < horizon:
                update = advance(x, w, y, gain_gamma, params, g, t, settings.innovation, executor, blocks)
                gains = update.gains
            else:
                update = None
                gains = innovation_gains(y, x, gain_gamma) if settings.innovation else np.zeros(g.n)

            step_min = float(gains.min())
            min_gain = min(min_gain, step_min)
            if step_min < 1.0:
                saturation_steps += 1

            if t % settings.stride == 0 or t == horizon:
                rows.append(_row(t, x, truth, gs, gains, w, g, mask, error))
            if t in checkpoints:
                snapshots[t] = x.copy()
                logger.debug(f"Снимок состояния на шаге {t}")

            if update is None:
                break

            if not np.all(np.isfinite(update.x)):
                logger.error(f"Нечисловое состояние на шаге {t + 1}")
                raise DivergenceError(f"Нечисловое состояние на шаге {t + 1}", step=t + 1)

            if params.weight_mode == 'dynamic':
                w = weight_update_step(g, w)
            gs = gamma_step(gs, params, g.n)
            x = update.x

    frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS + AGENT_COLUMNS))
    frame['t'] = frame['t'].astype(np.int64)
    last = rows[-1]

    summary = {
        'label': settings.label,
        'config_hash': config.config_hash,
        'n': g.n,
        'edges': len(g.edges),
        'horizon': horizon,
        'seed': settings.seed,
        'weight_mode': params.weight_mode,
        'bad_count': config.attack.bad_count(g.n),
        'initial_error': initial_error,
        'final_error': last['error_l2'],
        'final_bound': last['bound'],
        'final_disagreement': last['disagreement'],
        'final_mean_dist': last['mean_dist'],
        'final_max_agent_error': last['max_agent_error'],
        'final_good_max_error': last['good_max_error'],
        'final_bad_max_error': last['bad_max_error'],
        'final_balance_residual': last['balance_residual'],
        'max_envelope_ratio': max_ratio,
        'envelope_violations': violation_count,
        'first_violation_step': first_violation,
        'negative_gamma_step': negative_gamma_step,
        'saturation_steps': saturation_steps,
        'min_gain': min_gain,
        'fitted_exponent': fitted_exponent(frame),
        'delta0_bound': params.alpha1 - params.mu1,
        'delta1_bound': params.alpha1 - params.beta1,
        'trajectory_violations': len(violations),
        'warnings': [d.code for d in diagnostics if d.severity == 'warning'],
    }

    wall_time = time.perf_counter() - started
    logger.info(f"Прогон '{settings.label}' завершен за {wall_time:.2f} с: e(T)={last['error_l2']:.6g}, "
                f"нарушений границы={violation_count}")

    return RunRecord(
        frame=frame,
        summary=summary,
        snapshots=snapshots,
        diagnostics=diagnostics,
        trajectory_violations=violations,
        weights=w,
        wall_time=wall_time
    )


def rate_fit(record: RunRecord, delta: float) -> RateFit:
    """
    Диагностика скорости сходимости на последней декаде записанных шагов.

    Хвост делится на блоки; последовательность считается убывающей, если
    максимумы блоков не возрастают.
    """
    frame = record.frame
    if len(frame) < MIN_RATE_FIT_ROWS:
        raise ValidationError(f"Для оценки скорости нужно >= {MIN_RATE_FIT_ROWS} строк, есть {len(frame)}")

    steps = frame['t'].to_numpy(dtype=float)
    errors = frame['max_agent_error'].to_numpy(dtype=float)
    tail = steps >= steps[-1] / 10.0
    scaled = (steps[tail] + 1.0) ** delta * errors[tail]

    maxima = [float(block.max()) for block in np.array_split(scaled, RATE_FIT_BLOCKS) if block.size]
    decreasing = all(later <= earlier for earlier, later in zip(maxima, maxima[1:]))

    positive = scaled > 0
    if np.count_nonzero(positive) >= 2:
        slope, _ = np.polyfit(np.log(steps[tail][positive] + 1.0), np.log(scaled[positive]), 1)
    else:
        slope = 0.0

    return RateFit(
        delta=float(delta),
        tail_start=int(steps[tail][0]),
        tail_sup=float(scaled.max()),
        decreasing=decreasing,
        slope=float(slope)
    )


async def run_many(configs: Sequence[ExperimentConfig], workers: Optional[int] = None) -> List[RunRecord]:
    """
    Независимые прогоны в пуле процессов пачками по числу рабочих.

    Ошибка любого прогона пачки логируется и пробрасывается после завершения пачки.
    """
    cap = Config().worker_cap(workers)
    if cap == 1 or len(configs) <= 1:
        return [run(config) for config in configs]

    loop = asyncio.get_running_loop()
    records: List[RunRecord] = []
    with ProcessPoolExecutor(max_workers=cap) as pool:
        for i in range(0, len(configs), cap):
            batch = configs[i:i + cap]
            batch_results = await asyncio.gather(
                *[loop.run_in_executor(pool, run, config) for config in batch],
                return_exceptions=True
            )

            failures = [result for result in batch_results if isinstance(result, Exception)]
            for failure in failures:
                logger.error(f"Ошибка прогона: {failure}")
            if failures:
                raise failures[0]
            records.extend(batch_results)

    return records


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return 1.0 if numerator == 0 else math.inf
    return numerator / denominator


def build_comparison(config_a: ExperimentConfig, config_b: ExperimentConfig,
                     record_a: RunRecord, record_b: RunRecord) -> Comparison:
    aligned = pd.merge(record_a.frame, record_b.frame, on='t', how='inner', suffixes=('_a', '_b'))
    return Comparison(
        record_a=record_a,
        record_b=record_b,
        aligned=aligned,
        error_ratio=_ratio(record_b.summary['final_error'], record_a.summary['final_error']),
        disagreement_ratio=_ratio(record_b.summary['final_disagreement'], record_a.summary['final_disagreement']),
        differences=config_differences(config_a, config_b)
    )


async def compare_async(config_a: ExperimentConfig, config_b: ExperimentConfig,
                        workers: Optional[int] = None) -> Comparison:
    differences = config_differences(config_a, config_b)
    logger.info(f"Сравнение прогонов, различающиеся поля: {', '.join(differences) or 'нет'}")
    record_a, record_b = await run_many([config_a, config_b], workers)
    return build_comparison(config_a, config_b, record_a, record_b)


def compare(config_a: ExperimentConfig, config_b: ExperimentConfig, workers: Optional[int] = None) -> Comparison:
    """Два прогона с выравниванием рядов по t и отношениями B/A итоговых метрик"""
    return asyncio.run(compare_async(config_a, config_b, workers))


SWEEP_METRICS = (
    'final_error', 'final_disagreement', 'final_good_max_error', 'final_bad_max_error',
    'max_envelope_ratio', 'envelope_violations',
)


async def sweep_async(config: ExperimentConfig, seeds: Sequence[int],
                      workers: Optional[int] = None) -> SweepResult:
    if not seeds:
        raise ValidationError("Список seed пуст")
    configs = [config.with_seed(seed) for seed in seeds]
    records = await run_many(configs, workers)

    table = pd.DataFrame(
        [{'seed': int(seed), **{metric: record.summary[metric] for metric in SWEEP_METRICS}}
         for seed, record in zip(seeds, records)],
        columns=['seed', *SWEEP_METRICS]
    )
    medians = {metric: float(table[metric].median()) for metric in SWEEP_METRICS}
    logger.info(f"Серия из {len(seeds)} прогонов: медиана e(T)={medians['final_error']:.6g}")
    return SweepResult(seeds=[int(s) for s in seeds], records=records, table=table, medians=medians)


def sweep(config: ExperimentConfig, seeds: Sequence[int], workers: Optional[int] = None) -> SweepResult:
    """Один эксперимент по нескольким master seed: итоговые метрики и медианы"""
    return asyncio.run(sweep_async(config, seeds, workers))
