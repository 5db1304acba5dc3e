"""
Модуль итеративной балансировки весов ориентированного графа

Обновление весов: w(t+1) = P w(t), P = 0.5 (I + (D^out)^{-1} A).
Взвешенный лапласиан: L(t) = (D^out - A) W(t), W(t) = diag(w(t)).
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from graph.digraph import Digraph, diameter, is_strongly_connected
from utils.converters import DataConverter
from utils.errors import BalancingError, DimensionError, NotStronglyConnectedError, ValidationError
from utils.logger import logger

# Порог остатка, ниже которого точки не участвуют в оценке скорости затухания
RESIDUAL_FLOOR = 1e-13

DEFAULT_BALANCE_TOL = 1e-12

# Нижняя граница бюджета итераций для относительного допуска
RELATIVE_MAX_ITERATIONS = 10000


def _as_weights(g: Digraph, w) -> np.ndarray:
    weights = np.asarray(w, dtype=float)
    if weights.shape != (g.n,):
        raise DimensionError(f"Вектор весов размера {weights.shape}, ожидается ({g.n},)")
    return weights


def _require_out_edges(g: Digraph) -> None:
    if np.any(g.out_degree == 0):
        raise NotStronglyConnectedError("Обновление весов требует d_i^out >= 1 для всех вершин")


@dataclass(frozen=True)
class BalancingState:
    """Вектор весов вершин w(t) на итерации t"""
    w: np.ndarray
    t: int = 0

    def step(self, g: Digraph) -> 'BalancingState':
        return BalancingState(w=weight_update_step(g, self.w), t=self.t + 1)

    def laplacian(self, g: Digraph) -> np.ndarray:
        return laplacian(g, self.w)


@dataclass
class BalancingResult:
    """
    Результат балансировки.

    Attributes:
        w_inf: Предельные веса (с точностью tol)
        iterations: Число применений P
        residual_history: ||L(t) 1||_inf для t = 0..iterations
        gap_history: ||L(t) - L_inf||_inf для t = 0..iterations
    """
    w_inf: np.ndarray
    iterations: int
    residual_history: List[float]
    gap_history: List[float] = field(default_factory=list)

    @property
    def normalized(self) -> np.ndarray:
        """Веса, масштабированные к максимальному элементу 1"""
        return DataConverter.normalize_max(self.w_inf)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]


@dataclass(frozen=True)
class GeometricEnvelope:
    """Эмпирические константы оценки r_t <= C * eta^t"""
    C: float
    eta: float
    slope: float
    points: int


def weight_update_step(g: Digraph, w) -> np.ndarray:
    """
    Один шаг w_i(t+1) = 1/2 w_i(t) + (1/d_i^out) sum_{j in N_i} 1/2 w_j(t).

    Узел i смешивает веса своих входящих соседей, нормируя на собственную
    полустепень исхода.
    """
    weights = _as_weights(g, w)
    _require_out_edges(g)
    return 0.5 * weights + (g.adjacency_csr @ (0.5 * weights)) / g.out_degree


def laplacian(g: Digraph, w) -> np.ndarray:
    """L = (D^out - A) diag(w): L_ii = d_i^out w_i, L_ij = -w_j для j in N_i"""
    weights = _as_weights(g, w)
    base = np.diag(g.out_degree.astype(float)) - g.adjacency
    return base * weights[np.newaxis, :]


def balance_residual(g: Digraph, w) -> float:
    """||L 1||_inf = max_i |d_i^out w_i - sum_{j in N_i} w_j|"""
    weights = _as_weights(g, w)
    return float(np.max(np.abs(g.out_degree * weights - g.adjacency_csr @ weights)))


def default_max_iterations(g: Digraph) -> int:
    """Правило остановки по умолчанию: 10 * n * диаметр"""
    return 10 * g.n * diameter(g)


def balance_weights(g: Digraph, w0, tol: float = DEFAULT_BALANCE_TOL,
                    max_iter: Optional[int] = None) -> BalancingResult:
    """
    Итерации w(t+1) = P w(t) до ||w(t+1) - w(t)||_inf <= tol.

    Возвращаемый вектор w удовлетворяет ||P w - w||_inf <= tol.

    Args:
        g: Сильно связный граф
        w0: Строго положительные начальные веса
        tol: Допуск по приращению
        max_iter: Максимум итераций (по умолчанию 10 * n * диаметр)

    Returns:
        BalancingResult с историей остатков ||L(t) 1||_inf
    """
    weights = _as_weights(g, w0).copy()
    if not np.all(weights > 0):
        raise ValidationError("Начальные веса должны быть строго положительными")
    if tol <= 0:
        raise ValidationError(f"Допуск должен быть положительным: {tol}")
    _require_out_edges(g)

    if max_iter is None:
        max_iter = default_max_iterations(g)

    iterates = [weights]
    residuals = [balance_residual(g, weights)]

    for iteration in range(max_iter + 1):
        following = weight_update_step(g, weights)
        delta = float(np.max(np.abs(following - weights)))

        if delta <= tol:
            result = BalancingResult(
                w_inf=weights,
                iterations=iteration,
                residual_history=residuals,
                gap_history=_gap_history(g, iterates, weights)
            )
            logger.debug(f"Балансировка сошлась за {iteration} итераций, "
                         f"остаток {residuals[-1]:.3e}")
            return result

        if iteration == max_iter:
            break

        weights = following
        iterates.append(weights)
        residuals.append(balance_residual(g, weights))

    logger.error(f"Балансировка не сошлась за {max_iter} итераций, остаток {residuals[-1]:.3e}")
    raise BalancingError(
        f"Балансировка не достигла tol={tol} за {max_iter} итераций",
        residual_history=residuals
    )


def balance_relative(g: Digraph, w0, tol: float = DEFAULT_BALANCE_TOL) -> BalancingResult:
    """
    Балансировка с допуском tol * max(w0).

    Для начальных весов порядка (1/d_max^out)^(2*diameter+1) абсолютный допуск
    бессодержателен, поэтому спектральные проверки используют этот вариант.
    """
    weights = _as_weights(g, w0)
    scale = float(np.max(weights))
    if not scale > 0:
        raise ValidationError("Начальные веса должны быть строго положительными")
    budget = max(default_max_iterations(g), RELATIVE_MAX_ITERATIONS)
    return balance_weights(g, weights, tol=tol * scale, max_iter=budget)


def _gap_history(g: Digraph, iterates: List[np.ndarray], w_inf: np.ndarray) -> List[float]:
    """||L(t) - L_inf||_inf: строки L(t) - L_inf суммируют |w_j(t) - w_j^inf| по структуре графа"""
    base = np.abs(np.diag(g.out_degree.astype(float)) - g.adjacency)
    return [float(np.max(base @ np.abs(w - w_inf))) for w in iterates]


def fit_geometric_envelope(residuals, floor: float = RESIDUAL_FLOOR) -> GeometricEnvelope:
    """
    Эмпирическая оценка констант C > 0, eta из r_t <= C * eta^t.

    Наклон находится МНК по log r_t на точках r_t > floor, затем C выбирается
    минимальным, при котором оценка выполняется во всех этих точках.
    """
    series = np.asarray(residuals, dtype=float)
    steps = np.arange(series.size)
    used = series > floor
    if np.count_nonzero(used) < 2:
        raise ValidationError("Для оценки нужно не менее двух остатков выше порога")

    slope, _ = np.polyfit(steps[used], np.log(series[used]), 1)
    eta = float(np.exp(slope))
    constant = float(np.max(series[used] / eta ** steps[used]))
    return GeometricEnvelope(C=constant, eta=eta, slope=float(slope), points=int(np.count_nonzero(used)))


def psi(g: Digraph) -> float:
    """psi = 2 / (N d_max^in (d_max^in + d_max^out))"""
    if not is_strongly_connected(g):
        raise NotStronglyConnectedError("psi определена для сильно связного графа")
    return 2.0 / (g.n * g.d_max_in * (g.d_max_in + g.d_max_out))


def balancing_initial_bound(g: Digraph) -> float:
    """Верхняя граница начальных весов (1/d_max^out)^(2*diameter+1)"""
    return (1.0 / g.d_max_out) ** (2 * diameter(g) + 1)
