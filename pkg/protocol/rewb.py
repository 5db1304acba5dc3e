"""
Модуль закона обновления REWB

x_i(t+1) = (1 - beta(t) w_i d_i^out) x_i + beta(t) sum_{j in N_i} w_j x_j + alpha(t) k_i (y_i - x_i)

k_i(t) = 1, если ||y_i - x_i|| <= gamma(t), иначе gamma(t) / ||y_i - x_i||

gamma1(t+1) = (1 - c1 mu(t) + (1+sqrt(N)) alpha(t)) gamma1 + (1+sqrt(N)) alpha(t) gamma2 + c2 eta^t
gamma2(t+1) = alpha(t) gamma1 + (1 - alpha(t)(1-2s)) gamma2 + 1/(1+t)^theta1
"""
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from graph.balancing import laplacian
from graph.digraph import Digraph
from protocol.params import ProtocolParams, alpha, beta, mu, schedules
from utils.errors import DimensionError, DivergenceError, ValidationError


@dataclass(frozen=True)
class GammaSystem:
    """Двухкомпонентная граница gamma(t) = gamma1(t) + gamma2(t) на шаге t"""
    gamma1: float
    gamma2: float
    t: int = 0

    @property
    def gamma(self) -> float:
        return self.gamma1 + self.gamma2


@dataclass(frozen=True)
class GammaTrajectory:
    """Траектория gamma-системы на шагах 0..horizon"""
    gamma1: np.ndarray
    gamma2: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma1 + self.gamma2


@dataclass(frozen=True)
class RoundUpdate:
    """Результат одного синхронного раунда: новое состояние и коэффициенты k_i(t)"""
    x: np.ndarray
    gains: np.ndarray


def initial_gamma(params: ProtocolParams, gamma1: float = 0.0, gamma2: Optional[float] = None) -> GammaSystem:
    """gamma1(0) = 0, gamma2(0) = Theta"""
    return GammaSystem(gamma1=float(gamma1), gamma2=float(params.Theta if gamma2 is None else gamma2), t=0)


def gamma_coefficients(params: ProtocolParams, n: int, t: int):
    """Коэффициенты (c11, c12, f1, c21, c22, f2) рекурсий на шаге t"""
    a = alpha(params, t)
    m = mu(params, t)
    root = 1.0 + math.sqrt(n)
    return (
        1.0 - params.c1 * m + root * a,
        root * a,
        params.c2 * params.eta ** t,
        a,
        1.0 - a * (1.0 - 2.0 * params.s),
        1.0 / (1.0 + t) ** params.theta1,
    )


def gamma_step(gs: GammaSystem, params: ProtocolParams, n: int, t: Optional[int] = None) -> GammaSystem:
    """Один шаг обеих рекурсий gamma-системы"""
    t = gs.t if t is None else t
    c11, c12, f1, c21, c22, f2 = gamma_coefficients(params, n, t)
    return GammaSystem(
        gamma1=c11 * gs.gamma1 + c12 * gs.gamma2 + f1,
        gamma2=c21 * gs.gamma1 + c22 * gs.gamma2 + f2,
        t=t + 1
    )


def simulate_gamma(params: ProtocolParams, n: int, horizon: int,
                   gamma1_0: float = 0.0, gamma2_0: Optional[float] = None) -> GammaTrajectory:
    """
    Итерации gamma-системы на шагах 0..horizon без состояния агентов.

    Raises:
        DivergenceError: Если компонента стала нечисловой
    """
    if horizon < 0:
        raise ValidationError(f"Горизонт должен быть неотрицательным: {horizon}")

    sched = schedules(params, horizon)
    root = 1.0 + math.sqrt(n)
    steps = np.arange(horizon + 1, dtype=float)
    c11 = (1.0 - params.c1 * sched.mu + root * sched.alpha).tolist()
    c12 = (root * sched.alpha).tolist()
    f1 = (params.c2 * params.eta ** steps).tolist()
    c21 = sched.alpha.tolist()
    c22 = (1.0 - sched.alpha * (1.0 - 2.0 * params.s)).tolist()
    f2 = (1.0 / (1.0 + steps) ** params.theta1).tolist()

    g1 = [0.0] * (horizon + 1)
    g2 = [0.0] * (horizon + 1)
    g1[0] = float(gamma1_0)
    g2[0] = float(params.Theta if gamma2_0 is None else gamma2_0)

    for t in range(horizon):
        g1[t + 1] = c11[t] * g1[t] + c12[t] * g2[t] + f1[t]
        g2[t + 1] = c21[t] * g1[t] + c22[t] * g2[t] + f2[t]

    trajectory = GammaTrajectory(gamma1=np.array(g1), gamma2=np.array(g2))
    bad = np.flatnonzero(~np.isfinite(trajectory.gamma))
    if bad.size:
        raise DivergenceError(f"gamma-система разошлась на шаге {int(bad[0])}", step=int(bad[0]))
    return trajectory


def gamma_coefficient_threshold(params: ProtocolParams, n: int, horizon: int) -> Optional[int]:
    """Первый шаг, начиная с которого 1 - c1 mu(t) + (1+sqrt(N)) alpha(t) > 0 до horizon; None, если такого нет"""
    sched = schedules(params, horizon)
    coefficient = 1.0 - params.c1 * sched.mu + (1.0 + math.sqrt(n)) * sched.alpha
    non_positive = np.flatnonzero(coefficient <= 0)
    if non_positive.size == 0:
        return 0
    last = int(non_positive[-1])
    return None if last >= horizon else last + 1


def innovation_gain(y_i, x_i, gamma: float) -> float:
    """k = 1 при ||y - x|| <= gamma, иначе gamma / ||y - x||"""
    if gamma < 0:
        raise ValidationError(f"gamma должна быть неотрицательной: {gamma}")
    distance = float(np.linalg.norm(np.asarray(y_i, dtype=float) - np.asarray(x_i, dtype=float)))
    if distance <= gamma:
        return 1.0
    return gamma / distance


def innovation_gains(y: np.ndarray, x: np.ndarray, gamma: float) -> np.ndarray:
    """Векторный вариант innovation_gain по строкам"""
    if gamma < 0:
        raise ValidationError(f"gamma должна быть неотрицательной: {gamma}")
    distances = np.linalg.norm(y - x, axis=1)
    gains = np.ones(distances.shape[0])
    over = distances > gamma
    gains[over] = gamma / distances[over]
    return gains


def local_update(x_i: np.ndarray, neighbor_states: np.ndarray, neighbor_weights: np.ndarray,
                 w_i: float, d_out_i: int, y_i: np.ndarray, gamma: float,
                 a: float, b: float, innovation: bool = True) -> np.ndarray:
    """
    Обновление одного агента только по локальной информации.

    Args:
        x_i: Собственная оценка
        neighbor_states: Оценки входящих соседей (k x M)
        neighbor_weights: Веса входящих соседей (k,)
        w_i: Собственный вес
        d_out_i: Собственная полустепень исхода
        y_i: Собственное измерение
        gamma: Общая граница gamma(t)
        a, b: alpha(t), beta(t)
    """
    gain = innovation_gain(y_i, x_i, gamma) if innovation else 0.0
    consensus = np.sum(neighbor_weights[:, np.newaxis] * neighbor_states, axis=0)
    return (1.0 - b * w_i * d_out_i) * x_i + b * consensus + a * gain * (y_i - x_i)


def _check_round_inputs(x: np.ndarray, w: np.ndarray, y: np.ndarray, g: Digraph, t: int) -> None:
    if x.ndim != 2 or x.shape[0] != g.n:
        raise DimensionError(f"Состояние размера {x.shape}, ожидается ({g.n}, M)")
    if y.shape != x.shape:
        raise DimensionError(f"Измерения размера {y.shape}, ожидается {x.shape}")
    if w.shape != (g.n,):
        raise DimensionError(f"Веса размера {w.shape}, ожидается ({g.n},)")
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"Нечисловое состояние на шаге {t}", step=t)


def row_blocks(n: int, count: int) -> Sequence[slice]:
    """Разбиение строк 0..n-1 на count последовательных блоков"""
    count = max(1, min(int(count), n))
    edges = np.linspace(0, n, count + 1).astype(int)
    return [slice(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def advance(x, w, y, gamma: float, params: ProtocolParams, g: Digraph, t: int,
            innovation: bool = True, executor: Optional[Executor] = None,
            blocks: Optional[Sequence[slice]] = None) -> RoundUpdate:
    """
    Синхронный раунд: чтение из снимка шага t, запись в новый буфер шага t+1.

    Сумма по входящим соседям считается построчно (CSR), поэтому любое
    разбиение строк на блоки дает побитово одинаковый результат.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_round_inputs(x, w, y, g, t)
    if gamma < 0:
        raise ValidationError(f"gamma должна быть неотрицательной: {gamma}")

    a = alpha(params, t)
    b = beta(params, t)
    weighted = w[:, np.newaxis] * x
    self_coefficient = 1.0 - b * w * g.out_degree
    adjacency = g.adjacency_csr

    out = np.empty_like(x)
    gains = np.zeros(g.n)

    def update_rows(rows: slice) -> None:
        own = x[rows]
        if innovation:
            gains[rows] = innovation_gains(y[rows], own, gamma)
        consensus = adjacency[rows] @ weighted
        out[rows] = (self_coefficient[rows, np.newaxis] * own + b * consensus
                     + a * gains[rows, np.newaxis] * (y[rows] - own))

    if executor is None or blocks is None or len(blocks) <= 1:
        update_rows(slice(0, g.n))
    else:
        # list() пробрасывает исключения из рабочих потоков
        list(executor.map(update_rows, blocks))

    return RoundUpdate(x=out, gains=gains)


def rewb_step(x, w, y, gamma: float, params: ProtocolParams, g: Digraph, t: int,
              innovation: bool = True, executor: Optional[Executor] = None,
              blocks: Optional[Sequence[slice]] = None) -> np.ndarray:
    """Новое состояние агентов x(t+1)"""
    return advance(x, w, y, gamma, params, g, t, innovation, executor, blocks).x


def rewb_step_agentwise(x, w, y, gamma: float, params: ProtocolParams, g: Digraph, t: int,
                        innovation: bool = True) -> np.ndarray:
    """Покомпонентная форма: каждый агент вызывает local_update со своими данными"""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_round_inputs(x, w, y, g, t)

    a = alpha(params, t)
    b = beta(params, t)
    out = np.empty_like(x)
    for i in range(g.n):
        neighbors = g.in_neighbors(i)
        out[i] = local_update(x[i], x[neighbors], w[neighbors], w[i], int(g.out_degree[i]),
                              y[i], gamma, a, b, innovation)
    return out


def rewb_step_matrix(x, w, y, gamma: float, params: ProtocolParams, g: Digraph, t: int,
                     innovation: bool = True) -> np.ndarray:
    """Матричная форма (I - beta(t) L(t)) x + alpha(t) K(t) (y - x)"""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_round_inputs(x, w, y, g, t)

    gains = innovation_gains(y, x, gamma) if innovation else np.zeros(g.n)
    lap = laplacian(g, w)
    return x - beta(params, t) * (lap @ x) + alpha(params, t) * (np.diag(gains) @ (y - x))
