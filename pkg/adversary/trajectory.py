"""
Модуль траектории неизвестного параметра theta*(t)

Ограничения на траекторию:
    ||theta*(t)|| <= Theta
    ||theta*(t+1) - theta*(t)|| <= 1 / (1 + t)^theta1
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from adversary.tables import ValueTable
from utils.errors import ValidationError
from utils.logger import logger

TRAJECTORY_KINDS = ('harmonic', 'constant', 'table')

# theta*(t) = base + 1/(t+1) для траектории по умолчанию
DEFAULT_BASE = 25.0


@dataclass(frozen=True)
class ParameterTrajectory:
    """
    Генератор theta*(t).

    Attributes:
        dimension: Размерность параметра M
        Theta: Граница нормы
        theta1: Показатель затухания вариации
        kind: harmonic | constant | table
        base: Предельное значение (harmonic) или константа (constant)
        table: Таблица значений для kind='table' (удерживается до следующей записи)
    """
    dimension: int = 1
    Theta: float = 50.0
    theta1: float = 1.0
    kind: str = 'harmonic'
    base: float = DEFAULT_BASE
    table: Optional[ValueTable] = None

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValidationError(f"Размерность параметра должна быть >= 1: {self.dimension}")
        if not self.Theta > 0:
            raise ValidationError(f"Theta должна быть положительной: {self.Theta}")
        if not self.theta1 > 0:
            raise ValidationError(f"theta1 должна быть положительной: {self.theta1}")
        if self.kind not in TRAJECTORY_KINDS:
            raise ValidationError(f"Неизвестный вид траектории: {self.kind}")
        if self.kind == 'table':
            if self.table is None:
                raise ValidationError("Для траектории вида 'table' нужна таблица")
            if self.table.dimension != self.dimension:
                raise ValidationError(
                    f"Размерность таблицы {self.table.dimension} != размерности параметра {self.dimension}"
                )


@dataclass(frozen=True)
class TrajectoryViolation:
    """Нарушение ограничения на шаге t: kind = 'norm' | 'variation'"""
    t: int
    kind: str
    value: float
    bound: float


def theta_star(traj: ParameterTrajectory, t: int) -> np.ndarray:
    """Значение theta*(t) (вектор длины M)"""
    if t < 0:
        raise ValidationError(f"Шаг должен быть неотрицательным: {t}")
    if traj.kind == 'harmonic':
        return np.full(traj.dimension, traj.base + 1.0 / (t + 1))
    if traj.kind == 'constant':
        return np.full(traj.dimension, float(traj.base))
    return np.array(traj.table.hold(t), dtype=float)


def theta_star_series(traj: ParameterTrajectory, horizon: int) -> np.ndarray:
    """Матрица (horizon+1) x M значений theta*(0..horizon)"""
    steps = np.arange(horizon + 1)
    if traj.kind == 'harmonic':
        column = traj.base + 1.0 / (steps + 1.0)
        return np.repeat(column[:, np.newaxis], traj.dimension, axis=1)
    if traj.kind == 'constant':
        return np.full((horizon + 1, traj.dimension), float(traj.base))
    return traj.table.hold_many(steps)


def theta_limit(traj: ParameterTrajectory) -> np.ndarray:
    """Предельное значение траектории"""
    if traj.kind == 'table':
        return np.array(traj.table.last_value(), dtype=float)
    return np.full(traj.dimension, float(traj.base))


def _variation_series(traj: ParameterTrajectory, horizon: int):
    series = theta_star_series(traj, horizon)
    norms = np.linalg.norm(series, axis=1)
    variations = np.linalg.norm(np.diff(series, axis=0), axis=1)
    bounds = 1.0 / (1.0 + np.arange(horizon)) ** traj.theta1
    return norms, variations, bounds


def validate_trajectory(traj: ParameterTrajectory, horizon: int) -> List[TrajectoryViolation]:
    """
    Проверка ограничений траектории на шагах 0..horizon.

    Returns:
        Список нарушений (пустой, если оба ограничения выполнены)
    """
    if horizon < 1:
        raise ValidationError(f"Горизонт проверки должен быть >= 1: {horizon}")

    norms, variations, bounds = _variation_series(traj, horizon)
    violations = [
        TrajectoryViolation(t=int(t), kind='norm', value=float(norms[t]), bound=float(traj.Theta))
        for t in np.flatnonzero(norms > traj.Theta)
    ]
    violations.extend(
        TrajectoryViolation(t=int(t), kind='variation', value=float(variations[t]), bound=float(bounds[t]))
        for t in np.flatnonzero(variations > bounds)
    )
    violations.sort(key=lambda v: (v.t, v.kind))

    if violations:
        scale = variation_scale(traj, horizon)
        logger.warning(f"Траектория нарушает ограничения в {len(violations)} точках "
                       f"(первая: t={violations[0].t}, {violations[0].kind}); "
                       f"масштаб вариации {scale:.4g}")
    return violations


def variation_scale(traj: ParameterTrajectory, horizon: int) -> float:
    """max_t ||theta*(t+1) - theta*(t)|| (1+t)^theta1; значение > 1 означает масштабированную вариацию"""
    _, variations, bounds = _variation_series(traj, horizon)
    if variations.size == 0:
        return 0.0
    return float(np.max(variations / bounds))
