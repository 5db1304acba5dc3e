"""
Модуль атаки на датчики: выбор множества плохих агентов B(t) и подмена измерений

y_i(t) = theta*(t)            для i из G(t)
y_i(t) = theta*(t) + zeta_i(t) для i из B(t)
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from adversary.tables import ValueTable
from adversary.trajectory import ParameterTrajectory, theta_star
from utils.errors import ValidationError
from utils.rng import TAG_BAD_SET, TAG_SPOOF, keyed_generator

MEMBERSHIP_MODES = ('fixed', 'resample')
SPOOF_MODELS = ('uniform_negative', 'constant', 'table')

# zeta = 5 * Theta для модели constant
DEFAULT_CONSTANT_FACTOR = 5.0

# Защита floor(s*N) от ошибок округления (0.29 * 100 = 28.999999999999996)
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class AttackPolicy:
    """
    Политика атаки.

    Attributes:
        s: Индекс устойчивости, 0 <= s < 1/2
        mode: fixed (одно множество на весь прогон) | resample (новое на каждом шаге)
        spoof: uniform_negative (zeta ~ U[-Theta, 0]) | constant (zeta = factor * Theta) | table
        constant_factor: Множитель Theta для модели constant
        table: Таблица zeta по (t, agent) для модели table; отсутствующие записи дают zeta = 0
        seed: Master seed потоков случайных чисел
    """
    s: float = 0.405
    mode: str = 'fixed'
    spoof: str = 'uniform_negative'
    constant_factor: float = DEFAULT_CONSTANT_FACTOR
    table: Optional[ValueTable] = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.s < 0.5:
            raise ValidationError(f"Индекс устойчивости s должен лежать в [0, 1/2): {self.s}")
        if self.mode not in MEMBERSHIP_MODES:
            raise ValidationError(f"Неизвестный режим множества плохих агентов: {self.mode}")
        if self.spoof not in SPOOF_MODELS:
            raise ValidationError(f"Неизвестная модель подмены: {self.spoof}")
        if self.spoof == 'table' and self.table is None:
            raise ValidationError("Для модели подмены 'table' нужна таблица")

    def bad_count(self, n: int) -> int:
        """b = floor(s * N)"""
        return int(math.floor(self.s * n + _FLOOR_EPS))


def select_bad_set(policy: AttackPolicy, t: int, n: int) -> np.ndarray:
    """
    Множество плохих агентов B(t) (отсортированные индексы).

    Поток случайных чисел зависит только от (seed, t), поэтому результат
    не зависит от порядка вычислений.
    """
    b = policy.bad_count(n)
    if b > n:
        raise ValidationError(f"Число плохих агентов {b} больше числа агентов {n}")
    if b == 0:
        return np.empty(0, dtype=np.int64)

    if policy.mode == 'fixed':
        rng = keyed_generator(policy.seed, TAG_BAD_SET, n)
    else:
        rng = keyed_generator(policy.seed, TAG_BAD_SET, n, t)
    return np.sort(rng.choice(n, size=b, replace=False)).astype(np.int64)


def bad_mask(policy: AttackPolicy, t: int, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[select_bad_set(policy, t, n)] = True
    return mask


def spoof_values(traj: ParameterTrajectory, policy: AttackPolicy, t: int, n: int) -> np.ndarray:
    """
    Матрица N x M значений zeta_i(t) для всех агентов (строки хороших агентов не используются).

    Для uniform_negative строка i - компоненты агента i из потока (seed, t).
    """
    shape = (n, traj.dimension)
    if policy.spoof == 'uniform_negative':
        rng = keyed_generator(policy.seed, TAG_SPOOF, t)
        return rng.uniform(-traj.Theta, 0.0, size=shape)
    if policy.spoof == 'constant':
        return np.full(shape, policy.constant_factor * traj.Theta)

    values = np.zeros(shape)
    for i in range(n):
        entry = policy.table.lookup(t, i)
        if entry is not None:
            values[i] = entry
    return values


def measure_all(traj: ParameterTrajectory, policy: AttackPolicy, t: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Измерения всех агентов на шаге t.

    Returns:
        (y размера N x M, булева маска B(t))
    """
    truth = theta_star(traj, t)
    y = np.tile(truth, (n, 1))
    mask = bad_mask(policy, t, n)
    if mask.any():
        zeta = spoof_values(traj, policy, t, n)
        y[mask] = truth + zeta[mask]
    return y, mask


def measure(traj: ParameterTrajectory, policy: AttackPolicy, t: int, i: int, n: int) -> np.ndarray:
    """Измерение агента i на шаге t; совпадает со строкой i из measure_all"""
    if not 0 <= i < n:
        raise ValidationError(f"Агент {i} вне диапазона 0..{n - 1}")
    y, _ = measure_all(traj, policy, t, n)
    return y[i]
