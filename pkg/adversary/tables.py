"""
Модуль пользовательских таблиц значений (theta* и zeta)

CSV с колонками t, agent, value; пустой agent означает "все агенты".
Для векторных значений вместо value используются колонки value_0..value_{M-1}.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.converters import DataConverter
from utils.errors import ConfigFileError, StorageError
from utils.logger import logger

TableKey = Tuple[int, Optional[int]]


@dataclass(frozen=True)
class ValueTable:
    """
    Таблица значений по шагам и агентам.

    Attributes:
        dimension: Размерность значения M
        entries: (t, agent или None) -> вектор длины M
    """
    dimension: int
    entries: Dict[TableKey, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigFileError(f"Размерность таблицы должна быть >= 1: {self.dimension}")
        for key, value in self.entries.items():
            if np.shape(value) != (self.dimension,):
                raise ConfigFileError(f"Значение для {key} имеет размер {np.shape(value)}")
            if not np.all(np.isfinite(value)):
                raise ConfigFileError(f"Нечисловое значение в таблице для {key}")

    @property
    def shared_steps(self) -> np.ndarray:
        """Шаги со значениями, общими для всех агентов (по возрастанию)"""
        return np.array(sorted(t for t, agent in self.entries if agent is None), dtype=np.int64)

    def lookup(self, t: int, agent: Optional[int] = None) -> Optional[np.ndarray]:
        """Точное значение для (t, agent), иначе общее значение шага t, иначе None"""
        if agent is not None and (t, agent) in self.entries:
            return self.entries[(t, agent)]
        return self.entries.get((t, None))

    def hold(self, t: int) -> np.ndarray:
        """Последнее общее значение на шаге <= t (до первого шага - первое значение)"""
        steps = self.shared_steps
        if steps.size == 0:
            raise ConfigFileError("Таблица не содержит общих (без агента) значений")
        position = int(np.searchsorted(steps, t, side='right')) - 1
        return self.entries[(int(steps[max(position, 0)]), None)]

    def hold_many(self, steps) -> np.ndarray:
        """Векторный вариант hold: матрица len(steps) x M"""
        shared = self.shared_steps
        if shared.size == 0:
            raise ConfigFileError("Таблица не содержит общих (без агента) значений")
        values = np.stack([self.entries[(int(s), None)] for s in shared])
        positions = np.searchsorted(shared, np.asarray(steps), side='right') - 1
        return values[np.clip(positions, 0, None)]

    def last_value(self) -> np.ndarray:
        return self.entries[(int(self.shared_steps[-1]), None)]

    def to_rows(self) -> List[list]:
        """Строки [t, agent|None, value...] в детерминированном порядке"""
        ordered = sorted(self.entries.items(), key=lambda item: (item[0][0], -1 if item[0][1] is None else item[0][1]))
        return [[t, agent, *value.tolist()] for (t, agent), value in ordered]


def table_from_rows(rows: Iterable[Sequence], dimension: Optional[int] = None) -> ValueTable:
    """Построение таблицы из строк [t, agent|None, value_0, ...]"""
    entries: Dict[TableKey, np.ndarray] = {}
    for row in rows:
        if len(row) < 3:
            raise ConfigFileError(f"Строка таблицы должна содержать t, agent, value: {row}")
        t = int(row[0])
        if t < 0:
            raise ConfigFileError(f"Шаг таблицы должен быть неотрицательным: {t}")
        agent = None if row[1] is None or row[1] == '' else int(row[1])
        parsed = [DataConverter.safe_float(v) for v in row[2:]]
        if any(v is None for v in parsed):
            raise ConfigFileError(
                f"Значения таблицы для t={t}, agent={agent} должны быть конечными числами: {list(row[2:])}"
            )
        value = np.array(parsed, dtype=float)
        if dimension is None:
            dimension = value.size
        if value.size == 1 and dimension > 1:
            value = np.full(dimension, float(value[0]))
        key = (t, agent)
        if key in entries:
            raise ConfigFileError(f"Повторная запись таблицы для t={t}, agent={agent}")
        entries[key] = value

    if not entries:
        raise ConfigFileError("Таблица пуста")
    return ValueTable(dimension=int(dimension), entries=entries)


def load_table(path: Union[str, Path], dimension: Optional[int] = None) -> ValueTable:
    """
    Загрузка таблицы из CSV.

    Args:
        path: Путь к CSV (строки с '#' игнорируются)
        dimension: Ожидаемая размерность M (по умолчанию по числу колонок значений)

    Returns:
        ValueTable
    """
    try:
        frame = pd.read_csv(path, comment='#', dtype={'agent': 'string'}, keep_default_na=False,
                            float_precision='round_trip')
    except (OSError, pd.errors.EmptyDataError) as e:
        logger.error(f"Не удалось прочитать таблицу {path}: {e}")
        raise StorageError(f"Не удалось прочитать таблицу {path}: {e}") from e

    columns = [str(c).strip() for c in frame.columns]
    frame.columns = columns
    if 't' not in columns or 'agent' not in columns:
        raise ConfigFileError(f"Таблица {path} должна содержать колонки t, agent")

    if 'value' in columns:
        value_columns = ['value']
    else:
        value_columns = sorted((c for c in columns if c.startswith('value_')),
                               key=lambda c: int(c.split('_', 1)[1]))
    if not value_columns:
        raise ConfigFileError(f"Таблица {path} не содержит колонок значений")

    unknown = set(columns) - {'t', 'agent', *value_columns}
    if unknown:
        raise ConfigFileError(f"Неизвестные колонки в таблице {path}: {', '.join(sorted(unknown))}")

    try:
        rows = [
            [int(record['t']), (str(record['agent']).strip() or None),
             *[record[c] for c in value_columns]]
            for record in frame.to_dict(orient='records')
        ]
    except (TypeError, ValueError) as e:
        raise ConfigFileError(f"Некорректное значение в таблице {path}: {e}") from e

    table = table_from_rows(rows, dimension=dimension)
    logger.debug(f"Загружена таблица {path}: {len(table.entries)} записей, M={table.dimension}")
    return table
