"""
Модуль модели ориентированного графа связи агентов

Соглашение о смежности: A[i][j] = 1 тогда и только тогда, когда ребро (j -> i)
присутствует в графе, т.е. строка i матрицы A перечисляет входящих соседей
агента i (тех, кто отправляет ему данные).
"""
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Iterable, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from utils.errors import (
    GenerationBudgetError,
    NotStronglyConnectedError,
    StorageError,
    ValidationError,
)
from utils.logger import logger
from utils.rng import TAG_GRAPH, keyed_generator

Edge = Tuple[int, int]

# Бюджет попыток при генерации сильно связного графа
DEFAULT_GENERATION_ATTEMPTS = 1000


@dataclass(frozen=True)
class Digraph:
    """
    Ориентированный граф без петель и кратных ребер.

    Attributes:
        n: Число вершин (>= 2)
        edges: Упорядоченные пары (from, to): "from отправляет данные to"
    """
    n: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"Число вершин должно быть целым >= 2, получено: {self.n}")
        object.__setattr__(self, 'n', int(self.n))

        normalized = []
        for edge in self.edges:
            if len(edge) != 2:
                raise ValidationError(f"Ребро должно быть парой (from, to): {edge}")
            if not all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in edge):
                raise ValidationError(f"Вершины ребра должны быть целыми числами: {edge}")
            sender, receiver = int(edge[0]), int(edge[1])
            if not (0 <= sender < self.n and 0 <= receiver < self.n):
                raise ValidationError(f"Вершина ребра {edge} вне диапазона 0..{self.n - 1}")
            if sender == receiver:
                raise ValidationError(f"Петли запрещены: {edge}")
            normalized.append((sender, receiver))

        unique = sorted(set(normalized))
        if len(unique) != len(normalized):
            raise ValidationError("Кратные ребра запрещены")
        object.__setattr__(self, 'edges', tuple(unique))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> 'Digraph':
        """Построение графа из произвольной коллекции ребер"""
        return cls(n=n, edges=tuple(tuple(e) for e in edges))

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Плотная матрица смежности A (только для чтения)"""
        matrix = np.zeros((self.n, self.n), dtype=float)
        for sender, receiver in self.edges:
            matrix[receiver, sender] = 1.0
        matrix.flags.writeable = False
        return matrix

    @cached_property
    def adjacency_csr(self) -> sparse.csr_matrix:
        """Разреженная матрица смежности: строка i хранит только входящих соседей"""
        return sparse.csr_matrix(self.adjacency)

    @cached_property
    def out_degree(self) -> np.ndarray:
        """Полустепени исхода d_i^out (суммы столбцов A)"""
        degrees = self.adjacency.sum(axis=0).astype(np.int64)
        degrees.flags.writeable = False
        return degrees

    @cached_property
    def in_degree(self) -> np.ndarray:
        """Полустепени захода d_i^in (суммы строк A)"""
        degrees = self.adjacency.sum(axis=1).astype(np.int64)
        degrees.flags.writeable = False
        return degrees

    @property
    def d_max_out(self) -> int:
        return int(self.out_degree.max())

    @property
    def d_max_in(self) -> int:
        return int(self.in_degree.max())

    def in_neighbors(self, i: int) -> np.ndarray:
        """Входящие соседи N_i (кто отправляет данные агенту i)"""
        row = self.adjacency_csr
        return row.indices[row.indptr[i]:row.indptr[i + 1]].copy()

    def out_neighbors(self, i: int) -> np.ndarray:
        """Исходящие соседи O_i (кому агент i отправляет данные)"""
        return np.flatnonzero(self.adjacency[:, i])

    @cached_property
    def nx_graph(self) -> nx.DiGraph:
        """Представление networkx (ребро sender -> receiver)"""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def is_symmetric(self) -> bool:
        """Каждое ребро имеет обратное (неориентированный граф)"""
        edge_set = set(self.edges)
        return all((receiver, sender) in edge_set for sender, receiver in self.edges)

    def to_dict(self) -> Dict[str, Any]:
        """Формат файла графа: {"n": ..., "edges": [[from, to], ...]}"""
        return {'n': self.n, 'edges': [list(edge) for edge in self.edges]}


def digraph_from_dict(data: Dict[str, Any]) -> Digraph:
    """Разбор и проверка словаря в формате файла графа"""
    if not isinstance(data, dict):
        raise ValidationError("Файл графа должен содержать JSON-объект")

    unknown = set(data) - {'n', 'edges'}
    if unknown:
        raise ValidationError(f"Неизвестные ключи в файле графа: {', '.join(sorted(unknown))}")
    if 'n' not in data or 'edges' not in data:
        raise ValidationError("Файл графа должен содержать ключи 'n' и 'edges'")

    return Digraph.from_edges(data['n'], data['edges'])


def load_digraph(path: Union[str, Path]) -> Digraph:
    """Чтение графа из JSON-файла; сильная связность только сообщается в лог"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        logger.error(f"Не удалось прочитать файл графа {path}: {e}")
        raise StorageError(f"Не удалось прочитать файл графа {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"Файл графа {path} не является корректным JSON: {e}") from e

    graph = digraph_from_dict(data)
    connected = is_strongly_connected(graph)
    logger.info(f"Загружен граф {path}: n={graph.n}, ребер={len(graph.edges)}, сильно связный={connected}")
    return graph


def dump_digraph(g: Digraph) -> str:
    """Текст JSON в формате файла графа"""
    return json.dumps(g.to_dict(), sort_keys=True, indent=2) + '\n'


def cycle_digraph(n: int) -> Digraph:
    """Направленный цикл 0 -> 1 -> ... -> n-1 -> 0"""
    return Digraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_digraph(n: int) -> Digraph:
    """Полный ориентированный граф"""
    return Digraph.from_edges(n, [(i, j) for i in range(n) for j in range(n) if i != j])


def bidirectional_ring(n: int) -> Digraph:
    """Двунаправленное кольцо (симметричный граф)"""
    edges = set()
    for i in range(n):
        edges.add((i, (i + 1) % n))
        edges.add(((i + 1) % n, i))
    return Digraph.from_edges(n, edges)


def balancing_fixture() -> Digraph:
    """
    Граф из трех вершин {1->2, 1->3, 2->3, 3->1, 3->2} (в нумерации с нуля).

    Ребра восстановлены решением уравнений баланса w_i d_i^out = sum_{j in N_i} w_j:
    балансирующий вектор пропорционален (0.5, 1.5, 1).
    """
    return Digraph.from_edges(3, [(0, 1), (0, 2), (1, 2), (2, 0), (2, 1)])


def is_strongly_connected(g: Digraph) -> bool:
    """Существует ориентированный путь между любой упорядоченной парой вершин"""
    return nx.is_strongly_connected(g.nx_graph)


def require_protocol_ready(g: Digraph) -> None:
    """Проверка предусловий протокола: нет вершин без исходящих ребер, граф сильно связный"""
    sinks = np.flatnonzero(g.out_degree == 0)
    if sinks.size:
        raise NotStronglyConnectedError(
            f"Вершины без исходящих ребер: {sinks.tolist()[:10]}"
        )
    if not is_strongly_connected(g):
        raise NotStronglyConnectedError(f"Граф на {g.n} вершинах не является сильно связным")


def diameter(g: Digraph) -> int:
    """Максимум по упорядоченным парам длины кратчайшего ориентированного пути"""
    if not is_strongly_connected(g):
        raise NotStronglyConnectedError("Диаметр определен только для сильно связного графа")
    return int(nx.diameter(g.nx_graph))


def _sample_digraph(n: int, p: float, rng: np.random.Generator) -> Digraph:
    """Каждая упорядоченная пара (i, j), i != j, включается независимо с вероятностью p"""
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    senders, receivers = np.nonzero(mask)
    return Digraph(n=n, edges=tuple(zip(senders.tolist(), receivers.tolist())))


def generate_random_digraph(n: int, p: float, seed: int,
                            max_attempts: int = DEFAULT_GENERATION_ATTEMPTS) -> Digraph:
    """
    Генерация сильно связного случайного графа отбраковкой.

    Args:
        n: Число вершин (>= 2)
        p: Вероятность каждого ориентированного ребра, 0 < p <= 1
        seed: Master seed (детерминированность при фиксированных n, p, seed)
        max_attempts: Бюджет попыток

    Returns:
        Сильно связный граф
    """
    if int(n) != n or n < 2:
        raise ValidationError(f"Число вершин должно быть >= 2, получено: {n}")
    if not 0.0 < p <= 1.0:
        raise ValidationError(f"Вероятность ребра должна лежать в (0, 1], получено: {p}")

    rng = keyed_generator(seed, TAG_GRAPH, int(n))
    graph = None

    try:
        for attempt in Retrying(
                stop=stop_after_attempt(max_attempts),
                retry=retry_if_exception_type(NotStronglyConnectedError)
        ):
            with attempt:
                graph = _sample_digraph(int(n), float(p), rng)
                if not is_strongly_connected(graph):
                    logger.debug(f"Попытка {attempt.retry_state.attempt_number}: граф не сильно связный")
                    raise NotStronglyConnectedError("Граф не сильно связный")
    except RetryError as e:
        logger.error(f"Граф (n={n}, p={p}, seed={seed}) не сильно связный после {max_attempts} попыток")
        raise GenerationBudgetError(
            f"not strongly connected after budget: n={n}, p={p}, попыток={max_attempts}",
            attempts=max_attempts
        ) from e

    logger.info(f"Сгенерирован сильно связный граф: n={graph.n}, ребер={len(graph.edges)}")
    return graph
