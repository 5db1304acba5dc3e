"""
Модуль описания эксперимента: источник графа, параметры, траектория, атака, настройки прогона
"""
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple, Union

from adversary.attack import AttackPolicy
from adversary.trajectory import ParameterTrajectory
from graph.digraph import (
    Digraph,
    balancing_fixture,
    bidirectional_ring,
    complete_digraph,
    cycle_digraph,
    generate_random_digraph,
    load_digraph,
)
from protocol.params import ProtocolParams
from utils.converters import DataConverter
from utils.errors import ValidationError

GRAPH_KINDS = ('random', 'file', 'fixture')

NAMED_GRAPHS = {
    'balancing': lambda n: balancing_fixture(),
    'cycle': cycle_digraph,
    'bidirectional_ring': bidirectional_ring,
    'complete': complete_digraph,
}

INITIAL_STATES = ('zero', 'truth')


@dataclass(frozen=True)
class GraphSource:
    """
    Источник графа.

    kind=random: generate_random_digraph(n, p, seed или seed прогона)
    kind=file: JSON-файл path
    kind=fixture: именованный граф name на n вершинах
    """
    kind: str = 'random'
    n: int = 100
    p: float = 0.5
    seed: Optional[int] = None
    path: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ValidationError(f"Неизвестный источник графа: {self.kind}")
        if self.kind == 'file' and not self.path:
            raise ValidationError("Для графа из файла нужен path")
        if self.kind == 'fixture' and self.name not in NAMED_GRAPHS:
            raise ValidationError(f"Неизвестный именованный граф: {self.name}")

    def build(self, run_seed: int) -> Digraph:
        if self.kind == 'random':
            return generate_random_digraph(self.n, self.p, run_seed if self.seed is None else self.seed)
        if self.kind == 'file':
            return load_digraph(self.path)
        return NAMED_GRAPHS[self.name](self.n)


@dataclass(frozen=True)
class OutputPaths:
    """Пути результатов прогона (None - не записывать)"""
    csv: Optional[str] = None
    summary: Optional[str] = None
    svg: Optional[str] = None
    states: Optional[str] = None


@dataclass(frozen=True)
class RunSettings:
    """
    Настройки прогона.

    Attributes:
        horizon: Число шагов T
        seed: Master seed
        stride: Запись каждой stride-й строки (и шага T)
        strict: Строгий режим (достаточные условия и граница ошибки обязательны)
        outputs: Пути результатов
        checkpoints: Шаги полных снимков состояния
        pre_balance_rounds: Итерации балансировки до начала оценивания
        initial_state: 'zero' | 'truth' | число | значения агентов (N или N x M)
        innovation: False принудительно обнуляет k_i(t)
        gamma1_0, gamma2_0: Начальные значения gamma-системы (gamma2_0=None -> Theta)
        workers: Число потоков внутри прогона
        label: Метка прогона в отчетах
    """
    horizon: int = 100000
    seed: int = 0
    stride: int = 10
    strict: bool = False
    outputs: OutputPaths = field(default_factory=OutputPaths)
    checkpoints: Tuple[int, ...] = ()
    pre_balance_rounds: int = 0
    initial_state: Union[str, float, Tuple] = 'zero'
    innovation: bool = True
    gamma1_0: float = 0.0
    gamma2_0: Optional[float] = None
    workers: int = 1
    label: str = 'rewb'

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValidationError(f"Горизонт должен быть целым >= 1: {self.horizon}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValidationError(f"Шаг записи должен быть целым >= 1: {self.stride}")
        if self.pre_balance_rounds < 0:
            raise ValidationError(f"pre_balance_rounds должно быть >= 0: {self.pre_balance_rounds}")
        if self.workers < 1:
            raise ValidationError(f"Число потоков должно быть >= 1: {self.workers}")
        if isinstance(self.initial_state, str) and self.initial_state not in INITIAL_STATES:
            raise ValidationError(f"Неизвестное начальное состояние: {self.initial_state}")
        if any(c < 0 or c > self.horizon for c in self.checkpoints):
            raise ValidationError(f"Контрольные точки вне 0..{self.horizon}: {self.checkpoints}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Полное описание эксперимента"""
    graph: GraphSource = field(default_factory=GraphSource)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    trajectory: ParameterTrajectory = field(default_factory=ParameterTrajectory)
    attack: AttackPolicy = field(default_factory=AttackPolicy)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        # Theta, theta1 и s протокола берутся из траектории и политики атаки
        synced = replace(self.protocol, Theta=self.trajectory.Theta, theta1=self.trajectory.theta1, s=self.attack.s)
        object.__setattr__(self, 'protocol', synced)
        if self.attack.seed != self.run.seed:
            object.__setattr__(self, 'attack', replace(self.attack, seed=self.run.seed))

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        return replace(self, run=replace(self.run, seed=int(seed)))

    def with_run(self, **changes) -> 'ExperimentConfig':
        return replace(self, run=replace(self.run, **changes))

    def with_protocol(self, **changes) -> 'ExperimentConfig':
        return replace(self, protocol=replace(self.protocol, **changes))

    def with_attack(self, **changes) -> 'ExperimentConfig':
        return replace(self, attack=replace(self.attack, **changes))

    def to_dict(self) -> Dict[str, Any]:
        """Полностью заполненный словарь конфигурации (таблицы - списком строк)"""
        trajectory = asdict(self.trajectory)
        trajectory['table'] = self.trajectory.table.to_rows() if self.trajectory.table else None
        attack = asdict(self.attack)
        attack['table'] = self.attack.table.to_rows() if self.attack.table else None
        attack.pop('seed')

        protocol = self.protocol.to_dict()
        for synced in ('Theta', 'theta1', 's'):
            protocol.pop(synced)

        run = asdict(self.run)
        run['checkpoints'] = list(self.run.checkpoints)
        # Метка, пути и число потоков не влияют на результат
        for cosmetic in ('workers', 'label', 'outputs'):
            run.pop(cosmetic)

        return DataConverter.to_jsonable({
            'graph': asdict(self.graph),
            'protocol': protocol,
            'trajectory': trajectory,
            'attack': attack,
            'run': run,
        })

    @property
    def config_hash(self) -> str:
        return DataConverter.config_hash(self.to_dict())


def config_differences(a: ExperimentConfig, b: ExperimentConfig) -> List[str]:
    """Пути полей (section.key), различающихся в двух конфигурациях"""
    left, right = a.to_dict(), b.to_dict()
    differences = []
    for section in sorted(set(left) | set(right)):
        keys = set(left.get(section, {})) | set(right.get(section, {}))
        for key in sorted(keys):
            if left.get(section, {}).get(key) != right.get(section, {}).get(key):
                differences.append(f"{section}.{key}")
    return differences
