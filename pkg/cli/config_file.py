"""
Модуль файла конфигурации эксперимента (JSON)

Секции: graph, protocol, trajectory, attack, run. Неизвестные секции и ключи
отклоняются; значения по умолчанию воспроизводят опубликованную симуляцию
(N=100, p=0.5, |B|=40, равномерная отрицательная подмена).
"""
import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from adversary.attack import AttackPolicy
from adversary.tables import ValueTable, load_table, table_from_rows
from adversary.trajectory import ParameterTrajectory
from engine.experiment import ExperimentConfig, GraphSource, OutputPaths, RunSettings
from protocol.params import ProtocolParams
from utils.errors import ConfigFileError, StorageError, ValidationError
from utils.logger import logger

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    'graph': {
        'kind': 'random',
        'n': 100,
        'p': 0.5,
        'seed': None,
        'path': None,
        'name': None,
    },
    'protocol': {
        'alpha0': 0.01,
        'alpha1': 0.075,
        'beta0': 0.01,
        'beta1': 0.01,
        'mu0': 0.025,
        'mu1': 0.025,
        'c1': 75.0,
        'c2': 75.0,
        'eta': 0.5,
        'weight_mode': 'dynamic',
        'initial_weight': 0.1,
    },
    'trajectory': {
        'dimension': 1,
        'Theta': 50.0,
        'theta1': 1.0,
        'kind': 'harmonic',
        'base': 25.0,
        'table': None,
    },
    'attack': {
        's': 0.405,
        'mode': 'fixed',
        'spoof': 'uniform_negative',
        'constant_factor': 5.0,
        'table': None,
    },
    'run': {
        'horizon': 100000,
        'seed': 0,
        'stride': 10,
        'strict': False,
        'outputs': {
            'csv': 'run.csv',
            'summary': 'summary.json',
            'svg': None,
            'states': None,
        },
        'checkpoints': [],
        'pre_balance_rounds': 0,
        'initial_state': 'zero',
        'innovation': True,
        'gamma1_0': 0.0,
        'gamma2_0': None,
        'workers': 1,
        'label': 'rewb',
    },
}


def _merge_section(name: str, defaults: Dict[str, Any], given: Any) -> Dict[str, Any]:
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        raise ConfigFileError(f"Секция '{name}' должна быть JSON-объектом")

    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigFileError(f"Неизвестные ключи в секции '{name}': {', '.join(sorted(unknown))}")

    merged = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(defaults[key], dict):
            merged[key] = _merge_section(f"{name}.{key}", defaults[key], value)
        else:
            merged[key] = value
    return merged


def merge_with_defaults(data: Dict[str, Any]) -> Dict[str, Any]:
    """Полностью заполненный словарь конфигурации; неизвестные ключи - ConfigFileError"""
    if not isinstance(data, dict):
        raise ConfigFileError("Файл конфигурации должен содержать JSON-объект")
    unknown = set(data) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigFileError(f"Неизвестные секции конфигурации: {', '.join(sorted(unknown))}")
    return {name: _merge_section(name, defaults, data.get(name)) for name, defaults in DEFAULT_CONFIG.items()}


def _resolve_table(value: Any, dimension: int, base_dir: Optional[Path]) -> Optional[ValueTable]:
    """Таблица задается путем к CSV или списком строк [t, agent|null, value...]"""
    if value is None:
        return None
    if isinstance(value, str):
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_table(path, dimension=dimension)
    if isinstance(value, list):
        return table_from_rows(value, dimension=dimension)
    raise ConfigFileError(f"Таблица должна быть путем или списком строк, получено: {type(value).__name__}")


def _build(section: str, factory, values: Dict[str, Any]):
    try:
        return factory(**values)
    except (ValidationError, TypeError) as e:
        raise ConfigFileError(f"[{section}] {e}") from e


def parse_config(data: Dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Разбор словаря конфигурации в ExperimentConfig.

    Args:
        data: Содержимое файла конфигурации
        base_dir: Каталог для относительных путей таблиц и графа
    """
    merged = merge_with_defaults(data)

    graph_values = dict(merged['graph'])
    if graph_values.get('path') and base_dir is not None and not Path(graph_values['path']).is_absolute():
        graph_values['path'] = str(base_dir / graph_values['path'])
    graph = _build('graph', GraphSource, graph_values)

    protocol = _build('protocol', ProtocolParams, merged['protocol'])

    trajectory_values = dict(merged['trajectory'])
    trajectory_values['table'] = _resolve_table(trajectory_values['table'], trajectory_values['dimension'], base_dir)
    trajectory = _build('trajectory', ParameterTrajectory, trajectory_values)

    attack_values = dict(merged['attack'])
    attack_values['table'] = _resolve_table(attack_values['table'], trajectory.dimension, base_dir)
    attack_values['seed'] = merged['run']['seed']
    attack = _build('attack', AttackPolicy, attack_values)

    run_values = dict(merged['run'])
    run_values['outputs'] = _build('run.outputs', OutputPaths, run_values['outputs'])
    run_values['checkpoints'] = tuple(int(c) for c in run_values['checkpoints'])
    if isinstance(run_values['initial_state'], list):
        run_values['initial_state'] = tuple(
            tuple(v) if isinstance(v, list) else v for v in run_values['initial_state']
        )
    settings = _build('run', RunSettings, run_values)

    return _build('config', ExperimentConfig,
                  {'graph': graph, 'protocol': protocol, 'trajectory': trajectory, 'attack': attack, 'run': settings})


def load_config(path: Optional[Union[str, Path]]) -> ExperimentConfig:
    """Чтение файла конфигурации; без пути - конфигурация по умолчанию"""
    if path is None:
        return parse_config({})

    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        logger.error(f"Не удалось прочитать конфигурацию {path}: {e}")
        raise StorageError(f"Не удалось прочитать конфигурацию {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigFileError(f"Конфигурация {path} не является корректным JSON: {e}") from e

    config = parse_config(data, base_dir=path.parent)
    logger.debug(f"Загружена конфигурация {path}, хеш {config.config_hash}")
    return config


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, strict: Optional[bool] = None,
                    stride: Optional[int] = None, horizon: Optional[int] = None) -> ExperimentConfig:
    """Переопределение настроек прогона флагами командной строки"""
    changes = {}
    if seed is not None:
        changes['seed'] = int(seed)
    if strict is not None:
        changes['strict'] = bool(strict)
    if stride is not None:
        changes['stride'] = int(stride)
    if horizon is not None:
        changes['horizon'] = int(horizon)
    if not changes:
        return config
    try:
        return config.with_run(**changes)
    except ValidationError as e:
        raise ConfigFileError(f"[run] {e}") from e
