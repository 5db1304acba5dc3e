"""
Модуль для записи результатов на диск

Все файлы пишутся атомарно: временный файл в целевом каталоге + os.replace.
"""
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from utils.config import Config
from utils.converters import DataConverter
from utils.errors import StorageError
from utils.logger import logger

PathLike = Union[str, Path]

STATES_SCHEMA = 'rewb-states/1'


class ResultStore:
    """Класс для атомарной записи CSV/JSON/текстовых результатов"""

    def __init__(self, base_dir: Optional[PathLike] = None):
        self.config = Config()
        self.base_dir = Path(base_dir if base_dir is not None else self.config.REWB_OUTPUT_DIR)

    def resolve(self, path: PathLike) -> Path:
        """Относительные пути считаются от base_dir"""
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    @staticmethod
    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.1, min=0.1, max=1),
        retry=retry_if_exception_type(OSError),
        reraise=True
    )
    def _replace(source: str, target: Path):
        os.replace(source, target)

    @contextmanager
    def open_atomic(self, path: PathLike) -> Iterator[Any]:
        """Контекстный менеджер для записи во временный файл с последующей заменой целевого"""
        target = self.resolve(path)
        handle = None
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            handle = tempfile.NamedTemporaryFile(
                'w', encoding='utf-8', newline='', dir=target.parent,
                prefix=f".{target.name}.", suffix='.tmp', delete=False
            )
            with handle:
                yield handle
            self._replace(handle.name, target)
        except OSError as e:
            if handle is not None and os.path.exists(handle.name):
                os.unlink(handle.name)
            logger.error(f"Ошибка записи {target}: {e}")
            raise StorageError(f"Ошибка записи {target}: {e}") from e
        except BaseException:
            if handle is not None and os.path.exists(handle.name):
                os.unlink(handle.name)
            raise

        logger.info(f"Записан файл {target}")

    def write_text(self, text: str, path: PathLike) -> Path:
        with self.open_atomic(path) as f:
            f.write(text)
        return self.resolve(path)

    def write_json(self, data: Dict[str, Any], path: PathLike) -> Path:
        """JSON с сортированными ключами и отступом 2"""
        text = json.dumps(DataConverter.to_jsonable(data), sort_keys=True, indent=2,
                          default=DataConverter.json_default)
        return self.write_text(text + '\n', path)

    def write_csv(self, frame: pd.DataFrame, path: PathLike, schema: str,
                  config_hash: Optional[str] = None) -> Path:
        """
        CSV с 17 значащими цифрами.

        Первая строка - комментарий со схемой и списком колонок,
        вторая (если задан хеш) - хеш конфигурации.
        """
        with self.open_atomic(path) as f:
            f.write(f"# schema: {schema} columns={','.join(map(str, frame.columns))}\n")
            if config_hash:
                f.write(f"# config_hash: {config_hash}\n")
            frame.to_csv(f, index=False, float_format=DataConverter.FLOAT_FORMAT, lineterminator='\n')
        return self.resolve(path)

    def write_states(self, snapshots: Dict[int, np.ndarray], path: PathLike,
                     config_hash: Optional[str] = None) -> Path:
        """Снимки состояний: строки (t, agent, x_0..x_{M-1})"""
        rows = []
        dimension = 0
        for t in sorted(snapshots):
            state = np.asarray(snapshots[t])
            dimension = state.shape[1]
            for agent, values in enumerate(state):
                rows.append([int(t), agent, *values.tolist()])
        columns = ['t', 'agent', *[f'x_{k}' for k in range(dimension)]]
        return self.write_csv(pd.DataFrame(rows, columns=columns), path, STATES_SCHEMA, config_hash)

    @staticmethod
    def read_json(path: PathLike) -> Any:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except OSError as e:
            logger.error(f"Ошибка чтения {path}: {e}")
            raise StorageError(f"Ошибка чтения {path}: {e}") from e

    @staticmethod
    def read_csv(path: PathLike, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Чтение CSV результатов (строки-комментарии пропускаются)"""
        try:
            frame = pd.read_csv(path, comment='#', float_precision='round_trip')
        except OSError as e:
            logger.error(f"Ошибка чтения {path}: {e}")
            raise StorageError(f"Ошибка чтения {path}: {e}") from e
        if columns is not None:
            return frame.loc[:, list(columns)]
        return frame
