"""
Модуль для конвертации и нормализации данных
"""
import hashlib
import json
import math
from typing import Any, Dict, Optional

import numpy as np

from utils.logger import logger


class DataConverter:
    """Класс для конвертации различных типов данных"""

    # 17 значащих цифр достаточно для точного восстановления float64
    FLOAT_FORMAT = '%.17g'

    @staticmethod
    def format_float(value: float) -> str:
        """Сериализация числа с 17 значащими цифрами"""
        return DataConverter.FLOAT_FORMAT % float(value)

    @staticmethod
    def safe_float(value: Any, default: Optional[float] = None) -> Optional[float]:
        """Безопасное преобразование в float (NaN/inf заменяются на default)"""
        if value is None:
            return default
        try:
            result = float(value)
        except (TypeError, ValueError):
            return default
        if not math.isfinite(result):
            return default
        return result

    @staticmethod
    def normalize_max(weights: np.ndarray) -> np.ndarray:
        """
        Масштабирование вектора весов так, чтобы максимальный элемент был равен 1
        Например: (0.5, 1.5, 1) -> (1/3, 1, 2/3)
        """
        weights = np.asarray(weights, dtype=float)
        peak = float(np.max(np.abs(weights)))
        if peak == 0.0:
            logger.warning("Нормализация нулевого вектора весов")
            return weights.copy()
        return weights / peak

    @staticmethod
    def canonical_json(data: Dict[str, Any]) -> str:
        """Каноническое JSON-представление (сортированные ключи, без пробелов)"""
        return json.dumps(data, sort_keys=True, separators=(',', ':'), default=DataConverter.json_default)

    @staticmethod
    def config_hash(data: Dict[str, Any]) -> str:
        """SHA-256 от канонического JSON конфигурации"""
        return hashlib.sha256(DataConverter.canonical_json(data).encode('utf-8')).hexdigest()

    @staticmethod
    def to_jsonable(value: Any) -> Any:
        """Приведение numpy-типов к типам, понятным json"""
        if isinstance(value, dict):
            return {str(k): DataConverter.to_jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [DataConverter.to_jsonable(v) for v in value]
        if isinstance(value, np.ndarray):
            return [DataConverter.to_jsonable(v) for v in value.tolist()]
        if isinstance(value, np.integer):
            return int(value)
        if isinstance(value, np.floating):
            return float(value)
        if isinstance(value, np.bool_):
            return bool(value)
        return value

    @staticmethod
    def json_default(value: Any) -> Any:
        """Обработчик default для json.dumps: numpy-типы, иначе TypeError"""
        converted = DataConverter.to_jsonable(value)
        if converted is value:
            raise TypeError(f"Тип {type(value).__name__} не сериализуется в JSON")
        return converted
