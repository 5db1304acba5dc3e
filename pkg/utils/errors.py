"""
Модуль с иерархией исключений симулятора
"""
from typing import Any, List, Optional, Sequence


class RewbError(Exception):
    """Базовое исключение симулятора"""

    exit_code = 1


class ValidationError(RewbError, ValueError):
    """Некорректные входные данные: граф, параметры, конфигурация"""

    exit_code = 2


class DimensionError(ValidationError):
    """Несогласованные размерности векторов и матриц"""


class NotStronglyConnectedError(ValidationError):
    """Граф не является сильно связным"""


class GenerationBudgetError(ValidationError):
    """Исчерпан бюджет попыток генерации сильно связного графа"""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ParameterError(ValidationError):
    """Нарушены ограничения на параметры протокола"""

    def __init__(self, message: str, diagnostics: Optional[Sequence[Any]] = None):
        super().__init__(message)
        self.diagnostics: List[Any] = list(diagnostics or [])


class ConfigFileError(ValidationError):
    """Ошибка в файле конфигурации эксперимента"""


class BalancingError(RewbError):
    """Итерации балансировки весов не сошлись"""

    exit_code = 3

    def __init__(self, message: str, residual_history: Sequence[float]):
        super().__init__(message)
        self.residual_history: List[float] = list(residual_history)


class DivergenceError(RewbError):
    """В состоянии агентов появились нечисловые значения"""

    exit_code = 3

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class EnvelopeViolationError(RewbError):
    """Ошибка оценки вышла за границу sqrt(N)*gamma(t) в строгом режиме"""

    exit_code = 3

    def __init__(self, message: str, step: int, error: float, bound: float):
        super().__init__(message)
        self.step = step
        self.error = error
        self.bound = bound


class StorageError(RewbError):
    """Ошибка чтения или записи файлов результатов"""

    exit_code = 4
