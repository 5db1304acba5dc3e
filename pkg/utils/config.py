"""
Модуль для работы с конфигурацией процесса
"""
import os
from dotenv import load_dotenv

from utils.errors import ValidationError


class Config:
    """Класс для управления настройками процесса (переменные окружения)"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self._initialized = True
        load_dotenv()

        # Logging
        self.LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()
        self.LOG_FILE = os.getenv('LOG_FILE', 'rewb.log')

        # Параллелизм: верхняя граница числа рабочих потоков/процессов
        self.REWB_THREADS = int(os.getenv('REWB_THREADS', 1))

        # Каталог для результатов по умолчанию
        self.REWB_OUTPUT_DIR = os.getenv('REWB_OUTPUT_DIR', 'results')

    def validate(self):
        """Проверка параметров конфигурации"""
        problems = []

        if self.REWB_THREADS < 1:
            problems.append(f"REWB_THREADS={self.REWB_THREADS} (должно быть >= 1)")

        if self.LOG_LEVEL not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            problems.append(f"LOG_LEVEL={self.LOG_LEVEL}")

        if problems:
            raise ValidationError(f"Некорректные параметры конфигурации: {', '.join(problems)}")

        return True

    def worker_cap(self, requested: int = None) -> int:
        """Число рабочих с учетом ограничения REWB_THREADS"""
        cap = max(1, self.REWB_THREADS)
        if requested is None:
            return cap
        return max(1, min(int(requested), cap))
