"""
Модуль для настройки логирования

Каждая запись несет контекст прогона (метка и seed), заданный через run_context;
вне прогона поле контекста равно '-'.
"""
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from logging.handlers import RotatingFileHandler
from typing import Iterator, Optional

from utils.config import Config

_run_context: ContextVar[str] = ContextVar('rewb_run_context', default='-')


class RunContextFilter(logging.Filter):
    """Добавляет в запись поле run из текущего контекста"""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run = _run_context.get()
        return True


@contextmanager
def run_context(label: str, seed: Optional[int] = None) -> Iterator[str]:
    """Контекст прогона для записей лога внутри блока"""
    value = label if seed is None else f"{label}#{seed}"
    token = _run_context.set(value)
    try:
        yield value
    finally:
        _run_context.reset(token)


class Logger:
    """Класс для настройки и управления логированием"""

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
        self.config = Config()
        self.logger = self._setup_logger()

    def _setup_logger(self):
        """Консоль (stderr) и необязательный файл с ротацией"""
        logger = logging.getLogger('rewb_simulator')
        logger.setLevel(getattr(logging, self.config.LOG_LEVEL, logging.INFO))
        logger.propagate = False
        logger.handlers = []

        formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] [%(processName)s] [%(run)s] %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        context = RunContextFilter()

        # Пустой LOG_FILE отключает запись в файл
        if self.config.LOG_FILE:
            file_handler = RotatingFileHandler(
                self.config.LOG_FILE,
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=5,
                encoding='utf-8',
                delay=True
            )
            file_handler.setFormatter(formatter)
            file_handler.addFilter(context)
            logger.addHandler(file_handler)

        # stdout занят JSON-выводом команд
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        console_handler.addFilter(context)
        logger.addHandler(console_handler)

        return logger

    def get_logger(self):
        """Получить экземпляр логгера"""
        return self.logger


# Глобальный экземпляр логгера
logger = Logger().get_logger()
