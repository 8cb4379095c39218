"""
Sistema de logging do Top-k Calibration Lab.

Console em stderr (stdout recebe só as linhas JSON dos resultados) e arquivo
rotativo em logs/. Processos do pool de tentativas recebem um handler de
console próprio via `init_worker_logging`.
"""

import logging
import logging.handlers
import os
import platform
import sys
import time
from contextlib import contextmanager
from typing import Dict, Iterator

import numpy as np
import scipy

from src.config.settings import Config


class PerformanceLogger:
    """Mede operações e acumula o tempo total por nome."""

    def __init__(self) -> None:
        self.timers: Dict[str, float] = {}
        self.totals: Dict[str, float] = {}
        self.logger = logging.getLogger("performance")

    def start_timer(self, operation: str) -> None:
        """
        Inicia um timer para uma operação.

        Args:
            operation: Nome da operação (ex.: "scan psi5(k=2)")
        """
        self.timers[operation] = time.perf_counter()
        self.logger.debug(f"Timer iniciado: {operation}")

    def end_timer(self, operation: str) -> float:
        """
        Finaliza o timer, soma ao total da operação e retorna o tempo decorrido.

        Returns:
            float: Segundos desde `start_timer` (0.0 se o timer não existir)
        """
        started = self.timers.pop(operation, None)
        if started is None:
            self.logger.warning(f"Timer não encontrado: {operation}")
            return 0.0
        elapsed = time.perf_counter() - started
        self.totals[operation] = self.totals.get(operation, 0.0) + elapsed
        self.logger.info(f"{operation}: {elapsed:.2f}s")
        return elapsed

    @contextmanager
    def timed(self, operation: str) -> Iterator[None]:
        """Mede o bloco `with` como uma operação."""
        self.start_timer(operation)
        try:
            yield
        finally:
            self.end_timer(operation)

    def summary(self) -> Dict[str, float]:
        """Totais acumulados por operação, em segundos."""
        return {name: round(total, 3) for name, total in sorted(self.totals.items())}


def setup_logger(enable_debug: bool = False) -> None:
    """
    Configura o logger raiz: arquivo rotativo e console em stderr.

    Args:
        enable_debug: Nível DEBUG e formato detalhado no arquivo
    """
    log_level = logging.DEBUG if enable_debug else Config.LOG_LEVEL

    file_handler = logging.handlers.RotatingFileHandler(
        Config.LOG_FILENAME,
        maxBytes=Config.LOG_MAX_BYTES,
        backupCount=Config.LOG_BACKUP_COUNT,
        encoding=Config.DEFAULT_ENCODING
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(logging.Formatter(
        Config.LOG_FORMAT_DETAILED if enable_debug else Config.LOG_FORMAT_SIMPLE,
        datefmt=Config.LOG_DATE_FORMAT
    ))

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    root_logger.addHandler(file_handler)
    root_logger.addHandler(_console_handler(log_level))

    if not enable_debug:
        logging.getLogger("concurrent.futures").setLevel(logging.WARNING)


def _console_handler(level: int) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(Config.LOG_FORMAT_SIMPLE, datefmt=Config.LOG_DATE_FORMAT))
    return handler


def init_worker_logging(level: int = Config.LOG_LEVEL) -> None:
    """Inicializador dos processos do pool: só console, nunca o arquivo rotativo."""
    root_logger = logging.getLogger()
    if root_logger.handlers:
        return
    root_logger.setLevel(level)
    root_logger.addHandler(_console_handler(level))


def get_logger(name: str) -> logging.Logger:
    """
    Retorna o logger de um módulo ou serviço.

    Args:
        name: Nome do componente (ex.: "calibration")
    """
    return logging.getLogger(name)


def get_performance_logger() -> PerformanceLogger:
    """Retorna um novo logger de performance."""
    return PerformanceLogger()


def log_system_info() -> None:
    """Registra versões e recursos da máquina para debug."""
    logger = get_logger("system")

    logger.debug("Informações do Sistema:")
    logger.debug(f"   Python: {sys.version.split()[0]}")
    logger.debug(f"   NumPy: {np.__version__} / SciPy: {scipy.__version__}")
    logger.debug(f"   OS: {platform.system()} {platform.release()} ({platform.machine()})")
    logger.debug(f"   CPUs: {os.cpu_count()}")
    logger.debug(f"   Diretório: {os.getcwd()}")


def log_environment_vars() -> None:
    """Registra as variáveis de ambiente que afetam a execução."""
    logger = get_logger("environment")

    logger.debug("Variáveis de Ambiente:")
    for var in ("TOPK_JOBS", "TOPK_SEED", "TOPK_RESULTS_DIR", "OMP_NUM_THREADS", "DEBUG"):
        logger.debug(f"   {var}: {os.getenv(var, 'não definida')}")
