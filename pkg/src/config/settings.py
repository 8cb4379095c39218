"""
Módulo de configurações do Top-k Calibration Lab.

Contém todas as configurações centralizadas da aplicação: logging,
arquivos de saída, padrões de otimização e parâmetros dos experimentos.
"""

import logging
import os
from typing import Final, Tuple


class Config:
    """Classe de configuração centralizada."""

    # Informações da aplicação
    VERSION: Final[str] = "1.0.0"
    APP_NAME: Final[str] = "Top-k Calibration Lab"
    RESULT_SCHEMA_VERSION: Final[int] = 1

    # Configuração de Logging
    LOG_LEVEL: Final[int] = logging.INFO
    LOG_FILENAME: Final[str] = "logs/topk_calibration.log"
    LOG_MAX_BYTES: Final[int] = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT: Final[int] = 5
    LOG_FORMAT_DETAILED: Final[str] = (
        "%(asctime)s | %(levelname)-8s | %(name)-20s | "
        "%(funcName)-20s:%(lineno)-4d | %(message)s"
    )
    LOG_FORMAT_SIMPLE: Final[str] = "%(asctime)s | %(levelname)-8s | %(message)s"
    LOG_DATE_FORMAT: Final[str] = "%Y-%m-%d %H:%M:%S"

    # Configuração de Arquivos
    ENV_FILES: Final[Tuple[str, ...]] = (".env.local", ".env")
    RESULTS_DIR: Final[str] = os.getenv("TOPK_RESULTS_DIR", "results")
    DEFAULT_ENCODING: Final[str] = "utf-8"
    MAX_BACKUP_FILES: Final[int] = 3
    JSON_INDENT: Final[int] = 4

    # Execução
    DEFAULT_SEED: Final[int] = 0
    DEFAULT_JOBS: Final[int] = 1
    JOBS: Final[str] = os.getenv("TOPK_JOBS", "1")

    # Minimização de risco condicional (verificação de calibração)
    MINIMIZE_RESTARTS: Final[int] = 16
    MINIMIZE_ITERATIONS: Final[int] = 5000
    MINIMIZE_STEP0: Final[float] = 1.0
    MINIMIZE_TOL: Final[float] = 1e-12
    MINIMIZE_IMPROVEMENT_TOL: Final[float] = 1e-12
    START_SCALES: Final[Tuple[float, ...]] = (0.5, 1.0, 2.0)

    # Contraexemplo do CD (descida de gradiente com passo constante)
    CD_ETA: Final[Tuple[float, ...]] = (0.01, 0.02, 0.03, 0.04, 0.9)
    CD_STEP: Final[float] = 0.1
    CD_TOL: Final[float] = 1e-9
    CD_MAX_ITERATIONS: Final[int] = 100_000

    # Verificação de propriedades de links
    LINK_CHECK_SAMPLES: Final[int] = 10_000
    LINK_CHECK_SCALES: Final[Tuple[float, ...]] = (0.1, 1.0, 10.0, 100.0)
    LINK_CHECK_DIM: Final[int] = 5

    # Varredura de calibração
    SCAN_STRUCTURED_POINTS: Final[int] = 8
    SCAN_TAIL_MARGIN: Final[float] = 0.01
    ETA_RENORMALIZE_TOL: Final[float] = 1e-9
    ETA_ROUNDING_TOL: Final[float] = 1e-3

    # Perdas
    ENT_TR_MIN_PROB: Final[float] = 1e-300

    # Treinamento
    TRAIN_LR: Final[float] = 0.1
    TRAIN_EPOCHS: Final[int] = 500
    ADAM_BETAS: Final[Tuple[float, float]] = (0.9, 0.999)
    ADAM_EPS: Final[float] = 1e-8

    # Geração de dados
    SEPARATED_MEANS_MAX_DRAWS: Final[int] = 1_000_000

    # Experimento 1 (dados constantes)
    EXP1_K: Final[int] = 2
    EXP1_GRAD_NOISE: Final[float] = 1e-3

    # Experimento 2 (misturas gaussianas)
    EXP2_N: Final[int] = 50
    EXP2_K: Final[int] = 5
    EXP2_D: Final[int] = 2
    EXP2_C: Final[float] = 2.0
    EXP2_MIXTURE: Final[int] = 5
    EXP2_M: Final[int] = 8
    EXP2_L_TRAIN: Final[int] = 40
    EXP2_L_TEST: Final[int] = 7

    # Experimento 3 (classes indistinguíveis por centro)
    EXP3_N: Final[int] = 10
    EXP3_K: Final[int] = 5
    EXP3_D: Final[int] = 5
    EXP3_C: Final[float] = 2.0
    EXP3_L_TRAIN: Final[int] = 20
    EXP3_L_TEST: Final[int] = 7

    # Separabilidade linear (conjunto de 7 pontos)
    SEPARABILITY_K: Final[int] = 2
    SEPARABILITY_INIT_SCALE: Final[float] = 0.1
    SEPARABILITY_RESTARTS: Final[int] = 64

    # Verificação de gradientes
    GRAD_CHECK_STEP: Final[float] = 1e-6
    GRAD_CHECK_TOL: Final[float] = 1e-5
    GRAD_CHECK_DIMS: Final[Tuple[int, ...]] = (3, 5, 8)

    @classmethod
    def ensure_directories(cls) -> None:
        """Garante que os diretórios necessários existem."""
        os.makedirs(os.path.dirname(cls.LOG_FILENAME), exist_ok=True)

    @classmethod
    def is_debug_enabled(cls) -> bool:
        """Retorna True se DEBUG estiver ligado no ambiente."""
        return os.getenv("DEBUG", "").strip().lower() in ("1", "true", "yes", "on")

    @classmethod
    def get_jobs(cls) -> int:
        """
        Retorna o número de workers configurado, validando se é válido.

        Returns:
            int: Número de workers (>= 1).
        """
        raw = os.getenv("TOPK_JOBS", cls.JOBS)
        try:
            jobs = int(raw)
        except (TypeError, ValueError):
            return cls.DEFAULT_JOBS  # Padrão

        if jobs < 1:
            return cls.DEFAULT_JOBS

        return jobs


# Garantir que diretórios existem na importação
Config.ensure_directories()
