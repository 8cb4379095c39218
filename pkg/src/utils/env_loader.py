"""
Carregador de variáveis de ambiente para o Top-k Calibration Lab.
"""

import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

from src.config.settings import Config
from src.utils.logger import get_logger


class EnvLoader:
    """Carregador de variáveis de ambiente."""

    def __init__(self) -> None:
        """Inicializa o carregador de ambiente."""
        self.logger = get_logger("env_loader")
        self._loaded = False
        self.loaded_from: Optional[str] = None

    def load_env_file(self, *candidates: str) -> bool:
        """
        Carrega o primeiro arquivo de ambiente existente entre os candidatos.

        Variáveis já definidas no shell têm precedência (override=False).

        Args:
            candidates: Caminhos em ordem de prioridade (padrão: Config.ENV_FILES)

        Returns:
            bool: True se algum arquivo foi carregado
        """
        if self._loaded:
            return True

        for candidate in candidates or Config.ENV_FILES:
            path = Path(candidate)
            if not path.is_file():
                continue
            try:
                load_dotenv(path, override=False)
            except Exception as e:
                self.logger.error(f"Erro ao carregar {path}: {e}")
                continue
            self._loaded = True
            self.loaded_from = str(path)
            self.logger.info(f"Variáveis carregadas de {path}")
            return True

        self.logger.debug(f"Nenhum arquivo de ambiente encontrado: {', '.join(candidates or Config.ENV_FILES)}")
        return False

    def get_optional_var(self, var_name: str, default: str = "") -> str:
        """
        Obtém uma variável de ambiente opcional.

        Args:
            var_name: Nome da variável
            default: Valor padrão se não definida

        Returns:
            str: Valor da variável ou padrão
        """
        return os.getenv(var_name, default)

    def get_int_var(self, var_name: str, default: int, minimum: int = 0) -> int:
        """
        Obtém uma variável inteira, validando o limite inferior.

        Args:
            var_name: Nome da variável
            default: Valor padrão se não definida
            minimum: Menor valor aceito

        Returns:
            int: Valor convertido

        Raises:
            ValueError: Se o valor não for inteiro ou estiver abaixo do mínimo
        """
        raw = self.get_optional_var(var_name)
        if not raw:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"Variável {var_name} deve ser inteira, recebido: {raw!r}")
        if value < minimum:
            raise ValueError(f"Variável {var_name} deve ser >= {minimum}, recebido: {value}")
        return value

    def get_runtime_overrides(self) -> Dict[str, Optional[int]]:
        """
        Retorna os padrões de execução definidos no ambiente.

        Returns:
            dict: Semente mestre e número de workers (None se não definidos)
        """
        overrides: Dict[str, Optional[int]] = {"seed": None, "jobs": None}
        if self.get_optional_var("TOPK_SEED"):
            overrides["seed"] = self.get_int_var("TOPK_SEED", 0)
        if self.get_optional_var("TOPK_JOBS"):
            overrides["jobs"] = self.get_int_var("TOPK_JOBS", 1, minimum=1)
        return overrides


# Instância singleton
_env_loader: Optional[EnvLoader] = None


def get_env_loader() -> EnvLoader:
    """
    Retorna a instância singleton do carregador de ambiente.

    Returns:
        EnvLoader: Instância do carregador
    """
    global _env_loader
    if _env_loader is None:
        _env_loader = EnvLoader()
    return _env_loader


def load_environment() -> bool:
    """
    Carrega as variáveis de ambiente.

    Returns:
        bool: True se carregado com sucesso
    """
    return get_env_loader().load_env_file()
