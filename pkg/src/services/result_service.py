"""
Serviço de persistência e emissão de resultados de execução.

Formato JSON-lines: uma linha por tentativa (`"type": "trial"`) seguida de
um objeto agregado (`"type": "aggregate"`). Chaves ordenadas; o único campo
que varia entre execuções idênticas é `timestamp`.
"""

import csv
import json
import os
import shutil
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np

from src.config.settings import Config
from src.utils.logger import get_logger


@dataclass
class RunResult:
    """Resultado de um comando: parâmetros, métricas por perda e registros por tentativa."""

    command: str
    parameters: Dict[str, Any]
    seed: Optional[int]
    trials: int
    metrics: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    records: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    reference: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def aggregate(self) -> Dict[str, Any]:
        return {
            "type": "aggregate",
            "schema_version": Config.RESULT_SCHEMA_VERSION,
            "app_version": Config.VERSION,
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "trials": self.trials,
            "metrics": self.metrics,
            "details": self.details,
            "reference": self.reference,
            "timestamp": {"started_at": self.started_at, "wall_time_s": round(self.wall_time, 3)},
        }

    def lines(self) -> List[Dict[str, Any]]:
        trial_lines = [{"type": "trial", "command": self.command, **r} for r in self.records]
        return trial_lines + [self.aggregate()]


def _to_jsonable(value: Any) -> Any:
    """Converte tipos NumPy para tipos nativos serializáveis."""
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ResultService:
    """Emite resultados como JSON-lines e exporta tabelas CSV."""

    def __init__(self) -> None:
        """Inicializa o serviço de resultados."""
        self.logger = get_logger("results")
        self.logger.debug("Serviço de resultados inicializado")

    def serialize(self, result: RunResult) -> str:
        """
        Serializa um resultado em JSON-lines.

        Args:
            result: Resultado da execução

        Returns:
            str: Texto com uma linha JSON por registro
        """
        return "".join(
            json.dumps(_to_jsonable(line), sort_keys=True, ensure_ascii=False) + "\n"
            for line in result.lines()
        )

    def emit(self, result: RunResult, out_path: Optional[str] = None) -> bool:
        """
        Escreve o resultado em `out_path` ou em stdout.

        Args:
            result: Resultado da execução
            out_path: Arquivo de saída (None para stdout)

        Returns:
            bool: True se a escrita foi bem-sucedida
        """
        text = self.serialize(result)
        if out_path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return True

        try:
            directory = os.path.dirname(out_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            if os.path.exists(out_path):
                self._create_backup(out_path)
            with open(out_path, "w", encoding=Config.DEFAULT_ENCODING) as f:
                f.write(text)
            self.logger.info(f"Resultado salvo em {out_path}: {len(result.records)} registro(s)")
            return True
        except Exception as e:
            self.logger.error(f"Erro ao salvar resultado: {e}", exc_info=True)
            return False

    def export_csv(self, result: RunResult, csv_path: str) -> bool:
        """
        Exporta a tabela de métricas por perda em CSV.

        Args:
            result: Resultado da execução
            csv_path: Caminho do CSV

        Returns:
            bool: True se a exportação foi bem-sucedida
        """
        try:
            columns: List[str] = []
            for row in result.metrics.values():
                columns.extend(c for c in row if c not in columns)
            directory = os.path.dirname(csv_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(csv_path, "w", newline="", encoding=Config.DEFAULT_ENCODING) as f:
                writer = csv.writer(f)
                writer.writerow(["loss"] + columns)
                for name, row in result.metrics.items():
                    writer.writerow([name] + [self._csv_cell(row.get(c)) for c in columns])
            self.logger.info(f"Tabela CSV exportada: {csv_path}")
            return True
        except Exception as e:
            self.logger.error(f"Erro ao exportar CSV: {e}", exc_info=True)
            return False

    @staticmethod
    def _csv_cell(value: Any) -> str:
        if value is None or (isinstance(value, float) and not np.isfinite(value)):
            return "N/A"
        if isinstance(value, (list, tuple, np.ndarray)):
            return " ".join(f"{float(v):.4f}" for v in value)
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    def load(self, path: str) -> List[Dict[str, Any]]:
        """
        Lê um arquivo JSON-lines de resultados.

        Returns:
            List[Dict[str, Any]]: Linhas decodificadas (vazio se ausente ou corrompido)
        """
        try:
            if not os.path.exists(path):
                self.logger.info(f"Arquivo de resultados não existe: {path}")
                return []
            with open(path, "r", encoding=Config.DEFAULT_ENCODING) as f:
                lines = [json.loads(line) for line in f if line.strip()]
            aggregate = next((l for l in lines if l.get("type") == "aggregate"), None)
            if aggregate and aggregate.get("schema_version") != Config.RESULT_SCHEMA_VERSION:
                self.logger.warning(f"Versão de schema diferente em {path}: {aggregate.get('schema_version')}")
            return lines
        except json.JSONDecodeError as e:
            self.logger.error(f"Erro ao decodificar JSON de {path}: {e}")
            return []

    def _create_backup(self, path: str) -> None:
        """Cria backup do arquivo atual, rotacionando backups antigos."""
        try:
            backup_file = f"{path}.backup"

            if os.path.exists(backup_file):
                for i in range(Config.MAX_BACKUP_FILES - 1, 0, -1):
                    old_backup = f"{backup_file}.{i}"
                    if os.path.exists(old_backup):
                        os.replace(old_backup, f"{backup_file}.{i + 1}")
                os.replace(backup_file, f"{backup_file}.1")

            shutil.copy2(path, backup_file)
            self.logger.debug(f"Backup criado: {backup_file}")

        except Exception as e:
            self.logger.warning(f"Erro ao criar backup: {e}")
