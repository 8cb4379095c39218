"""
Serviço de serialização de conjuntos de dados.

CSV com cabeçalho `x_1,…,x_d,label` e um arquivo JSON lateral com os
metadados do gerador (nome, parâmetros e semente).
"""

import csv
import json
import os
from typing import Tuple

import numpy as np

from src.config.settings import Config
from src.core.synth import Dataset
from src.utils.logger import get_logger


class DatasetService:
    """Salva e carrega conjuntos de dados em CSV + JSON lateral."""

    def __init__(self) -> None:
        """Inicializa o serviço de conjuntos de dados."""
        self.logger = get_logger("datasets")
        self.logger.debug("Serviço de conjuntos de dados inicializado")

    @staticmethod
    def sidecar_path(csv_path: str) -> str:
        root, _ = os.path.splitext(csv_path)
        return f"{root}.json"

    def save(self, dataset: Dataset, csv_path: str) -> Tuple[str, str]:
        """
        Salva o conjunto em CSV e os metadados no JSON lateral.

        Args:
            dataset: Conjunto de dados
            csv_path: Caminho do CSV

        Returns:
            Tuple[str, str]: Caminhos do CSV e do JSON

        Raises:
            OSError: Se a escrita falhar
        """
        directory = os.path.dirname(csv_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        header = [f"x_{i + 1}" for i in range(dataset.d)] + ["label"]
        with open(csv_path, "w", newline="", encoding=Config.DEFAULT_ENCODING) as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for x, label in zip(dataset.inputs, dataset.labels):
                writer.writerow([repr(float(v)) for v in x] + [int(label)])

        meta_path = self.sidecar_path(csv_path)
        sidecar = {"M": dataset.M, "n": dataset.n, "d": dataset.d, **dataset.metadata}
        with open(meta_path, "w", encoding=Config.DEFAULT_ENCODING) as f:
            json.dump(sidecar, f, ensure_ascii=False, indent=Config.JSON_INDENT, sort_keys=True)

        self.logger.info(f"Conjunto salvo: {csv_path} ({dataset.n} pontos, M={dataset.M})")
        return csv_path, meta_path

    def load(self, csv_path: str) -> Dataset:
        """
        Carrega um conjunto salvo por `save`.

        Raises:
            FileNotFoundError: Se o CSV ou o JSON lateral não existirem
            ValueError: Se o cabeçalho for inválido
        """
        meta_path = self.sidecar_path(csv_path)
        with open(meta_path, "r", encoding=Config.DEFAULT_ENCODING) as f:
            metadata = json.load(f)

        with open(csv_path, "r", newline="", encoding=Config.DEFAULT_ENCODING) as f:
            reader = csv.reader(f)
            header = next(reader)
            if not header or header[-1] != "label":
                raise ValueError(f"Cabeçalho inválido em {csv_path}: {header}")
            rows = [row for row in reader if row]

        inputs = np.array([[float(v) for v in row[:-1]] for row in rows]).reshape(len(rows), len(header) - 1)
        labels = np.array([int(row[-1]) for row in rows])
        M = int(metadata.pop("M"))
        metadata.pop("n", None)
        metadata.pop("d", None)
        self.logger.debug(f"Conjunto carregado: {csv_path}")
        return Dataset(inputs, labels, M, metadata)
