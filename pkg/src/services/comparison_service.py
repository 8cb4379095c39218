"""
Serviço de comparação entre métricas medidas e valores de referência publicados.
"""

from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.utils.logger import get_logger

# Top-2 médio no conjunto de 68 pontos
EXP1_REFERENCE: Dict[str, float] = {
    "psi1": 0.2671,
    "psi2": 0.2515,
    "psi3": 0.2500,
    "psi4": 0.2468,
    "psi5": 0.2941,
}

# N=50, k=5
EXP2_REFERENCE: Dict[str, Dict[str, float]] = {
    "psi5": {"top_k": 0.880, "top1": 0.149},
    "ent": {"top_k": 0.755, "top1": 0.267},
}

# Vantagem mínima de psi5 em top-k e de ent em top-1
EXP2_MIN_GAP = 0.05

# N=10, k=5
EXP3_REFERENCE: Dict[str, Dict[str, float]] = {
    "psi4": {"top_k": 0.933},
}

CD_REFERENCE_OPTIMUM = (0.0114226, 0.011404, 0.011385, 0.011365, 0.470880)


class ComparisonService:
    """Compara resultados medidos com valores de referência."""

    def __init__(self, tolerance: float = 0.05) -> None:
        """
        Inicializa o serviço de comparação.

        Args:
            tolerance: Desvio absoluto tolerado antes de sinalizar diferença
        """
        self.tolerance = tolerance
        self.logger = get_logger("comparison")
        self.logger.debug("Serviço de comparação inicializado")

    def compare(self, command: str, metrics: Dict[str, Dict[str, Any]], parameters: Dict[str, Any]) -> List[str]:
        """
        Gera linhas de comparação para o comando executado.

        Args:
            command: Nome do subcomando
            metrics: Métricas agregadas por perda
            parameters: Parâmetros da execução

        Returns:
            List[str]: Linhas descrevendo medido vs. referência (vazia se não houver referência)
        """
        try:
            if command == "exp1":
                lines = self._compare_table(
                    metrics, {name: {"top_k": v} for name, v in EXP1_REFERENCE.items()}
                )
            elif command == "exp2" and parameters.get("N") == 50 and parameters.get("k") == 5:
                lines = self._compare_table(metrics, EXP2_REFERENCE)
                lines.extend(self._exp2_orderings(metrics))
            elif command == "exp3" and parameters.get("N") == 10 and parameters.get("k") == 5:
                lines = self._compare_table(metrics, EXP3_REFERENCE)
            else:
                lines = []
            self.logger.info(f"Comparação concluída: {len(lines)} linha(s) para {command}")
            return lines
        except Exception as e:
            self.logger.error(f"Erro na comparação de resultados: {e}", exc_info=True)
            return []

    def _compare_table(self, metrics: Dict[str, Dict[str, Any]], reference: Dict[str, Dict[str, float]]) -> List[str]:
        lines = []
        for loss, ref_row in reference.items():
            row = metrics.get(loss)
            if row is None:
                continue
            for metric, ref_value in ref_row.items():
                lines.append(self._format_line(loss, metric, row.get(metric), ref_value))
        return lines

    def _format_line(self, loss: str, metric: str, measured: Optional[float], reference: float) -> str:
        if measured is None:
            return f"{loss} {metric}: N/A (referência {reference:.4f})"
        delta = measured - reference
        flag = "" if abs(delta) <= self.tolerance else " [diferença]"
        return f"{loss} {metric}: {measured:.4f} (referência {reference:.4f}, Δ={delta:+.4f}){flag}"

    def _exp2_orderings(self, metrics: Dict[str, Dict[str, Any]]) -> List[str]:
        psi5, ent = metrics.get("psi5", {}), metrics.get("ent", {})
        gaps = [
            ("psi5 - ent em top-k", psi5.get("top_k"), ent.get("top_k"), 0.125),
            ("ent - psi5 em top-1", ent.get("top1"), psi5.get("top1"), 0.118),
        ]
        lines = []
        for label, ahead, behind, reference in gaps:
            if ahead is None or behind is None:
                continue
            gap = ahead - behind
            flag = ""
            if gap < EXP2_MIN_GAP:
                flag = " [ordem não reproduzida]"
                self.logger.warning(f"{label}: {gap:+.4f} abaixo do mínimo {EXP2_MIN_GAP}")
            lines.append(f"{label}: {gap:+.4f} (referência {reference:+.3f}){flag}")
        return lines

    def compare_cd_optimum(self, optimum: Sequence[float]) -> Dict[str, Any]:
        """
        Compara o ótimo de CD encontrado com o vetor publicado.

        Returns:
            Dict[str, Any]: Vetor de referência, diferença máxima e se a
            referência preserva a ordem de η
        """
        measured = np.asarray(optimum, dtype=float)
        reference = np.asarray(CD_REFERENCE_OPTIMUM)
        max_diff = float(np.max(np.abs(measured - reference)))
        if max_diff > 1e-3:
            self.logger.warning(f"Ótimo de CD difere da referência publicada (max |Δ|={max_diff:.4f})")
        return {
            "reference_optimum": list(CD_REFERENCE_OPTIMUM),
            "max_abs_diff_from_reference": max_diff,
        }
