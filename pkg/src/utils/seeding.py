"""
Derivação determinística de sementes.

Cada tentativa (ou sonda) recebe uma semente derivada da semente mestre
por uma mistura splitmix64, de modo que a tentativa i é reproduzível
isoladamente, independente da ordem de execução no pool de workers.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """
    Aplica a função de mistura splitmix64 a um estado de 64 bits.

    Args:
        state: Estado de entrada (interpretado módulo 2^64)

    Returns:
        int: Valor misturado em [0, 2^64)
    """
    z = (state + _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """
    Deriva a semente da tentativa `index` a partir da semente mestre.

    Args:
        master_seed: Semente mestre (u64)
        index: Índice da tentativa ou sonda (>= 0)

    Returns:
        int: Semente derivada em [0, 2^64)

    Raises:
        ValueError: Se o índice for negativo
    """
    if index < 0:
        raise ValueError(f"Índice de semente deve ser >= 0, recebido: {index}")
    return splitmix64((master_seed & _MASK64) ^ splitmix64(index))


def make_rng(seed: int) -> np.random.Generator:
    """Cria um gerador NumPy a partir de uma semente u64."""
    return np.random.default_rng(seed & _MASK64)
