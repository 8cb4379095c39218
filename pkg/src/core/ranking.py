"""
Estatísticas de ordem, seleção top-k e o predicado de preservação top-k.

Primitivas consumidas por todos os outros módulos. Índices de classe são
0-based; postos (ranks) de estatísticas de ordem são 1-based, de modo que
`order_stat(v, 1)` é o maior elemento. Comparações são exatas, sem epsilon.
"""

from enum import Enum
from typing import FrozenSet, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[Sequence[float], np.ndarray]


class TieBreakPolicy(Enum):
    """Estratégias explícitas de desempate no limiar da seleção top-k."""

    LOWEST_INDEX = "lowest_index"
    HIGHEST_INDEX = "highest_index"
    WORST_CASE_FOR_LABEL = "worst_case"
    BEST_CASE_FOR_LABEL = "best_case"

    @property
    def needs_label(self) -> bool:
        """Indica se a política depende do rótulo verdadeiro."""
        return self in (TieBreakPolicy.WORST_CASE_FOR_LABEL, TieBreakPolicy.BEST_CASE_FOR_LABEL)


def as_score_vec(values: ArrayLike) -> np.ndarray:
    """
    Valida e converte um vetor de scores.

    Args:
        values: Scores por classe

    Returns:
        np.ndarray: Vetor float 1-D com M >= 2 entradas finitas

    Raises:
        ValueError: Se a forma, o tamanho ou os valores forem inválidos
    """
    s = np.asarray(values, dtype=float)
    if s.ndim != 1:
        raise ValueError(f"Vetor de scores deve ser 1-D, recebido shape {s.shape}")
    if s.size < 2:
        raise ValueError(f"Vetor de scores precisa de M >= 2 entradas, recebido M={s.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError("Vetor de scores contém entradas não finitas")
    return s


def as_cond_dist(probs: ArrayLike, tol: float = 1e-12) -> np.ndarray:
    """
    Valida uma distribuição condicional de rótulos no simplex.

    Args:
        probs: Probabilidades por classe
        tol: Tolerância para a soma igual a 1

    Returns:
        np.ndarray: Vetor de probabilidades

    Raises:
        ValueError: Se houver entradas negativas ou a soma fugir da tolerância
    """
    eta = as_score_vec(probs)
    if np.any(eta < 0):
        raise ValueError("Distribuição condicional contém entradas negativas")
    total = float(eta.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"Distribuição condicional soma {total!r}, esperado 1 (tol={tol})")
    return eta


def check_k(k: int, M: int, upper: Optional[int] = None) -> None:
    """
    Valida o parâmetro k contra o número de classes.

    Raises:
        ValueError: Se k estiver fora de [1, upper], com upper = M-1 por padrão
    """
    upper = M - 1 if upper is None else upper
    if not 1 <= k <= upper:
        raise ValueError(f"k fora do intervalo: k={k}, esperado 1 <= k <= {upper} (M={M})")


def order_stat(v: ArrayLike, j: int) -> float:
    """
    Retorna v_[j], a j-ésima maior entrada contando multiplicidade.

    Args:
        v: Vetor de scores
        j: Posto 1-based

    Returns:
        float: Estatística de ordem

    Raises:
        ValueError: Se j estiver fora de [1, M]
    """
    values = as_score_vec(v)
    if not 1 <= j <= values.size:
        raise ValueError(f"Posto fora do intervalo: j={j}, M={values.size}")
    return float(np.sort(values)[::-1][j - 1])


def top_k_select(
    s: ArrayLike,
    k: int,
    policy: TieBreakPolicy = TieBreakPolicy.LOWEST_INDEX,
    label: Optional[int] = None,
) -> FrozenSet[int]:
    """
    Seleciona os k índices de maior score segundo a política de desempate.

    Args:
        s: Vetor de scores
        k: Tamanho do conjunto (1 <= k < M)
        policy: Política de desempate no limiar
        label: Rótulo verdadeiro, obrigatório para políticas dependentes de rótulo

    Returns:
        FrozenSet[int]: Índices selecionados

    Raises:
        ValueError: Se k for inválido ou o rótulo estiver ausente/fora do intervalo
    """
    scores = as_score_vec(s)
    M = scores.size
    check_k(k, M)
    if policy.needs_label:
        if label is None:
            raise ValueError(f"Política {policy.value} exige um rótulo")
        if not 0 <= label < M:
            raise ValueError(f"Rótulo fora do intervalo: {label}, M={M}")

    threshold = np.sort(scores)[::-1][k - 1]
    above = [int(i) for i in np.flatnonzero(scores > threshold)]
    tied = [int(i) for i in np.flatnonzero(scores == threshold)]
    need = k - len(above)

    if policy is TieBreakPolicy.LOWEST_INDEX:
        chosen = tied[:need]
    elif policy is TieBreakPolicy.HIGHEST_INDEX:
        chosen = tied[len(tied) - need:]
    elif policy is TieBreakPolicy.WORST_CASE_FOR_LABEL:
        ordered = [i for i in tied if i != label] + [i for i in tied if i == label]
        chosen = ordered[:need]
    else:
        ordered = [i for i in tied if i == label] + [i for i in tied if i != label]
        chosen = ordered[:need]

    return frozenset(above + chosen)


def top_k_error(
    s: ArrayLike,
    y: int,
    k: int,
    policy: TieBreakPolicy = TieBreakPolicy.WORST_CASE_FOR_LABEL,
) -> int:
    """Erro top-k (0 ou 1) de um vetor de scores para o rótulo y."""
    selected = top_k_select(s, k, policy, y)
    return int(y not in selected)


def top_k_errors(
    S: np.ndarray,
    y: np.ndarray,
    k: int,
    policy: TieBreakPolicy = TieBreakPolicy.WORST_CASE_FOR_LABEL,
) -> np.ndarray:
    """
    Versão vetorizada de `top_k_error` sobre as linhas de S.

    Conta quantas classes ficam à frente do rótulo sob a política; o rótulo
    está fora do top-k quando essa contagem é >= k.

    Args:
        S: Scores (n, M)
        y: Rótulos (n,)
        k: Tamanho do conjunto
        policy: Política de desempate

    Returns:
        np.ndarray: Erros (n,) em {0, 1}
    """
    S = np.asarray(S, dtype=float)
    y = np.asarray(y, dtype=int)
    n, M = S.shape
    check_k(k, M)
    rows = np.arange(n)
    sy = S[rows, y][:, None]
    greater = (S > sy).sum(axis=1)
    equal = S == sy
    equal[rows, y] = False
    if policy is TieBreakPolicy.WORST_CASE_FOR_LABEL:
        ahead = greater + equal.sum(axis=1)
    elif policy is TieBreakPolicy.BEST_CASE_FOR_LABEL:
        ahead = greater
    else:
        index = np.arange(M)[None, :]
        if policy is TieBreakPolicy.LOWEST_INDEX:
            before = equal & (index < y[:, None])
        else:
            before = equal & (index > y[:, None])
        ahead = greater + before.sum(axis=1)
    return (ahead >= k).astype(int)


def is_top_k_preserving(y: ArrayLike, x: ArrayLike, k: int) -> bool:
    """
    Predicado P_k(y | x): y respeita a estrutura top-k de x.

    Para todo m: x_m > x_[k+1] implica y_m > y_[k+1], e x_m < x_[k]
    implica y_m < y_[k].

    Args:
        y: Vetor avaliado
        x: Vetor de referência
        k: Tamanho do conjunto (1 <= k < M)

    Returns:
        bool: True se y é top-k preservante em relação a x

    Raises:
        ValueError: Se as dimensões diferirem ou k for inválido
    """
    yv = np.asarray(y, dtype=float)
    xv = np.asarray(x, dtype=float)
    if yv.shape != xv.shape or yv.ndim != 1:
        raise ValueError(f"Dimensões incompatíveis: {yv.shape} vs {xv.shape}")
    check_k(k, xv.size)

    xs = np.sort(xv)[::-1]
    ys = np.sort(yv)[::-1]
    x_k, x_k1 = xs[k - 1], xs[k]
    y_k, y_k1 = ys[k - 1], ys[k]

    upper_ok = np.all(~(xv > x_k1) | (yv > y_k1))
    lower_ok = np.all(~(xv < x_k) | (yv < y_k))
    return bool(upper_ok and lower_ok)
