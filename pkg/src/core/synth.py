"""
Geradores dos conjuntos sintéticos e do conjunto de separabilidade linear.

Todo gerador é função pura de (parâmetros, semente). Rótulos são 0-based.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.config.settings import Config
from src.utils.seeding import make_rng

# Separador top-2 de referência para o conjunto de 7 pontos
W_SEP = ((2.0, 0.0, 0.0), (1.0, 1.0, 0.0), (3.0, 0.0, 1.0))


@dataclass
class Dataset:
    """Entradas (n, d), rótulos (n,) em [0, M) e metadados do gerador."""

    inputs: np.ndarray
    labels: np.ndarray
    M: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs deve ser (n, d) e labels deve ser (n,)")
        if self.inputs.shape[0] != self.labels.size or self.labels.size < 1:
            raise ValueError(
                f"Dimensões inconsistentes: {self.inputs.shape[0]} entradas, {self.labels.size} rótulos"
            )
        if self.M < 2 or self.labels.min() < 0 or self.labels.max() >= self.M:
            raise ValueError(f"Rótulos devem estar em [0, {self.M})")

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.M)


def gen_exp1() -> Dataset:
    """
    68 pontos em x=0 (d=2), M=8: classes 0 e 1 com 10 pontos, demais com 8.

    Determinístico.
    """
    counts = [10, 10] + [8] * 6
    labels = np.repeat(np.arange(8), counts)
    return Dataset(
        inputs=np.zeros((labels.size, 2)),
        labels=labels,
        M=8,
        metadata={"generator": "exp1", "params": {"counts": counts}, "seed": None},
    )


def gen_separated_means(
    N: int,
    d: int,
    c: float,
    rng: np.random.Generator,
    max_draws: int = Config.SEPARATED_MEANS_MAX_DRAWS,
    scale: float = 1.0,
) -> np.ndarray:
    """
    Aceita gulosamente N médias gaussianas N(0, scale²·I) a distância >= c·√d entre si.

    Args:
        N: Número de médias (>= 1)
        d: Dimensão
        c: Fator de separação (> 0)
        rng: Gerador aleatório
        max_draws: Orçamento de sorteios
        scale: Desvio padrão da gaussiana de amostragem (1 = padrão)

    Returns:
        np.ndarray: Médias (N, d)

    Raises:
        ValueError: Parâmetros fora do intervalo
        RuntimeError: Orçamento de sorteios esgotado
    """
    if N < 1 or d < 1 or c <= 0 or scale <= 0:
        raise ValueError(f"Parâmetros inválidos: N={N}, d={d}, c={c}")
    min_dist = c * np.sqrt(d)
    accepted = np.empty((0, d))
    for _ in range(max_draws):
        candidate = scale * rng.standard_normal(d)
        if accepted.shape[0] == 0 or np.min(np.linalg.norm(accepted - candidate, axis=1)) >= min_dist:
            accepted = np.vstack([accepted, candidate])
            if accepted.shape[0] == N:
                return accepted
    raise RuntimeError(
        f"Orçamento de {max_draws} sorteios esgotado com {accepted.shape[0]}/{N} médias "
        f"(d={d}, c={c}, escala={scale:g}); parâmetros provavelmente inviáveis"
    )


def means_scale(N: int, d: int, c: float) -> float:
    """
    Escala da gaussiana de amostragem das médias nos experimentos.

    Metade do raio que empacota N bolas de diâmetro c·√d em d dimensões;
    nunca menor que 1 (gaussiana padrão).
    """
    return max(1.0, c * np.sqrt(d) * N ** (1.0 / d) / 4.0)


def _sample_mixture_classes(
    means: np.ndarray,
    subsets: np.ndarray,
    mixes: np.ndarray,
    L: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    inputs, labels = [], []
    for m, (subset, mix) in enumerate(zip(subsets, mixes)):
        components = rng.choice(subset.size, size=L, p=mix)
        inputs.append(means[subset[components]] + rng.standard_normal((L, means.shape[1])))
        labels.append(np.full(L, m))
    return np.vstack(inputs), np.concatenate(labels)


def _resolve_rng(seed: int, rng: Optional[np.random.Generator]) -> Tuple[np.random.Generator, Optional[int]]:
    if rng is None:
        return make_rng(seed), seed
    return rng, None


def gen_exp2(
    N: int = Config.EXP2_N,
    d: int = Config.EXP2_D,
    c: float = Config.EXP2_C,
    K: int = Config.EXP2_MIXTURE,
    L_train: int = Config.EXP2_L_TRAIN,
    L_test: int = Config.EXP2_L_TEST,
    M: Optional[int] = None,
    seed: int = Config.DEFAULT_SEED,
    mean_scale: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Dataset, Dataset]:
    """
    Classes como misturas gaussianas sobre subconjuntos de médias.

    Cada classe escolhe K das N médias sem reposição e uma mistura
    Dirichlet(1,…,1) sobre elas; cada ponto sorteia uma componente e soma
    ruído N(0, I). Treino e teste compartilham a estrutura de classes.
    M padrão = Config.EXP2_M; `mean_scale` padrão = means_scale(N, d, c).
    Com `rng`, os sorteios vêm dele e `seed` não é registrada nos metadados.

    Returns:
        Tuple[Dataset, Dataset]: (treino, teste) com M·L_train e M·L_test pontos
    """
    M = Config.EXP2_M if M is None else M
    if not 1 <= K <= N or M < 2 or L_train < 1 or L_test < 1:
        raise ValueError(f"Parâmetros inválidos: N={N}, K={K}, M={M}, L={L_train}/{L_test}")
    scale = means_scale(N, d, c) if mean_scale is None else mean_scale
    rng, seed = _resolve_rng(seed, rng)
    means = gen_separated_means(N, d, c, rng, scale=scale)
    subsets = np.array([rng.choice(N, size=K, replace=False) for _ in range(M)])
    mixes = rng.dirichlet(np.ones(K), size=M)
    X_train, y_train = _sample_mixture_classes(means, subsets, mixes, L_train, rng)
    X_test, y_test = _sample_mixture_classes(means, subsets, mixes, L_test, rng)

    params = {"N": N, "d": d, "c": c, "K": K, "L_train": L_train, "L_test": L_test, "M": M, "mean_scale": scale}
    return (
        Dataset(X_train, y_train, M, {"generator": "exp2", "split": "train", "params": params, "seed": seed}),
        Dataset(X_test, y_test, M, {"generator": "exp2", "split": "test", "params": params, "seed": seed}),
    )


def _sample_center_classes(means: np.ndarray, k: int, l: int, rng: np.random.Generator):
    inputs, labels = [], []
    for n, mean in enumerate(means):
        inputs.append(mean + rng.standard_normal((k * l, means.shape[1])))
        labels.append(n * k + np.repeat(np.arange(k), l))
    return np.vstack(inputs), np.concatenate(labels)


def gen_exp3(
    N: int = Config.EXP3_N,
    d: int = Config.EXP3_D,
    c: float = Config.EXP3_C,
    k: int = Config.EXP3_K,
    l_train: int = Config.EXP3_L_TRAIN,
    l_test: int = Config.EXP3_L_TEST,
    seed: int = Config.DEFAULT_SEED,
    mean_scale: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Dataset, Dataset]:
    """
    M = N·k classes; cada média gera k·l pontos divididos em k classes de l pontos.

    As k classes de uma mesma média são indistinguíveis por construção.
    """
    if N < 1 or k < 1 or l_train < 1 or l_test < 1 or N * k < 2:
        raise ValueError(f"Parâmetros inválidos: N={N}, k={k}, l={l_train}/{l_test}")
    scale = means_scale(N, d, c) if mean_scale is None else mean_scale
    rng, seed = _resolve_rng(seed, rng)
    means = gen_separated_means(N, d, c, rng, scale=scale)
    X_train, y_train = _sample_center_classes(means, k, l_train, rng)
    X_test, y_test = _sample_center_classes(means, k, l_test, rng)

    M = N * k
    params = {"N": N, "d": d, "c": c, "k": k, "l_train": l_train, "l_test": l_test, "M": M, "mean_scale": scale}
    return (
        Dataset(X_train, y_train, M, {"generator": "exp3", "split": "train", "params": params, "seed": seed}),
        Dataset(X_test, y_test, M, {"generator": "exp3", "split": "test", "params": params, "seed": seed}),
    )


def gen_linear_sep_dataset() -> Dataset:
    """
    7 pontos em R^3, M=3: 2×(e1, 0), 2×(e2, 1), 2×(e3, 2) e (-e1, 0).

    Top-2 separável linearmente (W_SEP nos metadados), mas não top-1.
    """
    eye = np.eye(3)
    inputs = np.vstack([eye[0], eye[0], eye[1], eye[1], eye[2], eye[2], -eye[0]])
    labels = np.array([0, 0, 1, 1, 2, 2, 0])
    return Dataset(
        inputs, labels, 3,
        {"generator": "linear_sep", "params": {}, "seed": None, "W_sep": [list(r) for r in W_SEP]},
    )
