"""
Perdas substitutas top-k e seus subgradientes em relação ao vetor de scores.

Todas as perdas são avaliadas em lote sobre as linhas de uma matriz de
scores S (n, M) com rótulos y (n,); a API de vetor único apenas embrulha
o lote. Convenções:

- Empates entre estatísticas de ordem dividem o peso igualmente entre os
  postos empatados (convenção do ponto médio).
- No joelho de um hinge (argumento exatamente 0) o fator ativo vale 1/2.
- Remover o rótulo de s (s sem y) equivale a fixar a entrada y em -inf.
- Ent e EntTr são avaliadas em espaço log, com deslocamento pelo máximo.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit, logsumexp, softmax

from src.config.settings import Config
from src.core.ranking import ArrayLike, as_score_vec, check_k

_MAX_NLL = -np.log(Config.ENT_TR_MIN_PROB)


class LossFamily(Enum):
    """Famílias de perda disponíveis, identificadas pelo nome usado na CLI."""

    PSI1 = "psi1"
    PSI2 = "psi2"
    PSI3 = "psi3"
    PSI4 = "psi4"
    PSI5 = "psi5"
    ENT = "ent"
    ENT_TR1 = "ent_tr1"
    ENT_TR2 = "ent_tr2"
    CD = "cd"

    @property
    def uses_k(self) -> bool:
        """Ent e CD ignoram o parâmetro k."""
        return self not in (LossFamily.ENT, LossFamily.CD)

    @property
    def is_hinge(self) -> bool:
        return self in HINGE_FAMILIES

    @classmethod
    def from_name(cls, name: str) -> "LossFamily":
        """
        Converte um nome de perda na família correspondente.

        Raises:
            ValueError: Se o nome não corresponder a nenhuma família
        """
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"Perda desconhecida: {name!r}. Opções válidas: {valid}")


HINGE_FAMILIES = (
    LossFamily.PSI1, LossFamily.PSI2, LossFamily.PSI3, LossFamily.PSI4, LossFamily.PSI5,
)


@dataclass(frozen=True)
class LossSpec:
    """Família de perda mais o parâmetro k (ignorado por Ent e CD)."""

    family: LossFamily
    k: int = 1

    def validate(self, M: int) -> None:
        """
        Verifica se a especificação é válida para M classes.

        Raises:
            ValueError: Se k estiver fora de [1, M-1] para famílias que usam k
        """
        if M < 2:
            raise ValueError(f"Perdas exigem M >= 2, recebido M={M}")
        if self.family.uses_k:
            check_k(self.k, M)

    @property
    def shift_invariant(self) -> bool:
        """CD é a única família que não é invariante a deslocamentos s + c·1."""
        return self.family is not LossFamily.CD

    @property
    def name(self) -> str:
        if self.family.uses_k:
            return f"{self.family.value}(k={self.k})"
        return self.family.value

    @classmethod
    def parse(cls, name: str, k: int = 1) -> "LossSpec":
        return cls(LossFamily.from_name(name), k)


@dataclass
class LossBatch:
    """Resultado de uma avaliação em lote."""

    values: np.ndarray
    grads: Optional[np.ndarray]
    n_clamped: int = 0


# Kernels: (S, y, k, need_grad) -> (valores, gradientes, n_clamped)
Kernel = Callable[[np.ndarray, np.ndarray, int, bool], Tuple[np.ndarray, Optional[np.ndarray], int]]


def _sorted_desc(V: np.ndarray) -> np.ndarray:
    return -np.sort(-V, axis=1)


def _one_hot(y: np.ndarray, M: int) -> np.ndarray:
    E = np.zeros((y.size, M))
    E[np.arange(y.size), y] = 1.0
    return E


def _without_label(S: np.ndarray, y: np.ndarray) -> np.ndarray:
    V = S.copy()
    V[np.arange(y.size), y] = -np.inf
    return V


def _top_sum_weights(V: np.ndarray, U: np.ndarray, k: int) -> np.ndarray:
    """
    Pesos do subgradiente da soma dos k maiores valores de cada linha.

    Entradas empatadas no limiar recebem fração igual do peso restante.

    Args:
        V: Valores (n, M)
        U: V ordenado de forma decrescente por linha
        k: Quantidade de maiores somados (0 devolve zeros)
    """
    if k <= 0:
        return np.zeros_like(V)
    t = U[:, k - 1:k]
    above = V > t
    at = V == t
    n_above = above.sum(axis=1, keepdims=True)
    n_at = at.sum(axis=1, keepdims=True)
    return above + at * ((k - n_above) / n_at)


def _rank_weights(V: np.ndarray, U: np.ndarray, j: int) -> np.ndarray:
    """Pesos do subgradiente da j-ésima estatística de ordem."""
    return _top_sum_weights(V, U, j) - _top_sum_weights(V, U, j - 1)


def _hinge_slope(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, np.where(z == 0, 0.5, 0.0))


def _psi1(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    V = _without_label(S, y)
    U = _sorted_desc(V)
    z = 1.0 + U[:, k - 1] - S[rows, y]
    values = np.maximum(z, 0.0)
    if not need_grad:
        return values, None, 0
    grads = _hinge_slope(z)[:, None] * (_rank_weights(V, U, k) - _one_hot(y, S.shape[1]))
    return values, grads, 0


def _psi2(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    E = _one_hot(y, S.shape[1])
    A = S + 1.0 - E
    U = _sorted_desc(A)
    z = U[:, :k].mean(axis=1) - S[rows, y]
    values = np.maximum(z, 0.0)
    if not need_grad:
        return values, None, 0
    grads = _hinge_slope(z)[:, None] * (_top_sum_weights(A, U, k) / k - E)
    return values, grads, 0


def _psi3(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    E = _one_hot(y, S.shape[1])
    A = S + 1.0 - E
    U = _sorted_desc(A)
    Z = U[:, :k] - S[rows, y][:, None]
    values = np.maximum(Z, 0.0).mean(axis=1)
    if not need_grad:
        return values, None, 0
    cumulative = [_top_sum_weights(A, U, j) for j in range(k + 1)]
    grads = np.zeros_like(S)
    for i in range(k):
        rank_w = cumulative[i + 1] - cumulative[i]
        grads += _hinge_slope(Z[:, i])[:, None] * (rank_w - E)
    return values, grads / k, 0


def _psi4(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    V = _without_label(S, y)
    U = _sorted_desc(V)
    z = 1.0 + U[:, :k].mean(axis=1) - S[rows, y]
    values = np.maximum(z, 0.0)
    if not need_grad:
        return values, None, 0
    grads = _hinge_slope(z)[:, None] * (_top_sum_weights(V, U, k) / k - _one_hot(y, S.shape[1]))
    return values, grads, 0


def _psi5(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    U = _sorted_desc(S)
    z = 1.0 + U[:, k] - S[rows, y]
    values = np.maximum(z, 0.0)
    if not need_grad:
        return values, None, 0
    grads = _hinge_slope(z)[:, None] * (_rank_weights(S, U, k + 1) - _one_hot(y, S.shape[1]))
    return values, grads, 0


def _ent(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    values = logsumexp(S, axis=1) - S[rows, y]
    if not need_grad:
        return values, None, 0
    return values, softmax(S, axis=1) - _one_hot(y, S.shape[1]), 0


def _cd(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool):
    rows = np.arange(y.size)
    M = S.shape[1]
    mask = 1.0 - _one_hot(y, M)
    sy = S[rows, y]
    others = S * mask
    mean_others = others.sum(axis=1) / (M - 1)
    deviation = (S - mean_others[:, None]) * mask
    values = np.logaddexp(0.0, -sy) + (deviation ** 2).sum(axis=1) + (others ** 2).sum(axis=1)
    if not need_grad:
        return values, None, 0
    grads = 2.0 * deviation + 2.0 * others
    grads[rows, y] = -expit(-sy)
    return values, grads, 0


def _truncated_log_denominators(
    S: np.ndarray, k: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Log do softmax truncado e de seus denominadores, linha a linha.

    Com u = s ordenado decrescente e posição p_i (0-based) da classe i,
    D_i = e^{s_i} + Σ_{r>k} e^{u_r} se p_i < k, senão D_i = Σ_{r>=k} e^{u_r}.

    Returns:
        Tuple: (log_g (n, M), log_D (n, M), posições (n, M), U ordenado (n, M))
    """
    n, M = S.shape
    order = np.argsort(-S, axis=1, kind="stable")
    U = np.take_along_axis(S, order, axis=1)
    pos = np.empty_like(order)
    pos[np.arange(n)[:, None], order] = np.arange(M)[None, :]
    kappa = U[:, k - 1][:, None]
    with np.errstate(divide="ignore"):
        log_tail_k = kappa[:, 0] + np.log(np.exp(U[:, k - 1:] - kappa).sum(axis=1))
        log_tail_k1 = kappa[:, 0] + np.log(np.exp(U[:, k:] - kappa).sum(axis=1))
    top = pos < k
    log_D = np.where(top, np.logaddexp(S, log_tail_k1[:, None]), log_tail_k[:, None])
    # -softplus(cauda - s) não arredonda para 0 quando s domina a cauda
    log_g = np.where(top, -np.logaddexp(0.0, log_tail_k1[:, None] - S), S - log_tail_k[:, None])
    return log_g, log_D, pos, U


def _cross_terms_free(S, log_g, log_D, pos, U, k) -> np.ndarray:
    """
    Σ_{i≠j} m_ij g_i e^{s_j} / D_i para linhas sem empates, em O(nM).

    m_ij = 1 quando j pertence ao conjunto truncado do denominador de i:
    posição de j igual a k (1-based) e i abaixo do posto k, ou j abaixo
    do posto k e i ≠ j. Valores deslocados por κ = u_k para não estourar.
    """
    kappa = U[:, k - 1][:, None]
    c = np.exp(log_g - log_D + kappa)
    below = pos >= k
    tail_sum = np.where(below, c, 0.0).sum(axis=1, keepdims=True)
    total = c.sum(axis=1, keepdims=True)
    e = np.exp(np.where(pos >= k - 1, S - kappa, -np.inf))
    return np.where(pos == k - 1, e * tail_sum, np.where(below, e * (total - c), 0.0))


def _cross_terms_tied(S, g, log_D, k) -> np.ndarray:
    """Mesma soma com pertinência fracionária (ponto médio) para linhas com empates."""
    out = np.zeros_like(S)
    for i in range(S.shape[1]):
        V = S.copy()
        V[:, i] = -np.inf
        membership = 1.0 - _top_sum_weights(V, _sorted_desc(V), k - 1)
        membership[:, i] = 0.0
        expo = np.where(membership > 0, S - log_D[:, i:i + 1], -np.inf)
        out += g[:, i:i + 1] * membership * np.exp(expo)
    return out


def _ent_tr(S: np.ndarray, y: np.ndarray, k: int, need_grad: bool, variant: int):
    rows = np.arange(y.size)
    log_g, log_D, pos, U = _truncated_log_denominators(S, k)
    nll = -log_g[rows, y]
    clamped = nll > _MAX_NLL
    nll = np.minimum(nll, _MAX_NLL)
    g = np.exp(log_g)
    values = nll if variant == 1 else nll + g.sum(axis=1) - 1.0
    if not need_grad:
        return values, None, int(clamped.sum())

    V = _without_label(S, y)
    membership = 1.0 - _top_sum_weights(V, _sorted_desc(V), k - 1)
    membership[rows, y] = 0.0
    expo = np.where(membership > 0, S - log_D[rows, y][:, None], -np.inf)
    grads = membership * np.exp(expo)
    grads[rows, y] = g[rows, y] - 1.0
    # -ln g(s)_y constante nas linhas limitadas
    grads[clamped] = 0.0

    if variant == 2:
        cross = np.zeros_like(S)
        tied = np.any(U[:, 1:] == U[:, :-1], axis=1)
        free = ~tied
        if free.any():
            cross[free] = _cross_terms_free(
                S[free], log_g[free], log_D[free], pos[free], U[free], k
            )
        if tied.any():
            cross[tied] = _cross_terms_tied(S[tied], g[tied], log_D[tied], k)
        grads += g * (1.0 - g) - cross
    return values, grads, int(clamped.sum())


def _ent_tr1(S, y, k, need_grad):
    return _ent_tr(S, y, k, need_grad, variant=1)


def _ent_tr2(S, y, k, need_grad):
    return _ent_tr(S, y, k, need_grad, variant=2)


_KERNELS: Dict[LossFamily, Kernel] = {
    LossFamily.PSI1: _psi1,
    LossFamily.PSI2: _psi2,
    LossFamily.PSI3: _psi3,
    LossFamily.PSI4: _psi4,
    LossFamily.PSI5: _psi5,
    LossFamily.ENT: _ent,
    LossFamily.ENT_TR1: _ent_tr1,
    LossFamily.ENT_TR2: _ent_tr2,
    LossFamily.CD: _cd,
}


def _check_batch(spec: LossSpec, S: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    S = np.asarray(S, dtype=float)
    y = np.asarray(y, dtype=int)
    if S.ndim != 2 or y.ndim != 1 or S.shape[0] != y.size:
        raise ValueError(f"Lote inconsistente: S {S.shape}, y {y.shape}")
    spec.validate(S.shape[1])
    if y.size and (y.min() < 0 or y.max() >= S.shape[1]):
        raise ValueError(f"Rótulos fora de [0, {S.shape[1]})")
    return S, y


def loss_and_grad(spec: LossSpec, S: np.ndarray, y: np.ndarray, need_grad: bool = True) -> LossBatch:
    """
    Avalia a perda e (opcionalmente) o subgradiente para cada linha.

    Args:
        spec: Família e k
        S: Scores (n, M)
        y: Rótulos 0-based (n,)
        need_grad: Calcula os subgradientes

    Returns:
        LossBatch: Valores (n,), subgradientes (n, M) e número de linhas em
        que g(s)_y foi limitado inferiormente (apenas EntTr)
    """
    S, y = _check_batch(spec, S, y)
    values, grads, n_clamped = _KERNELS[spec.family](S, y, spec.k, need_grad)
    return LossBatch(values=values, grads=grads, n_clamped=n_clamped)


def loss_values(spec: LossSpec, S: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Valores da perda por linha, sem subgradientes."""
    return loss_and_grad(spec, S, y, need_grad=False).values


def _single(spec: LossSpec, s: ArrayLike, y: int) -> float:
    scores = as_score_vec(s)
    return float(loss_values(spec, scores[None, :], np.array([y]))[0])


def eval_psi1(s: ArrayLike, y: int, k: int) -> float:
    """ψ1 = (1 + (s sem y)_[k] - s_y)_+."""
    return _single(LossSpec(LossFamily.PSI1, k), s, y)


def eval_psi2(s: ArrayLike, y: int, k: int) -> float:
    """ψ2: hinge da média dos k maiores de s + 1̄(y), menos s_y."""
    return _single(LossSpec(LossFamily.PSI2, k), s, y)


def eval_psi3(s: ArrayLike, y: int, k: int) -> float:
    """ψ3: média dos hinges termo a termo dos k maiores de s + 1̄(y)."""
    return _single(LossSpec(LossFamily.PSI3, k), s, y)


def eval_psi4(s: ArrayLike, y: int, k: int) -> float:
    return _single(LossSpec(LossFamily.PSI4, k), s, y)


def eval_psi5(s: ArrayLike, y: int, k: int) -> float:
    """ψ5 = (1 + s_[k+1] - s_y)_+."""
    return _single(LossSpec(LossFamily.PSI5, k), s, y)


def eval_ent(s: ArrayLike, y: int) -> float:
    """Entropia cruzada do softmax no rótulo y."""
    return _single(LossSpec(LossFamily.ENT), s, y)


def eval_ent_tr(s: ArrayLike, y: int, k: int, variant: int) -> float:
    """
    Entropia com softmax truncado.

    Args:
        s: Scores
        y: Rótulo
        k: Parâmetro de truncamento (1 <= k <= M-1)
        variant: 1 devolve -ln g(s)_y; 2 soma Σ g(s)_i - 1

    Raises:
        ValueError: Se a variante não for 1 ou 2
    """
    if variant not in (1, 2):
        raise ValueError(f"Variante deve ser 1 ou 2, recebido: {variant}")
    family = LossFamily.ENT_TR1 if variant == 1 else LossFamily.ENT_TR2
    return _single(LossSpec(family, k), s, y)


def ent_tr_clamped(s: ArrayLike, y: int, k: int) -> bool:
    """Indica se g(s)_y foi limitado a 1e-300 antes do logaritmo."""
    scores = as_score_vec(s)
    batch = loss_and_grad(LossSpec(LossFamily.ENT_TR1, k), scores[None, :], np.array([y]), need_grad=False)
    return batch.n_clamped > 0


def eval_cd(s: ArrayLike, y: int) -> float:
    """log(1+e^{-s_y}) + Σ_{i≠y}(s_i - média_{j≠y} s_j)² + Σ_{i≠y} s_i²."""
    return _single(LossSpec(LossFamily.CD), s, y)


def log_truncated_softmax(s: ArrayLike, k: int) -> np.ndarray:
    """Logaritmo do softmax truncado, sem underflow."""
    scores = as_score_vec(s)
    check_k(k, scores.size)
    log_g, _, _, _ = _truncated_log_denominators(scores[None, :], k)
    return log_g[0]


def truncated_softmax(s: ArrayLike, k: int) -> np.ndarray:
    """
    Softmax truncado g(s).

    A entrada j usa no denominador apenas os M-k menores scores concorrentes
    (postos k..M-1 de s sem j). Com k=1 coincide com o softmax.

    Args:
        s: Scores
        k: Parâmetro de truncamento (1 <= k <= M-1)

    Returns:
        np.ndarray: Entradas em (0, 1], soma não necessariamente 1
    """
    return np.exp(log_truncated_softmax(s, k))


def subgrad(spec: LossSpec, s: ArrayLike, y: int) -> np.ndarray:
    """Subgradiente de ψ(·, y) em s (gradiente nos pontos diferenciáveis)."""
    scores = as_score_vec(s)
    return loss_and_grad(spec, scores[None, :], np.array([y])).grads[0]


def all_specs(k: int) -> List[LossSpec]:
    """As nove perdas, na ordem de relatório, com o k dado."""
    return [LossSpec(family, k if family.uses_k else 1) for family in LossFamily]
