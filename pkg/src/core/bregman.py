"""
Construção de perdas substitutas por divergências de Bregman.

ψ(s, y) = D_φ(g(s), e_y), com φ estritamente convexa e g um link. As duas
instâncias entrópicas (softmax e softmax truncado) reproduzem Ent e EntTr2.
A entropia negativa é estendida ao ortante positivo aberto, o que coloca as
saídas do softmax truncado (que não somam 1) dentro do domínio.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.special import log_softmax, softmax, xlogy

from src.config.settings import Config
from src.core.losses import log_truncated_softmax, truncated_softmax
from src.core.ranking import ArrayLike, as_score_vec, check_k, is_top_k_preserving
from src.utils.logger import get_logger

logger = get_logger("bregman")

VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialFn:
    """Potencial φ com valor, gradiente e verificação de domínio."""

    name: str
    value: Callable[[np.ndarray], float]
    gradient: VectorFn
    check_domain: Callable[[np.ndarray, bool], None] = field(default=lambda x, strict: None)


def _check_positive_orthant(x: np.ndarray, strict: bool) -> None:
    if strict and np.any(x <= 0):
        raise ValueError("Domínio violado: entropia negativa exige entradas estritamente positivas")
    if not strict and np.any(x < 0):
        raise ValueError("Domínio violado: entropia negativa exige entradas não negativas")


def negative_entropy() -> PotentialFn:
    """φ(x) = Σ x_i ln x_i no ortante positivo, com 0·ln 0 := 0."""
    return PotentialFn(
        name="negative_entropy",
        value=lambda x: float(np.sum(xlogy(x, x))),
        gradient=lambda x: np.log(x) + 1.0,
        check_domain=_check_positive_orthant,
    )


def squared_norm() -> PotentialFn:
    """φ(x) = ½‖x‖²."""
    return PotentialFn(
        name="squared_norm",
        value=lambda x: 0.5 * float(np.dot(x, x)),
        gradient=lambda x: np.array(x, dtype=float),
    )


class LinkPropertyKind(Enum):
    INVERSE_TOP_K_PRESERVING = "inverse_top_k_preserving"
    RANK_PRESERVING = "rank_preserving"


@dataclass(frozen=True)
class LinkProperty:
    kind: LinkPropertyKind
    k: Optional[int] = None


@dataclass(frozen=True)
class LinkFn:
    """
    Link g: R^M -> R^M.

    `log_map`, quando presente, é usado nas verificações de ordem para
    evitar empates artificiais por underflow em escalas grandes.
    """

    name: str
    map: VectorFn
    claimed_property: LinkProperty
    log_map: Optional[VectorFn] = None


def softmax_link() -> LinkFn:
    return LinkFn(
        name="softmax",
        map=lambda s: softmax(s),
        claimed_property=LinkProperty(LinkPropertyKind.RANK_PRESERVING),
        log_map=lambda s: log_softmax(s),
    )


def truncated_softmax_link(k: int) -> LinkFn:
    return LinkFn(
        name=f"truncated_softmax(k={k})",
        map=lambda s: truncated_softmax(s, k),
        claimed_property=LinkProperty(LinkPropertyKind.RANK_PRESERVING),
        log_map=lambda s: log_truncated_softmax(s, k),
    )


def constant_link(k: int) -> LinkFn:
    """Controle negativo trivial: s ↦ (1,…,1)."""
    return LinkFn(
        name="constant",
        map=lambda s: np.ones_like(s),
        claimed_property=LinkProperty(LinkPropertyKind.INVERSE_TOP_K_PRESERVING, k),
    )


def reversing_link(k: int) -> LinkFn:
    """Controle negativo: s ↦ -s inverte a ordenação."""
    return LinkFn(
        name="reversing",
        map=lambda s: -np.asarray(s, dtype=float),
        claimed_property=LinkProperty(LinkPropertyKind.INVERSE_TOP_K_PRESERVING, k),
    )


def bregman_div(phi: PotentialFn, p: ArrayLike, q: ArrayLike) -> float:
    """
    D_φ(p, q) = φ(q) - φ(p) - ∇φ(p)·(q - p), expandida em p.

    Args:
        phi: Potencial
        p: Centro da expansão (estritamente no domínio)
        q: Ponto avaliado (pode tocar a fronteira)

    Returns:
        float: Divergência (>= 0 para φ convexa)

    Raises:
        ValueError: Se dimensões diferirem ou o domínio for violado
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"Dimensões incompatíveis: {p.shape} vs {q.shape}")
    phi.check_domain(p, True)
    phi.check_domain(q, False)
    return phi.value(q) - phi.value(p) - float(np.dot(phi.gradient(p), q - p))


def surrogate_eval(phi: PotentialFn, g: LinkFn, s: ArrayLike, y: int) -> float:
    """Valor da perda de Bregman D_φ(g(s), e_y)."""
    scores = as_score_vec(s)
    if not 0 <= y < scores.size:
        raise ValueError(f"Rótulo fora do intervalo: {y}, M={scores.size}")
    target = np.zeros(scores.size)
    target[y] = 1.0
    return bregman_div(phi, g.map(scores), target)


@dataclass
class LinkCheckReport:
    """Resultado da verificação amostral de uma propriedade de link."""

    link: str
    property: str
    passed: bool
    n_checked: int
    counterexample: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "link": self.link,
            "property": self.property,
            "passed": self.passed,
            "n_checked": self.n_checked,
            "counterexample": None if self.counterexample is None else self.counterexample.tolist(),
        }


def _rank_preserved(s: np.ndarray, image: np.ndarray) -> bool:
    return bool(np.array_equal(
        np.sign(s[:, None] - s[None, :]),
        np.sign(image[:, None] - image[None, :]),
    ))


def check_link_property(
    g: LinkFn,
    k: int,
    n_samples: int,
    rng: np.random.Generator,
    dim: int = Config.LINK_CHECK_DIM,
    scales: Tuple[float, ...] = Config.LINK_CHECK_SCALES,
) -> LinkCheckReport:
    """
    Verifica por amostragem a propriedade declarada por um link.

    Amostras gaussianas padrão são escaladas em ciclo pelas magnitudes
    configuradas; a verificação para no primeiro contraexemplo.

    Args:
        g: Link verificado
        k: Parâmetro da propriedade top-k (usado se o link não declarar k)
        n_samples: Número de amostras (>= 1)
        rng: Gerador aleatório
        dim: Dimensão M das amostras
        scales: Magnitudes percorridas

    Returns:
        LinkCheckReport: Aprovação e primeiro contraexemplo, se houver
    """
    if n_samples < 1:
        raise ValueError(f"n_samples deve ser >= 1, recebido: {n_samples}")
    prop = g.claimed_property
    prop_k = prop.k if prop.k is not None else k
    if prop.kind is LinkPropertyKind.INVERSE_TOP_K_PRESERVING:
        check_k(prop_k, dim)
    label = prop.kind.value if prop.kind is LinkPropertyKind.RANK_PRESERVING else f"{prop.kind.value}(k={prop_k})"

    for i in range(n_samples):
        s = scales[i % len(scales)] * rng.standard_normal(dim)
        if prop.kind is LinkPropertyKind.RANK_PRESERVING:
            image = g.log_map(s) if g.log_map is not None else g.map(s)
            ok = _rank_preserved(s, image)
        else:
            ok = is_top_k_preserving(s, g.map(s), prop_k)
        if not ok:
            logger.debug(f"Contraexemplo para {g.name} ({label}) na amostra {i}")
            return LinkCheckReport(g.name, label, False, i + 1, s)

    return LinkCheckReport(g.name, label, True, n_samples)


@dataclass
class RangeInversion:
    """Diagnóstico: busca numérica de s com g(s) ≈ η."""

    scores: np.ndarray
    residual: float
    success: bool


def invert_link(g: LinkFn, eta: ArrayLike, tol: float = 1e-6) -> RangeInversion:
    """
    Procura s com ‖g(s) - η‖ < tol por mínimos quadrados.

    Diagnóstico para a hipótese de que o simplex está contido na imagem
    de g; não é um invariante.
    """
    target = np.asarray(eta, dtype=float)
    start = np.log(np.clip(target, 1e-12, None))
    fit = least_squares(lambda s: g.map(s) - target, start, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    residual = float(np.linalg.norm(g.map(fit.x) - target))
    return RangeInversion(scores=fit.x, residual=residual, success=residual < tol)
