"""
Risco condicional, risco de Bayes top-k, minimizadores fechados de ψ1 e o
verificador empírico de calibração.

O verificador usa o critério "o minimizador numérico global é (ou não)
top-k preservante em relação a η"; o ínfimo restrito ao complemento
aberto não é calculado.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.config.settings import Config
from src.core.losses import LossFamily, LossSpec, loss_and_grad
from src.core.optim import MinimizeConfig, StepSchedule, minimize_scores
from src.core.ranking import (
    ArrayLike,
    TieBreakPolicy,
    as_cond_dist,
    as_score_vec,
    check_k,
    is_top_k_preserving,
    top_k_errors,
)
from src.utils.logger import get_logger, init_worker_logging
from src.utils.seeding import derive_seed, make_rng

logger = get_logger("risk")


def _risk_objective(loss: LossSpec, eta: np.ndarray):
    """Risco condicional e subgradiente avaliados em lote sobre linhas de S."""
    M = eta.size
    labels_per_row = np.arange(M)

    def objective(S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        R = S.shape[0]
        batch = loss_and_grad(loss, np.repeat(S, M, axis=0), np.tile(labels_per_row, R))
        values = batch.values.reshape(R, M) @ eta
        grads = np.einsum("rym,y->rm", batch.grads.reshape(R, M, M), eta)
        return values, grads

    return objective


def cond_risk(loss: LossSpec, s: ArrayLike, eta: ArrayLike) -> float:
    """
    Risco condicional Σ_y η_y ψ(s, y).

    Raises:
        ValueError: Se as dimensões diferirem
    """
    scores = as_score_vec(s)
    probs = as_cond_dist(eta)
    if scores.size != probs.size:
        raise ValueError(f"Dimensões incompatíveis: s tem {scores.size}, η tem {probs.size}")
    values, _ = _risk_objective(loss, probs)(scores[None, :])
    return float(values[0])


def bayes_topk_risk(eta: ArrayLike, k: int) -> float:
    """1 menos a soma das k maiores entradas de η."""
    probs = as_cond_dist(eta)
    check_k(k, probs.size)
    return float(1.0 - np.sort(probs)[::-1][:k].sum())


def worst_case_topk_risk(s: ArrayLike, eta: ArrayLike, k: int) -> float:
    """Risco top-k condicional de s com desempate no pior caso para o rótulo."""
    scores = as_score_vec(s)
    probs = as_cond_dist(eta)
    M = probs.size
    errors = top_k_errors(np.tile(scores, (M, 1)), np.arange(M), k, TieBreakPolicy.WORST_CASE_FOR_LABEL)
    return float(errors @ probs)


class Psi1Case(Enum):
    TOP_MASS_DOMINATES = "top_mass_dominates"
    TAIL_DOMINATES = "tail_dominates"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class FreeRange:
    """Postos [first_rank, last_rank] livres em [c + low, c + high] (high None = ∞)."""

    first_rank: int
    last_rank: int
    low: float
    high: Optional[float]

    def describe(self) -> str:
        upper = "inf" if self.high is None else f"c+{self.high:g}"
        return f"ranks {self.first_rank}..{self.last_rank} in [c+{self.low:g}, {upper}]"


@dataclass
class Psi1MinimizerForm:
    """Forma fechada dos minimizadores de ψ1 para um η sem zeros."""

    case: Psi1Case
    sorted_minimizer: np.ndarray
    minimizer: np.ndarray
    permutation: np.ndarray
    free_ranges: List[FreeRange]
    optimal_risk: float
    ambiguous: bool
    k: int = 1

    def candidates(self) -> Dict[str, np.ndarray]:
        """As duas formas canônicas: k uns e k-1 uns, posicionadas pela permutação."""
        M, k = self.minimizer.size, self.k
        out = {}
        for name, ones in (("k_ones", k), ("k_minus_1_ones", k - 1)):
            vec = np.zeros(M)
            vec[self.permutation[:ones]] = 1.0
            out[name] = vec
        return out


def psi1_closed_form(eta: ArrayLike, k: int) -> Psi1MinimizerForm:
    """
    Classifica η e devolve o minimizador canônico de ψ1 (com c = 0).

    Compara η_[k] com a cauda Σ_{i>k} η_[i]:
      - η_[k] > cauda: k uns e zeros (postos 1..k-1 livres em [c+1, ∞),
        posto k fixo em c+1);
      - η_[k] < cauda: k-1 uns e zeros;
      - igualdade: k-1 uns, posto k livre em [c, c+1] (canônico 0.5).

    Raises:
        ValueError: Se η tiver entrada nula ou k for inválido
    """
    probs = as_cond_dist(eta)
    M = probs.size
    check_k(k, M)
    if np.any(probs == 0):
        raise ValueError("η não pode ter entradas nulas")

    permutation = np.argsort(-probs, kind="stable")
    ordered = probs[permutation]
    top_k, tail = ordered[k - 1], float(ordered[k:].sum())
    ambiguous = bool(ordered[k - 1] == ordered[k] or (k >= 2 and ordered[k - 2] == ordered[k - 1]))

    free = [FreeRange(1, k - 1, 1.0, None)] if k >= 2 else []
    if abs(top_k - tail) <= 1e-12:
        case = Psi1Case.BOUNDARY
        sorted_min = np.r_[np.ones(k - 1), 0.5, np.zeros(M - k)]
        free += [FreeRange(k, k, 0.0, 1.0)]
        optimal = top_k + tail
    elif top_k > tail:
        case = Psi1Case.TOP_MASS_DOMINATES
        sorted_min = np.r_[np.ones(k), np.zeros(M - k)]
        free += [FreeRange(k, k, 1.0, 1.0)]
        optimal = 2.0 * tail
    else:
        case = Psi1Case.TAIL_DOMINATES
        sorted_min = np.r_[np.ones(k - 1), np.zeros(M - k + 1)]
        free += [FreeRange(k, k, 0.0, 0.0)]
        optimal = top_k + tail
    if k < M:
        free += [FreeRange(k + 1, M, 0.0, 0.0)]

    minimizer = np.zeros(M)
    minimizer[permutation] = sorted_min
    if ambiguous:
        logger.debug(f"Empate em η na fronteira do posto {k}; permutação não única")
    return Psi1MinimizerForm(
        case=case, sorted_minimizer=sorted_min, minimizer=minimizer, permutation=permutation,
        free_ranges=free, optimal_risk=float(optimal), ambiguous=ambiguous, k=k,
    )


def _starting_points(loss: LossSpec, eta: np.ndarray, cfg: MinimizeConfig) -> np.ndarray:
    """
    Zero, padrões indicadores dos j maiores de η (j ∈ {1, K-1, K, K+1})
    em cada escala, e sorteios gaussianos até completar `cfg.restarts`.
    """
    M = eta.size
    order = np.argsort(-eta, kind="stable")
    K = loss.k if loss.family.uses_k else 1
    starts = [np.zeros(M)]
    for j in sorted({1, K - 1, K, K + 1}):
        if not 1 <= j <= M - 1:
            continue
        pattern = np.zeros(M)
        pattern[order[:j]] = 1.0
        starts.extend(scale * pattern for scale in cfg.start_scales)
    rng = make_rng(cfg.seed)
    while len(starts) < cfg.restarts:
        starts.append(rng.standard_normal(M))
    return np.array(starts)


@dataclass
class NumericMinimum:
    scores: np.ndarray
    risk: float
    n_starts: int
    diverged: bool


def _numeric_minimum(loss: LossSpec, eta: np.ndarray, cfg: MinimizeConfig) -> NumericMinimum:
    if cfg.restarts < 1:
        raise ValueError(f"restarts deve ser >= 1, recebido: {cfg.restarts}")
    loss.validate(eta.size)
    starts = _starting_points(loss, eta, cfg)
    result = minimize_scores(_risk_objective(loss, eta), starts, cfg)
    if result.diverged:
        logger.warning(f"{loss.name}: risco não finito durante a minimização")

    finite = np.isfinite(result.f_best)
    f_min = float(np.min(result.f_best[finite]))
    tol = cfg.improvement_tol * max(1.0, abs(f_min))
    index = int(np.flatnonzero(finite & (result.f_best <= f_min + tol))[0])
    best = result.x_best[index].copy()
    if loss.shift_invariant:
        best -= best.min()
    return NumericMinimum(best, float(result.f_best[index]), starts.shape[0], result.diverged)


def numeric_minimizer(loss: LossSpec, eta: ArrayLike, cfg: MinimizeConfig) -> Tuple[np.ndarray, float]:
    """
    Minimiza s ↦ cond_risk(loss, s, η) com descida de subgradiente multi-start.

    Returns:
        Tuple[np.ndarray, float]: Melhor ponto (recentrado com mínimo 0 para
        perdas invariantes a deslocamento) e seu risco
    """
    found = _numeric_minimum(loss, as_cond_dist(eta), cfg)
    return found.scores, found.risk


@dataclass
class CalibrationReport:
    """Resultado de uma sonda (perda, k, η)."""

    eta: np.ndarray
    loss: LossSpec
    k: int
    minimizer: np.ndarray
    min_risk: float
    preserving: bool
    bayes_gap: float
    n_restarts_used: int
    bayes_risk: float = 0.0
    diverged: bool = False
    closed_form: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta.tolist(),
            "loss": self.loss.family.value,
            "loss_k": self.loss.k,
            "k": self.k,
            "minimizer": self.minimizer.tolist(),
            "min_risk": self.min_risk,
            "preserving": self.preserving,
            "bayes_gap": self.bayes_gap,
            "bayes_risk": self.bayes_risk,
            "n_restarts_used": self.n_restarts_used,
            "diverged": self.diverged,
            "closed_form": self.closed_form,
            "seed": self.seed,
        }


def _closed_form_verdicts(eta: np.ndarray, k: int) -> Optional[Dict[str, Any]]:
    if np.any(eta == 0):
        return None
    form = psi1_closed_form(eta, k)
    return {
        "case": form.case.value,
        "ambiguous": form.ambiguous,
        "optimal_risk": form.optimal_risk,
        "free_ranges": [r.describe() for r in form.free_ranges],
        "preserving": {
            name: is_top_k_preserving(vec, eta, k) for name, vec in form.candidates().items()
        },
    }


def calibration_probe(loss: LossSpec, eta: ArrayLike, k: int, cfg: MinimizeConfig) -> CalibrationReport:
    """
    Minimiza o risco condicional e verifica a preservação top-k do minimizador.

    preserving=False com bayes_gap > 0 é evidência empírica de não
    calibração em η. Para ψ1 o relatório inclui os veredictos das duas
    formas fechadas candidatas.
    """
    probs = as_cond_dist(eta)
    check_k(k, probs.size)
    found = _numeric_minimum(loss, probs, cfg)
    bayes = bayes_topk_risk(probs, k)
    gap = worst_case_topk_risk(found.scores, probs, k) - bayes
    report = CalibrationReport(
        eta=probs, loss=loss, k=k, minimizer=found.scores, min_risk=found.risk,
        preserving=is_top_k_preserving(found.scores, probs, k),
        bayes_gap=float(gap), n_restarts_used=found.n_starts, bayes_risk=bayes,
        diverged=found.diverged, seed=cfg.seed,
    )
    if loss.family is LossFamily.PSI1:
        report.closed_form = _closed_form_verdicts(probs, k)
    return report


def structured_family(M: int, k: int, n_points: int = Config.SCAN_STRUCTURED_POINTS,
                      margin: float = Config.SCAN_TAIL_MARGIN) -> List[np.ndarray]:
    """
    Distribuições de dois níveis com massa de cauda > k/(k+1) + margem.

    Inclui a grade η = ((1-T)/k ×k, T/(M-k) ×(M-k)) com T entre o limiar e a
    uniforme, e o ponto âncora com razão cauda/topo 2/3 quando ele cai acima
    do limiar (para M=11, k=2 é (1/8, 1/8, 1/12 ×9)).
    """
    check_k(k, M)
    low = k / (k + 1) + margin
    high = (M - k) / M - margin
    etas: List[np.ndarray] = []
    if low < high:
        for T in np.linspace(low, high, n_points):
            etas.append(np.r_[np.full(k, (1.0 - T) / k), np.full(M - k, T / (M - k))])
    top = 1.0 / (k + (M - k) * 2.0 / 3.0)
    anchor = np.r_[np.full(k, top), np.full(M - k, top * 2.0 / 3.0)]
    if anchor[k:].sum() >= low:
        etas.append(anchor / anchor.sum())
    return etas


def scan_distribution(M: int, k: int, n_draws: int, rng: np.random.Generator) -> List[np.ndarray]:
    """η da varredura: n_draws Dirichlet(1,…,1), a família estruturada e cópias perturbadas dela."""
    if n_draws < 1:
        raise ValueError(f"n_draws deve ser >= 1, recebido: {n_draws}")
    etas = list(rng.dirichlet(np.ones(M), size=n_draws))
    structured = structured_family(M, k)
    etas.extend(structured)
    threshold = k / (k + 1) + Config.SCAN_TAIL_MARGIN
    for eta in structured:
        jittered = eta * np.exp(0.01 * rng.standard_normal(M))
        jittered /= jittered.sum()
        if np.sort(jittered)[::-1][k:].sum() >= threshold:
            etas.append(jittered)
    return etas


def _probe_task(args: Tuple[LossSpec, np.ndarray, int, MinimizeConfig]) -> CalibrationReport:
    loss, eta, k, cfg = args
    return calibration_probe(loss, eta, k, cfg)


def calibration_scan(
    loss: LossSpec,
    k: int,
    n_draws: int,
    rng: np.random.Generator,
    cfg: MinimizeConfig,
    M: int = 8,
    jobs: int = 1,
) -> List[CalibrationReport]:
    """
    Sonda cada η da distribuição de varredura e devolve só as violações.

    Cada sonda usa semente derivada de (cfg.seed, índice); com jobs > 1 as
    sondas rodam em processos e são reunidas em ordem de índice.
    """
    etas = scan_distribution(M, k, n_draws, rng)
    tasks = [
        (loss, eta, k, _replace_seed(cfg, derive_seed(cfg.seed, i)))
        for i, eta in enumerate(etas)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=init_worker_logging) as pool:
            reports = list(pool.map(_probe_task, tasks))
    else:
        reports = [_probe_task(task) for task in tasks]
    violations = [r for r in reports if not r.preserving]
    logger.info(f"{loss.name}: {len(violations)} violação(ões) em {len(reports)} sonda(s)")
    return violations


def _replace_seed(cfg: MinimizeConfig, seed: int) -> MinimizeConfig:
    return replace(cfg, seed=seed)


@dataclass
class CdCounterexample:
    """Ótimo do risco condicional de CD e os veredictos de preservação."""

    eta: np.ndarray
    optimum: np.ndarray
    preserving_k2: bool
    preserving_k1: bool
    risk: float
    iterations: int
    grad_norm: float
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta.tolist(),
            "optimum": self.optimum.tolist(),
            "preserving_k2": self.preserving_k2,
            "preserving_k1": self.preserving_k1,
            "risk": self.risk,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            **self.extra,
        }


def cd_counterexample(
    eta: ArrayLike = Config.CD_ETA,
    step: float = Config.CD_STEP,
    tol: float = Config.CD_TOL,
    max_iterations: int = Config.CD_MAX_ITERATIONS,
) -> CdCounterexample:
    """
    Descida de gradiente com passo constante sobre cond_risk(CD, ·, η) a partir de 0.

    Raises:
        RuntimeError: Se a norma do gradiente não cair abaixo de tol
    """
    probs = as_cond_dist(eta)
    cfg = MinimizeConfig(
        restarts=1, iterations=max_iterations, step0=step,
        schedule=StepSchedule.CONSTANT, tol=tol,
    )
    result = minimize_scores(_risk_objective(LossSpec(LossFamily.CD), probs), np.zeros(probs.size), cfg)
    if not result.converged:
        raise RuntimeError(
            f"CD não convergiu em {result.iterations} iterações (‖∇‖={result.grad_norm:.3e})"
        )
    optimum = result.x_final
    return CdCounterexample(
        eta=probs,
        optimum=optimum,
        preserving_k2=is_top_k_preserving(optimum, probs, 2),
        preserving_k1=is_top_k_preserving(optimum, probs, 1),
        risk=float(result.trace[-1]),
        iterations=result.iterations,
        grad_norm=float(result.grad_norm),
    )
