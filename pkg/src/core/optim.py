"""
Otimização: descida de subgradiente e Adam para vetores de scores e
modelos lineares, mais o oráculo de diferenças finitas.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from src.config.settings import Config
from src.core.losses import LossSpec, loss_and_grad
from src.core.ranking import TieBreakPolicy, top_k_errors
from src.core.synth import Dataset
from src.utils.logger import get_logger
from src.utils.seeding import derive_seed, make_rng

logger = get_logger("optim")

# (X (R, M)) -> (valores (R,), subgradientes (R, M))
BatchObjective = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """
    Gradiente por diferenças centrais (f(x + h e_i) - f(x - h e_i)) / 2h.

    Raises:
        ValueError: Se h <= 0
        FloatingPointError: Se f devolver valor não finito
    """
    if h <= 0:
        raise ValueError(f"Passo h deve ser positivo, recebido: {h}")
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        forward, backward = f(x + step), f(x - step)
        if not (np.isfinite(forward) and np.isfinite(backward)):
            raise FloatingPointError(f"Valor não finito na coordenada {i}")
        grad[i] = (forward - backward) / (2.0 * h)
    return grad


class StepSchedule(Enum):
    CONSTANT = "constant"
    INV_SQRT = "inv_sqrt"


@dataclass(frozen=True)
class MinimizeConfig:
    """Configuração da descida multi-start sobre vetores de scores."""

    restarts: int = Config.MINIMIZE_RESTARTS
    iterations: int = Config.MINIMIZE_ITERATIONS
    step0: float = Config.MINIMIZE_STEP0
    schedule: StepSchedule = StepSchedule.INV_SQRT
    tol: float = Config.MINIMIZE_TOL
    improvement_tol: float = Config.MINIMIZE_IMPROVEMENT_TOL
    seed: int = Config.DEFAULT_SEED
    start_scales: Tuple[float, ...] = Config.START_SCALES

    def step(self, t: int) -> float:
        if self.schedule is StepSchedule.CONSTANT:
            return self.step0
        return self.step0 / np.sqrt(t + 1.0)


@dataclass
class MinimizeResult:
    """Resultado de `minimize_scores` (uma linha por ponto inicial)."""

    x_final: np.ndarray
    x_best: np.ndarray
    f_best: np.ndarray
    trace: np.ndarray
    best_trace: np.ndarray
    grad_norm: np.ndarray
    iterations: int
    converged: bool
    diverged: bool = False


def minimize_scores(objective: BatchObjective, s0: np.ndarray, cfg: MinimizeConfig) -> MinimizeResult:
    """
    Descida de subgradiente em lote, uma linha por ponto inicial.

    Guarda o melhor iterado de cada linha (incluindo o ponto inicial); um
    novo valor só substitui o melhor se o melhorar além de `improvement_tol`.
    Para quando todas as normas de gradiente ficam abaixo de `tol` ou ao
    atingir `cfg.iterations`.

    Args:
        objective: Função em lote que devolve valores e subgradientes
        s0: Ponto(s) inicial(is), (M,) ou (R, M)
        cfg: Configuração

    Returns:
        MinimizeResult: Iterados final e melhor, traços por iteração
    """
    single = np.ndim(s0) == 1
    x = np.atleast_2d(np.asarray(s0, dtype=float)).copy()

    values, grads = objective(x)
    x_best, f_best = x.copy(), values.copy()
    trace, best_trace = [values.copy()], [f_best.copy()]
    grad_norm = np.linalg.norm(grads, axis=1)
    converged, diverged = bool(np.all(grad_norm < cfg.tol)), False
    t = 0

    while not converged and t < cfg.iterations:
        x = x - cfg.step(t) * grads
        values, grads = objective(x)
        t += 1
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(x))):
            logger.warning(f"Divergência detectada na iteração {t}")
            diverged = True
            break
        better = values < f_best - cfg.improvement_tol * np.maximum(1.0, np.abs(f_best))
        x_best[better] = x[better]
        f_best[better] = values[better]
        trace.append(values.copy())
        best_trace.append(f_best.copy())
        grad_norm = np.linalg.norm(grads, axis=1)
        converged = bool(np.all(grad_norm < cfg.tol))

    result = MinimizeResult(
        x_final=x, x_best=x_best, f_best=f_best,
        trace=np.array(trace), best_trace=np.array(best_trace),
        grad_norm=grad_norm, iterations=t, converged=converged, diverged=diverged,
    )
    if single:
        result.x_final, result.x_best = result.x_final[0], result.x_best[0]
        result.f_best, result.grad_norm = result.f_best[0], result.grad_norm[0]
        result.trace, result.best_trace = result.trace[:, 0], result.best_trace[:, 0]
    return result


class Adam:
    """Adam com correção de viés, atualizando um array de parâmetros no lugar."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


class SubgradientStep:
    """Passo de (sub)gradiente com taxa constante."""

    def __init__(self, lr: float) -> None:
        self.lr = lr

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        param -= self.lr * grad


class OptimizerKind(Enum):
    SUBGRAD_DESCENT = "subgrad"
    ADAM = "adam"


class BatchMode(Enum):
    FULL = "full"


@dataclass(frozen=True)
class TrainConfig:
    """
    Configuração de treinamento de um modelo linear.

    `init_scale` > 0 sorteia W inicial gaussiano (senão W=0); `grad_noise`
    soma ruído gaussiano ao gradiente de lote completo a cada época;
    `restarts` repete o treino com sementes derivadas e mantém o menor
    valor final da perda de treino.
    """

    optimizer: OptimizerKind = OptimizerKind.ADAM
    lr: float = Config.TRAIN_LR
    epochs: int = Config.TRAIN_EPOCHS
    batch: BatchMode = BatchMode.FULL
    seed: int = Config.DEFAULT_SEED
    adam_betas: Tuple[float, float] = Config.ADAM_BETAS
    adam_eps: float = Config.ADAM_EPS
    fit_bias: bool = True
    init_scale: float = 0.0
    grad_noise: float = 0.0
    restarts: int = 1

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr deve ser positivo, recebido: {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs deve ser >= 1, recebido: {self.epochs}")
        if self.restarts < 1:
            raise ValueError(f"restarts deve ser >= 1, recebido: {self.restarts}")
        if self.init_scale < 0 or self.grad_noise < 0:
            raise ValueError("init_scale e grad_noise devem ser não negativos")


@dataclass
class LinearModel:
    """Preditor linear s = W x (com coluna extra de viés se `fit_bias`)."""

    W: np.ndarray
    fit_bias: bool = False
    train_loss: Optional[float] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or not np.all(np.isfinite(self.W)):
            raise ValueError("W deve ser uma matriz 2-D com entradas finitas")

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def design(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.fit_bias:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.design(X) @ self.W.T


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer is OptimizerKind.ADAM:
        return Adam(cfg.lr, cfg.adam_betas[0], cfg.adam_betas[1], cfg.adam_eps)
    return SubgradientStep(cfg.lr)


def _train_once(loss: LossSpec, data: Dataset, cfg: TrainConfig, seed: int) -> LinearModel:
    rng = make_rng(seed)
    d = data.inputs.shape[1] + (1 if cfg.fit_bias else 0)
    if cfg.init_scale > 0:
        W = cfg.init_scale * rng.standard_normal((data.M, d))
    else:
        W = np.zeros((data.M, d))
    model = LinearModel(W, fit_bias=cfg.fit_bias)
    Xd = model.design(data.inputs)
    n = Xd.shape[0]
    optimizer = _make_optimizer(cfg)
    clamped_total = 0

    for epoch in range(cfg.epochs):
        batch = loss_and_grad(loss, Xd @ model.W.T, data.labels)
        mean_loss = float(batch.values.mean())
        if not np.isfinite(mean_loss) or not np.all(np.isfinite(batch.grads)):
            raise FloatingPointError(f"Perda não finita para {loss.name} na época {epoch}")
        clamped_total += batch.n_clamped
        G = batch.grads.T @ Xd / n
        if cfg.grad_noise > 0:
            G = G + cfg.grad_noise * rng.standard_normal(G.shape)
        optimizer.step(model.W, G)

    if clamped_total:
        logger.warning(f"{loss.name}: g(s)_y limitado em {clamped_total} avaliação(ões)")
    final = loss_and_grad(loss, Xd @ model.W.T, data.labels, need_grad=False)
    model.train_loss = float(final.values.mean())
    if not np.isfinite(model.train_loss):
        raise FloatingPointError(f"Perda final não finita para {loss.name}")
    return model


def train_linear(loss: LossSpec, data: Dataset, cfg: TrainConfig) -> LinearModel:
    """
    Minimiza (1/n) Σ ψ(W x_i, y_i) com atualizações de lote completo.

    Args:
        loss: Perda treinada
        data: Conjunto de treino
        cfg: Configuração (determinística dada a semente)

    Returns:
        LinearModel: Modelo com a menor perda final entre os reinícios

    Raises:
        FloatingPointError: Se a perda se tornar não finita
    """
    cfg.validate()
    loss.validate(data.M)
    if cfg.restarts == 1:
        return _train_once(loss, data, cfg, cfg.seed)

    best: Optional[LinearModel] = None
    for r in range(cfg.restarts):
        model = _train_once(loss, data, cfg, derive_seed(cfg.seed, r))
        if best is None or model.train_loss < best.train_loss:
            best = model
    logger.debug(f"{loss.name}: melhor perda de treino {best.train_loss:.6f} em {cfg.restarts} reinícios")
    return best


def top_k_accuracy(
    model: LinearModel,
    data: Dataset,
    k: int,
    policy: TieBreakPolicy = TieBreakPolicy.WORST_CASE_FOR_LABEL,
) -> float:
    """Fração de exemplos com erro top-k igual a 0."""
    errors = top_k_errors(model.scores(data.inputs), data.labels, k, policy)
    return float(1.0 - errors.mean())
