"""
Serviço de experimentos de treinamento: as três tarefas sintéticas, o
conjunto de separabilidade e a verificação de gradientes.

Cada tentativa usa a semente derive_seed(semente, índice) e roda num
processo próprio quando jobs > 1; os registros são ordenados por índice
antes da agregação.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import Config
from src.core.losses import HINGE_FAMILIES, LossFamily, LossSpec, all_specs, loss_values, subgrad
from src.core.optim import (
    OptimizerKind,
    TrainConfig,
    finite_diff_grad,
    top_k_accuracy,
    train_linear,
)
from src.core.ranking import top_k_errors
from src.core.synth import Dataset, gen_exp1, gen_exp2, gen_exp3, gen_linear_sep_dataset
from src.services.comparison_service import ComparisonService
from src.services.result_service import RunResult
from src.utils.logger import get_logger, get_performance_logger, init_worker_logging
from src.utils.seeding import derive_seed, make_rng

logger = get_logger("experiments")


def _evaluate(spec: LossSpec, train: Dataset, test: Dataset, cfg: TrainConfig, k: int) -> Dict[str, Any]:
    try:
        model = train_linear(spec, train, cfg)
    except FloatingPointError as e:
        logger.warning(f"{spec.name}: treino abortado ({e}); registrado como N/A")
        return {"loss": spec.family.value, "top_k": None, "top1": None, "train_loss": None}
    return {
        "loss": spec.family.value,
        "top_k": top_k_accuracy(model, test, k),
        "top1": top_k_accuracy(model, test, 1),
        "train_loss": model.train_loss,
    }


def _exp1_trial(task: Tuple[int, int, int, int, float]) -> List[Dict[str, Any]]:
    trial, seed, k, epochs, lr = task
    data = gen_exp1()
    origin = np.zeros((1, data.d))
    records = []
    for family in HINGE_FAMILIES:
        spec = LossSpec(family, k)
        cfg = TrainConfig(
            optimizer=OptimizerKind.SUBGRAD_DESCENT, lr=lr, epochs=epochs, seed=seed,
            grad_noise=Config.EXP1_GRAD_NOISE,
        )
        model = train_linear(spec, data, cfg)
        records.append({
            "trial": trial,
            "seed": seed,
            "loss": family.value,
            "top_k": top_k_accuracy(model, data, k),
            "top1": top_k_accuracy(model, data, 1),
            "train_loss": model.train_loss,
            "scores_at_zero": model.scores(origin)[0].tolist(),
        })
    return records


def _mixture_trial(task: Tuple[str, int, int, Dict[str, Any], int, float]) -> List[Dict[str, Any]]:
    command, trial, seed, params, epochs, lr = task
    k = params["k"]
    if command == "exp2":
        train, test = gen_exp2(N=params["N"], K=params["K"], M=params["M"], seed=seed)
    else:
        train, test = gen_exp3(N=params["N"], k=k, seed=seed)
    cfg = TrainConfig(optimizer=OptimizerKind.ADAM, lr=lr, epochs=epochs, seed=seed)
    return [
        {"trial": trial, "seed": seed, **_evaluate(spec, train, test, cfg, k)}
        for spec in all_specs(k)
    ]


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    finite = [v for v in values if v is not None]
    return float(np.mean(finite)) if finite else None


def aggregate_by_loss(records: List[Dict[str, Any]], keys: Sequence[str]) -> Dict[str, Dict[str, Any]]:
    """
    Média por perda das métricas em `keys`, ignorando N/A.

    Returns:
        Dict[str, Dict[str, Any]]: {perda: {métrica: média, "failed": n}}
    """
    table: Dict[str, Dict[str, Any]] = {}
    losses = list(dict.fromkeys(r["loss"] for r in records))
    for loss in losses:
        rows = [r for r in records if r["loss"] == loss]
        entry: Dict[str, Any] = {key: _mean([r.get(key) for r in rows]) for key in keys}
        entry["failed"] = sum(1 for r in rows if r.get(keys[0]) is None)
        table[loss] = entry
    return table


class ExperimentService:
    """Executa tentativas de treinamento e agrega as métricas por perda."""

    def __init__(self, jobs: int = Config.DEFAULT_JOBS) -> None:
        """
        Inicializa o serviço de experimentos.

        Args:
            jobs: Número máximo de processos simultâneos
        """
        self.jobs = jobs
        self.comparison = ComparisonService()
        self.logger = get_logger("experiments")
        self.perf_logger = get_performance_logger()
        self.logger.debug("Serviço de experimentos inicializado")

    def _fan_out(self, worker: Callable[[Any], List[Dict[str, Any]]], tasks: List[Any]) -> List[Dict[str, Any]]:
        if self.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(self.jobs, len(tasks)), initializer=init_worker_logging) as pool:
                batches = list(pool.map(worker, tasks))
        else:
            batches = [worker(task) for task in tasks]
        records = [record for batch in batches for record in batch]
        return sorted(records, key=lambda r: r["trial"])

    def run_exp1(self, trials: int, seed: int, k: int = Config.EXP1_K,
                 epochs: int = Config.TRAIN_EPOCHS, lr: float = Config.TRAIN_LR) -> RunResult:
        """
        Treina ψ1–ψ5 no conjunto de 68 pontos em x=0.

        Returns:
            RunResult: Top-k médio e vetor de scores médio em x=0 por perda
        """
        with self.perf_logger.timed("exp1"):
            tasks = [(t, derive_seed(seed, t), k, epochs, lr) for t in range(trials)]
            records = self._fan_out(_exp1_trial, tasks)

        metrics = aggregate_by_loss(records, ("top_k", "top1", "train_loss"))
        for loss, entry in metrics.items():
            vectors = [r["scores_at_zero"] for r in records if r["loss"] == loss]
            entry["scores_at_zero"] = np.mean(vectors, axis=0).tolist()

        parameters = {"k": k, "epochs": epochs, "lr": lr, "optimizer": OptimizerKind.SUBGRAD_DESCENT.value}
        return RunResult(
            command="exp1", parameters=parameters, seed=seed, trials=trials,
            metrics=metrics, records=records,
            reference=self.comparison.compare("exp1", metrics, parameters),
        )

    def _run_mixture(self, command: str, params: Dict[str, Any], trials: int, seed: int,
                     epochs: int, lr: float) -> RunResult:
        with self.perf_logger.timed(command):
            tasks = [(command, t, derive_seed(seed, t), params, epochs, lr) for t in range(trials)]
            records = self._fan_out(_mixture_trial, tasks)

        metrics = aggregate_by_loss(records, ("top_k", "top1", "train_loss"))
        failed = sum(entry["failed"] for entry in metrics.values())
        if failed:
            self.logger.warning(f"{command}: {failed} treino(s) registrado(s) como N/A")
        parameters = {**params, "epochs": epochs, "lr": lr, "optimizer": OptimizerKind.ADAM.value}
        return RunResult(
            command=command, parameters=parameters, seed=seed, trials=trials,
            metrics=metrics, records=records,
            reference=self.comparison.compare(command, metrics, parameters),
        )

    def run_exp2(self, N: int, k: int, trials: int, seed: int, M: Optional[int] = None,
                 K: int = Config.EXP2_MIXTURE, epochs: int = Config.TRAIN_EPOCHS,
                 lr: float = Config.TRAIN_LR) -> RunResult:
        """Classes como misturas de K médias; M padrão = Config.EXP2_M."""
        params = {"N": N, "k": k, "K": K, "M": Config.EXP2_M if M is None else M}
        return self._run_mixture("exp2", params, trials, seed, epochs, lr)

    def run_exp3(self, N: int, trials: int, seed: int, k: int = Config.EXP3_K,
                 epochs: int = Config.TRAIN_EPOCHS, lr: float = Config.TRAIN_LR) -> RunResult:
        """k classes indistinguíveis por média; M = N·k."""
        params = {"N": N, "k": k, "M": N * k}
        return self._run_mixture("exp3", params, trials, seed, epochs, lr)

    def run_separability(self, seed: int) -> RunResult:
        """
        Treina ψ1(2), ψ5(2), Ent e ψ1(1) no conjunto de 7 pontos.

        Registra a acurácia de treino e se a classe 0 fica estritamente em
        último no ponto -e1 (erro top-2 nesse ponto).
        """
        data = gen_linear_sep_dataset()
        k = Config.SEPARABILITY_K
        specs = [
            (LossSpec(LossFamily.PSI1, k), k),
            (LossSpec(LossFamily.PSI5, k), k),
            (LossSpec(LossFamily.ENT), k),
            (LossSpec(LossFamily.PSI1, 1), 1),
        ]
        cfg = TrainConfig(
            optimizer=OptimizerKind.SUBGRAD_DESCENT, fit_bias=False, seed=seed,
            init_scale=Config.SEPARABILITY_INIT_SCALE, restarts=Config.SEPARABILITY_RESTARTS,
        )
        records, metrics = [], {}
        for i, (spec, eval_k) in enumerate(specs):
            model = train_linear(spec, data, cfg)
            scores_neg_e1 = model.scores(data.inputs[-1:])[0]
            record = {
                "trial": i,
                "loss": spec.name,
                "eval_k": eval_k,
                "train_accuracy": top_k_accuracy(model, data, eval_k),
                "train_loss": model.train_loss,
                "scores_neg_e1": scores_neg_e1.tolist(),
                "label_strictly_last": bool(np.all(scores_neg_e1[0] < scores_neg_e1[1:])),
                "W": model.W.tolist(),
            }
            records.append(record)
            metrics[spec.name] = {"train_accuracy": record["train_accuracy"], "train_loss": model.train_loss}
            self.logger.info(f"{spec.name}: acurácia top-{eval_k} de treino {record['train_accuracy']:.3f}")

        W_sep = np.asarray(data.metadata["W_sep"])
        sep_scores = data.inputs @ W_sep.T
        separable = bool(top_k_errors(sep_scores, data.labels, k).sum() == 0)
        return RunResult(
            command="sep", parameters={"k": k, "restarts": cfg.restarts}, seed=seed,
            trials=len(specs), metrics=metrics, records=records,
            details={"W_sep_separates_top2": separable},
        )

    def run_grad_check(self, trials: int, seed: int,
                       h: float = Config.GRAD_CHECK_STEP,
                       tol: float = Config.GRAD_CHECK_TOL) -> RunResult:
        """
        Compara o (sub)gradiente analítico de cada perda com diferenças centrais
        em pontos aleatórios sem empates.

        Returns:
            RunResult: Erro relativo máximo por perda e aprovação
        """
        records: List[Dict[str, Any]] = []
        for family in LossFamily:
            for t in range(trials):
                rng = make_rng(derive_seed(seed, t))
                M = int(rng.choice(Config.GRAD_CHECK_DIMS))
                k = int(rng.integers(1, M)) if family.uses_k else 1
                spec = LossSpec(family, k)
                s = 2.0 * rng.standard_normal(M)
                y = int(rng.integers(M))
                analytic = subgrad(spec, s, y)
                numeric = finite_diff_grad(
                    lambda v: float(loss_values(spec, v[None, :], np.array([y]))[0]), s, h
                )
                scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1.0)
                records.append({
                    "trial": t,
                    "loss": family.value,
                    "M": M,
                    "k": k,
                    "y": y,
                    "rel_error": float(np.linalg.norm(analytic - numeric) / scale),
                })

        metrics = {}
        for family in LossFamily:
            errors = [r["rel_error"] for r in records if r["loss"] == family.value]
            worst = max(errors)
            metrics[family.value] = {"max_rel_error": worst, "passed": worst < tol}
            if worst >= tol:
                self.logger.warning(f"{family.value}: erro relativo {worst:.3e} acima de {tol:.1e}")

        return RunResult(
            command="grad-check", parameters={"h": h, "tol": tol}, seed=seed, trials=trials,
            metrics=metrics, records=sorted(records, key=lambda r: r["trial"]),
        )
