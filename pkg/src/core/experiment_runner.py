"""
Coordenador da CLI de calibração top-k.

Interpreta os subcomandos, delega aos serviços e emite o resultado em
JSON-lines (stdout ou --out) e, opcionalmente, a tabela CSV.
"""

import argparse
import re
import sys
import time
from fractions import Fraction
from typing import List, Optional

import numpy as np

from src.config.settings import Config
from src.core.losses import LossFamily, LossSpec
from src.core.synth import gen_exp1, gen_exp2, gen_exp3, gen_linear_sep_dataset
from src.services.calibration_service import CalibrationService
from src.services.dataset_service import DatasetService
from src.services.experiment_service import ExperimentService
from src.services.result_service import ResultService, RunResult
from src.utils.env_loader import get_env_loader, load_environment
from src.utils.logger import (
    get_logger,
    get_performance_logger,
    log_environment_vars,
    log_system_info,
    setup_logger,
)

_REPEAT = re.compile(r"^(?P<value>[^×x*]+)\s*[×x*]\s*(?P<count>\d+)$")


def parse_eta(text: str, normalize: bool = False) -> np.ndarray:
    """
    Interpreta uma lista de probabilidades separada por vírgulas.

    Aceita frações (`1/8`) e repetições (`0.0833×9`, `0.0833x9`, `0.0833*9`).
    Sem `normalize`, somas a menos de ETA_ROUNDING_TOL de 1 são
    renormalizadas; desvios maiores são erro.

    Raises:
        ValueError: Se a lista for malformada, negativa ou não somar 1
    """
    values: List[float] = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        match = _REPEAT.match(token)
        if match:
            values.extend([float(Fraction(match["value"].strip()))] * int(match["count"]))
        else:
            values.append(float(Fraction(token)))
    eta = np.asarray(values, dtype=float)
    if eta.size < 2:
        raise ValueError(f"η precisa de pelo menos 2 entradas: {text!r}")
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise ValueError(f"η deve ter entradas finitas e não negativas: {text!r}")
    total = eta.sum()
    if normalize:
        if total <= 0:
            raise ValueError("η com soma zero não pode ser normalizado")
        return eta / total
    deviation = abs(total - 1.0)
    if deviation <= Config.ETA_RENORMALIZE_TOL:
        return eta
    if deviation <= Config.ETA_ROUNDING_TOL:
        get_logger("main").warning(f"η soma {total:.6g}; renormalizado (arredondamento)")
        return eta / total
    raise ValueError(f"η soma {total:.12g}; use --normalize para renormalizar")


def read_eta_file(path: str, normalize: bool = False) -> np.ndarray:
    """Lê η de um arquivo (vírgulas ou quebras de linha como separador)."""
    with open(path, "r", encoding=Config.DEFAULT_ENCODING) as f:
        text = ",".join(line.strip() for line in f if line.strip() and not line.startswith("#"))
    return parse_eta(text, normalize)


class ExperimentRunner:
    """Coordenador dos subcomandos de experimentos e sondagem."""

    def __init__(self, debug_mode: bool = False, jobs: Optional[int] = None) -> None:
        setup_logger(enable_debug=debug_mode)
        self.logger = get_logger("main")
        self.perf_logger = get_performance_logger()

        self.logger.info(f"Inicializando {Config.APP_NAME} v{Config.VERSION}")

        if debug_mode:
            self.logger.debug("Modo debug habilitado")
            log_system_info()
            log_environment_vars()

        if not load_environment():
            self.logger.debug("Arquivo .env não encontrado, usando configurações padrão")

        overrides = get_env_loader().get_runtime_overrides()
        self.default_seed = overrides["seed"] if overrides["seed"] is not None else Config.DEFAULT_SEED
        self.jobs = jobs if jobs is not None else (overrides["jobs"] or Config.get_jobs())

        self.logger.debug("Inicializando serviços...")
        self._init_services()
        self.logger.info("Todos os serviços inicializados")

    def _init_services(self) -> None:
        self.result_service = ResultService()
        self.dataset_service = DatasetService()
        self.calibration_service = CalibrationService(jobs=self.jobs)
        self.experiment_service = ExperimentService(jobs=self.jobs)

    def run(self, args: argparse.Namespace) -> RunResult:
        """
        Executa o subcomando escolhido.

        Args:
            args: Argumentos interpretados por `build_parser`

        Returns:
            RunResult: Resultado pronto para emissão
        """
        seed = args.seed if args.seed is not None else self.default_seed
        self.logger.info(f"Executando '{args.command}' (semente={seed}, jobs={self.jobs})")
        started = time.perf_counter()
        self.perf_logger.start_timer(args.command)

        result = self._dispatch(args, seed)

        self.perf_logger.end_timer(args.command)
        result.wall_time = time.perf_counter() - started
        self.logger.debug(f"Tempos acumulados: {self.perf_logger.summary()}")
        for line in result.reference:
            self.logger.info(f"Referência: {line}")
        return result

    def _dispatch(self, args: argparse.Namespace, seed: int) -> RunResult:
        command = args.command
        if command == "exp1":
            return self.experiment_service.run_exp1(args.trials, seed, k=args.k, epochs=args.epochs, lr=args.lr)
        if command == "exp2":
            return self.experiment_service.run_exp2(
                args.N, args.k, args.trials, seed, M=args.M, K=args.K, epochs=args.epochs, lr=args.lr,
            )
        if command == "exp3":
            return self.experiment_service.run_exp3(args.N, args.trials, seed, k=args.k, epochs=args.epochs, lr=args.lr)
        if command == "sep":
            return self.experiment_service.run_separability(seed)
        if command == "grad-check":
            return self.experiment_service.run_grad_check(args.trials, seed)
        if command == "probe":
            eta = read_eta_file(args.eta_file, args.normalize) if args.eta_file else parse_eta(args.eta, args.normalize)
            loss = LossSpec.parse(args.loss, args.loss_k or args.k)
            return self.calibration_service.probe(loss, args.k, eta, seed, restarts=args.restarts)
        if command == "scan":
            loss = LossSpec.parse(args.loss, args.loss_k or args.k)
            return self.calibration_service.scan(loss, args.k, args.m, args.draws, seed, restarts=args.restarts)
        if command == "cd":
            return self.calibration_service.cd()
        if command == "links":
            eta = parse_eta(args.eta, args.normalize) if args.eta else None
            return self.calibration_service.check_links(args.k, args.samples, seed, eta=eta)
        if command == "gen":
            return self._generate(args, seed)
        raise ValueError(f"Subcomando desconhecido: {command}")

    def _generate(self, args: argparse.Namespace, seed: int) -> RunResult:
        if args.dataset == "exp1":
            splits = {"all": gen_exp1()}
        elif args.dataset == "sep":
            splits = {"all": gen_linear_sep_dataset()}
        elif args.dataset == "exp2":
            train, test = gen_exp2(N=args.N or Config.EXP2_N, M=args.M, seed=seed)
            splits = {"train": train, "test": test}
        else:
            train, test = gen_exp3(N=args.N or Config.EXP3_N, seed=seed)
            splits = {"train": train, "test": test}

        records = []
        for i, (split, dataset) in enumerate(splits.items()):
            path = f"{args.prefix}_{split}.csv" if len(splits) > 1 else f"{args.prefix}.csv"
            csv_path, meta_path = self.dataset_service.save(dataset, path)
            records.append({"trial": i, "split": split, "csv": csv_path, "metadata": meta_path,
                            "n": dataset.n, "M": dataset.M})
        return RunResult(
            command="gen", parameters={"dataset": args.dataset, "prefix": args.prefix},
            seed=seed, trials=len(records), records=records,
        )

    def emit(self, result: RunResult, out_path: Optional[str], csv_path: Optional[str]) -> bool:
        ok = self.result_service.emit(result, out_path)
        if csv_path:
            ok = self.result_service.export_csv(result, csv_path) and ok
        return ok


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Semente mestre (padrão: TOPK_SEED ou 0)")
    parser.add_argument("--jobs", type=int, default=None, help="Processos simultâneos (padrão: TOPK_JOBS ou 1)")
    parser.add_argument("--out", default=None, help="Arquivo JSON-lines de saída (padrão: stdout)")
    parser.add_argument("--csv", default=None, help="Exporta a tabela de métricas em CSV")
    parser.add_argument("--debug", "-d", action="store_true", help="Habilita logs de debug")


def _add_training(parser: argparse.ArgumentParser, trials: int) -> None:
    parser.add_argument("--trials", type=int, default=trials)
    parser.add_argument("--epochs", type=int, default=Config.TRAIN_EPOCHS)
    parser.add_argument("--lr", type=float, default=Config.TRAIN_LR)


def build_parser() -> argparse.ArgumentParser:
    """Monta o parser com todos os subcomandos."""
    parser = argparse.ArgumentParser(prog="topk-calibration", description=Config.APP_NAME)
    sub = parser.add_subparsers(dest="command", required=True)
    loss_names = [f.value for f in LossFamily]

    exp1 = sub.add_parser("exp1", help="ψ1–ψ5 no conjunto de 68 pontos em x=0")
    _add_training(exp1, trials=10)
    exp1.add_argument("--k", type=int, default=Config.EXP1_K)

    exp2 = sub.add_parser("exp2", help="Classes como misturas de médias gaussianas")
    _add_training(exp2, trials=10)
    exp2.add_argument("--N", type=int, default=Config.EXP2_N)
    exp2.add_argument("--k", type=int, default=Config.EXP2_K)
    exp2.add_argument("--K", type=int, default=Config.EXP2_MIXTURE, help="Médias por classe")
    exp2.add_argument("--M", type=int, default=Config.EXP2_M, help="Número de classes")

    exp3 = sub.add_parser("exp3", help="k classes indistinguíveis por média")
    _add_training(exp3, trials=10)
    exp3.add_argument("--N", type=int, default=Config.EXP3_N)
    exp3.add_argument("--k", type=int, default=Config.EXP3_K)

    sub.add_parser("sep", help="Separabilidade top-2 no conjunto de 7 pontos")

    grad = sub.add_parser("grad-check", help="Gradientes analíticos vs. diferenças finitas")
    grad.add_argument("--trials", type=int, default=20)

    probe = sub.add_parser("probe", help="Sonda de calibração em um η")
    probe.add_argument("--loss", required=True, choices=loss_names)
    probe.add_argument("--k", type=int, required=True)
    probe.add_argument("--loss-k", type=int, default=None, help="k da perda (padrão: --k)")
    source = probe.add_mutually_exclusive_group(required=True)
    source.add_argument("--eta", help="Lista de probabilidades, ex.: 0.125,0.125,0.0833×9")
    source.add_argument("--eta-file", help="Arquivo com as probabilidades")
    probe.add_argument("--normalize", action="store_true", help="Renormaliza η para somar 1")
    probe.add_argument("--restarts", type=int, default=Config.MINIMIZE_RESTARTS)

    scan = sub.add_parser("scan", help="Varredura de calibração")
    scan.add_argument("--loss", required=True, choices=loss_names)
    scan.add_argument("--k", type=int, required=True)
    scan.add_argument("--loss-k", type=int, default=None)
    scan.add_argument("--m", type=int, default=8)
    scan.add_argument("--draws", type=int, default=1000)
    scan.add_argument("--restarts", type=int, default=Config.MINIMIZE_RESTARTS)

    sub.add_parser("cd", help="Contraexemplo de CD em η=(0.01,0.02,0.03,0.04,0.9)")

    links = sub.add_parser("links", help="Verificação amostral das propriedades de link")
    links.add_argument("--k", type=int, default=2)
    links.add_argument("--samples", type=int, default=Config.LINK_CHECK_SAMPLES)
    links.add_argument("--eta", default=None, help="η para o diagnóstico de inversão")
    links.add_argument("--normalize", action="store_true")

    gen = sub.add_parser("gen", help="Gera um conjunto de dados em CSV + JSON")
    gen.add_argument("dataset", choices=["exp1", "exp2", "exp3", "sep"])
    gen.add_argument("--prefix", default=f"{Config.RESULTS_DIR}/dataset")
    gen.add_argument("--N", type=int, default=None)
    gen.add_argument("--M", type=int, default=None)

    for subparser in sub.choices.values():
        _add_common(subparser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Ponto de entrada principal da aplicação.

    Returns:
        int: 0 em sucesso, 1 em erro interno ou de argumentos
    """
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("--jobs deve ser >= 1", file=sys.stderr)
        return 1

    runner = ExperimentRunner(debug_mode=args.debug or Config.is_debug_enabled(), jobs=args.jobs)
    logger = get_logger("main")

    try:
        result = runner.run(args)
        if not runner.emit(result, args.out, args.csv):
            return 1
        logger.info("Processo finalizado com sucesso!")
        return 0

    except KeyboardInterrupt:
        logger.info("Processo interrompido pelo usuário")
        return 1
    except (ValueError, RuntimeError, FloatingPointError, OSError) as e:
        logger.error(f"Erro: {e}")
        print(f"Erro: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Erro crítico: {e}", exc_info=True)
        print(f"Erro crítico: {e}", file=sys.stderr)
        return 1
