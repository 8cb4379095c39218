#!/usr/bin/env python3
"""
Script de configuração e verificação do Top-k Calibration Lab.
"""

import os
import shutil
import sys
from typing import Any, Dict


def check_environment() -> Dict[str, Any]:
    """
    Verifica o ambiente e configurações.

    Returns:
        Dict com status das verificações
    """
    status = {
        "env_file": False,
        "runtime": False,
        "dependencies": False,
        "directories": False,
    }

    if os.path.exists(".env"):
        status["env_file"] = True
        print("Arquivo .env encontrado")
    else:
        print("Arquivo .env não encontrado (opcional, usando padrões)")

    try:
        from src.utils.env_loader import get_env_loader, load_environment

        load_environment()
        overrides = get_env_loader().get_runtime_overrides()
        status["runtime"] = True
        print(f"Semente padrão: {overrides['seed'] if overrides['seed'] is not None else 0}")
        print(f"Processos padrão: {overrides['jobs'] or 1}")
    except Exception as e:
        print(f"Erro nas variáveis de execução: {e}")

    try:
        import numpy  # type: ignore
        import scipy  # type: ignore
        import dotenv  # type: ignore

        status["dependencies"] = True
        print(f"Dependências instaladas (NumPy {numpy.__version__}, SciPy {scipy.__version__})")
    except ImportError as e:
        print(f"Dependência faltando: {e}")

    from src.config.settings import Config

    for directory in ("logs", Config.RESULTS_DIR):
        os.makedirs(directory, exist_ok=True)
    status["directories"] = True
    print("Diretórios criados")

    return status


def setup_environment() -> None:
    """Configura o ambiente inicial."""
    print("Configurando ambiente...")

    if os.path.exists(".env"):
        print("Arquivo .env já existe, mantido")
    elif os.path.exists(".env.example"):
        shutil.copyfile(".env.example", ".env")
        print("Arquivo .env criado a partir de .env.example")
    else:
        with open(".env", "w", encoding="utf-8") as f:
            f.write("TOPK_SEED=0\nTOPK_JOBS=1\nTOPK_RESULTS_DIR=results\nDEBUG=false\n")
        print("Arquivo .env criado com os padrões")

    os.makedirs("logs", exist_ok=True)
    os.makedirs("results", exist_ok=True)
    print("Diretórios criados")


def smoke_test() -> int:
    """Executa comandos rápidos (verificação de gradientes e CD)."""
    from src.core.experiment_runner import main as run_cli

    print("Verificando gradientes...")
    code = run_cli(["grad-check", "--trials", "5", "--out", "results/smoke_grad_check.jsonl"])
    if code != 0:
        print("Falha na verificação de gradientes")
        return code

    print("Reproduzindo contraexemplo de CD...")
    code = run_cli(["cd", "--out", "results/smoke_cd.jsonl"])
    if code == 0:
        print("Verificação rápida concluída. Resultados em results/")
    return code


def main() -> None:
    """Função principal do setup."""
    if len(sys.argv) < 2:
        print("Top-k Calibration Lab - Setup")
        print("\nComandos disponíveis:")
        print("  setup    - Configurar ambiente inicial")
        print("  check    - Verificar configurações")
        print("  smoke    - Executar verificação rápida")
        print("  run      - Executar a CLI (argumentos repassados)")
        return

    command = sys.argv[1]

    if command == "setup":
        setup_environment()
    elif command == "check":
        status = check_environment()

        print("\nRESUMO:")
        if status["dependencies"] and status["runtime"]:
            print("Tudo configurado corretamente.")
            print("Execute: python main.py --help")
        else:
            print("Algumas configurações precisam de atenção")
            if not status["dependencies"]:
                print("   - Instale as dependências: pip install -r requirements.txt")
            if not status["runtime"]:
                print("   - Corrija TOPK_SEED / TOPK_JOBS no arquivo .env")

    elif command == "smoke":
        sys.exit(smoke_test())

    elif command == "run":
        from src.core.experiment_runner import main as run_cli

        sys.exit(run_cli(sys.argv[2:]))

    else:
        print(f"Comando desconhecido: {command}")


if __name__ == "__main__":
    main()
