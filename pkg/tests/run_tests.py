"""
Script principal para executar os testes.

Uso:
    python tests/run_tests.py             # todos, exceto lentos
    python tests/run_tests.py --all       # inclui varreduras completas
    python tests/run_tests.py test_risk   # um módulo
"""

import pytest
import sys
import os

# Adicionar o projeto ao path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))


def _pytest_args(target: str, include_slow: bool) -> list:
    args = ["-v", "--tb=short", "--color=yes", target]
    if include_slow:
        args.append("--run-slow")
    return args


def run_all_tests(include_slow: bool = False) -> int:
    """Executa todos os testes do projeto."""
    mode = "com" if include_slow else "sem"
    print(f"Executando testes do Top-k Calibration Lab ({mode} testes lentos)...")
    print("=" * 60)

    exit_code = pytest.main(_pytest_args(TESTS_DIR, include_slow))

    if exit_code == 0:
        print("\nTodos os testes passaram com sucesso.")
    else:
        print(f"\nAlguns testes falharam (código de saída: {exit_code})")
    return exit_code


def run_specific_test_module(module_name: str, include_slow: bool = False) -> int:
    """
    Executa testes de um módulo específico.

    Args:
        module_name: Nome do módulo (ex: 'test_losses')
        include_slow: Inclui testes marcados como lentos
    """
    test_file = os.path.join(TESTS_DIR, f"{module_name}.py")
    if not os.path.exists(test_file):
        print(f"Arquivo de teste não encontrado: {test_file}")
        return 1

    print(f"Executando testes do módulo: {module_name}")
    print("=" * 60)
    return pytest.main(_pytest_args(test_file, include_slow))


if __name__ == "__main__":
    argv = sys.argv[1:]
    include_slow = "--all" in argv
    modules = [a for a in argv if a != "--all"]

    if modules:
        exit_code = run_specific_test_module(modules[0], include_slow)
    else:
        exit_code = run_all_tests(include_slow)

    sys.exit(exit_code)
