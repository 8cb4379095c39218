"""
Configuração compartilhada do pytest.

Testes marcados com `slow` (varreduras completas) só rodam com --run-slow.
"""

import pytest


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="Executa testes lentos")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: varreduras completas, demoradas")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="use --run-slow para executar")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
