#!/usr/bin/env python3
"""
Top-k Calibration Lab - Ponto de entrada principal.

Perdas top-k, sondagem empírica de calibração e os experimentos sintéticos
de treinamento linear, expostos como subcomandos de linha de comando.
"""

import sys

from src.core.experiment_runner import main

if __name__ == "__main__":
    sys.exit(main())
