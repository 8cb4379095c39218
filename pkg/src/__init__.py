"""
Top-k Calibration Lab - Módulo principal do pacote src.
"""

__version__ = "1.0.0"
