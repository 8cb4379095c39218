"""Testes do Top-k Calibration Lab."""
