"""Serviços de calibração, experimentos, conjuntos de dados e resultados."""
