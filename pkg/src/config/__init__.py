"""Constantes e configuração do laboratório."""
