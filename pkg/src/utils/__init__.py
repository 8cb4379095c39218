"""Logging, variáveis de ambiente e sementes."""
