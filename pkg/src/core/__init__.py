"""Núcleo numérico: ranking, perdas, Bregman, risco, otimização e dados sintéticos."""
