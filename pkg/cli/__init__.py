"""
CLI - Subcomandos y pipeline por lotes del motor de riesgo PSP
"""

from .commands import build_parser, main

__all__ = [
    'build_parser',
    'main'
]
