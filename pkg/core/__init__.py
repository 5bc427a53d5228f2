"""
Core - Valoración BSM, superficie de volatilidad, motor PSP, medidas de riesgo y backtesting
"""

from .bsm import call_price, implied_vol
from .surface import SplineSurface, fit_surface, eval_surface
from .psp_engine import GbmParams, Position, WeightScheme, PnLDistribution, psp_pnl
from .risk import var, es
from .backtest import build_backtest_report

__all__ = [
    'call_price',
    'implied_vol',
    'SplineSurface',
    'fit_surface',
    'eval_surface',
    'GbmParams',
    'Position',
    'WeightScheme',
    'PnLDistribution',
    'psp_pnl',
    'var',
    'es',
    'build_backtest_report'
]
