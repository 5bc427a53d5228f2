"""
Modules - Datos de mercado, cartera, generador sintético e informe Word
"""

from .market_data import OptionQuote, OptionChain, load_chain, filter_chain
from .portfolio import random_portfolio
from .synthetic import synth_chain

__all__ = [
    'OptionQuote',
    'OptionChain',
    'load_chain',
    'filter_chain',
    'random_portfolio',
    'synth_chain'
]
