"""
Cartera aleatoria de calls de compra y mantenimiento

Las posiciones se eligen el primer día entre los contratos que superan los
filtros y se mantienen hasta su vencimiento.
"""

import dataclasses
from datetime import date, timedelta
from typing import List, Sequence, Tuple

import numpy as np

from core.bsm import call_price_array
from core.psp_engine import Position, surface_vols_today
from core.surface import SplineSurface, eval_surface
from modules.market_data import CALENDAR_DAYS, MarketParams, OptionChain, mid_price
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger("portfolio")


def random_portfolio(chain: OptionChain, n_options: int = 100, seed: int = 0,
                     max_quantity: int = 10) -> List[Position]:
    """
    Elige contratos distintos de la cadena con cantidades enteras positivas.

    Si la cadena tiene menos de n_options contratos se toman todos.
    """
    if n_options < 1 or max_quantity < 1:
        raise ValidationError("n_options y max_quantity deben ser >= 1")
    if not len(chain):
        raise ValidationError(f"cadena vacía del {chain.quote_date}: no se puede formar la cartera")
    rng = np.random.default_rng(seed)
    quotes = sorted(chain.quotes, key=lambda q: q.key)
    n = min(n_options, len(quotes))
    picks = sorted(rng.choice(len(quotes), size=n, replace=False))
    quantities = rng.integers(1, max_quantity + 1, size=n)
    portfolio = [Position(quotes[i].strike, quotes[i].expiry_date, float(qty))
                 for i, qty in zip(picks, quantities)]
    if n < n_options:
        logger.warning(f"solo {n} contratos disponibles para una cartera de {n_options}")
    logger.info(f"Cartera aleatoria de {n} calls (semilla {seed})")
    return portfolio


def active_positions(portfolio: Sequence[Position], as_of: date) -> List[Position]:
    """Posiciones cuyo vencimiento es posterior a as_of + 1 día."""
    limite = as_of + timedelta(days=1)
    return [p for p in portfolio if p.expiry > limite]


def mark_positions(positions: Sequence[Position], surface: SplineSurface, S_t: float, as_of: date) -> List[Position]:
    """Asigna a cada posición su volatilidad de hoy leída de la superficie."""
    if not positions:
        return []
    vols = surface_vols_today(surface, positions, S_t, as_of)
    return [dataclasses.replace(p, entry_vol=float(v)) for p, v in zip(positions, vols)]


def _marks(positions: Sequence[Position], chain: OptionChain, surface: SplineSurface,
           params: MarketParams) -> Tuple[np.ndarray, int]:
    """Precio medio de mercado de cada posición; si falta la cotización, precio de la superficie."""
    quotes = chain.by_key()
    S = chain.underlying_price
    marks = np.empty(len(positions))
    fallbacks = 0
    for i, pos in enumerate(positions):
        quote = quotes.get(pos.key)
        if quote is not None:
            marks[i] = mid_price(quote)
            continue
        fallbacks += 1
        ttm = (pos.expiry - chain.quote_date).days / CALENDAR_DAYS
        if ttm <= 0:
            marks[i] = max(S - pos.strike, 0.0)
            continue
        vol = max(eval_surface(surface, S / pos.strike, ttm), 1e-6)
        marks[i] = float(call_price_array(S, pos.strike, params.risk_free_rate, ttm, vol))
    return marks, fallbacks


def portfolio_value(positions: Sequence[Position], chain: OptionChain, surface: SplineSurface,
                    params: MarketParams) -> float:
    """Valor bruto sum |q| * C_t usado para normalizar PnL en rendimientos."""
    if not positions:
        return 0.0
    marks, _ = _marks(positions, chain, surface, params)
    return float(np.abs([p.quantity for p in positions]) @ marks)


def realized_pnl(positions: Sequence[Position], chain_t: OptionChain, chain_next: OptionChain,
                 surface_t: SplineSurface, surface_next: SplineSurface, params: MarketParams) -> float:
    """
    PnL realizado sum q * (C_{t+1} - C_t) con precios medios de mercado.

    Un contrato ausente de una cadena se valora con la superficie ajustada ese día.
    """
    if not positions:
        return 0.0
    today, f_t = _marks(positions, chain_t, surface_t, params)
    tomorrow, f_next = _marks(positions, chain_next, surface_next, params)
    if f_t or f_next:
        logger.debug(f"{chain_next.quote_date}: {f_t + f_next} precios tomados de la superficie")
    quantities = np.array([p.quantity for p in positions])
    return float(quantities @ (tomorrow - today))
