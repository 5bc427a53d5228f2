"""
Generador de cadenas sintéticas de calls

Simula un subyacente GBM cuya volatilidad base sigue un proceso de
reversión a la media correlacionado negativamente con el precio, y valora
una malla fija de strikes y vencimientos con una sonrisa suave que cambia
lentamente en el tiempo. Todo es reproducible a partir de la semilla.
"""

import math
from dataclasses import dataclass
from datetime import date
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from core.bsm import call_price_array
from modules.market_data import (CALENDAR_DAYS, FilterConfig, MarketParams, OptionChain, OptionQuote,
                                 VixSeries, filter_chain)
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger("synthetic")

MIN_VOL = 0.05
VIX_TENOR_DAYS = 30


@dataclass(frozen=True)
class ChainGrid:
    """Malla fija de strikes y fechas de vencimiento."""
    strikes: Tuple[float, ...]
    expiries: Tuple[date, ...]

    def __post_init__(self):
        object.__setattr__(self, 'strikes', tuple(float(k) for k in self.strikes))
        object.__setattr__(self, 'expiries', tuple(self.expiries))
        if not self.strikes or not self.expiries:
            raise ValidationError("la malla de strikes y vencimientos no puede estar vacía")
        if any(k <= 0 for k in self.strikes):
            raise ValidationError("los strikes deben ser positivos")


@dataclass(frozen=True)
class SmileModel:
    """Parámetros del proceso de volatilidad y de la forma de la sonrisa."""
    theta: float = 0.15          # nivel de largo plazo de la vol base
    kappa: float = 0.05          # velocidad diaria de reversión
    vol_of_vol: float = 0.006    # desviación diaria de la vol base
    rho: float = -0.7            # correlación choque de precio / choque de vol
    skew: float = 0.30           # pendiente en ln(m)
    curvature: float = 0.50
    term: float = -0.02          # pendiente en sqrt(tau)
    skew_drift: float = 0.002    # paseo aleatorio diario de la pendiente

    def vol(self, base: float, skew: float, moneyness, ttm):
        x = np.log(moneyness)
        sigma = base + skew * x + self.curvature * x ** 2 + self.term * (np.sqrt(ttm) - 0.5)
        return np.maximum(sigma, MIN_VOL)


@dataclass(frozen=True)
class MarketPath:
    dates: Tuple[date, ...]
    spots: np.ndarray
    base_vols: np.ndarray
    skews: np.ndarray


def default_grid(spot: float = 1460.0, start: str = "2013-01-03", strike_step: float = 40.0,
                 strike_span: float = 0.2, n_expiries: int = 18) -> ChainGrid:
    """Strikes redondeados alrededor de spot y vencimientos el tercer viernes de cada mes."""
    lo = math.floor(spot * (1.0 - strike_span) / strike_step) * strike_step
    hi = math.ceil(spot * (1.0 + strike_span) / strike_step) * strike_step
    strikes = np.arange(lo, hi + strike_step / 2, strike_step)
    expiries = pd.date_range(start=start, periods=n_expiries, freq='WOM-3FRI')
    return ChainGrid(tuple(float(k) for k in strikes), tuple(d.date() for d in expiries))


def simulate_market_path(seed: int, n_days: int, spot: float = 1460.0, start: str = "2013-01-03",
                         model: SmileModel = SmileModel(), params: MarketParams = MarketParams()) -> MarketPath:
    """Trayectoria diaria (días hábiles) de spot, vol base y pendiente de la sonrisa."""
    if n_days < 1:
        raise ValidationError("n_days debe ser >= 1")
    rng = np.random.default_rng(seed)
    dates = tuple(d.date() for d in pd.bdate_range(start=start, periods=n_days))
    shocks = rng.standard_normal((n_days, 3))

    spots = np.empty(n_days)
    bases = np.empty(n_days)
    skews = np.empty(n_days)
    spots[0], bases[0], skews[0] = spot, model.theta, model.skew
    days = params.trading_days_per_year
    for t in range(1, n_days):
        eps_s, eps_v, eps_k = shocks[t]
        daily_vol = bases[t - 1] / math.sqrt(days)
        spots[t] = spots[t - 1] * math.exp(params.daily_drift - 0.5 * daily_vol ** 2 + daily_vol * eps_s)
        vol_shock = model.rho * eps_s + math.sqrt(1.0 - model.rho ** 2) * eps_v
        bases[t] = min(max(bases[t - 1] + model.kappa * (model.theta - bases[t - 1]) + model.vol_of_vol * vol_shock,
                           0.06), 0.6)
        skews[t] = skews[t - 1] + model.skew_drift * eps_k
    return MarketPath(dates, spots, bases, skews)


def _chain_for_day(path: MarketPath, t: int, grid: ChainGrid, model: SmileModel, params: MarketParams) -> OptionChain:
    as_of = path.dates[t]
    spot = float(round(path.spots[t], 2))
    live = [e for e in grid.expiries if (e - as_of).days >= 1]
    if not live:
        return OptionChain(as_of, ())

    strikes = np.array(grid.strikes)
    ttm = np.array([(e - as_of).days / CALENDAR_DAYS for e in live])
    K, T = np.meshgrid(strikes, ttm)
    sigma = model.vol(path.base_vols[t], path.skews[t], spot / K, T)
    prices = call_price_array(spot, K, params.risk_free_rate, T, sigma)

    quotes = []
    for j, expiry in enumerate(live):
        for i, strike in enumerate(grid.strikes):
            price = float(prices[j, i])
            half = max(0.05, 0.01 * price) / 2.0
            bid = max(round(price - half, 2), 0.0)
            ask = round(price + half, 2)
            quotes.append(OptionQuote(as_of, expiry, strike, bid, ask, spot))
    return OptionChain(as_of, tuple(quotes))


def synth_chain(seed: int, n_days: int, grid: Optional[ChainGrid] = None, spot: float = 1460.0,
                start: str = "2013-01-03", model: SmileModel = SmileModel(),
                params: MarketParams = MarketParams(), cfg: FilterConfig = FilterConfig()) -> List[OptionChain]:
    """
    Cadenas sintéticas reproducibles, una por día hábil.

    Cada cadena se filtra con `cfg`, de modo que toda cotización generada
    supera los filtros por defecto.
    """
    grid = grid or default_grid(spot, start)
    path = simulate_market_path(seed, n_days, spot, start, model, params)
    chains = [filter_chain(_chain_for_day(path, t, grid, model, params), cfg, params) for t in range(n_days)]
    logger.info(f"Generadas {len(chains)} cadenas sintéticas ({sum(len(c) for c in chains)} cotizaciones, semilla {seed})")
    return chains


def synth_vix(seed: int, n_days: int, spot: float = 1460.0, start: str = "2013-01-03",
              model: SmileModel = SmileModel(), params: MarketParams = MarketParams()) -> VixSeries:
    """Serie tipo VIX: volatilidad at-the-money a 30 días de la misma trayectoria sintética."""
    path = simulate_market_path(seed, n_days, spot, start, model, params)
    levels = [float(model.vol(b, k, 1.0, VIX_TENOR_DAYS / CALENDAR_DAYS)) for b, k in zip(path.base_vols, path.skews)]
    return VixSeries(path.dates, tuple(round(v, 6) for v in levels))


def synth_market(seed: int, n_days: int, grid: Optional[ChainGrid] = None,
                 **kwargs) -> Tuple[List[OptionChain], VixSeries]:
    """Cadenas y serie VIX coherentes entre sí."""
    vix_kwargs = {k: v for k, v in kwargs.items() if k in ("spot", "start", "model", "params")}
    return synth_chain(seed, n_days, grid, **kwargs), synth_vix(seed, n_days, **vix_kwargs)


def synth_from_config(synth: dict, params: MarketParams, cfg: FilterConfig) -> Tuple[List[OptionChain], VixSeries]:
    """Genera el mercado sintético descrito por la sección `synth` de la configuración."""
    grid = default_grid(synth['spot'], synth['start_date'], synth['strike_step'],
                        synth['strike_span'], synth['n_expiries'])
    return synth_market(int(synth['seed']), int(synth['n_days']), grid, spot=float(synth['spot']),
                        start=synth['start_date'], params=params, cfg=cfg)
