"""
Modelos de referencia para comparar con PSP

- Volatilidad constante: cada opción conserva su volatilidad implícita de hoy.
- VIX: las volatilidades se desplazan con cambios diarios históricos del VIX,
  emparejados con los caminos Monte Carlo igual que los escenarios PSP.
"""

from datetime import date
from typing import Sequence

import numpy as np

from core.psp_engine import (VOL_FLOOR, GbmParams, PnLDistribution, Position, WeightScheme,
                             run_benchmark, scenario_rng)
from modules.market_data import MarketParams, OptionChain, VixSeries
from utils.errors import InsufficientHistory
from utils.logger import get_logger
from utils.validators import ValidationError

logger = get_logger("benchmarks")

VIX_SHOCK_MODES = ("additive", "proportional")


def const_vol_pnl(portfolio: Sequence[Position], chain_t: OptionChain, p: GbmParams, params: MarketParams,
                  frozen_spot: bool = False) -> PnLDistribution:
    """PnL a un día repreciando con la volatilidad de hoy de cada posición."""
    def keep_vols(vols_t: np.ndarray, n_paths: int):
        return np.broadcast_to(vols_t, (n_paths, len(vols_t))), 0

    return run_benchmark(portfolio, chain_t, p, params, "const_vol", keep_vols, frozen_spot)


def vix_shocks(vix_history: VixSeries, as_of: date, mode: str = "additive") -> np.ndarray:
    """
    Cambios diarios del VIX observados hasta as_of.

    En modo aditivo son diferencias de nivel; en modo proporcional, cocientes.
    """
    if mode not in VIX_SHOCK_MODES:
        raise ValidationError(f"modo de choque VIX desconocido: {mode}")
    levels = np.asarray(vix_history.up_to(as_of).levels, dtype=float)
    if len(levels) < 2:
        raise InsufficientHistory(f"{len(levels)} observaciones del VIX hasta {as_of}; se necesitan al menos 2")
    return np.diff(levels) if mode == "additive" else levels[1:] / levels[:-1]


def vix_pnl(portfolio: Sequence[Position], chain_t: OptionChain, vix_history: VixSeries, p: GbmParams,
            params: MarketParams, w: WeightScheme = WeightScheme(),
            mode: str = "additive", frozen_spot: bool = False) -> PnLDistribution:
    """
    PnL a un día con volatilidades desplazadas por cambios históricos del VIX.

    Cada camino toma un cambio muestreado con los pesos del esquema, usando
    el mismo flujo aleatorio de escenarios que PSP. Las volatilidades
    resultantes se limitan por abajo a 1e-6.
    """
    shocks = vix_shocks(vix_history, chain_t.quote_date, mode)
    magnitudes = np.abs(shocks) if mode == "additive" else np.abs(np.log(shocks))
    weights = w.weights(len(shocks), magnitudes)

    def shift_vols(vols_t: np.ndarray, n_paths: int):
        picks = scenario_rng(p.seed).choice(len(shocks), size=n_paths, p=weights)
        drawn = shocks[picks][:, None]
        shifted = vols_t[None, :] + drawn if mode == "additive" else vols_t[None, :] * drawn
        below = shifted < VOL_FLOOR
        return np.where(below, VOL_FLOOR, shifted), int(np.sum(below))

    return run_benchmark(portfolio, chain_t, p, params, "vix", shift_vols, frozen_spot)
