"""
Valoración Black-Scholes-Merton de calls europeas e inversión de volatilidad implícita.

La fórmula de precio no incluye rendimiento por dividendos; q solo entra
en la deriva de la simulación Monte Carlo.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from utils.errors import AboveUpperBound, BelowIntrinsic, ExpiryTooNear, NoConvergence
from utils.logger import get_logger
from utils.validators import Validators

logger = get_logger("bsm")

IV_LOWER = 1e-9
IV_UPPER = 5.0
IV_MAX_ITER = 200
IV_PRICE_TOL = 1e-10


@dataclass(frozen=True)
class BsmInputs:
    """Entradas de la fórmula de precio de una call europea."""
    spot: float
    strike: float
    rate: float
    ttm: float
    vol: float

    def __post_init__(self):
        Validators.require(Validators.validar_positivo(self.spot, "spot"))
        Validators.require(Validators.validar_positivo(self.strike, "strike"))
        Validators.require(Validators.validar_positivo(self.ttm, "ttm"))
        Validators.require(Validators.validar_no_negativo(self.vol, "vol"))


def norm_cdf(x):
    """Función de distribución acumulada de la normal estándar."""
    value = ndtr(x)
    return float(value) if np.ndim(value) == 0 else value


def lower_bound(spot, strike, rate, ttm):
    """Cota inferior sin arbitraje max(S - K e^(-r tau), 0)."""
    return np.maximum(np.asarray(spot, dtype=float) - np.asarray(strike, dtype=float) * np.exp(-np.asarray(rate) * np.asarray(ttm)), 0.0)


def call_price_array(spot, strike, rate, ttm, vol):
    """
    Precio BSM vectorizado con broadcasting de numpy.

    Con vol = 0 devuelve el límite analítico intrínseco. El resultado se
    recorta a la envolvente [max(S - K e^(-r tau), 0), S].
    """
    spot, strike, rate, ttm, vol = np.broadcast_arrays(
        np.asarray(spot, dtype=float), np.asarray(strike, dtype=float),
        np.asarray(rate, dtype=float), np.asarray(ttm, dtype=float),
        np.asarray(vol, dtype=float))
    if np.any(ttm <= 0):
        raise ExpiryTooNear("ttm debe ser > 0 para valorar una call")

    discounted_strike = strike * np.exp(-rate * ttm)
    intrinsic = np.maximum(spot - discounted_strike, 0.0)
    vol_sqrt_t = vol * np.sqrt(ttm)

    with np.errstate(divide='ignore', invalid='ignore'):
        d1 = (np.log(spot / strike) + (rate + 0.5 * vol ** 2) * ttm) / vol_sqrt_t
        d2 = d1 - vol_sqrt_t
        price = spot * ndtr(d1) - discounted_strike * ndtr(d2)

    price = np.where(vol_sqrt_t > 0, price, intrinsic)
    return np.clip(price, intrinsic, spot)


def call_price(inputs: BsmInputs) -> float:
    """Precio de una call europea: N(d1) S - N(d2) K e^(-r tau)."""
    return float(call_price_array(inputs.spot, inputs.strike, inputs.rate, inputs.ttm, inputs.vol))


def implied_vol(price: float, spot: float, strike: float, rate: float, ttm: float) -> float:
    """
    Invierte la fórmula BSM por el método de Brent sobre [1e-9, 5.0].

    Args:
        price: Precio observado de la call
        spot, strike, rate, ttm: Parámetros de valoración

    Returns:
        float: Volatilidad implícita anualizada

    Raises:
        BelowIntrinsic: precio <= cota inferior
        AboveUpperBound: precio >= spot
        NoConvergence: sin raíz en el intervalo o sin convergencia
    """
    floor = float(lower_bound(spot, strike, rate, ttm))
    if price <= floor:
        raise BelowIntrinsic(f"precio {price} <= cota inferior {floor:.10g}")
    if price >= spot:
        raise AboveUpperBound(f"precio {price} >= spot {spot}")

    def objective(sigma):
        return float(call_price_array(spot, strike, rate, ttm, sigma)) - price

    f_low, f_high = objective(IV_LOWER), objective(IV_UPPER)
    if f_low > 0 or f_high < 0:
        raise NoConvergence(f"precio {price} fuera del intervalo de volatilidad [{IV_LOWER}, {IV_UPPER}]")
    if f_low == 0:
        return IV_LOWER

    sigma, result = brentq(objective, IV_LOWER, IV_UPPER, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=IV_MAX_ITER, full_output=True, disp=False)
    if not result.converged:
        raise NoConvergence(f"Brent no convergió en {IV_MAX_ITER} iteraciones ({result.flag})")

    residual = abs(objective(sigma))
    if residual > IV_PRICE_TOL * spot:
        logger.debug(f"Residuo de inversión {residual:.3e} por encima de la tolerancia (vega casi nula)")
    return float(sigma)
