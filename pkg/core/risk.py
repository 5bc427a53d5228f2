"""
Medidas de riesgo sobre distribuciones empíricas de PnL: VaR y Expected Shortfall.

Convención: pérdidas positivas. VaR_alpha = -q_{1-alpha}, con q el cuantil
empírico inferior; ES_alpha = -E[X | X <= q_{1-alpha}].
"""

import math
from dataclasses import dataclass, asdict
from datetime import date
from typing import Optional, Tuple

import numpy as np

from core.psp_engine import PnLDistribution
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger("risk")

_QUANTILE_TOL = 1e-12


@dataclass(frozen=True)
class VarReport:
    as_of: Optional[date]
    alpha: float
    var: float
    es: float
    n_samples: int
    model: str = "psp"

    def to_dict(self) -> dict:
        data = asdict(self)
        data['as_of'] = self.as_of.isoformat() if self.as_of else None
        return data


def _as_samples(dist) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if isinstance(dist, PnLDistribution):
        return dist.samples, dist.weights
    samples = np.asarray(dist, dtype=float).ravel()
    if samples.size == 0:
        raise ValidationError("distribución vacía")
    return samples, None


def _lower_quantile(samples: np.ndarray, weights: Optional[np.ndarray], alpha: float) -> float:
    """Menor x con F(x) >= 1 - alpha bajo la distribución empírica (ponderada o no)."""
    Validators.require(Validators.validar_probabilidad(alpha))
    order = np.argsort(samples, kind='stable')
    ordered = samples[order]
    if weights is None:
        k = max(1, math.ceil(len(ordered) * (1.0 - alpha) - _QUANTILE_TOL))
        return float(ordered[k - 1])
    cdf = np.cumsum(weights[order])
    idx = int(np.searchsorted(cdf, (1.0 - alpha) - _QUANTILE_TOL, side='left'))
    return float(ordered[min(idx, len(ordered) - 1)])


def var(dist, alpha: float) -> float:
    """VaR al nivel alpha: menos el cuantil inferior 1 - alpha."""
    samples, weights = _as_samples(dist)
    return -_lower_quantile(samples, weights, alpha)


def es(dist, alpha: float) -> float:
    """Expected Shortfall: menos la media de las muestras en o por debajo del cuantil."""
    samples, weights = _as_samples(dist)
    q = _lower_quantile(samples, weights, alpha)
    tail = samples <= q
    if weights is None:
        return -float(np.mean(samples[tail]))
    return -float(np.dot(samples[tail], weights[tail]) / weights[tail].sum())


def var_report(dist: PnLDistribution, alpha: float) -> VarReport:
    report = VarReport(dist.as_of, alpha, var(dist, alpha), es(dist, alpha), len(dist), dist.model)
    logger.debug(f"{dist.as_of} {dist.model} alpha={alpha}: VaR={report.var:.6g} ES={report.es:.6g}")
    return report
