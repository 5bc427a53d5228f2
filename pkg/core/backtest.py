"""
Backtesting de VaR y comparación de modelos

Extracción de violaciones, test de cobertura incondicional de Kupiec,
test de independencia de Christoffersen y cobertura condicional,
test de Diebold-Mariano y modelo de ranking por penalizaciones.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import xlogy
from scipy.stats import chi2, norm, rankdata, t as student_t

from utils.errors import DataIOError, DateMisalignment
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger("backtest")

ERROR_KINDS = ("exceedance", "all", "pinball")


@dataclass(frozen=True, eq=False)
class ViolationSeries:
    """Serie de violaciones: 1 si la pérdida realizada superó el VaR."""
    hits: np.ndarray
    alpha: float
    dates: Optional[tuple] = None

    def __post_init__(self):
        hits = np.asarray(self.hits, dtype=int).ravel()
        if hits.size < 1:
            raise ValidationError("ViolationSeries necesita al menos una observación")
        if np.any((hits != 0) & (hits != 1)):
            raise ValidationError("los hits deben ser 0 o 1")
        object.__setattr__(self, 'hits', hits)

    @property
    def n(self) -> int:
        return int(self.hits.size)

    @property
    def count(self) -> int:
        return int(self.hits.sum())

    @property
    def rate(self) -> float:
        return self.count / self.n


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    dof: int

    def to_dict(self) -> dict:
        return {'stat': self.statistic, 'p': self.p_value, 'dof': self.dof}


@dataclass
class RankTable:
    """Penalización acumulada, porcentaje del total y rango por método."""
    methods: List[str]
    penalties: List[float]
    percentages: List[float]
    ranks: List[int]

    def to_dict(self) -> dict:
        return {m: {'penalty': p, 'percentage': pct, 'rank': r}
                for m, p, pct, r in zip(self.methods, self.penalties, self.percentages, self.ranks)}


@dataclass
class BacktestReport:
    """Resultados del backtest por nivel de confianza y método."""
    levels: List[float]
    methods: List[str]
    n_days: int
    coverage: Dict[str, Dict[str, dict]] = field(default_factory=dict)
    dm: Dict[str, Dict[str, Dict[str, dict]]] = field(default_factory=dict)
    ranking: Dict[str, dict] = field(default_factory=dict)
    dm_error_kind: str = "exceedance"

    def to_dict(self) -> dict:
        return {'levels': self.levels, 'methods': self.methods, 'n_days': self.n_days,
                'dm_error_kind': self.dm_error_kind, 'coverage': self.coverage,
                'dm': self.dm, 'ranking': self.ranking}


def level_key(alpha: float) -> str:
    """Etiqueta de columna de un nivel: 0.95 -> '95'."""
    return f"{alpha * 100:g}"


# ----------------------------------------------------------
# Alineación de series
# ----------------------------------------------------------

def _aligned(a, b, nombre_a: str = "returns", nombre_b: str = "var"):
    """Convierte dos series en arrays comprobando longitud y, si las hay, fechas."""
    if isinstance(a, pd.Series) and isinstance(b, pd.Series):
        if not a.index.equals(b.index):
            raise DateMisalignment(f"fechas de {nombre_a} y {nombre_b} no coinciden")
    a_arr = np.asarray(a, dtype=float).ravel()
    b_arr = np.asarray(b, dtype=float).ravel()
    if a_arr.size != b_arr.size:
        raise DateMisalignment(f"{nombre_a} ({a_arr.size}) y {nombre_b} ({b_arr.size}) de distinta longitud")
    return a_arr, b_arr


# ----------------------------------------------------------
# Violaciones y tests de cobertura
# ----------------------------------------------------------

def violations(returns, var_forecasts, alpha: float) -> ViolationSeries:
    """hit_t = 1 si return_t < -VaR_t (desigualdad estricta)."""
    Validators.require(Validators.validar_probabilidad(alpha))
    r, v = _aligned(returns, var_forecasts)
    dates = tuple(returns.index) if isinstance(returns, pd.Series) else None
    return ViolationSeries((r < -v).astype(int), alpha, dates)


def _clip_stat(value: float) -> float:
    # también normaliza -0.0
    return 0.0 if value <= 0 else float(value)


def kupiec_uc(v: ViolationSeries, p: float) -> TestResult:
    """
    Test de cobertura incondicional de Kupiec (razón de verosimilitudes, chi2(1)).

    Usa la convención 0 ln 0 = 0, de modo que x = 0 y x = n están definidos.
    """
    Validators.require(Validators.validar_probabilidad(p, "p"))
    n, x = v.n, v.count
    pi_hat = x / n
    ll_null = xlogy(n - x, 1.0 - p) + xlogy(x, p)
    ll_alt = xlogy(n - x, 1.0 - pi_hat) + xlogy(x, pi_hat)
    stat = _clip_stat(-2.0 * (ll_null - ll_alt))
    return TestResult(stat, float(chi2.sf(stat, 1)), 1)


def transition_counts(hits: np.ndarray) -> Dict[str, int]:
    """Conteos n00, n01, n10, n11 de transiciones entre días consecutivos."""
    prev, cur = hits[:-1], hits[1:]
    return {
        'n00': int(np.sum((prev == 0) & (cur == 0))),
        'n01': int(np.sum((prev == 0) & (cur == 1))),
        'n10': int(np.sum((prev == 1) & (cur == 0))),
        'n11': int(np.sum((prev == 1) & (cur == 1))),
    }


def christoffersen_ind(v: ViolationSeries) -> TestResult:
    """
    Test de independencia de Christoffersen (cadena de Markov de primer orden, chi2(1)).

    Las celdas de transición vacías aportan cero a la log-verosimilitud.
    """
    if v.n < 2:
        raise ValidationError("el test de independencia necesita n >= 2")
    c = transition_counts(v.hits)
    n00, n01, n10, n11 = c['n00'], c['n01'], c['n10'], c['n11']
    pi = (n01 + n11) / (v.n - 1)
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 else 0.0

    ll_null = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi)
    ll_alt = (xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01)
              + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11))
    stat = _clip_stat(-2.0 * (ll_null - ll_alt))
    return TestResult(stat, float(chi2.sf(stat, 1)), 1)


def conditional_coverage(v: ViolationSeries, p: float) -> TestResult:
    """Cobertura condicional: suma de los estadísticos UC e IND, chi2(2)."""
    stat = kupiec_uc(v, p).statistic + christoffersen_ind(v).statistic
    return TestResult(stat, float(chi2.sf(stat, 2)), 2)


# ----------------------------------------------------------
# Diebold-Mariano
# ----------------------------------------------------------

def dm_test(errors_a, errors_b, harvey: bool = False) -> TestResult:
    """
    Test de Diebold-Mariano con pérdida cuadrática, horizonte 1.

    d_t = e_a^2 - e_b^2; DM = media(d) / sqrt(var(d) / n). Negativo favorece a `a`.
    Con harvey=True aplica la corrección de muestra pequeña y p-valor t(n-1).
    """
    a, b = _aligned(errors_a, errors_b, "errors_a", "errors_b")
    n = a.size
    if n < 2:
        raise ValidationError("el test DM necesita al menos 2 observaciones")
    d = a ** 2 - b ** 2
    mean_d = float(np.mean(d))
    var_d = float(np.var(d, ddof=1))

    if var_d == 0.0:
        if mean_d == 0.0:
            return TestResult(0.0, 1.0, 0)
        logger.warning("diferencial DM con varianza nula y media no nula: estadístico infinito")
        return TestResult(float(np.copysign(np.inf, mean_d)), 0.0, 0)

    stat = mean_d / np.sqrt(var_d / n)
    if harvey:
        stat *= np.sqrt((n - 1) / n)
        return TestResult(float(stat), float(2.0 * student_t.sf(abs(stat), n - 1)), n - 1)
    return TestResult(float(stat), float(2.0 * norm.sf(abs(stat))), 0)


def var_forecast_errors(returns, var_series, alpha: float, kind: str = "exceedance") -> np.ndarray:
    """
    Serie de errores de pronóstico del cuantil -VaR frente al rendimiento realizado.

    exceedance: r + VaR solo en días con violación (0 el resto)
    all: r + VaR todos los días
    pinball: raíz de la pérdida cuantílica al nivel 1 - alpha
    """
    if kind not in ERROR_KINDS:
        raise ValidationError(f"tipo de error desconocido: {kind}")
    r, v = _aligned(returns, var_series)
    diff = r + v
    if kind == "exceedance":
        return np.where(r < -v, diff, 0.0)
    if kind == "all":
        return diff
    tau = 1.0 - alpha
    loss = (tau - (r < -v).astype(float)) * diff
    return np.sqrt(np.maximum(loss, 0.0))


def dm_matrix(errors_by_method: Dict[str, Sequence[float]], harvey: bool = False) -> Dict[str, Dict[str, dict]]:
    """Estadísticos DM por pares de métodos (fila frente a columna)."""
    methods = list(errors_by_method)
    matrix = {}
    for a in methods:
        matrix[a] = {}
        for b in methods:
            if a == b:
                continue
            matrix[a][b] = dm_test(errors_by_method[a], errors_by_method[b], harvey).to_dict()
    return matrix


# ----------------------------------------------------------
# Ranking por penalizaciones
# ----------------------------------------------------------

def daily_penalties(returns, var_series, kappa: float = 1.0) -> np.ndarray:
    """Severidad |r + VaR| en violaciones y coste de conservadurismo kappa * (VaR + r) en el resto."""
    r, v = _aligned(returns, var_series)
    diff = r + v
    hit = r < -v
    return np.where(hit, np.abs(diff), kappa * np.maximum(diff, 0.0))


def ranking_model(var_by_method: Dict[str, Sequence[float]], returns, kappa: float = 1.0) -> RankTable:
    """Penalización acumulada por método; rangos ascendentes con empates al rango menor."""
    if not var_by_method:
        raise ValidationError("ranking sin métodos")
    methods = list(var_by_method)
    penalties = [float(daily_penalties(returns, var_by_method[m], kappa).sum()) for m in methods]
    total = sum(penalties)
    if total > 0:
        percentages = [100.0 * p / total for p in penalties]
    else:
        percentages = [100.0 / len(methods)] * len(methods)
    ranks = [int(r) for r in rankdata(penalties, method='min')]
    return RankTable(methods, penalties, percentages, ranks)


# ----------------------------------------------------------
# Informe
# ----------------------------------------------------------

def build_backtest_report(returns: pd.Series, var_by_method: Dict[str, pd.DataFrame], levels: Sequence[float],
                          dm_error_kind: str = "exceedance", kappa: float = 1.0,
                          harvey: bool = False) -> BacktestReport:
    """
    Ejecuta todos los tests para cada método y nivel.

    Args:
        returns: Rendimientos realizados indexados por fecha
        var_by_method: Por método, DataFrame indexado por fecha con una columna por nivel (level_key)
        levels: Niveles de confianza
    """
    methods = list(var_by_method)
    report = BacktestReport([float(a) for a in levels], methods, int(len(returns)), dm_error_kind=dm_error_kind)
    for alpha in levels:
        key = level_key(alpha)
        series = {m: var_by_method[m][key] for m in methods}
        report.coverage[key] = {}
        errors = {}
        for m in methods:
            v = violations(returns, series[m], alpha)
            report.coverage[key][m] = {
                'violation_rate': v.rate,
                'violations': v.count,
                'uc': kupiec_uc(v, 1.0 - alpha).to_dict(),
                'ind': christoffersen_ind(v).to_dict(),
                'cc': conditional_coverage(v, 1.0 - alpha).to_dict(),
            }
            errors[m] = var_forecast_errors(returns, series[m], alpha, dm_error_kind)
        report.dm[key] = dm_matrix(errors, harvey)
        report.ranking[key] = ranking_model(series, returns, kappa).to_dict()
        logger.info(f"Backtest nivel {key}%: " + ", ".join(
            f"{m}={report.coverage[key][m]['violation_rate']:.4f}" for m in methods))
    return report


def _json_safe(value):
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def save_backtest_report(report: BacktestReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_safe(report.to_dict()), f, indent=2, sort_keys=True)
    return path


def load_backtest_report(path) -> dict:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"no se pudo leer el informe de backtest {path}: {e}") from e
