r"""
Superficie de volatilidad implícita

Representación principal: B-spline cúbico de producto tensorial sobre
(moneyness m = S/K, tiempo al vencimiento tau)

.. math::
    \sigma(m, \tau) = \sum_i \sum_j \beta_{ij} B_i(m) B_j(\tau)

con una disposición de nudos fija para todos los días, de modo que la
diferencia entre dos días es una diferencia de matrices de coeficientes.
También incluye las representaciones polinómica y SVI para comparación
y diagnósticos ligeros de arbitraje estático.
"""

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import lstsq

from core.bsm import call_price_array
from utils.errors import DataIOError, IllConditioned, LayoutMismatch
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger("surface")

DEGREE = 3


@dataclass(frozen=True)
class VolPoint:
    """Punto observado de la superficie."""
    moneyness: float
    ttm: float
    vol: float

    def __post_init__(self):
        Validators.require(Validators.validar_positivo(self.moneyness, "moneyness"))
        Validators.require(Validators.validar_positivo(self.ttm, "ttm"))
        Validators.require(Validators.validar_positivo(self.vol, "vol"))


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SplineSurface:
    """Superficie B-spline de un día: nudos por eje y matriz de coeficientes."""
    knots_m: np.ndarray
    knots_t: np.ndarray
    coeffs: np.ndarray
    fit_date: Optional[date] = None
    residual_norm: float = 0.0
    n_points: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'knots_m', _frozen_array(self.knots_m))
        object.__setattr__(self, 'knots_t', _frozen_array(self.knots_t))
        object.__setattr__(self, 'coeffs', _frozen_array(self.coeffs))
        Validators.require(Validators.validar_nudos(self.knots_m, "knots_m"))
        Validators.require(Validators.validar_nudos(self.knots_t, "knots_t"))
        expected = (len(self.knots_m) - DEGREE - 1, len(self.knots_t) - DEGREE - 1)
        if self.coeffs.shape != expected:
            raise ValidationError(f"coeffs con forma {self.coeffs.shape}, se esperaba {expected}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValidationError("coeffs contiene valores no finitos")

    @property
    def m_range(self) -> Tuple[float, float]:
        return float(self.knots_m[DEGREE]), float(self.knots_m[-DEGREE - 1])

    @property
    def t_range(self) -> Tuple[float, float]:
        return float(self.knots_t[DEGREE]), float(self.knots_t[-DEGREE - 1])

    def same_layout(self, other: "SplineSurface") -> bool:
        return (np.array_equal(self.knots_m, other.knots_m)
                and np.array_equal(self.knots_t, other.knots_t))


@dataclass(frozen=True, eq=False)
class SurfaceDelta:
    """Movimiento diario de la superficie en el espacio de coeficientes."""
    dcoeffs: np.ndarray
    from_date: Optional[date] = None
    to_date: Optional[date] = None

    def __post_init__(self):
        object.__setattr__(self, 'dcoeffs', _frozen_array(self.dcoeffs))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.dcoeffs))


@dataclass(frozen=True)
class PolyParams:
    """Coeficientes de la representación polinómica en (M_t, T - t)."""
    a0: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.a0, self.a1, self.a2, self.a3, self.a4])):
            raise ValidationError("PolyParams con coeficientes no finitos")


@dataclass(frozen=True)
class SviParams:
    """Parámetros del smile SVI en la forma impresa con k * x."""
    a: float
    b: float
    rho: float
    m: float
    s: float
    k: float = 1.0

    def __post_init__(self):
        Validators.require(Validators.validar_no_negativo(self.b, "b"))
        Validators.require(Validators.validar_no_negativo(self.s, "s"))
        if abs(self.rho) > 1:
            raise ValidationError(f"|rho| debe ser <= 1 (recibido {self.rho})")


@dataclass
class ArbitrageReport:
    """Resultado de los diagnósticos de arbitraje estático (solo informativo)."""
    calendar: List[dict] = field(default_factory=list)
    butterfly: List[dict] = field(default_factory=list)

    @property
    def n_violations(self) -> int:
        return len(self.calendar) + len(self.butterfly)

    def to_dict(self) -> dict:
        return {'calendar': self.calendar, 'butterfly': self.butterfly}


# ----------------------------------------------------------
# Bases B-spline
# ----------------------------------------------------------

def make_knots(lo: float, hi: float, n_breaks: int) -> np.ndarray:
    """Vector de nudos cúbico sujeto: n_breaks puntos uniformes con extremos repetidos."""
    if n_breaks < 2 or not hi > lo:
        raise ValidationError(f"disposición de nudos inválida: [{lo}, {hi}] con {n_breaks} puntos")
    inner = np.linspace(lo, hi, n_breaks)
    return np.concatenate([np.full(DEGREE, lo), inner, np.full(DEGREE, hi)])


def _last_interval(knots: np.ndarray) -> int:
    nonempty = np.nonzero(knots[1:] > knots[:-1])[0]
    return int(nonempty[-1]) if len(nonempty) else -1


def _cox_de_boor(knots, i, k, x, last_interval):
    if k == 0:
        if knots[i] <= x < knots[i + 1]:
            return 1.0
        # el extremo derecho pertenece al último intervalo no vacío
        return 1.0 if (i == last_interval and x == knots[i + 1]) else 0.0

    left_den = knots[i + k] - knots[i]
    right_den = knots[i + k + 1] - knots[i + 1]
    left = right = 0.0
    if left_den != 0:
        left = (x - knots[i]) / left_den * _cox_de_boor(knots, i, k - 1, x, last_interval)
    if right_den != 0:
        right = (knots[i + k + 1] - x) / right_den * _cox_de_boor(knots, i + 1, k - 1, x, last_interval)
    return left + right


def bspline_basis(knots: Sequence[float], i: int, x: float) -> float:
    """
    Valor de la base cúbica B_i(x) por la recursión de Cox-de Boor.

    Raises:
        IndexError: si i no es una base cúbica válida para el vector de nudos
    """
    knots = np.asarray(knots, dtype=float)
    if not 0 <= i <= len(knots) - DEGREE - 2:
        raise IndexError(f"índice de base {i} fuera de rango para {len(knots)} nudos")
    if x < knots[i] or x > knots[i + DEGREE + 1]:
        return 0.0
    return float(_cox_de_boor(knots, i, DEGREE, float(x), _last_interval(knots)))


def basis_matrix(knots: np.ndarray, x) -> np.ndarray:
    """Matriz de diseño (len(x), n_bases); x se recorta al intervalo base."""
    knots = np.asarray(knots, dtype=float)
    x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), knots[DEGREE], knots[-DEGREE - 1])
    return BSpline.design_matrix(x, knots, DEGREE).toarray()


# ----------------------------------------------------------
# Ajuste y evaluación
# ----------------------------------------------------------

def _tensor_design(knots_m, knots_t, m, tau) -> np.ndarray:
    bm = basis_matrix(knots_m, m)
    bt = basis_matrix(knots_t, tau)
    return (bm[:, :, None] * bt[:, None, :]).reshape(len(bm), -1)


def inside_knot_range(knots_m, knots_t, m, tau) -> np.ndarray:
    """Máscara de los puntos (m, tau) dentro del rango de nudos de ambos ejes."""
    m = np.asarray(m, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return ((m >= knots_m[DEGREE]) & (m <= knots_m[-DEGREE - 1])
            & (tau >= knots_t[DEGREE]) & (tau <= knots_t[-DEGREE - 1]))


def fit_surface(points, knots_m, knots_t, ridge: float = 1e-6, fit_date: Optional[date] = None) -> SplineSurface:
    """
    Ajuste por mínimos cuadrados penalizados de la superficie.

    Minimiza sum (sigma_obs - superficie(m, tau))^2 + ridge * ||beta||^2.
    Los puntos fuera del rango de nudos se descartan con aviso.

    Args:
        points: Lista de VolPoint
        knots_m, knots_t: Vectores de nudos de cada eje
        ridge: Penalización sobre la norma de los coeficientes
        fit_date: Fecha del ajuste

    Raises:
        IllConditioned: ningún punto dentro del rango, o sistema deficiente en rango con ridge = 0
    """
    Validators.require(Validators.validar_no_negativo(ridge, "ridge"))
    knots_m = np.asarray(knots_m, dtype=float)
    knots_t = np.asarray(knots_t, dtype=float)
    Validators.require(Validators.validar_nudos(knots_m, "knots_m"))
    Validators.require(Validators.validar_nudos(knots_t, "knots_t"))
    n_m, n_t = len(knots_m) - DEGREE - 1, len(knots_t) - DEGREE - 1

    data = np.array([(p.moneyness, p.ttm, p.vol) for p in points], dtype=float).reshape(-1, 3)
    inside = inside_knot_range(knots_m, knots_t, data[:, 0], data[:, 1])
    if not np.all(inside):
        logger.warning(f"{fit_date}: {int(np.sum(~inside))} puntos fuera del rango de nudos descartados")
        data = data[inside]

    n_coeffs = n_m * n_t
    if len(data) == 0:
        raise IllConditioned(f"{fit_date}: sin puntos para ajustar {n_coeffs} coeficientes")

    design = _tensor_design(knots_m, knots_t, data[:, 0], data[:, 1])
    target = data[:, 2]
    if ridge > 0:
        system = np.vstack([design, np.sqrt(ridge) * np.eye(n_coeffs)])
        rhs = np.concatenate([target, np.zeros(n_coeffs)])
    else:
        system, rhs = design, target

    beta, _, rank, _ = lstsq(system, rhs)
    if rank < n_coeffs:
        raise IllConditioned(f"{fit_date}: sistema de rango {rank} < {n_coeffs} coeficientes; reintentar con ridge > 0")

    residual_norm = float(np.linalg.norm(target - design @ beta))
    logger.debug(f"{fit_date}: superficie ajustada con {len(data)} puntos, residuo {residual_norm:.3e}")
    return SplineSurface(knots_m, knots_t, beta.reshape(n_m, n_t), fit_date, residual_norm, len(data))


def surface_fit_report(s: SplineSurface) -> dict:
    """Resumen del ajuste: puntos usados, norma del residuo y RMSE."""
    rmse = s.residual_norm / np.sqrt(s.n_points) if s.n_points else 0.0
    return {
        'fit_date': s.fit_date.isoformat() if s.fit_date else None,
        'n_points': int(s.n_points),
        'residual_norm': float(s.residual_norm),
        'rmse': float(rmse),
    }


def out_of_range_count(s: SplineSurface, m, tau) -> int:
    """Número de consultas (m, tau) que caen fuera del rango y se recortan."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    m_lo, m_hi = s.m_range
    t_lo, t_hi = s.t_range
    m, tau = np.broadcast_arrays(m, tau)
    return int(np.sum((m < m_lo) | (m > m_hi) | (tau < t_lo) | (tau > t_hi)))


def eval_surface(s: SplineSurface, m, tau):
    """
    Valor de la superficie en (m, tau); acepta escalares o arrays.

    Las consultas fuera del rango se recortan al borde (extrapolación plana).
    """
    scalar = np.ndim(m) == 0 and np.ndim(tau) == 0
    m_arr, tau_arr = np.broadcast_arrays(np.atleast_1d(np.asarray(m, dtype=float)),
                                         np.atleast_1d(np.asarray(tau, dtype=float)))
    clamped = out_of_range_count(s, m_arr, tau_arr)
    if clamped:
        logger.debug(f"{clamped} evaluaciones recortadas al rango de la superficie")
    bm = basis_matrix(s.knots_m, m_arr.ravel())
    bt = basis_matrix(s.knots_t, tau_arr.ravel())
    values = np.einsum('pi,ij,pj->p', bm, s.coeffs, bt).reshape(m_arr.shape)
    return float(values[0]) if scalar else values


def surface_delta(today: SplineSurface, yesterday: SplineSurface) -> SurfaceDelta:
    """Diferencia de coeficientes today - yesterday."""
    if not today.same_layout(yesterday):
        raise LayoutMismatch(f"disposición de nudos distinta entre {yesterday.fit_date} y {today.fit_date}")
    return SurfaceDelta(today.coeffs - yesterday.coeffs, yesterday.fit_date, today.fit_date)


def apply_delta(s: SplineSurface, delta: SurfaceDelta, fit_date: Optional[date] = None) -> SplineSurface:
    """Superficie desplazada s + delta en el espacio de coeficientes."""
    if delta.dcoeffs.shape != s.coeffs.shape:
        raise LayoutMismatch(f"delta con forma {delta.dcoeffs.shape} para coeficientes {s.coeffs.shape}")
    return SplineSurface(s.knots_m, s.knots_t, s.coeffs + delta.dcoeffs,
                         fit_date if fit_date is not None else delta.to_date)


# ----------------------------------------------------------
# Representaciones paramétricas
# ----------------------------------------------------------

def _poly_moneyness(S, K, r, tau):
    forward = S * np.exp(r * tau)
    return np.log(forward / K) / np.sqrt(tau)


def eval_poly(p: PolyParams, S: float, K: float, r: float, tau: float) -> float:
    """
    Representación polinómica a0 + a1 M + a2 M^2 + a3 tau + a4 M tau,
    con M = ln(F/K) / sqrt(tau) y F = S e^(r tau).
    """
    if tau <= 0:
        raise ValidationError(f"tau debe ser > 0 (recibido {tau})")
    M = float(_poly_moneyness(S, K, r, tau))
    return p.a0 + p.a1 * M + p.a2 * M ** 2 + p.a3 * tau + p.a4 * M * tau


def fit_poly(points, S: float, r: float) -> PolyParams:
    """Mínimos cuadrados ordinarios de la representación polinómica sobre puntos (m, tau, sigma)."""
    data = np.array([(p.moneyness, p.ttm, p.vol) for p in points], dtype=float).reshape(-1, 3)
    if len(data) < 5:
        raise IllConditioned(f"se necesitan al menos 5 puntos para el polinomio (recibidos {len(data)})")
    m, tau, sigma = data.T
    M = _poly_moneyness(S, S / m, r, tau)
    design = np.column_stack([np.ones_like(M), M, M ** 2, tau, M * tau])
    coeffs, _, rank, _ = np.linalg.lstsq(design, sigma, rcond=None)
    if rank < 5:
        raise IllConditioned(f"regresión polinómica de rango {rank} < 5")
    return PolyParams(*(float(c) for c in coeffs))


def eval_svi(p: SviParams, x):
    """Varianza SVI a + b (rho (x - m) + sqrt((k x - m)^2 + s^2))."""
    x = np.asarray(x, dtype=float)
    value = p.a + p.b * (p.rho * (x - p.m) + np.sqrt((p.k * x - p.m) ** 2 + p.s ** 2))
    return float(value) if value.ndim == 0 else value


# ----------------------------------------------------------
# Diagnósticos de arbitraje estático
# ----------------------------------------------------------

def calendar_violations(taus: Sequence[float], total_variance: Sequence[float], tol: float = 1e-12) -> List[Tuple[int, int]]:
    """Pares consecutivos (j, j+1) donde la varianza total decrece con tau."""
    order = np.argsort(taus)
    w = np.asarray(total_variance, dtype=float)[order]
    return [(int(order[j]), int(order[j + 1])) for j in range(len(w) - 1) if w[j + 1] < w[j] - tol]


def butterfly_violations(strikes: Sequence[float], prices: Sequence[float], tol: float = 1e-9) -> List[int]:
    """Índices de strikes intermedios donde el precio de la call no es convexo en K."""
    order = np.argsort(strikes)
    K = np.asarray(strikes, dtype=float)[order]
    C = np.asarray(prices, dtype=float)[order]
    slopes = np.diff(C) / np.diff(K)
    return [int(order[j + 1]) for j in range(len(slopes) - 1) if slopes[j + 1] < slopes[j] - tol]


def static_arbitrage_diagnostics(s: SplineSurface, m_grid: Sequence[float], tau_grid: Sequence[float],
                                 S: float, r: float) -> ArbitrageReport:
    """
    Comprueba calendario (varianza total no decreciente a moneyness forward fija)
    y mariposa (precios convexos en strike a tau fija). Nunca bloquea el ajuste.
    """
    report = ArbitrageReport()
    taus = np.sort(np.asarray(tau_grid, dtype=float))
    m_grid = np.sort(np.asarray(m_grid, dtype=float))

    for kf in m_grid:
        # F/K fijo equivale a m = kf e^(-r tau)
        m_path = kf * np.exp(-r * taus)
        sigma = eval_surface(s, m_path, taus)
        for lo, hi in calendar_violations(taus, sigma ** 2 * taus):
            report.calendar.append({'forward_moneyness': float(kf), 'tau_lo': float(taus[lo]),
                                    'tau_hi': float(taus[hi])})

    for tau in taus:
        strikes = S / m_grid
        sigma = np.maximum(eval_surface(s, m_grid, np.full_like(m_grid, tau)), 0.0)
        prices = call_price_array(S, strikes, r, tau, sigma)
        for idx in butterfly_violations(strikes, prices):
            report.butterfly.append({'tau': float(tau), 'strike': float(strikes[idx])})

    if report.n_violations:
        logger.warning(f"{s.fit_date}: {len(report.calendar)} violaciones de calendario, "
                       f"{len(report.butterfly)} de mariposa (informativo)")
    return report


# ----------------------------------------------------------
# Persistencia
# ----------------------------------------------------------

def surface_to_dict(s: SplineSurface) -> dict:
    return {
        'fit_date': s.fit_date.isoformat() if s.fit_date else None,
        'knots_m': [float(k) for k in s.knots_m],
        'knots_t': [float(k) for k in s.knots_t],
        'coeffs': [[float(c) for c in row] for row in s.coeffs],
        'residual_norm': float(s.residual_norm),
        'n_points': int(s.n_points),
    }


def surface_from_dict(data: dict) -> SplineSurface:
    fit_date = date.fromisoformat(data['fit_date']) if data.get('fit_date') else None
    return SplineSurface(np.array(data['knots_m']), np.array(data['knots_t']), np.array(data['coeffs']),
                         fit_date, float(data.get('residual_norm', 0.0)), int(data.get('n_points', 0)))


def save_surface(s: SplineSurface, path) -> Path:
    """Guarda la superficie en JSON; los float de Python se serializan con repr exacto."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(surface_to_dict(s), f, indent=2)
    return path


def load_surface(path) -> SplineSurface:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return surface_from_dict(json.load(f))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise DataIOError(f"no se pudo leer la superficie {path}: {e}") from e
