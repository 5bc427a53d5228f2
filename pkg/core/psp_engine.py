"""
Motor PSP - Proyección de la superficie paramétrica

Combina precios del subyacente simulados por Monte Carlo (GBM de un paso)
con escenarios de simulación histórica de la superficie de volatilidad
para obtener la distribución de PnL del día siguiente de una cartera de calls.
"""

from dataclasses import dataclass, field
from datetime import date
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.bsm import call_price_array
from core.surface import (SplineSurface, SurfaceDelta, apply_delta, basis_matrix, eval_surface,
                          out_of_range_count, surface_delta)
from utils.errors import ExpiryTooNear, InsufficientHistory, UndefinedStatistic
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger("psp_engine")

VOL_FLOOR = 1e-6
CALENDAR_DAYS = 365.0
ONE_DAY = 1.0 / CALENDAR_DAYS
PAIRING_MODES = ("sampled", "cross")


@dataclass(frozen=True)
class GbmParams:
    """Parámetros por paso del GBM discretizado."""
    mu: float
    sigma: float
    n_paths: int = 1000
    seed: int = 0

    def __post_init__(self):
        Validators.require(Validators.validar_no_negativo(self.sigma, "sigma"))
        if int(self.n_paths) < 1:
            raise ValidationError(f"n_paths debe ser >= 1 (recibido {self.n_paths})")


@dataclass(frozen=True)
class Position:
    """Posición en una call: strike, vencimiento, cantidad con signo y vol de hoy."""
    strike: float
    expiry: date
    quantity: float
    entry_vol: float = 0.0

    def __post_init__(self):
        Validators.require(Validators.validar_positivo(self.strike, "strike"))

    @property
    def key(self) -> Tuple[date, float]:
        return (self.expiry, self.strike)


@dataclass(frozen=True)
class ScenarioSet:
    """Deltas históricos de la superficie, del más antiguo al más reciente."""
    deltas: Tuple[SurfaceDelta, ...]
    as_of: Optional[date] = None

    def __post_init__(self):
        object.__setattr__(self, 'deltas', tuple(self.deltas))
        shapes = {d.dcoeffs.shape for d in self.deltas}
        if len(shapes) > 1:
            raise ValidationError(f"escenarios con formas distintas: {shapes}")

    def __len__(self):
        return len(self.deltas)

    def stack(self) -> np.ndarray:
        """Array (n_escenarios, n_m, n_t) con los deltas de coeficientes."""
        return np.stack([d.dcoeffs for d in self.deltas])

    def magnitudes(self) -> np.ndarray:
        return np.array([d.magnitude for d in self.deltas])


@dataclass(frozen=True)
class WeightScheme:
    """
    Esquema de ponderación de escenarios.

    kind: 'uniform', 'exponential' (decaimiento lam por día de antigüedad),
    'stress' (proporcional a la magnitud del escenario) o 'custom'.
    """
    kind: str = "uniform"
    lam: float = 0.0
    custom: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential", "stress", "custom"):
            raise ValidationError(f"esquema de pesos desconocido: {self.kind}")
        if self.kind == "exponential" and not self.lam >= 0:
            raise ValidationError(f"lam debe ser >= 0 (recibido {self.lam})")
        if self.kind == "custom":
            if self.custom is None:
                raise ValidationError("esquema custom sin vector de pesos")
            object.__setattr__(self, 'custom', tuple(float(v) for v in self.custom))

    def weights(self, n: int, magnitudes: Optional[Sequence[float]] = None) -> np.ndarray:
        """Pesos no negativos que suman 1 para n escenarios ordenados del más antiguo al más reciente."""
        if n < 1:
            raise ValidationError("se necesita al menos un escenario para ponderar")
        if self.kind == "uniform":
            raw = np.ones(n)
        elif self.kind == "exponential":
            if np.isinf(self.lam):
                raw = np.zeros(n)
                raw[-1] = 1.0
            else:
                age = np.arange(n - 1, -1, -1, dtype=float)
                raw = np.exp(-self.lam * age)
        elif self.kind == "stress":
            raw = np.asarray(magnitudes, dtype=float) if magnitudes is not None else np.ones(n)
            if len(raw) != n:
                raise ValidationError(f"{len(raw)} magnitudes para {n} escenarios")
            if raw.sum() <= 0:
                raw = np.ones(n)
        else:
            raw = np.asarray(self.custom, dtype=float)
            if len(raw) != n:
                raise ValidationError(f"{len(raw)} pesos custom para {n} escenarios")
            if np.any(raw < 0) or raw.sum() <= 0:
                raise ValidationError("los pesos custom deben ser no negativos con suma positiva")
        return raw / raw.sum()

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'lam': self.lam, 'custom': list(self.custom) if self.custom else None}


@dataclass(frozen=True, eq=False)
class PnLDistribution:
    """Distribución empírica de cambios de valor de la cartera a un día."""
    samples: np.ndarray
    as_of: Optional[date] = None
    weights: Optional[np.ndarray] = None
    model: str = "psp"
    floor_count: int = 0
    clamp_count: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValidationError("PnLDistribution vacía")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("PnLDistribution con valores no finitos")
        object.__setattr__(self, 'samples', samples)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != samples.shape or np.any(w < 0):
                raise ValidationError("pesos de la distribución inválidos")
            object.__setattr__(self, 'weights', w / w.sum())

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True, eq=False)
class VolMixture:
    """Mezcla ponderada de distribuciones de volatilidad por escenario."""
    samples: np.ndarray
    weights: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.samples, self.weights))


@dataclass
class RunReport:
    """Contadores de avisos acumulados durante una ejecución."""
    floors: dict = field(default_factory=dict)
    clamps: int = 0
    skipped_quotes: int = 0
    arbitrage_violations: int = 0
    out_of_range_points: int = 0
    carried_surfaces: int = 0
    days: List[str] = field(default_factory=list)

    def add_distribution(self, dist: "PnLDistribution") -> None:
        self.floors[dist.model] = self.floors.get(dist.model, 0) + dist.floor_count
        self.clamps += dist.clamp_count

    def to_dict(self) -> dict:
        return {'floors': dict(sorted(self.floors.items())), 'clamps': self.clamps,
                'skipped_quotes': self.skipped_quotes, 'arbitrage_violations': self.arbitrage_violations,
                'out_of_range_points': self.out_of_range_points, 'carried_surfaces': self.carried_surfaces,
                'n_days': len(self.days)}


# ----------------------------------------------------------
# Generadores aleatorios
# ----------------------------------------------------------

def price_rng(seed: int) -> np.random.Generator:
    """Flujo de los choques del subyacente; compartido por todos los modelos."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0]))


def scenario_rng(seed: int) -> np.random.Generator:
    """Flujo independiente para el muestreo de escenarios."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1]))


def day_seed(base_seed: int, day_index: int) -> int:
    """Semilla determinista de un día, independiente del orden de ejecución."""
    return int(np.random.SeedSequence([int(base_seed), int(day_index)]).generate_state(1)[0])


# ----------------------------------------------------------
# Operaciones
# ----------------------------------------------------------

def simulate_next_prices(S_t: float, p: GbmParams) -> np.ndarray:
    """S_{t+1} = S_t exp(mu - sigma^2/2 + sigma eps), eps ~ N(0, 1) i.i.d. por camino."""
    Validators.require(Validators.validar_positivo(S_t, "S_t"))
    eps = price_rng(p.seed).standard_normal(int(p.n_paths))
    return S_t * np.exp(p.mu - 0.5 * p.sigma ** 2 + p.sigma * eps)


def build_scenario_set(surfaces: Sequence[SplineSurface], as_of: Optional[date] = None) -> ScenarioSet:
    """
    Diferencias consecutivas de coeficientes entre las superficies fechadas hasta as_of.

    Raises:
        InsufficientHistory: menos de dos superficies disponibles
    """
    history = [s for s in surfaces if as_of is None or s.fit_date is None or s.fit_date <= as_of]
    if any(s.fit_date is None for s in history):
        ordered = list(history)
    else:
        ordered = sorted(history, key=lambda s: s.fit_date)
    if len(ordered) < 2:
        raise InsufficientHistory(f"{len(ordered)} superficies hasta {as_of}; se necesitan al menos 2")
    deltas = tuple(surface_delta(today, yesterday) for yesterday, today in zip(ordered, ordered[1:]))
    return ScenarioSet(deltas, as_of)


def _days_left(pos: Position, as_of: date) -> int:
    days = (pos.expiry - as_of).days
    if days <= 1:
        raise ExpiryTooNear(f"posición K={pos.strike} vence {pos.expiry}, a {days} días de {as_of}")
    return days


def next_day_vol(surface_t: SplineSurface, delta_j: SurfaceDelta, S_next: float, pos: Position, as_of: date) -> float:
    """
    Volatilidad del día siguiente bajo un escenario: superficie desplazada
    evaluada en m = S_next / K y tau - 1 día, con suelo 1e-6.
    """
    tau_next = _days_left(pos, as_of) / CALENDAR_DAYS - ONE_DAY
    shifted = apply_delta(surface_t, delta_j)
    value = eval_surface(shifted, S_next / pos.strike, tau_next)
    if value < VOL_FLOOR:
        logger.debug(f"volatilidad {value:.3e} con suelo aplicado para K={pos.strike}")
        return VOL_FLOOR
    return value


def aggregate_vol_distribution(per_scenario: Sequence[Sequence[float]], w) -> VolMixture:
    """
    Mezcla f = sum_i w_i f_i como conjunto ponderado de muestras.

    Args:
        per_scenario: Un vector de muestras de volatilidad por escenario
        w: WeightScheme o vector explícito de pesos
    """
    if not per_scenario or any(len(v) == 0 for v in per_scenario):
        raise ValidationError("todas las distribuciones por escenario deben tener muestras")
    if isinstance(w, WeightScheme):
        scenario_weights = w.weights(len(per_scenario))
    else:
        scenario_weights = np.asarray(w, dtype=float)
        if len(scenario_weights) != len(per_scenario):
            raise ValidationError(f"{len(scenario_weights)} pesos para {len(per_scenario)} escenarios")
        scenario_weights = scenario_weights / scenario_weights.sum()

    samples = np.concatenate([np.asarray(v, dtype=float) for v in per_scenario])
    weights = np.concatenate([np.full(len(v), wi / len(v)) for v, wi in zip(per_scenario, scenario_weights)])
    return VolMixture(samples, weights / weights.sum())


# ----------------------------------------------------------
# Arnés común de valoración (PSP y modelos de referencia)
# ----------------------------------------------------------

@dataclass
class _Book:
    strikes: np.ndarray
    quantities: np.ndarray
    tau_t: np.ndarray
    tau_next: np.ndarray


def _book(positions: Sequence[Position], as_of: date) -> _Book:
    days = np.array([_days_left(pos, as_of) for pos in positions], dtype=float)
    tau_t = days / CALENDAR_DAYS
    return _Book(np.array([p.strike for p in positions], dtype=float),
                 np.array([p.quantity for p in positions], dtype=float),
                 tau_t, tau_t - ONE_DAY)


def _floor(vols: np.ndarray) -> Tuple[np.ndarray, int]:
    below = vols < VOL_FLOOR
    return np.where(below, VOL_FLOOR, vols), int(np.sum(below))


def portfolio_pnl_samples(book: _Book, S_t: float, S_next: np.ndarray, vols_t: np.ndarray,
                          vols_next: np.ndarray, rate: float) -> np.ndarray:
    """
    Suma de quantity * (C_{t+1} - C_t) por muestra.

    vols_next tiene forma (n_muestras, n_posiciones); S_next (n_muestras,).
    """
    c_t = call_price_array(S_t, book.strikes, rate, book.tau_t, vols_t)
    c_next = call_price_array(S_next[:, None], book.strikes[None, :], rate, book.tau_next[None, :], vols_next)
    return (c_next - c_t[None, :]) @ book.quantities


def surface_vols_today(surface_t: SplineSurface, positions: Sequence[Position], S_t: float, as_of: date) -> np.ndarray:
    """Volatilidad de hoy de cada posición leída de la superficie ajustada."""
    book = _book(positions, as_of)
    vols = eval_surface(surface_t, S_t / book.strikes, book.tau_t)
    return np.maximum(vols, VOL_FLOOR)


def psp_pnl(portfolio: Sequence[Position], surfaces: Sequence[SplineSurface], chain_t, p: GbmParams,
            w: WeightScheme, params, pairing: str = "sampled") -> PnLDistribution:
    """
    Distribución PSP del PnL a un día.

    Cada camino MC se empareja con un escenario muestreado según los pesos
    ('sampled', n_paths muestras) o se cruza con todos ('cross',
    n_paths x n_escenarios muestras ponderadas).

    Args:
        portfolio: Posiciones activas
        surfaces: Historia de superficies; la última con fecha <= hoy es la de hoy
        chain_t: OptionChain de hoy (fecha y precio del subyacente)
        p: Parámetros GBM por paso
        w: Esquema de pesos de los escenarios
        params: MarketParams (r constante en el horizonte)
        pairing: 'sampled' o 'cross'
    """
    if pairing not in PAIRING_MODES:
        raise ValidationError(f"modo de emparejamiento desconocido: {pairing}")
    as_of, S_t = chain_t.quote_date, chain_t.underlying_price
    history = [s for s in surfaces if s.fit_date is None or s.fit_date <= as_of]
    scenarios = build_scenario_set(history, as_of)
    surface_t = history[-1] if any(s.fit_date is None for s in history) else max(history, key=lambda s: s.fit_date)

    S_next = simulate_next_prices(S_t, p)
    if not portfolio:
        return PnLDistribution(np.zeros(len(S_next)), as_of, model="psp")

    book = _book(portfolio, as_of)
    rate = params.risk_free_rate
    vols_t = surface_vols_today(surface_t, portfolio, S_t, as_of)
    weights = w.weights(len(scenarios), scenarios.magnitudes())
    dstack = scenarios.stack()
    base_coeffs = surface_t.coeffs

    if pairing == "sampled":
        picks = scenario_rng(p.seed).choice(len(scenarios), size=len(S_next), p=weights)
        n_rows = len(S_next)
    else:
        picks = None
        n_rows = len(S_next) * len(scenarios)

    vols_next = np.empty((n_rows, len(portfolio)))
    clamped = 0
    for i in range(len(portfolio)):
        m_next = S_next / book.strikes[i]
        bm = basis_matrix(surface_t.knots_m, m_next)
        bt = basis_matrix(surface_t.knots_t, book.tau_next[i])[0]
        clamped += out_of_range_count(surface_t, m_next, book.tau_next[i])
        base = bm @ (base_coeffs @ bt)
        shift_by_scenario = dstack @ bt
        if picks is not None:
            vols_next[:, i] = base + np.einsum('pk,pk->p', bm, shift_by_scenario[picks])
        else:
            vols_next[:, i] = (base[:, None] + bm @ shift_by_scenario.T).ravel()

    vols_next, floors = _floor(vols_next)
    if picks is not None:
        spots, sample_weights = S_next, None
    else:
        spots = np.repeat(S_next, len(scenarios))
        sample_weights = np.tile(weights, len(S_next))
    samples = portfolio_pnl_samples(book, S_t, spots, vols_t, vols_next, rate)

    if floors:
        logger.warning(f"{as_of}: suelo de volatilidad aplicado {floors} veces (psp)")
    if clamped:
        logger.debug(f"{as_of}: {clamped} evaluaciones recortadas al rango de la superficie")
    return PnLDistribution(samples, as_of, sample_weights, "psp", floors, clamped)


def run_benchmark(portfolio: Sequence[Position], chain_t, p: GbmParams, params, model: str,
                  vol_shift: Callable[[np.ndarray, int], Tuple[np.ndarray, int]],
                  frozen_spot: bool = False) -> PnLDistribution:
    """
    Arnés compartido por los modelos de referencia.

    vol_shift recibe las vols de hoy (n_posiciones,) y el número de caminos,
    y devuelve las vols de mañana (n_caminos, n_posiciones) con el número de suelos aplicados.
    """
    as_of, S_t = chain_t.quote_date, chain_t.underlying_price
    S_next = simulate_next_prices(S_t, p)
    if frozen_spot:
        S_next = np.full_like(S_next, S_t)
    if not portfolio:
        return PnLDistribution(np.zeros(len(S_next)), as_of, model=model)
    book = _book(portfolio, as_of)
    vols_t = np.maximum(np.array([pos.entry_vol for pos in portfolio], dtype=float), VOL_FLOOR)
    vols_next, floors = vol_shift(vols_t, len(S_next))
    samples = portfolio_pnl_samples(book, S_t, S_next, vols_t, vols_next, params.risk_free_rate)
    if floors:
        logger.warning(f"{as_of}: suelo de volatilidad aplicado {floors} veces ({model})")
    return PnLDistribution(samples, as_of, None, model, floors, 0)


# ----------------------------------------------------------
# Diagnóstico de correlación y calibración del GBM
# ----------------------------------------------------------

def vol_price_correlation(vol_series: Sequence[float], price_series: Sequence[float]) -> float:
    """
    Correlación de Pearson entre rendimientos diarios de la volatilidad
    implícita de una opción y los del subyacente.

    Raises:
        UndefinedStatistic: alguna serie de rendimientos con varianza nula
    """
    vol = np.asarray(vol_series, dtype=float)
    price = np.asarray(price_series, dtype=float)
    if len(vol) != len(price) or len(vol) < 3:
        raise ValidationError("las series deben tener igual longitud >= 3")
    vol_ret = vol[1:] / vol[:-1] - 1.0
    price_ret = price[1:] / price[:-1] - 1.0
    if np.std(vol_ret) == 0 or np.std(price_ret) == 0:
        raise UndefinedStatistic("correlación indefinida: serie de rendimientos con varianza nula")
    rho = float(np.corrcoef(vol_ret, price_ret)[0, 1])
    return float(np.clip(rho, -1.0, 1.0))


def estimate_gbm_params(prices: Sequence[float], params, n_paths: int = 1000, seed: int = 0) -> GbmParams:
    """GBM por paso con mu = (r - q) / días y sigma muestral de los log-rendimientos históricos."""
    prices = np.asarray(prices, dtype=float)
    if len(prices) < 3:
        raise InsufficientHistory("se necesitan al menos 3 precios para estimar sigma")
    sigma = float(np.std(np.diff(np.log(prices)), ddof=1))
    return GbmParams(params.daily_drift, sigma, n_paths, seed)
