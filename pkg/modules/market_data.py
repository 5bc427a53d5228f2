"""
Datos de mercado - Cotizaciones de calls, cadenas diarias, parámetros de mercado y VIX
"""

import math
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from core.bsm import implied_vol, lower_bound
from core.surface import VolPoint
from utils.errors import ChainParseError, DataIOError, NumericError
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger("market_data")

CALENDAR_DAYS = 365.0
CHAIN_COLUMNS = ["quote_date", "expiry_date", "strike", "bid", "ask", "underlying_price"]
VIX_COLUMNS = ["date", "level"]


@dataclass(frozen=True)
class OptionQuote:
    """Una observación de mercado de una call europea."""
    quote_date: date
    expiry_date: date
    strike: float
    bid: float
    ask: float
    underlying_price: float

    def __post_init__(self):
        Validators.require(Validators.validar_cotizacion(
            self.bid, self.ask, self.strike, self.underlying_price,
            self.quote_date, self.expiry_date))

    @property
    def days_to_expiry(self) -> int:
        return (self.expiry_date - self.quote_date).days

    @property
    def ttm(self) -> float:
        """Fracción de año calendario hasta el vencimiento."""
        return self.days_to_expiry / CALENDAR_DAYS

    @property
    def key(self) -> Tuple[date, float]:
        return (self.expiry_date, self.strike)


@dataclass(frozen=True)
class OptionChain:
    """Conjunto ordenado de cotizaciones de una misma fecha."""
    quote_date: date
    quotes: Tuple[OptionQuote, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'quotes', tuple(self.quotes))
        seen = set()
        for q in self.quotes:
            if q.quote_date != self.quote_date:
                raise ValidationError(f"cotización con fecha {q.quote_date} en cadena del {self.quote_date}")
            if q.key in seen:
                raise ValidationError(f"par (expiry, strike) duplicado {q.key} en {self.quote_date}")
            seen.add(q.key)

    def __len__(self):
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)

    @property
    def underlying_price(self) -> float:
        if not self.quotes:
            raise ValidationError(f"cadena vacía del {self.quote_date}: sin precio del subyacente")
        return self.quotes[0].underlying_price

    def by_key(self) -> Dict[Tuple[date, float], OptionQuote]:
        return {q.key: q for q in self.quotes}


@dataclass(frozen=True)
class FilterConfig:
    """Criterios de exclusión de cotizaciones."""
    min_days_to_expiry: int = 15
    min_mid_price: float = 1.00
    enforce_lower_bound: bool = True

    def __post_init__(self):
        Validators.require(Validators.validar_no_negativo(self.min_days_to_expiry, "min_days_to_expiry"))
        Validators.require(Validators.validar_no_negativo(self.min_mid_price, "min_mid_price"))


@dataclass(frozen=True)
class MarketParams:
    """Tipo libre de riesgo y rendimiento por dividendos, anualizados."""
    risk_free_rate: float = 0.1406
    dividend_yield: float = 0.0194
    trading_days_per_year: int = 252

    def __post_init__(self):
        Validators.require(Validators.validar_positivo(self.trading_days_per_year, "trading_days_per_year"))

    @property
    def daily_drift(self) -> float:
        """Deriva por paso mu = (r - q) / días de negociación."""
        return (self.risk_free_rate - self.dividend_yield) / self.trading_days_per_year


@dataclass(frozen=True)
class VixSeries:
    """Serie fechada de niveles del VIX como volatilidades decimales."""
    dates: Tuple[date, ...] = ()
    levels: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'dates', tuple(self.dates))
        object.__setattr__(self, 'levels', tuple(float(v) for v in self.levels))
        if len(self.dates) != len(self.levels):
            raise ValidationError("VixSeries: fechas y niveles de distinta longitud")
        for nivel in self.levels:
            Validators.require(Validators.validar_positivo(nivel, "nivel VIX"))
        Validators.require(Validators.validar_fechas_crecientes(self.dates, "fechas VIX"))

    def up_to(self, as_of: date) -> "VixSeries":
        """Subserie con observaciones en o antes de as_of."""
        n = sum(1 for d in self.dates if d <= as_of)
        return VixSeries(self.dates[:n], self.levels[:n])


def mid_price(q: OptionQuote) -> float:
    """Precio medio (bid + ask) / 2."""
    return (q.bid + q.ask) / 2.0


def passes_filter(q: OptionQuote, cfg: FilterConfig, params: MarketParams) -> bool:
    """Indica si una cotización supera los tres criterios de exclusión."""
    if q.days_to_expiry < cfg.min_days_to_expiry:
        return False
    mid = mid_price(q)
    if mid < cfg.min_mid_price:
        return False
    if cfg.enforce_lower_bound:
        bound = float(lower_bound(q.underlying_price, q.strike, params.risk_free_rate, q.ttm))
        if mid < bound:
            return False
    return True


def filter_chain(chain: OptionChain, cfg: FilterConfig, params: MarketParams) -> OptionChain:
    """
    Subsecuencia de la cadena que supera todos los filtros.

    Excluye vencimientos cercanos, precios medios bajos y, si está activado,
    precios por debajo de la cota inferior BSM max(S - K e^(-r tau), 0).
    """
    kept = [q for q in chain.quotes if passes_filter(q, cfg, params)]
    removed = len(chain) - len(kept)
    if removed:
        logger.debug(f"{chain.quote_date}: {removed} cotizaciones excluidas por filtros")
    return OptionChain(chain.quote_date, tuple(kept))


def _parse_date(valor: str, campo: str, linea: int) -> date:
    try:
        return date.fromisoformat(valor.strip())
    except (ValueError, AttributeError):
        raise ChainParseError(f"{campo} no es una fecha ISO-8601: {valor!r}", linea)


def _parse_float(valor: str, campo: str, linea: int) -> float:
    try:
        numero = float(valor)
    except (TypeError, ValueError):
        raise ChainParseError(f"{campo} no es un número: {valor!r}", linea)
    if not math.isfinite(numero):
        raise ChainParseError(f"{campo} no es finito: {valor!r}", linea)
    return numero


def _read_csv(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataIOError(f"archivo no encontrado: {path}")
    if path.stat().st_size == 0:
        return pd.DataFrame(columns=list(columns))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ChainParseError(f"{path}: CSV mal formado ({e})", int(match.group(1)) if match else 0) from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ChainParseError(f"faltan columnas {missing} en la cabecera", 1)
    return frame


def load_chain(path) -> List[OptionChain]:
    """
    Carga un CSV de cadenas: una OptionChain por quote_date, en orden de fecha.

    Las filas duplicadas (expiry, strike) de una fecha conservan la primera.

    Raises:
        ChainParseError: fila mal formada o que viola un invariante (ask < bid), con número de línea
    """
    frame = _read_csv(path, CHAIN_COLUMNS)
    por_fecha: Dict[date, List[OptionQuote]] = {}
    claves: Dict[date, set] = {}

    for idx, row in enumerate(frame.itertuples(index=False)):
        linea = idx + 2
        registro = row._asdict()
        quote_date = _parse_date(registro["quote_date"], "quote_date", linea)
        expiry = _parse_date(registro["expiry_date"], "expiry_date", linea)
        numeros = {c: _parse_float(registro[c], c, linea) for c in ("strike", "bid", "ask", "underlying_price")}
        try:
            quote = OptionQuote(quote_date, expiry, numeros["strike"], numeros["bid"],
                                numeros["ask"], numeros["underlying_price"])
        except ValidationError as e:
            raise ChainParseError(f"{path}: {e}", linea) from e

        vistos = claves.setdefault(quote_date, set())
        if quote.key in vistos:
            logger.warning(f"línea {linea}: cotización duplicada {quote.key} del {quote_date}, se conserva la primera")
            continue
        vistos.add(quote.key)
        por_fecha.setdefault(quote_date, []).append(quote)

    chains = [OptionChain(d, tuple(qs)) for d, qs in sorted(por_fecha.items())]
    logger.info(f"Cargadas {len(chains)} cadenas ({len(frame)} filas) desde {path}")
    return chains


def load_vix(path) -> VixSeries:
    """Carga un CSV date,level; los niveles se dividen entre 100."""
    frame = _read_csv(path, VIX_COLUMNS)
    fechas, niveles = [], []
    for idx, row in enumerate(frame.itertuples(index=False)):
        linea = idx + 2
        fechas.append(_parse_date(row.date, "date", linea))
        niveles.append(_parse_float(row.level, "level", linea) / 100.0)
    return VixSeries(tuple(fechas), tuple(niveles))


def write_chains_csv(chains: Sequence[OptionChain], path) -> Path:
    """Escribe cadenas en el esquema CSV de entrada (decimales con repr exacto)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(",".join(CHAIN_COLUMNS) + "\n")
        for chain in chains:
            for q in chain.quotes:
                f.write(f"{q.quote_date.isoformat()},{q.expiry_date.isoformat()},{q.strike!r},"
                        f"{q.bid!r},{q.ask!r},{q.underlying_price!r}\n")
    return path


def write_vix_csv(vix: VixSeries, path) -> Path:
    """Escribe la serie VIX en puntos de índice."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(",".join(VIX_COLUMNS) + "\n")
        for d, v in zip(vix.dates, vix.levels):
            f.write(f"{d.isoformat()},{v * 100.0!r}\n")
    return path


def chain_to_vol_points(chain: OptionChain, params: MarketParams):
    """
    Convierte una cadena en puntos (moneyness S/K, tau, sigma) de la superficie.

    Returns:
        Tuple[list, int]: puntos VolPoint y número de cotizaciones descartadas
    """
    points, skipped = [], 0
    for q in chain.quotes:
        try:
            sigma = implied_vol(mid_price(q), q.underlying_price, q.strike, params.risk_free_rate, q.ttm)
        except NumericError as e:
            skipped += 1
            logger.debug(f"{chain.quote_date} K={q.strike} T={q.expiry_date}: inversión descartada ({e})")
            continue
        points.append(VolPoint(q.underlying_price / q.strike, q.ttm, sigma))
    if skipped:
        logger.warning(f"{chain.quote_date}: {skipped} cotizaciones sin volatilidad implícita")
    return points, skipped


def vol_points_arrays(points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columnas (m, tau, sigma) como arrays de numpy."""
    if not points:
        return np.empty(0), np.empty(0), np.empty(0)
    data = np.array([(p.moneyness, p.ttm, p.vol) for p in points], dtype=float)
    return data[:, 0], data[:, 1], data[:, 2]
