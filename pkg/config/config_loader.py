"""
Cargador de configuración desde archivos externos.

Fusiona un JSON de usuario sobre los valores por defecto de
`config.settings`, aplica modificaciones `seccion.clave=valor` de la línea
de comandos y construye un `RunConfig` tipado.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import MODELS, SCHEMA_VERSION, default_config
from core.psp_engine import PAIRING_MODES, GbmParams, WeightScheme
from core.surface import make_knots
from modules.market_data import FilterConfig, MarketParams
from utils.errors import ConfigError
from utils.logger import get_logger
from utils.validators import ValidationError, Validators

logger = get_logger('ConfigLoader')


@dataclass(frozen=True)
class SurfaceLayout:
    """Rango y número de cortes de la malla de nudos en cada eje."""
    m_min: float = 0.7
    m_max: float = 1.3
    n_breaks_m: int = 8
    tau_min: float = 15 / 365.0
    tau_max: float = 2.0
    n_breaks_t: int = 8
    ridge: float = 1e-6
    arbitrage_diagnostics: bool = True

    def __post_init__(self):
        if not self.m_min < self.m_max or not self.tau_min < self.tau_max:
            raise ValidationError("rangos de la superficie vacíos")
        if self.n_breaks_m < 2 or self.n_breaks_t < 2:
            raise ValidationError("se necesitan al menos 2 cortes por eje")
        Validators.require(Validators.validar_no_negativo(self.ridge, "ridge"))

    def knots_m(self) -> np.ndarray:
        return make_knots(self.m_min, self.m_max, self.n_breaks_m)

    def knots_t(self) -> np.ndarray:
        return make_knots(self.tau_min, self.tau_max, self.n_breaks_t)


@dataclass(frozen=True)
class GbmSettings:
    mu: Optional[float] = None
    sigma: float = 0.05
    sigma_source: str = "fixed"
    n_paths: int = 1000
    pairing: str = "sampled"

    def __post_init__(self):
        if self.sigma_source not in ("fixed", "historical"):
            raise ValidationError(f"sigma_source desconocido: {self.sigma_source}")
        if self.pairing not in PAIRING_MODES:
            raise ValidationError(f"pairing desconocido: {self.pairing}")
        GbmParams(0.0, self.sigma, self.n_paths)

    def params(self, market: MarketParams, seed: int, sigma: Optional[float] = None) -> GbmParams:
        mu = market.daily_drift if self.mu is None else self.mu
        return GbmParams(mu, self.sigma if sigma is None else sigma, self.n_paths, seed)


@dataclass(frozen=True)
class RunConfig:
    """Configuración tipada de una ejecución completa."""
    output_dir: Path
    chain_csv: Optional[Path] = None
    vix_csv: Optional[Path] = None
    filter: FilterConfig = FilterConfig()
    market: MarketParams = MarketParams()
    gbm: GbmSettings = GbmSettings()
    surface: SurfaceLayout = SurfaceLayout()
    weights: WeightScheme = WeightScheme()
    levels: Tuple[float, ...] = (0.90, 0.95)
    models: Tuple[str, ...] = tuple(MODELS)
    seed: int = 42
    workers: int = 4
    n_options: int = 100
    max_quantity: int = 10
    portfolio_seed: int = 11
    vix_shock: str = "additive"
    frozen_spot: bool = False
    dm_error_kind: str = "exceedance"
    penalty_kappa: float = 1.0
    harvey_correction: bool = False
    synth: Dict[str, Any] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.models:
            raise ValidationError("la lista de modelos está vacía")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown:
            raise ValidationError(f"modelos desconocidos: {unknown}")
        if not self.levels:
            raise ValidationError("no hay niveles de confianza")
        for alpha in self.levels:
            Validators.require(Validators.validar_probabilidad(alpha), "confidence_levels")
        if self.workers < 1:
            raise ValidationError("workers debe ser >= 1")
        if self.vix_shock not in ("additive", "proportional"):
            raise ValidationError(f"vix_shock desconocido: {self.vix_shock}")
        if self.dm_error_kind not in ("exceedance", "all", "pinball"):
            raise ValidationError(f"dm_error_kind desconocido: {self.dm_error_kind}")
        Validators.require(Validators.validar_no_negativo(self.penalty_kappa, "penalty_kappa"))
        if self.weights.kind == "custom":
            raise ValidationError("pesos 'custom' no admitidos en una ejecución: el número de escenarios crece cada día")


def deep_merge(base: Dict[str, Any], override: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Fusiona override sobre base recursivamente; las claves desconocidas son un error."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        ruta = f"{prefix}{key}"
        if key not in merged:
            raise ConfigError(f"clave de configuración desconocida: {ruta}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = deep_merge(merged[key], value, ruta + ".")
        else:
            merged[key] = value
    return merged


def _parse_value(texto: str):
    try:
        return json.loads(texto)
    except json.JSONDecodeError:
        return texto


class ConfigLoader:
    """Carga configuración desde archivos JSON."""

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path else None
        self.default_config = default_config()

    def load(self, overrides: Sequence[str] = ()) -> Dict[str, Any]:
        """Configuración por defecto, fusionada con el archivo y las modificaciones."""
        config = self.default_config
        if self.path is not None:
            config = deep_merge(config, self._read(self.path))
        if overrides:
            config = self.apply_overrides(config, overrides)
        return config

    def _read(self, path: Path) -> Dict[str, Any]:
        if not path.exists():
            raise ConfigError(f"archivo de configuración no encontrado: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                user_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON inválido en {path}: {e}") from e
        if not isinstance(user_config, dict):
            raise ConfigError(f"{path}: se esperaba un objeto JSON")
        version = user_config.get('schema_version', SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {version} no soportada (se espera {SCHEMA_VERSION})")
        logger.info(f"Configuración cargada desde {path}")
        return user_config

    @staticmethod
    def apply_overrides(config: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
        """Aplica modificaciones 'seccion.clave=valor'; el valor se interpreta como JSON si es posible."""
        config = copy.deepcopy(config)
        for item in overrides:
            if '=' not in item:
                raise ConfigError(f"modificación sin '=': {item}")
            ruta, texto = item.split('=', 1)
            partes = ruta.strip().split('.')
            nodo = config
            for parte in partes[:-1]:
                if not isinstance(nodo.get(parte), dict):
                    raise ConfigError(f"sección desconocida en {ruta}")
                nodo = nodo[parte]
            if partes[-1] not in nodo:
                raise ConfigError(f"clave de configuración desconocida: {ruta}")
            nodo[partes[-1]] = _parse_value(texto)
            logger.debug(f"Modificación aplicada: {ruta}={texto}")
        return config

    @staticmethod
    def build(config: Dict[str, Any]) -> RunConfig:
        """Construye el RunConfig tipado; cualquier valor inválido es ConfigError."""
        try:
            paths = config['paths']
            weights = config['weights']
            custom = weights.get('custom')
            return RunConfig(
                output_dir=Path(paths['output_dir']),
                chain_csv=Path(paths['chain_csv']) if paths.get('chain_csv') else None,
                vix_csv=Path(paths['vix_csv']) if paths.get('vix_csv') else None,
                filter=FilterConfig(**config['filter']),
                market=MarketParams(**config['market']),
                gbm=GbmSettings(**config['gbm']),
                surface=SurfaceLayout(**config['surface']),
                weights=WeightScheme(weights['kind'], float(weights.get('lam') or 0.0),
                                     tuple(custom) if custom else None),
                levels=tuple(float(a) for a in config['backtest']['confidence_levels']),
                models=tuple(config['models']),
                seed=int(config['seed']),
                workers=int(config['workers']),
                n_options=int(config['portfolio']['n_options']),
                max_quantity=int(config['portfolio']['max_quantity']),
                portfolio_seed=int(config['portfolio']['seed']),
                vix_shock=config['benchmarks']['vix_shock'],
                frozen_spot=bool(config['benchmarks']['frozen_spot']),
                dm_error_kind=config['backtest']['dm_error_kind'],
                penalty_kappa=float(config['backtest']['penalty_kappa']),
                harvey_correction=bool(config['backtest']['harvey_correction']),
                synth=dict(config['synth']),
                raw=copy.deepcopy(config),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"configuración inválida: {e}") from e

    @staticmethod
    def save(config: Dict[str, Any], path) -> Path:
        """Guarda una configuración como JSON legible."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(config, f, indent=2, ensure_ascii=False)
        logger.info(f"Configuración guardada en {path}")
        return path


def load_run_config(path: Optional[str] = None, overrides: List[str] = ()) -> RunConfig:
    loader = ConfigLoader(path)
    return loader.build(loader.load(overrides))
