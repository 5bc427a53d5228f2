"""
Configuración centralizada del proyecto

Valores por defecto de todas las secciones del archivo de configuración
de una ejecución. `config init` vuelca estos diccionarios como JSON.
"""

import copy

from utils.logger import get_logger

logger = get_logger("settings")

SCHEMA_VERSION = 1

# Configuración de la aplicación
APP_CONFIG = {
    'name': 'Motor de riesgo PSP',
    'version': '1.0.0',
    'description': 'VaR de carteras de opciones con proyección de la superficie de volatilidad',
}

# Filtros de cotizaciones
FILTER_CONFIG = {
    'min_days_to_expiry': 15,
    'min_mid_price': 1.00,
    'enforce_lower_bound': True,
}

# Parámetros de mercado anualizados (r tal como aparece en la fuente de datos)
MARKET_CONFIG = {
    'risk_free_rate': 0.1406,
    'dividend_yield': 0.0194,
    'trading_days_per_year': 252,
}

# Monte Carlo del subyacente (parámetros por paso diario)
GBM_CONFIG = {
    'mu': None,                 # None: (r - q) / trading_days_per_year
    'sigma': 0.05,              # muy holgado frente al generador sintético (ver README)
    'sigma_source': 'fixed',    # 'fixed' | 'historical'
    'n_paths': 1000,
    'pairing': 'sampled',       # 'sampled' | 'cross'
}

# Malla de nudos de la superficie
SURFACE_CONFIG = {
    'm_min': 0.7,
    'm_max': 1.3,
    'n_breaks_m': 8,
    'tau_min': 15 / 365.0,
    'tau_max': 2.0,
    'n_breaks_t': 8,
    'ridge': 1e-6,
    'arbitrage_diagnostics': True,
}

# Ponderación de escenarios
WEIGHT_CONFIG = {
    'kind': 'uniform',          # 'uniform' | 'exponential' | 'stress' | 'custom'
    'lam': 0.05,
    'custom': None,
}

# Cartera aleatoria de compra y mantenimiento
PORTFOLIO_CONFIG = {
    'n_options': 100,
    'max_quantity': 10,
    'seed': 11,
}

# Modelos de referencia
BENCHMARK_CONFIG = {
    'vix_shock': 'additive',    # 'additive' | 'proportional'
    'frozen_spot': False,
}

# Backtesting
BACKTEST_CONFIG = {
    'confidence_levels': [0.90, 0.95],
    'dm_error_kind': 'exceedance',  # 'exceedance' | 'all' | 'pinball'
    'penalty_kappa': 1.0,
    'harvey_correction': False,
}

# Generador de datos sintéticos
SYNTH_CONFIG = {
    'seed': 7,
    'n_days': 124,
    'start_date': '2013-01-03',
    'spot': 1460.0,
    'strike_step': 40.0,
    'strike_span': 0.2,
    'n_expiries': 18,
}

# Rutas de entrada y salida
PATHS_CONFIG = {
    'chain_csv': None,          # None: se generan datos sintéticos en memoria
    'vix_csv': None,
    'output_dir': 'salida',
}

# Formato del informe Word
REPORT_FORMAT = {
    'titulo': 'Informe de backtesting de VaR',
    'fuente_texto': 'Times New Roman',
    'tamaño_texto': 11,
    'fuente_titulo': 'Times New Roman',
    'estilo_tabla': 'Table Grid',
}

MODELS = ['psp', 'const_vol', 'vix']


def default_config() -> dict:
    """Configuración completa por defecto, lista para serializar."""
    return copy.deepcopy({
        'schema_version': SCHEMA_VERSION,
        'seed': 42,
        'workers': 4,
        'models': MODELS,
        'paths': PATHS_CONFIG,
        'filter': FILTER_CONFIG,
        'market': MARKET_CONFIG,
        'gbm': GBM_CONFIG,
        'surface': SURFACE_CONFIG,
        'weights': WEIGHT_CONFIG,
        'portfolio': PORTFOLIO_CONFIG,
        'benchmarks': BENCHMARK_CONFIG,
        'backtest': BACKTEST_CONFIG,
        'synth': SYNTH_CONFIG,
    })


def validate_config():
    """Valida los valores por defecto al inicio"""
    errors = []

    if SURFACE_CONFIG['m_min'] >= SURFACE_CONFIG['m_max']:
        errors.append("rango de moneyness vacío")
    if SURFACE_CONFIG['tau_min'] >= SURFACE_CONFIG['tau_max']:
        errors.append("rango de vencimientos vacío")
    for alpha in BACKTEST_CONFIG['confidence_levels']:
        if not 0 < alpha < 1:
            errors.append(f"nivel de confianza {alpha} fuera de (0, 1)")
    if GBM_CONFIG['n_paths'] < 1:
        errors.append("n_paths debe ser >= 1")

    if errors:
        logger.warning(f"Errores en configuración: {errors}")
    else:
        logger.debug("Configuración validada correctamente")

    return len(errors) == 0


# Inicialización
if __name__ != "__main__":
    validate_config()
