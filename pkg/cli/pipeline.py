"""
Pipeline de ejecución completa

Carga (o genera) las cadenas, ajusta una superficie por día, forma la
cartera, evalúa cada modelo día a día, calcula VaR/ES, ejecuta el backtest
y escribe todos los artefactos junto con un manifiesto.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.config_loader import RunConfig
from config.settings import SCHEMA_VERSION
from core.backtest import build_backtest_report, level_key, save_backtest_report
from core.benchmarks import const_vol_pnl, vix_pnl
from core.psp_engine import (GbmParams, PnLDistribution, RunReport, day_seed, estimate_gbm_params,
                             psp_pnl)
from core.risk import VarReport, var_report
from core.surface import (SplineSurface, fit_surface, inside_knot_range, load_surface, save_surface,
                          static_arbitrage_diagnostics, surface_fit_report)
from modules.market_data import (OptionChain, VixSeries, chain_to_vol_points, filter_chain, load_chain,
                                 load_vix, vol_points_arrays)
from modules.portfolio import (active_positions, mark_positions, portfolio_value, random_portfolio,
                               realized_pnl)
from modules.report_document import write_backtest_docx
from modules.synthetic import synth_from_config
from utils.errors import DataIOError, IllConditioned, InsufficientHistory
from utils.logger import get_logger, log_action, log_performance

logger = get_logger("pipeline")

MANIFEST = "manifest.json"
ARBITRAGE_M_GRID = np.linspace(0.8, 1.2, 9)
ARBITRAGE_TAU_GRID = np.array([30, 60, 91, 182, 365]) / 365.0


@dataclass
class MarketData:
    raw: List[OptionChain]
    filtered: List[OptionChain]
    vix: Optional[VixSeries]


@dataclass
class FitResult:
    surface: Optional[SplineSurface]
    skipped: int
    arbitrage_violations: int
    out_of_range: int
    fit_date: date


@dataclass
class DayResult:
    as_of: date
    target: date
    realized: float
    value: float
    n_positions: int
    seed: int = 0
    distributions: Dict[str, PnLDistribution] = field(default_factory=dict)
    reports: Dict[str, List[VarReport]] = field(default_factory=dict)

    @property
    def ret(self) -> float:
        return self.realized / self.value


# ----------------------------------------------------------
# Escritura de artefactos
# ----------------------------------------------------------

def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True)
    return path


def write_pnl_csv(dist: PnLDistribution, path: Path) -> Path:
    """Una muestra por fila, cabecera `pnl` (y `weight` si la distribución es ponderada)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        if dist.weights is None:
            f.write("pnl\n")
            f.writelines(f"{float(v)!r}\n" for v in dist.samples)
        else:
            f.write("pnl,weight\n")
            f.writelines(f"{float(v)!r},{float(w)!r}\n" for v, w in zip(dist.samples, dist.weights))
    return path


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.exists():
        raise DataIOError(f"ejecución incompleta: falta {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


# ----------------------------------------------------------
# Pipeline
# ----------------------------------------------------------

class RiskPipeline:
    """Ejecuta las etapas de una corrida según un RunConfig."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.output_dir = Path(cfg.output_dir)
        self.run_report = RunReport()
        self.artifacts: Dict[str, List[str]] = {}

    def _record(self, kind: str, path: Path):
        self.artifacts.setdefault(kind, []).append(path.relative_to(self.output_dir).as_posix())

    # -- datos ---------------------------------------------------------

    def load_market(self) -> MarketData:
        cfg = self.cfg
        if cfg.chain_csv is None:
            log_action("pipeline", "datos sintéticos", f"semilla {cfg.synth['seed']}, {cfg.synth['n_days']} días")
            raw, vix = synth_from_config(cfg.synth, cfg.market, cfg.filter)
        else:
            raw = load_chain(cfg.chain_csv)
            vix = load_vix(cfg.vix_csv) if cfg.vix_csv else None
        if 'vix' in cfg.models and vix is None:
            raise DataIOError("el modelo 'vix' necesita paths.vix_csv")
        filtered = [filter_chain(c, cfg.filter, cfg.market) for c in raw]
        if len(raw) < 3:
            raise InsufficientHistory(f"{len(raw)} días de cadenas; se necesitan al menos 3")
        return MarketData(raw, filtered, vix)

    # -- superficies -----------------------------------------------------

    def _fit_day(self, chain: OptionChain) -> FitResult:
        cfg = self.cfg
        knots_m, knots_t = cfg.surface.knots_m(), cfg.surface.knots_t()
        points, skipped = chain_to_vol_points(chain, cfg.market)
        m, tau, _ = vol_points_arrays(points)
        outside = int(np.sum(~inside_knot_range(knots_m, knots_t, m, tau)))
        try:
            surface = fit_surface(points, knots_m, knots_t, cfg.surface.ridge, chain.quote_date)
        except IllConditioned as e:
            logger.warning(f"{chain.quote_date}: ajuste imposible ({e})")
            return FitResult(None, skipped, 0, outside, chain.quote_date)
        violations = 0
        if cfg.surface.arbitrage_diagnostics:
            report = static_arbitrage_diagnostics(surface, ARBITRAGE_M_GRID, ARBITRAGE_TAU_GRID,
                                                  chain.underlying_price, cfg.market.risk_free_rate)
            violations = report.n_violations
        return FitResult(surface, skipped, violations, outside, chain.quote_date)

    def _carry_forward(self, results: List[FitResult]) -> List[SplineSurface]:
        """Un día sin ajuste reutiliza la superficie anterior con la fecha del día."""
        surfaces = []
        for fit in results:
            if fit.surface is None:
                if not surfaces:
                    raise IllConditioned(f"{fit.fit_date}: primer día sin superficie que arrastrar")
                logger.warning(f"{fit.fit_date}: se arrastra la superficie del {surfaces[-1].fit_date}")
                fit.surface = replace(surfaces[-1], fit_date=fit.fit_date, residual_norm=0.0, n_points=0)
                self.run_report.carried_surfaces += 1
            surfaces.append(fit.surface)
        return surfaces

    def fit_surfaces(self, market: MarketData) -> List[SplineSurface]:
        """Ajusta y guarda una superficie por día; el orden de salida es el de las fechas."""
        inicio = time.time()
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            results = list(pool.map(self._fit_day, market.filtered))
        surfaces = self._carry_forward(results)

        rows = []
        for fit in results:
            s = fit.surface
            path = save_surface(s, self.output_dir / "surfaces" / f"surface_{s.fit_date.isoformat()}.json")
            self._record("surfaces", path)
            self.run_report.skipped_quotes += fit.skipped
            self.run_report.arbitrage_violations += fit.arbitrage_violations
            self.run_report.out_of_range_points += fit.out_of_range
            rows.append({**surface_fit_report(s), 'skipped_quotes': fit.skipped,
                         'out_of_range_points': fit.out_of_range,
                         'arbitrage_violations': fit.arbitrage_violations})
        report_path = self.output_dir / "surfaces" / "fit_report.csv"
        pd.DataFrame(rows).to_csv(report_path, index=False)
        self._record("reports", report_path)
        log_performance("pipeline", "ajuste de superficies", time.time() - inicio, f"{len(results)} días")
        return surfaces

    # -- modelos ---------------------------------------------------------

    def _gbm_for_day(self, market: MarketData, t: int) -> GbmParams:
        cfg = self.cfg
        seed = day_seed(cfg.seed, t)
        if cfg.gbm.sigma_source == "historical" and t >= 2:
            prices = [c.underlying_price for c in market.raw[:t + 1]]
            estimated = estimate_gbm_params(prices, cfg.market, cfg.gbm.n_paths, seed)
            return cfg.gbm.params(cfg.market, seed, estimated.sigma)
        return cfg.gbm.params(cfg.market, seed)

    def _evaluate_day(self, args) -> Optional[DayResult]:
        market, surfaces, portfolio, t = args
        cfg = self.cfg
        chain_t, chain_next = market.raw[t], market.raw[t + 1]
        as_of = chain_t.quote_date
        positions = active_positions(portfolio, as_of)
        if not positions:
            logger.warning(f"{as_of}: sin posiciones activas, día omitido")
            return None

        marked = mark_positions(positions, surfaces[t], chain_t.underlying_price, as_of)
        value = portfolio_value(marked, chain_t, surfaces[t], cfg.market)
        if value <= 0:
            logger.warning(f"{as_of}: valor de cartera nulo, día omitido")
            return None
        realized = realized_pnl(marked, chain_t, chain_next, surfaces[t], surfaces[t + 1], cfg.market)
        result = DayResult(as_of, chain_next.quote_date, realized, value, len(marked))

        gbm = self._gbm_for_day(market, t)
        result.seed = gbm.seed
        for model in cfg.models:
            if model == "psp":
                dist = psp_pnl(marked, surfaces[:t + 1], chain_t, gbm, cfg.weights, cfg.market, cfg.gbm.pairing)
            elif model == "const_vol":
                dist = const_vol_pnl(marked, chain_t, gbm, cfg.market, cfg.frozen_spot)
            else:
                dist = vix_pnl(marked, chain_t, market.vix, gbm, cfg.market, cfg.weights,
                               cfg.vix_shock, cfg.frozen_spot)
            result.distributions[model] = dist
            result.reports[model] = [var_report(dist, alpha) for alpha in cfg.levels]
        return result

    def evaluate_models(self, market: MarketData, surfaces: List[SplineSurface],
                        portfolio) -> List[DayResult]:
        """Evalúa todos los modelos en los días con al menos dos superficies previas."""
        inicio = time.time()
        tasks = [(market, surfaces, portfolio, t) for t in range(1, len(market.raw) - 1)]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            results = [r for r in pool.map(self._evaluate_day, tasks) if r is not None]
        log_performance("pipeline", "evaluación de modelos", time.time() - inicio, f"{len(results)} días")
        return results

    # -- salidas ---------------------------------------------------------

    def write_day_outputs(self, results: List[DayResult]):
        cfg = self.cfg
        var_reports = []
        for day in results:
            stamp = day.as_of.isoformat()
            for model, dist in day.distributions.items():
                self.run_report.add_distribution(dist)
                base = self.output_dir / "pnl" / model / f"pnl_{stamp}"
                self._record("pnl", write_pnl_csv(dist, base.with_suffix(".csv")))
                meta = {
                    'model': model,
                    'as_of': stamp,
                    'seed': day.seed,
                    'n_paths': cfg.gbm.n_paths,
                    'n_samples': len(dist),
                    'pairing': cfg.gbm.pairing if model == "psp" else "sampled",
                    'weight_scheme': cfg.weights.to_dict(),
                    'floor_count': dist.floor_count,
                    'clamp_count': dist.clamp_count,
                    'n_positions': day.n_positions,
                }
                self._record("pnl_meta", _write_json(base.with_suffix(".json"), meta))
                var_reports.extend(r.to_dict() for r in day.reports[model])
            self.run_report.days.append(stamp)
        self._record("reports", _write_json(self.output_dir / "risk" / "var_reports.json", var_reports))

    def daily_frames(self, results: List[DayResult]) -> Tuple[pd.Series, Dict[str, pd.DataFrame]]:
        """Rendimientos realizados y VaR relativo al valor de la cartera, por modelo y nivel."""
        index = pd.Index([d.target.isoformat() for d in results], name="date")
        returns = pd.Series([d.ret for d in results], index=index, name="return")
        frames = {}
        for model in self.cfg.models:
            columns = {}
            for i, alpha in enumerate(self.cfg.levels):
                columns[level_key(alpha)] = [d.reports[model][i].var / d.value for d in results]
            frames[model] = pd.DataFrame(columns, index=index)
        return returns, frames

    def write_daily_csvs(self, results: List[DayResult], returns: pd.Series, frames: Dict[str, pd.DataFrame]):
        realized = pd.DataFrame({'pnl': [d.realized for d in results], 'value': [d.value for d in results],
                                 'return': returns.values}, index=returns.index)
        path = self.output_dir / "backtest" / "realized.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        realized.to_csv(path)
        self._record("daily", path)
        for model, frame in frames.items():
            daily = pd.DataFrame({'return': returns})
            for key in frame.columns:
                daily[f"var_{key}"] = frame[key]
            for key in frame.columns:
                daily[f"hit_{key}"] = (returns < -frame[key]).astype(int)
            path = self.output_dir / "backtest" / f"daily_{model}.csv"
            daily.to_csv(path)
            self._record("daily", path)

    def write_manifest(self, dates: List[str]) -> Path:
        manifest = {
            'schema_version': SCHEMA_VERSION,
            'created_at': datetime.now().isoformat(timespec='seconds'),
            'models': list(self.cfg.models),
            'levels': list(self.cfg.levels),
            'dates': dates,
            'config': self.cfg.raw,
            'run_report': self.run_report.to_dict(),
            'artifacts': self.artifacts,
        }
        return _write_json(self.output_dir / MANIFEST, manifest)

    # -- etapas completas -------------------------------------------------

    def run_fit_only(self) -> List[SplineSurface]:
        market = self.load_market()
        surfaces = self.fit_surfaces(market)
        self.write_manifest([s.fit_date.isoformat() for s in surfaces])
        return surfaces

    def run(self) -> Path:
        inicio = time.time()
        cfg = self.cfg
        market = self.load_market()
        surfaces = self.fit_surfaces(market)
        portfolio = random_portfolio(market.filtered[0], cfg.n_options, cfg.portfolio_seed, cfg.max_quantity)
        results = self.evaluate_models(market, surfaces, portfolio)
        if len(results) < 2:
            raise InsufficientHistory(f"solo {len(results)} días evaluados; el backtest necesita al menos 2")

        self.write_day_outputs(results)
        returns, frames = self.daily_frames(results)
        self.write_daily_csvs(results, returns, frames)

        report = build_backtest_report(returns, frames, cfg.levels, cfg.dm_error_kind,
                                       cfg.penalty_kappa, cfg.harvey_correction)
        self._record("reports", save_backtest_report(report, self.output_dir / "backtest" / "backtest_report.json"))

        counters = self.run_report.to_dict()
        logger.info(f"Resumen de avisos: {counters}")
        manifest = self.write_manifest(list(returns.index))
        log_performance("pipeline", "ejecución completa", time.time() - inicio, f"{len(results)} días")
        return manifest


def run_pipeline(cfg: RunConfig) -> Path:
    """Ejecuta la corrida completa; devuelve la ruta del manifiesto."""
    return RiskPipeline(cfg).run()


def fit_surfaces_only(cfg: RunConfig) -> List[SplineSurface]:
    return RiskPipeline(cfg).run_fit_only()


def load_run_surfaces(run_dir) -> List[SplineSurface]:
    manifest = load_manifest(run_dir)
    return [load_surface(Path(run_dir) / p) for p in manifest['artifacts'].get('surfaces', [])]


def _read_daily(run_dir: Path, model: str) -> pd.DataFrame:
    path = run_dir / "backtest" / f"daily_{model}.csv"
    if not path.exists():
        raise DataIOError(f"ejecución incompleta: falta {path}")
    return pd.read_csv(path, index_col="date", dtype={'date': str})


def recompute_backtest(run_dir, docx_path: Optional[str] = None) -> Path:
    """Recalcula el informe de backtest desde los CSV diarios de una ejecución."""
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    levels = manifest['levels']
    backtest_cfg = manifest['config']['backtest']
    frames, returns = {}, None
    for model in manifest['models']:
        daily = _read_daily(run_dir, model)
        returns = daily['return']
        frames[model] = pd.DataFrame({level_key(a): daily[f"var_{level_key(a)}"] for a in levels})
    report = build_backtest_report(returns, frames, levels, backtest_cfg['dm_error_kind'],
                                   backtest_cfg['penalty_kappa'], backtest_cfg['harvey_correction'])
    path = save_backtest_report(report, run_dir / "backtest" / "backtest_report.json")
    if docx_path:
        run_info = {'Días': len(returns), 'Semilla': manifest['config'].get('seed')}
        write_backtest_docx(json.loads(path.read_text(encoding='utf-8')), docx_path, run_info)
    return path


def emit_plot_data(run_dir) -> List[Path]:
    """Un CSV date,return,neg_var,hit por (modelo, nivel) para dibujar las violaciones."""
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    written = []
    for model in manifest['models']:
        daily = _read_daily(run_dir, model)
        for alpha in manifest['levels']:
            key = level_key(alpha)
            neg_var = -daily[f"var_{key}"]
            plot = pd.DataFrame({'return': daily['return'], 'neg_var': neg_var,
                                 'hit': (daily['return'] < neg_var).astype(int)}, index=daily.index)
            path = run_dir / "plot_data" / f"{model}_{key}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            plot.to_csv(path)
            written.append(path)
    log_action("pipeline", "datos de gráficos", f"{len(written)} archivos en {run_dir / 'plot_data'}")
    return written
