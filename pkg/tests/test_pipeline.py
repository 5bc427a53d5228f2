"""
Tests de la corrida completa y de la línea de comandos
"""

import unittest
import sys
import os
import contextlib
import io
import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

# Agregar el directorio padre al path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli import main
from cli.pipeline import (MANIFEST, RiskPipeline, emit_plot_data, load_run_surfaces, recompute_backtest,
                          run_pipeline)
from config.config_loader import load_run_config
from core.psp_engine import build_scenario_set
from modules.market_data import OptionChain, chain_to_vol_points
from modules.report_document import DOCX_AVAILABLE
from utils.errors import DataIOError, IllConditioned

REDUCIDA = [
    "synth.n_days=12",
    "synth.n_expiries=6",
    "synth.strike_step=80",
    "gbm.n_paths=200",
    "portfolio.n_options=15",
]


def configuracion(output_dir, workers=2, extra=()):
    return load_run_config(overrides=REDUCIDA + [f"workers={workers}", f"paths.output_dir={output_dir}", *extra])


def silencio():
    return contextlib.redirect_stdout(io.StringIO())


class TestRunPipeline(unittest.TestCase):
    """Tests para la corrida sintética reducida"""

    @classmethod
    def setUpClass(cls):
        """Dos corridas idénticas salvo el número de trabajadores"""
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir_a = Path(cls.tmp.name) / "a"
        cls.dir_b = Path(cls.tmp.name) / "b"
        cls.manifest_a = run_pipeline(configuracion(cls.dir_a, workers=1))
        cls.manifest_b = run_pipeline(configuracion(cls.dir_b, workers=3))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_manifiesto(self):
        """Test el manifiesto lista modelos, niveles y artefactos"""
        manifest = json.loads(self.manifest_a.read_text(encoding='utf-8'))
        self.assertEqual(manifest['models'], ["psp", "const_vol", "vix"])
        self.assertEqual(manifest['levels'], [0.9, 0.95])
        self.assertEqual(len(manifest['dates']), 10)
        self.assertEqual(len(manifest['artifacts']['surfaces']), 12)
        self.assertEqual(manifest['run_report']['n_days'], 10)

    def test_pnl_identicos_byte_a_byte(self):
        """Test misma semilla reproduce los CSV de PnL con cualquier número de trabajadores"""
        files = sorted((self.dir_a / "pnl").rglob("*.csv"))
        self.assertEqual(len(files), 3 * 10)
        for path in files:
            other = self.dir_b / path.relative_to(self.dir_a)
            self.assertEqual(path.read_bytes(), other.read_bytes(), path.name)

    def test_informe_identico(self):
        """Test el informe de backtest es idéntico entre corridas"""
        a = (self.dir_a / "backtest" / "backtest_report.json").read_bytes()
        b = (self.dir_b / "backtest" / "backtest_report.json").read_bytes()
        self.assertEqual(a, b)

    def test_informe_tres_metodos_dos_niveles(self):
        """Test el informe cubre tres métodos por dos niveles"""
        report = json.loads((self.dir_a / "backtest" / "backtest_report.json").read_text(encoding='utf-8'))
        self.assertEqual(sorted(report['coverage']), ["90", "95"])
        for key in ("90", "95"):
            self.assertEqual(sorted(report['coverage'][key]), ["const_vol", "psp", "vix"])
        for res in report['coverage']['90'].values():
            self.assertAlmostEqual(res['violation_rate'], res['violations'] / 10)

    def test_metadatos_de_pnl(self):
        """Test cada distribución guarda su semilla y contadores"""
        meta_files = sorted((self.dir_a / "pnl" / "psp").glob("*.json"))
        meta = json.loads(meta_files[0].read_text(encoding='utf-8'))
        self.assertEqual(meta['model'], "psp")
        self.assertEqual(meta['n_samples'], 200)
        self.assertIn('floor_count', meta)

    def test_superficies_recargables(self):
        """Test las superficies persistidas se recargan en orden de fecha"""
        surfaces = load_run_surfaces(self.dir_a)
        self.assertEqual(len(surfaces), 12)
        dates = [s.fit_date for s in surfaces]
        self.assertEqual(dates, sorted(dates))

    def test_datos_de_graficos(self):
        """Test 6 CSV cuyo hit coincide con return < neg_var"""
        written = emit_plot_data(self.dir_a)
        self.assertEqual(len(written), 6)
        for path in written:
            frame = pd.read_csv(path)
            self.assertEqual(list(frame.columns), ["date", "return", "neg_var", "hit"])
            self.assertTrue(((frame['return'] < frame['neg_var']).astype(int) == frame['hit']).all())

    def test_recalcular_backtest(self):
        """Test recalcular desde los CSV diarios reproduce las violaciones"""
        original = json.loads((self.dir_b / "backtest" / "backtest_report.json").read_text(encoding='utf-8'))
        recomputed = json.loads(recompute_backtest(self.dir_b).read_text(encoding='utf-8'))
        for key in ("90", "95"):
            for model in ("psp", "const_vol", "vix"):
                self.assertEqual(recomputed['coverage'][key][model]['violations'],
                                 original['coverage'][key][model]['violations'])

    @unittest.skipIf(not DOCX_AVAILABLE, "python-docx no disponible")
    def test_informe_word(self):
        """Test el informe .docx se escribe"""
        docx_path = Path(self.tmp.name) / "informe.docx"
        recompute_backtest(self.dir_a, str(docx_path))
        self.assertTrue(docx_path.exists())
        self.assertGreater(docx_path.stat().st_size, 0)


class TestSurfaceFitting(unittest.TestCase):
    """Tests para el ajuste diario de superficies dentro de una corrida"""

    def setUp(self):
        """Configuración antes de cada test"""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _pipeline(self, extra=()):
        cfg = configuracion(self.dir, extra=["synth.n_days=5", *extra])
        pipeline = RiskPipeline(cfg)
        return pipeline, pipeline.load_market()

    def test_dia_sin_cotizaciones_arrastra_la_superficie(self):
        """Test un día sin puntos reutiliza la superficie anterior y no genera un choque"""
        pipeline, market = self._pipeline()
        vacio = market.filtered[2].quote_date
        market.filtered[2] = OptionChain(vacio, ())
        with self.assertLogs("RiesgoPSP.pipeline", level="WARNING") as logs:
            surfaces = pipeline.fit_surfaces(market)
        self.assertTrue(any("arrastra" in linea for linea in logs.output))
        self.assertEqual(surfaces[2].fit_date, vacio)
        np.testing.assert_array_equal(surfaces[2].coeffs, surfaces[1].coeffs)
        self.assertEqual(pipeline.run_report.carried_surfaces, 1)
        deltas = build_scenario_set(surfaces).deltas
        self.assertEqual(float(np.max(np.abs(deltas[1].dcoeffs))), 0.0)

    def test_primer_dia_sin_cotizaciones(self):
        """Test sin superficie previa el día vacío es un error numérico"""
        pipeline, market = self._pipeline()
        market.filtered[0] = OptionChain(market.filtered[0].quote_date, ())
        with self.assertRaises(IllConditioned):
            pipeline.fit_surfaces(market)

    def test_puntos_fuera_de_rango_contados(self):
        """Test los puntos fuera de la malla se cuentan en el informe de la corrida"""
        pipeline, market = self._pipeline(["surface.m_min=0.95", "surface.m_max=1.05"])
        pipeline.fit_surfaces(market)
        esperado = 0
        for chain in market.filtered:
            points, _ = chain_to_vol_points(chain, pipeline.cfg.market)
            esperado += sum(1 for p in points if not 0.95 <= p.moneyness <= 1.05)
        self.assertGreater(esperado, 0)
        self.assertEqual(pipeline.run_report.out_of_range_points, esperado)
        frame = pd.read_csv(self.dir / "surfaces" / "fit_report.csv")
        self.assertEqual(int(frame['out_of_range_points'].sum()), esperado)


class TestDefaultRun(unittest.TestCase):
    """Tests para la corrida sintética por defecto de 124 días"""

    @classmethod
    def setUpClass(cls):
        """Dos corridas con la configuración por defecto y distinto número de trabajadores"""
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir_a = Path(cls.tmp.name) / "a"
        cls.dir_b = Path(cls.tmp.name) / "b"
        run_pipeline(load_run_config(overrides=["workers=1", f"paths.output_dir={cls.dir_a}"]))
        run_pipeline(load_run_config(overrides=["workers=4", f"paths.output_dir={cls.dir_b}"]))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def _json(self, directory, *parts):
        return json.loads(directory.joinpath(*parts).read_text(encoding='utf-8'))

    def test_122_dias_de_backtest(self):
        """Test 124 días de cadenas dan 122 días evaluados"""
        manifest = self._json(self.dir_a, MANIFEST)
        self.assertEqual(manifest['run_report']['n_days'], 122)
        self.assertEqual(len(manifest['dates']), 122)
        self.assertEqual(self._json(self.dir_a, "backtest", "backtest_report.json")['n_days'], 122)

    def test_pnl_identicos_byte_a_byte(self):
        """Test los CSV de PnL no dependen del número de trabajadores"""
        files = sorted((self.dir_a / "pnl").rglob("*.csv"))
        self.assertEqual(len(files), 3 * 122)
        for path in files:
            self.assertEqual(path.read_bytes(), (self.dir_b / path.relative_to(self.dir_a)).read_bytes(), path.name)

    def test_informe_identico(self):
        """Test backtest_report.json idéntico y contadores iguales entre corridas"""
        a = (self.dir_a / "backtest" / "backtest_report.json").read_bytes()
        b = (self.dir_b / "backtest" / "backtest_report.json").read_bytes()
        self.assertEqual(a, b)
        self.assertEqual(self._json(self.dir_a, MANIFEST)['run_report'], self._json(self.dir_b, MANIFEST)['run_report'])

    def test_tasa_de_violaciones_psp(self):
        """Test la tasa de violaciones PSP al 90% está en [0, 0.3]"""
        report = self._json(self.dir_a, "backtest", "backtest_report.json")
        psp = report['coverage']['90']['psp']
        self.assertGreaterEqual(psp['violation_rate'], 0.0)
        self.assertLessEqual(psp['violation_rate'], 0.3)
        self.assertAlmostEqual(psp['violation_rate'], psp['violations'] / 122)


class TestRunErrors(unittest.TestCase):
    """Tests para los errores de una corrida"""

    def setUp(self):
        """Configuración antes de cada test"""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_directorio_vacio(self):
        """Test emit-plot-data sin manifiesto nombra el archivo ausente"""
        with self.assertRaises(DataIOError) as ctx:
            emit_plot_data(self.dir)
        self.assertIn(MANIFEST, str(ctx.exception))

    def test_vix_sin_datos(self):
        """Test el modelo vix con cadenas de archivo y sin serie VIX"""
        chain = self.dir / "chains.csv"
        chain.write_text("quote_date,expiry_date,strike,bid,ask,underlying_price\n", encoding='utf-8')
        cfg = configuracion(self.dir / "salida", extra=[f"paths.chain_csv={chain}"])
        with self.assertRaises(DataIOError):
            run_pipeline(cfg)


class TestCommandLine(unittest.TestCase):
    """Tests para los códigos de salida de la CLI"""

    def setUp(self):
        """Configuración antes de cada test"""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_config_init(self):
        """Test config init escribe un JSON cargable"""
        path = self.dir / "config.json"
        with silencio():
            self.assertEqual(main(["config", "init", "--output", str(path)]), 0)
        self.assertEqual(json.loads(path.read_text(encoding='utf-8'))['schema_version'], 1)

    def test_modelos_vacios(self):
        """Test lista de modelos vacía sale con código 2"""
        with silencio(), contextlib.redirect_stderr(io.StringIO()):
            code = main(["run", "--set", "models=[]", "--output-dir", str(self.dir)])
        self.assertEqual(code, 2)

    def test_archivo_de_cadenas_ausente(self):
        """Test archivo de cadenas inexistente sale con código 3 nombrando la ruta"""
        missing = self.dir / "no_existe.csv"
        stderr = io.StringIO()
        with silencio(), contextlib.redirect_stderr(stderr):
            code = main(["run", "--set", f"paths.chain_csv={missing}", "--output-dir", str(self.dir)])
        self.assertEqual(code, 3)
        self.assertIn("no_existe.csv", stderr.getvalue())

    def test_backtest_sin_corrida(self):
        """Test backtest sobre un directorio vacío sale con código 3"""
        with silencio(), contextlib.redirect_stderr(io.StringIO()):
            self.assertEqual(main(["backtest", str(self.dir)]), 3)

    def test_synth(self):
        """Test synth escribe cadenas y VIX"""
        with silencio():
            code = main(["synth", "--set", "synth.n_days=3", "--set", "synth.n_expiries=4",
                         "--output-dir", str(self.dir)])
        self.assertEqual(code, 0)
        self.assertTrue((self.dir / "chains.csv").exists())
        self.assertTrue((self.dir / "vix.csv").exists())


if __name__ == '__main__':
    unittest.main()
