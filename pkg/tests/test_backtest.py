"""
Tests para el backtesting de VaR
"""

import unittest
import sys
import os
import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

# Agregar el directorio padre al path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.backtest import (ViolationSeries, build_backtest_report, christoffersen_ind, conditional_coverage,
                           daily_penalties, dm_matrix, dm_test, kupiec_uc, level_key, load_backtest_report,
                           ranking_model, save_backtest_report, transition_counts, var_forecast_errors,
                           violations)
from utils.errors import DateMisalignment
from utils.validators import ValidationError


def serie(n, posiciones):
    hits = np.zeros(n, dtype=int)
    hits[list(posiciones)] = 1
    return ViolationSeries(hits, 0.95)


class TestViolations(unittest.TestCase):
    """Tests para la extracción de violaciones"""

    def test_comparacion_directa(self):
        """Test rendimientos {-5, 1, -2} con VaR 4"""
        v = violations([-5.0, 1.0, -2.0], [4.0, 4.0, 4.0], 0.95)
        np.testing.assert_array_equal(v.hits, [1, 0, 0])
        self.assertAlmostEqual(v.rate, 1 / 3)

    def test_igualdad_no_es_violacion(self):
        """Test rendimiento exactamente -VaR no cuenta"""
        self.assertEqual(violations([-4.0], [4.0], 0.9).count, 0)

    def test_tasa_de_122_dias(self):
        """Test 13 violaciones en 122 días"""
        self.assertAlmostEqual(serie(122, range(0, 122, 10)).rate, 0.1066, places=4)

    def test_invariante_a_traslacion(self):
        """Test sumar una constante a rendimientos y a -VaR no cambia las violaciones"""
        rng = np.random.default_rng(4)
        r = rng.normal(0, 0.01, 200)
        v = np.full(200, 0.015)
        a = violations(r, v, 0.95)
        b = violations(r + 0.3, v - 0.3, 0.95)
        np.testing.assert_array_equal(a.hits, b.hits)

    def test_fechas_desalineadas(self):
        """Test series con índices de fechas distintos"""
        r = pd.Series([0.0, 0.1], index=pd.to_datetime(["2013-01-02", "2013-01-03"]))
        v = pd.Series([0.1, 0.1], index=pd.to_datetime(["2013-01-03", "2013-01-04"]))
        with self.assertRaises(DateMisalignment):
            violations(r, v, 0.9)

    def test_longitudes_distintas(self):
        """Test longitudes distintas"""
        with self.assertRaises(DateMisalignment):
            violations([0.0, 0.1], [0.1], 0.9)


class TestCoverage(unittest.TestCase):
    """Tests para Kupiec, Christoffersen y cobertura condicional"""

    def test_kupiec_una_violacion(self):
        """Test n=122, x=1, p=0.05"""
        result = kupiec_uc(serie(122, [60]), 0.05)
        self.assertGreaterEqual(result.statistic, 6.6)
        self.assertLessEqual(result.statistic, 7.0)
        self.assertLess(result.p_value, 0.05)
        self.assertEqual(result.dof, 1)

    def test_kupiec_trece_violaciones(self):
        """Test n=122, x=13, p=0.10"""
        result = kupiec_uc(serie(122, range(0, 122, 10)), 0.10)
        self.assertGreaterEqual(result.statistic, 0.03)
        self.assertLessEqual(result.statistic, 0.12)

    def test_kupiec_tasa_exacta(self):
        """Test x/n = p da estadístico 0"""
        result = kupiec_uc(serie(100, range(0, 100, 20)), 0.05)
        self.assertAlmostEqual(result.statistic, 0.0, places=12)
        self.assertAlmostEqual(result.p_value, 1.0, places=9)

    def test_kupiec_extremos(self):
        """Test x = 0 y x = n están definidos"""
        self.assertTrue(np.isfinite(kupiec_uc(serie(50, []), 0.05).statistic))
        self.assertTrue(np.isfinite(kupiec_uc(serie(50, range(50)), 0.05).statistic))

    def test_kupiec_no_negativo(self):
        """Test el estadístico nunca es negativo"""
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = ViolationSeries(rng.random(80) < 0.1, 0.9)
            self.assertGreaterEqual(kupiec_uc(v, 0.1).statistic, 0.0)

    def test_transiciones(self):
        """Test conteos de transiciones"""
        counts = transition_counts(np.array([0, 0, 1, 1, 0]))
        self.assertEqual(counts, {'n00': 1, 'n01': 1, 'n10': 1, 'n11': 1})

    def test_independencia_patron_marginal(self):
        """Test pi01 = pi11 da estadístico 0"""
        v = ViolationSeries([0, 0, 1, 1, 0, 0, 1, 1, 0], 0.5)
        self.assertAlmostEqual(christoffersen_ind(v).statistic, 0.0, places=12)

    def test_sin_violaciones_cero_positivo(self):
        """Test sin violaciones el estadístico es 0.0 y no -0.0"""
        result = christoffersen_ind(ViolationSeries(np.zeros(122, dtype=int), 0.95))
        self.assertEqual(math.copysign(1.0, result.statistic), 1.0)
        self.assertEqual(json.dumps(result.to_dict()['stat']), "0.0")
        self.assertEqual(result.p_value, 1.0)

    def test_independencia_una_violacion(self):
        """Test n=122, x=1 da un estadístico pequeño y finito"""
        result = christoffersen_ind(serie(122, [60]))
        self.assertGreater(result.statistic, 0.0)
        self.assertLess(result.statistic, 0.05)

    def test_agrupamiento_infla_el_estadistico(self):
        """Test violaciones agrupadas frente a la serie barajada"""
        agrupada = serie(20, [0, 1])
        separada = serie(20, [3, 12])
        self.assertGreater(christoffersen_ind(agrupada).statistic, christoffersen_ind(separada).statistic)

    def test_independencia_oraculo(self):
        """Test hits {1,1,0,...,0} contra la verosimilitud directa"""
        v = serie(20, [0, 1])
        n00, n01, n10, n11 = 17, 0, 1, 1
        pi = (n01 + n11) / 19
        ll_null = (n00 + n10) * np.log(1 - pi) + (n01 + n11) * np.log(pi)
        ll_alt = n00 * np.log(1.0) + n10 * np.log(0.5) + n11 * np.log(0.5)
        self.assertAlmostEqual(christoffersen_ind(v).statistic, -2 * (ll_null - ll_alt), places=10)

    def test_cobertura_condicional_es_suma(self):
        """Test CC = UC + IND"""
        rng = np.random.default_rng(8)
        for _ in range(30):
            v = ViolationSeries(rng.random(122) < 0.08, 0.95)
            cc = conditional_coverage(v, 0.05)
            total = kupiec_uc(v, 0.05).statistic + christoffersen_ind(v).statistic
            self.assertAlmostEqual(cc.statistic, total, delta=1e-12)
            self.assertEqual(cc.dof, 2)

    def test_cobertura_condicional_nula(self):
        """Test ambos componentes nulos dan 0 y p-valor 1"""
        v = ViolationSeries([0, 0, 1, 1, 0, 0, 1, 1, 0], 0.5)
        cc = conditional_coverage(v, 4 / 9)
        self.assertAlmostEqual(cc.statistic, 0.0, places=12)
        self.assertAlmostEqual(cc.p_value, 1.0, places=9)


class TestDieboldMariano(unittest.TestCase):
    """Tests para el test de Diebold-Mariano"""

    def test_series_identicas(self):
        """Test errores idénticos dan 0 y p-valor 1"""
        result = dm_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.p_value, 1.0)

    def test_oraculo(self):
        """Test a = {1,2,3,4}, b = {2,2,2,2}"""
        d = np.array([1, 4, 9, 16]) - 4.0
        expected = d.mean() / np.sqrt(d.var(ddof=1) / 4)
        self.assertAlmostEqual(dm_test([1, 2, 3, 4], [2, 2, 2, 2]).statistic, expected, delta=1e-10)

    def test_antisimetria(self):
        """Test intercambiar a y b cambia el signo en 100 pares"""
        rng = np.random.default_rng(6)
        for _ in range(100):
            a, b = rng.normal(0, 1, 60), rng.normal(0, 1.2, 60)
            self.assertEqual(dm_test(a, b).statistic, -dm_test(b, a).statistic)
            self.assertEqual(dm_test(a, a).statistic, 0.0)

    def test_varianza_nula_media_no_nula(self):
        """Test diferencial constante no nulo da estadístico infinito"""
        result = dm_test([2.0, 2.0, 2.0], [1.0, 1.0, 1.0])
        self.assertTrue(np.isinf(result.statistic))
        self.assertGreater(result.statistic, 0)

    def test_correccion_muestra_pequena(self):
        """Test la corrección escala el estadístico por sqrt((n-1)/n)"""
        a, b = [1, 2, 3, 4], [2, 2, 2, 2]
        plain = dm_test(a, b).statistic
        corrected = dm_test(a, b, harvey=True)
        self.assertAlmostEqual(corrected.statistic, plain * np.sqrt(3 / 4), places=12)
        self.assertEqual(corrected.dof, 3)

    def test_errores_de_pronostico(self):
        """Test tipos de error sobre un ejemplo pequeño"""
        r, v = [-5.0, 1.0], [4.0, 4.0]
        np.testing.assert_allclose(var_forecast_errors(r, v, 0.95, "exceedance"), [-1.0, 0.0])
        np.testing.assert_allclose(var_forecast_errors(r, v, 0.95, "all"), [-1.0, 5.0])
        np.testing.assert_allclose(var_forecast_errors(r, v, 0.95, "pinball"), [np.sqrt(0.95), np.sqrt(0.25)])
        with self.assertRaises(ValidationError):
            var_forecast_errors(r, v, 0.95, "absoluto")

    def test_matriz(self):
        """Test la matriz DM es antisimétrica y sin diagonal"""
        rng = np.random.default_rng(2)
        errors = {m: rng.normal(0, 1, 30) for m in ("psp", "const_vol", "vix")}
        matrix = dm_matrix(errors)
        self.assertNotIn("psp", matrix["psp"])
        self.assertEqual(matrix["psp"]["vix"]["stat"], -matrix["vix"]["psp"]["stat"])


class TestRanking(unittest.TestCase):
    """Tests para el modelo de ranking por penalizaciones"""

    def test_un_dia(self):
        """Test rendimiento -6, VaR_a 5 y VaR_b 8"""
        table = ranking_model({'a': [5.0], 'b': [8.0]}, [-6.0])
        self.assertEqual(table.penalties, [1.0, 2.0])
        self.assertEqual(table.ranks, [1, 2])

    def test_empate(self):
        """Test métodos idénticos comparten el rango menor"""
        table = ranking_model({'a': [5.0, 3.0], 'b': [5.0, 3.0], 'c': [9.0, 9.0]}, [-6.0, 1.0])
        self.assertEqual(table.ranks, [1, 1, 3])

    def test_porcentajes_suman_100(self):
        """Test porcentajes sobre el total"""
        rng = np.random.default_rng(5)
        r = rng.normal(0, 1, 50)
        table = ranking_model({m: rng.uniform(0.5, 3, 50) for m in "abcd"}, r)
        self.assertAlmostEqual(sum(table.percentages), 100.0, places=9)

    def test_kappa(self):
        """Test kappa 0 elimina el coste de conservadurismo"""
        np.testing.assert_allclose(daily_penalties([-6.0, 1.0], [5.0, 3.0], kappa=0.0), [1.0, 0.0])

    def test_penalizacion_menor_mejor_rango(self):
        """Test penalizaciones menores punto a punto dan mejor rango"""
        table = ranking_model({'malo': [9.0, 9.0], 'bueno': [6.5, 2.0]}, [-6.0, 1.0])
        self.assertLess(table.ranks[1], table.ranks[0])


class TestReport(unittest.TestCase):
    """Tests para el informe de backtest"""

    def setUp(self):
        """Configuración antes de cada test"""
        rng = np.random.default_rng(10)
        dates = pd.bdate_range("2013-01-07", periods=60)
        self.returns = pd.Series(rng.normal(0, 0.01, 60), index=dates)
        self.frames = {
            m: pd.DataFrame({level_key(0.9): np.full(60, s * 0.0128), level_key(0.95): np.full(60, s * 0.0165)},
                            index=dates)
            for m, s in (("psp", 1.0), ("const_vol", 0.8), ("vix", 1.3))
        }

    def test_etiqueta_de_nivel(self):
        """Test 0.95 -> '95'"""
        self.assertEqual(level_key(0.95), "95")
        self.assertEqual(level_key(0.9), "90")

    def test_estructura(self):
        """Test tres métodos por dos niveles"""
        report = build_backtest_report(self.returns, self.frames, [0.9, 0.95])
        self.assertEqual(sorted(report.coverage), ["90", "95"])
        for key in ("90", "95"):
            self.assertEqual(set(report.coverage[key]), {"psp", "const_vol", "vix"})
            self.assertIn("cc", report.coverage[key]["psp"])
            self.assertEqual(set(report.dm[key]["psp"]), {"const_vol", "vix"})
            self.assertEqual(len(report.ranking[key]), 3)
        self.assertEqual(report.n_days, 60)

    def test_guardar_y_cargar(self):
        """Test el JSON guardado se recarga"""
        report = build_backtest_report(self.returns, self.frames, [0.9, 0.95])
        with tempfile.TemporaryDirectory() as tmp:
            data = load_backtest_report(save_backtest_report(report, Path(tmp) / "r.json"))
        self.assertEqual(data["methods"], ["psp", "const_vol", "vix"])
        self.assertEqual(data["coverage"]["95"]["vix"]["violations"], report.coverage["95"]["vix"]["violations"])


if __name__ == '__main__':
    unittest.main()
