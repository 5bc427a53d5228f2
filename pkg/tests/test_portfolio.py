"""
Tests para la cartera de calls
"""

import unittest
import sys
import os
from datetime import date, timedelta

import numpy as np

# Agregar el directorio padre al path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.psp_engine import Position
from core.surface import SplineSurface, make_knots
from modules.market_data import MarketParams, OptionChain, OptionQuote
from modules.portfolio import active_positions, mark_positions, portfolio_value, random_portfolio, realized_pnl
from utils.validators import ValidationError

HOY = date(2013, 3, 1)
MANANA = HOY + timedelta(days=1)
VENCE = HOY + timedelta(days=60)


def cadena(fecha, precios, spot=100.0):
    return OptionChain(fecha, tuple(OptionQuote(fecha, VENCE, k, bid, ask, spot) for k, (bid, ask) in precios.items()))


def superficie(fecha):
    return SplineSurface(make_knots(0.7, 1.3, 5), make_knots(0.05, 2.0, 5), np.full((7, 7), 0.25), fecha)


class TestRandomPortfolio(unittest.TestCase):
    """Tests para la selección aleatoria de contratos"""

    def setUp(self):
        """Configuración antes de cada test"""
        self.chain = cadena(HOY, {float(k): (4.0, 5.0) for k in range(80, 130, 5)})

    def test_contratos_distintos(self):
        """Test sin contratos repetidos y cantidades en rango"""
        cartera = random_portfolio(self.chain, 6, seed=3, max_quantity=4)
        self.assertEqual(len({p.key for p in cartera}), 6)
        self.assertTrue(all(1 <= p.quantity <= 4 for p in cartera))

    def test_determinista(self):
        """Test misma semilla, misma cartera"""
        self.assertEqual(random_portfolio(self.chain, 5, seed=9), random_portfolio(self.chain, 5, seed=9))

    def test_menos_contratos_que_pedidos(self):
        """Test se toman todos si la cadena es pequeña"""
        self.assertEqual(len(random_portfolio(self.chain, 100, seed=1)), len(self.chain))

    def test_cadena_vacia(self):
        """Test cadena sin cotizaciones"""
        with self.assertRaises(ValidationError):
            random_portfolio(OptionChain(HOY, ()), 5)


class TestValuation(unittest.TestCase):
    """Tests para valor y PnL realizado"""

    def setUp(self):
        """Configuración antes de cada test"""
        self.params = MarketParams(risk_free_rate=0.0)
        self.hoy = cadena(HOY, {100.0: (4.0, 6.0), 110.0: (1.0, 2.0)})
        self.manana = cadena(MANANA, {100.0: (5.0, 7.0), 110.0: (1.5, 2.5)}, spot=102.0)
        self.cartera = [Position(100.0, VENCE, 2.0), Position(110.0, VENCE, -3.0)]

    def test_posiciones_activas(self):
        """Test un vencimiento a 1 día queda fuera"""
        cartera = self.cartera + [Position(100.0, MANANA, 1.0)]
        self.assertEqual(active_positions(cartera, HOY), self.cartera)

    def test_marcado_con_la_superficie(self):
        """Test la vol de hoy se lee de la superficie"""
        marcadas = mark_positions(self.cartera, superficie(HOY), 100.0, HOY)
        self.assertTrue(all(abs(p.entry_vol - 0.25) < 1e-12 for p in marcadas))

    def test_valor_bruto(self):
        """Test sum |q| * mid"""
        self.assertAlmostEqual(portfolio_value(self.cartera, self.hoy, superficie(HOY), self.params),
                               2 * 5.0 + 3 * 1.5)

    def test_pnl_con_precios_de_mercado(self):
        """Test sum q * (mid_mañana - mid_hoy)"""
        pnl = realized_pnl(self.cartera, self.hoy, self.manana, superficie(HOY), superficie(MANANA), self.params)
        self.assertAlmostEqual(pnl, 2 * (6.0 - 5.0) - 3 * (2.0 - 1.5))

    def test_contrato_ausente_usa_la_superficie(self):
        """Test un contrato que desaparece se valora con la superficie"""
        manana = cadena(MANANA, {100.0: (5.0, 7.0)}, spot=102.0)
        pnl = realized_pnl(self.cartera, self.hoy, manana, superficie(HOY), superficie(MANANA), self.params)
        self.assertTrue(np.isfinite(pnl))
        self.assertNotAlmostEqual(pnl, 2 * (6.0 - 5.0))


if __name__ == '__main__':
    unittest.main()
