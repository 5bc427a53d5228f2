"""
Sistema de validación para datos de mercado y configuración

Este módulo proporciona validadores reutilizables. Cada validador
devuelve una tupla (es_valido, mensaje_error); `require` la convierte
en excepción cuando el llamador necesita abortar.
"""

import math
from datetime import date
from typing import Tuple, Optional, Sequence

from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger('Validators')


class ValidationError(ConfigError):
    """Excepción para invariantes de datos o configuración violados."""
    pass


class Validators:
    """Clase con métodos estáticos de validación."""

    @staticmethod
    def require(resultado: Tuple[bool, Optional[str]], contexto: str = "") -> None:
        """
        Lanza ValidationError si el resultado de un validador es negativo.

        Args:
            resultado: Tupla (es_valido, mensaje_error)
            contexto: Prefijo opcional para el mensaje
        """
        ok, mensaje = resultado
        if not ok:
            raise ValidationError(f"{contexto}: {mensaje}" if contexto else mensaje)

    @staticmethod
    def validar_positivo(valor: float, nombre: str) -> Tuple[bool, Optional[str]]:
        """Valida que un número sea finito y estrictamente positivo."""
        if valor is None or not math.isfinite(valor):
            return False, f"{nombre} debe ser finito"
        if valor <= 0:
            return False, f"{nombre} debe ser > 0 (recibido {valor})"
        return True, None

    @staticmethod
    def validar_no_negativo(valor: float, nombre: str) -> Tuple[bool, Optional[str]]:
        """Valida que un número sea finito y mayor o igual a cero."""
        if valor is None or not math.isfinite(valor):
            return False, f"{nombre} debe ser finito"
        if valor < 0:
            return False, f"{nombre} debe ser >= 0 (recibido {valor})"
        return True, None

    @staticmethod
    def validar_probabilidad(valor: float, nombre: str = "alpha") -> Tuple[bool, Optional[str]]:
        """
        Valida un nivel de confianza o probabilidad en el intervalo abierto (0, 1).

        Examples:
            >>> Validators.validar_probabilidad(0.95)
            (True, None)
            >>> Validators.validar_probabilidad(1.0)
            (False, 'alpha debe estar en (0, 1) (recibido 1.0)')
        """
        if valor is None or not math.isfinite(valor) or not 0.0 < valor < 1.0:
            return False, f"{nombre} debe estar en (0, 1) (recibido {valor})"
        return True, None

    @staticmethod
    def validar_cotizacion(bid: float, ask: float, strike: float, spot: float,
                           fecha: date, vencimiento: date) -> Tuple[bool, Optional[str]]:
        """
        Valida los invariantes de una cotización de call.

        Returns:
            Tuple[bool, Optional[str]]: (es_valido, mensaje_error)
        """
        for valor, nombre in ((bid, "bid"), (ask, "ask")):
            ok, msg = Validators.validar_no_negativo(valor, nombre)
            if not ok:
                return ok, msg
        if ask < bid:
            return False, f"ask < bid ({ask} < {bid})"
        for valor, nombre in ((strike, "strike"), (spot, "underlying_price")):
            ok, msg = Validators.validar_positivo(valor, nombre)
            if not ok:
                return ok, msg
        if vencimiento <= fecha:
            return False, f"expiry_date {vencimiento} no es posterior a quote_date {fecha}"
        return True, None

    @staticmethod
    def validar_nudos(nudos: Sequence[float], nombre: str = "knots") -> Tuple[bool, Optional[str]]:
        """Valida un vector de nudos cúbico: al menos 8 nudos, no decreciente y finito."""
        if len(nudos) < 8:
            return False, f"{nombre} necesita al menos 8 nudos para orden cúbico (recibidos {len(nudos)})"
        if any(not math.isfinite(k) for k in nudos):
            return False, f"{nombre} contiene valores no finitos"
        if any(b < a for a, b in zip(nudos, nudos[1:])):
            return False, f"{nombre} debe ser no decreciente"
        return True, None

    @staticmethod
    def validar_fechas_crecientes(fechas: Sequence[date], nombre: str = "fechas") -> Tuple[bool, Optional[str]]:
        """Valida que una secuencia de fechas sea estrictamente creciente."""
        for anterior, actual in zip(fechas, fechas[1:]):
            if actual <= anterior:
                return False, f"{nombre} no estrictamente crecientes ({anterior} -> {actual})"
        return True, None
