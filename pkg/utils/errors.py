"""
Jerarquía de excepciones del motor de riesgo.

Cada familia lleva el código de salida que usa la CLI.
"""


class RiesgoPSPError(Exception):
    """Error base del proyecto."""
    exit_code = 1


class ConfigError(RiesgoPSPError):
    """Configuración inválida."""
    exit_code = 2


class DataIOError(RiesgoPSPError):
    """Entrada o salida de datos fallida."""
    exit_code = 3


class ChainParseError(DataIOError):
    """Fila del CSV de cadenas imposible de interpretar."""

    def __init__(self, message: str, line: int):
        super().__init__(f"línea {line}: {message}")
        self.line = line


class NumericError(RiesgoPSPError):
    """Fallo numérico del motor."""
    exit_code = 4


class BelowIntrinsic(NumericError):
    """Precio en o por debajo de la cota inferior sin arbitraje."""


class AboveUpperBound(NumericError):
    """Precio en o por encima del subyacente."""


class NoConvergence(NumericError):
    """El buscador de raíces no encontró solución en el intervalo."""


class IllConditioned(NumericError):
    """Sistema normal de mínimos cuadrados deficiente en rango."""


class InsufficientHistory(NumericError):
    """No hay historia suficiente para construir escenarios."""


class ExpiryTooNear(NumericError):
    """La opción vence dentro del horizonte de un día."""


class UndefinedStatistic(NumericError):
    """Estadístico indefinido (por ejemplo, serie de varianza nula)."""


class LayoutMismatch(NumericError):
    """Superficies con distinta disposición de nudos."""


class DateMisalignment(NumericError):
    """Series con fechas desalineadas."""
