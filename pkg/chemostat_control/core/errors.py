"""
Jerarquía de excepciones y códigos de salida del paquete.
"""
from typing import Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_REFUSAL = 4


class ChemostatError(Exception):
    """Error base de chemostat_control."""


class DomainError(ChemostatError, ValueError):
    """Estado o argumento fuera del dominio abierto del modelo."""


class ConfigError(ChemostatError, ValueError):
    """Parámetros o archivo de escenario inválidos."""


class KernelError(ConfigError):
    """Núcleo de mortalidad que viola el supuesto (B)."""

    def __init__(self, desigualdad: str, edad: float, detalle: str = ""):
        self.desigualdad = desigualdad
        self.edad = edad
        mensaje = f"Supuesto (B) violado: {desigualdad} falla en a={edad:.6g}"
        if detalle:
            mensaje += f" ({detalle})"
        super().__init__(mensaje)


class NumericalError(ChemostatError, ArithmeticError):
    """Fallo numérico durante una integración o un cálculo."""


class CFLError(NumericalError):
    """Paso temporal incompatible con la condición CFL del esquema upwind."""


class IntegrationError(NumericalError):
    """
    La integración terminó antes de tiempo.

    Conserva la trayectoria parcial y el estado de terminación
    (``boundary_hit``, ``step_underflow`` o ``non_finite``).
    """

    def __init__(self, mensaje: str, estado: str, trayectoria=None):
        super().__init__(mensaje)
        self.estado = estado
        self.trayectoria = trayectoria


class CertificationRefusal(ChemostatError):
    """El supuesto (A) o (C) no se cumple y no se emite certificado."""

    def __init__(self, mensaje: str, margen: Optional[float] = None):
        super().__init__(mensaje)
        self.margen = margen


class HypothesisError(ChemostatError, ValueError):
    """Las hipótesis del escenario divergente no se cumplen."""


def exit_code_for(exc: BaseException) -> int:
    """
    Traduce una excepción al código de salida de la línea de comandos.

    Args:
        exc: Excepción capturada.

    Returns:
        2 para configuración, 4 para rechazos de certificación y 3 para
        fallos numéricos o cualquier otro error del paquete.
    """
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (CertificationRefusal, HypothesisError)):
        return EXIT_REFUSAL
    return EXIT_NUMERICAL
