"""
Criterio de Routh–Hurwitz, jacobianos numéricos e informes de estabilidad.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .utils import contar_signos

ESTABLE = "Stable"
INESTABLE = "Unstable"
MARGINAL = "Marginal"

EPS_FRONTERA = 1e-12


@dataclass
class StabilityReport:
    char_poly: List[float]
    routh_hurwitz_verdict: str
    jacobian_eig_signs: Tuple[int, int, int]
    consistent: bool
    jacobian_eigenvalues: List[complex] = field(default_factory=list)
    discrepancies: List[str] = field(default_factory=list)

    def a_diccionario(self) -> dict:
        return {
            "char_poly": list(self.char_poly),
            "routh_hurwitz_verdict": self.routh_hurwitz_verdict,
            "jacobian_eig_signs": list(self.jacobian_eig_signs),
            "consistent": self.consistent,
            "jacobian_eigenvalues": [[float(np.real(v)), float(np.imag(v))]
                                     for v in self.jacobian_eigenvalues],
            "discrepancies": list(self.discrepancies),
        }


def routh_hurwitz(coeffs: Sequence[float]) -> str:
    """
    Veredicto de Routh–Hurwitz para un polinomio mónico de grado 2 o 3.

    Las igualdades de frontera (dentro de 1e-12) dan ``Marginal``, salvo
    que las raíces muestren una parte real positiva.

    Raises:
        ValueError: si el grado no es 2 ni 3 o el polinomio no es mónico.
    """
    c = [float(v) for v in coeffs]
    if len(c) not in (3, 4):
        raise ValueError(f"Se requiere grado 2 o 3; recibido grado {len(c) - 1}")
    if abs(c[0] - 1.0) > EPS_FRONTERA:
        raise ValueError("El polinomio debe ser mónico")

    if len(c) == 3:
        condiciones = [c[1], c[2]]
    else:
        a2, a1, a0 = c[1], c[2], c[3]
        condiciones = [a2, a0, a2 * a1 - a0]

    if all(v > EPS_FRONTERA for v in condiciones):
        return ESTABLE
    if any(v < -EPS_FRONTERA for v in condiciones):
        return INESTABLE
    # Frontera: decide con las raíces
    if np.any(np.real(np.roots(c)) > 1e-9):
        return INESTABLE
    return MARGINAL


def numeric_jacobian(rhs: Callable, point, h: Optional[float] = None) -> np.ndarray:
    """Jacobiano por diferencias centradas, columna a columna."""
    x = np.asarray(point, dtype=float)
    n = x.size
    columnas = []
    for j in range(n):
        paso = h if h is not None else 1e-6 * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = paso
        columnas.append((np.asarray(rhs(x + e), dtype=float)
                         - np.asarray(rhs(x - e), dtype=float)) / (2 * paso))
    return np.stack(columnas, axis=1)


def _veredicto_autovalores(signos: Tuple[int, int, int]) -> str:
    n_pos, _, n_cero = signos
    if n_pos > 0:
        return INESTABLE
    if n_cero > 0:
        return MARGINAL
    return ESTABLE


def _diferencia_coeficientes(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def stability_report(coeffs: Sequence[float], jacobian,
                     referencia: Optional[Sequence[float]] = None) -> StabilityReport:
    """
    Contrasta el polinomio característico analítico con un jacobiano numérico.

    Args:
        coeffs: Coeficientes mónicos del polinomio analítico.
        jacobian: Jacobiano numérico en el equilibrio.
        referencia: Polinomio de referencia con el que comparar (opcional).

    Returns:
        StabilityReport; ``consistent`` indica si el veredicto de
        Routh–Hurwitz coincide con el de los signos de los autovalores.
    """
    coeficientes = [float(v) for v in coeffs]
    veredicto = routh_hurwitz(coeficientes)
    autovalores = np.linalg.eigvals(np.asarray(jacobian, dtype=float))
    signos = contar_signos(autovalores)
    discrepancias = []

    poly_jacobiano = np.real(np.poly(autovalores))
    diferencia = _diferencia_coeficientes(coeficientes, poly_jacobiano)
    if diferencia > 1e-6:
        discrepancias.append(
            f"Polinomio analítico {np.round(coeficientes, 6).tolist()} difiere del "
            f"jacobiano numérico {np.round(poly_jacobiano, 6).tolist()}")

    if referencia is not None:
        referencia = [float(v) for v in referencia]
        if len(referencia) != len(coeficientes) or \
                _diferencia_coeficientes(referencia, coeficientes) > 1e-6:
            discrepancias.append(
                f"Polinomio de referencia {referencia} (veredicto "
                f"{routh_hurwitz(referencia)}) difiere del calculado "
                f"{np.round(coeficientes, 6).tolist()} (veredicto {veredicto})")

    return StabilityReport(
        char_poly=coeficientes,
        routh_hurwitz_verdict=veredicto,
        jacobian_eig_signs=signos,
        consistent=veredicto == _veredicto_autovalores(signos),
        jacobian_eigenvalues=list(autovalores),
        discrepancies=discrepancias,
    )
