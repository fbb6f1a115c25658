"""
Modelos de tasa de crecimiento específica μ(S) con su derivada.

Todas las funciones aceptan escalares o arrays de numpy; con un escalar
devuelven ``float``.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Union

import numpy as np

from .errors import ConfigError, DomainError
from .utils import PUNTOS_MALLA, extremo_en_intervalo, raices_en_intervalo

Numero = Union[float, np.ndarray]


def _como_salida(valor: np.ndarray, entrada: Any) -> Numero:
    if np.ndim(entrada) == 0:
        return float(valor)
    return valor


def _validar_concentracion(S: Any) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if np.any(S < 0) or np.any(~np.isfinite(S)):
        raise DomainError("La concentración S debe ser finita y no negativa")
    return S


class GrowthRateModel:
    """Interfaz común de las cinéticas de crecimiento."""

    def valor(self, S: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivada(self, S: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Haldane(GrowthRateModel):
    """μ(S) = M·S / (K + S + a·S²)."""

    M: float
    K: float
    a: float

    def __post_init__(self):
        if self.M <= 0 or self.K <= 0 or self.a < 0:
            raise ConfigError("Haldane requiere M > 0, K > 0 y a >= 0")

    def valor(self, S):
        return self.M * S / (self.K + S + self.a * S * S)

    def derivada(self, S):
        denominador = self.K + S + self.a * S * S
        return self.M * (self.K - self.a * S * S) / (denominador * denominador)


@dataclass(frozen=True)
class Monod(GrowthRateModel):
    """μ(S) = mu_max·S / (K + S)."""

    mu_max: float
    K: float

    def __post_init__(self):
        if self.mu_max <= 0 or self.K <= 0:
            raise ConfigError("Monod requiere mu_max > 0 y K > 0")

    def valor(self, S):
        return self.mu_max * S / (self.K + S)

    def derivada(self, S):
        return self.mu_max * self.K / ((self.K + S) ** 2)


@dataclass(frozen=True)
class Custom(GrowthRateModel):
    """
    Cinética definida por el usuario.

    ``value_fn`` y ``derivative_fn`` deben aceptar arrays de numpy. El
    supremo y la constante de Lipschitz declarados se verifican por
    muestreo sobre [0, domain_max] al construir el modelo.
    """

    value_fn: Callable
    derivative_fn: Callable
    declared_sup: float
    declared_lipschitz: float
    domain_max: float = 100.0
    verificacion: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.declared_sup <= 0 or self.declared_lipschitz <= 0 or self.domain_max <= 0:
            raise ConfigError("Custom requiere supremo, Lipschitz y dominio positivos")
        malla = np.linspace(0.0, self.domain_max, PUNTOS_MALLA)
        valores = np.asarray(self.value_fn(malla), dtype=float)
        derivadas = np.asarray(self.derivative_fn(malla), dtype=float)

        if abs(valores[0]) > 1e-14:
            raise ConfigError("Custom: se requiere μ(0) = 0")
        if np.any(valores[1:] <= 0):
            raise ConfigError("Custom: μ debe ser positiva para S > 0")
        if np.max(valores) > self.declared_sup * (1 + 1e-9):
            raise ConfigError(
                f"Custom: supremo declarado {self.declared_sup} menor que el "
                f"muestreado {np.max(valores):.12g}")
        if np.max(np.abs(derivadas)) > self.declared_lipschitz * (1 + 1e-9):
            raise ConfigError(
                f"Custom: constante de Lipschitz declarada {self.declared_lipschitz} "
                f"menor que la muestreada {np.max(np.abs(derivadas)):.12g}")

        # Derivada contra diferencias centradas
        muestras = malla[1:-1:64]
        h = 1e-6 * np.maximum(1.0, muestras)
        dif = (np.asarray(self.value_fn(muestras + h)) -
               np.asarray(self.value_fn(muestras - h))) / (2 * h)
        analitica = np.asarray(self.derivative_fn(muestras), dtype=float)
        error = np.abs(dif - analitica)
        if np.any(error > 1e-6 * np.abs(analitica) + 1e-8):
            raise ConfigError("Custom: derivative_fn no coincide con diferencias finitas")
        self.verificacion["error_derivada"] = float(np.max(error))

    def valor(self, S):
        return np.asarray(self.value_fn(S), dtype=float)

    def derivada(self, S):
        return np.asarray(self.derivative_fn(S), dtype=float)


class CotasCrecimiento(NamedTuple):
    sup_mu: float
    L: float
    S_sup: float
    S_L: float


def mu(model: GrowthRateModel, S: Numero) -> Numero:
    """Evalúa μ(S); lanza DomainError si S < 0."""
    S_arr = _validar_concentracion(S)
    return _como_salida(np.asarray(model.valor(S_arr), dtype=float), S)


def mu_prime(model: GrowthRateModel, S: Numero) -> Numero:
    """Evalúa la derivada analítica μ'(S); lanza DomainError si S < 0."""
    S_arr = _validar_concentracion(S)
    return _como_salida(np.asarray(model.derivada(S_arr), dtype=float), S)


def mu_sup_and_lipschitz(model: GrowthRateModel, S_in: float) -> CotasCrecimiento:
    """
    Supremo de μ y constante de Lipschitz de μ en [0, S_in].

    Haldane usa la fórmula del punto estacionario √(K/a); Monod es monótona;
    el resto se resuelve con malla y refinamiento. Para Custom se devuelven
    las cotas declaradas (ya verificadas al construir el modelo).

    Args:
        model: Cinética de crecimiento.
        S_in: Extremo derecho del intervalo.

    Returns:
        CotasCrecimiento(sup_mu, L, S_sup, S_L).
    """
    if S_in <= 0:
        raise DomainError("S_in debe ser positivo")

    if isinstance(model, Custom):
        return CotasCrecimiento(model.declared_sup, model.declared_lipschitz,
                                float("nan"), float("nan"))

    if isinstance(model, Haldane) and model.a > 0:
        S_pico = np.sqrt(model.K / model.a)
        S_sup = S_pico if S_pico <= S_in else S_in
        sup_mu = mu(model, S_sup)
    elif isinstance(model, Monod):
        S_sup, sup_mu = S_in, mu(model, S_in)
    else:
        S_sup, sup_mu = extremo_en_intervalo(lambda s: mu(model, s), 0.0, S_in)

    S_L, L = extremo_en_intervalo(lambda s: np.abs(mu_prime(model, s)), 0.0, S_in,
                                  n_puntos=10_000)
    return CotasCrecimiento(float(sup_mu), float(L), float(S_sup), float(S_L))


def invert_mu(model: GrowthRateModel, target: float, S_in: float) -> List[float]:
    """
    Todas las soluciones de μ(S) = target en el intervalo abierto (0, S_in).

    Args:
        model: Cinética de crecimiento.
        target: Nivel buscado (positivo).
        S_in: Extremo derecho del intervalo.

    Returns:
        Lista ascendente de concentraciones; vacía si el nivel no se alcanza.
    """
    if target <= 0:
        raise DomainError("El nivel buscado debe ser positivo")
    return raices_en_intervalo(lambda s: mu(model, s) - target, 0.0, S_in)


def growth_from_spec(spec: Dict[str, Any]) -> GrowthRateModel:
    """Construye una cinética desde su descripción en el archivo de escenario."""
    datos = dict(spec)
    tipo = str(datos.pop("type", "")).lower()
    if tipo == "haldane":
        return Haldane(M=float(datos["M"]), K=float(datos["K"]), a=float(datos["a"]))
    if tipo == "monod":
        return Monod(mu_max=float(datos["mu_max"]), K=float(datos["K"]))
    raise ConfigError(f"Tipo de cinética desconocido: {tipo!r}")
