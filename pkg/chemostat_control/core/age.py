"""
Modelo de quimiostato de tres estados obtenido de la estructura por edades.

Estados (X, Y, S)::

    dX/dt = q0·μ(S)·Y − (b + D)·X
    dY/dt = p0·μ(S)·Y + γ·X − (b + D)·Y
    dS/dt = D·(S_in − S) − μ(S)·X

La realimentación depende sólo de X y S.
"""
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from . import estabilidad
from .errors import CertificationRefusal, ConfigError, DomainError
from .kinetics import GrowthRateModel, invert_mu, mu, mu_prime, mu_sup_and_lipschitz
from .lumped import ConstantesTransformacion, FeedbackConfig
from .utils import extremo_en_intervalo


@dataclass(frozen=True)
class AgeSystem:
    growth: GrowthRateModel
    S_in: float
    D_star: float
    b: float
    p0: float
    q0: float
    gamma: float

    def __post_init__(self):
        for nombre in ("S_in", "D_star", "p0", "q0"):
            if not getattr(self, nombre) > 0:
                raise ConfigError(f"{nombre} debe ser positivo")
        for nombre in ("b", "gamma"):
            if getattr(self, nombre) < 0:
                raise ConfigError(f"{nombre} debe ser no negativo")

    @property
    def dimension(self) -> int:
        return 3

    @property
    def tasa_equilibrio(self) -> float:
        """Nivel μ(S*) = (b + D*)² / (p0(b + D*) + γq0)."""
        c = self.b + self.D_star
        return c * c / (self.p0 * c + self.gamma * self.q0)


@dataclass(frozen=True)
class AgeEquilibrium:
    X_star: float
    Y_star: float
    S_star: float
    kappa: float
    lam: float

    @property
    def estado(self) -> np.ndarray:
        return np.array([self.X_star, self.Y_star, self.S_star])


@dataclass(frozen=True)
class LyapunovConstants3:
    A: float
    Omega: float
    B: float
    r: float
    c: float
    R: float
    phi: float


class ResultadoSupuestoC(NamedTuple):
    holds: bool
    margin: float
    r: float


class LinealizacionLazoCerrado3(NamedTuple):
    autovalores: np.ndarray
    esperados: np.ndarray
    de_referencia: np.ndarray
    desviacion: float
    discrepancia_referencia: bool


def _componentes(sys: AgeSystem, state) -> tuple:
    estado = np.asarray(state, dtype=float)
    X, Y, S = estado[..., 0], estado[..., 1], estado[..., 2]
    if np.any(X <= 0) or np.any(Y <= 0) or np.any(S <= 0) or np.any(S >= sys.S_in):
        raise DomainError(
            f"Estado fuera del dominio abierto X>0, Y>0, 0<S<{sys.S_in}: {estado.tolist()}")
    return X, Y, S


def rhs_open3(sys: AgeSystem, state, D: float) -> np.ndarray:
    if D < 0:
        raise DomainError("La tasa de dilución debe ser no negativa")
    X, Y, S = _componentes(sys, state)
    mu_S = mu(sys.growth, S)
    return np.array([
        sys.q0 * mu_S * Y - (sys.b + D) * X,
        sys.p0 * mu_S * Y + sys.gamma * X - (sys.b + D) * Y,
        D * (sys.S_in - S) - mu_S * X,
    ])


def equilibria3(sys: AgeSystem) -> List[AgeEquilibrium]:
    """Equilibrios interiores ordenados por S* ascendente."""
    c = sys.b + sys.D_star
    w = sys.p0 * c + sys.gamma * sys.q0
    equilibrios = []
    for S_star in invert_mu(sys.growth, sys.tasa_equilibrio, sys.S_in):
        X_star = sys.D_star * (sys.S_in - S_star) * w / c ** 2
        Y_star = sys.D_star * (sys.S_in - S_star) * w ** 2 / (sys.q0 * c ** 3)
        equilibrios.append(AgeEquilibrium(
            X_star=float(X_star), Y_star=float(Y_star), S_star=float(S_star),
            kappa=float((sys.S_in - S_star) / S_star),
            lam=float(sys.gamma * X_star / (Y_star * c))))
    return equilibrios


def lambda_two_ways(sys: AgeSystem, eq: AgeEquilibrium) -> tuple:
    """λ = γX*/(Y*(b+D*)) y λ = 1 − p0μ(S*)/(b+D*)."""
    c = sys.b + sys.D_star
    return (sys.gamma * eq.X_star / (eq.Y_star * c),
            1.0 - sys.p0 * mu(sys.growth, eq.S_star) / c)


def to_z3(sys: AgeSystem, eq: AgeEquilibrium, state) -> np.ndarray:
    X, Y, S = _componentes(sys, state)
    x1 = np.log((sys.S_in - eq.S_star) * X / (eq.X_star * (sys.S_in - S)))
    x2 = np.log(eq.X_star * Y / (eq.Y_star * X))
    x3 = np.log(S * (sys.S_in - eq.S_star) / (eq.S_star * (sys.S_in - S)))
    return np.stack([x1, x2, x3], axis=-1)


def from_z3(sys: AgeSystem, eq: AgeEquilibrium, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x1, x2, x3 = z[..., 0], z[..., 1], z[..., 2]
    S = sys.S_in / (eq.kappa * np.exp(-x3) + 1.0)
    X = eq.X_star * (sys.S_in - S) * np.exp(x1) / (sys.S_in - eq.S_star)
    Y = eq.Y_star * X * np.exp(x2) / eq.X_star
    return np.stack([X, Y, S], axis=-1)


def transform_constants3(sys: AgeSystem, eq: AgeEquilibrium, x3) -> ConstantesTransformacion:
    p = eq.kappa * np.exp(-np.asarray(x3, dtype=float)) + 1.0
    g = np.asarray(mu(sys.growth, sys.S_in / p)) / mu(sys.growth, eq.S_star)
    if np.ndim(x3) == 0:
        return ConstantesTransformacion(float(g), float(p))
    return ConstantesTransformacion(g, p)


def feedback_D3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig, state) -> float:
    """
    D = D*μ(S)X/(μ(S*)X*) + δ|μ(S) − μ(S*)|^(1+α)/μ(S*)^(1+α) si S ≤ S*.

    No depende de Y.
    """
    X, _, S = _componentes(sys, state)
    mu_S = mu(sys.growth, S)
    mu_e = mu(sys.growth, eq.S_star)
    D = sys.D_star * mu_S * X / (mu_e * eq.X_star)
    if S <= eq.S_star:
        D += cfg.delta * abs(mu_S - mu_e) ** (1 + cfg.alpha) / mu_e ** (1 + cfg.alpha)
    return float(D)


def rhs_closed3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig, state) -> np.ndarray:
    return rhs_open3(sys, state, feedback_D3(sys, eq, cfg, state))


def _termino_u3(cfg, x3, g):
    return np.where(np.asarray(x3) <= 0, cfg.delta * np.abs(g - 1.0) ** (1 + cfg.alpha), 0.0)


def feedback_z3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig, z):
    z = np.asarray(z, dtype=float)
    x1, x3 = z[..., 0], z[..., 2]
    g, p = transform_constants3(sys, eq, x3)
    return ((eq.kappa + 1) * sys.D_star * g * np.exp(x1 - x3) / p
            + _termino_u3(cfg, x3, g))


def rhs_z_closed3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig, z) -> np.ndarray:
    """
    Lazo cerrado en coordenadas z.

    ẋ2 se implementa como (b+D*)[λ(1−g) + λ(e^(−x2) − 1) + g(1 − e^(x2))],
    lo que coincide con el transporte de ``rhs_closed3`` por ``to_z3``.
    """
    z = np.asarray(z, dtype=float)
    x1, x2, x3 = z[..., 0], z[..., 1], z[..., 2]
    c = sys.b + sys.D_star
    lam = eq.lam
    g, p = transform_constants3(sys, eq, x3)
    u = _termino_u3(cfg, x3, g)
    dx1 = (c * g * (np.exp(x2) - 1) + sys.b * (g - 1)
           + sys.D_star * g * (1 - np.exp(x1)))
    dx2 = c * (lam * (1 - g) + lam * (np.exp(-x2) - 1) + g * (1 - np.exp(x2)))
    dx3 = sys.D_star * g * np.exp(x1 - x3) * (1 - np.exp(x3)) + p * u
    return np.stack([dx1, dx2, dx3], axis=-1)


def pushforward_z3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig, z) -> np.ndarray:
    """Transporta ``rhs_closed3`` a coordenadas z con el jacobiano exacto de ``to_z3``."""
    X, Y, S = from_z3(sys, eq, z)
    dX, dY, dS = rhs_closed3(sys, eq, cfg, [X, Y, S])
    return np.array([
        dX / X + dS / (sys.S_in - S),
        dY / Y - dX / X,
        dS * (1.0 / S + 1.0 / (sys.S_in - S)),
    ])


def classify_equilibrium3(sys: AgeSystem, eq: AgeEquilibrium,
                          reference_poly: Optional[Sequence[float]] = None):
    """
    Estabilidad local del equilibrio en lazo abierto (D = D*).

    Polinomio h(s) = s³ + a2·s² + a1·s + a0 con ζ = μ'(S*)X*; el veredicto
    de Routh–Hurwitz se contrasta con los autovalores de un jacobiano
    numérico. Si se pasa ``reference_poly`` (p. ej. un polinomio de referencia),
    cualquier diferencia con los coeficientes calculados queda en
    ``discrepancies`` del informe.
    """
    c = sys.b + sys.D_star
    w = sys.p0 * c + sys.gamma * sys.q0
    zeta = mu_prime(sys.growth, eq.S_star) * eq.X_star
    gq = sys.gamma * sys.q0
    coeficientes = [
        1.0,
        sys.b + gq * c / w + 2 * sys.D_star + zeta,
        c * (sys.D_star + (sys.D_star + zeta) * gq / w + 2 * zeta),
        c ** 2 * zeta,
    ]
    jacobiano = estabilidad.numeric_jacobian(
        lambda x: rhs_open3(sys, x, sys.D_star), eq.estado)
    return estabilidad.stability_report(coeficientes, jacobiano, reference_poly)


def closed_loop_linearization3(sys: AgeSystem, eq: AgeEquilibrium,
                               cfg: FeedbackConfig) -> LinealizacionLazoCerrado3:
    """
    Espectro del lazo cerrado en z = 0.

    La linealización exacta da {−D*, −D*, −(1+λ)(b+D*)}; se compara
    también con el par de referencia {−D*, −2λ}.
    """
    jacobiano = estabilidad.numeric_jacobian(
        lambda z: rhs_z_closed3(sys, eq, cfg, z), np.zeros(3))
    autovalores = np.sort(np.real(np.linalg.eigvals(jacobiano)))
    c = sys.b + sys.D_star
    esperados = np.sort(np.array([-sys.D_star, -sys.D_star, -(1 + eq.lam) * c]))
    de_referencia = np.sort(np.array([-sys.D_star, -sys.D_star, -2 * eq.lam]))
    desviacion = float(np.max(np.abs(autovalores - esperados)))
    discrepancia = bool(np.max(np.abs(autovalores - de_referencia)) > 1e-3)
    return LinealizacionLazoCerrado3(autovalores, esperados, de_referencia,
                                     desviacion, discrepancia)


def _lado_izquierdo_C(sys: AgeSystem, eq: AgeEquilibrium, phi: float):
    c = sys.b + sys.D_star
    lam = eq.lam
    mu_e = mu(sys.growth, eq.S_star)
    lineal = sys.b - lam * c / 2
    cuadratico = (1 + lam) * lam ** 2 * phi * c ** 2 / (4 * sys.D_star)

    def lado(S):
        t = mu_e / mu(sys.growth, S) - 1.0
        return lineal * t + cuadratico * t * t

    return lado


def check_assumption_C(sys: AgeSystem, eq: AgeEquilibrium, phi: float) -> ResultadoSupuestoC:
    """
    Supuesto (C) para un φ > 1 dado.

    margin = D*(1 − 1/(4(1+λ)φ)) − sup sobre [S*, S_in] del lado
    izquierdo; r coincide con el margen.
    """
    if not phi > 1:
        raise ConfigError("phi debe ser mayor que 1")
    lado_derecho = sys.D_star * (1 - 1 / (4 * (1 + eq.lam) * phi))
    _, supremo = extremo_en_intervalo(_lado_izquierdo_C(sys, eq, phi), eq.S_star, sys.S_in)
    margen = float(lado_derecho - supremo)
    return ResultadoSupuestoC(bool(margen > 0), margen, margen)


def find_phi(sys: AgeSystem, eq: AgeEquilibrium, n_puntos: int = 120) -> Optional[float]:
    """φ de mayor margen en una malla logarítmica de (1, 100]; None si ninguno sirve."""
    mejor_phi, mejor_margen = None, 0.0
    for phi in 1.0 + np.geomspace(1e-3, 99.0, n_puntos):
        resultado = check_assumption_C(sys, eq, float(phi))
        if resultado.margin > mejor_margen:
            mejor_phi, mejor_margen = float(phi), resultado.margin
    return mejor_phi


def lyapunov_constants3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig,
                        phi: float) -> LyapunovConstants3:
    """
    Constantes de la función de Lyapunov del modelo de tres estados.

    B = (1+λ)φ(b+D*)²/D*, Ω = 2b² + λB²D*²/(2(b+D*)²), r del supuesto (C),
    c mínimo que cumple la condición sobre r·e^c más ln 2, A = L·S*/μ(S*)
    y R = 2A²Ωe^c/D*² (R = 1 si esa expresión es nula).

    Raises:
        CertificationRefusal: si el supuesto (C) no se cumple para ``phi``.
    """
    supuesto = check_assumption_C(sys, eq, phi)
    if not supuesto.holds:
        raise CertificationRefusal(
            f"El supuesto (C) no se cumple con phi={phi} (margen {supuesto.margin:.6g})",
            supuesto.margin)

    c_tasa = sys.b + sys.D_star
    lam = eq.lam
    B = (1 + lam) * phi * c_tasa ** 2 / sys.D_star
    Omega = 2 * sys.b ** 2 + lam * B ** 2 * sys.D_star ** 2 / (2 * c_tasa ** 2)

    mu_e = mu(sys.growth, eq.S_star)
    _, max_relativo = extremo_en_intervalo(
        lambda s: np.abs(mu(sys.growth, s) - mu_e) / mu(sys.growth, s),
        eq.S_star, sys.S_in)
    c_min = np.log(((sys.b + lam * c_tasa / 2) * max_relativo + 2 * sys.D_star) / supuesto.r)
    c = max(float(c_min), 0.0) + np.log(2.0)

    cotas = mu_sup_and_lipschitz(sys.growth, sys.S_in)
    A = cotas.L * eq.S_star / mu_e
    R = 2 * A ** 2 * Omega * np.exp(c) / sys.D_star ** 2
    if R <= 0:
        R = 1.0
    return LyapunovConstants3(A=float(A), Omega=float(Omega), B=float(B),
                              r=float(supuesto.r), c=float(c), R=float(R), phi=float(phi))


def _Q3(sys, eq, cfg, consts, x3: float) -> float:
    if x3 <= 0:
        integral = 0.0
        if consts.Omega > 0 and x3 < 0:
            def integrando(s):
                g, p = transform_constants3(sys, eq, s)
                return abs(g - 1.0) ** (1 - cfg.alpha) / (p * g)

            integral, _ = quad(integrando, x3, 0.0, epsabs=1e-10, epsrel=1e-10, limit=200)
        return 0.5 * x3 ** 2 + consts.Omega / (2 * sys.D_star * cfg.delta) * integral

    def integrando_pos(s):
        g, _ = transform_constants3(sys, eq, s)
        return np.exp(s) * (np.exp(s) - 1.0) / g ** 2

    integral, _ = quad(integrando_pos, 0.0, x3, epsabs=1e-10, epsrel=1e-10, limit=200)
    return consts.R * integral


def V3(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig,
       consts: LyapunovConstants3, z) -> float:
    x1, x2, x3 = float(z[0]), float(z[1]), float(z[2])
    c = sys.b + sys.D_star
    return float(np.exp(x1) - x1 - 1.0
                 + consts.B * (np.exp(x2) - x2 - 1.0) / c
                 + _Q3(sys, eq, cfg, consts, x3))


def V3_dot(sys: AgeSystem, eq: AgeEquilibrium, cfg: FeedbackConfig,
           consts: LyapunovConstants3, z):
    """Derivada de V a lo largo del lazo cerrado; acepta (3,) o (n, 3)."""
    z = np.asarray(z, dtype=float)
    x1, x2, x3 = z[..., 0], z[..., 1], z[..., 2]
    c = sys.b + sys.D_star
    lam = eq.lam
    B = consts.B
    g, p = transform_constants3(sys, eq, x3)
    u = _termino_u3(cfg, x3, g)
    q_prima = np.where(
        x3 <= 0,
        x3 - consts.Omega / (2 * sys.D_star * cfg.delta) * np.abs(g - 1.0) ** (1 - cfg.alpha) / (p * g),
        consts.R * np.exp(x3) * (np.exp(x3) - 1.0) / g ** 2)
    e1 = np.exp(x1) - 1.0
    e2 = np.exp(x2) - 1.0
    valor = (c * g * e1 * e2
             + sys.b * (g - 1.0) * e1
             + B * lam * (1.0 - g) * e2
             - B * (lam * np.exp(-x2) + g) * e2 ** 2
             - sys.D_star * g * e1 ** 2
             - sys.D_star * g * np.exp(x1 - x3) * q_prima * (np.exp(x3) - 1.0)
             + q_prima * p * u)
    if np.ndim(valor) == 0:
        return float(valor)
    return valor


def resumen_equilibrio(sys: AgeSystem, eq: AgeEquilibrium) -> Dict[str, float]:
    lam_a, lam_b = lambda_two_ways(sys, eq)
    return {"X_star": eq.X_star, "Y_star": eq.Y_star, "S_star": eq.S_star,
            "kappa": eq.kappa, "lambda": eq.lam, "lambda_alternativa": lam_b,
            "lambda_diferencia": abs(lam_a - lam_b)}
