"""
Modelo agregado de quimiostato con mortalidad (estados X, S).

Dinámica en lazo abierto::

    dX/dt = (p0·μ(S) − b − D)·X
    dS/dt = D·(S_in − S) − μ(S)·X

El módulo incluye equilibrios, el cambio de coordenadas a z = (x1, x2),
la realimentación estabilizante, el supuesto (A), la función de Lyapunov
con sus constantes y el escenario divergente cuando (A) no se cumple.
"""
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional

import numpy as np
from scipy.integrate import quad

from . import estabilidad
from .errors import CertificationRefusal, ConfigError, DomainError, HypothesisError
from .kinetics import GrowthRateModel, mu, mu_prime, mu_sup_and_lipschitz, invert_mu
from .utils import PUNTOS_MALLA, extremo_en_intervalo


@dataclass(frozen=True)
class LumpedSystem:
    growth: GrowthRateModel
    S_in: float
    D_star: float
    b: float
    p0: float = 1.0

    def __post_init__(self):
        if self.S_in <= 0:
            raise ConfigError("S_in debe ser positivo")
        if self.D_star <= 0:
            raise ConfigError("D_star debe ser positivo")
        if self.b < 0:
            raise ConfigError("b debe ser no negativo")
        if self.p0 <= 0:
            raise ConfigError("p0 debe ser positivo")

    @property
    def dimension(self) -> int:
        return 2


@dataclass(frozen=True)
class LumpedEquilibrium:
    X_star: float
    S_star: float
    kappa: float

    @property
    def estado(self) -> np.ndarray:
        return np.array([self.X_star, self.S_star])


@dataclass(frozen=True)
class FeedbackConfig:
    """Ganancias de la realimentación: δ > 0 y α en [0, 1)."""

    delta: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta debe ser positivo")
        if not 0 <= self.alpha < 1:
            raise ConfigError("alpha debe estar en [0, 1)")


@dataclass(frozen=True)
class LyapunovConstants2:
    A: float
    r: float
    c: float
    R: float


class ConstantesTransformacion(NamedTuple):
    g: np.ndarray
    p: np.ndarray


class ResultadoSupuestoA(NamedTuple):
    holds: bool
    margin: float
    S_min: float


class LinealizacionLazoCerrado(NamedTuple):
    autovalores: np.ndarray
    esperados: np.ndarray
    desviacion: float


@dataclass(frozen=True)
class Theorem2Scenario:
    theta: float
    beta: float
    xbar2: float
    x1_0: float
    G: float
    M: float
    S_bar: float
    S_xbar2: float
    equilibrio: LumpedEquilibrium

    def a_diccionario(self) -> Dict[str, float]:
        return {
            "theta": self.theta, "beta": self.beta, "xbar2": self.xbar2,
            "x1_0": self.x1_0, "G": self.G, "M": self.M, "S_bar": self.S_bar,
            "S_xbar2": self.S_xbar2, "X_star": self.equilibrio.X_star,
            "S_star": self.equilibrio.S_star,
        }


def _componentes(sys: LumpedSystem, state) -> tuple:
    estado = np.asarray(state, dtype=float)
    X, S = estado[..., 0], estado[..., 1]
    if np.any(X <= 0) or np.any(S <= 0) or np.any(S >= sys.S_in):
        raise DomainError(
            f"Estado fuera del dominio abierto X>0, 0<S<{sys.S_in}: {estado.tolist()}")
    return X, S


def rhs_open(sys: LumpedSystem, state, D: float) -> np.ndarray:
    """Lado derecho en lazo abierto con tasa de dilución constante D."""
    if D < 0:
        raise DomainError("La tasa de dilución debe ser no negativa")
    X, S = _componentes(sys, state)
    mu_S = mu(sys.growth, S)
    return np.array([(sys.p0 * mu_S - sys.b - D) * X,
                     D * (sys.S_in - S) - mu_S * X])


def equilibria(sys: LumpedSystem) -> List[LumpedEquilibrium]:
    """
    Equilibrios interiores, ordenados por S* ascendente.

    Cada S* resuelve p0·μ(S*) = b + D*; X* = D*(S_in − S*)/μ(S*).
    """
    nivel = (sys.b + sys.D_star) / sys.p0
    equilibrios = []
    for S_star in invert_mu(sys.growth, nivel, sys.S_in):
        X_star = sys.D_star * (sys.S_in - S_star) / mu(sys.growth, S_star)
        equilibrios.append(LumpedEquilibrium(
            X_star=float(X_star), S_star=float(S_star),
            kappa=float((sys.S_in - S_star) / S_star)))
    return equilibrios


def to_z(sys: LumpedSystem, eq: LumpedEquilibrium, state) -> np.ndarray:
    X, S = _componentes(sys, state)
    mu_e = mu(sys.growth, eq.S_star)
    x1 = np.log(mu_e * X / (sys.D_star * (sys.S_in - S)))
    x2 = np.log(S * (sys.S_in - eq.S_star) / (eq.S_star * (sys.S_in - S)))
    return np.stack([x1, x2], axis=-1)


def from_z(sys: LumpedSystem, eq: LumpedEquilibrium, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x1, x2 = z[..., 0], z[..., 1]
    S = sys.S_in / (eq.kappa * np.exp(-x2) + 1.0)
    X = sys.D_star * (sys.S_in - S) * np.exp(x1) / mu(sys.growth, eq.S_star)
    return np.stack([X, S], axis=-1)


def transform_constants(sys: LumpedSystem, eq: LumpedEquilibrium,
                        x2) -> ConstantesTransformacion:
    """p(x2) = κ·e^(−x2) + 1 y g(x2) = μ(S_in/p(x2))/μ(S*)."""
    p = eq.kappa * np.exp(-np.asarray(x2, dtype=float)) + 1.0
    g = np.asarray(mu(sys.growth, sys.S_in / p)) / mu(sys.growth, eq.S_star)
    if np.ndim(x2) == 0:
        return ConstantesTransformacion(float(g), float(p))
    return ConstantesTransformacion(g, p)


def feedback_D(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
               state) -> float:
    """
    Tasa de dilución realimentada en coordenadas originales.

    D = D*·μ(S)·X/(μ(S*)·X*) + δ·b·|μ(S) − μ(S*)|^(1+α)/μ(S*)^(1+α) si S ≤ S*;
    sólo el primer término si S > S*.
    """
    X, S = _componentes(sys, state)
    mu_S = mu(sys.growth, S)
    mu_e = mu(sys.growth, eq.S_star)
    D = sys.D_star * mu_S * X / (mu_e * eq.X_star)
    if S <= eq.S_star:
        D += (cfg.delta * sys.b / mu_e ** (1 + cfg.alpha)
              * abs(mu_S - mu_e) ** (1 + cfg.alpha))
    return float(D)


def rhs_closed(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
               state) -> np.ndarray:
    return rhs_open(sys, state, feedback_D(sys, eq, cfg, state))


def sdot_closed_form(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
                     state) -> float:
    """Ecuación de S en lazo cerrado escrita de forma explícita."""
    X, S = _componentes(sys, state)
    mu_S = mu(sys.growth, S)
    mu_e = mu(sys.growth, eq.S_star)
    valor = mu_S * X * (eq.S_star - S) / (sys.S_in - eq.S_star)
    if S <= eq.S_star:
        valor += (cfg.delta * sys.b * (sys.S_in - S)
                  * abs(mu_S - mu_e) ** (1 + cfg.alpha) / mu_e ** (1 + cfg.alpha))
    return float(valor)


def _termino_u(sys, eq, cfg, x2, g):
    return np.where(np.asarray(x2) <= 0,
                    cfg.delta * sys.b * np.abs(g - 1.0) ** (1 + cfg.alpha), 0.0)


def feedback_z(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig, z):
    """La misma realimentación escrita en coordenadas z."""
    z = np.asarray(z, dtype=float)
    x1, x2 = z[..., 0], z[..., 1]
    g, p = transform_constants(sys, eq, x2)
    return ((eq.kappa + 1) * sys.D_star * g * np.exp(x1 - x2) / p
            + _termino_u(sys, eq, cfg, x2, g))


def rhs_z_closed(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
                 z) -> np.ndarray:
    """Lazo cerrado en coordenadas z (el origen es el equilibrio)."""
    z = np.asarray(z, dtype=float)
    x1, x2 = z[..., 0], z[..., 1]
    g, p = transform_constants(sys, eq, x2)
    u = _termino_u(sys, eq, cfg, x2, g)
    dx1 = sys.b * (g - 1) + sys.D_star * g * (1 - np.exp(x1))
    dx2 = sys.D_star * g * np.exp(x1 - x2) * (1 - np.exp(x2)) + p * u
    return np.stack([dx1, dx2], axis=-1)


def classify_equilibrium(sys: LumpedSystem, eq: LumpedEquilibrium):
    """
    Estabilidad local del equilibrio en lazo abierto (D = D*).

    Usa el polinomio característico f(s) = s² + D*(g(0) + p(0)g'(0))s +
    D*p(0)g'(0)(b + D*g(0)) y lo contrasta con los autovalores de un
    jacobiano numérico en coordenadas originales.

    Returns:
        StabilityReport.
    """
    mu_e = mu(sys.growth, eq.S_star)
    # p(0)·g'(0) = μ'(S*)(S_in − S*)/μ(S*), con g(0) = 1
    pg = mu_prime(sys.growth, eq.S_star) * (sys.S_in - eq.S_star) / mu_e
    coeficientes = [1.0,
                    sys.D_star * (1.0 + pg),
                    sys.D_star * pg * (sys.b + sys.D_star)]
    jacobiano = estabilidad.numeric_jacobian(
        lambda x: rhs_open(sys, x, sys.D_star), eq.estado)
    return estabilidad.stability_report(coeficientes, jacobiano)


def closed_loop_linearization(sys: LumpedSystem, eq: LumpedEquilibrium,
                              cfg: FeedbackConfig) -> LinealizacionLazoCerrado:
    """Espectro del lazo cerrado en z = 0 frente al esperado {−D*, −D*}."""
    jacobiano = estabilidad.numeric_jacobian(
        lambda z: rhs_z_closed(sys, eq, cfg, z), np.zeros(2))
    autovalores = np.sort_complex(np.linalg.eigvals(jacobiano))
    esperados = np.array([-sys.D_star, -sys.D_star])
    return LinealizacionLazoCerrado(autovalores, esperados,
                                    float(np.max(np.abs(autovalores - esperados))))


def check_assumption_A(sys: LumpedSystem, eq: LumpedEquilibrium) -> ResultadoSupuestoA:
    """Supuesto (A): p0·μ(S) > b para todo S en [S*, S_in]."""
    S_min, margen = extremo_en_intervalo(
        lambda s: sys.p0 * mu(sys.growth, s) - sys.b,
        eq.S_star, sys.S_in, maximizar=False)
    return ResultadoSupuestoA(bool(margen > 0), float(margen), float(S_min))


def lyapunov_constants(sys: LumpedSystem, eq: LumpedEquilibrium,
                       cfg: FeedbackConfig) -> LyapunovConstants2:
    """
    Constantes A, r, c, R de la función de Lyapunov.

    A = L·p0·S*/(b + D*); r es el supremo de b(μ(S*)/μ(S) − 1)/D* en
    [S*, S_in] (recortado a [0, 1)); c = −ln((1 − r)/2); R es el doble de
    su cota inferior A²b²e^c/D*² (R = 1 si esa cota es nula).

    Raises:
        CertificationRefusal: si el supuesto (A) no se cumple.
    """
    supuesto = check_assumption_A(sys, eq)
    if not supuesto.holds:
        raise CertificationRefusal(
            f"El supuesto (A) no se cumple (margen {supuesto.margin:.6g})",
            supuesto.margin)

    cotas = mu_sup_and_lipschitz(sys.growth, sys.S_in)
    A = cotas.L * sys.p0 * eq.S_star / (sys.b + sys.D_star)

    mu_e = mu(sys.growth, eq.S_star)
    r = 0.0
    if sys.b > 0:
        _, sup_r = extremo_en_intervalo(
            lambda s: sys.b * (mu_e / mu(sys.growth, s) - 1.0) / sys.D_star,
            eq.S_star, sys.S_in)
        r = max(0.0, sup_r)
    if r >= 1.0:
        raise CertificationRefusal(f"r = {r:.6g} no es menor que 1", supuesto.margin)

    c = -np.log((1.0 - r) / 2.0)
    R = 2.0 * A ** 2 * sys.b ** 2 * np.exp(c) / sys.D_star ** 2
    if R <= 0:
        R = 1.0
    return LyapunovConstants2(A=float(A), r=float(r), c=float(c), R=float(R))


def _Q(sys, eq, cfg, consts, x2: float) -> float:
    if x2 <= 0:
        def integrando(s):
            g, p = transform_constants(sys, eq, s)
            return abs(g - 1.0) ** (1 - cfg.alpha) / (p * g)

        integral = 0.0
        if sys.b > 0 and x2 < 0:
            integral, _ = quad(integrando, x2, 0.0, epsabs=1e-10, epsrel=1e-10, limit=200)
        return 0.5 * x2 ** 2 + sys.b / (2 * sys.D_star * cfg.delta) * integral

    def integrando_pos(s):
        g, _ = transform_constants(sys, eq, s)
        return np.exp(s) * (np.exp(s) - 1.0) / g ** 2

    integral, _ = quad(integrando_pos, 0.0, x2, epsabs=1e-10, epsrel=1e-10, limit=200)
    return consts.R * integral


def V2(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
       consts: LyapunovConstants2, z) -> float:
    """V(x) = e^x1 − x1 − 1 + Q(x2)."""
    x1, x2 = float(z[0]), float(z[1])
    return float(np.exp(x1) - x1 - 1.0 + _Q(sys, eq, cfg, consts, x2))


def V2_dot(sys: LumpedSystem, eq: LumpedEquilibrium, cfg: FeedbackConfig,
           consts: LyapunovConstants2, z):
    """
    Derivada de V a lo largo del lazo cerrado, evaluada analíticamente.

    Acepta un punto (2,) o un lote (n, 2).
    """
    z = np.asarray(z, dtype=float)
    x1, x2 = z[..., 0], z[..., 1]
    g, p = transform_constants(sys, eq, x2)
    u = _termino_u(sys, eq, cfg, x2, g)
    q_prima = np.where(
        x2 <= 0,
        x2 - sys.b / (2 * sys.D_star * cfg.delta) * np.abs(g - 1.0) ** (1 - cfg.alpha) / (p * g),
        consts.R * np.exp(x2) * (np.exp(x2) - 1.0) / g ** 2)
    e1 = np.exp(x1) - 1.0
    valor = (sys.b * (g - 1.0) * e1
             - sys.D_star * g * e1 ** 2
             + q_prima * p * u
             - sys.D_star * q_prima * g * np.exp(x1 - x2) * (np.exp(x2) - 1.0))
    if np.ndim(valor) == 0:
        return float(valor)
    return valor


def _cola_decreciente(sys: LumpedSystem, S_izq: float) -> np.ndarray:
    malla = np.linspace(S_izq, sys.S_in, PUNTOS_MALLA)[1:-1]
    derivadas = mu_prime(sys.growth, malla)
    # decreciente[i] es True si μ' <= 0 en [malla[i], S_in]
    max_desde = np.maximum.accumulate(derivadas[::-1])[::-1]
    return malla, max_desde <= 0


def theorem2_scenario(sys: LumpedSystem, S_bar: Optional[float] = None,
                      eq: Optional[LumpedEquilibrium] = None) -> Theorem2Scenario:
    """
    Construye condiciones iniciales con x1(t) ≤ x1(0) − θt para toda
    realimentación no negativa.

    Requiere S̄ en (S*, S_in) con p0μ(S_in) < p0μ(S̄) < b y μ' ≤ 0 en
    [S̄, S_in]. Si ``S_bar`` es None se busca en la cola decreciente de μ.

    Args:
        sys: Sistema agregado.
        S_bar: Concentración S̄ (opcional).
        eq: Equilibrio de referencia; por defecto el de menor S*.

    Returns:
        Theorem2Scenario con θ, β, x̄2, x1(0), G y M.

    Raises:
        HypothesisError: si las hipótesis no pueden satisfacerse.
    """
    equilibrios = equilibria(sys)
    if eq is None:
        candidatos = [e for e in equilibrios if S_bar is None or e.S_star < S_bar]
        if not candidatos:
            raise HypothesisError("No hay equilibrio interior con S* < S̄")
        eq = candidatos[0]

    mu_in = mu(sys.growth, sys.S_in)
    if S_bar is None:
        malla, decreciente = _cola_decreciente(sys, eq.S_star)
        valores = sys.p0 * mu(sys.growth, malla)
        factibles = malla[decreciente & (valores > sys.p0 * mu_in) & (valores < sys.b)]
        if len(factibles) == 0:
            raise HypothesisError("Ningún S̄ en (S*, S_in) satisface las hipótesis")
        S_bar = float(factibles[len(factibles) // 2])

    if not eq.S_star < S_bar < sys.S_in:
        raise HypothesisError(f"S̄ = {S_bar} debe estar en (S*, S_in)")
    mu_bar = mu(sys.growth, S_bar)
    if not sys.p0 * mu_in < sys.p0 * mu_bar < sys.b:
        raise HypothesisError("Se requiere p0·μ(S_in) < p0·μ(S̄) < b")
    _, max_derivada = extremo_en_intervalo(lambda s: mu_prime(sys.growth, s),
                                           S_bar, sys.S_in)
    if max_derivada > 1e-12:
        raise HypothesisError("μ' debe ser no positiva en [S̄, S_in]")

    theta = sys.b - sys.p0 * mu_bar
    beta = float(to_z(sys, eq, [1.0, S_bar])[1])
    kappa = eq.kappa
    _, M = extremo_en_intervalo(lambda s: np.abs(mu_prime(sys.growth, s)),
                                S_bar, sys.S_in)
    G = 1.0 + sys.p0 * kappa * sys.S_in * M / ((sys.D_star + sys.b) * (kappa + np.exp(beta)))

    S_xbar2 = 0.5 * (S_bar + sys.S_in)
    xbar2 = float(to_z(sys, eq, [1.0, S_xbar2])[1])
    g_bar, _ = transform_constants(sys, eq, xbar2)
    holgura = sys.b - theta - (sys.b + sys.D_star) * g_bar
    if holgura <= 0:
        raise HypothesisError("μ no decrece estrictamente entre S̄ y S_in")
    x1_0 = np.log(holgura * theta / ((kappa + 1) * G * sys.b * sys.D_star))

    return Theorem2Scenario(theta=float(theta), beta=beta, xbar2=xbar2, x1_0=float(x1_0),
                            G=float(G), M=float(M), S_bar=float(S_bar),
                            S_xbar2=float(S_xbar2), equilibrio=eq)


def verify_theorem2(sys: LumpedSystem, scenario: Theorem2Scenario, traj,
                    tol: float = 1e-8) -> Dict[str, float]:
    """
    Mide la cota x1(t) ≤ x1(0) − θt y la invariancia x2(t) ≥ β sobre una
    trayectoria simulada.
    """
    z = to_z(sys, scenario.equilibrio, traj.states)
    cota = z[0, 0] - scenario.theta * (traj.times - traj.times[0])
    exceso = float(np.max(z[:, 0] - cota))
    x2_min = float(np.min(z[:, 1]))
    return {
        "exceso_maximo": exceso,
        "x2_minimo": x2_min,
        "beta": scenario.beta,
        "cumple": bool(exceso <= tol and x2_min >= scenario.beta - tol),
    }
