"""
Integración adaptativa de los modelos ODE con guardas de dominio.

El integrador es un par embebido de Runge–Kutta de órdenes 5(4)
(Dormand–Prince) con control proporcional del paso. Un paso cuyo estado
de prueba sale del dominio abierto se rechaza y se reduce a la mitad; no
se proyecta el estado sobre el dominio.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import age, lumped
from .errors import ConfigError, DomainError, IntegrationError, NumericalError

# Tabla de Butcher de Dormand–Prince
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

FACTOR_MIN = 0.2
FACTOR_MAX = 10.0
SEGURIDAD = 0.9
PASO_MINIMO_RELATIVO = 1e-12

ESTADO_COMPLETADO = "completed"
ESTADO_DETENIDO = "stopped"
ESTADO_FRONTERA = "boundary_hit"
ESTADO_SUBDESBORDE = "step_underflow"
ESTADO_NO_FINITO = "non_finite"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    domain_margin: float = 1e-12

    def __post_init__(self):
        for nombre in ("rel_tol", "abs_tol"):
            valor = getattr(self, nombre)
            if not 0 < valor <= 1e-2:
                raise ConfigError(f"{nombre} debe estar en (0, 1e-2]")
        if not self.max_step > 0:
            raise ConfigError("max_step debe ser positivo")
        if not 0 <= self.domain_margin < 0.5:
            raise ConfigError("domain_margin debe estar en [0, 0.5)")


@dataclass
class Trajectory:
    """
    Trayectoria registrada en los pasos aceptados.

    ``inputs`` guarda la tasa de dilución aplicada en cada instante y
    ``derivatives`` la derivada del estado, que se usa como salida densa
    por interpolación cúbica de Hermite.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    lyapunov: Optional[np.ndarray] = None
    derivatives: Optional[np.ndarray] = None
    status: str = ESTADO_COMPLETADO
    message: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def ok(self) -> bool:
        return self.status in (ESTADO_COMPLETADO, ESTADO_DETENIDO)

    def interpolate(self, t):
        """Estado en tiempos arbitrarios dentro del intervalo registrado."""
        if len(self.times) == 1:
            return np.broadcast_to(self.states[0], np.shape(t) + self.states.shape[1:]).copy()
        if self.derivatives is not None:
            spline = CubicHermiteSpline(self.times, self.states, self.derivatives, axis=0)
            return spline(t)
        return np.stack([np.interp(t, self.times, self.states[:, i])
                         for i in range(self.states.shape[1])], axis=-1)

    def to_frame(self, columns: Sequence[str]) -> pd.DataFrame:
        """Columnas t, estado..., D y V (si hay muestras de Lyapunov)."""
        df = pd.DataFrame(self.states, columns=list(columns))
        df.insert(0, "t", self.times)
        df["D"] = self.inputs
        if self.lyapunov is not None:
            df["V"] = self.lyapunov
        return df


def _norma_error(error, y, y_nuevo, config: IntegratorConfig) -> float:
    escala = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_nuevo))
    return float(np.sqrt(np.mean((error / escala) ** 2)))


def _paso_inicial(rhs, t0, y0, f0, config: IntegratorConfig, tramo: float) -> float:
    d0 = float(np.sqrt(np.mean((y0 / (config.abs_tol + config.rel_tol * np.abs(y0))) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / (config.abs_tol + config.rel_tol * np.abs(y0))) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h0, config.max_step, tramo)


def integrate(rhs: Callable, t_span: Tuple[float, float], init,
              config: Optional[IntegratorConfig] = None,
              domain_guard: Optional[Callable] = None,
              stop: Optional[Callable] = None,
              input_fn: Optional[Callable] = None) -> Trajectory:
    """
    Integra ``rhs(t, x)`` sobre ``t_span`` con Dormand–Prince 5(4).

    Args:
        rhs: Lado derecho; puede lanzar DomainError fuera del dominio.
        t_span: Tupla (t0, t_final) con t_final > t0.
        init: Estado inicial, dentro del dominio.
        config: Tolerancias y paso máximo.
        domain_guard: Predicado ``guard(x) -> bool`` del dominio abierto.
        stop: Predicado ``stop(t, x) -> bool`` evaluado en pasos aceptados.
        input_fn: Función ``input_fn(x)`` cuyo valor se registra en ``inputs``.

    Returns:
        Trajectory con estado ``completed`` o ``stopped``.

    Raises:
        DomainError: si el estado inicial no está en el dominio.
        IntegrationError: ante salida del dominio, paso inferior a
            1e-12 del intervalo o derivada no finita. La excepción lleva la
            trayectoria parcial.
    """
    config = config or IntegratorConfig()
    t0, t_final = float(t_span[0]), float(t_span[1])
    if not t_final > t0:
        raise ConfigError("t_span debe ser creciente")
    tramo = t_final - t0
    guardia = domain_guard or (lambda x: True)
    y = np.array(init, dtype=float)
    if not guardia(y):
        raise DomainError(f"Estado inicial fuera del dominio: {y.tolist()}")

    f = np.asarray(rhs(t0, y), dtype=float)
    tiempos, estados, derivadas = [t0], [y.copy()], [f.copy()]
    entradas = [input_fn(y) if input_fn else np.nan]

    def construir(estado: str, mensaje: str = "") -> Trajectory:
        return Trajectory(times=np.array(tiempos), states=np.array(estados),
                          inputs=np.array(entradas, dtype=float),
                          derivatives=np.array(derivadas), status=estado, message=mensaje)

    if not np.all(np.isfinite(f)):
        raise IntegrationError("Derivada no finita en el estado inicial",
                               ESTADO_NO_FINITO, construir(ESTADO_NO_FINITO))

    t = t0
    h = _paso_inicial(rhs, t0, y, f, config, tramo)
    paso_minimo = PASO_MINIMO_RELATIVO * tramo
    ultimo_rechazo = None

    while t < t_final:
        h = min(h, config.max_step, t_final - t)
        if h < paso_minimo and t_final - t > paso_minimo:
            estado = {"dominio": ESTADO_FRONTERA, "no_finito": ESTADO_NO_FINITO}.get(
                ultimo_rechazo, ESTADO_SUBDESBORDE)
            mensaje = f"Paso {h:.3e} por debajo del mínimo en t={t:.6g}"
            raise IntegrationError(mensaje, estado, construir(estado, mensaje))

        k = [f]
        rechazo = None
        try:
            for i in range(1, 7):
                y_etapa = y + h * sum(a * k_j for a, k_j in zip(_A[i], k))
                if not guardia(y_etapa):
                    rechazo = "dominio"
                    break
                k_i = np.asarray(rhs(t + _C[i] * h, y_etapa), dtype=float)
                if not np.all(np.isfinite(k_i)):
                    rechazo = "no_finito"
                    break
                k.append(k_i)
        except DomainError:
            rechazo = "dominio"

        if rechazo is not None:
            ultimo_rechazo = rechazo
            h *= 0.5
            continue

        y_nuevo = y + h * sum(b * k_j for b, k_j in zip(_B5, k))
        if not guardia(y_nuevo):
            ultimo_rechazo = "dominio"
            h *= 0.5
            continue
        error = h * sum(e * k_j for e, k_j in zip(_E, k))
        norma = _norma_error(error, y, y_nuevo, config)

        if norma <= 1.0:
            t = t + h if t_final - (t + h) > paso_minimo else t_final
            y, f = y_nuevo, k[6]
            tiempos.append(t)
            estados.append(y.copy())
            derivadas.append(f.copy())
            entradas.append(input_fn(y) if input_fn else np.nan)
            ultimo_rechazo = None
            factor = FACTOR_MAX if norma == 0 else min(
                FACTOR_MAX, max(FACTOR_MIN, SEGURIDAD * norma ** -0.2))
            h *= factor
            if stop is not None and stop(t, y):
                return construir(ESTADO_DETENIDO, f"Detenida en t={t:.6g}")
        else:
            ultimo_rechazo = None
            h *= max(FACTOR_MIN, SEGURIDAD * norma ** -0.2)

    return construir(ESTADO_COMPLETADO)


def domain_guard_for(model, margin: float = 1e-12) -> Callable:
    """Predicado del dominio abierto del modelo con margen relativo en S."""
    S_in = model.S_in

    def guardia(x) -> bool:
        x = np.asarray(x)
        if not np.all(np.isfinite(x)):
            return False
        return bool(np.all(x[:-1] > 0) and margin * S_in < x[-1] < (1 - margin) * S_in)

    return guardia


def _funciones_modelo(model):
    if isinstance(model, lumped.LumpedSystem):
        return (lumped.rhs_open, lumped.rhs_closed, lumped.feedback_D,
                lumped.to_z, lumped.V2)
    if isinstance(model, age.AgeSystem):
        return (age.rhs_open3, age.rhs_closed3, age.feedback_D3,
                age.to_z3, age.V3)
    raise ConfigError(f"Modelo no soportado: {type(model).__name__}")


def simulate_open_loop(model, D: float, init, t_final: float,
                       config: Optional[IntegratorConfig] = None,
                       stop: Optional[Callable] = None) -> Trajectory:
    """Simula el modelo con tasa de dilución constante D."""
    config = config or IntegratorConfig()
    rhs_open = _funciones_modelo(model)[0]
    trayectoria = integrate(lambda t, x: rhs_open(model, x, D), (0.0, t_final), init,
                            config, domain_guard_for(model, config.domain_margin),
                            stop=stop, input_fn=lambda x: D)
    trayectoria.metadata.update({"modo": "abierto", "D": D})
    return trayectoria


def simulate_closed_loop(model, eq, cfg, init, t_final: float,
                         config: Optional[IntegratorConfig] = None,
                         consts=None, stop: Optional[Callable] = None) -> Trajectory:
    """
    Simula el lazo cerrado con la realimentación del modelo.

    Args:
        model: LumpedSystem o AgeSystem.
        eq: Equilibrio objetivo.
        cfg: FeedbackConfig.
        init: Estado inicial en el dominio abierto.
        t_final: Horizonte de simulación.
        config: Configuración del integrador.
        consts: Constantes de Lyapunov; si se pasan se registra V.
        stop: Predicado opcional de parada.

    Returns:
        Trajectory con D registrado en cada paso aceptado.
    """
    config = config or IntegratorConfig()
    _, rhs_closed, feedback, to_z, funcion_V = _funciones_modelo(model)

    def entrada(x) -> float:
        D = feedback(model, eq, cfg, x)
        if not D > 0:
            raise NumericalError(f"Realimentación no positiva D={D} en {np.asarray(x).tolist()}")
        return D

    trayectoria = integrate(lambda t, x: rhs_closed(model, eq, cfg, x), (0.0, t_final),
                            init, config, domain_guard_for(model, config.domain_margin),
                            stop=stop, input_fn=entrada)
    if consts is not None:
        z = to_z(model, eq, trayectoria.states)
        trayectoria.lyapunov = np.array([funcion_V(model, eq, cfg, consts, zi) for zi in z])
    trayectoria.metadata.update({"modo": "cerrado", "delta": cfg.delta, "alpha": cfg.alpha})
    return trayectoria


def convergence_metrics(traj: Trajectory, target, tol: float,
                        components: Optional[List[int]] = None) -> Dict[str, Any]:
    """
    Convergencia en norma del máximo hacia ``target``.

    settle_time es el primer instante a partir del cual la trayectoria
    queda dentro de ``tol``; se refina sobre el interpolante de Hermite.
    """
    objetivo = np.asarray(target, dtype=float)
    indices = list(range(traj.states.shape[1])) if components is None else list(components)
    distancia = np.max(np.abs(traj.states[:, indices] - objetivo[indices]), axis=1)
    final_error = float(distancia[-1])
    convergida = bool(final_error <= tol)
    if not convergida:
        return {"converged": False, "settle_time": None, "final_error": final_error}

    fuera = np.nonzero(distancia > tol)[0]
    if len(fuera) == 0:
        return {"converged": True, "settle_time": float(traj.times[0]),
                "final_error": final_error}

    k = int(fuera[-1])
    t_izq, t_der = traj.times[k], traj.times[k + 1]

    def exceso(t):
        return float(np.max(np.abs(np.asarray(traj.interpolate(t))[indices] - objetivo[indices]))) - tol

    settle = float(t_der) if exceso(t_der) > 0 else float(brentq(exceso, t_izq, t_der, xtol=1e-12))
    return {"converged": True, "settle_time": settle, "final_error": final_error}
