"""
Simulador upwind de primer orden del modelo estructurado por edades.

    ∂f/∂t + ∂f/∂a = −(β(a) + D)·f
    f(t, 0) = μ(S)·∫ k(a) f(t, a) da
    dS/dt = D·(S_in − S) − μ(S)·∫ q(a) f(t, a) da

La celda j cubre [j·da, (j+1)·da] y los núcleos se muestrean en su borde
izquierdo; con esa cuadratura los momentos (X, Y) de un paso upwind son
exactamente un paso de Euler explícito de las ecuaciones de momentos
cuando β ≡ b.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .age import AgeEquilibrium, AgeSystem, feedback_D3
from .errors import CFLError, ConfigError, DomainError, KernelError
from .kinetics import GrowthRateModel, mu
from .lumped import FeedbackConfig
from .sim import IntegratorConfig, Trajectory, simulate_closed_loop, simulate_open_loop

CELDAS_MINIMAS = 16
UMBRAL_TRUNCAMIENTO = 1e-8


@dataclass(frozen=True)
class AgeGrid:
    a_max: float
    n_cells: int

    def __post_init__(self):
        if not self.a_max > 0:
            raise ConfigError("a_max debe ser positivo")
        if self.n_cells < CELDAS_MINIMAS:
            raise ConfigError(f"n_cells debe ser al menos {CELDAS_MINIMAS}")

    @property
    def da(self) -> float:
        return self.a_max / self.n_cells

    @property
    def edades(self) -> np.ndarray:
        """Borde izquierdo de cada celda."""
        return self.da * np.arange(self.n_cells)

    @classmethod
    def for_decay(cls, b: float, D_star: float, p0: float, gamma: float, q0: float,
                  n_cells: int, umbral: float = UMBRAL_TRUNCAMIENTO) -> "AgeGrid":
        """
        Elige a_max donde el peso (p0 + γq0·a)·e^(−(b+D*)a) cae por debajo
        de ``umbral`` veces su máximo.
        """
        c = b + D_star
        pendiente = gamma * q0
        pico = max(0.0, 1.0 / c - p0 / pendiente) if pendiente > 0 else 0.0

        def log_peso(a):
            return np.log(p0 + pendiente * a) - c * a

        objetivo = log_peso(pico) + np.log(umbral)
        superior = max(1.0, 2 * pico)
        while log_peso(superior) > objetivo:
            superior *= 2
        a_max = brentq(lambda a: log_peso(a) - objetivo, pico, superior, xtol=1e-12)
        return cls(a_max=float(a_max), n_cells=int(n_cells))


@dataclass(frozen=True)
class PdeState:
    """Densidad por celdas y sustrato; con ``S_in`` se exige además S < S_in."""
    f: np.ndarray
    S: float
    S_in: Optional[float] = None

    def __post_init__(self):
        if np.any(self.f < 0) or not np.all(np.isfinite(self.f)):
            raise DomainError("La densidad f debe ser finita y no negativa")
        if not self.S > 0:
            raise DomainError("S debe ser positivo")
        if self.S_in is not None and not self.S < self.S_in:
            raise DomainError(f"S = {self.S:.6g} debe ser menor que S_in = {self.S_in}")

    def con_entrada(self, S_in: float) -> "PdeState":
        return PdeState(f=self.f, S=self.S, S_in=S_in)


@dataclass(frozen=True)
class MortalityKernel:
    beta_fn: Callable
    b: float
    gamma: float
    p0: float
    q0: float
    grid: AgeGrid
    beta: np.ndarray
    integral_beta: np.ndarray
    q: np.ndarray
    k: np.ndarray
    a_bar: float
    M_bound: float
    lipschitz: Dict[str, float] = field(default_factory=dict, compare=False)

    def consistente_con(self, sys: AgeSystem) -> bool:
        return all(np.isclose(getattr(self, n), getattr(sys, n))
                   for n in ("b", "gamma", "p0", "q0"))


def _integral_beta(beta_fn: Callable, grid: AgeGrid) -> np.ndarray:
    # Trapecio acumulado sobre una malla con medios pasos
    nodos = 0.5 * grid.da * np.arange(2 * grid.n_cells + 1)
    valores = np.asarray(beta_fn(nodos), dtype=float) * np.ones_like(nodos)
    acumulada = cumulative_trapezoid(valores, nodos, initial=0.0)
    return acumulada[0:-1:2]


def build_kernels(beta_fn: Callable, b: float, gamma: float, p0: float, q0: float,
                  grid: AgeGrid, a_bar: float = 0.0,
                  M_bound: Optional[float] = None) -> MortalityKernel:
    """
    Construye q(a) y k(a) y valida el supuesto (B) sobre la malla.

    q(a) = q0·exp(∫β − b·a) y k(a) = exp(∫β − b·a)·(p0 + γq0·a), con ∫β
    por trapecio acumulado. Para a ≥ ā se exige β(a) ≤ b y
    γa ≤ M·exp(b·a − ∫β). Si ``M_bound`` es None se toma la menor cota
    admisible en la malla.

    Raises:
        ConfigError: b, γ o ā negativos, o p0, q0 no positivos. Con b = 0
            la cola exige β ≡ 0.
        KernelError: alguna desigualdad del supuesto (B) falla; el mensaje
            indica la desigualdad y la edad.
    """
    if not (b >= 0 and p0 > 0 and q0 > 0 and gamma >= 0 and a_bar >= 0):
        raise ConfigError("Se requiere b >= 0, p0 > 0, q0 > 0, gamma >= 0 y a_bar >= 0")
    edades = grid.edades
    beta = np.asarray(beta_fn(edades), dtype=float) * np.ones_like(edades)
    if np.any(~np.isfinite(beta)) or np.any(beta < 0):
        i = int(np.argmax(~np.isfinite(beta) | (beta < 0)))
        raise KernelError("β(a) >= 0", float(edades[i]))

    cola = edades >= a_bar
    exceso = cola & (beta > b * (1 + 1e-12))
    if np.any(exceso):
        raise KernelError("β(a) <= b", float(edades[np.argmax(exceso)]),
                          f"β = {beta[np.argmax(exceso)]:.6g}, b = {b}")

    integral = _integral_beta(beta_fn, grid)
    supervivencia = np.exp(integral - b * edades)
    q = q0 * supervivencia
    k = supervivencia * (p0 + gamma * q0 * edades)

    requerido = gamma * edades * supervivencia
    cota_minima = float(np.max(requerido[cola])) if np.any(cola) else 0.0
    if M_bound is None:
        M_bound = cota_minima
    elif np.any(requerido[cola] > M_bound * (1 + 1e-12)):
        i = int(np.argmax(cola & (requerido > M_bound * (1 + 1e-12))))
        raise KernelError("γ·a <= M·exp(b·a − ∫β)", float(edades[i]),
                          f"M = {M_bound}, mínimo admisible {cota_minima:.6g}")

    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(k))):
        raise KernelError("q y k acotadas", float(edades[np.argmax(~np.isfinite(q + k))]))
    lipschitz = {"q": float(np.max(np.abs(np.diff(q))) / grid.da),
                 "k": float(np.max(np.abs(np.diff(k))) / grid.da)}

    return MortalityKernel(beta_fn=beta_fn, b=b, gamma=gamma, p0=p0, q0=q0, grid=grid,
                           beta=beta, integral_beta=integral, q=q, k=k, a_bar=a_bar,
                           M_bound=float(M_bound), lipschitz=lipschitz)


def moments(state: PdeState, kernel: MortalityKernel) -> Dict[str, float]:
    """X = ∫q·f y Y = ∫k·f con la cuadratura por celdas."""
    da = kernel.grid.da
    return {"X": float(da * np.dot(kernel.q, state.f)),
            "Y": float(da * np.dot(kernel.k, state.f))}


def paso_maximo(kernel: MortalityKernel, D: float) -> float:
    """Mayor dt que conserva f ≥ 0 en el paso upwind."""
    da = kernel.grid.da
    return da / (1.0 + da * (float(np.max(kernel.beta)) + D))


def pde_step(state: PdeState, kernel: MortalityKernel, growth: GrowthRateModel,
             S_in: float, D: float, dt: float) -> PdeState:
    """
    Un paso explícito: transporte upwind con reacción −(β + D)f, celda
    fantasma de entrada μ(S)·Y y Euler explícito para S.

    Raises:
        CFLError: si dt supera ``paso_maximo``.
        DomainError: si D < 0 o S sale de (0, S_in).
    """
    if D < 0:
        raise DomainError("La tasa de dilución debe ser no negativa")
    if not 0 < state.S < S_in:
        raise DomainError(f"S = {state.S:.6g} fuera de (0, {S_in})")
    limite = paso_maximo(kernel, D)
    if not 0 < dt <= limite * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.6g} viola la condición CFL (máximo {limite:.6g})")

    f = state.f
    momentos = moments(state, kernel)
    mu_S = mu(growth, state.S)
    nacimientos = mu_S * momentos["Y"]
    nu = dt / kernel.grid.da

    anterior = np.empty_like(f)
    anterior[0] = nacimientos
    anterior[1:] = f[:-1]
    f_nueva = (1.0 - nu - dt * (kernel.beta + D)) * f + nu * anterior
    S_nuevo = state.S + dt * (D * (S_in - state.S) - mu_S * momentos["X"])
    if not 0 < S_nuevo < S_in:
        raise DomainError(f"S = {S_nuevo:.6g} sale de (0, {S_in})")
    return PdeState(f=np.maximum(f_nueva, 0.0), S=float(S_nuevo), S_in=S_in)


def exponential_profile(grid: AgeGrid, amplitud: float = 1.0, tasa: float = 1.0) -> np.ndarray:
    return amplitud * np.exp(-tasa * grid.edades)


def cohort_profile(grid: AgeGrid, masa: float = 1.0, centro: float = 1.0,
                   ancho: float = 0.25) -> np.ndarray:
    """Cohorte gaussiana normalizada a ∫f = masa."""
    perfil = np.exp(-0.5 * ((grid.edades - centro) / ancho) ** 2)
    return masa * perfil / (grid.da * np.sum(perfil))


def zero_profile(grid: AgeGrid) -> np.ndarray:
    return np.zeros(grid.n_cells)


def steady_profile(kernel: MortalityKernel, sys: AgeSystem, eq: AgeEquilibrium) -> np.ndarray:
    """
    Solución estacionaria del transporte en el equilibrio,
    f(a) ∝ exp(−∫β − D*·a), escalada para que X = X*.
    """
    forma = np.exp(-kernel.integral_beta - sys.D_star * kernel.grid.edades)
    return forma * eq.X_star / (kernel.grid.da * np.dot(kernel.q, forma))


def closed_loop_pde(init: PdeState, kernel: MortalityKernel, sys: AgeSystem,
                    eq: AgeEquilibrium, cfg: Optional[FeedbackConfig], t_final: float,
                    dt: float, cada: int = 1) -> Trajectory:
    """
    Integra la EDP con D dado por ``feedback_D3`` sobre los momentos.

    Con ``cfg=None`` se usa D ≡ D*. Se registran (X, Y, S) y D cada
    ``cada`` pasos; ``metadata["cola_maxima"]`` guarda el mayor cociente
    f[última celda]/max f observado.

    Raises:
        ConfigError: si el núcleo no corresponde al sistema.
        CFLError, DomainError: como ``pde_step``.
    """
    if not kernel.consistente_con(sys):
        raise ConfigError("El núcleo no corresponde a los parámetros del sistema")
    init = init.con_entrada(sys.S_in)
    n_pasos = int(np.ceil(t_final / dt - 1e-9))
    dt = t_final / n_pasos

    def tasa(estado: PdeState, momentos: Dict[str, float]) -> float:
        if cfg is None:
            return sys.D_star
        return feedback_D3(sys, eq, cfg, [momentos["X"], momentos["Y"], estado.S])

    estado = init
    tiempos, estados, entradas = [], [], []
    cola_maxima = 0.0
    for n in range(n_pasos + 1):
        momentos = moments(estado, kernel)
        D = tasa(estado, momentos)
        pico = float(np.max(estado.f))
        if pico > 0:
            cola_maxima = max(cola_maxima, float(estado.f[-1]) / pico)
        if n % cada == 0 or n == n_pasos:
            tiempos.append(n * dt)
            estados.append([momentos["X"], momentos["Y"], estado.S])
            entradas.append(D)
        if n < n_pasos:
            estado = pde_step(estado, kernel, sys.growth, sys.S_in, D, dt)

    return Trajectory(times=np.array(tiempos), states=np.array(estados),
                      inputs=np.array(entradas), status="completed",
                      metadata={"modo": "edp", "n_cells": kernel.grid.n_cells,
                                "da": kernel.grid.da, "dt": dt, "cola_maxima": cola_maxima,
                                "estado_final": estado})


def reduction_error(pde_traj: Trajectory, ode_traj: Trajectory) -> float:
    """Máximo error relativo de los momentos de la EDP frente a la EDO."""
    referencia = np.asarray(ode_traj.interpolate(pde_traj.times))
    return float(np.max(np.abs(pde_traj.states - referencia) / np.abs(referencia)))


def ode_companion(sys: AgeSystem, eq: AgeEquilibrium, cfg: Optional[FeedbackConfig],
                  pde_traj: Trajectory, config: Optional[IntegratorConfig] = None) -> Trajectory:
    """Trayectoria del modelo de tres estados desde los momentos iniciales de la EDP."""
    config = config or IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13)
    inicial = pde_traj.states[0]
    t_final = float(pde_traj.times[-1])
    if cfg is None:
        return simulate_open_loop(sys, sys.D_star, inicial, t_final, config)
    return simulate_closed_loop(sys, eq, cfg, inicial, t_final, config)


def convergence_table(sys: AgeSystem, eq: AgeEquilibrium, cfg: Optional[FeedbackConfig],
                      beta_fn: Callable, perfil: Callable, t_final: float,
                      refinements: Sequence[int] = (1024, 2048, 4096), cfl: float = 0.5,
                      a_max: Optional[float] = None, a_bar: float = 0.0,
                      S0: Optional[float] = None) -> List[Dict[str, Any]]:
    """
    Error de reducción EDP–EDO para mallas sucesivamente refinadas.

    ``perfil(grid, kernel)`` devuelve la densidad inicial sobre la malla y
    ``S0`` la concentración inicial (S* por defecto).
    Cada fila trae n_cells, da, dt, error y el cociente con la fila previa.
    """
    filas: List[Dict[str, Any]] = []
    for n_cells in refinements:
        if a_max is None:
            grid = AgeGrid.for_decay(sys.b, sys.D_star, sys.p0, sys.gamma, sys.q0, n_cells)
        else:
            grid = AgeGrid(a_max=a_max, n_cells=n_cells)
        kernel = build_kernels(beta_fn, sys.b, sys.gamma, sys.p0, sys.q0, grid, a_bar=a_bar)
        inicial = PdeState(f=perfil(grid, kernel), S=eq.S_star if S0 is None else S0)
        dt = cfl * grid.da
        tray_pde = closed_loop_pde(inicial, kernel, sys, eq, cfg, t_final, dt)
        tray_ode = ode_companion(sys, eq, cfg, tray_pde)
        error = reduction_error(tray_pde, tray_ode)
        fila = {"n_cells": n_cells, "da": grid.da, "dt": tray_pde.metadata["dt"],
                "error": error, "cola_maxima": tray_pde.metadata["cola_maxima"],
                "cociente": None}
        if filas and error > 0:
            fila["cociente"] = filas[-1]["error"] / error
        filas.append(fila)
    return filas
