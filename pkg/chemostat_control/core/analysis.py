"""
Oráculos de estabilidad, auditorías de Lyapunov y conjuntos de datos de
retratos de fase y cuencas de atracción.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import age, lumped, sim
from .errors import ConfigError, IntegrationError
from .estabilidad import StabilityReport, numeric_jacobian, routh_hurwitz, stability_report
from .processor import TrajectoryProcessor

__all__ = [
    "StabilityReport", "routh_hurwitz", "numeric_jacobian", "stability_report",
    "OpenLoop", "ClosedLoop", "BasinMap", "PortraitDataset",
    "grid_initial_conditions", "sample_initial_conditions", "lyapunov_audit",
    "corrupted_constants", "phase_portrait", "basin_sample", "known_equilibria",
]

ETIQUETA_OBJETIVO = "target"
ETIQUETA_OTRO = "other_equilibrium"
ETIQUETA_LAVADO = "washout"
ETIQUETA_INDECISA = "undecided"
ETIQUETAS = (ETIQUETA_OBJETIVO, ETIQUETA_OTRO, ETIQUETA_LAVADO, ETIQUETA_INDECISA)

UMBRAL_LAVADO_X = 1e-6
UMBRAL_LAVADO_S = 1e-3


@dataclass(frozen=True)
class OpenLoop:
    D: float


@dataclass(frozen=True)
class ClosedLoop:
    cfg: lumped.FeedbackConfig


Modo = Union[OpenLoop, ClosedLoop]


@dataclass
class PortraitDataset:
    initial_conditions: np.ndarray
    trajectories: List[Optional[sim.Trajectory]]
    columns: List[str]
    advertencias: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        """Polilíneas apiladas: trajectory_id, t, estado..., D, status."""
        partes = []
        for i, tray in enumerate(self.trajectories):
            if tray is None:
                continue
            df = tray.to_frame(self.columns)
            df.insert(0, "trajectory_id", i)
            df["status"] = tray.status
            partes.append(df)
        if not partes:
            return pd.DataFrame(columns=["trajectory_id", "t"] + self.columns + ["D", "status"])
        return pd.concat(partes, ignore_index=True)


@dataclass
class BasinMap:
    initial_conditions: np.ndarray
    labels: List[str]
    columns: List[str]
    final_states: np.ndarray
    advertencias: List[str] = field(default_factory=list)

    def conteos(self) -> Dict[str, int]:
        return {etiqueta: self.labels.count(etiqueta) for etiqueta in ETIQUETAS}

    def fracciones(self) -> Dict[str, float]:
        total = max(1, len(self.labels))
        return {k: v / total for k, v in self.conteos().items()}

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.initial_conditions, columns=[f"{c}0" for c in self.columns])
        df["label"] = self.labels
        return df


def grid_initial_conditions(ranges: Sequence[Tuple[float, float]], counts: Sequence[int],
                            log: bool = False) -> np.ndarray:
    """Malla producto de condiciones iniciales, una fila por punto."""
    if len(ranges) != len(counts):
        raise ConfigError("ranges y counts deben tener la misma longitud")
    ejes = []
    for (inferior, superior), n in zip(ranges, counts):
        if log:
            if inferior <= 0:
                raise ConfigError("Una malla logarítmica requiere extremos positivos")
            ejes.append(np.geomspace(inferior, superior, int(n)))
        else:
            ejes.append(np.linspace(inferior, superior, int(n)))
    mallas = np.meshgrid(*ejes, indexing="ij")
    return np.stack([m.ravel() for m in mallas], axis=-1)


def sample_initial_conditions(ranges: Sequence[Tuple[float, float]], n: int,
                              seed: int = 0, log: bool = True) -> np.ndarray:
    """Muestreo aleatorio reproducible de condiciones iniciales."""
    rng = np.random.default_rng(seed)
    inferior = np.array([r[0] for r in ranges], dtype=float)
    superior = np.array([r[1] for r in ranges], dtype=float)
    u = rng.random((int(n), len(ranges)))
    if log:
        return np.exp(np.log(inferior) + u * (np.log(superior) - np.log(inferior)))
    return inferior + u * (superior - inferior)


def _funciones_lyapunov(model):
    if isinstance(model, lumped.LumpedSystem):
        return lumped.V2_dot
    if isinstance(model, age.AgeSystem):
        return age.V3_dot
    raise ConfigError(f"Modelo no soportado: {type(model).__name__}")


def corrupted_constants(consts, factor: float = 1e-6):
    """Constantes con R llevado a ``factor`` veces su cota inferior (R/2)."""
    return replace(consts, R=consts.R / 2.0 * factor)


def lyapunov_audit(model, eq, cfg, consts, n_samples: int = 100_000, box: float = 4.0,
                   seed: int = 0, exclude_radius: float = 1e-6,
                   corrupt_R: Optional[float] = None) -> Dict[str, Any]:
    """
    Cuenta los puntos de la caja [−box, box]^n en coordenadas z donde V̇ ≥ 0.

    Los puntos a distancia menor que ``exclude_radius`` del origen se
    descartan. ``corrupt_R`` sustituye la constante R (control negativo).

    Returns:
        Diccionario con n_samples, n_excluded, n_violations, worst_V_dot y
        worst_point.
    """
    if corrupt_R is not None:
        consts = replace(consts, R=float(corrupt_R))
    derivada_V = _funciones_lyapunov(model)
    rng = np.random.default_rng(seed)
    z = rng.uniform(-box, box, size=(int(n_samples), model.dimension))
    conservar = np.linalg.norm(z, axis=1) >= exclude_radius
    z = z[conservar]
    if len(z) == 0:
        return {"n_samples": 0, "n_excluded": int(np.sum(~conservar)), "n_violations": 0,
                "worst_V_dot": None, "worst_point": None, "R": consts.R}
    valores = np.asarray(derivada_V(model, eq, cfg, consts, z), dtype=float)
    peor = int(np.argmax(valores))
    return {
        "n_samples": int(len(z)),
        "n_excluded": int(np.sum(~conservar)),
        "n_violations": int(np.sum(~(valores < 0))),
        "worst_V_dot": float(valores[peor]),
        "worst_point": z[peor].tolist(),
        "R": consts.R,
    }


def known_equilibria(model) -> List[np.ndarray]:
    if isinstance(model, lumped.LumpedSystem):
        return [e.estado for e in lumped.equilibria(model)]
    if isinstance(model, age.AgeSystem):
        return [e.estado for e in age.equilibria3(model)]
    raise ConfigError(f"Modelo no soportado: {type(model).__name__}")


def _es_lavado(model, estado: np.ndarray, X_ref: float) -> bool:
    return bool(estado[0] < UMBRAL_LAVADO_X * X_ref
                and abs(estado[-1] - model.S_in) < UMBRAL_LAVADO_S * model.S_in)


def _etiquetar(model, trayectoria: sim.Trajectory, objetivo: np.ndarray,
               equilibrios: List[np.ndarray], tol: float, X_ref: float) -> str:
    final = trayectoria.final_state
    if _es_lavado(model, final, X_ref):
        return ETIQUETA_LAVADO
    if sim.convergence_metrics(trayectoria, objetivo, tol)["converged"]:
        return ETIQUETA_OBJETIVO
    for otro in equilibrios:
        if np.allclose(otro, objetivo):
            continue
        if sim.convergence_metrics(trayectoria, otro, tol)["converged"]:
            return ETIQUETA_OTRO
    return ETIQUETA_INDECISA


def _trayectoria_worker(tarea: Dict[str, Any]):
    """
    Simula una condición inicial y, si se pide, la etiqueta.

    Debe estar a nivel de módulo para poder enviarse al pool de procesos.
    """
    model, eq, modo = tarea["model"], tarea["eq"], tarea["modo"]
    init, t_final, config = tarea["init"], tarea["t_final"], tarea["config"]
    objetivo = eq.estado
    X_ref = float(objetivo[0])
    tol = tarea.get("tol", 1e-6)
    etiquetar = tarea.get("etiquetar", False)

    def parar(t, x) -> bool:
        if _es_lavado(model, x, X_ref):
            return True
        return etiquetar and float(np.max(np.abs(x - objetivo))) < 1e-2 * tol

    advertencias = []
    try:
        if isinstance(modo, OpenLoop):
            trayectoria = sim.simulate_open_loop(model, modo.D, init, t_final, config, stop=parar)
        else:
            trayectoria = sim.simulate_closed_loop(model, eq, modo.cfg, init, t_final, config,
                                                   stop=parar)
    except IntegrationError as e:
        trayectoria = e.trayectoria
        advertencias.append(f"Condición inicial {np.asarray(init).tolist()}: {e} ({e.estado})")

    etiqueta = None
    if etiquetar:
        if trayectoria is None or not trayectoria.ok:
            etiqueta = ETIQUETA_INDECISA
        else:
            etiqueta = _etiquetar(model, trayectoria, objetivo, tarea["equilibrios"], tol, X_ref)
    return {"trayectoria": trayectoria, "etiqueta": etiqueta}, advertencias


def _columnas(model) -> List[str]:
    return ["X", "S"] if isinstance(model, lumped.LumpedSystem) else ["X", "Y", "S"]


def _tareas(model, eq, mode: Modo, initial_conditions, t_final, config, **extra):
    config = config or sim.IntegratorConfig()
    return [dict(model=model, eq=eq, modo=mode, init=np.asarray(ic, dtype=float),
                 t_final=t_final, config=config, **extra)
            for ic in np.atleast_2d(initial_conditions)]


def phase_portrait(model, eq, mode: Modo, initial_conditions, t_final: float,
                   config: Optional[sim.IntegratorConfig] = None,
                   procesador: Optional[TrajectoryProcessor] = None) -> PortraitDataset:
    """
    Polilíneas del retrato de fase, una por condición inicial.

    Las salidas del dominio quedan registradas como advertencias con la
    trayectoria parcial; no detienen el resto.
    """
    procesador = procesador or TrajectoryProcessor(max_workers=1)
    tareas = _tareas(model, eq, mode, initial_conditions, t_final, config)
    resultados = procesador.procesar(_trayectoria_worker, tareas)
    trayectorias = [r["trayectoria"] if r else None for r in resultados]
    return PortraitDataset(np.atleast_2d(np.asarray(initial_conditions, dtype=float)),
                           trayectorias, _columnas(model), list(procesador.advertencias))


def basin_sample(model, eq_target, mode: Modo, initial_conditions, t_final: float,
                 tol: float = 1e-6, config: Optional[sim.IntegratorConfig] = None,
                 procesador: Optional[TrajectoryProcessor] = None) -> BasinMap:
    """
    Clasifica cada condición inicial por su destino.

    Etiquetas: ``target``, ``other_equilibrium``, ``washout`` (X < 1e-6·X* y
    |S − S_in| < 1e-3·S_in) o ``undecided`` si al llegar a ``t_final`` no se
    cumple ninguna de las anteriores.
    """
    procesador = procesador or TrajectoryProcessor(max_workers=1)
    tareas = _tareas(model, eq_target, mode, initial_conditions, t_final, config,
                     etiquetar=True, tol=tol, equilibrios=known_equilibria(model))
    resultados = procesador.procesar(_trayectoria_worker, tareas)
    etiquetas, finales = [], []
    for resultado, tarea in zip(resultados, tareas):
        if resultado is None or resultado["trayectoria"] is None:
            etiquetas.append(ETIQUETA_INDECISA)
            finales.append(np.full(len(tarea["init"]), np.nan))
            continue
        etiquetas.append(resultado["etiqueta"])
        finales.append(resultado["trayectoria"].final_state)
    return BasinMap(np.atleast_2d(np.asarray(initial_conditions, dtype=float)), etiquetas,
                    _columnas(model), np.array(finales), list(procesador.advertencias))
