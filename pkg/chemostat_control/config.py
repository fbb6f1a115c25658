"""
Esquema estricto de los archivos de escenario y su carga.

Los escenarios son JSON, uno por archivo. Cualquier clave desconocida o
valor fuera de rango se rechaza con un ConfigError que indica el campo.
"""
import json
from importlib import resources
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat,
                      ValidationError, model_validator)

from .core.age import AgeSystem
from .core.errors import ConfigError
from .core.kinetics import GrowthRateModel, growth_from_spec
from .core.lumped import FeedbackConfig, LumpedSystem
from .core.sim import IntegratorConfig

ESCENARIOS_INCLUIDOS = ("example1", "example2", "theorem2")


class BaseEstricta(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HaldaneSpec(BaseEstricta):
    type: Literal["haldane"]
    M: PositiveFloat
    K: PositiveFloat
    a: NonNegativeFloat


class MonodSpec(BaseEstricta):
    type: Literal["monod"]
    mu_max: PositiveFloat
    K: PositiveFloat


class ParametersSpec(BaseEstricta):
    S_in: PositiveFloat
    D_star: PositiveFloat
    b: NonNegativeFloat
    p0: PositiveFloat = 1.0
    q0: Optional[PositiveFloat] = None
    gamma: Optional[NonNegativeFloat] = None


class FeedbackSpec(BaseEstricta):
    delta: PositiveFloat
    alpha: float = Field(0.0, ge=0.0, lt=1.0)
    phi: Optional[float] = Field(None, gt=1.0)


class GridSpec(BaseEstricta):
    ranges: List[Tuple[PositiveFloat, PositiveFloat]]
    counts: List[int] = Field(default_factory=list)
    n_random: Optional[int] = Field(None, ge=1)
    log: bool = True
    mode: Literal["open", "closed"] = "closed"
    t_final: PositiveFloat = 200.0
    tol: PositiveFloat = 1e-6

    @model_validator(mode="after")
    def _verificar_malla(self):
        if self.n_random is None and len(self.counts) != len(self.ranges):
            raise ValueError("counts debe tener una entrada por rango (o usar n_random)")
        if any(n < 1 for n in self.counts):
            raise ValueError("counts debe ser positivo")
        if any(inf >= sup for inf, sup in self.ranges):
            raise ValueError("cada rango debe ser (inferior, superior) con inferior < superior")
        return self


class RunSpec(BaseEstricta):
    mode: Literal["open", "closed"] = "closed"
    D_open: Optional[PositiveFloat] = None
    t_final: PositiveFloat = 200.0
    rel_tol: float = Field(1e-9, gt=0.0, le=1e-2)
    abs_tol: float = Field(1e-11, gt=0.0, le=1e-2)
    max_step: Optional[PositiveFloat] = None
    target: int = -1
    initial_conditions: List[List[PositiveFloat]] = Field(default_factory=list)
    delta_comparison: Optional[List[PositiveFloat]] = None
    settle_tol: PositiveFloat = 1e-2
    portrait: Optional[GridSpec] = None
    basin: Optional[GridSpec] = None


class BetaSpec(BaseEstricta):
    type: Literal["constant", "saturating"] = "constant"
    scale: PositiveFloat = 1.0
    a_bar: NonNegativeFloat = 0.0
    M_bound: Optional[NonNegativeFloat] = None


class ProfileSpec(BaseEstricta):
    type: Literal["exponential", "cohort", "steady", "zero"] = "exponential"
    amplitude: PositiveFloat = 1.0
    rate: PositiveFloat = 1.0
    mass: PositiveFloat = 1.0
    center: NonNegativeFloat = 1.0
    width: PositiveFloat = 0.25
    S0: Optional[PositiveFloat] = None


class PdeSpec(BaseEstricta):
    beta: BetaSpec = Field(default_factory=BetaSpec)
    n_cells: int = Field(4096, ge=16)
    refinements: List[int] = Field(default_factory=lambda: [1024, 2048, 4096])
    cfl: float = Field(0.5, gt=0.0, le=1.0)
    t_final: PositiveFloat = 50.0
    initial_profile: ProfileSpec = Field(default_factory=ProfileSpec)
    closed_loop: bool = True

    @model_validator(mode="after")
    def _verificar_refinamientos(self):
        if len(self.refinements) < 2 or any(n < 16 for n in self.refinements):
            raise ValueError("refinements requiere al menos dos mallas de 16 celdas o más")
        return self


class Theorem2Spec(BaseEstricta):
    S_bar: Optional[PositiveFloat] = None
    t_final: PositiveFloat = 50.0
    delta: PositiveFloat = 1.0
    alpha: float = Field(0.0, ge=0.0, lt=1.0)


class AuditSpec(BaseEstricta):
    n_samples: int = Field(100_000, ge=1)
    box: PositiveFloat = 4.0
    exclude_radius: PositiveFloat = 1e-6


class PathsSpec(BaseEstricta):
    dir: Optional[str] = None


class OutputsSpec(BaseEstricta):
    """Directorio y formatos de los artefactos; ``--out`` tiene prioridad sobre ``paths.dir``."""
    paths: PathsSpec = Field(default_factory=PathsSpec)
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"],
                                                  min_length=1)


class ScenarioConfig(BaseEstricta):
    name: str
    model: Literal["lumped", "age", "age_pde"]
    growth: Union[HaldaneSpec, MonodSpec] = Field(discriminator="type")
    parameters: ParametersSpec
    feedback: Optional[FeedbackSpec] = None
    run: RunSpec = Field(default_factory=RunSpec)
    pde: Optional[PdeSpec] = None
    theorem2: Optional[Theorem2Spec] = None
    audit: AuditSpec = Field(default_factory=AuditSpec)
    reference_char_polys: Dict[str, List[float]] = Field(default_factory=dict)
    outputs: OutputsSpec = Field(default_factory=OutputsSpec)

    @model_validator(mode="after")
    def _verificar_modelo(self):
        if self.model in ("age", "age_pde"):
            if self.parameters.q0 is None or self.parameters.gamma is None:
                raise ValueError("los modelos por edades requieren parameters.q0 y parameters.gamma")
        if self.model == "age_pde" and self.pde is None:
            raise ValueError("el modelo age_pde requiere la sección pde")
        dimension = self.dimension
        for ic in self.run.initial_conditions:
            if len(ic) != dimension:
                raise ValueError(
                    f"run.initial_conditions: se esperaban {dimension} componentes, hay {len(ic)}")
        for nombre in ("portrait", "basin"):
            malla = getattr(self.run, nombre)
            if malla is not None and len(malla.ranges) != dimension:
                raise ValueError(f"run.{nombre}.ranges debe tener {dimension} rangos")
        return self

    @property
    def dimension(self) -> int:
        return 2 if self.model == "lumped" else 3

    def cinetica(self) -> GrowthRateModel:
        return growth_from_spec(self.growth.model_dump())

    def sistema(self) -> Union[LumpedSystem, AgeSystem]:
        """Sistema del escenario; ``age_pde`` usa el modelo de tres estados."""
        p = self.parameters
        if self.model == "lumped":
            return LumpedSystem(self.cinetica(), p.S_in, p.D_star, p.b, p.p0)
        return AgeSystem(self.cinetica(), p.S_in, p.D_star, p.b, p.p0, p.q0, p.gamma)

    def realimentacion(self, delta: Optional[float] = None,
                       alpha: Optional[float] = None) -> FeedbackConfig:
        if self.feedback is None and delta is None:
            raise ConfigError("feedback: el escenario no define la realimentación")
        return FeedbackConfig(
            delta=delta if delta is not None else self.feedback.delta,
            alpha=alpha if alpha is not None else (self.feedback.alpha if self.feedback else 0.0))

    def integrador(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.run.rel_tol, abs_tol=self.run.abs_tol,
                                max_step=self.run.max_step or np.inf)


def _formatear_errores(error: ValidationError) -> str:
    lineas = []
    for detalle in error.errors():
        campo = ".".join(str(p) for p in detalle["loc"]) or "<raíz>"
        lineas.append(f"{campo}: {detalle['msg']}")
    return "\n".join(lineas)


def parse_config(datos: dict) -> ScenarioConfig:
    """Valida un diccionario de escenario; los errores salen como ConfigError."""
    try:
        return ScenarioConfig.model_validate(datos)
    except ValidationError as e:
        raise ConfigError("Escenario inválido:\n" + _formatear_errores(e)) from e
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"Escenario inválido: {e}") from e


def load_config(ruta: str) -> ScenarioConfig:
    """
    Carga y valida un archivo de escenario.

    Args:
        ruta: Ruta al archivo JSON.

    Returns:
        ScenarioConfig validado.

    Raises:
        ConfigError: si el archivo no existe, no es JSON o no cumple el esquema.
    """
    try:
        with open(ruta, "r", encoding="utf-8") as f:
            datos = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"No existe el archivo de escenario: {ruta}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido en {ruta}: {e}") from e
    return parse_config(datos)


def load_builtin(nombre: str) -> ScenarioConfig:
    """Carga uno de los escenarios incluidos en el paquete."""
    if nombre not in ESCENARIOS_INCLUIDOS:
        raise ConfigError(f"Escenario desconocido: {nombre!r}")
    recurso = resources.files("chemostat_control").joinpath("escenarios").joinpath(f"{nombre}.json")
    return parse_config(json.loads(recurso.read_text(encoding="utf-8")))
