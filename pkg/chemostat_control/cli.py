"""
Interfaz de línea de comandos del control de quimiostatos.
"""
import argparse
import os
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import ESCENARIOS_INCLUIDOS, ScenarioConfig, load_builtin, load_config
from .core import age, age_pde, analysis, lumped, sim
from .core.errors import (EXIT_NUMERICAL, EXIT_OK, EXIT_REFUSAL, CertificationRefusal,
                          ChemostatError, ConfigError, HypothesisError, IntegrationError,
                          exit_code_for)
from .core.processor import TrajectoryProcessor
from .core.utils import guardar_csv, guardar_json

MAX_ADVERTENCIAS = 10
SALIDA_POR_DEFECTO = "resultados"


def directorio_salida(args: argparse.Namespace, config: ScenarioConfig) -> str:
    """``--out`` si se indicó; si no, ``outputs.paths.dir`` o el directorio por defecto."""
    return args.out or config.outputs.paths.dir or SALIDA_POR_DEFECTO


class SesionCLI:
    """Estado compartido por los comandos: argumentos, salida y advertencias."""

    def __init__(self, args: argparse.Namespace, salida: Optional[str] = None,
                 formatos: Sequence[str] = ("csv", "json")):
        self.args = args
        self.salida = salida or args.out or SALIDA_POR_DEFECTO
        self.formatos = tuple(formatos)
        self.modo_detallado = args.detalles
        self.advertencias: List[str] = []
        os.makedirs(self.salida, exist_ok=True)

    def ruta(self, nombre: str) -> str:
        return os.path.join(self.salida, nombre)

    def guardar_csv(self, df: pd.DataFrame, nombre: str) -> Optional[str]:
        """Escribe el CSV si el formato está habilitado; devuelve la ruta o None."""
        if "csv" not in self.formatos:
            return None
        return guardar_csv(df, self.ruta(nombre))

    def guardar_json(self, datos: Dict[str, Any], nombre: str) -> Optional[str]:
        if "json" not in self.formatos:
            return None
        return guardar_json(datos, self.ruta(nombre))

    def advertir(self, mensaje: str):
        self.advertencias.append(mensaje)
        if self.modo_detallado:
            print(f"  - {mensaje}")

    def procesador(self) -> TrajectoryProcessor:
        return TrajectoryProcessor(modo_detallado=self.modo_detallado,
                                   max_workers=self.args.threads)


def _es_agregado(config: ScenarioConfig) -> bool:
    return config.model == "lumped"


def _equilibrios(config: ScenarioConfig, sistema) -> list:
    if _es_agregado(config):
        return lumped.equilibria(sistema)
    return age.equilibria3(sistema)


def _objetivo(config: ScenarioConfig, equilibrios: list):
    if not equilibrios:
        raise CertificationRefusal("No hay equilibrio interior: sólo existe el lavado")
    try:
        return equilibrios[config.run.target]
    except IndexError as e:
        raise ConfigError(
            f"run.target: índice {config.run.target} fuera de rango "
            f"({len(equilibrios)} equilibrios)") from e


def _columnas(config: ScenarioConfig) -> List[str]:
    return ["X", "S"] if _es_agregado(config) else ["X", "Y", "S"]


def cmd_equilibria(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Equilibrios interiores con κ, λ y su clasificación de estabilidad."""
    sistema = config.sistema()
    equilibrios = _equilibrios(config, sistema)
    entradas = []
    for i, eq in enumerate(equilibrios):
        if _es_agregado(config):
            entrada = {"X_star": eq.X_star, "S_star": eq.S_star, "kappa": eq.kappa}
            informe = lumped.classify_equilibrium(sistema, eq)
        else:
            entrada = age.resumen_equilibrio(sistema, eq)
            informe = age.classify_equilibrium3(sistema, eq,
                                                config.reference_char_polys.get(str(i)))
        entrada["stability"] = informe.a_diccionario()
        entradas.append(entrada)
        estado = ", ".join(f"{v:.6g}" for v in eq.estado)
        print(f"  Equilibrio {i}: ({estado}) -> {informe.routh_hurwitz_verdict} "
              f"signos {informe.jacobian_eig_signs}")
        for nota in informe.discrepancies:
            sesion.advertir(f"Equilibrio {i}: {nota}")

    reporte: Dict[str, Any] = {"scenario": config.name, "model": config.model,
                               "equilibria": entradas}
    if not entradas:
        reporte["message"] = "no interior equilibrium"
        print("  No hay equilibrio interior (sólo el lavado)")
    sesion.guardar_json(reporte, "equilibria.json")
    return EXIT_OK


def _certificado_agregado(config, sistema, eq, sesion) -> Dict[str, Any]:
    supuesto = lumped.check_assumption_A(sistema, eq)
    certificado: Dict[str, Any] = {
        "assumption_A": supuesto._asdict(),
        "equilibrium": {"X_star": eq.X_star, "S_star": eq.S_star},
    }
    if not supuesto.holds:
        certificado["certified"] = False
        S_bar = config.theorem2.S_bar if config.theorem2 else None
        try:
            escenario = lumped.theorem2_scenario(sistema, S_bar=S_bar)
            certificado["theorem2_scenario"] = escenario.a_diccionario()
        except HypothesisError as e:
            certificado["theorem2_scenario"] = None
            certificado["theorem2_reason"] = str(e)
        return certificado

    cfg = config.realimentacion()
    consts = lumped.lyapunov_constants(sistema, eq, cfg)
    certificado["constants"] = asdict(consts)
    certificado["linearization"] = lumped.closed_loop_linearization(sistema, eq, cfg)._asdict()
    certificado["audit"] = analysis.lyapunov_audit(
        sistema, eq, cfg, consts, n_samples=config.audit.n_samples, box=config.audit.box,
        seed=sesion.args.seed, exclude_radius=config.audit.exclude_radius)
    certificado["certified"] = certificado["audit"]["n_violations"] == 0
    return certificado


def _certificado_edades(config, sistema, eq, sesion) -> Dict[str, Any]:
    phi = config.feedback.phi if config.feedback and config.feedback.phi else \
        age.find_phi(sistema, eq)
    certificado: Dict[str, Any] = {
        "equilibrium": age.resumen_equilibrio(sistema, eq), "phi": phi}
    if phi is None:
        certificado["assumption_C"] = {"holds": False, "margin": None, "r": None}
        certificado["certified"] = False
        return certificado
    supuesto = age.check_assumption_C(sistema, eq, phi)
    certificado["assumption_C"] = supuesto._asdict()
    if not supuesto.holds:
        certificado["certified"] = False
        return certificado

    cfg = config.realimentacion()
    consts = age.lyapunov_constants3(sistema, eq, cfg, phi)
    certificado["constants"] = asdict(consts)
    linealizacion = age.closed_loop_linearization3(sistema, eq, cfg)
    certificado["linearization"] = linealizacion._asdict()
    if linealizacion.discrepancia_referencia:
        sesion.advertir("El espectro del lazo cerrado no coincide con el par de referencia "
                        "{−D*, −2λ}; se usa {−D*, −D*, −(1+λ)(b+D*)}")
    certificado["audit"] = analysis.lyapunov_audit(
        sistema, eq, cfg, consts, n_samples=config.audit.n_samples, box=config.audit.box,
        seed=sesion.args.seed, exclude_radius=config.audit.exclude_radius)
    certificado["certified"] = certificado["audit"]["n_violations"] == 0
    return certificado


def cmd_check(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Certificado de estabilización global o rechazo con escenario divergente."""
    sistema = config.sistema()
    equilibrios = _equilibrios(config, sistema)
    try:
        eq = _objetivo(config, equilibrios)
    except CertificationRefusal as e:
        sesion.guardar_json({"scenario": config.name, "certified": False, "reason": str(e)},
                            "certificate.json")
        print(f"  Rechazo: {e}")
        return EXIT_REFUSAL

    if _es_agregado(config):
        certificado = _certificado_agregado(config, sistema, eq, sesion)
    else:
        certificado = _certificado_edades(config, sistema, eq, sesion)
    certificado.update({"scenario": config.name, "model": config.model})
    sesion.guardar_json(certificado, "certificate.json")

    if certificado["certified"]:
        print("  Certificado emitido")
        return EXIT_OK
    print("  Rechazo de certificación")
    if certificado.get("theorem2_scenario"):
        e = certificado["theorem2_scenario"]
        print(f"  Escenario divergente: theta={e['theta']:.6g}, beta={e['beta']:.6g}, "
              f"x1(0)={e['x1_0']:.6g}")
    return EXIT_REFUSAL


def _constantes_opcionales(config, sistema, eq, cfg, sesion):
    try:
        if _es_agregado(config):
            return lumped.lyapunov_constants(sistema, eq, cfg)
        phi = (config.feedback.phi if config.feedback else None) or age.find_phi(sistema, eq)
        if phi is None:
            return None
        return age.lyapunov_constants3(sistema, eq, cfg, phi)
    except CertificationRefusal as e:
        sesion.advertir(f"Sin columna V: {e}")
        return None


def _simular(config, sistema, eq, init, sesion, cfg=None, consts=None) -> sim.Trajectory:
    integrador = config.integrador()
    if config.run.mode == "open":
        D = config.run.D_open or sistema.D_star
        return sim.simulate_open_loop(sistema, D, init, config.run.t_final, integrador)
    return sim.simulate_closed_loop(sistema, eq, cfg, init, config.run.t_final,
                                    integrador, consts=consts)


def cmd_simulate(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Trayectorias de las condiciones iniciales del escenario y comparación de δ."""
    sistema = config.sistema()
    eq = _objetivo(config, _equilibrios(config, sistema))
    condiciones = config.run.initial_conditions
    if not condiciones:
        raise ConfigError("run.initial_conditions: se requiere al menos una condición inicial")
    cfg = config.realimentacion() if config.run.mode == "closed" else None
    consts = _constantes_opcionales(config, sistema, eq, cfg, sesion) if cfg else None

    resumen, fallidas = [], 0
    for i, init in enumerate(condiciones):
        try:
            trayectoria = _simular(config, sistema, eq, init, sesion, cfg, consts)
        except IntegrationError as e:
            fallidas += 1
            sesion.advertir(f"Condición inicial {i}: {e} ({e.estado})")
            continue
        sesion.guardar_csv(trayectoria.to_frame(_columnas(config)), f"trajectory_{i}.csv")
        metricas = sim.convergence_metrics(trayectoria, eq.estado, config.run.settle_tol)
        resumen.append({"id": i, "initial_condition": init, "status": trayectoria.status,
                        "final_state": trayectoria.final_state, **metricas})
        print(f"  [{i + 1}/{len(condiciones)}] final {np.round(trayectoria.final_state, 9)} "
              f"settle_time={metricas['settle_time']}")

    reporte: Dict[str, Any] = {"scenario": config.name, "runs": resumen}
    if config.run.delta_comparison and cfg is not None:
        reporte["delta_comparison"] = _comparar_delta(config, sistema, eq, sesion)
    sesion.guardar_json(reporte, "simulate_summary.json")
    if fallidas == len(condiciones):
        print("  Todas las integraciones fallaron")
        return EXIT_NUMERICAL
    return EXIT_OK


def _comparar_delta(config, sistema, eq, sesion) -> List[Dict[str, Any]]:
    init = config.run.initial_conditions[0]
    alpha = config.feedback.alpha if config.feedback else 0.0
    filas = []
    for delta in config.run.delta_comparison:
        cfg = lumped.FeedbackConfig(delta=delta, alpha=alpha)
        trayectoria = sim.simulate_closed_loop(sistema, eq, cfg, init, config.run.t_final,
                                               config.integrador())
        sesion.guardar_csv(trayectoria.to_frame(_columnas(config)), f"delta_{delta:g}.csv")
        metricas = sim.convergence_metrics(trayectoria, eq.estado, config.run.settle_tol,
                                           components=[len(eq.estado) - 1])
        filas.append({"delta": delta, **metricas})
        print(f"  delta={delta:g}: settle_time(S)={metricas['settle_time']}")
    return filas


def _condiciones_malla(malla, semilla: int) -> np.ndarray:
    if malla.n_random is not None:
        return analysis.sample_initial_conditions(malla.ranges, malla.n_random, semilla, malla.log)
    return analysis.grid_initial_conditions(malla.ranges, malla.counts, malla.log)


def _modo(config: ScenarioConfig, sistema, nombre: str):
    if nombre == "open":
        return analysis.OpenLoop(config.run.D_open or sistema.D_star)
    return analysis.ClosedLoop(config.realimentacion())


def _malla_requerida(config: ScenarioConfig, nombre: str):
    malla = getattr(config.run, nombre)
    if malla is None:
        raise ConfigError(f"run.{nombre}: el escenario no define la malla")
    return malla


def cmd_portrait(config: ScenarioConfig, sesion: SesionCLI, modo: Optional[str] = None) -> int:
    """Polilíneas del retrato de fase en CSV (trajectory_id, t, estado..., D)."""
    sistema = config.sistema()
    eq = _objetivo(config, _equilibrios(config, sistema))
    malla = _malla_requerida(config, "portrait")
    modo = modo or malla.mode
    procesador = sesion.procesador()
    datos = analysis.phase_portrait(sistema, eq, _modo(config, sistema, modo),
                                    _condiciones_malla(malla, sesion.args.seed), malla.t_final,
                                    config.integrador(), procesador)
    for adv in datos.advertencias:
        sesion.advertir(adv)
    ruta = sesion.guardar_csv(datos.to_frame(), f"portrait_{modo}.csv")
    print(f"  Retrato ({modo}): {len(datos.trajectories)} trayectorias -> "
          f"{ruta or '(csv omitido)'}")
    return EXIT_OK


def cmd_basin(config: ScenarioConfig, sesion: SesionCLI, modo: Optional[str] = None) -> int:
    """Mapa de cuencas en CSV (X0, S0[, Y0], label) y resumen de etiquetas."""
    sistema = config.sistema()
    eq = _objetivo(config, _equilibrios(config, sistema))
    malla = _malla_requerida(config, "basin")
    modo = modo or malla.mode
    mapa = analysis.basin_sample(sistema, eq, _modo(config, sistema, modo),
                                 _condiciones_malla(malla, sesion.args.seed), malla.t_final,
                                 malla.tol, config.integrador(), sesion.procesador())
    for adv in mapa.advertencias:
        sesion.advertir(adv)
    sesion.guardar_csv(mapa.to_frame(), f"basin_{modo}.csv")
    sesion.guardar_json({"scenario": config.name, "mode": modo, "counts": mapa.conteos(),
                         "fractions": mapa.fracciones()}, f"basin_{modo}.json")
    print(f"  Cuencas ({modo}): {mapa.conteos()}")
    return EXIT_OK


def _funcion_beta(spec, b: float) -> Callable:
    if spec.type == "constant":
        return lambda a: np.full_like(np.asarray(a, dtype=float), b)
    escala = spec.scale
    return lambda a: b * (1.0 - np.exp(-np.asarray(a, dtype=float) / escala))


def _funcion_perfil(spec, sistema, eq) -> Callable:
    if spec.type == "exponential":
        return lambda grid, kernel: age_pde.exponential_profile(grid, spec.amplitude, spec.rate)
    if spec.type == "cohort":
        return lambda grid, kernel: age_pde.cohort_profile(grid, spec.mass, spec.center,
                                                           spec.width)
    if spec.type == "steady":
        return lambda grid, kernel: age_pde.steady_profile(kernel, sistema, eq)
    return lambda grid, kernel: age_pde.zero_profile(grid)


def cmd_pde_compare(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Momentos de la EDP frente al modelo de tres estados y tabla de convergencia."""
    if config.pde is None:
        raise ConfigError("pde: el escenario no define la sección pde")
    if config.model == "lumped":
        raise ConfigError("pde-compare requiere un modelo por edades")
    sistema = config.sistema()
    eq = _objetivo(config, _equilibrios(config, sistema))
    pde = config.pde
    p = config.parameters
    beta_fn = _funcion_beta(pde.beta, p.b)
    perfil = _funcion_perfil(pde.initial_profile, sistema, eq)
    S0 = pde.initial_profile.S0 or eq.S_star

    grid = age_pde.AgeGrid.for_decay(p.b, p.D_star, p.p0, p.gamma, p.q0, pde.n_cells)
    kernel = age_pde.build_kernels(beta_fn, p.b, p.gamma, p.p0, p.q0, grid,
                                   a_bar=pde.beta.a_bar, M_bound=pde.beta.M_bound)
    inicial = age_pde.PdeState(f=perfil(grid, kernel), S=S0)
    masa_nula = not np.any(inicial.f > 0)
    cfg = config.realimentacion() if pde.closed_loop and not masa_nula else None
    if masa_nula and pde.closed_loop:
        sesion.advertir("Perfil de masa nula: se usa D ≡ D* (la realimentación requiere X > 0)")

    print(f"  Malla: a_max={grid.a_max:.6g}, n_cells={grid.n_cells}, da={grid.da:.3e}")
    tray_pde = age_pde.closed_loop_pde(inicial, kernel, sistema, eq, cfg, pde.t_final,
                                       pde.cfl * grid.da)
    sesion.guardar_csv(tray_pde.to_frame(["X", "Y", "S"]), "pde_moments.csv")
    reporte: Dict[str, Any] = {
        "scenario": config.name, "n_cells": grid.n_cells, "a_max": grid.a_max,
        "tail_ratio": tray_pde.metadata["cola_maxima"], "closed_loop": cfg is not None,
        "final_moments": tray_pde.final_state,
    }

    if masa_nula:
        t = tray_pde.times
        S_lavado = p.S_in - (p.S_in - S0) * np.exp(-p.D_star * t)
        reporte["washout"] = {
            "S_final_pde": float(tray_pde.final_state[2]),
            "S_final_ode": float(S_lavado[-1]),
            "max_abs_error": float(np.max(np.abs(tray_pde.states[:, 2] - S_lavado))),
        }
        print(f"  Lavado: S(t_final)={tray_pde.final_state[2]:.6g} (EDO {S_lavado[-1]:.6g})")
    else:
        tray_ode = age_pde.ode_companion(sistema, eq, cfg, tray_pde)
        sesion.guardar_csv(tray_ode.to_frame(["X", "Y", "S"]), "ode_moments.csv")
        reporte["max_relative_error"] = age_pde.reduction_error(tray_pde, tray_ode)
        print("Fase 2: Tabla de convergencia...")
        tabla = age_pde.convergence_table(
            sistema, eq, cfg, beta_fn, perfil, pde.t_final, pde.refinements, pde.cfl,
            a_max=grid.a_max, a_bar=pde.beta.a_bar, S0=S0)
        reporte["convergence_table"] = tabla
        cocientes = [f["cociente"] for f in tabla if f["cociente"] is not None]
        reporte["first_order"] = bool(cocientes and all(1.6 <= c <= 2.4 for c in cocientes))
        for fila in tabla:
            print(f"  n_cells={fila['n_cells']}: error={fila['error']:.3e} "
                  f"cociente={fila['cociente']}")
        print(f"  Error relativo máximo: {reporte['max_relative_error']:.3e}")
    sesion.guardar_json(reporte, "pde_report.json")
    return EXIT_OK


def cmd_theorem2(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Trayectorias divergentes bajo D ≡ D* y bajo la realimentación."""
    sistema = config.sistema()
    opciones = config.theorem2
    escenario = lumped.theorem2_scenario(sistema, S_bar=opciones.S_bar if opciones else None)
    t_final = opciones.t_final if opciones else 50.0
    cfg = lumped.FeedbackConfig(delta=opciones.delta if opciones else 1.0,
                                alpha=opciones.alpha if opciones else 0.0)
    init = lumped.from_z(sistema, escenario.equilibrio, [escenario.x1_0, escenario.xbar2])
    integrador = sim.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-30)

    reporte: Dict[str, Any] = {"scenario": escenario.a_diccionario(), "runs": {}}
    corridas = {
        "open": lambda: sim.simulate_open_loop(sistema, sistema.D_star, init, t_final, integrador),
        "closed": lambda: sim.simulate_closed_loop(sistema, escenario.equilibrio, cfg, init,
                                                   t_final, integrador),
    }
    for nombre, correr in corridas.items():
        trayectoria = correr()
        sesion.guardar_csv(trayectoria.to_frame(["X", "S"]), f"theorem2_{nombre}.csv")
        verificacion = lumped.verify_theorem2(sistema, escenario, trayectoria)
        verificacion["X_ratio"] = float(trayectoria.final_state[0] / trayectoria.states[0, 0])
        reporte["runs"][nombre] = verificacion
        print(f"  {nombre}: cota x1 {'cumple' if verificacion['cumple'] else 'NO cumple'}, "
              f"X(T)/X(0)={verificacion['X_ratio']:.3e}")
    sesion.guardar_json(reporte, "theorem2.json")
    return EXIT_OK


def cmd_repro(config: ScenarioConfig, sesion: SesionCLI) -> int:
    """Paquete completo de artefactos de un escenario incluido."""
    print(f"Escenario incluido: {config.name}")
    codigos = []

    print("\nFase 1: Equilibrios...")
    codigos.append(cmd_equilibria(config, sesion))
    print("\nFase 2: Certificación...")
    codigo_check = cmd_check(config, sesion)

    if config.name == "theorem2":
        print("\nFase 3: Trayectorias divergentes...")
        codigos.append(cmd_theorem2(config, sesion))
        return max(codigos)

    codigos.append(codigo_check)
    if config.run.portrait is not None:
        print("\nFase 3: Retratos de fase...")
        for modo in ("open", "closed"):
            codigos.append(cmd_portrait(config, sesion, modo))
    if config.run.initial_conditions:
        print("\nFase 4: Simulación...")
        codigos.append(cmd_simulate(config, sesion))
    return max(codigos)


COMANDOS = {
    "equilibria": cmd_equilibria,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "portrait": cmd_portrait,
    "basin": cmd_basin,
    "pde-compare": cmd_pde_compare,
}


def _parser() -> argparse.ArgumentParser:
    comunes = argparse.ArgumentParser(add_help=False)
    comunes.add_argument("--config", "-c", help="Archivo JSON del escenario")
    comunes.add_argument("--out", "-o", default=None,
                         help="Directorio de los artefactos (por defecto outputs.paths.dir "
                              f"del escenario o '{SALIDA_POR_DEFECTO}')")
    comunes.add_argument("--seed", type=int, default=0,
                         help="Semilla de los muestreos aleatorios")
    comunes.add_argument("--threads", type=int, default=1,
                         help="Procesos para retratos y cuencas")
    comunes.add_argument("--detalles", "-i", action="store_true",
                         help="Mostrar información detallada")

    parser = argparse.ArgumentParser(
        description="Control por realimentación de quimiostatos con mortalidad",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subparsers = parser.add_subparsers(dest="comando", required=True)
    for nombre in COMANDOS:
        subparsers.add_parser(nombre, parents=[comunes],
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    repro = subparsers.add_parser("repro", parents=[comunes],
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    repro.add_argument("escenario", choices=ESCENARIOS_INCLUIDOS)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Punto de entrada principal para la línea de comandos.

    Returns:
        Código de salida: 0 éxito, 2 configuración, 3 fallo numérico,
        4 rechazo de certificación.
    """
    args = _parser().parse_args(argv)

    print("\n= Chemostat Control =")
    print(f"Comando: {args.comando}")

    sesion = None
    try:
        if args.comando == "repro":
            config = load_builtin(args.escenario)
        elif not args.config:
            raise ConfigError("--config es obligatorio para este comando")
        else:
            config = load_config(args.config)
        sesion = SesionCLI(args, directorio_salida(args, config), config.outputs.formats)
        print(f"Directorio de salida: {sesion.salida}")
        print(f"Formatos: {', '.join(sesion.formatos)}")
        print("-" * 60)
        if args.comando == "repro":
            codigo = cmd_repro(config, sesion)
        else:
            print(f"Escenario: {config.name} ({config.model})")
            print("\nFase 1: Ejecutando...")
            codigo = COMANDOS[args.comando](config, sesion)
    except ChemostatError as e:
        print(f"\nError: {e}")
        codigo = exit_code_for(e)
    except Exception as e:
        print(f"\nError: {e}")
        codigo = EXIT_NUMERICAL

    if sesion is not None and sesion.advertencias:
        print(f"\nAdvertencias ({len(sesion.advertencias)}):")
        for adv in sesion.advertencias[:MAX_ADVERTENCIAS]:
            print(f"  - {adv}")
        if len(sesion.advertencias) > MAX_ADVERTENCIAS:
            print(f"  ... y {len(sesion.advertencias) - MAX_ADVERTENCIAS} más")
    print("-" * 60)
    print(f"Código de salida: {codigo}")
    return codigo
