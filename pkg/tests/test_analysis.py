"""
Tests para los oráculos de estabilidad, la auditoría de Lyapunov y las cuencas.
"""
import numpy as np
import pytest
from chemostat_control.config import load_builtin
from chemostat_control.core import age, analysis, lumped
from chemostat_control.core.kinetics import Haldane
from chemostat_control.core.processor import TrajectoryProcessor

@pytest.fixture
def sistema():
    """Sistema agregado del primer ejemplo."""
    return lumped.LumpedSystem(Haldane(3.5, 1.0, 1.0), S_in=16 / 3, D_star=0.9, b=0.1)

@pytest.fixture
def equilibrio(sistema):
    """Equilibrio objetivo (3, 2)."""
    return lumped.equilibria(sistema)[-1]

@pytest.fixture
def cfg():
    """Realimentación con δ = 10 y α = 0.5."""
    return lumped.FeedbackConfig(delta=10.0, alpha=0.5)

@pytest.mark.parametrize("coeficientes, veredicto", [
    ([1.0, 6.6, 10.98, 4.5], "Stable"),
    ([1.0, -2.4, -8.82, -4.5], "Unstable"),
    ([1.0, 3.0, 2.0], "Stable"),
    ([1.0, 1.0, -2.0], "Unstable"),
    ([1.0, 0.0, 1.0], "Marginal"),
    ([1.0, 1.0, 1.0, 1.0], "Marginal"),
])
def test_routh_hurwitz_literales(coeficientes, veredicto):
    """Prueba veredictos sobre polinomios conocidos."""
    assert analysis.routh_hurwitz(coeficientes) == veredicto

def test_routh_hurwitz_entradas_invalidas():
    """Prueba que grado distinto de 2 o 3 y polinomios no mónicos se rechazan."""
    with pytest.raises(ValueError):
        analysis.routh_hurwitz([1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(ValueError):
        analysis.routh_hurwitz([2.0, 1.0, 1.0])

def test_routh_hurwitz_contra_raices():
    """Prueba Routh–Hurwitz frente a las raíces de 10⁴ cúbicas aleatorias."""
    rng = np.random.default_rng(0)
    comparadas = 0
    for coeficientes in rng.uniform(-5.0, 5.0, size=(10_000, 3)):
        polinomio = [1.0, *coeficientes]
        reales = np.real(np.roots(polinomio))
        if np.min(np.abs(reales)) < 1e-6:
            continue
        esperado = "Stable" if np.all(reales < 0) else "Unstable"
        assert analysis.routh_hurwitz(polinomio) == esperado
        comparadas += 1
    assert comparadas > 9_900

def test_jacobiano_numerico_lineal():
    """Prueba que el jacobiano de un campo lineal es su matriz."""
    matriz = np.random.default_rng(4).uniform(-2.0, 2.0, size=(3, 3))
    jacobiano = analysis.numeric_jacobian(lambda x: matriz @ x, [0.3, -1.2, 0.7])
    np.testing.assert_allclose(jacobiano, matriz, atol=1e-7)

def test_jacobiano_numerico_agregado(sistema, equilibrio):
    """Prueba el jacobiano en (3, 2) contra la expresión analítica."""
    jacobiano = analysis.numeric_jacobian(lambda x: lumped.rhs_open(sistema, x, 0.9),
                                          equilibrio.estado)
    np.testing.assert_allclose(jacobiano, [[0.0, -9 / 14], [-1.0, -0.9 + 9 / 14]], atol=1e-7)

def test_informe_de_estabilidad():
    """Prueba el contraste entre polinomio, jacobiano y referencia."""
    jacobiano = np.diag([-1.0, -2.0])
    informe = analysis.stability_report([1.0, 3.0, 2.0], jacobiano)
    assert informe.routh_hurwitz_verdict == "Stable"
    assert informe.jacobian_eig_signs == (0, 2, 0)
    assert informe.consistent
    assert informe.discrepancies == []

    informe = analysis.stability_report([1.0, 3.0, 2.0], jacobiano, referencia=[1.0, 1.0, -2.0])
    assert len(informe.discrepancies) == 1
    assert informe.a_diccionario()["jacobian_eig_signs"] == [0, 2, 0]

def test_informe_inconsistente():
    """Prueba que un polinomio que no corresponde al jacobiano queda marcado."""
    informe = analysis.stability_report([1.0, 3.0, 2.0], np.diag([1.0, -2.0]))
    assert not informe.consistent
    assert len(informe.discrepancies) == 1

def test_auditoria_sin_violaciones(sistema, equilibrio, cfg):
    """Prueba que V̇ < 0 en toda la muestra para las constantes calculadas."""
    consts = lumped.lyapunov_constants(sistema, equilibrio, cfg)
    auditoria = analysis.lyapunov_audit(sistema, equilibrio, cfg, consts, n_samples=20_000)
    assert auditoria["n_violations"] == 0
    assert auditoria["n_samples"] + auditoria["n_excluded"] == 20_000

def test_auditoria_control_negativo(sistema, equilibrio, cfg):
    """Prueba que R muy por debajo de su cota produce violaciones."""
    consts = lumped.lyapunov_constants(sistema, equilibrio, cfg)
    auditoria = analysis.lyapunov_audit(sistema, equilibrio, cfg,
                                        analysis.corrupted_constants(consts),
                                        n_samples=20_000)
    assert auditoria["n_violations"] >= 1
    assert auditoria["worst_V_dot"] >= 0
    assert auditoria["R"] == pytest.approx(consts.R / 2 * 1e-6)

def test_auditoria_excluye_el_origen(sistema, equilibrio, cfg):
    """Prueba que los puntos cercanos al origen no se evalúan."""
    consts = lumped.lyapunov_constants(sistema, equilibrio, cfg)
    auditoria = analysis.lyapunov_audit(sistema, equilibrio, cfg, consts, n_samples=100,
                                        box=1e-7, exclude_radius=1e-6)
    assert auditoria["n_samples"] == 0
    assert auditoria["n_excluded"] == 100
    assert auditoria["n_violations"] == 0

def test_malla_de_condiciones_iniciales():
    """Prueba la malla producto logarítmica."""
    malla = analysis.grid_initial_conditions([(0.01, 50.0), (0.05, 5.28)], [20, 20], log=True)
    assert malla.shape == (400, 2)
    assert malla[:, 0].min() == pytest.approx(0.01)
    assert malla[:, 1].max() == pytest.approx(5.28)

def test_muestreo_reproducible():
    """Prueba que la misma semilla da las mismas condiciones iniciales."""
    rangos = [(0.1, 20.0), (0.1, 20.0), (0.05, 5.28)]
    a = analysis.sample_initial_conditions(rangos, 30, seed=3)
    b = analysis.sample_initial_conditions(rangos, 30, seed=3)
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= [0.1, 0.1, 0.05]) & (a <= [20.0, 20.0, 5.28]))

def test_retrato_desde_el_equilibrio(sistema, equilibrio, cfg):
    """Prueba que una condición inicial en el equilibrio da una polilínea estacionaria."""
    datos = analysis.phase_portrait(sistema, equilibrio, analysis.ClosedLoop(cfg),
                                    [equilibrio.estado], 20.0)
    df = datos.to_frame()
    assert set(df["trajectory_id"]) == {0}
    np.testing.assert_allclose(df[["X", "S"]].to_numpy(),
                               np.tile(equilibrio.estado, (len(df), 1)), atol=1e-9)

def test_cuencas_lazo_abierto(sistema, equilibrio):
    """Prueba etiquetas de lavado y del otro equilibrio en lazo abierto."""
    condiciones = [[4.0, 0.6], [0.01, 5.28]]
    mapa = analysis.basin_sample(sistema, equilibrio, analysis.OpenLoop(0.9), condiciones,
                                 200.0)
    assert mapa.labels == ["other_equilibrium", "washout"]
    assert mapa.conteos()["target"] == 0
    df = mapa.to_frame()
    assert list(df.columns) == ["X0", "S0", "label"]

def test_horizonte_corto_indeciso(sistema, equilibrio):
    """Prueba que un horizonte insuficiente deja las trayectorias indecisas."""
    mapa = analysis.basin_sample(sistema, equilibrio, analysis.OpenLoop(0.9),
                                 [[4.0, 0.6], [0.01, 5.28]], 0.5)
    assert mapa.labels == ["undecided", "undecided"]

@pytest.mark.parametrize("delta", [1.0, 10.0])
@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_cuencas_lazo_cerrado(sistema, equilibrio, delta, alpha):
    """Prueba que en lazo cerrado toda la malla converge al objetivo."""
    condiciones = analysis.grid_initial_conditions([(0.01, 50.0), (0.0533, 5.28)], [3, 3],
                                                   log=True)
    mapa = analysis.basin_sample(sistema, equilibrio,
                                 analysis.ClosedLoop(lumped.FeedbackConfig(delta, alpha)),
                                 condiciones, 500.0)
    assert mapa.labels == ["target"] * 9
    assert mapa.fracciones()["target"] == 1.0

def test_cuencas_tres_estados():
    """Prueba la convergencia global del lazo cerrado de tres estados."""
    sistema = age.AgeSystem(Haldane(3.5, 1.0, 1.0), 16 / 3, 0.9, 0.1, p0=0.8, q0=1.0, gamma=0.2)
    equilibrio = age.equilibria3(sistema)[-1]
    condiciones = analysis.sample_initial_conditions(
        [(0.1, 20.0), (0.1, 20.0), (0.0533, 5.28)], 6, seed=0)
    mapa = analysis.basin_sample(sistema, equilibrio,
                                 analysis.ClosedLoop(lumped.FeedbackConfig(1.0, 0.5)),
                                 condiciones, 500.0)
    assert mapa.labels == ["target"] * 6

def test_cuencas_deterministas(sistema, equilibrio, cfg):
    """Prueba que dos ejecuciones dan el mismo mapa."""
    condiciones = analysis.grid_initial_conditions([(0.1, 10.0), (0.1, 5.0)], [2, 2])
    mapas = [analysis.basin_sample(sistema, equilibrio, analysis.ClosedLoop(cfg), condiciones,
                                   100.0, procesador=TrajectoryProcessor(max_workers=1))
             for _ in range(2)]
    assert mapas[0].labels == mapas[1].labels
    np.testing.assert_array_equal(mapas[0].final_states, mapas[1].final_states)

@pytest.mark.slow
@pytest.mark.parametrize("delta", [1.0, 10.0])
@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_cuencas_lazo_cerrado_malla_completa(sistema, equilibrio, delta, alpha):
    """Prueba que las 400 condiciones de la malla logarítmica 20×20 llegan al objetivo."""
    condiciones = analysis.grid_initial_conditions([(0.01, 50.0), (0.0533, 5.28)], [20, 20],
                                                   log=True)
    mapa = analysis.basin_sample(sistema, equilibrio,
                                 analysis.ClosedLoop(lumped.FeedbackConfig(delta, alpha)),
                                 condiciones, 500.0)
    assert len(mapa.labels) == 400
    assert mapa.conteos()["target"] == 400

@pytest.mark.slow
def test_cuencas_tres_estados_muestra_completa():
    """Prueba las 200 condiciones aleatorias del segundo escenario en lazo cerrado."""
    config = load_builtin("example2")
    sistema = config.sistema()
    equilibrio = age.equilibria3(sistema)[config.run.target]
    malla = config.run.basin
    condiciones = analysis.sample_initial_conditions(malla.ranges, malla.n_random, seed=0,
                                                     log=malla.log)
    mapa = analysis.basin_sample(sistema, equilibrio,
                                 analysis.ClosedLoop(config.realimentacion()),
                                 condiciones, malla.t_final, malla.tol)
    assert len(mapa.labels) == 200
    assert mapa.conteos()["target"] == 200
