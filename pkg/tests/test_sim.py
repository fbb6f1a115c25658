"""
Tests para el integrador adaptativo y las simulaciones de lazo abierto y cerrado.
"""
import numpy as np
import pytest
from chemostat_control.core import age, lumped, sim
from chemostat_control.core.errors import ConfigError, DomainError, IntegrationError
from chemostat_control.core.kinetics import Haldane

@pytest.fixture
def sistema():
    """Sistema agregado del primer ejemplo."""
    return lumped.LumpedSystem(Haldane(3.5, 1.0, 1.0), S_in=16 / 3, D_star=0.9, b=0.1)

@pytest.fixture
def equilibrio(sistema):
    """Equilibrio objetivo (3, 2)."""
    return lumped.equilibria(sistema)[-1]

@pytest.fixture
def divergente():
    """Sistema con D* = 0.2 y b = 0.8, donde el supuesto (A) falla."""
    return lumped.LumpedSystem(Haldane(3.5, 1.0, 1.0), S_in=16 / 3, D_star=0.2, b=0.8)

def test_decaimiento_exponencial():
    """Prueba ẋ = −x contra e^(−t)."""
    trayectoria = sim.integrate(lambda t, x: -x, (0.0, 1.0), [1.0])
    assert trayectoria.status == "completed"
    assert trayectoria.times[-1] == 1.0
    assert trayectoria.final_state[0] == pytest.approx(np.exp(-1.0), rel=1e-8)

def test_campo_nulo():
    """Prueba que un campo nulo deja el estado fijo con pocos pasos."""
    trayectoria = sim.integrate(lambda t, x: np.zeros(2), (0.0, 1.0), [2.0, 3.0])
    np.testing.assert_array_equal(trayectoria.states, [[2.0, 3.0]] * len(trayectoria.times))
    assert len(trayectoria.times) < 20

def test_salida_del_dominio():
    """Prueba que cruzar la frontera termina con boundary_hit y trayectoria parcial."""
    with pytest.raises(IntegrationError) as excinfo:
        sim.integrate(lambda t, x: -np.ones(1), (0.0, 2.0), [1.0],
                      domain_guard=lambda x: bool(x[0] > 0))
    error = excinfo.value
    assert error.estado == "boundary_hit"
    assert error.trayectoria is not None
    assert error.trayectoria.times[-1] <= 1.0
    assert np.all(error.trayectoria.states > 0)

def test_derivada_no_finita():
    """Prueba que una derivada infinita se reporta como non_finite."""
    with pytest.raises(IntegrationError) as excinfo:
        sim.integrate(lambda t, x: np.array([np.inf]), (0.0, 1.0), [1.0])
    assert excinfo.value.estado == "non_finite"

def test_estado_inicial_fuera_del_dominio(sistema, equilibrio):
    """Prueba que un estado inicial inválido se rechaza antes de integrar."""
    with pytest.raises(DomainError):
        sim.simulate_open_loop(sistema, 0.9, [1.0, 6.0], 10.0)
    with pytest.raises(DomainError):
        sim.simulate_closed_loop(sistema, equilibrio, lumped.FeedbackConfig(1.0),
                                 [-1.0, 1.0], 10.0)

def test_configuracion_invalida():
    """Prueba la validación de las tolerancias."""
    with pytest.raises(ConfigError):
        sim.IntegratorConfig(rel_tol=0.1)
    with pytest.raises(ConfigError):
        sim.IntegratorConfig(max_step=0.0)
    with pytest.raises(ConfigError):
        sim.integrate(lambda t, x: -x, (1.0, 0.0), [1.0])

def test_equilibrio_estacionario(sistema, equilibrio):
    """Prueba que partir del equilibrio no se mueve."""
    trayectoria = sim.simulate_closed_loop(sistema, equilibrio,
                                           lumped.FeedbackConfig(10.0, 0.5),
                                           equilibrio.estado, 50.0)
    np.testing.assert_allclose(trayectoria.states, np.tile(equilibrio.estado,
                                                           (len(trayectoria.times), 1)),
                               atol=1e-9)

def test_lazo_cerrado_converge(sistema, equilibrio):
    """Prueba la convergencia a (3, 2) desde (1, 1) con dos tolerancias."""
    cfg = lumped.FeedbackConfig(10.0, 0.5)
    finales = []
    for config in (sim.IntegratorConfig(), sim.IntegratorConfig(rel_tol=1e-7, abs_tol=1e-9)):
        trayectoria = sim.simulate_closed_loop(sistema, equilibrio, cfg, [1.0, 1.0], 200.0,
                                               config)
        assert trayectoria.ok
        assert np.all(trayectoria.inputs > 0)
        np.testing.assert_allclose(trayectoria.final_state, [3.0, 2.0], atol=1e-6)
        finales.append(trayectoria.final_state)
    assert np.max(np.abs(finales[0] - finales[1])) < 1e-6

def test_lyapunov_no_creciente(sistema, equilibrio):
    """Prueba que V decrece a lo largo de la trayectoria en lazo cerrado."""
    cfg = lumped.FeedbackConfig(10.0, 0.5)
    consts = lumped.lyapunov_constants(sistema, equilibrio, cfg)
    trayectoria = sim.simulate_closed_loop(sistema, equilibrio, cfg, [10.0, 4.0], 50.0,
                                           consts=consts)
    assert trayectoria.lyapunov is not None
    assert np.all(np.diff(trayectoria.lyapunov) <= 1e-8)
    df = trayectoria.to_frame(["X", "S"])
    assert list(df.columns) == ["t", "X", "S", "D", "V"]

def test_lazo_cerrado_tres_estados():
    """Prueba la convergencia a (3, 3, 2) desde condiciones iniciales aleatorias."""
    sistema = age.AgeSystem(Haldane(3.5, 1.0, 1.0), 16 / 3, 0.9, 0.1, p0=0.8, q0=1.0, gamma=0.2)
    equilibrio = age.equilibria3(sistema)[-1]
    cfg = lumped.FeedbackConfig(1.0, 0.5)
    rng = np.random.default_rng(2)
    for _ in range(5):
        init = [rng.uniform(0.5, 10), rng.uniform(0.5, 10), rng.uniform(0.6, 4.8)]
        trayectoria = sim.simulate_closed_loop(sistema, equilibrio, cfg, init, 300.0)
        np.testing.assert_allclose(trayectoria.final_state, [3.0, 3.0, 2.0], atol=1e-6)

def test_delta_acelera_la_convergencia(sistema, equilibrio):
    """Prueba que δ = 100 asienta S antes que δ = 1 partiendo de S < S*."""
    tiempos = []
    for delta in (1.0, 100.0):
        trayectoria = sim.simulate_closed_loop(sistema, equilibrio,
                                               lumped.FeedbackConfig(delta, 0.5),
                                               [1.0, 1.0], 100.0)
        metricas = sim.convergence_metrics(trayectoria, equilibrio.estado, 1e-2,
                                           components=[1])
        assert metricas["converged"]
        tiempos.append(metricas["settle_time"])
    assert tiempos[1] < tiempos[0]

def test_delta_irrelevante_sobre_S_estrella(sistema, equilibrio):
    """Prueba que con S(0) > S* las trayectorias no dependen de δ."""
    trayectorias = [sim.simulate_closed_loop(sistema, equilibrio,
                                             lumped.FeedbackConfig(delta, 0.5),
                                             [1.0, 4.0], 50.0)
                    for delta in (1.0, 100.0)]
    tiempos = np.linspace(0.0, 50.0, 101)
    np.testing.assert_allclose(trayectorias[0].interpolate(tiempos),
                               trayectorias[1].interpolate(tiempos), atol=1e-6)

def test_metricas_trayectoria_estacionaria():
    """Prueba settle_time = t0 para una trayectoria ya en el objetivo."""
    trayectoria = sim.Trajectory(times=np.array([0.0, 1.0, 2.0]),
                                 states=np.array([[3.0, 2.0]] * 3),
                                 inputs=np.full(3, 0.9))
    metricas = sim.convergence_metrics(trayectoria, [3.0, 2.0], 1e-6)
    assert metricas == {"converged": True, "settle_time": 0.0, "final_error": 0.0}
    assert not sim.convergence_metrics(trayectoria, [1.0, 1.0], 1e-6)["converged"]

def test_metricas_tiempo_de_asentamiento():
    """Prueba el refinamiento del tiempo de asentamiento sobre e^(−t)."""
    trayectoria = sim.integrate(lambda t, x: -x, (0.0, 10.0), [1.0])
    metricas = sim.convergence_metrics(trayectoria, [0.0], 1e-2)
    assert metricas["settle_time"] == pytest.approx(np.log(100.0), rel=1e-5)

def test_interpolacion_hermite():
    """Prueba la salida densa entre pasos aceptados."""
    trayectoria = sim.integrate(lambda t, x: -x, (0.0, 2.0), [1.0])
    tiempos = np.linspace(0.0, 2.0, 37)
    np.testing.assert_allclose(trayectoria.interpolate(tiempos)[:, 0], np.exp(-tiempos),
                               rtol=1e-5)

def test_escenario_divergente_lazo_abierto(divergente):
    """Prueba la cota x1(t) ≤ x1(0) − θt y el colapso de X bajo D ≡ D*."""
    escenario = lumped.theorem2_scenario(divergente, S_bar=3.5)
    init = lumped.from_z(divergente, escenario.equilibrio, [escenario.x1_0, escenario.xbar2])
    config = sim.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-30)
    trayectoria = sim.simulate_open_loop(divergente, divergente.D_star, init, 50.0, config)
    verificacion = lumped.verify_theorem2(divergente, escenario, trayectoria)
    assert verificacion["cumple"]
    assert trayectoria.final_state[0] < 1e-6 * trayectoria.states[0, 0]

def test_escenario_divergente_lazo_cerrado(divergente):
    """Prueba que la realimentación tampoco evita la caída de X."""
    escenario = lumped.theorem2_scenario(divergente, S_bar=3.5)
    init = lumped.from_z(divergente, escenario.equilibrio, [escenario.x1_0, escenario.xbar2])
    config = sim.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-30)
    trayectoria = sim.simulate_closed_loop(divergente, escenario.equilibrio,
                                           lumped.FeedbackConfig(1.0, 0.0), init, 50.0, config)
    assert lumped.verify_theorem2(divergente, escenario, trayectoria)["cumple"]
    assert np.all(np.diff(trayectoria.states[:, 0]) < 0)

def _tres_estados():
    sistema = age.AgeSystem(Haldane(3.5, 1.0, 1.0), 16 / 3, 0.9, 0.1, p0=0.8, q0=1.0, gamma=0.2)
    return sistema, age.equilibria3(sistema)[-1]

@pytest.mark.parametrize("rel_tol, abs_tol, factor", [(1e-8, 1e-10, 2.0), (1e-7, 1e-9, 10.0)])
def test_autoconvergencia(sistema, equilibrio, rel_tol, abs_tol, factor):
    """Prueba que reducir ambas tolerancias cambia el estado final menos de 10 veces la mayor."""
    sistema3, equilibrio3 = _tres_estados()
    casos = [(sistema, equilibrio, [1.0, 1.0]), (sistema3, equilibrio3, [1.0, 5.0, 1.0])]
    for modelo, eq, init in casos:
        finales = []
        for escala in (1.0, factor):
            config = sim.IntegratorConfig(rel_tol=rel_tol / escala, abs_tol=abs_tol / escala)
            trayectoria = sim.simulate_closed_loop(modelo, eq, lumped.FeedbackConfig(1.0, 0.5),
                                                   init, 10.0, config)
            finales.append(trayectoria.final_state)
        np.testing.assert_allclose(finales[1], finales[0], rtol=10 * rel_tol, atol=10 * abs_tol)

def _condiciones_aleatorias(n, rangos, semilla):
    rng = np.random.default_rng(semilla)
    inferior, superior = np.log(np.array(rangos)).T
    return np.exp(rng.uniform(inferior, superior, (n, len(rangos))))

def _dentro_del_dominio(trayectoria, S_in):
    estados = trayectoria.states
    return (np.all(estados[:, :-1] > 0) and np.all(estados[:, -1] > 0)
            and np.all(estados[:, -1] < S_in) and np.all(trayectoria.inputs > 0))

@pytest.mark.slow
def test_invariancia_del_dominio_dos_estados(sistema, equilibrio):
    """Prueba que mil trayectorias en lazo cerrado permanecen en X > 0, 0 < S < S_in."""
    cfg = lumped.FeedbackConfig(10.0, 0.5)
    condiciones = _condiciones_aleatorias(1000, [(1e-2, 50.0), (1e-2 * 16 / 3, 5.28)], 29)
    for init in condiciones:
        trayectoria = sim.simulate_closed_loop(sistema, equilibrio, cfg, init, 200.0)
        assert trayectoria.status == "completed"
        assert _dentro_del_dominio(trayectoria, sistema.S_in)

@pytest.mark.slow
def test_invariancia_del_dominio_tres_estados():
    """Prueba que mil trayectorias del modelo por edades permanecen en el dominio."""
    sistema, equilibrio = _tres_estados()
    cfg = lumped.FeedbackConfig(1.0, 0.5)
    condiciones = _condiciones_aleatorias(
        1000, [(1e-2, 20.0), (1e-2, 20.0), (1e-2 * 16 / 3, 5.28)], 31)
    for init in condiciones:
        trayectoria = sim.simulate_closed_loop(sistema, equilibrio, cfg, init, 300.0)
        assert trayectoria.status == "completed"
        assert _dentro_del_dominio(trayectoria, sistema.S_in)
