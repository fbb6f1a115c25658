"""
Tests para el simulador upwind de la EDP por edades.
"""
import numpy as np
import pytest
from chemostat_control.config import load_builtin
from chemostat_control.core import age, age_pde
from chemostat_control.core.errors import CFLError, ConfigError, DomainError, KernelError
from chemostat_control.core.kinetics import Haldane, mu
from chemostat_control.core.lumped import FeedbackConfig

B, GAMMA, P0, Q0 = 0.1, 0.2, 0.8, 1.0

@pytest.fixture
def sistema():
    """Sistema de tres estados del segundo ejemplo."""
    return age.AgeSystem(Haldane(3.5, 1.0, 1.0), S_in=16 / 3, D_star=0.9, b=B,
                         p0=P0, q0=Q0, gamma=GAMMA)

@pytest.fixture
def equilibrio(sistema):
    """Equilibrio interior estable (3, 3, 2)."""
    return age.equilibria3(sistema)[-1]

def beta_constante(a):
    return np.full_like(np.asarray(a, dtype=float), B)

def _nucleo(n_cells=1024, beta_fn=beta_constante):
    grid = age_pde.AgeGrid.for_decay(B, 0.9, P0, GAMMA, Q0, n_cells)
    return age_pde.build_kernels(beta_fn, B, GAMMA, P0, Q0, grid)

def test_malla_minima():
    """Prueba que se exige un número mínimo de celdas."""
    with pytest.raises(ConfigError):
        age_pde.AgeGrid(a_max=10.0, n_cells=8)
    grid = age_pde.AgeGrid(a_max=10.0, n_cells=100)
    assert grid.da == pytest.approx(0.1)
    assert grid.edades[0] == 0.0
    assert grid.edades[-1] == pytest.approx(9.9)

def test_truncamiento_por_decaimiento():
    """Prueba que el peso en a_max es 1e-8 veces su máximo."""
    grid = age_pde.AgeGrid.for_decay(B, 0.9, P0, GAMMA, Q0, 1024)
    peso = (P0 + GAMMA * Q0 * grid.a_max) * np.exp(-grid.a_max) / P0
    assert peso == pytest.approx(1e-8, rel=1e-6)

def test_nucleos_con_beta_constante():
    """Prueba q ≡ q0 y k = p0 + γq0·a cuando β ≡ b."""
    nucleo = _nucleo()
    np.testing.assert_allclose(nucleo.q, Q0, rtol=1e-12)
    np.testing.assert_allclose(nucleo.k, P0 + GAMMA * Q0 * nucleo.grid.edades, rtol=1e-12)

def test_nucleos_sin_gamma():
    """Prueba que con γ = 0 el núcleo k es constante."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=256)
    nucleo = age_pde.build_kernels(beta_constante, B, 0.0, P0, Q0, grid)
    np.testing.assert_allclose(nucleo.k, P0, rtol=1e-12)
    assert nucleo.M_bound == 0.0

def test_integral_de_beta_saturante():
    """Prueba la integral acumulada de β(a) = b(1 − e^(−a)) contra la primitiva."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=2048)
    nucleo = age_pde.build_kernels(lambda a: B * (1 - np.exp(-np.asarray(a))),
                                   B, GAMMA, P0, Q0, grid)
    for i in (1, 100, 512, 1500, 2047):
        a = grid.edades[i]
        assert nucleo.integral_beta[i] == pytest.approx(B * (a - 1 + np.exp(-a)), abs=1e-6)
        assert nucleo.q[i] == pytest.approx(Q0 * np.exp(-B * (1 - np.exp(-a))), rel=1e-6)

def test_beta_mayor_que_b():
    """Prueba que β > b en la cola viola el supuesto y se indica la edad."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=256)
    with pytest.raises(KernelError) as excinfo:
        age_pde.build_kernels(lambda a: np.full_like(np.asarray(a), 2 * B), B, GAMMA, P0, Q0,
                              grid)
    assert "β(a) <= b" in str(excinfo.value)
    assert excinfo.value.edad == 0.0

def test_beta_mayor_que_b_antes_de_a_bar():
    """Prueba que β > b sólo antes de ā es admisible y que M demasiado pequeño no lo es."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=256)

    def beta(a):
        a = np.asarray(a, dtype=float)
        return np.where(a < 1.0, 2 * B, B)

    nucleo = age_pde.build_kernels(beta, B, GAMMA, P0, Q0, grid, a_bar=1.0)
    assert nucleo.M_bound > 0
    with pytest.raises(KernelError) as excinfo:
        age_pde.build_kernels(beta, B, GAMMA, P0, Q0, grid, a_bar=1.0, M_bound=1e-3)
    assert excinfo.value.desigualdad.startswith("γ·a")

def test_momentos():
    """Prueba los momentos de una densidad nula y de una celda con masa unidad."""
    nucleo = _nucleo(256)
    grid = nucleo.grid
    assert age_pde.moments(age_pde.PdeState(age_pde.zero_profile(grid), 1.0), nucleo) == \
        {"X": 0.0, "Y": 0.0}
    f = np.zeros(grid.n_cells)
    f[10] = 1 / grid.da
    momentos = age_pde.moments(age_pde.PdeState(f, 1.0), nucleo)
    assert momentos["X"] == pytest.approx(nucleo.q[10])
    assert momentos["Y"] == pytest.approx(nucleo.k[10])

def test_momentos_perfil_exponencial():
    """Prueba que 2.5·e^(−a) tiene momentos cercanos a (2.5, 2.5)."""
    nucleo = _nucleo(4096)
    f = age_pde.exponential_profile(nucleo.grid, 2.5, 1.0)
    momentos = age_pde.moments(age_pde.PdeState(f, 1.5), nucleo)
    assert momentos["X"] == pytest.approx(2.5, rel=5e-3)
    assert momentos["Y"] == pytest.approx(2.5, rel=5e-3)

def test_transporte_puro():
    """Prueba que con β = 0, D = 0, sin nacimientos y ν = 1 el paso es un desplazamiento."""
    grid = age_pde.AgeGrid(a_max=3.2, n_cells=32)
    ceros = np.zeros(grid.n_cells)
    nucleo = age_pde.MortalityKernel(
        beta_fn=lambda a: 0.0, b=0.0, gamma=0.0, p0=1.0, q0=1.0, grid=grid, beta=ceros,
        integral_beta=ceros, q=ceros, k=ceros, a_bar=0.0, M_bound=0.0)
    f = np.arange(grid.n_cells, dtype=float)
    nuevo = age_pde.pde_step(age_pde.PdeState(f, 1.0), nucleo, Haldane(3.5, 1.0, 1.0),
                             10.0, 0.0, grid.da)
    np.testing.assert_array_equal(nuevo.f[1:], f[:-1])
    assert nuevo.f[0] == 0.0
    assert nuevo.S == 1.0

def test_violacion_cfl():
    """Prueba que dt por encima del límite se rechaza."""
    nucleo = _nucleo(256)
    f = age_pde.exponential_profile(nucleo.grid)
    with pytest.raises(CFLError):
        age_pde.pde_step(age_pde.PdeState(f, 1.0), nucleo, Haldane(3.5, 1.0, 1.0),
                         16 / 3, 0.9, 2 * nucleo.grid.da)

def test_sustrato_fuera_del_dominio():
    """Prueba que un consumo excesivo que vacía S se reporta."""
    nucleo = _nucleo(256)
    f = np.full(nucleo.grid.n_cells, 1e6)
    with pytest.raises(DomainError):
        age_pde.pde_step(age_pde.PdeState(f, 0.01), nucleo, Haldane(3.5, 1.0, 1.0),
                         16 / 3, 0.9, 0.5 * nucleo.grid.da)

def test_estado_negativo():
    """Prueba que una densidad negativa no es un estado válido."""
    with pytest.raises(DomainError):
        age_pde.PdeState(np.array([1.0, -1.0]), 1.0)

def test_paso_es_euler_de_los_momentos(sistema):
    """Prueba que un paso upwind con β ≡ b es un paso de Euler de las EDO de momentos."""
    nucleo = _nucleo(1024)
    estado = age_pde.PdeState(age_pde.exponential_profile(nucleo.grid, 2.5, 1.0), 1.5)
    D, dt = 0.9, 0.5 * nucleo.grid.da
    X, Y = age_pde.moments(estado, nucleo).values()
    mu_S = mu(sistema.growth, 1.5)
    nuevo = age_pde.pde_step(estado, nucleo, sistema.growth, sistema.S_in, D, dt)
    momentos = age_pde.moments(nuevo, nucleo)
    assert momentos["X"] == pytest.approx(X + dt * (Q0 * mu_S * Y - (B + D) * X), rel=1e-9)
    assert momentos["Y"] == pytest.approx(
        Y + dt * (P0 * mu_S * Y + GAMMA * X - (B + D) * Y), rel=1e-9)
    assert nuevo.S == pytest.approx(1.5 + dt * (D * (sistema.S_in - 1.5) - mu_S * X))

def test_perfil_estacionario(sistema, equilibrio):
    """Prueba que el perfil estacionario mantiene los momentos cerca de (3, 3, 2)."""
    nucleo = _nucleo(512)
    f = age_pde.steady_profile(nucleo, sistema, equilibrio)
    inicial = age_pde.PdeState(f, equilibrio.S_star)
    trayectoria = age_pde.closed_loop_pde(inicial, nucleo, sistema, equilibrio,
                                          FeedbackConfig(1.0, 0.5), 20.0,
                                          0.5 * nucleo.grid.da)
    desviacion = np.abs(trayectoria.states - equilibrio.estado) / equilibrio.estado
    assert np.max(desviacion) < 1e-2
    assert trayectoria.states[0, 0] == pytest.approx(equilibrio.X_star)

def test_lavado_con_masa_nula(sistema, equilibrio):
    """Prueba que sin biomasa S tiende a S_in como en la EDO."""
    nucleo = _nucleo(256)
    inicial = age_pde.PdeState(age_pde.zero_profile(nucleo.grid), 1.0)
    trayectoria = age_pde.closed_loop_pde(inicial, nucleo, sistema, equilibrio, None, 10.0,
                                          0.5 * nucleo.grid.da)
    np.testing.assert_array_equal(trayectoria.states[:, :2], 0.0)
    analitica = sistema.S_in - (sistema.S_in - 1.0) * np.exp(-0.9 * 10.0)
    assert trayectoria.final_state[2] == pytest.approx(analitica, abs=1e-3)
    np.testing.assert_allclose(trayectoria.inputs, 0.9)

def test_nucleo_inconsistente(sistema, equilibrio):
    """Prueba que un núcleo de otros parámetros se rechaza."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=64)
    nucleo = age_pde.build_kernels(beta_constante, B, 0.5, P0, Q0, grid)
    inicial = age_pde.PdeState(age_pde.exponential_profile(grid), 1.0)
    with pytest.raises(ConfigError):
        age_pde.closed_loop_pde(inicial, nucleo, sistema, equilibrio, None, 1.0, 0.1)

def test_cohorte_normalizada():
    """Prueba que la cohorte gaussiana integra la masa pedida."""
    grid = age_pde.AgeGrid(a_max=20.0, n_cells=1024)
    f = age_pde.cohort_profile(grid, masa=3.0, centro=2.0, ancho=0.5)
    assert grid.da * np.sum(f) == pytest.approx(3.0)

def test_reduccion_de_primer_orden(sistema, equilibrio):
    """Prueba que el error EDP–EDO se reduce a la mitad al refinar la malla."""
    tabla = age_pde.convergence_table(
        sistema, equilibrio, FeedbackConfig(1.0, 0.5), beta_constante,
        lambda grid, kernel: age_pde.exponential_profile(grid, 2.5, 1.0), 10.0,
        refinements=(256, 512, 1024), S0=2.5)
    assert [fila["n_cells"] for fila in tabla] == [256, 512, 1024]
    assert tabla[0]["cociente"] is None
    for fila in tabla[1:]:
        assert 1.6 <= fila["cociente"] <= 2.4
    assert tabla[-1]["error"] < 4e-3
    assert all(fila["cola_maxima"] < 1e-6 for fila in tabla)

def test_nucleos_sin_mortalidad():
    """Prueba que b = 0 con β ≡ 0 da q ≡ q0 y k = p0 + γq0·a."""
    grid = age_pde.AgeGrid.for_decay(0.0, 0.9, P0, GAMMA, Q0, 256)
    nucleo = age_pde.build_kernels(lambda a: np.zeros_like(np.asarray(a, dtype=float)),
                                   0.0, GAMMA, P0, Q0, grid)
    np.testing.assert_allclose(nucleo.q, Q0, rtol=1e-12)
    np.testing.assert_allclose(nucleo.k, P0 + GAMMA * Q0 * grid.edades, rtol=1e-12)
    with pytest.raises(KernelError):
        age_pde.build_kernels(beta_constante, 0.0, GAMMA, P0, Q0, grid)
    with pytest.raises(ConfigError):
        age_pde.build_kernels(beta_constante, -B, GAMMA, P0, Q0, grid)

def test_sustrato_sobre_la_entrada(sistema, equilibrio):
    """Prueba que S ≥ S_in no es un estado inicial admisible."""
    nucleo = _nucleo(256)
    f = age_pde.exponential_profile(nucleo.grid)
    with pytest.raises(DomainError):
        age_pde.PdeState(f, 6.0, S_in=sistema.S_in)
    assert age_pde.PdeState(f, 6.0).S == 6.0
    with pytest.raises(DomainError):
        age_pde.closed_loop_pde(age_pde.PdeState(f, 6.0), nucleo, sistema, equilibrio,
                                None, 1.0, 0.5 * nucleo.grid.da)
    with pytest.raises(DomainError):
        age_pde.pde_step(age_pde.PdeState(f, sistema.S_in), nucleo, sistema.growth,
                         sistema.S_in, 0.9, 0.5 * nucleo.grid.da)

def test_paso_conserva_la_cota_de_entrada(sistema):
    """Prueba que el estado tras un paso lleva S_in y queda en (0, S_in)."""
    nucleo = _nucleo(256)
    estado = age_pde.PdeState(age_pde.exponential_profile(nucleo.grid), 5.0)
    nuevo = age_pde.pde_step(estado, nucleo, sistema.growth, sistema.S_in, 0.9,
                             0.5 * nucleo.grid.da)
    assert nuevo.S_in == sistema.S_in
    assert 0 < nuevo.S < sistema.S_in

@pytest.mark.slow
def test_reduccion_de_primer_orden_escala_completa():
    """Prueba la tabla de convergencia del segundo escenario en 1024, 2048 y 4096 celdas."""
    config = load_builtin("example2")
    sistema = config.sistema()
    equilibrio = age.equilibria3(sistema)[-1]
    perfil = config.pde.initial_profile
    tabla = age_pde.convergence_table(
        sistema, equilibrio, config.realimentacion(), beta_constante,
        lambda grid, kernel: age_pde.exponential_profile(grid, perfil.amplitude, perfil.rate),
        config.pde.t_final, refinements=(1024, 2048, 4096), S0=perfil.S0)
    assert [fila["n_cells"] for fila in tabla] == [1024, 2048, 4096]
    for fila in tabla[1:]:
        assert 1.6 <= fila["cociente"] <= 2.4
    assert tabla[-1]["error"] < 5e-4
    assert all(fila["cola_maxima"] < 1e-6 for fila in tabla)
