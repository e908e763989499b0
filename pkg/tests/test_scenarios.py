import numpy as np
import pytest

from src.derham_complex import SpaceTag
from src.diagnostics_io import pressure_field
from src.exceptions import ScenarioError
from src.mhd_model import EOSKind, pressure
from src.scenarios import (
    SCENARIOS,
    get_scenario,
    initial_state,
    rayleigh_taylor,
    scenario_complex,
    scenario_gravity,
    shear_profile,
)

COARSE = {
    "taylor-green": (6, 6),
    "shear-barotropic": (6, 8),
    "shear-full": (6, 32),
    "rayleigh-taylor": (4, 8),
    "alfven": (8, 4),
    "orszag-tang": (8, 8),
    "mkhi": (6, 8),
}


class TestRegistry:
    def test_identifiers(self):
        assert set(SCENARIOS) == set(COARSE)

    def test_unknown(self):
        with pytest.raises(ScenarioError) as info:
            get_scenario("sod")
        assert "sod" in str(info.value)

    def test_mkhi_field_strength(self):
        scenario = get_scenario("mkhi", b0=0.1)
        assert scenario.params["b0"] == 0.1
        bx, by = scenario.magnetic(np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(bx, 0.1)
        np.testing.assert_allclose(by, 0.0)

    def test_defaults(self):
        tg = get_scenario("taylor-green")
        assert tg.eos.kind is EOSKind.BAROTROPIC
        assert tg.lengths == (np.pi, np.pi)
        assert tg.dt == 1e-3 and tg.t_final == 1.0
        rt = get_scenario("rayleigh-taylor")
        assert rt.boundaries == ("periodic", "clamped")
        assert rt.gravity.active
        assert get_scenario("orszag-tang").degree == 2


@pytest.mark.parametrize("name", sorted(COARSE))
def test_initial_state(name):
    scenario = get_scenario(name)
    cx = scenario_complex(scenario, *COARSE[name])
    state = initial_state(cx, scenario)
    assert state.time == 0.0
    rho_q = cx.values_on_grid(state.rho, "quad")[0]
    assert rho_q.min() > 0
    # every initial magnetic field is divergence free
    assert np.max(np.abs(cx.D1 @ state.B.coeffs)) < 1e-10
    assert not state.u.coeffs[cx.constrained_velocity_dofs()].any()


def test_shear_profile():
    y = np.array([-1.0, 0.0, 1.0])
    np.testing.assert_allclose(shear_profile(y), [0.0, 2.0, 0.0], atol=1e-5)


def test_rayleigh_taylor_pressure():
    scenario = rayleigh_taylor()
    x = np.zeros(5)
    y = np.linspace(0.0, 1.0, 5)
    rho = scenario.density(x, y)
    s = scenario.entropy(x, y)
    np.testing.assert_allclose(pressure(scenario.eos, rho, s), scenario.params["pressure"](x, y), rtol=1e-12)


def test_rayleigh_taylor_velocity_sign():
    scenario = rayleigh_taylor()
    _, uy = scenario.velocity(np.array([0.0]), np.array([0.5]))
    assert uy[0] < 0


def test_physical_origin():
    scenario = get_scenario("shear-barotropic")
    cx = scenario_complex(scenario, 6, 32)
    state = initial_state(cx, scenario)
    # complex y = 1 is physical y = 0, the middle of the fast stream
    ux = cx.eval_field(state.u, [0.3], [1.0])[0, 0]
    assert ux == pytest.approx(0.5 * (shear_profile(0.0) - 1.0), rel=0.05)


def test_gravity_shifted_with_origin():
    scenario = get_scenario("rayleigh-taylor")
    phi = scenario_gravity(scenario).potential
    np.testing.assert_allclose(phi(np.array([0.1]), np.array([0.4])), [-0.4])
    assert not scenario_gravity(get_scenario("taylor-green")).active


def test_tangency_on_walls():
    scenario = get_scenario("rayleigh-taylor")
    cx = scenario_complex(scenario, 4, 8)
    u = initial_state(cx, scenario).u
    assert cx.constrained_velocity_dofs().size == 2 * cx.hi[0].dim
    blocks = cx.split(SpaceTag.VELOCITY, u.coeffs)
    assert not blocks[1][:, 0].any() and not blocks[1][:, -1].any()


@pytest.mark.parametrize("name, expected", [
    ("orszag-tang", 5.0 / 3.0),
    ("shear-full", 1.0),
    ("mkhi", 1.0),
    ("alfven", 0.1),
])
def test_initial_pressure(name, expected):
    scenario = get_scenario(name)
    x, y = np.meshgrid(np.linspace(0.0, 1.0, 7), np.linspace(-1.0, 1.0, 9), indexing="ij")
    p = pressure(scenario.eos, scenario.density(x, y), scenario.entropy(x, y))
    np.testing.assert_allclose(p, expected, rtol=1e-12)


def test_orszag_tang_projected_state():
    scenario = get_scenario("orszag-tang")
    cx = scenario_complex(scenario, *COARSE["orszag-tang"])
    state = initial_state(cx, scenario)
    gamma = 5.0 / 3.0
    # constants are reproduced exactly by the projections
    assert cx.integral(state.rho) == pytest.approx(gamma**2 * (2 * np.pi) ** 2, rel=1e-12)
    np.testing.assert_allclose(pressure_field(cx, scenario.eos, state)(np.array([0.3, 4.0]), np.array([1.0, 5.5])),
                               gamma, rtol=1e-10)


def test_taylor_green_values():
    scenario = get_scenario("taylor-green")
    ux, uy = scenario.velocity(np.array([0.0]), np.array([0.0]))
    assert ux[0] == pytest.approx(1.0) and uy[0] == pytest.approx(1.0)
    cx = scenario_complex(scenario, *COARSE["taylor-green"])
    assert cx.integral(initial_state(cx, scenario).rho) == pytest.approx(np.pi**2, rel=1e-12)


def test_shear_layer_values():
    scenario = get_scenario("shear-barotropic")
    ux, _ = scenario.velocity(np.array([0.0]), np.array([0.0]))
    assert ux[0] == pytest.approx(0.5 * (2 * np.tanh(7.5) - 1.0))
    _, uy = scenario.velocity(np.array([0.25]), np.array([0.3]))
    assert uy[0] == pytest.approx(0.1)
