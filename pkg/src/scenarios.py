"""
Test-case definitions: domains, boundaries, equations of state, initial
conditions and default run parameters.

Initial conditions are plain vectorised functions of physical coordinates;
``origin`` maps the complex's [0, Lx] x [0, Ly] onto the physical domain.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .derham_complex import DeRham2D, build_complex
from .exceptions import ScenarioError
from .mhd_model import NO_GRAVITY, EquationOfState, GravitySpec, MHDState, barotropic, ideal_gas

logger = logging.getLogger(__name__)

SHEAR_DELTA = 1.0 / 15.0


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _zero_pair(x, y):
    return _zero(x, y), _zero(x, y)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    lengths: tuple
    boundaries: tuple
    eos: EquationOfState
    velocity: Callable
    density: Callable
    entropy: Callable = _zero
    magnetic: Callable = _zero_pair
    gravity: GravitySpec = NO_GRAVITY
    origin: tuple = (0.0, 0.0)
    dt: float = 1e-3
    t_final: float = 1.0
    grid: tuple = (16, 16)
    degree: int = 1
    params: dict = field(default_factory=dict)

    def to_physical(self, func: Callable) -> Callable:
        """Wraps a function of physical coordinates as one of complex coordinates."""
        x0, y0 = self.origin
        if x0 == 0.0 and y0 == 0.0:
            return func
        return lambda x, y: func(x + x0, y + y0)


def shear_profile(y, delta: float = SHEAR_DELTA):
    """T_delta(y): two tanh layers at y = -0.5 and y = 0.5."""
    return -np.tanh((y - 0.5) / delta) + np.tanh((y + 0.5) / delta)


def _shear_velocity(x, y):
    return 0.5 * (shear_profile(y) - 1.0), 0.1 * np.sin(2 * np.pi * x)


def taylor_green_barotropic() -> ScenarioSpec:
    def velocity(x, y):
        return (
            1.0 - 0.1 * np.cos(2 * x) * np.sin(2 * y),
            1.0 + 0.1 * np.cos(2 * y) * np.sin(2 * x),
        )

    return ScenarioSpec(
        name="taylor-green",
        lengths=(np.pi, np.pi),
        boundaries=("periodic", "periodic"),
        eos=barotropic(),
        velocity=velocity,
        density=lambda x, y: np.ones(np.broadcast(x, y).shape),
        dt=1e-3,
        t_final=1.0,
        grid=(16, 16),
        degree=1,
    )


def shear_layer_barotropic() -> ScenarioSpec:
    return ScenarioSpec(
        name="shear-barotropic",
        lengths=(1.0, 2.0),
        boundaries=("periodic", "periodic"),
        eos=barotropic(),
        velocity=_shear_velocity,
        density=lambda x, y: np.ones(np.broadcast(x, y).shape),
        origin=(0.0, -1.0),
        dt=2e-3,
        t_final=2.0,
        grid=(16, 32),
        degree=1,
    )


def shear_layer_full(gamma: float = 7.0 / 5.0) -> ScenarioSpec:
    def density(x, y):
        return 0.5 + 0.75 * shear_profile(y) + 0.0 * x

    def entropy(x, y):
        rho = density(x, y)
        return -rho * (np.log(gamma - 1.0) + gamma * np.log(rho))

    return ScenarioSpec(
        name="shear-full",
        lengths=(1.0, 2.0),
        boundaries=("periodic", "periodic"),
        eos=ideal_gas(gamma),
        velocity=_shear_velocity,
        density=density,
        entropy=entropy,
        origin=(0.0, -1.0),
        dt=2e-4,
        t_final=0.2,
        grid=(32, 64),
        degree=1,
    )


def rayleigh_taylor(gamma: float = 7.0 / 5.0) -> ScenarioSpec:
    """Heavy fluid below the interface y = 0.5 under an upward force (phi = -y); walls in y."""

    def density(x, y):
        return 1.5 - 0.1 * np.tanh((y - 0.5) / 0.02) + 0.0 * x

    def background_pressure(x, y):
        return 1.5 * y + 1.25 + 0.1 * (0.5 - y) * np.tanh((y - 0.5) / 0.02) + 0.0 * x

    def entropy(x, y):
        rho = density(x, y)
        return rho * np.log(background_pressure(x, y) / ((gamma - 1.0) * rho**gamma))

    def velocity(x, y):
        rho = density(x, y)
        amplitude = -0.025 * np.sqrt(gamma * background_pressure(x, y) / rho)
        return _zero(x, y), amplitude * np.cos(8 * np.pi * x) * np.exp(-((y - 0.5) ** 2) / 0.09)

    return ScenarioSpec(
        name="rayleigh-taylor",
        lengths=(0.25, 1.0),
        boundaries=("periodic", "clamped"),
        eos=ideal_gas(gamma),
        velocity=velocity,
        density=density,
        entropy=entropy,
        gravity=GravitySpec(lambda x, y: -y + 0.0 * x),
        dt=2e-3,
        t_final=2.0,
        grid=(8, 32),
        degree=1,
        params={"pressure": background_pressure},
    )


def alfven_inplane(gamma: float = 5.0 / 3.0, amplitude: float = 0.01) -> ScenarioSpec:
    """Linearly polarised in-plane Alfven wave along x, v_A = 1."""

    def velocity(x, y):
        return _zero(x, y), amplitude * np.sin(2 * np.pi * x) + 0.0 * y

    def magnetic(x, y):
        return np.ones(np.broadcast(x, y).shape), amplitude * np.sin(2 * np.pi * x) + 0.0 * y

    return ScenarioSpec(
        name="alfven",
        lengths=(1.0, 0.25),
        boundaries=("periodic", "periodic"),
        eos=ideal_gas(gamma),
        velocity=velocity,
        density=lambda x, y: np.ones(np.broadcast(x, y).shape),
        entropy=lambda x, y: np.full(np.broadcast(x, y).shape, np.log(0.1 / (gamma - 1.0))),
        magnetic=magnetic,
        dt=2e-3,
        t_final=1.0,
        grid=(32, 4),
        degree=2,
    )


def orszag_tang(gamma: float = 5.0 / 3.0) -> ScenarioSpec:
    rho0 = gamma**2
    s0 = gamma**2 * np.log(gamma / ((gamma - 1.0) * gamma ** (2 * gamma)))

    return ScenarioSpec(
        name="orszag-tang",
        lengths=(2 * np.pi, 2 * np.pi),
        boundaries=("periodic", "periodic"),
        eos=ideal_gas(gamma),
        velocity=lambda x, y: (-np.sin(y) + 0.0 * x, np.sin(x) + 0.0 * y),
        density=lambda x, y: np.full(np.broadcast(x, y).shape, rho0),
        entropy=lambda x, y: np.full(np.broadcast(x, y).shape, s0),
        magnetic=lambda x, y: (-np.sin(y) + 0.0 * x, np.sin(2 * x) + 0.0 * y),
        dt=1e-3,
        t_final=0.5,
        grid=(64, 64),
        degree=2,
    )


def magnetized_khi(b0: float = 0.4, gamma: float = 7.0 / 5.0) -> ScenarioSpec:
    return ScenarioSpec(
        name="mkhi",
        lengths=(1.0, 2.0),
        boundaries=("periodic", "periodic"),
        eos=ideal_gas(gamma),
        velocity=_shear_velocity,
        density=lambda x, y: np.ones(np.broadcast(x, y).shape),
        entropy=lambda x, y: np.full(np.broadcast(x, y).shape, -np.log(gamma - 1.0)),
        magnetic=lambda x, y: (np.full(np.broadcast(x, y).shape, float(b0)), _zero(x, y)),
        origin=(0.0, -1.0),
        dt=2e-3,
        t_final=2.0,
        grid=(16, 32),
        degree=1,
        params={"b0": float(b0)},
    )


SCENARIOS = {
    "taylor-green": taylor_green_barotropic,
    "shear-barotropic": shear_layer_barotropic,
    "shear-full": shear_layer_full,
    "rayleigh-taylor": rayleigh_taylor,
    "alfven": alfven_inplane,
    "orszag-tang": orszag_tang,
    "mkhi": magnetized_khi,
}


def get_scenario(name: str, **kwargs) -> ScenarioSpec:
    """
    Looks up a scenario by its CLI identifier.

    Raises:
        ScenarioError: unknown identifier
    """
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return factory(**kwargs)


def scenario_complex(scenario: ScenarioSpec, nx: Optional[int] = None, ny: Optional[int] = None,
                     degree: Optional[int] = None) -> DeRham2D:
    nx = nx or scenario.grid[0]
    ny = ny or scenario.grid[1]
    degree = degree or scenario.degree
    logger.info("Scenario %s on %dx%d cells, degree %d", scenario.name, nx, ny, degree)
    return build_complex(nx, ny, degree, scenario.lengths, scenario.boundaries)


def scenario_gravity(scenario: ScenarioSpec) -> GravitySpec:
    if not scenario.gravity.active:
        return scenario.gravity
    return GravitySpec(scenario.to_physical(scenario.gravity.potential))


def initial_state(cx: DeRham2D, scenario: ScenarioSpec) -> MHDState:
    """Projects the initial conditions: P0 for u, P2 for rho and s, P1 for B."""
    phys = scenario.to_physical

    def component(func, index):
        return phys(lambda x, y: np.asarray(func(x, y)[index], dtype=float))

    u = cx.project_velocity(component(scenario.velocity, 0), component(scenario.velocity, 1))
    rho = cx.project2(phys(scenario.density))
    s = cx.project2(phys(scenario.entropy))
    b = cx.project1(component(scenario.magnetic, 0), component(scenario.magnetic, 1))
    return MHDState(0.0, u, rho, s, b)
