"""
Physics layer: equations of state, energies and the momentum residual.

The momentum residual is the weak momentum equation of the midpoint scheme
tested against every velocity basis function. It is assembled in one pass:
each term is a functional on some sample grid, pulled back through the
transposed projections and then through the velocity evaluation.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .derham_complex import COMPONENT_KINDS, DeRham2D, FieldCoeffs, SpaceTag
from .exceptions import PositivityError, SpaceError

logger = logging.getLogger(__name__)

# difference quotients switch to path averages below this relative increment
SECANT_SWITCH = 0.1
_nodes, _weights = np.polynomial.legendre.leggauss(10)
_PATH_NODES = 0.5 * (_nodes + 1.0)
_PATH_WEIGHTS = 0.5 * _weights

_HI = ("hi", "hi")
_LO = ("lo", "lo")


class EOSKind(str, Enum):
    BAROTROPIC = "barotropic"
    IDEAL_GAS = "ideal_gas_entropy"


@dataclass(frozen=True)
class EquationOfState:
    """
    ``barotropic``: e = rho / 2, independent of s.
    ``ideal_gas_entropy``: e = rho**(gamma - 1) * exp(s / rho), s an entropy density.
    """

    kind: EOSKind = EOSKind.BAROTROPIC
    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", EOSKind(self.kind))
        if self.kind is EOSKind.IDEAL_GAS and not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")


def barotropic() -> EquationOfState:
    return EquationOfState(EOSKind.BAROTROPIC)


def ideal_gas(gamma: float) -> EquationOfState:
    return EquationOfState(EOSKind.IDEAL_GAS, float(gamma))


@dataclass(frozen=True)
class GravitySpec:
    """Gravitational potential phi(x, y); ``None`` means no gravity."""

    potential: Optional[Callable] = None

    @property
    def active(self) -> bool:
        return self.potential is not None


NO_GRAVITY = GravitySpec()


@dataclass(frozen=True, eq=False)
class MHDState:
    time: float
    u: FieldCoeffs
    rho: FieldCoeffs
    s: FieldCoeffs
    B: FieldCoeffs

    def __post_init__(self):
        expected = {"u": SpaceTag.VELOCITY, "rho": SpaceTag.DENS2, "s": SpaceTag.DENS2, "B": SpaceTag.FLUX1}
        for name, tag in expected.items():
            if getattr(self, name).space_tag is not tag:
                raise SpaceError(f"state field {name} must be {tag.value}")

    def replace(self, **changes) -> "MHDState":
        fields = {"time": self.time, "u": self.u, "rho": self.rho, "s": self.s, "B": self.B}
        fields.update(changes)
        return MHDState(**fields)


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if rho.size and rho.min() <= 0.0:
        raise PositivityError("equation of state", rho.min())
    return rho


def internal_energy(eos: EquationOfState, rho, s) -> np.ndarray:
    """Specific internal energy e(rho, s), pointwise."""
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if eos.kind is EOSKind.BAROTROPIC:
        return 0.5 * rho + 0.0 * s
    rho = _check_rho(rho)
    return rho ** (eos.gamma - 1.0) * np.exp(s / rho)


def energy_partials(eos: EquationOfState, rho, s):
    """(d e / d rho, d e / d s), pointwise."""
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if eos.kind is EOSKind.BAROTROPIC:
        shape = np.broadcast(rho, s).shape
        return np.full(shape, 0.5), np.zeros(shape)
    rho = _check_rho(rho)
    e = internal_energy(eos, rho, s)
    return e * ((eos.gamma - 1.0) / rho - s / rho**2), e / rho


def energy_density(eos: EquationOfState, rho, s) -> np.ndarray:
    """rho * e(rho, s)."""
    return np.asarray(rho, dtype=float) * internal_energy(eos, rho, s)


def energy_density_partials(eos: EquationOfState, rho, s):
    """(d(rho e)/d rho, d(rho e)/d s)."""
    rho = np.asarray(rho, dtype=float)
    e = internal_energy(eos, rho, s)
    de_rho, de_s = energy_partials(eos, rho, s)
    return e + rho * de_rho, rho * de_s


def pressure(eos: EquationOfState, rho, s) -> np.ndarray:
    """p = rho * (rho * de/drho + s * de/ds)."""
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if eos.kind is EOSKind.IDEAL_GAS:
        _check_rho(rho)
    de_rho, de_s = energy_partials(eos, rho, s)
    return rho * (rho * de_rho + s * de_s)


def _difference_quotient(values, partial, a0, a1, fixed, scale):
    """
    (F(a1) - F(a0)) / (a1 - a0) at fixed other argument.

    Small increments average the partial along the segment with Gauss-Legendre
    nodes instead of dividing a rounded difference by a tiny increment.
    """
    delta = a1 - a0
    use_secant = np.abs(delta) > SECANT_SWITCH * scale
    path = a0[..., None] + delta[..., None] * _PATH_NODES
    along = partial(path, fixed[..., None]) @ _PATH_WEIGHTS
    secant = (values(a1, fixed) - values(a0, fixed)) / np.where(use_secant, delta, 1.0)
    return np.where(use_secant, secant, along)


def discrete_gradient_coeffs(eos: EquationOfState, rho0, rho1, s0, s1):
    """
    Averaged difference quotients with
    c_rho * (rho1 - rho0) + c_s * (s1 - s0) = F(rho1, s1) - F(rho0, s0), F = rho e.

    Increments below ``SECANT_SWITCH`` times the local density are evaluated
    as path averages of the analytic partials, which reduce to the partials
    themselves for coincident arguments.
    """
    rho0, rho1, s0, s1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho0, rho1, s0, s1)))

    def density_values(rho, s):
        return energy_density(eos, rho, s)

    def d_rho(rho, s):
        return energy_density_partials(eos, rho, s)[0]

    def entropy_values(s, rho):
        return energy_density(eos, rho, s)

    def d_s(s, rho):
        return energy_density_partials(eos, rho, s)[1]

    rho_scale = np.maximum(np.abs(rho0), np.abs(rho1))
    c_rho = 0.5 * (
        _difference_quotient(density_values, d_rho, rho0, rho1, s1, rho_scale)
        + _difference_quotient(density_values, d_rho, rho0, rho1, s0, rho_scale)
    )
    c_s = 0.5 * (
        _difference_quotient(entropy_values, d_s, s0, s1, rho1, np.abs(rho1))
        + _difference_quotient(entropy_values, d_s, s0, s1, rho0, np.abs(rho0))
    )
    return c_rho, c_s


def _potential_on(cx: DeRham2D, gravity: GravitySpec, grid: str) -> np.ndarray:
    if not gravity.active:
        return 0.0
    return np.asarray(gravity.potential(*cx.mesh(grid)), dtype=float)


def energy_components(cx: DeRham2D, eos: EquationOfState, gravity: GravitySpec, state: MHDState) -> dict:
    """Kinetic, internal, magnetic and potential energies by Gauss quadrature."""
    rho = cx.values_on_grid(state.rho, "quad")[0]
    s = cx.values_on_grid(state.s, "quad")[0]
    ux, uy = cx.values_on_grid(state.u, "quad")
    bx, by = cx.values_on_grid(state.B, "quad")
    if eos.kind is EOSKind.IDEAL_GAS and rho.min() <= 0.0:
        raise PositivityError("density at quadrature points", rho.min())
    return {
        "kinetic": cx.integrate(0.5 * rho * (ux**2 + uy**2)),
        "internal": cx.integrate(energy_density(eos, rho, s)),
        "magnetic": cx.integrate(0.5 * (bx**2 + by**2)),
        "potential": cx.integrate(rho * _potential_on(cx, gravity, "quad")) if gravity.active else 0.0,
    }


def total_energy(cx: DeRham2D, eos: EquationOfState, gravity: GravitySpec, state: MHDState) -> float:
    return float(sum(energy_components(cx, eos, gravity, state).values()))


def _flux_functional_to_velocity(cx: DeRham2D, functional: np.ndarray, weight_x, weight_y):
    # <functional, P1(w v)> as a functional of the velocity coefficients
    sx, sy = cx.projection_sample_weights(SpaceTag.FLUX1, functional)
    return (
        cx.pull_back(sx * weight_x, _HI, "p1x"),
        cx.pull_back(sy * weight_y, _HI, "p1y"),
    )


def momentum_residual(
    cx: DeRham2D,
    eos: EquationOfState,
    gravity: GravitySpec,
    state_k: MHDState,
    state_k1: MHDState,
    dt: float,
    increments: Optional[dict] = None,
) -> np.ndarray:
    """
    Weak momentum residual of the midpoint step against every velocity basis function.

    Terms, with m = rho u and midpoint values marked h:
        int (m1 - m0) / dt . v
      + sum_i <rho_h u_h_i, P0(v . grad u_h_i - u_h . grad v_i)>
      + int (u0 . u1 / 2 - c_rho - phi) A_v rho_h
      - int c_s A_v s_h
      - int B_h . A_v B_h

    The time difference is formed as rho1 (u1 - u0) + (rho1 - rho0) u0 from
    coefficient increments. ``increments`` may carry the exact "u" and "rho"
    increments of the step; otherwise they are the coefficient differences.

    Returns:
        Flat vector of length dim(velocity)

    Raises:
        PositivityError: non-positive density at quadrature points
    """
    if dt == 0:
        raise ValueError("time step must be non-zero")
    w = cx.quad_weights
    rho0 = cx.values_on_grid(state_k.rho, "quad")[0]
    rho1 = cx.values_on_grid(state_k1.rho, "quad")[0]
    for label, values in (("rho^k", rho0), ("rho^k+1", rho1)):
        if values.min() <= 0.0:
            raise PositivityError(f"{label} at quadrature points", values.min())
    s0 = cx.values_on_grid(state_k.s, "quad")[0]
    s1 = cx.values_on_grid(state_k1.s, "quad")[0]
    u0 = cx.values_on_grid(state_k.u, "quad")
    u1 = cx.values_on_grid(state_k1.u, "quad")

    # time difference of the momentum
    increments = increments or {}
    du = increments.get("u", state_k1.u.coeffs - state_k.u.coeffs)
    drho = increments.get("rho", state_k1.rho.coeffs - state_k.rho.coeffs)
    du_q = cx.values_on_grid(FieldCoeffs(SpaceTag.VELOCITY, du), "quad")
    drho_q = cx.values_on_grid(FieldCoeffs(SpaceTag.DENS2, drho), "quad")[0]
    res_x = cx.pull_back(w * (rho1 * du_q[0] + drho_q * u0[0]), _HI, "quad") / dt
    res_y = cx.pull_back(w * (rho1 * du_q[1] + drho_q * u0[1]), _HI, "quad") / dt

    u_h = state_k.u.midpoint(state_k1.u)
    rho_h = state_k.rho.midpoint(state_k1.rho)
    s_h = state_k.s.midpoint(state_k1.s)
    b_h = state_k.B.midpoint(state_k1.B)

    # bracket term: g_i = P0^T (rho_h u_h_i) weights at Greville points
    rho_hq = 0.5 * (rho0 + rho1)
    uh_q = cx.values_on_grid(u_h, "quad")
    g = [
        cx.projection_adjoint(SpaceTag.FORM0, cx.pull_back(w * rho_hq * uh_q[i], _HI, "quad").ravel())[0]
        for i in range(2)
    ]
    uh = cx.values_on_grid(u_h, "p0")
    duh_dx = cx.values_on_grid(u_h, "p0", (1, 0))
    duh_dy = cx.values_on_grid(u_h, "p0", (0, 1))
    res_x = res_x + cx.pull_back(g[0] * duh_dx[0] + g[1] * duh_dx[1], _HI, "p0")
    res_y = res_y + cx.pull_back(g[0] * duh_dy[0] + g[1] * duh_dy[1], _HI, "p0")
    res_x = res_x - cx.pull_back(g[0] * uh[0], _HI, "p0", (1, 0)) - cx.pull_back(g[0] * uh[1], _HI, "p0", (0, 1))
    res_y = res_y - cx.pull_back(g[1] * uh[0], _HI, "p0", (1, 0)) - cx.pull_back(g[1] * uh[1], _HI, "p0", (0, 1))

    # density and entropy terms through D1 P1
    c_rho, c_s = discrete_gradient_coeffs(eos, rho0, rho1, s0, s1)
    a = 0.5 * (u0[0] * u1[0] + u0[1] * u1[1]) - c_rho
    if gravity.active:
        a = a - _potential_on(cx, gravity, "quad")
    fa = cx.D1.T @ cx.pull_back(w * a, _LO, "quad").ravel()
    fb = cx.D1.T @ cx.pull_back(-w * c_s, _LO, "quad").ravel()
    rho_p1x = cx.values_on_grid(rho_h, "p1x")[0]
    rho_p1y = cx.values_on_grid(rho_h, "p1y")[0]
    px, py = _flux_functional_to_velocity(cx, fa, rho_p1x, rho_p1y)
    res_x, res_y = res_x + px, res_y + py
    if np.any(c_s):
        s_p1x = cx.values_on_grid(s_h, "p1x")[0]
        s_p1y = cx.values_on_grid(s_h, "p1y")[0]
        px, py = _flux_functional_to_velocity(cx, fb, s_p1x, s_p1y)
        res_x, res_y = res_x + px, res_y + py

    # magnetic term -<B_h, D0 P0(i_v B_h) + P1((D1 B_h) v)>
    bq = cx.values_on_grid(b_h, "quad")
    fb_mag = cx.join(
        [cx.pull_back(w * bq[k], kinds, "quad") for k, kinds in enumerate(COMPONENT_KINDS[SpaceTag.FLUX1])]
    )
    if np.any(fb_mag):
        g0 = cx.projection_adjoint(SpaceTag.FORM0, cx.D0.T @ fb_mag)[0]
        bx, by = cx.values_on_grid(b_h, "p0")
        # i_v B = B_x v_y - B_y v_x
        res_y = res_y - cx.pull_back(g0 * bx, _HI, "p0")
        res_x = res_x + cx.pull_back(g0 * by, _HI, "p0")
        div_b = FieldCoeffs(SpaceTag.DENS2, cx.D1 @ b_h.coeffs)
        if np.any(div_b.coeffs):
            w_x = cx.values_on_grid(div_b, "p1x")[0]
            w_y = cx.values_on_grid(div_b, "p1y")[0]
            px, py = _flux_functional_to_velocity(cx, -fb_mag, w_x, w_y)
            res_x, res_y = res_x + px, res_y + py

    return cx.join([res_x, res_y])
