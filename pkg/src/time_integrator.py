"""
Implicit midpoint time stepping.

One step solves, for the unknown u1,

    (rho1 u1 - rho0 u0) / dt + ...           weak momentum equation
    (c1 - c0) / dt + A_{u_h} c_h = 0          for c in {rho, s, B}

by a fixed-point (Picard) iteration: the three advection systems are linear
once u_h is frozen, the momentum update is a rho1-weighted mass solve.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import NoConvergence, anderson
from scipy.sparse.linalg import gmres, splu

from .derham_complex import DeRham2D, FieldCoeffs, SpaceTag
from .diagnostics_io import invariants
from .exceptions import (
    AssemblyBudgetExceeded,
    ConvergenceError,
    FeecMhdError,
    LinearSolveError,
    PositivityError,
)
from .lie_advection import AdvectionOperator, assemble_advection_matrix
from .mhd_model import EquationOfState, GravitySpec, MHDState, momentum_residual

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    nonlinear_tol: float = 1e-10
    max_picard: int = 50
    linear_tol: float = 1e-13
    anderson_depth: int = 0
    direct_solve_max_dofs: int = 512
    assembly_budget_bytes: int = 256 * 2**20
    gmres_restart: int = 60

    def __post_init__(self):
        if not (self.nonlinear_tol > 0 and self.linear_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_picard < 1:
            raise ValueError("max_picard must be >= 1")
        if self.anderson_depth < 0:
            raise ValueError("anderson_depth must be >= 0")


@dataclass
class StepReport:
    """
    Per-step solver statistics.

    ``positivity_floor_hit`` is always False: density is never floored, a
    non-positive density raises ``PositivityError`` instead.
    """

    picard_iterations: int
    final_residual: float
    linear_iterations_total: int
    positivity_floor_hit: bool = False
    residual_history: list = field(default_factory=list)


@dataclass
class ReversalReport:
    """Relative L2 and max-norm distances between a returned state and the original one."""

    n_steps: int
    l2: dict
    max_norm: dict

    @property
    def worst(self) -> float:
        return max(self.l2.values())


@dataclass
class RunResult:
    state: MHDState
    rows: list
    reports: list
    reversal: Optional[ReversalReport] = None


class _LinearCounter:
    def __init__(self):
        self.total = 0

    def __call__(self, _residual_norm):
        self.total += 1


def _solve_midpoint(
    cx: DeRham2D,
    u_half: FieldCoeffs,
    c0: FieldCoeffs,
    dt: float,
    params: SolverParams,
    counter: _LinearCounter,
):
    """
    (I + dt/2 A) c1 = (I - dt/2 A) c0, returned in the conservative form c0 - dt A(c_h).

    Returns:
        (c1, increment c1 - c0 before rounding, max-norm residual of the advection equation at c1)
    """
    tag = c0.space_tag
    n = cx.dim(tag)
    op = None
    if n <= params.direct_solve_max_dofs:
        try:
            op = assemble_advection_matrix(cx, u_half, tag, params.assembly_budget_bytes)
        except AssemblyBudgetExceeded as exc:
            logger.warning("%s; continuing matrix-free", exc)
    if op is None:
        op = AdvectionOperator(cx, tag, u_half)
    rhs = c0.coeffs - 0.5 * dt * op.apply(c0.coeffs)
    if op.matrix is not None:
        system = (sp.identity(n, format="csc") + 0.5 * dt * op.matrix).tocsc()
        c1 = splu(system).solve(rhs)
    else:
        system = op.as_linear_operator(shift=1.0, scale=0.5 * dt)
        c1, info = gmres(
            system,
            rhs,
            x0=c0.coeffs.copy(),
            rtol=params.linear_tol,
            atol=0.0,
            restart=params.gmres_restart,
            maxiter=50,
            callback=counter,
            callback_type="pr_norm",
        )
        if info != 0:
            achieved = np.linalg.norm(system.matvec(c1) - rhs) / max(np.linalg.norm(rhs), 1e-300)
            if achieved > 10.0 * params.linear_tol:
                raise LinearSolveError(
                    f"GMRES on the {tag.value} midpoint system stopped at relative residual {achieved:.2e}",
                    info=info,
                )
            logger.debug("GMRES info=%d accepted at relative residual %.2e", info, achieved)
    c_half = 0.5 * (c0.coeffs + c1)
    increment = -dt * op.apply(c_half)
    c1_cons = c0.coeffs + increment
    residual = float(np.max(np.abs(op.apply(0.5 * (c1_cons - c1))))) if n else 0.0
    return FieldCoeffs(tag, c1_cons), increment, residual


def _advect_all(cx, state: MHDState, du: np.ndarray, dt, params, counter):
    """Advects rho, s and B with u_h = u0 + du / 2; returns the new state, the exact increments and the advection residual."""
    u1 = state.u.coeffs + du
    u_half = FieldCoeffs(SpaceTag.VELOCITY, state.u.coeffs + 0.5 * du)
    rho1, d_rho, r_rho = _solve_midpoint(cx, u_half, state.rho, dt, params, counter)
    s1, _, r_s = _solve_midpoint(cx, u_half, state.s, dt, params, counter)
    b1, _, r_b = _solve_midpoint(cx, u_half, state.B, dt, params, counter)
    new = MHDState(state.time + dt, FieldCoeffs(SpaceTag.VELOCITY, u1), rho1, s1, b1)
    return new, {"u": du, "rho": d_rho}, max(r_rho, r_s, r_b)


def _residuals(cx, eos, gravity, state, new, dt, increments):
    """Momentum residual (free DOFs zeroed elsewhere) and the mass-diagonal scaled version."""
    res = momentum_residual(cx, eos, gravity, state, new, dt, increments)
    res[cx.constrained_velocity_dofs()] = 0.0
    mass = cx.weighted_velocity_mass(new.rho)
    return res, mass, res / mass.diagonal()


def step(
    cx: DeRham2D,
    eos: EquationOfState,
    gravity: GravitySpec,
    state: MHDState,
    dt: float,
    params: SolverParams = SolverParams(),
):
    """
    Advances the state by dt (negative dt runs backwards).

    Returns:
        (new state, StepReport)

    Raises:
        ConvergenceError: residual above ``nonlinear_tol`` after ``max_picard`` iterations
        PositivityError: density lost positivity
    """
    if dt == 0:
        raise ValueError("time step must be non-zero")
    if params.anderson_depth > 0:
        return _step_anderson(cx, eos, gravity, state, dt, params)
    counter = _LinearCounter()
    free = cx.free_velocity_dofs()
    history = []
    # iterate on the increment u1 - u0 so the time difference carries no cancellation
    du = np.zeros_like(state.u.coeffs)
    for it in range(1, params.max_picard + 1):
        new, increments, adv_res = _advect_all(cx, state, du, dt, params, counter)
        res, mass, scaled = _residuals(cx, eos, gravity, state, new, dt, increments)
        norm = max(float(np.max(np.abs(scaled))) if scaled.size else 0.0, adv_res)
        history.append(norm)
        logger.debug("picard %d: scaled momentum residual %.3e", it, norm)
        if norm <= params.nonlinear_tol:
            report = StepReport(it, norm, counter.total, residual_history=history)
            return new, report
        lu = splu(mass[free][:, free].tocsc())
        delta = np.zeros_like(du)
        delta[free] = lu.solve(res[free])
        du = du - dt * delta
    raise ConvergenceError(
        f"Picard iteration did not converge in {params.max_picard} iterations "
        f"(last residual {history[-1]:.3e})",
        residual_history=history,
    )


def _step_anderson(cx, eos, gravity, state, dt, params):
    counter = _LinearCounter()
    free = cx.free_velocity_dofs()
    history = []
    cache = {}

    def picard_direction(du_free):
        # the Picard update M(rho1)^-1 R, so plain mixing with alpha = -dt is the Picard step
        du = np.zeros(cx.dim(SpaceTag.VELOCITY))
        du[free] = du_free
        new, increments, adv_res = _advect_all(cx, state, du, dt, params, counter)
        res, mass, scaled = _residuals(cx, eos, gravity, state, new, dt, increments)
        cache["state"] = new
        cache["x"] = np.array(du_free, copy=True)
        history.append(max(float(np.max(np.abs(scaled))) if scaled.size else 0.0, adv_res))
        logger.debug("anderson %d: scaled momentum residual %.3e", len(history), history[-1])
        return splu(mass[free][:, free].tocsc()).solve(res[free])

    try:
        du_free = anderson(
            picard_direction,
            np.zeros(free.size),
            alpha=-dt,
            M=params.anderson_depth,
            f_tol=params.nonlinear_tol,
            maxiter=params.max_picard,
            line_search=None,
        )
    except NoConvergence as exc:
        raise ConvergenceError(
            f"Anderson iteration did not converge in {params.max_picard} iterations",
            residual_history=history,
        ) from exc
    du_free = np.asarray(du_free)
    if not np.array_equal(cache["x"], du_free):
        picard_direction(du_free)
    return cache["state"], StepReport(len(history), history[-1], counter.total, residual_history=history)


def run(
    cx: DeRham2D,
    eos: EquationOfState,
    gravity: GravitySpec,
    state0: MHDState,
    dt: float,
    n_steps: int,
    params: SolverParams = SolverParams(),
    hooks: Iterable[Callable] = (),
    log_every: int = 10,
) -> RunResult:
    """
    Runs ``n_steps`` steps, recording one invariants row per state (``n_steps + 1`` rows).

    Hooks are called as ``hook(step_index, state, row)`` after each row is recorded.
    """
    hooks = list(hooks)
    state = state0
    row = invariants(cx, eos, gravity, state, picard_iterations=0)
    rows, reports = [row], []
    for hook in hooks:
        hook(0, state, row)
    for k in range(1, n_steps + 1):
        try:
            state, report = step(cx, eos, gravity, state, dt, params)
        except FeecMhdError as exc:
            if isinstance(exc, ConvergenceError):
                raise ConvergenceError(
                    f"step {k}: {exc}", residual_history=exc.residual_history, step_index=k
                ) from exc
            if isinstance(exc, PositivityError):
                exc.step_index = k
            raise
        row = invariants(cx, eos, gravity, state, picard_iterations=report.picard_iterations)
        rows.append(row)
        reports.append(report)
        for hook in hooks:
            hook(k, state, row)
        if log_every and (k % log_every == 0 or k == n_steps):
            logger.info(
                "step %d/%d t=%.4f picard=%d residual=%.2e energy=%.12e",
                k, n_steps, state.time, report.picard_iterations, report.final_residual, row.total_energy,
            )
    return RunResult(state, rows, reports)


def reversal_report(cx: DeRham2D, returned: MHDState, original: MHDState, n_steps: int) -> ReversalReport:
    l2, max_norm = {}, {}
    for name in ("rho", "s", "u", "B"):
        a, b = getattr(returned, name), getattr(original, name)
        ref = cx.l2_norm(b)
        err = cx.l2_norm(a - b)
        l2[name] = err / ref if ref > 0 else err
        ref_max = float(np.max(np.abs(b.coeffs))) if b.coeffs.size else 0.0
        err_max = float(np.max(np.abs(a.coeffs - b.coeffs))) if a.coeffs.size else 0.0
        max_norm[name] = err_max / ref_max if ref_max > 0 else err_max
    return ReversalReport(n_steps, l2, max_norm)


def reverse_run(
    cx: DeRham2D,
    eos: EquationOfState,
    gravity: GravitySpec,
    state_T: MHDState,
    dt: float,
    n_steps: int,
    params: SolverParams = SolverParams(),
    original: Optional[MHDState] = None,
    hooks: Iterable[Callable] = (),
    log_every: int = 10,
) -> RunResult:
    """Runs backwards with -dt; when ``original`` is given the return error is reported."""
    result = run(cx, eos, gravity, state_T, -dt, n_steps, params, hooks, log_every)
    if original is not None:
        result.reversal = reversal_report(cx, result.state, original, n_steps)
        logger.info(
            "reversal after %d steps: relative L2 errors %s",
            n_steps, {k: f"{v:.3e}" for k, v in result.reversal.l2.items()},
        )
    return result
