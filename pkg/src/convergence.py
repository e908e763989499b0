"""
Grid-convergence harness: runs a scenario on a sequence of grids at fixed
degree and measures L2 errors against a run one level finer.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .derham_complex import DeRham2D
from .mhd_model import MHDState
from .scenarios import ScenarioSpec, initial_state, scenario_complex, scenario_gravity
from .time_integrator import SolverParams, run

logger = logging.getLogger(__name__)

FIELDS = ("rho", "u")


@dataclass
class ConvergenceReport:
    degree: int
    h: list
    errors: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)


def observed_orders(errors: Sequence[float], h: Sequence[float]) -> list[Optional[float]]:
    """
    log(e_{i-1} / e_i) / log(h_{i-1} / h_i); ``None`` for the first entry and
    wherever an error vanishes.
    """
    orders: list[Optional[float]] = [None]
    for i in range(1, len(errors)):
        if errors[i] <= 0 or errors[i - 1] <= 0:
            orders.append(None)
            continue
        orders.append(math.log(errors[i - 1] / errors[i]) / math.log(h[i - 1] / h[i]))
    return orders


def _field_error(cx: DeRham2D, state: MHDState, ref_cx: DeRham2D, ref_state: MHDState, name: str) -> float:
    ref_field = getattr(ref_state, name)

    def reference(x, y):
        values = ref_cx.eval_field(ref_field, x.ravel(), y.ravel())
        if values.ndim == 1:
            return values.reshape(x.shape)
        return values[:, 0].reshape(x.shape), values[:, 1].reshape(x.shape)

    return cx.l2_error(getattr(state, name), reference)


def _run_to(scenario: ScenarioSpec, n: int, degree: int, dt: float, n_steps: int, params: SolverParams):
    cx = scenario_complex(scenario, n, n, degree)
    result = run(cx, scenario.eos, scenario_gravity(scenario), initial_state(cx, scenario), dt, n_steps, params,
                 log_every=0)
    return cx, result.state


def convergence_study(
    scenario: ScenarioSpec,
    degrees: Sequence[int],
    grids: Sequence[int],
    dt: float,
    t_final: float,
    params: SolverParams = SolverParams(),
) -> list[ConvergenceReport]:
    """
    One report per degree. Square grids ``n x n`` are run to ``t_final``; the
    reference is the same degree on ``2 * max(grids)`` cells per direction.
    """
    n_steps = int(round(t_final / dt))
    grids = sorted(int(n) for n in grids)
    reports = []
    for degree in degrees:
        ref_cx, ref_state = _run_to(scenario, 2 * grids[-1], degree, dt, n_steps, params)
        report = ConvergenceReport(degree=int(degree), h=[scenario.lengths[0] / n for n in grids])
        for name in FIELDS:
            report.errors[name] = []
        for n in grids:
            cx, state = _run_to(scenario, n, degree, dt, n_steps, params)
            for name in FIELDS:
                report.errors[name].append(_field_error(cx, state, ref_cx, ref_state, name))
            logger.info(
                "degree %d, %d cells: %s", degree, n,
                ", ".join(f"{k}={v[-1]:.3e}" for k, v in report.errors.items()),
            )
        for name in FIELDS:
            report.orders[name] = observed_orders(report.errors[name], report.h)
        reports.append(report)
    return reports
