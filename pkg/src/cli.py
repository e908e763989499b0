"""
Command-line interface: ``run``, ``convergence``, ``invariants-check`` and ``report``.

Every subcommand returns an exit code: 0 on success, 1 when the solver or the
writers raise a ``FeecMhdError`` (or a property check fails), 2 on usage errors.
"""

import argparse
import logging
import os
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from .config import Settings, load_settings
from .convergence import convergence_study
from .data_processing import convergence_table, load_invariants, summarize_run
from .derham_complex import build_complex
from .diagnostics_io import (
    max_vorticity,
    property_suite,
    read_vtk,
    write_csv,
    write_state,
    write_vtk,
)
from .exceptions import FeecMhdError, OutputError, ScenarioError
from .scenarios import SCENARIOS, get_scenario, initial_state, scenario_complex, scenario_gravity
from .time_integrator import SolverParams, reverse_run, run
from .visualizations import convergence_figure, field_heatmap_figure, invariants_drift_figure

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="TOML file with run settings")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feec-mhd", description="Structure-preserving 2D ideal MHD solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one scenario")
    _add_common(p_run)
    p_run.add_argument("--scenario", choices=list(SCENARIOS))
    p_run.add_argument("--nx", type=int)
    p_run.add_argument("--ny", type=int)
    p_run.add_argument("--degree", type=int)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--t-final", type=float)
    p_run.add_argument("--tol", type=float)
    p_run.add_argument("--out-dir")
    p_run.add_argument("--snapshot-every", type=int)
    p_run.add_argument("--reverse-at", type=float, help="run forward to this time, then back to t=0")
    p_run.add_argument("--b0", type=float, help="background field of the magnetized KHI")
    p_run.add_argument("--anderson", type=int, dest="anderson_depth", help="Anderson mixing depth (0 = Picard)")
    p_run.add_argument("--max-picard", type=int)

    p_conv = sub.add_parser("convergence", help="grid convergence study against a finer reference")
    _add_common(p_conv)
    p_conv.add_argument("--scenario", choices=list(SCENARIOS))
    p_conv.add_argument("--degrees", type=int, nargs="+", default=[1, 2])
    p_conv.add_argument("--grids", type=int, nargs="+", default=[8, 16, 32])
    p_conv.add_argument("--dt", type=float)
    p_conv.add_argument("--t-final", type=float)
    p_conv.add_argument("--out-dir")

    p_check = sub.add_parser("invariants-check", help="structural property suite on small complexes")
    _add_common(p_check)
    p_check.add_argument("--seed", type=int, default=0)

    p_report = sub.add_parser("report", help="HTML figures for a finished run directory")
    _add_common(p_report)
    p_report.add_argument("--run-dir", required=True)
    return parser


def _settings(args) -> Settings:
    keys = ("scenario", "nx", "ny", "degree", "dt", "t_final", "tol", "out_dir", "snapshot_every",
            "reverse_at", "b0", "anderson_depth", "max_picard", "log_level")
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_settings(args.config, overrides)


def _solver_params(settings: Settings) -> SolverParams:
    return SolverParams(
        nonlinear_tol=settings.tol,
        max_picard=settings.max_picard,
        linear_tol=settings.linear_tol,
        anderson_depth=settings.anderson_depth,
        direct_solve_max_dofs=settings.direct_solve_max_dofs,
        assembly_budget_bytes=settings.assembly_budget_mb * 2**20,
    )


def _scenario(settings: Settings):
    kwargs = {"b0": settings.b0} if settings.scenario == "mkhi" else {}
    return get_scenario(settings.scenario, **kwargs)


def _n_steps(span: float, dt: float) -> int:
    n = max(1, int(round(span / dt)))
    if abs(n * dt - span) > 1e-9 * max(abs(span), 1.0):
        logger.warning("%.6g is not a multiple of dt=%.3g; running %d steps to t=%.6g", span, dt, n, n * dt)
    return n


def execute_run(settings: Settings):
    """
    Runs one scenario as configured and writes its outputs.

    Returns:
        dict with the RunResult ('result') and the written paths
    """
    scenario = _scenario(settings)
    cx = scenario_complex(scenario, settings.nx, settings.ny, settings.degree)
    gravity = scenario_gravity(scenario)
    params = _solver_params(settings)
    dt = settings.dt or scenario.dt
    out_dir = Path(settings.out_dir)
    state0 = initial_state(cx, scenario)

    snapshots = []

    def snapshot_hook(offset):
        def hook(k, state, _row):
            index = offset + k
            if settings.snapshot_every and index % settings.snapshot_every == 0 and (offset == 0 or k > 0):
                path = out_dir / f"snapshot_{index:06d}.vtk"
                snapshots.append(write_vtk(cx, scenario.eos, state, path, settings.samples_per_cell))

        return hook

    if settings.reverse_at is not None:
        n_steps = _n_steps(settings.reverse_at, dt)
        logger.info("Reversibility run: %d steps forward, %d back (dt=%.3g)", n_steps, n_steps, dt)
        forward = run(cx, scenario.eos, gravity, state0, dt, n_steps, params, [snapshot_hook(0)],
                      settings.log_every)
        backward = reverse_run(cx, scenario.eos, gravity, forward.state, dt, n_steps, params,
                               original=state0, hooks=[snapshot_hook(n_steps)], log_every=settings.log_every)
        result = backward
        result.rows = forward.rows + backward.rows[1:]
        result.reports = forward.reports + backward.reports
    else:
        n_steps = _n_steps(settings.t_final or scenario.t_final, dt)
        logger.info("Running %s: %d steps of dt=%.3g", scenario.name, n_steps, dt)
        result = run(cx, scenario.eos, gravity, state0, dt, n_steps, params, [snapshot_hook(0)],
                     settings.log_every)

    paths = {
        "invariants": write_csv(result.rows, out_dir / "invariants.csv"),
        "state": write_state(result.state, out_dir / "final_state.npz"),
        "snapshots": snapshots,
    }
    if result.reversal is not None:
        paths["reversal"] = _write_reversal(result.reversal, out_dir / "reversal.csv")
    logger.info("Final max |vorticity| = %.6e", max_vorticity(cx, result.state.u, settings.samples_per_cell))
    return {"result": result, "paths": paths}


def _write_reversal(report, path: Path) -> Path:
    df = pd.DataFrame({"field": list(report.l2), "l2": list(report.l2.values()),
                       "max_norm": [report.max_norm[k] for k in report.l2]})
    try:
        df.to_csv(path, index=False)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return path


def _cmd_run(args) -> int:
    settings = _settings(args)
    if settings.threads and os.environ.get("OMP_NUM_THREADS") != str(settings.threads):
        logger.warning("threads=%d only takes effect through FEEC_MHD_THREADS before start-up", settings.threads)
    execute_run(settings)
    return 0


def _cmd_convergence(args) -> int:
    settings = _settings(args)
    scenario = _scenario(settings)
    dt = settings.dt or scenario.dt
    t_final = settings.t_final or scenario.t_final
    reports = convergence_study(scenario, args.degrees, args.grids, dt, t_final, _solver_params(settings))
    table = convergence_table(reports)
    out_dir = Path(settings.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_dir / "convergence.csv", index=False)
        convergence_figure(table, title=f"{scenario.name}: grid convergence").write_html(out_dir / "convergence.html")
    except OSError as exc:
        raise OutputError(out_dir, exc.strerror or str(exc)) from exc
    for _, row in table.iterrows():
        logger.info("%s", ", ".join(f"{k}={v:.4g}" for k, v in row.items()))
    return 0


def _cmd_invariants_check(args) -> int:
    complexes = {
        "periodic p=2": build_complex(8, 8, 2),
        "periodic/clamped p=1": build_complex(8, 8, 1, boundaries=("periodic", "clamped")),
    }
    failed = 0
    for label, cx in complexes.items():
        for check in property_suite(cx, seed=args.seed):
            level = logging.INFO if check.passed else logging.ERROR
            logger.log(level, "[%s] %-32s %.3e (tolerance %.1e) %s", label, check.name, check.value,
                       check.tolerance, "ok" if check.passed else "FAILED")
            failed += not check.passed
    return 1 if failed else 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    csv_path = run_dir / "invariants.csv"
    if not csv_path.is_file():
        raise OutputError(csv_path, "no invariants.csv in run directory")
    df = load_invariants(str(csv_path))
    for key, value in summarize_run(df).items():
        logger.info("%s: %.6g", key, value)
    try:
        invariants_drift_figure(df, title=f"Conservation ({run_dir.name})").write_html(run_dir / "report.html")
        snapshots = sorted(run_dir.glob("snapshot_*.vtk"))
        if snapshots:
            data = read_vtk(snapshots[-1])
            nx, ny, _ = data["dimensions"]
            dx, dy, _ = data["spacing"]
            xs = [i * dx for i in range(nx)]
            ys = [j * dy for j in range(ny)]
            for name in ("rho", "vorticity"):
                fig = field_heatmap_figure(xs, ys, data["fields"][name], title=f"{name} ({snapshots[-1].stem})")
                fig.write_html(run_dir / f"report_{name}.html")
    except OSError as exc:
        raise OutputError(run_dir, exc.strerror or str(exc)) from exc
    logger.info("Report written to %s", run_dir / "report.html")
    return 0


COMMANDS = {
    "run": _cmd_run,
    "convergence": _cmd_convergence,
    "invariants-check": _cmd_invariants_check,
    "report": _cmd_report,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        level = _settings(args).log_level if args.command != "report" else (args.log_level or "INFO")
    except ValueError as exc:
        parser.print_usage()
        logging.basicConfig(format=LOG_FORMAT, force=True)
        logger.error("%s", exc)
        return 2
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT, force=True)

    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        parser.print_usage()
        logger.error("%s", exc)
        return 2
    except FeecMhdError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except ValueError as exc:
        logger.error("%s", exc)
        return 2
