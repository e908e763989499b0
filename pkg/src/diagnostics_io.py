"""
Diagnostics and output: conserved quantities, derived fields, CSV/VTK/npz
writers and the structural property suite run by ``invariants-check``.
"""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.signal import correlate

from .derham_complex import DeRham2D, FieldCoeffs, SpaceTag, build_complex
from .exceptions import OutputError
from .lie_advection import hat_of_advection, lie_flux
from .mhd_model import (
    EquationOfState,
    GravitySpec,
    MHDState,
    barotropic,
    discrete_gradient_coeffs,
    energy_components,
    energy_density,
    ideal_gas,
    pressure,
)

logger = logging.getLogger(__name__)


@dataclass
class InvariantsRow:
    time: float
    total_mass: float
    total_entropy: float
    total_energy: float
    kinetic_energy: float
    internal_energy: float
    magnetic_energy: float
    potential_energy: float
    div_B_l2: float
    picard_iterations: int


INVARIANT_COLUMNS = [f.name for f in fields(InvariantsRow)]


def invariants(
    cx: DeRham2D,
    eos: EquationOfState,
    gravity: GravitySpec,
    state: MHDState,
    picard_iterations: int = 0,
) -> InvariantsRow:
    """Mass, entropy, energy split and the L2 norm of div B for one state."""
    parts = energy_components(cx, eos, gravity, state)
    div_b = FieldCoeffs(SpaceTag.DENS2, cx.D1 @ state.B.coeffs)
    return InvariantsRow(
        time=float(state.time),
        total_mass=cx.integral(state.rho),
        total_entropy=cx.integral(state.s),
        total_energy=float(sum(parts.values())),
        kinetic_energy=parts["kinetic"],
        internal_energy=parts["internal"],
        magnetic_energy=parts["magnetic"],
        potential_energy=parts["potential"],
        div_B_l2=cx.l2_norm(div_b),
        picard_iterations=int(picard_iterations),
    )


def _pointwise(func: Callable) -> Callable:
    # accept arrays of any shape for x and y
    def wrapper(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        xb, yb = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
        return func(xb, yb).reshape(shape)

    return wrapper


def vorticity_field(cx: DeRham2D, u: FieldCoeffs) -> Callable:
    """Evaluable dx u_y - dy u_x."""

    def omega(x, y):
        grad = cx.eval_field(u, x, y, "grad")
        return grad[:, 1, 0] - grad[:, 0, 1]

    return _pointwise(omega)


def pressure_field(cx: DeRham2D, eos: EquationOfState, state: MHDState) -> Callable:
    """Evaluable pressure p(rho, s) recomputed from the primal fields."""

    def p(x, y):
        rho = cx.eval_field(state.rho, x, y)
        s = cx.eval_field(state.s, x, y)
        return pressure(eos, rho, s)

    return _pointwise(p)


def max_vorticity(cx: DeRham2D, u: FieldCoeffs, samples_per_cell: int = 4) -> float:
    xs, ys = cx.sample_grid(samples_per_cell)
    dux_dy = cx.eval_tensor(u, xs, ys, (0, 1))[0]
    duy_dx = cx.eval_tensor(u, xs, ys, (1, 0))[1]
    return float(np.max(np.abs(duy_dx - dux_dy)))


def rows_to_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=INVARIANT_COLUMNS)


def write_csv(rows, path) -> Path:
    """
    Writes invariants rows with the fixed column order.

    Raises:
        OutputError: the file could not be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        rows_to_frame(rows).to_csv(path, index=False)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("Wrote %d invariants rows to %s", len(rows), path)
    return path


def sample_fields(cx: DeRham2D, eos: EquationOfState, state: MHDState, xs, ys) -> dict:
    """Point samples on the tensor grid xs x ys, arrays indexed [ix, iy]."""
    rho = cx.eval_tensor(state.rho, xs, ys)[0]
    s = cx.eval_tensor(state.s, xs, ys)[0]
    ux, uy = cx.eval_tensor(state.u, xs, ys)
    bx, by = cx.eval_tensor(state.B, xs, ys)
    dux_dy = cx.eval_tensor(state.u, xs, ys, (0, 1))[0]
    duy_dx = cx.eval_tensor(state.u, xs, ys, (1, 0))[1]
    return {
        "rho": rho,
        "s": s,
        "p": pressure(eos, rho, s) if rho.min() > 0 else np.full_like(rho, np.nan),
        "vorticity": duy_dx - dux_dy,
        "u": np.stack([ux, uy, np.zeros_like(ux)], axis=-1),
        "B": np.stack([bx, by, np.zeros_like(bx)], axis=-1),
    }


def _fmt(values) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in values)


def write_vtk(cx: DeRham2D, eos: EquationOfState, state: MHDState, path, samples_per_cell: int = 4) -> Path:
    """
    Legacy ASCII STRUCTURED_POINTS file with rho, s, p, vorticity, u and B
    sampled on a uniform grid (x index fastest).
    """
    path = Path(path)
    xs, ys = cx.sample_grid(samples_per_cell)
    data = sample_fields(cx, eos, state, xs, ys)
    nx, ny = xs.shape[0], ys.shape[0]
    lines = [
        "# vtk DataFile Version 3.0",
        f"feec-mhd t={float(state.time)!r}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        "ORIGIN 0 0 0",
        f"SPACING {float(xs[1] - xs[0])!r} {float(ys[1] - ys[0])!r} 1",
        f"POINT_DATA {nx * ny}",
    ]
    for name in ("rho", "s", "p", "vorticity"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines.append(_fmt(data[name].T.reshape(-1, 1)))
    for name in ("u", "B"):
        lines.append(f"VECTORS {name} double")
        lines.append(_fmt(data[name].transpose(1, 0, 2).reshape(-1, 3)))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.debug("Wrote snapshot %s (%dx%d points)", path, nx, ny)
    return path


def read_vtk(path) -> dict:
    """
    Reads a file written by ``write_vtk``.

    Returns:
        dict with 'dimensions', 'spacing' and 'fields' (arrays indexed [ix, iy] or [ix, iy, 3])
    """
    path = Path(path)
    try:
        text_lines = path.read_text().split("\n")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    header = {}
    fields_out = {}
    i = 0
    while i < len(text_lines):
        line = text_lines[i].strip()
        parts = line.split()
        if not parts:
            i += 1
            continue
        if parts[0] == "DIMENSIONS":
            header["dimensions"] = tuple(int(v) for v in parts[1:4])
        elif parts[0] == "SPACING":
            header["spacing"] = tuple(float(v) for v in parts[1:4])
        elif parts[0] == "POINT_DATA":
            header["n_points"] = int(parts[1])
        elif parts[0] in ("SCALARS", "VECTORS"):
            nx, ny, _ = header["dimensions"]
            n = header["n_points"]
            ncomp = 1 if parts[0] == "SCALARS" else 3
            start = i + (2 if parts[0] == "SCALARS" else 1)
            block = np.array([[float(v) for v in text_lines[j].split()] for j in range(start, start + n)])
            if ncomp == 1:
                fields_out[parts[1]] = block[:, 0].reshape(ny, nx).T
            else:
                fields_out[parts[1]] = block.reshape(ny, nx, 3).transpose(1, 0, 2)
            i = start + n
            continue
        i += 1
    if "dimensions" not in header:
        raise OutputError(path, "not a STRUCTURED_POINTS file")
    return {"dimensions": header["dimensions"], "spacing": header.get("spacing"), "fields": fields_out}


def write_state(state: MHDState, path) -> Path:
    """Final-state dump: time and the four coefficient vectors."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, time=state.time, u=state.u.coeffs, rho=state.rho.coeffs, s=state.s.coeffs, B=state.B.coeffs)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return path


def read_state(path) -> MHDState:
    try:
        with np.load(Path(path)) as data:
            return MHDState(
                float(data["time"]),
                FieldCoeffs(SpaceTag.VELOCITY, data["u"]),
                FieldCoeffs(SpaceTag.DENS2, data["rho"]),
                FieldCoeffs(SpaceTag.DENS2, data["s"]),
                FieldCoeffs(SpaceTag.FLUX1, data["B"]),
            )
    except (OSError, KeyError) as exc:
        raise OutputError(path, str(exc)) from exc


@dataclass
class PhaseMeasurement:
    speed: float
    shift: float
    amplitude_ratio: float


def _cut(cx: DeRham2D, b: FieldCoeffs, y: float, n_samples: int):
    xs = np.arange(n_samples) * cx.lengths[0] / n_samples
    return xs, cx.eval_field(b, xs, np.full(n_samples, y))[:, 1]


def measure_phase_speed(
    cx: DeRham2D,
    state_a: MHDState,
    state_b: MHDState,
    elapsed: float,
    y: float = 0.0,
    n_samples: int = 512,
) -> PhaseMeasurement:
    """
    Shift of the B_y profile along x between two states, from the peak of the
    periodic cross-correlation refined by a parabola through its neighbours.

    The shift is taken in (-L/2, L/2], so ``elapsed`` must keep the wave
    displacement below half a period.
    """
    _, a = _cut(cx, state_a.B, y, n_samples)
    _, b = _cut(cx, state_b.B, y, n_samples)
    a0, b0 = a - a.mean(), b - b.mean()
    corr = correlate(np.concatenate([a0, a0]), b0, mode="valid")[:n_samples]
    k = int(np.argmax(corr))
    left, mid, right = corr[(k - 1) % n_samples], corr[k], corr[(k + 1) % n_samples]
    denom = left - 2.0 * mid + right
    offset = 0.5 * (left - right) / denom if denom != 0 else 0.0
    lag = -(k + offset)
    lag = (lag + n_samples / 2.0) % n_samples - n_samples / 2.0
    if lag <= -n_samples / 2.0:
        lag += n_samples
    shift = lag * cx.lengths[0] / n_samples
    ratio = float(np.sqrt(np.mean(b0**2) / np.mean(a0**2))) if np.any(a0) else float("nan")
    return PhaseMeasurement(shift / elapsed if elapsed else float("nan"), shift, ratio)


@dataclass
class PropertyCheck:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def property_suite(cx: Optional[DeRham2D] = None, seed: int = 0) -> list[PropertyCheck]:
    """Structural checks of a complex: exact sequence, hat map, commuting diagram, masses, energies."""
    cx = cx or build_complex(8, 8, 2)
    rng = np.random.default_rng(seed)
    lx, ly = cx.lengths
    checks = []

    checks.append(PropertyCheck("d1_d0_zero", float(abs(cx.D1 @ cx.D0).max()), 1e-14))

    worst = 0.0
    for _ in range(5):
        u = FieldCoeffs(SpaceTag.VELOCITY, rng.standard_normal(cx.dim(SpaceTag.VELOCITY)))
        worst = max(worst, float(np.max(np.abs(hat_of_advection(cx, u).coeffs - u.coeffs))))
    checks.append(PropertyCheck("hat_left_inverse", worst, 1e-13))

    kx, ky = 2 * np.pi / lx, 2 * np.pi / ly
    flux = cx.project1(
        lambda x, y: np.sin(kx * x) * np.cos(ky * y),
        lambda x, y: np.cos(kx * x) * np.sin(ky * y),
    )
    div = cx.project2(lambda x, y: (kx + ky) * np.cos(kx * x) * np.cos(ky * y))
    gap = float(np.max(np.abs(cx.apply_d1(flux).coeffs - div.coeffs)))
    checks.append(PropertyCheck("commuting_diagram", gap, 1e-10))

    smallest = min(
        float(np.linalg.eigvalsh(cx.mass_matrix(tag).toarray()).min())
        for tag in (SpaceTag.FORM0, SpaceTag.FLUX1, SpaceTag.DENS2)
    )
    # passes when the smallest eigenvalue is at least 1e-14
    checks.append(PropertyCheck("mass_positive_definite", -smallest, -1e-14))

    u = FieldCoeffs(SpaceTag.VELOCITY, rng.standard_normal(cx.dim(SpaceTag.VELOCITY)))
    potential = FieldCoeffs(SpaceTag.FORM0, rng.standard_normal(cx.dim(SpaceTag.FORM0)))
    b = cx.apply_d0(potential)
    moved = lie_flux(cx, u, b)
    scale = float(np.max(np.abs(moved.coeffs))) * max(n / length for n, length in zip(cx.n_cells, cx.lengths))
    checks.append(PropertyCheck("advected_flux_divergence_free", float(np.max(np.abs(cx.D1 @ moved.coeffs))) / scale, 1e-13))

    worst = 0.0
    for eos in (barotropic(), ideal_gas(1.4)):
        rho0, rho1 = rng.uniform(0.5, 2.0, 1000), rng.uniform(0.5, 2.0, 1000)
        s0, s1 = rng.uniform(-1.0, 1.0, 1000), rng.uniform(-1.0, 1.0, 1000)
        c_rho, c_s = discrete_gradient_coeffs(eos, rho0, rho1, s0, s1)
        exact = energy_density(eos, rho1, s1) - energy_density(eos, rho0, s0)
        scale = np.maximum(np.abs(energy_density(eos, rho1, s1)), 1.0)
        worst = max(worst, float(np.max(np.abs(c_rho * (rho1 - rho0) + c_s * (s1 - s0) - exact) / scale)))
    checks.append(PropertyCheck("discrete_gradient_identity", worst, 1e-12))

    logger.debug("property suite: %d of %d checks passed", sum(c.passed for c in checks), len(checks))
    return checks
