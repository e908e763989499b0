"""
Tensor-product spline de Rham complex on a 2D rectangle.

    V0 = S(p+1) x S(p+1)                  scalars (and velocity components)
    V1 = S(p+1) x S(p)  ,  S(p) x S(p+1)  fluxes (magnetic field)
    V2 = S(p) x S(p)                      densities

D0 is the 2D curl (f -> (dy f, -dx f)), D1 the divergence; D1 D0 = 0 holds
exactly at the matrix level. Commuting projections P0/P1/P2 use interpolation
at Greville points along "high" directions and histopolation along "low"
ones. Coefficient vectors are row-major flattenings of (dim_x, dim_y) arrays;
flux and velocity vectors concatenate their x and y blocks.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .exceptions import PositivityError, SpaceError
from .spline_core import (
    Boundary,
    build_space,
    cell_quadrature,
    collocation_matrix,
    derivative_map,
    histopolation_operator,
    interpolation_operator,
    mass_matrix_1d,
)

logger = logging.getLogger(__name__)


class SpaceTag(str, Enum):
    FORM0 = "form0"
    FLUX1 = "flux1"
    DENS2 = "dens2"
    VELOCITY = "velocity"


@dataclass(frozen=True, eq=False)
class FieldCoeffs:
    """Coefficient vector tagged with the space it lives in."""

    space_tag: SpaceTag
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "space_tag", SpaceTag(self.space_tag))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def _check(self, other: "FieldCoeffs"):
        if other.space_tag is not self.space_tag:
            raise SpaceError(f"cannot combine {self.space_tag.value} with {other.space_tag.value}")

    def __add__(self, other):
        self._check(other)
        return FieldCoeffs(self.space_tag, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return FieldCoeffs(self.space_tag, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float):
        return FieldCoeffs(self.space_tag, scalar * self.coeffs)

    __rmul__ = __mul__

    def midpoint(self, other: "FieldCoeffs") -> "FieldCoeffs":
        self._check(other)
        return FieldCoeffs(self.space_tag, 0.5 * (self.coeffs + other.coeffs))

    def copy(self) -> "FieldCoeffs":
        return FieldCoeffs(self.space_tag, self.coeffs.copy())


# 1D point sets, per axis: Greville points of the high space, histopolation
# quadrature points of the low space, Gauss points of every cell
POINT_SETS = ("greville", "histo", "quad")

# 2D sample grids used by the projections and the quadrature
GRIDS = {
    "p0": ("greville", "greville"),
    "p1x": ("greville", "histo"),
    "p1y": ("histo", "greville"),
    "p2": ("histo", "histo"),
    "quad": ("quad", "quad"),
}

# (x kind, y kind) of every scalar component, 'hi' = degree p+1, 'lo' = degree p
COMPONENT_KINDS = {
    SpaceTag.FORM0: [("hi", "hi")],
    SpaceTag.VELOCITY: [("hi", "hi"), ("hi", "hi")],
    SpaceTag.FLUX1: [("hi", "lo"), ("lo", "hi")],
    SpaceTag.DENS2: [("lo", "lo")],
}


class DeRham2D:
    """
    The discrete complex and everything built on it: derivatives, projections,
    adjoint projections, mass matrices and field evaluation.

    Collocation matrices on the fixed sample sets are cached per instance; the
    instance is otherwise immutable after construction.
    """

    def __init__(
        self,
        nx: int,
        ny: int,
        degree: int,
        lengths=(1.0, 1.0),
        boundaries=("periodic", "periodic"),
    ):
        if degree < 1:
            raise SpaceError(f"complex degree must be >= 1, got {degree}")
        self.degree = int(degree)
        self.n_cells = (int(nx), int(ny))
        self.lengths = (float(lengths[0]), float(lengths[1]))
        self.boundaries = (Boundary(boundaries[0]), Boundary(boundaries[1]))
        self.hi = tuple(
            build_space(n, degree + 1, b, length)
            for n, b, length in zip(self.n_cells, self.boundaries, self.lengths)
        )
        self.lo = tuple(space.lowered() for space in self.hi)
        self.interp = tuple(interpolation_operator(space) for space in self.hi)
        self.histo = tuple(histopolation_operator(lo, hi) for lo, hi in zip(self.lo, self.hi))
        self.deriv = tuple(derivative_map(space) for space in self.hi)
        self.n_quad = degree + 2
        self._quad = tuple(cell_quadrature(space, self.n_quad) for space in self.hi)
        self._basis_cache: dict = {}
        self._mass_cache: dict = {}

        (hx, hy), (lx, ly) = (s.dim for s in self.hi), (s.dim for s in self.lo)
        self.shapes = {
            SpaceTag.FORM0: [(hx, hy)],
            SpaceTag.VELOCITY: [(hx, hy), (hx, hy)],
            SpaceTag.FLUX1: [(hx, ly), (lx, hy)],
            SpaceTag.DENS2: [(lx, ly)],
        }
        dx, dy = self.deriv
        ihx, ihy = sp.identity(hx, format="csr"), sp.identity(hy, format="csr")
        ilx, ily = sp.identity(lx, format="csr"), sp.identity(ly, format="csr")
        self.D0 = sp.vstack([sp.kron(ihx, dy), -sp.kron(dx, ihy)]).tocsr()
        self.D1 = sp.hstack([sp.kron(dx, ily), sp.kron(ilx, dy)]).tocsr()
        logger.debug(
            "Built complex %dx%d degree %d %s: dims V0=%d V1=%d V2=%d",
            nx, ny, degree, [b.value for b in self.boundaries],
            self.dim(SpaceTag.FORM0), self.dim(SpaceTag.FLUX1), self.dim(SpaceTag.DENS2),
        )

    # ------------------------------------------------------------------ shapes

    def dim(self, tag: SpaceTag) -> int:
        return sum(a * b for a, b in self.shapes[SpaceTag(tag)])

    def split(self, tag: SpaceTag, coeffs: np.ndarray) -> list[np.ndarray]:
        """Views of a flat coefficient vector as 2D component arrays."""
        tag = SpaceTag(tag)
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.dim(tag):
            raise SpaceError(f"{tag.value} vector has length {coeffs.shape[0]}, expected {self.dim(tag)}")
        blocks, start = [], 0
        for shape in self.shapes[tag]:
            size = shape[0] * shape[1]
            blocks.append(coeffs[start : start + size].reshape(shape))
            start += size
        return blocks

    @staticmethod
    def join(blocks) -> np.ndarray:
        return np.concatenate([np.asarray(b).ravel() for b in blocks])

    def zeros(self, tag: SpaceTag) -> FieldCoeffs:
        return FieldCoeffs(tag, np.zeros(self.dim(tag)))

    # ----------------------------------------------------- sample points / basis

    def points(self, axis: int, point_set: str) -> np.ndarray:
        if point_set == "greville":
            return self.interp[axis].points
        if point_set == "histo":
            return self.histo[axis].points
        if point_set == "quad":
            return self._quad[axis][0]
        raise ValueError(f"unknown point set {point_set!r}")

    def grid(self, name: str):
        """1D x and y point arrays of a named tensor grid."""
        px, py = GRIDS[name]
        return self.points(0, px), self.points(1, py)

    def mesh(self, name: str):
        xs, ys = self.grid(name)
        return np.meshgrid(xs, ys, indexing="ij")

    @cached_property
    def quad_weights(self) -> np.ndarray:
        return np.outer(self._quad[0][1], self._quad[1][1])

    def basis(self, axis: int, kind: str, point_set: str, deriv: int = 0) -> sp.csr_matrix:
        """Cached collocation matrix of the 'hi'/'lo' space of an axis on a point set."""
        key = (axis, kind, point_set, deriv)
        if key not in self._basis_cache:
            space = self.hi[axis] if kind == "hi" else self.lo[axis]
            self._basis_cache[key] = collocation_matrix(space, self.points(axis, point_set), deriv)
        return self._basis_cache[key]

    def component_on_grid(self, block, kinds, grid: str, deriv=(0, 0)) -> np.ndarray:
        """Values (or partial derivatives) of one tensor-product component on a grid."""
        px, py = GRIDS[grid]
        ex = self.basis(0, kinds[0], px, deriv[0])
        ey = self.basis(1, kinds[1], py, deriv[1])
        return (ey @ (ex @ block).T).T

    def pull_back(self, values, kinds, grid: str, deriv=(0, 0)) -> np.ndarray:
        """Transpose of ``component_on_grid``: sample weights to coefficient functionals."""
        px, py = GRIDS[grid]
        ex = self.basis(0, kinds[0], px, deriv[0])
        ey = self.basis(1, kinds[1], py, deriv[1])
        return (ey.T @ (ex.T @ values).T).T

    def values_on_grid(self, field: FieldCoeffs, grid: str, deriv=(0, 0)) -> list[np.ndarray]:
        """Component-wise grid values of a field, one 2D array per component."""
        kinds = COMPONENT_KINDS[field.space_tag]
        blocks = self.split(field.space_tag, field.coeffs)
        return [self.component_on_grid(b, k, grid, deriv) for b, k in zip(blocks, kinds)]

    # ------------------------------------------------------------- derivatives

    def apply_d0(self, field: FieldCoeffs) -> FieldCoeffs:
        if field.space_tag is not SpaceTag.FORM0:
            raise SpaceError(f"D0 acts on form0 fields, got {field.space_tag.value}")
        return FieldCoeffs(SpaceTag.FLUX1, self.D0 @ field.coeffs)

    def apply_d1(self, field: FieldCoeffs) -> FieldCoeffs:
        if field.space_tag is not SpaceTag.FLUX1:
            raise SpaceError(f"D1 acts on flux1 fields, got {field.space_tag.value}")
        return FieldCoeffs(SpaceTag.DENS2, self.D1 @ field.coeffs)

    # ------------------------------------------------------------- projections

    @staticmethod
    def _tensor_solve(dofs, op_x, op_y):
        # C = Ax^-1 dofs Ay^-T
        return op_y.solve(op_x.solve(dofs).T).T

    @staticmethod
    def _tensor_solve_transpose(rhs, op_x, op_y):
        # G = Ax^-T rhs Ay^-1
        return op_y.solve_transpose(op_x.solve_transpose(rhs).T).T

    def project0_values(self, values: np.ndarray) -> np.ndarray:
        """P0 coefficients from samples on the 'p0' grid."""
        return self._tensor_solve(values, self.interp[0], self.interp[1]).ravel()

    def project1_values(self, values_x: np.ndarray, values_y: np.ndarray) -> np.ndarray:
        """P1 coefficients from x samples on 'p1x' and y samples on 'p1y'."""
        dofs_x = (self.histo[1].readings @ values_x.T).T
        dofs_y = self.histo[0].readings @ values_y
        cx = self._tensor_solve(dofs_x, self.interp[0], self.histo[1])
        cy = self._tensor_solve(dofs_y, self.histo[0], self.interp[1])
        return self.join([cx, cy])

    def project2_values(self, values: np.ndarray) -> np.ndarray:
        """P2 coefficients from samples on the 'p2' grid."""
        dofs = (self.histo[1].readings @ (self.histo[0].readings @ values).T).T
        return self._tensor_solve(dofs, self.histo[0], self.histo[1]).ravel()

    def project0(self, func: Callable) -> FieldCoeffs:
        return FieldCoeffs(SpaceTag.FORM0, self.project0_values(func(*self.mesh("p0"))))

    def project1(self, func_x: Callable, func_y: Callable) -> FieldCoeffs:
        vx = func_x(*self.mesh("p1x"))
        vy = func_y(*self.mesh("p1y"))
        return FieldCoeffs(SpaceTag.FLUX1, self.project1_values(vx, vy))

    def project2(self, func: Callable) -> FieldCoeffs:
        return FieldCoeffs(SpaceTag.DENS2, self.project2_values(func(*self.mesh("p2"))))

    def project_velocity(self, func_x: Callable, func_y: Callable) -> FieldCoeffs:
        """Componentwise P0 of a vector field; tangency DOFs on walls are set to zero."""
        grid = self.mesh("p0")
        coeffs = self.join([self.project0_values(func_x(*grid)), self.project0_values(func_y(*grid))])
        coeffs[self.constrained_velocity_dofs()] = 0.0
        return FieldCoeffs(SpaceTag.VELOCITY, coeffs)

    def projection_adjoint(self, tag: SpaceTag, functional: np.ndarray) -> list[np.ndarray]:
        """
        Transpose of the DOF-to-coefficient solve of a projection.

        Args:
            tag: form0, flux1 or dens2
            functional: flat vector f acting on coefficients

        Returns:
            Per-component 2D arrays g with <f, P w> = <g, DOFs(w)>
        """
        tag = SpaceTag(tag)
        blocks = self.split(tag, functional)
        if tag is SpaceTag.FORM0:
            return [self._tensor_solve_transpose(blocks[0], self.interp[0], self.interp[1])]
        if tag is SpaceTag.FLUX1:
            return [
                self._tensor_solve_transpose(blocks[0], self.interp[0], self.histo[1]),
                self._tensor_solve_transpose(blocks[1], self.histo[0], self.interp[1]),
            ]
        if tag is SpaceTag.DENS2:
            return [self._tensor_solve_transpose(blocks[0], self.histo[0], self.histo[1])]
        raise SpaceError(f"no projection for {tag.value}")

    def projection_sample_weights(self, tag: SpaceTag, functional: np.ndarray) -> list[np.ndarray]:
        """
        Weights w on the projection's sample grids with <f, P w_samples> = sum(w * samples).

        Grids are 'p0' for form0, ('p1x', 'p1y') for flux1 and 'p2' for dens2.
        """
        tag = SpaceTag(tag)
        adj = self.projection_adjoint(tag, functional)
        if tag is SpaceTag.FORM0:
            return adj
        rx, ry = self.histo[0].readings, self.histo[1].readings
        if tag is SpaceTag.FLUX1:
            return [(ry.T @ adj[0].T).T, rx.T @ adj[1]]
        return [(ry.T @ (rx.T @ adj[0]).T).T]

    # ------------------------------------------------------------- boundaries

    @cached_property
    def _constrained(self) -> np.ndarray:
        hx, hy = self.hi[0].dim, self.hi[1].dim
        index = np.arange(hx * hy).reshape(hx, hy)
        fixed = []
        if self.boundaries[0] is Boundary.CLAMPED:
            fixed += [index[0, :], index[-1, :]]
        if self.boundaries[1] is Boundary.CLAMPED:
            offset = hx * hy
            fixed += [offset + index[:, 0], offset + index[:, -1]]
        if not fixed:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate(fixed))

    def constrained_velocity_dofs(self) -> np.ndarray:
        """Velocity DOFs pinned to zero: normal components on clamped sides."""
        return self._constrained

    def free_velocity_dofs(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.dim(SpaceTag.VELOCITY)), self._constrained)

    # ------------------------------------------------------------------ masses

    def _mass_1d(self, axis: int, kind: str) -> sp.csr_matrix:
        key = ("1d", axis, kind)
        if key not in self._mass_cache:
            space = self.hi[axis] if kind == "hi" else self.lo[axis]
            self._mass_cache[key] = mass_matrix_1d(space)
        return self._mass_cache[key]

    def mass_matrix(self, tag: SpaceTag) -> sp.csr_matrix:
        """L2 Gram matrix of a space (block diagonal for vector spaces)."""
        tag = SpaceTag(tag)
        if tag not in self._mass_cache:
            blocks = [
                sp.kron(self._mass_1d(0, kx), self._mass_1d(1, ky))
                for kx, ky in COMPONENT_KINDS[tag]
            ]
            self._mass_cache[tag] = sp.block_diag(blocks, format="csr")
        return self._mass_cache[tag]

    @cached_property
    def _form0_on_quad(self) -> sp.csr_matrix:
        return sp.kron(self.basis(0, "hi", "quad"), self.basis(1, "hi", "quad")).tocsr()

    def weighted_velocity_mass(self, rho: FieldCoeffs) -> sp.csr_matrix:
        """
        Gram matrix of the velocity space weighted by a density field.

        Raises:
            PositivityError: if rho is not positive at some quadrature point
        """
        if rho.space_tag is not SpaceTag.DENS2:
            raise SpaceError(f"density weight must be dens2, got {rho.space_tag.value}")
        rho_q = self.values_on_grid(rho, "quad")[0]
        if rho_q.min() <= 0.0:
            raise PositivityError("density weight of the velocity mass", rho_q.min())
        colloc = self._form0_on_quad
        weighted = colloc.T @ sp.diags((self.quad_weights * rho_q).ravel()) @ colloc
        return sp.block_diag([weighted, weighted], format="csr")

    # ------------------------------------------------------------ evaluation

    def integrate(self, values_on_quad: np.ndarray) -> float:
        return float(np.sum(self.quad_weights * values_on_quad))

    def integral(self, field: FieldCoeffs) -> float:
        """Integral over the domain of a scalar field."""
        return self.integrate(self.values_on_grid(field, "quad")[0])

    def eval_field(self, field: FieldCoeffs, x, y, deriv: str = "value") -> np.ndarray:
        """
        Evaluates a field at scattered points.

        Returns:
            (n,) for scalar values, (n, 2) for vector values or scalar gradients,
            (n, 2, 2) for velocity gradients indexed [component, direction].

        Raises:
            SpaceError: for gradients of dens2 or flux1 fields, or an unknown mode
        """
        if deriv not in ("value", "grad"):
            raise SpaceError(f"unknown evaluation mode {deriv!r}")
        if deriv == "grad" and field.space_tag in (SpaceTag.DENS2, SpaceTag.FLUX1):
            raise SpaceError(f"gradients are not available for {field.space_tag.value} fields")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        kinds = COMPONENT_KINDS[field.space_tag]
        blocks = self.split(field.space_tag, field.coeffs)
        orders = [(0, 0)] if deriv == "value" else [(1, 0), (0, 1)]
        out = []
        for block, (kx, ky) in zip(blocks, kinds):
            per_order = []
            for ox, oy in orders:
                sx = self.hi[0] if kx == "hi" else self.lo[0]
                sy = self.hi[1] if ky == "hi" else self.lo[1]
                ex = collocation_matrix(sx, x, ox)
                ey = collocation_matrix(sy, y, oy)
                per_order.append(np.asarray(ey.multiply(ex @ block).sum(axis=1)).ravel())
            out.append(per_order[0] if deriv == "value" else np.stack(per_order, axis=-1))
        if len(out) == 1:
            return out[0]
        return np.stack(out, axis=1)

    def eval_tensor(self, field: FieldCoeffs, xs, ys, deriv=(0, 0)) -> list[np.ndarray]:
        """Component values on the tensor grid xs x ys (each array shaped (len(xs), len(ys)))."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = []
        blocks = self.split(field.space_tag, field.coeffs)
        for block, (kx, ky) in zip(blocks, COMPONENT_KINDS[field.space_tag]):
            sx = self.hi[0] if kx == "hi" else self.lo[0]
            sy = self.hi[1] if ky == "hi" else self.lo[1]
            ex = collocation_matrix(sx, xs, deriv[0])
            ey = collocation_matrix(sy, ys, deriv[1])
            out.append((ey @ (ex @ block).T).T)
        return out

    def l2_error(self, field: FieldCoeffs, reference: Callable) -> float:
        """
        L2 distance to a reference on Gauss points.

        ``reference(X, Y)`` returns an array for scalar fields and a pair of
        arrays for flux1/velocity fields.
        """
        values = self.values_on_grid(field, "quad")
        ref = reference(*self.mesh("quad"))
        if len(values) == 1:
            ref = [ref]
        total = sum(self.integrate((v - np.asarray(r)) ** 2) for v, r in zip(values, ref))
        return float(np.sqrt(total))

    def l2_norm(self, field: FieldCoeffs) -> float:
        mass = self.mass_matrix(field.space_tag)
        return float(np.sqrt(max(field.coeffs @ (mass @ field.coeffs), 0.0)))

    def sample_grid(self, samples_per_cell: int = 4):
        """Uniform visualisation grid including both ends of each axis."""
        return tuple(
            np.linspace(0.0, length, n * samples_per_cell + 1)
            for n, length in zip(self.n_cells, self.lengths)
        )


def build_complex(nx: int, ny: int, degree: int, lengths=(1.0, 1.0), boundaries=("periodic", "periodic")) -> DeRham2D:
    """Creates the 2D complex; ``degree`` is p in the V0 = S(p+1) x S(p+1) sequence."""
    return DeRham2D(nx, ny, degree, lengths, boundaries)
