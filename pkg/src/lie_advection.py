"""
Discrete Lie derivatives built with Cartan's formula.

    densities : A_u rho = D1 P1(rho u)
    fluxes    : A_u B   = D0 P0(i_u B) + P1((D1 B) u),   i_u B = B_x u_y - B_y u_x

plus the hat-map bracket used by the momentum equation and the
adjoint-projection helpers used to assemble it in one pass.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .derham_complex import DeRham2D, FieldCoeffs, SpaceTag
from .exceptions import AssemblyBudgetExceeded, SpaceError

logger = logging.getLogger(__name__)

DEFAULT_BUDGET_BYTES = 256 * 2**20


def _check_velocity(u: FieldCoeffs):
    if u.space_tag is not SpaceTag.VELOCITY:
        raise SpaceError(f"advecting field must be a velocity, got {u.space_tag.value}")


def lie_density(cx: DeRham2D, u: FieldCoeffs, c: FieldCoeffs) -> FieldCoeffs:
    """A_u c for a density (dens2) c."""
    _check_velocity(u)
    if c.space_tag is not SpaceTag.DENS2:
        raise SpaceError(f"lie_density acts on dens2, got {c.space_tag.value}")
    ux = cx.values_on_grid(u, "p1x")[0]
    uy = cx.values_on_grid(u, "p1y")[1]
    rho_x = cx.values_on_grid(c, "p1x")[0]
    rho_y = cx.values_on_grid(c, "p1y")[0]
    flux = cx.project1_values(rho_x * ux, rho_y * uy)
    return FieldCoeffs(SpaceTag.DENS2, cx.D1 @ flux)


def lie_flux(cx: DeRham2D, u: FieldCoeffs, b: FieldCoeffs) -> FieldCoeffs:
    """A_u B for a flux (flux1) B; both Cartan terms are always included."""
    _check_velocity(u)
    if b.space_tag is not SpaceTag.FLUX1:
        raise SpaceError(f"lie_flux acts on flux1, got {b.space_tag.value}")
    ux, uy = cx.values_on_grid(u, "p0")
    bx, by = cx.values_on_grid(b, "p0")
    out = cx.D0 @ cx.project0_values(bx * uy - by * ux)
    div_b = FieldCoeffs(SpaceTag.DENS2, cx.D1 @ b.coeffs)
    if np.any(div_b.coeffs):
        w_x = cx.values_on_grid(div_b, "p1x")[0]
        w_y = cx.values_on_grid(div_b, "p1y")[0]
        ux1 = cx.values_on_grid(u, "p1x")[0]
        uy1 = cx.values_on_grid(u, "p1y")[1]
        out = out + cx.project1_values(w_x * ux1, w_y * uy1)
    return FieldCoeffs(SpaceTag.FLUX1, out)


def hat_bracket(cx: DeRham2D, u: FieldCoeffs, v: FieldCoeffs) -> FieldCoeffs:
    """Component i is P0(v . grad u_i - u . grad v_i), with exact spline gradients."""
    _check_velocity(u)
    _check_velocity(v)
    u_val = cx.values_on_grid(u, "p0")
    v_val = cx.values_on_grid(v, "p0")
    u_dx = cx.values_on_grid(u, "p0", (1, 0))
    u_dy = cx.values_on_grid(u, "p0", (0, 1))
    v_dx = cx.values_on_grid(v, "p0", (1, 0))
    v_dy = cx.values_on_grid(v, "p0", (0, 1))
    comps = []
    for i in range(2):
        combo = (v_val[0] * u_dx[i] + v_val[1] * u_dy[i]) - (u_val[0] * v_dx[i] + u_val[1] * v_dy[i])
        comps.append(cx.project0_values(combo))
    return FieldCoeffs(SpaceTag.VELOCITY, np.concatenate(comps))


def hat_of_advection(cx: DeRham2D, u: FieldCoeffs) -> FieldCoeffs:
    """Left inverse of u -> A_u: component i is A_u applied to the coordinate x_i."""
    _check_velocity(u)
    comps = [cx.project0_values(values) for values in cx.values_on_grid(u, "p0")]
    return FieldCoeffs(SpaceTag.VELOCITY, np.concatenate(comps))


def projection_adjoint_apply(cx: DeRham2D, tag: SpaceTag, functional: np.ndarray) -> np.ndarray:
    """
    Transpose of the projection onto ``tag``: returns g with
    <functional, P w> = <g, DOFs(w)> for every w.
    """
    return cx.join(cx.projection_adjoint(tag, functional))


_APPLY = {
    SpaceTag.DENS2: lie_density,
    SpaceTag.FLUX1: lie_flux,
}


@dataclass
class AdvectionOperator:
    """
    A_u on one kind of form for a frozen velocity snapshot.

    ``mode`` is 'matrix_free' unless the operator has been assembled, in
    which case ``matrix`` holds the sparse representation.
    """

    cx: DeRham2D
    form_kind: SpaceTag
    velocity: FieldCoeffs
    mode: str = "matrix_free"
    matrix: Optional[sp.csr_matrix] = field(default=None, repr=False)

    def __post_init__(self):
        self.form_kind = SpaceTag(self.form_kind)
        if self.form_kind not in _APPLY:
            raise SpaceError(f"no advection operator for {self.form_kind.value}")
        _check_velocity(self.velocity)
        self.velocity = FieldCoeffs(SpaceTag.VELOCITY, self.velocity.coeffs.copy())

    @property
    def n_dofs(self) -> int:
        return self.cx.dim(self.form_kind)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ coeffs
        return self.apply_matrix_free(coeffs)

    def apply_matrix_free(self, coeffs: np.ndarray) -> np.ndarray:
        func = _APPLY[self.form_kind]
        return func(self.cx, self.velocity, FieldCoeffs(self.form_kind, coeffs)).coeffs

    def as_linear_operator(self, shift: float = 0.0, scale: float = 1.0) -> LinearOperator:
        """LinearOperator for ``shift * I + scale * A``."""
        n = self.n_dofs

        def matvec(x):
            x = np.asarray(x).ravel()
            return shift * x + scale * self.apply(x)

        return LinearOperator((n, n), matvec=matvec, dtype=float)


def assemble_advection_matrix(
    cx: DeRham2D,
    u: FieldCoeffs,
    form_kind: SpaceTag,
    budget_bytes: int = DEFAULT_BUDGET_BYTES,
) -> AdvectionOperator:
    """
    Column-by-column assembly of A_u.

    Raises:
        AssemblyBudgetExceeded: when a dense N x N work array would not fit
            in ``budget_bytes``; callers fall back to the matrix-free operator
    """
    op = AdvectionOperator(cx, form_kind, u)
    n = op.n_dofs
    if 8 * n * n > budget_bytes:
        raise AssemblyBudgetExceeded(n, budget_bytes)
    dense = np.empty((n, n))
    unit = np.zeros(n)
    for j in range(n):
        unit[j] = 1.0
        dense[:, j] = op.apply_matrix_free(unit)
        unit[j] = 0.0
    op.matrix = sp.csr_matrix(dense)
    op.mode = "assembled"
    logger.debug("Assembled %s advection matrix (%d dofs, nnz=%d)", op.form_kind.value, n, op.matrix.nnz)
    return op
