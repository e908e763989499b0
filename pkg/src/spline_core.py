"""
Univariate B-spline spaces on uniform grids.

Basis evaluation (values and derivatives), Greville points, the two kinds of
degrees of freedom (point interpolation and interval histopolation) and the
coefficient-level derivative map between a degree-p space and its degree p-1
companion. All spaces use the partition-of-unity B-spline normalisation.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import SpaceError

logger = logging.getLogger(__name__)

# relative tolerance used when splitting histopolation intervals at breakpoints
BREAK_TOL = 1e-12


class Boundary(str, Enum):
    PERIODIC = "periodic"
    CLAMPED = "clamped"


class DofKind(str, Enum):
    INTERPOLATION = "interpolation"
    HISTOPOLATION = "histopolation"


@dataclass(frozen=True)
class Spline1DSpace:
    """
    Spline space of a given degree on ``n_cells`` uniform cells of [0, length].

    Periodic spaces have ``n_cells`` basis functions; function ``j`` is
    supported on ``[(j - shift) h, (j - shift + degree + 1) h]`` taken modulo
    the length. Clamped spaces use the open knot vector and have
    ``n_cells + degree`` basis functions.
    """

    n_cells: int
    degree: int
    boundary: Boundary
    length: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.n_cells < 1:
            raise SpaceError(f"n_cells must be >= 1, got {self.n_cells}")
        if self.degree < 0:
            raise SpaceError(f"degree must be >= 0, got {self.degree}")
        if not self.length > 0:
            raise SpaceError(f"length must be > 0, got {self.length}")
        if self.periodic and self.n_cells < self.degree + 1:
            raise SpaceError(
                f"periodic degree-{self.degree} space needs at least "
                f"{self.degree + 1} cells, got {self.n_cells}"
            )

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def dim(self) -> int:
        return self.n_cells if self.periodic else self.n_cells + self.degree

    @property
    def shift(self) -> int:
        return (self.degree + 1) // 2

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_cells + 1)

    @cached_property
    def knots(self) -> np.ndarray:
        """Open knot vector (clamped) or the local uniform knots around a cell (periodic)."""
        p = self.degree
        if self.periodic:
            return self.h * np.arange(-p, p + 2, dtype=float)
        return np.concatenate([np.zeros(p), self.breakpoints, np.full(p, self.length)])

    def lowered(self) -> "Spline1DSpace":
        """The degree-1-lower companion on the same grid."""
        if self.degree == 0:
            raise SpaceError("cannot lower a degree-0 space")
        return Spline1DSpace(self.n_cells, self.degree - 1, self.boundary, self.length)

    def raised(self) -> "Spline1DSpace":
        return Spline1DSpace(self.n_cells, self.degree + 1, self.boundary, self.length)


def build_space(n_cells: int, degree: int, boundary="periodic", length: float = 1.0) -> Spline1DSpace:
    """
    Creates a uniform spline space.

    Args:
        n_cells: number of uniform cells
        degree: polynomial degree (>= 0)
        boundary: 'periodic' or 'clamped'
        length: domain length

    Returns:
        Spline1DSpace

    Raises:
        SpaceError: degree < 0, n_cells < 1, or a periodic space with fewer
            than degree + 1 cells
    """
    try:
        boundary = Boundary(boundary)
    except ValueError as exc:
        raise SpaceError(f"unknown boundary {boundary!r}") from exc
    return Spline1DSpace(int(n_cells), int(degree), boundary, float(length))


def greville_points(space: Spline1DSpace) -> np.ndarray:
    """Knot averages; cell midpoints for degree 0. Periodic points lie in [0, L)."""
    p, h = space.degree, space.h
    if space.periodic:
        return h * (np.arange(space.n_cells) - space.shift + (p + 1) / 2.0)
    if p == 0:
        return 0.5 * (space.breakpoints[:-1] + space.breakpoints[1:])
    t = space.knots
    return np.array([t[i + 1 : i + p + 1].mean() for i in range(space.dim)])


def _cox_de_boor(knots: np.ndarray, degree: int, span: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Nonzero basis values N_{span-degree..span} at each point (columns in that order).
    npts = x.shape[0]
    values = np.zeros((npts, degree + 1))
    values[:, 0] = 1.0
    left = np.zeros((npts, degree + 1))
    right = np.zeros((npts, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            temp = values[:, r] / (right[:, r + 1] + left[:, j - r])
            values[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        values[:, j] = saved
    return values


def _lift_derivative(knots: np.ndarray, q: int, span: np.ndarray, lower: np.ndarray) -> np.ndarray:
    # d/dx of degree-q functions in terms of degree q-1 values (applied iteratively).
    out = np.zeros((lower.shape[0], q + 1))
    for r in range(q + 1):
        j = span - q + r
        if r >= 1:
            den = knots[j + q] - knots[j]
            safe = np.where(den > 0, den, 1.0)
            out[:, r] += np.where(den > 0, q * lower[:, r - 1] / safe, 0.0)
        if r <= q - 1:
            den = knots[j + q + 1] - knots[j + 1]
            safe = np.where(den > 0, den, 1.0)
            out[:, r] -= np.where(den > 0, q * lower[:, r] / safe, 0.0)
    return out


def basis_values(space: Spline1DSpace, x, deriv_order: int = 0):
    """
    Vectorised basis evaluation.

    Returns:
        (first, values): ``first[k]`` is the index of the first active basis
        function at ``x[k]`` and ``values[k, r]`` the ``deriv_order``-th
        derivative of function ``first[k] + r`` (modulo dim when periodic).
        Derivatives beyond the degree are identically zero.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = space.degree
    if deriv_order < 0:
        raise SpaceError("derivative order must be >= 0")
    if space.periodic:
        n, h = space.n_cells, space.h
        xw = np.mod(x, space.length)
        cell = np.clip(np.floor(xw / h).astype(int), 0, n - 1)
        local = xw - cell * h
        span = np.full(x.shape[0], p, dtype=int)
        first = np.mod(cell - p + space.shift, n)
    else:
        local = np.clip(x, 0.0, space.length)
        span = np.searchsorted(space.knots, local, side="right") - 1
        span = np.clip(span, p, space.dim - 1)
        first = span - p
    if deriv_order > p:
        return first, np.zeros((x.shape[0], p + 1))
    knots = space.knots
    values = _cox_de_boor(knots, p - deriv_order, span, local)
    for q in range(p - deriv_order + 1, p + 1):
        values = _lift_derivative(knots, q, span, values)
    return first, values


def eval_basis(space: Spline1DSpace, x: float, deriv_order: int = 0):
    """
    Active basis functions at a single point.

    Returns:
        (first_index, values) with ``degree + 1`` entries

    Raises:
        SpaceError: derivative order above the degree
    """
    if deriv_order > space.degree:
        raise SpaceError(f"derivative order {deriv_order} exceeds degree {space.degree}")
    first, values = basis_values(space, np.array([x], dtype=float), deriv_order)
    return int(first[0]), values[0]


def collocation_matrix(space: Spline1DSpace, x, deriv_order: int = 0) -> sp.csr_matrix:
    """Sparse matrix E with E[k, j] = (d^m B_j)(x[k])."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    first, values = basis_values(space, x, deriv_order)
    p = space.degree
    rows = np.repeat(np.arange(x.shape[0]), p + 1)
    cols = first[:, None] + np.arange(p + 1)[None, :]
    if space.periodic:
        cols = np.mod(cols, space.dim)
    mat = sp.coo_matrix((values.ravel(), (rows, cols.ravel())), shape=(x.shape[0], space.dim))
    return mat.tocsr()


def eval_spline(space: Spline1DSpace, coeffs, x, deriv_order: int = 0) -> np.ndarray:
    return collocation_matrix(space, x, deriv_order) @ np.asarray(coeffs, dtype=float)


def gauss_legendre(a: float, b: float, n_points: int):
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def cell_quadrature(space: Spline1DSpace, n_points: int):
    """Gauss-Legendre nodes and weights on every cell, concatenated cell by cell."""
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    left = space.breakpoints[:-1]
    half = 0.5 * space.h
    points = (left[:, None] + half * (nodes[None, :] + 1.0)).ravel()
    return points, np.tile(half * weights, space.n_cells)


def mass_matrix_1d(space: Spline1DSpace) -> sp.csr_matrix:
    points, weights = cell_quadrature(space, space.degree + 1)
    colloc = collocation_matrix(space, points)
    return (colloc.T @ sp.diags(weights) @ colloc).tocsr()


@dataclass(eq=False)
class DOFOperator:
    """
    Degrees of freedom of a 1D space together with the factorised collocation system.

    ``readings`` maps function samples at ``points`` to DOF values (identity
    for interpolation, quadrature weights for histopolation); ``matrix`` is
    the square DOF-of-basis matrix and ``lu`` its LU factorisation.
    """

    kind: DofKind
    space: Spline1DSpace
    points: np.ndarray
    readings: sp.csr_matrix
    matrix: np.ndarray
    lu: tuple

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def read(self, samples: np.ndarray) -> np.ndarray:
        """DOF values from samples of a function at ``points`` (first axis)."""
        return self.readings @ samples

    def solve(self, dofs: np.ndarray) -> np.ndarray:
        """Coefficients whose DOFs equal ``dofs`` (first axis)."""
        return sla.lu_solve(self.lu, dofs)

    def solve_transpose(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs, trans=1)

    def project(self, func) -> np.ndarray:
        """Coefficients of the projection of a vectorised callable."""
        return self.solve(self.read(np.asarray(func(self.points), dtype=float)))


def _factorize(kind, space, points, readings) -> DOFOperator:
    matrix = np.asarray((readings @ collocation_matrix(space, points)).todense())
    if matrix.shape[0] != matrix.shape[1]:
        raise SpaceError(f"{kind.value} DOFs do not match the space dimension: {matrix.shape}")
    lu = sla.lu_factor(matrix)
    return DOFOperator(kind, space, points, readings, matrix, lu)


def interpolation_operator(space: Spline1DSpace) -> DOFOperator:
    """Point evaluation at the Greville points (degree >= 1)."""
    if space.degree < 1:
        raise SpaceError("interpolation DOFs need degree >= 1")
    points = greville_points(space)
    readings = sp.identity(points.shape[0], format="csr")
    return _factorize(DofKind.INTERPOLATION, space, points, readings)


def histopolation_intervals(companion: Spline1DSpace):
    """Consecutive Greville intervals of the companion space (wrapped when periodic)."""
    g = greville_points(companion)
    if companion.periodic:
        right = np.append(g[1:], g[0] + companion.length)
        return g, right
    return g[:-1], g[1:]


def histopolation_operator(low_space: Spline1DSpace, companion: Spline1DSpace) -> DOFOperator:
    """
    Integrals over the companion's Greville intervals.

    Args:
        low_space: the space whose DOFs are built
        companion: degree ``low_space.degree + 1`` space on the same grid

    Raises:
        SpaceError: when the two spaces do not share grid, boundary and length
            or the degrees are not consecutive
    """
    if (
        low_space.n_cells != companion.n_cells
        or low_space.boundary is not companion.boundary
        or not math.isclose(low_space.length, companion.length)
    ):
        raise SpaceError("histopolation companion must share n_cells, boundary and length")
    if companion.degree != low_space.degree + 1:
        raise SpaceError(
            f"histopolation companion degree must be {low_space.degree + 1}, got {companion.degree}"
        )
    n_gauss = math.ceil((companion.degree + 1) / 2) + 3
    h = low_space.h
    lefts, rights = histopolation_intervals(companion)
    points, weights, rows = [], [], []
    for i, (a, b) in enumerate(zip(lefts, rights)):
        k_lo = math.floor(a / h + BREAK_TOL) + 1
        k_hi = math.ceil(b / h - BREAK_TOL) - 1
        cuts = [a] + [k * h for k in range(k_lo, k_hi + 1)] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo <= BREAK_TOL * h:
                continue
            x, w = gauss_legendre(lo, hi, n_gauss)
            points.append(x)
            weights.append(w)
            rows.append(np.full(n_gauss, i))
    points = np.concatenate(points)
    if low_space.periodic:
        points = np.mod(points, low_space.length)
    readings = sp.csr_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.arange(points.shape[0]))),
        shape=(lefts.shape[0], points.shape[0]),
    )
    return _factorize(DofKind.HISTOPOLATION, low_space, points, readings)


def derivative_map(high_space: Spline1DSpace) -> sp.csr_matrix:
    """
    Coefficients of d/dx f in ``high_space.lowered()`` for f in ``high_space``.

    The result is exact: differentiating a degree-p spline and expanding it in
    the degree p-1 basis gives the same function pointwise.
    """
    if high_space.degree < 1:
        raise SpaceError("derivative map needs degree >= 1")
    low = high_space.lowered()
    p = high_space.degree
    if high_space.periodic:
        n = high_space.n_cells
        delta = low.shift - high_space.shift
        k = np.arange(n)
        rows = np.concatenate([k, k])
        cols = np.concatenate([np.mod(k - delta, n), np.mod(k - delta - 1, n)])
        vals = np.concatenate([np.full(n, 1.0 / high_space.h), np.full(n, -1.0 / high_space.h)])
    else:
        t = high_space.knots
        k = np.arange(low.dim)
        scale = p / (t[k + p + 1] - t[k + 1])
        rows = np.concatenate([k, k])
        cols = np.concatenate([k + 1, k])
        vals = np.concatenate([scale, -scale])
    return sp.csr_matrix((vals, (rows, cols)), shape=(low.dim, high_space.dim))
