import numpy as np
import pytest

from src.exceptions import SpaceError
from src.spline_core import (
    build_space,
    collocation_matrix,
    derivative_map,
    eval_basis,
    eval_spline,
    greville_points,
    histopolation_intervals,
    histopolation_operator,
    interpolation_operator,
    mass_matrix_1d,
)

SPACES = [
    (8, 1, "periodic"),
    (8, 2, "periodic"),
    (9, 3, "periodic"),
    (5, 1, "clamped"),
    (6, 2, "clamped"),
    (7, 3, "clamped"),
]


class TestBuildSpace:
    def test_periodic_dimension(self):
        space = build_space(8, 3, "periodic", length=2.0)
        assert space.dim == 8
        assert space.h == pytest.approx(0.25)

    def test_clamped_dimension(self):
        assert build_space(8, 3, "clamped").dim == 11

    @pytest.mark.parametrize(
        "n_cells, degree, boundary",
        [(8, -1, "periodic"), (0, 2, "clamped"), (2, 3, "periodic"), (4, 1, "mirror")],
    )
    def test_invalid(self, n_cells, degree, boundary):
        with pytest.raises(SpaceError):
            build_space(n_cells, degree, boundary)

    def test_lowered_degree_zero(self):
        with pytest.raises(SpaceError):
            build_space(4, 0, "clamped").lowered()


class TestGreville:
    def test_periodic_odd_degree_on_breakpoints(self):
        space = build_space(8, 1, "periodic")
        np.testing.assert_allclose(greville_points(space), np.arange(8) / 8, atol=1e-15)

    def test_periodic_even_degree_on_midpoints(self):
        space = build_space(8, 2, "periodic")
        np.testing.assert_allclose(greville_points(space), (np.arange(8) + 0.5) / 8, atol=1e-15)

    def test_clamped_endpoints(self):
        g = greville_points(build_space(6, 3, "clamped", length=3.0))
        assert g.shape == (9,)
        assert g[0] == 0.0
        assert g[-1] == pytest.approx(3.0)
        assert np.all(np.diff(g) > 0)


class TestBasis:
    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_partition_of_unity(self, n_cells, degree, boundary, rng):
        space = build_space(n_cells, degree, boundary)
        x = rng.uniform(0.0, 1.0, 50)
        np.testing.assert_allclose(collocation_matrix(space, x).sum(axis=1).A1, 1.0, atol=1e-14)

    def test_eval_basis_count(self):
        first, values = eval_basis(build_space(6, 2, "clamped"), 0.3)
        assert values.shape == (3,)
        assert 0 <= first <= 6

    def test_derivative_beyond_degree_raises(self):
        space = build_space(6, 1, "periodic")
        with pytest.raises(SpaceError):
            eval_basis(space, 0.1, deriv_order=2)
        _, values = eval_basis(space, 0.1, deriv_order=1)
        assert values.shape == (2,)

    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_derivative_matches_finite_difference(self, n_cells, degree, boundary, rng):
        space = build_space(n_cells, degree, boundary)
        coeffs = rng.standard_normal(space.dim)
        # stay away from breakpoints where degree-1 derivatives jump
        x = (np.arange(n_cells) + 0.37) * space.h
        eps = 1e-6
        fd = (eval_spline(space, coeffs, x + eps) - eval_spline(space, coeffs, x - eps)) / (2 * eps)
        np.testing.assert_allclose(eval_spline(space, coeffs, x, 1), fd, rtol=1e-6, atol=1e-6)


class TestDerivativeMap:
    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_exact_pointwise(self, n_cells, degree, boundary, rng):
        high = build_space(n_cells, degree, boundary)
        coeffs = rng.standard_normal(high.dim)
        x = rng.uniform(0.0, 1.0, 40)
        np.testing.assert_allclose(
            eval_spline(high.lowered(), derivative_map(high) @ coeffs, x),
            eval_spline(high, coeffs, x, 1),
            atol=1e-11,
        )

    def test_constants_in_kernel(self):
        high = build_space(7, 2, "clamped")
        np.testing.assert_allclose(derivative_map(high) @ np.ones(high.dim), 0.0, atol=1e-12)

    def test_degree_zero(self):
        with pytest.raises(SpaceError):
            derivative_map(build_space(4, 0, "periodic"))


class TestProjections:
    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_interpolation_reproduces_splines(self, n_cells, degree, boundary, rng):
        space = build_space(n_cells, degree, boundary)
        coeffs = rng.standard_normal(space.dim)
        op = interpolation_operator(space)
        np.testing.assert_allclose(op.project(lambda x: eval_spline(space, coeffs, x)), coeffs, atol=1e-11)

    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_histopolation_reproduces_splines(self, n_cells, degree, boundary, rng):
        high = build_space(n_cells, degree, boundary)
        low = high.lowered()
        coeffs = rng.standard_normal(low.dim)
        op = histopolation_operator(low, high)
        np.testing.assert_allclose(op.project(lambda x: eval_spline(low, coeffs, x)), coeffs, atol=1e-11)

    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_commuting_derivative(self, n_cells, degree, boundary):
        high = build_space(n_cells, degree, boundary)
        low = high.lowered()
        k = 2 * np.pi
        interp = interpolation_operator(high).project(lambda x: np.sin(k * x))
        # histopolation DOFs of the derivative are exact endpoint differences
        left, right = histopolation_intervals(high)
        histo = histopolation_operator(low, high).solve(np.sin(k * right) - np.sin(k * left))
        scale = k * np.max(np.abs(interp))
        np.testing.assert_allclose(derivative_map(high) @ interp, histo, rtol=0.0, atol=1e-12 * scale)

    def test_commuting_derivative_with_quadrature(self):
        high = build_space(16, 1, "periodic")
        k = 2 * np.pi
        interp = interpolation_operator(high).project(lambda x: np.sin(k * x))
        histo = histopolation_operator(high.lowered(), high).project(lambda x: k * np.cos(k * x))
        np.testing.assert_allclose(derivative_map(high) @ interp, histo, rtol=0.0, atol=1e-10 * k)

    def test_histopolation_mismatch(self):
        with pytest.raises(SpaceError):
            histopolation_operator(build_space(6, 1, "periodic"), build_space(6, 3, "periodic"))
        with pytest.raises(SpaceError):
            histopolation_operator(build_space(6, 1, "periodic"), build_space(6, 2, "clamped"))


class TestMass:
    @pytest.mark.parametrize("n_cells, degree, boundary", SPACES)
    def test_total_is_length(self, n_cells, degree, boundary):
        space = build_space(n_cells, degree, boundary, length=2.5)
        mass = mass_matrix_1d(space)
        assert mass.sum() == pytest.approx(2.5, rel=1e-13)
        np.testing.assert_allclose(mass.toarray(), mass.toarray().T, atol=1e-15)
        assert np.linalg.eigvalsh(mass.toarray()).min() > 0
