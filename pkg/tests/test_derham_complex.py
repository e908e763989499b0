import numpy as np
import pytest

from src.derham_complex import FieldCoeffs, SpaceTag, build_complex
from src.exceptions import PositivityError, SpaceError


def _random(cx, tag, rng):
    return FieldCoeffs(tag, rng.standard_normal(cx.dim(tag)))


class TestSequence:
    @pytest.mark.parametrize("fixture", ["periodic_p1", "periodic_p2", "wall_p1"])
    def test_d1_d0_vanishes(self, fixture, request):
        cx = request.getfixturevalue(fixture)
        assert abs(cx.D1 @ cx.D0).max() <= 1e-12

    def test_dimensions(self, periodic_p2, wall_p1):
        assert periodic_p2.dim(SpaceTag.FORM0) == 64
        assert periodic_p2.dim(SpaceTag.FLUX1) == 128
        assert periodic_p2.dim(SpaceTag.DENS2) == 64
        # clamped y: hi degree 2 has 10 functions, lo degree 1 has 9
        assert wall_p1.dim(SpaceTag.FORM0) == 8 * 10
        assert wall_p1.dim(SpaceTag.DENS2) == 8 * 9
        assert wall_p1.dim(SpaceTag.FLUX1) == 8 * 9 + 8 * 10

    def test_wrong_tag(self, periodic_p1):
        with pytest.raises(SpaceError):
            periodic_p1.apply_d0(periodic_p1.zeros(SpaceTag.DENS2))
        with pytest.raises(SpaceError):
            periodic_p1.apply_d1(periodic_p1.zeros(SpaceTag.FORM0))

    def test_degree_zero_complex(self):
        with pytest.raises(SpaceError):
            build_complex(4, 4, 0)

    def test_field_arithmetic_checks_tags(self, periodic_p1):
        with pytest.raises(SpaceError):
            periodic_p1.zeros(SpaceTag.DENS2) + periodic_p1.zeros(SpaceTag.FORM0)


class TestProjections:
    @pytest.mark.parametrize("fixture", ["periodic_p1", "periodic_p2", "wall_p1"])
    def test_commuting_diagram(self, fixture, request):
        cx = request.getfixturevalue(fixture)
        lx, ly = cx.lengths
        kx, ky = 2 * np.pi / lx, 2 * np.pi / ly
        flux = cx.project1(
            lambda x, y: np.sin(kx * x) * np.cos(ky * y),
            lambda x, y: np.cos(kx * x) * np.sin(ky * y),
        )
        div = cx.project2(lambda x, y: (kx + ky) * np.cos(kx * x) * np.cos(ky * y))
        np.testing.assert_allclose(cx.apply_d1(flux).coeffs, div.coeffs, atol=1e-9)

    def test_curl_commutes(self, periodic_p2):
        cx = periodic_p2
        kx, ky = 2 * np.pi, np.pi
        f = cx.project0(lambda x, y: np.sin(kx * x) * np.sin(ky * y))
        curl = cx.project1(
            lambda x, y: ky * np.sin(kx * x) * np.cos(ky * y),
            lambda x, y: -kx * np.cos(kx * x) * np.sin(ky * y),
        )
        np.testing.assert_allclose(cx.apply_d0(f).coeffs, curl.coeffs, atol=1e-9)

    @pytest.mark.parametrize("tag", [SpaceTag.FORM0, SpaceTag.DENS2])
    def test_projection_is_identity_on_space(self, periodic_p2, tag, rng):
        cx = periodic_p2
        field = _random(cx, tag, rng)

        def func(x, y):
            return cx.eval_field(field, x.ravel(), y.ravel()).reshape(x.shape)

        projected = cx.project0(func) if tag is SpaceTag.FORM0 else cx.project2(func)
        np.testing.assert_allclose(projected.coeffs, field.coeffs, atol=1e-10)

    @pytest.mark.parametrize("tag, grids", [
        (SpaceTag.FORM0, ["p0"]),
        (SpaceTag.FLUX1, ["p1x", "p1y"]),
        (SpaceTag.DENS2, ["p2"]),
    ])
    def test_sample_weights_are_adjoint(self, wall_p1, tag, grids, rng):
        cx = wall_p1
        functional = rng.standard_normal(cx.dim(tag))
        samples = [rng.standard_normal(cx.mesh(g)[0].shape) for g in grids]
        if tag is SpaceTag.FORM0:
            coeffs = cx.project0_values(samples[0])
        elif tag is SpaceTag.FLUX1:
            coeffs = cx.project1_values(*samples)
        else:
            coeffs = cx.project2_values(samples[0])
        weights = cx.projection_sample_weights(tag, functional)
        expected = sum(float(np.sum(w * s)) for w, s in zip(weights, samples))
        assert functional @ coeffs == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_velocity_projection_zeroes_wall_normal(self, wall_p1):
        u = wall_p1.project_velocity(lambda x, y: 1.0 + 0 * x, lambda x, y: 1.0 + 0 * y)
        fixed = wall_p1.constrained_velocity_dofs()
        assert fixed.size == 2 * 8
        assert not u.coeffs[fixed].any()
        assert np.all(u.coeffs[wall_p1.free_velocity_dofs()] != 0)

    def test_periodic_has_no_constraints(self, periodic_p1):
        assert periodic_p1.constrained_velocity_dofs().size == 0


class TestMassAndIntegration:
    @pytest.mark.parametrize("tag", list(SpaceTag))
    def test_mass_symmetric_positive(self, wall_p1, tag):
        mass = wall_p1.mass_matrix(tag).toarray()
        np.testing.assert_allclose(mass, mass.T, atol=1e-15)
        assert np.linalg.eigvalsh(mass).min() > 0

    def test_integral_of_constant(self, periodic_p2):
        one = periodic_p2.project2(lambda x, y: np.ones_like(x))
        assert periodic_p2.integral(one) == pytest.approx(2.0, rel=1e-13)
        assert periodic_p2.l2_norm(one) == pytest.approx(np.sqrt(2.0), rel=1e-13)

    def test_weighted_mass_reduces_to_mass(self, periodic_p1):
        cx = periodic_p1
        one = cx.project2(lambda x, y: np.ones_like(x))
        np.testing.assert_allclose(
            cx.weighted_velocity_mass(one).toarray(), cx.mass_matrix(SpaceTag.VELOCITY).toarray(), atol=1e-14
        )

    def test_weighted_mass_rejects_negative_density(self, periodic_p1):
        rho = periodic_p1.project2(lambda x, y: np.cos(2 * np.pi * x))
        with pytest.raises(PositivityError):
            periodic_p1.weighted_velocity_mass(rho)

    def test_l2_error_decreases(self):
        errors = []
        for n in (8, 16):
            cx = build_complex(n, n, 2)
            f = cx.project2(lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
            errors.append(cx.l2_error(f, lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)))
        # degree 2 densities converge at third order
        assert errors[0] / errors[1] > 6.0


class TestEvaluation:
    def test_shapes(self, periodic_p1, rng):
        cx = periodic_p1
        x, y = rng.uniform(0, 1, 5), rng.uniform(0, 1, 5)
        assert cx.eval_field(_random(cx, SpaceTag.DENS2, rng), x, y).shape == (5,)
        assert cx.eval_field(_random(cx, SpaceTag.FLUX1, rng), x, y).shape == (5, 2)
        assert cx.eval_field(_random(cx, SpaceTag.FORM0, rng), x, y, "grad").shape == (5, 2)
        assert cx.eval_field(_random(cx, SpaceTag.VELOCITY, rng), x, y, "grad").shape == (5, 2, 2)

    def test_grad_of_density_rejected(self, periodic_p1):
        with pytest.raises(SpaceError):
            periodic_p1.eval_field(periodic_p1.zeros(SpaceTag.DENS2), [0.1], [0.2], "grad")

    def test_velocity_gradient_layout(self, periodic_p2):
        cx = periodic_p2
        u = cx.project_velocity(lambda x, y: np.sin(2 * np.pi * x), lambda x, y: np.sin(np.pi * y))
        grad = cx.eval_field(u, [0.1], [0.3], "grad")[0]
        assert grad[0, 0] == pytest.approx(2 * np.pi * np.cos(0.2 * np.pi), rel=0.1)
        assert grad[1, 1] == pytest.approx(np.pi * np.cos(0.3 * np.pi), rel=0.1)
        assert abs(grad[0, 1]) < 1e-10
        assert abs(grad[1, 0]) < 1e-10

    def test_tensor_matches_scattered(self, wall_p1, rng):
        cx = wall_p1
        b = _random(cx, SpaceTag.FLUX1, rng)
        xs, ys = np.linspace(0, 1, 4), np.linspace(0, 1, 3)
        bx, by = cx.eval_tensor(b, xs, ys)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        scattered = cx.eval_field(b, X.ravel(), Y.ravel())
        np.testing.assert_allclose(bx.ravel(), scattered[:, 0], atol=1e-13)
        np.testing.assert_allclose(by.ravel(), scattered[:, 1], atol=1e-13)
