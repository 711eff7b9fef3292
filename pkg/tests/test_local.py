import numpy as np
import pytest

from vembench.basis import poly_space_dim
from vembench.generators import GeneratorSpec, generate
from vembench.local import (AdrCoefficients, build_element, build_face_cache,
                            interpolate_dofs, local_bilinear, stabilization)
from vembench.maps import ApproachConfig
from vembench.quadrature import polygon_rule

from support_meshes import square_grid_mesh
from oracles import lstsq_fit

APPROACHES_2D = ["mon", "ortho", "inrt"]
APPROACHES_3D = ["mon", "ortho", "inrt-b", "inrt-f", "inrt-bf"]


def _dof_count_2d(mesh, ci, k):
    loop = mesh.cells_vertices[ci]
    return len(loop) + len(loop) * (k - 1) + poly_space_dim(2, k - 2)


class TestProjectors2D:
    @pytest.mark.parametrize("approach", APPROACHES_2D)
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_polynomial_reproduction(self, approach, k):
        mesh = generate(GeneratorSpec("hdhm", resolution=6, seed=4))
        cfg = ApproachConfig.parse(approach)
        for ci in (0, 9, 17):
            ctx, lv = build_element(mesh, ci, cfg, k)
            assert len(lv.dof) == _dof_count_2d(mesh, ci, k)
            assert np.abs(lv.pi_nabla @ lv.D - np.eye(lv.basis.n)).max() < 1e-10
            assert np.abs(lv.pi0_k @ lv.D - np.eye(lv.basis.n)).max() < 1e-10

    def test_g_pinabla_equals_b(self):
        mesh = generate(GeneratorSpec("csm", band_exp=1))
        for approach in APPROACHES_2D:
            ctx, lv = build_element(mesh, 55, ApproachConfig.parse(approach), 3)
            resid = np.abs(lv.G @ lv.pi_nabla - lv.B).max()
            assert resid <= 1e-11 * max(np.abs(lv.B).max(), 1.0)

    def test_k1_square_projector(self):
        mesh = square_grid_mesh(1)
        ctx, lv = build_element(mesh, 0, ApproachConfig("mon"), 1)
        # constant-1 DOF vector projects to the constant monomial
        ones = np.ones(4)
        coeffs = lv.pi_nabla @ ones
        assert coeffs[0] == pytest.approx(1.0, abs=1e-12)
        assert np.abs(coeffs[1:]).max() < 1e-12
        assert (lv.pi0_km1 @ ones)[0] == pytest.approx(1.0, abs=1e-12)
        # a hat DOF projects onto the mean plane of the bilinear interpolant
        hat = np.zeros(4)
        hat[0] = 1.0
        plane = lv.pi_nabla @ hat
        assert plane[0] == pytest.approx(0.25, abs=1e-12)

    def test_enhancement_identity(self):
        mesh = generate(GeneratorSpec("gpgm", resolution=18, splits=2, seed=6))
        for approach in APPROACHES_2D:
            ctx, lv = build_element(mesh, 4, ApproachConfig.parse(approach), 3)
            n_km2 = poly_space_dim(2, 1)
            lhs = (lv.H @ lv.pi0_k)[n_km2:]
            rhs = (lv.H @ lv.pi_nabla)[n_km2:]
            scale = max(np.abs(rhs).max(), 1.0)
            assert np.abs(lhs - rhs).max() <= 1e-10 * scale

    @pytest.mark.parametrize("approach", APPROACHES_2D)
    def test_pi0_against_lstsq_oracle(self, approach):
        mesh = generate(GeneratorSpec("hdhm", resolution=6, seed=1))
        k = 3
        cfg = ApproachConfig.parse(approach)
        ctx, lv = build_element(mesh, 11, cfg, k)
        quad = ctx.quad_hat
        vals_k = ctx.basis.evaluate(quad.points)
        vals_km1 = vals_k[: poly_space_dim(2, k - 1)]
        for alpha in range(lv.basis.n):
            dofs = lv.D[:, alpha]
            fit = lstsq_fit(quad.points, quad.weights, vals_km1, vals_k[alpha])
            got = lv.pi0_km1 @ dofs
            assert np.abs(got - fit).max() < 1e-9

    def test_pi0x_against_lstsq_oracle(self):
        mesh = generate(GeneratorSpec("csm", band_exp=1))
        k = 3
        ctx, lv = build_element(mesh, 7, ApproachConfig("inrt"), k)
        quad = ctx.quad_hat
        vals, grads = ctx.basis.evaluate_with_gradient(quad.points)
        vals_km1 = vals[: poly_space_dim(2, k - 1)]
        for alpha in range(lv.basis.n):
            dofs = lv.D[:, alpha]
            for j in range(2):
                fit = lstsq_fit(quad.points, quad.weights, vals_km1, grads[j][alpha])
                got = lv.pi0_x[j] @ dofs
                assert np.abs(got - fit).max() < 1e-9

    def test_inrt_scale_invariance(self):
        mesh1 = square_grid_mesh(2, 0.0, 1.0)
        mesh2 = square_grid_mesh(2, 0.0, 10.0)
        c1, l1 = build_element(mesh1, 1, ApproachConfig("inrt"), 3)
        c2, l2 = build_element(mesh2, 1, ApproachConfig("inrt"), 3)
        assert np.abs(l1.pi_nabla - l2.pi_nabla).max() < 1e-9
        assert np.abs(l1.pi0_k - l2.pi0_k).max() < 1e-9


class TestStabilization:
    def test_kernel_contains_polynomial_dofs(self):
        mesh = generate(GeneratorSpec("hdhm", resolution=6, seed=9))
        for approach in APPROACHES_2D:
            ctx, lv = build_element(mesh, 5, ApproachConfig.parse(approach), 3)
            s = stabilization(lv, ctx.geo_orig.diameter, 2)
            assert np.abs(s @ lv.D).max() < 1e-10

    def test_symmetric_psd(self):
        mesh = generate(GeneratorSpec("csm", band_exp=2))
        ctx, lv = build_element(mesh, 50, ApproachConfig("inrt"), 2)
        s = stabilization(lv, ctx.geo_orig.diameter, 2)
        assert np.abs(s - s.T).max() < 1e-12 * max(np.abs(s).max(), 1.0)
        ev = np.linalg.eigvalsh(s)
        assert ev.min() >= -1e-12 * np.abs(ev).max()

    def test_2d_scaling_exponent_is_zero(self):
        mesh1 = square_grid_mesh(1, 0.0, 1.0)
        mesh2 = square_grid_mesh(1, 0.0, 10.0)
        c1, l1 = build_element(mesh1, 0, ApproachConfig("inrt"), 2)
        c2, l2 = build_element(mesh2, 0, ApproachConfig("inrt"), 2)
        s1 = stabilization(l1, c1.geo_orig.diameter, 2)
        s2 = stabilization(l2, c2.geo_orig.diameter, 2)
        assert np.abs(s1 - s2).max() < 1e-9  # h^(d-2) == 1 in 2D


class TestLocalBilinear:
    def test_constants_in_kernel(self):
        # the DOF vector of the constant function: all-ones nodal part plus
        # whatever moments the chosen basis assigns to the constant
        mesh = generate(GeneratorSpec("gpgm", resolution=18, splits=2, seed=2))
        coeffs = AdrCoefficients.constant(2)
        const = lambda p: np.ones(len(p))
        for approach in APPROACHES_2D:
            ctx, lv = build_element(mesh, 3, ApproachConfig.parse(approach), 2)
            a_mat, rhs = local_bilinear(ctx, lv, coeffs)
            dofs = interpolate_dofs(mesh, ctx, lv, const)
            assert np.abs(a_mat @ dofs).max() < 1e-10 * np.abs(a_mat).max()

    def test_poisson_patch_consistency_square(self):
        mesh = square_grid_mesh(1)
        coeffs = AdrCoefficients.constant(2)
        k = 2
        ctx, lv = build_element(mesh, 0, ApproachConfig("mon"), k)
        a_mat, _ = local_bilinear(ctx, lv, coeffs)
        u = lambda p: p[:, 0] ** 2
        du = interpolate_dofs(mesh, ctx, lv, u)
        # exact int grad(x^2) . grad(q_alpha) over the square for every basis poly
        quad = polygon_rule(ctx.poly_orig.vertices, 8)
        grads = ctx.basis.evaluate_gradient(quad.points)
        gx = 2 * quad.points[:, 0]
        for alpha in range(lv.basis.n):
            dv = lv.D[:, alpha]
            want = float(np.sum(quad.weights * gx * grads[0][alpha]))
            got = float(du @ a_mat @ dv)
            assert got == pytest.approx(want, abs=1e-10)

    def test_variable_coefficients_match_quadrature_oracle(self):
        mesh = generate(GeneratorSpec("csm", band_exp=1))
        k = 2

        def diffusion(p):
            d = np.empty((len(p), 2, 2))
            d[:, 0, 0] = 1 + p[:, 1] ** 2
            d[:, 1, 1] = 1 + p[:, 0] ** 2
            d[:, 0, 1] = d[:, 1, 0] = -0.3 * p[:, 0] * p[:, 1]
            return d

        coeffs = AdrCoefficients(
            diffusion=diffusion,
            advection=lambda p: np.zeros((len(p), 2)),
            reaction=lambda p: 1 + p[:, 0],
            source=lambda p: np.zeros(len(p)))
        ctx, lv = build_element(mesh, 12, ApproachConfig("inrt"), k)
        a_mat, _ = local_bilinear(ctx, lv, coeffs)
        c_d = _mean_pulled_trace(ctx, diffusion)
        a_mat -= stabilization(lv, ctx.geo_orig.diameter, 2, scale=c_d)
        # independent quadrature assembly of the projected form at higher order
        quad = polygon_rule(ctx.poly_hat.vertices, 2 * k + 6)
        pts_orig = ctx.map.apply(quad.points)
        det = ctx.map.det_abs
        f_inv = ctx.map.inverse
        vals = ctx.basis.evaluate(quad.points, upto=k - 1)
        d_pts = diffusion(pts_orig)
        k_hat = det * np.einsum("ij,qjl,kl->qik", f_inv, d_pts, f_inv)
        rho = det * (1 + pts_orig[:, 0])
        want = np.zeros_like(a_mat)
        for j in range(2):
            for l in range(2):
                m_jl = (vals * (quad.weights * k_hat[:, j, l])) @ vals.T
                want += lv.pi0_x[j].T @ m_jl @ lv.pi0_x[l]
        m_rho = (vals * (quad.weights * rho)) @ vals.T
        want += lv.pi0_km1.T @ m_rho @ lv.pi0_km1
        assert np.abs(a_mat - want).max() <= 1e-10 * np.abs(want).max()


def _mean_pulled_trace(ctx, diffusion):
    quad = ctx.quad_hat
    pts_orig = ctx.map.apply(quad.points)
    k_hat = ctx.map.det_abs * np.einsum(
        "ij,qjl,kl->qik", ctx.map.inverse, diffusion(pts_orig), ctx.map.inverse)
    return float(np.sum(quad.weights * np.einsum("qii->q", k_hat))
                 / (2 * np.sum(quad.weights)))


class TestProjectors3D:
    @pytest.mark.parametrize("approach", APPROACHES_3D)
    def test_polynomial_reproduction(self, approach):
        mesh = generate(GeneratorSpec("rttm", resolution=2))
        cfg = ApproachConfig.parse(approach)
        k = 2
        cache = build_face_cache(mesh, cfg, k)
        for ci in (0, 23):
            ctx, lv = build_element(mesh, ci, cfg, k, cache)
            assert np.abs(lv.pi_nabla @ lv.D - np.eye(lv.basis.n)).max() < 1e-10
            assert np.abs(lv.pi0_k @ lv.D - np.eye(lv.basis.n)).max() < 1e-10

    def test_pi0_lstsq_oracle_3d(self):
        mesh = generate(GeneratorSpec("ccm", band_exp=1))
        cfg = ApproachConfig.parse("inrt-bf")
        k = 2
        cache = build_face_cache(mesh, cfg, k)
        ctx, lv = build_element(mesh, 60, cfg, k, cache)
        quad = ctx.quad_hat
        vals = ctx.basis.evaluate(quad.points)
        vals_km1 = vals[: poly_space_dim(3, k - 1)]
        for alpha in range(lv.basis.n):
            fit = lstsq_fit(quad.points, quad.weights, vals_km1, vals[alpha])
            got = lv.pi0_km1 @ lv.D[:, alpha]
            assert np.abs(got - fit).max() < 1e-9

    def test_bf_and_f_face_projectors_identical(self):
        mesh = generate(GeneratorSpec("rttm", resolution=2))
        k = 3
        cache_f = build_face_cache(mesh, ApproachConfig.parse("inrt-f"), k)
        cache_bf = build_face_cache(mesh, ApproachConfig.parse("inrt-bf"), k)
        for f in range(mesh.n_faces):
            assert np.array_equal(cache_f[f].lv.pi_nabla, cache_bf[f].lv.pi_nabla)
            assert np.array_equal(cache_f[f].lv.pi0_km1, cache_bf[f].lv.pi0_km1)

    def test_interpolation_feeds_projection(self):
        mesh = generate(GeneratorSpec("rttm", resolution=1))
        cfg = ApproachConfig.parse("inrt-bf")
        k = 3
        cache = build_face_cache(mesh, cfg, k)
        ctx, lv = build_element(mesh, 2, cfg, k, cache)
        u = lambda p: 1.0 + 2 * p[:, 0] - p[:, 1] * p[:, 2]
        dofs = interpolate_dofs(mesh, ctx, lv, u, cache)
        coeffs = lv.pi_nabla @ dofs
        pts = ctx.quad_hat.points[:25]
        got = coeffs @ ctx.basis.evaluate(pts)
        want = u(ctx.map.apply(pts))
        assert np.abs(got - want).max() < 1e-10
