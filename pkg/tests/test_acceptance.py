"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line with its measured figures at the stated tolerance."""

import time

import numpy as np
import pytest

from vembench.generators import GeneratorSpec, generate
from vembench.geometry import compute_geometry
from vembench.local import build_element, build_face_cache
from vembench.maps import ApproachConfig, build_inertial_map
from vembench.problems import problem_library
from vembench.quadrature import polygon_rule, polyhedron_rule
from vembench.solve import assemble, energy_errors, matrix_cond, solve
from vembench.basis import poly_space_dim

from support_meshes import square_grid_mesh
from oracles import (dense_solve, lstsq_fit, polygon_monomial_integral,
                     polyhedron_monomial_integral)

ALL_FAMILY_SPECS = [
    GeneratorSpec("hdhm", resolution=12, seed=3),
    GeneratorSpec("rtrm", domain_edge=1e-5, resolution=5),
    GeneratorSpec("gpgm", resolution=30, splits=4, seed=2),
    GeneratorSpec("csm", band_exp=1),
    GeneratorSpec("csm", band_exp=2),
    GeneratorSpec("csm", band_exp=3),
    GeneratorSpec("rttm", resolution=2),
    GeneratorSpec("gpdm", resolution=3, seed=1),
    GeneratorSpec("ccm", band_exp=1),
    GeneratorSpec("ccm", band_exp=2),
    GeneratorSpec("ccm", band_exp=3),
]


def report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _mapped_geometries(mesh):
    out = []
    for ci in range(mesh.n_cells):
        poly = (mesh.cell_polygon(ci) if mesh.dimension == 2
                else mesh.cell_polyhedron(ci)[0])
        out.append(compute_geometry(build_inertial_map(poly)[1]))
    return out


def test_mapped_shape_exactness():
    worst_r = worst_off = worst_h = 0.0
    slowest = 0.0
    for spec in ALL_FAMILY_SPECS:
        mesh = generate(spec)
        t0 = time.time()
        for g in _mapped_geometries(mesh):
            worst_r = max(worst_r, abs(g.anisotropic_ratio - 1.0))
            tr = np.trace(g.inertia_tensor)
            off = g.inertia_tensor - np.diag(np.diag(g.inertia_tensor))
            worst_off = max(worst_off, np.abs(off).max() / tr)
            worst_h = max(worst_h, abs(g.diameter - 1.0))
        slowest = max(slowest, time.time() - t0)
    ok = worst_r <= 1e-10 and worst_off <= 1e-12 and worst_h <= 1e-12 and slowest < 5.0
    report("mapped-shape exactness",
           ok, f"|r-1|<={worst_r:.2e}, offdiag<={worst_off:.2e}, "
               f"|h-1|<={worst_h:.2e}, slowest mesh {slowest:.2f}s")


def test_mapped_measure_values():
    targets = []
    for spec, value, tol in [
        (GeneratorSpec("csm", band_exp=2), 0.5, 1e-6),
        (GeneratorSpec("rtrm", domain_edge=1e-5, resolution=4), np.sqrt(3) / 4, 1e-3),
        (GeneratorSpec("ccm", band_exp=2), 3.0 ** -1.5, 5e-4),
        (GeneratorSpec("rttm", resolution=2), 1 / (6 * np.sqrt(2)), 5e-4),
    ]:
        mesh = generate(spec)
        measures = [g.measure for g in _mapped_geometries(mesh)]
        err = max(abs(m - value) for m in measures)
        targets.append((spec.family, value, err, tol))
    ok = all(err <= tol for _, _, err, tol in targets)
    report("mapped measure values", ok,
           "; ".join(f"{f}: target {v:.4f}, err {e:.1e} (tol {t})"
                     for f, v, e, t in targets))


def test_patch_tests_2d_quartic():
    t0 = time.time()
    meshes = [
        ("grid", square_grid_mesh(2), 1.0),
        ("hdhm", generate(GeneratorSpec("hdhm", resolution=8, seed=3)), 1.0),
        ("rtrm", generate(GeneratorSpec("rtrm", domain_edge=1e-5, resolution=4)), 1e-5),
        ("csm1", generate(GeneratorSpec("csm", band_exp=1)), 1.0),
        ("gpgm", generate(GeneratorSpec("gpgm", resolution=20, splits=3, seed=4)), 1.0),
    ]
    worst = 0.0
    for label, mesh, eps in meshes:
        prob = problem_library("test1", epsilon=eps)
        for approach in ("mon", "ortho", "inrt"):
            sysm = assemble(mesh, prob.coeffs, ApproachConfig.parse(approach), 4,
                            dirichlet=prob.dirichlet)
            u = solve(sysm)
            eu, eg = energy_errors(mesh, sysm, u, prob)
            worst = max(worst, eu, eg)
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 120.0
    report("patch test (quartic, k=4, 2D)", ok,
           f"worst error {worst:.2e} over {len(meshes)}x3 runs in {elapsed:.0f}s")


def test_patch_test_3d_degree6():
    mesh = generate(GeneratorSpec("rttm", resolution=3))
    assert mesh.n_cells <= 200
    prob = problem_library("test3")
    results = {}
    for approach in ("inrt-bf", "ortho"):
        t0 = time.time()
        sysm = assemble(mesh, prob.coeffs, ApproachConfig.parse(approach), 6,
                        dirichlet=prob.dirichlet)
        u = solve(sysm)
        eu, eg = energy_errors(mesh, sysm, u, prob)
        results[approach] = (max(eu, eg), time.time() - t0)
    ok = all(err <= 1e-7 and sec < 120.0 for err, sec in results.values())
    report("patch test (degree 6, k=6, 3D)", ok,
           "; ".join(f"{a}: err {e:.2e} in {s:.0f}s" for a, (e, s) in results.items()))


def _worst_local_conds(mesh, approach, k, face_cache=None):
    cfg = ApproachConfig.parse(approach)
    if mesh.dimension == 3 and face_cache is None:
        face_cache = build_face_cache(mesh, cfg, k)
    out = {"pinabla": 1.0, "pi0km1": 1.0}
    for j in range(mesh.dimension):
        out[f"pi0x{j + 1}"] = 1.0
    for ci in range(mesh.n_cells):
        ctx, lv = build_element(mesh, ci, cfg, k, face_cache)
        out["pinabla"] = max(out["pinabla"], matrix_cond(lv.pi_nabla))
        out["pi0km1"] = max(out["pi0km1"], matrix_cond(lv.pi0_km1))
        for j in range(mesh.dimension):
            out[f"pi0x{j + 1}"] = max(out[f"pi0x{j + 1}"], matrix_cond(lv.pi0_x[j]))
    return out


def test_csm_invariance_of_inertial_conditioning():
    meshes = [generate(GeneratorSpec("csm", band_exp=p)) for p in (1, 2, 3)]
    worst_dev = 0.0
    for k in range(1, 9):
        conds = [_worst_local_conds(m, "inrt", k) for m in meshes]
        for key in conds[0]:
            vals = [c[key] for c in conds]
            dev = (max(vals) - min(vals)) / max(vals)
            worst_dev = max(worst_dev, dev)
    ok = worst_dev <= 0.01
    report("CSM invariance of inertial conditioning", ok,
           f"max relative spread across CSM1/2/3 over k=1..8: {worst_dev:.2e}")


def test_conditioning_ordering_2d():
    rows = []
    csm3 = generate(GeneratorSpec("csm", band_exp=3))
    hexm = generate(GeneratorSpec("hdhm", resolution=12, seed=3))
    for label, mesh in (("csm3", csm3), ("hdhm", hexm)):
        for k in (5, 6, 7, 8):
            mon = _worst_local_conds(mesh, "mon", k)["pinabla"]
            inrt = _worst_local_conds(mesh, "inrt", k)["pinabla"]
            rows.append((label, k, inrt, mon, inrt <= mon / 10))
    ok = all(r[-1] for r in rows)
    report("conditioning ordering (2D, k>=5)", ok,
           "; ".join(f"{l} k={k}: inrt {i:.2e} vs mon {m:.2e}" for l, k, i, m, _ in rows))


def test_conditioning_ordering_3d():
    mesh = generate(GeneratorSpec("ccm", band_exp=3))
    rows = []
    for k in (4, 5):
        mon = _worst_local_conds(mesh, "mon", k)["pinabla"]
        bf = _worst_local_conds(mesh, "inrt-bf", k)["pinabla"]
        f = _worst_local_conds(mesh, "inrt-f", k)["pinabla"]
        ratio_f = max(f / mon, mon / f)
        rows.append((k, bf, mon, f, bf <= mon / 10 and ratio_f <= 10.0))
    ok = all(r[-1] for r in rows)
    report("conditioning ordering (CCM3, k>=4)", ok,
           "; ".join(f"k={k}: inrt-bf {b:.2e}, mon {m:.2e}, inrt-f {f:.2e}"
                     for k, b, m, f, _ in rows))


def test_face_conditioning_equality_bf_vs_f():
    worst = 0.0
    for spec in (GeneratorSpec("rttm", resolution=2),
                 GeneratorSpec("ccm", band_exp=1),
                 GeneratorSpec("gpdm", resolution=2, seed=1)):
        mesh = generate(spec)
        for k in (2, 3):
            cf = build_face_cache(mesh, ApproachConfig.parse("inrt-f"), k)
            cbf = build_face_cache(mesh, ApproachConfig.parse("inrt-bf"), k)
            wf = max(matrix_cond(v.lv.pi_nabla) for v in cf.values())
            wbf = max(matrix_cond(v.lv.pi_nabla) for v in cbf.values())
            worst = max(worst, abs(wf - wbf) / wf)
            wf0 = max(matrix_cond(v.lv.pi0_km1) for v in cf.values())
            wbf0 = max(matrix_cond(v.lv.pi0_km1) for v in cbf.values())
            worst = max(worst, abs(wf0 - wbf0) / wf0)
    ok = worst <= 1e-9
    report("face conditioning equality (BF vs F)", ok,
           f"max relative difference {worst:.2e}")


def test_oracle_equivalences():
    # projectors vs dense least squares on quadrature samples
    proj_err = 0.0
    mesh2 = generate(GeneratorSpec("hdhm", resolution=6, seed=5))
    for approach in ("mon", "ortho", "inrt"):
        k = 3
        ctx, lv = build_element(mesh2, 8, ApproachConfig.parse(approach), k)
        quad = ctx.quad_hat
        vals = ctx.basis.evaluate(quad.points)
        vals_km1 = vals[: poly_space_dim(2, k - 1)]
        for alpha in range(lv.basis.n):
            fit = lstsq_fit(quad.points, quad.weights, vals_km1, vals[alpha])
            proj_err = max(proj_err, np.abs(lv.pi0_km1 @ lv.D[:, alpha] - fit).max())
    mesh3 = generate(GeneratorSpec("rttm", resolution=1))
    cfg = ApproachConfig.parse("inrt-bf")
    cache = build_face_cache(mesh3, cfg, 2)
    ctx, lv = build_element(mesh3, 1, cfg, 2, cache)
    vals = ctx.basis.evaluate(ctx.quad_hat.points)
    for alpha in range(lv.basis.n):
        fit = lstsq_fit(ctx.quad_hat.points, ctx.quad_hat.weights,
                        vals[: poly_space_dim(3, 1)], vals[alpha])
        proj_err = max(proj_err, np.abs(lv.pi0_km1 @ lv.D[:, alpha] - fit).max())

    # quadrature vs divergence-theorem monomial oracle
    quad_err = 0.0
    poly = mesh2.cell_polygon(3).vertices
    rule = polygon_rule(poly, 8)
    for a in range(5):
        for b in range(5 - a):
            want = polygon_monomial_integral(poly, a, b)
            got = (rule.points[:, 0] ** a * rule.points[:, 1] ** b) @ rule.weights
            quad_err = max(quad_err, abs(got - want) / max(abs(want), 1e-30))
    cell, _ = mesh3.cell_polyhedron(0)
    rule3 = polyhedron_rule(cell.vertices, cell.outward_loops(), 6)
    for a in range(3):
        for b in range(3 - a):
            for c in range(3 - a - b):
                want = polyhedron_monomial_integral(
                    cell.vertices, cell.outward_loops(), a, b, c)
                got = (rule3.points[:, 0] ** a * rule3.points[:, 1] ** b
                       * rule3.points[:, 2] ** c) @ rule3.weights
                quad_err = max(quad_err, abs(got - want) / max(abs(want), 1e-30))

    # sparse solve vs dense oracle on a small system
    prob = problem_library("test2")
    grid = square_grid_mesh(3)
    sysm = assemble(grid, prob.coeffs, ApproachConfig("inrt"), 2,
                    dirichlet=prob.dirichlet)
    assert sysm.dofmap.n_dofs <= 500
    u = solve(sysm)
    solve_err = float(np.abs(u - dense_solve(sysm)).max() / max(1.0, np.abs(u).max()))

    ok = proj_err <= 1e-9 and quad_err <= 1e-12 and solve_err <= 1e-10
    report("oracle equivalences", ok,
           f"projector vs lstsq {proj_err:.2e}; quadrature vs divergence "
           f"{quad_err:.2e}; sparse vs dense {solve_err:.2e}")


def test_convergence_sanity_sine_on_csm1():
    t0 = time.time()
    mesh = generate(GeneratorSpec("csm", band_exp=1))
    prob = problem_library("test2")
    errs = []
    for k in range(1, 7):
        sysm = assemble(mesh, prob.coeffs, ApproachConfig("inrt"), k,
                        dirichlet=prob.dirichlet)
        u = solve(sysm)
        eu, _ = energy_errors(mesh, sysm, u, prob)
        errs.append(eu)
    elapsed = time.time() - t0
    monotone = all(errs[i + 1] < errs[i] for i in range(3))
    ok = monotone and errs[5] <= 1e-6 and elapsed < 60.0
    report("convergence sanity (sine, CSM1, inertial)", ok,
           f"u_err k=1..6: {['%.1e' % e for e in errs]} in {elapsed:.0f}s")
