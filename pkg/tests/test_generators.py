import json

import numpy as np
import pytest

from vembench.errors import SpecError
from vembench.generators import GeneratorSpec, generate
from vembench.geometry import compute_geometry


def _cell_geometries(mesh):
    if mesh.dimension == 2:
        return [compute_geometry(mesh.cell_polygon(i)) for i in range(mesh.n_cells)]
    return [compute_geometry(mesh.cell_polyhedron(i)[0]) for i in range(mesh.n_cells)]


class TestCsm:
    def test_csm1_statistics(self):
        mesh = generate(GeneratorSpec("csm", band_exp=1))
        geos = _cell_geometries(mesh)
        assert mesh.n_cells == 110
        assert min(g.measure for g in geos) == pytest.approx(1.0e-3, rel=1e-12)
        assert max(g.anisotropic_ratio for g in geos) == pytest.approx(1.0e2, rel=1e-10)
        assert max(g.edge_ratio for g in geos) == pytest.approx(10.0, rel=1e-12)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_band_heights_exact(self, p):
        # exact to floating-point representation (decimal levels are inexact
        # doubles, so "exact" means within an ulp of the prescribed height)
        mesh = generate(GeneratorSpec("csm", band_exp=p))
        heights = set()
        for i in range(mesh.n_cells):
            v = mesh.cell_polygon(i).vertices
            heights.add(float(v[:, 1].max() - v[:, 1].min()))
        thin = 10.0 ** (-1 - p)
        ulp = np.finfo(float).eps * 0.6
        assert any(abs(h - thin) <= 4 * ulp for h in heights)
        assert any(abs(h - (0.1 - thin)) <= 4 * ulp for h in heights)

    def test_non_band_cells_congruent(self):
        mesh = generate(GeneratorSpec("csm", band_exp=2))
        squares = [g for g in _cell_geometries(mesh)
                   if abs(g.measure - 0.01) < 1e-14]
        assert len(squares) == 90
        assert all(g.diameter == pytest.approx(0.1 * np.sqrt(2), rel=1e-13)
                   for g in squares)


class TestCcm:
    def test_ccm3_statistics(self):
        mesh = generate(GeneratorSpec("ccm", band_exp=3))
        geos = _cell_geometries(mesh)
        assert mesh.n_cells == 150
        assert min(g.measure for g in geos) == pytest.approx(8.0e-6, rel=1e-10)
        assert max(g.anisotropic_ratio for g in geos) == pytest.approx(1.0e6, rel=1e-8)

    def test_ccm1_face_ratio(self):
        mesh = generate(GeneratorSpec("ccm", band_exp=1))
        geos = _cell_geometries(mesh)
        assert max(g.face_ratio for g in geos) == pytest.approx(10.0, rel=1e-10)

    def test_non_band_cells_congruent_cubes(self):
        mesh = generate(GeneratorSpec("ccm", band_exp=2))
        cubes = [g for g in _cell_geometries(mesh) if abs(g.measure - 8e-3) < 1e-15]
        assert len(cubes) == 100
        assert all(g.diameter == pytest.approx(0.2 * np.sqrt(3), rel=1e-13)
                   for g in cubes)


class TestRtrm:
    def test_diameter_range(self):
        mesh = generate(GeneratorSpec("rtrm", domain_edge=1e-5))
        diams = [g.diameter for g in _cell_geometries(mesh)]
        assert min(diams) >= 1.0e-6 and max(diams) <= 1.9e-6

    def test_cells_are_triangles(self):
        mesh = generate(GeneratorSpec("rtrm", domain_edge=1.0, resolution=3))
        assert mesh.n_cells == 18
        assert all(len(c) == 3 for c in mesh.cells_vertices)


class TestSeededFamilies:
    def test_determinism_bit_for_bit(self, tmp_path):
        for fam, kw in (("hdhm", dict(resolution=8)),
                        ("gpgm", dict(resolution=20, splits=3)),
                        ("gpdm", dict(resolution=2))):
            a = generate(GeneratorSpec(fam, seed=11, **kw))
            b = generate(GeneratorSpec(fam, seed=11, **kw))
            assert np.array_equal(a.vertices, b.vertices)
            assert np.array_equal(a.edges, b.edges)

    def test_seed_changes_hdhm(self):
        a = generate(GeneratorSpec("hdhm", resolution=8, seed=0))
        b = generate(GeneratorSpec("hdhm", resolution=8, seed=1))
        assert not np.array_equal(a.vertices, b.vertices)

    def test_hdhm_default_cell_count_near_reference(self):
        mesh = generate(GeneratorSpec("hdhm", seed=0))
        assert 4569 <= mesh.n_cells <= 6853  # 5711 +- 20%

    def test_gpgm_default_count_and_hanging_nodes(self):
        mesh = generate(GeneratorSpec("gpgm", seed=0))
        assert mesh.n_cells == 81
        flat = 0
        for i in range(mesh.n_cells):
            v = mesh.cell_polygon(i).vertices
            m = len(v)
            for j in range(m):
                a, b, c = v[j - 1], v[j], v[(j + 1) % m]
                u, w = b - a, c - b
                cross = abs(u[0] * w[1] - u[1] * w[0])
                if cross < 1e-12 * np.linalg.norm(u) * np.linalg.norm(w):
                    flat += 1
        assert flat >= 2  # chord splits insert hanging nodes in neighbours

    def test_gpdm_has_aligned_faces(self):
        mesh = generate(GeneratorSpec("gpdm", resolution=2, seed=5))
        n_faces_per_cell = [len(f) for f in mesh.cells_faces]
        assert max(n_faces_per_cell) > 6  # some box carries coplanar sub-faces


class TestSpecValidation:
    def test_band_exp_out_of_range(self):
        with pytest.raises(SpecError):
            GeneratorSpec("csm", band_exp=4)

    def test_unknown_family(self):
        with pytest.raises(SpecError):
            GeneratorSpec("nope")

    def test_nonpositive_domain(self):
        with pytest.raises(SpecError):
            GeneratorSpec("rtrm", domain_edge=0.0)
