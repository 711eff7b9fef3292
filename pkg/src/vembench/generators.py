"""Seeded generators for the benchmark mesh families.

Families
--------
csm(p)   2D unit square, 10x10 grid of squares with one row split into a
         thin band of height 10**(-1-p) plus its complement (110 cells).
ccm(p)   3D unit cube, 5x5x5 grid of cubes with one x-layer split into a
         slab of thickness 0.2*10**(-p) plus its complement (150 cells).
rtrm     uniform right-triangle split of an n x n grid on (0, eps)^2.
rttm     six-tetrahedra (Kuhn) split of an n^3 cube grid on (0, 1)^3.
hdhm     hexagonal tiling clipped to the unit square with seeded random
         interior-vertex distortion, convexity kept by rejection.
gpgm     seeded Voronoi tessellation of the unit square post-processed by
         chord splits, which insert hanging (flat) vertices in neighbours.
gpdm     two-level octree refinement of a jittered box grid; unrefined cells
         next to refined ones acquire coplanar "aligned" faces.

Every generator is bit-reproducible for a fixed spec and returns a mesh that
passes full validation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi

from .errors import SpecError
from .mesh import PolytopalMesh, mesh_from_polygons, mesh_from_faces

FAMILIES = ("hdhm", "rtrm", "gpgm", "csm", "rttm", "gpdm", "ccm")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one mesh family instance."""

    family: str
    band_exp: int = 1          # csm / ccm
    domain_edge: float = 1.0   # rtrm
    resolution: int | None = None
    splits: int | None = None  # gpgm chord splits
    refine_fraction: float = 0.5  # gpdm
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family in ("csm", "ccm") and self.band_exp not in (1, 2, 3):
            raise SpecError("band_exp must be 1, 2 or 3")
        if self.domain_edge <= 0:
            raise SpecError("domain_edge must be positive")
        if self.resolution is not None and self.resolution < 1:
            raise SpecError("resolution must be >= 1")


def generate(spec: GeneratorSpec) -> PolytopalMesh:
    """Build the mesh described by ``spec`` (validated, reproducible)."""
    fam = spec.family
    if fam == "csm":
        return _csm(spec.band_exp)
    if fam == "ccm":
        return _ccm(spec.band_exp)
    if fam == "rtrm":
        return _rtrm(spec.domain_edge, spec.resolution or 9)
    if fam == "rttm":
        return _rttm(spec.resolution or 5)
    if fam == "hdhm":
        return _hdhm(spec.resolution or 80, spec.seed)
    if fam == "gpgm":
        return _gpgm(spec.resolution or 72, 9 if spec.splits is None else spec.splits,
                     spec.seed)
    if fam == "gpdm":
        return _gpdm(spec.resolution or 4, spec.refine_fraction, spec.seed)
    raise SpecError(f"unknown family {fam!r}")


# --------------------------------------------------------------------- 2D grids

def _csm(p: int) -> PolytopalMesh:
    xs = [i / 10.0 for i in range(11)]
    ys = [i / 10.0 for i in range(11)]
    ys.insert(6, 0.5 + 10.0 ** (-1 - p))
    nx = len(xs)
    verts = np.array([[x, y] for y in ys for x in xs])
    loops = []
    for l in range(len(ys) - 1):
        for i in range(nx - 1):
            loops.append([l * nx + i, l * nx + i + 1,
                          (l + 1) * nx + i + 1, (l + 1) * nx + i])
    return mesh_from_polygons(verts, loops)


def _rtrm(eps: float, n: int) -> PolytopalMesh:
    xs = np.linspace(0.0, eps, n + 1)
    verts = np.array([[x, y] for y in xs for x in xs])
    loops = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01 = v00 + 1, v00 + n + 1
            v11 = v01 + 1
            loops.append([v00, v10, v11])
            loops.append([v00, v11, v01])
    return mesh_from_polygons(verts, loops)


# --------------------------------------------------------------------- 3D grids

def _box_grid_mesh(xs, ys, zs, cell_filter=None):
    nx, ny, nz = len(xs), len(ys), len(zs)

    def vid(i, j, k):
        return (k * ny + j) * nx + i

    verts = np.array([[xs[i], ys[j], zs[k]]
                      for k in range(nz) for j in range(ny) for i in range(nx)])
    face_ids: dict[frozenset, int] = {}
    faces: list[list[int]] = []
    cells: list[list[int]] = []

    def face_of(loop):
        key = frozenset(loop)
        if key not in face_ids:
            face_ids[key] = len(faces)
            faces.append(list(loop))
        return face_ids[key]

    for k in range(nz - 1):
        for j in range(ny - 1):
            for i in range(nx - 1):
                if cell_filter is not None and not cell_filter(i, j, k):
                    continue
                c = {(a, b, d): vid(i + a, j + b, k + d)
                     for a in (0, 1) for b in (0, 1) for d in (0, 1)}
                sides = [
                    [c[0, 0, 0], c[0, 1, 0], c[0, 1, 1], c[0, 0, 1]],  # x-
                    [c[1, 0, 0], c[1, 1, 0], c[1, 1, 1], c[1, 0, 1]],  # x+
                    [c[0, 0, 0], c[1, 0, 0], c[1, 0, 1], c[0, 0, 1]],  # y-
                    [c[0, 1, 0], c[1, 1, 0], c[1, 1, 1], c[0, 1, 1]],  # y+
                    [c[0, 0, 0], c[1, 0, 0], c[1, 1, 0], c[0, 1, 0]],  # z-
                    [c[0, 0, 1], c[1, 0, 1], c[1, 1, 1], c[0, 1, 1]],  # z+
                ]
                cells.append([face_of(s) for s in sides])
    return _compact_mesh_3d(verts, faces, cells)


def _compact_mesh_3d(verts, faces, cells):
    used = sorted({v for f in faces for v in f})
    remap = {v: i for i, v in enumerate(used)}
    verts = np.asarray(verts)[used]
    faces = [[remap[v] for v in f] for f in faces]
    return mesh_from_faces(verts, faces, cells)


def _ccm(p: int) -> PolytopalMesh:
    xs = [i / 5.0 for i in range(6)]
    xs.insert(3, 0.4 + 0.2 * 10.0 ** (-p))
    ys = [i / 5.0 for i in range(6)]
    zs = [i / 5.0 for i in range(6)]
    return _box_grid_mesh(xs, ys, zs)


def _rttm(n: int) -> PolytopalMesh:
    nv = n + 1

    def vid(i, j, k):
        return (k * nv + j) * nv + i

    xs = np.linspace(0.0, 1.0, nv)
    verts = np.array([[xs[i], xs[j], xs[k]]
                      for k in range(nv) for j in range(nv) for i in range(nv)])
    face_ids: dict[frozenset, int] = {}
    faces: list[list[int]] = []
    cells: list[list[int]] = []

    def face_of(loop):
        key = frozenset(loop)
        if key not in face_ids:
            face_ids[key] = len(faces)
            faces.append(list(loop))
        return face_ids[key]

    axes = np.eye(3, dtype=int)
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array([i, j, k])
                for perm in itertools.permutations(range(3)):
                    path = [base]
                    for ax in perm:
                        path.append(path[-1] + axes[ax])
                    ids = [vid(*q) for q in path]
                    tris = [[ids[0], ids[1], ids[2]], [ids[0], ids[1], ids[3]],
                            [ids[0], ids[2], ids[3]], [ids[1], ids[2], ids[3]]]
                    cells.append([face_of(t) for t in tris])
    return _compact_mesh_3d(verts, faces, cells)


# ------------------------------------------------------------------ hexagonal

def _polygon_convex_ccw(verts, rel_tol=1e-10) -> bool:
    v = np.asarray(verts, dtype=float)
    m = v.shape[0]
    x, y = v[:, 0], v[:, 1]
    area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if area <= 0:
        return False
    d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
    h = float(np.sqrt(d2.max()))
    if area <= 1e-13 * h * h:
        return False
    tol = rel_tol * h
    for i in range(m):
        p, q = v[i], v[(i + 1) % m]
        t = q - p
        ln = np.hypot(t[0], t[1])
        if ln == 0.0:
            return False
        nrm = np.array([t[1], -t[0]]) / ln
        if float(((v - p) @ nrm).max()) > tol:
            return False
    return True


def _clip_wall(pts, keys, axis, value, keep_less):
    """Clip a convex loop against an axis-aligned wall.

    Intersections are computed with the segment endpoints in a canonical
    order, so the two cells sharing an edge produce bit-identical points.
    """
    out_p, out_k = [], []
    m = len(pts)
    for i in range(m):
        a, ka = pts[i], keys[i]
        b, kb = pts[(i + 1) % m], keys[(i + 1) % m]
        fa, fb = a[axis] - value, b[axis] - value
        ina = fa <= 0.0 if keep_less else fa >= 0.0
        inb = fb <= 0.0 if keep_less else fb >= 0.0
        if ina:
            out_p.append(a)
            out_k.append(ka)
        # an endpoint exactly on the wall already is the intersection point
        if ina != inb and fa != 0.0 and fb != 0.0:
            (p, kp), (q, kq) = sorted(((a, ka), (b, kb)), key=lambda t: repr(t[1]))
            t = (value - p[axis]) / (q[axis] - p[axis])
            oth = 1 - axis
            pt = [0.0, 0.0]
            pt[axis] = value
            pt[oth] = p[oth] + t * (q[oth] - p[oth])
            out_p.append(tuple(pt))
            out_k.append(("clip", axis, value, kp, kq))
    return out_p, out_k


def _hdhm(nx: int, seed: int) -> PolytopalMesh:
    # flat-top hexagons on a lattice with units ux = R/2, uy = sqrt(3) R / 2
    radius = 1.0 / (1.5 * nx)
    ux, uy = radius / 2.0, np.sqrt(3.0) * radius / 2.0
    offsets = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)]
    ny = int(np.ceil(1.0 / (2 * uy))) + 1

    vid_of: dict = {}
    coords: list[tuple[float, float]] = []
    loops: list[list[int]] = []

    def register(point, key):
        if key not in vid_of:
            vid_of[key] = len(coords)
            coords.append(point)
        return vid_of[key]

    for c in range(-1, nx + 1):
        for r in range(-1, ny + 1):
            ci, cj = 3 * c, 2 * r + (c % 2)
            pts = [((ci + dx) * ux, (cj + dy) * uy) for dx, dy in offsets]
            keys = [("lat", ci + dx, cj + dy) for dx, dy in offsets]
            for axis, value, keep_less in ((0, 0.0, False), (0, 1.0, True),
                                           (1, 0.0, False), (1, 1.0, True)):
                pts, keys = _clip_wall(pts, keys, axis, value, keep_less)
                if len(pts) < 3:
                    break
            if len(pts) < 3:
                continue
            arr = np.array(pts)
            area = 0.5 * float(np.sum(arr[:, 0] * np.roll(arr[:, 1], -1)
                                      - np.roll(arr[:, 0], -1) * arr[:, 1]))
            if abs(area) < 1e-6 * radius ** 2:
                continue
            loops.append([register(p, k) for p, k in zip(pts, keys)])

    verts = np.array(coords)
    # incident cells and minimum incident edge per vertex, from the unperturbed mesh
    incident: dict[int, list[int]] = {}
    min_edge = np.full(len(coords), np.inf)
    for ci, loop in enumerate(loops):
        m = len(loop)
        for i in range(m):
            v0, v1 = loop[i], loop[(i + 1) % m]
            ln = float(np.hypot(*(verts[v1] - verts[v0])))
            min_edge[v0] = min(min_edge[v0], ln)
            min_edge[v1] = min(min_edge[v1], ln)
            incident.setdefault(v0, []).append(ci)

    on_wall = ((np.abs(verts[:, 0]) < 1e-12) | (np.abs(verts[:, 0] - 1) < 1e-12)
               | (np.abs(verts[:, 1]) < 1e-12) | (np.abs(verts[:, 1] - 1) < 1e-12))
    rng = np.random.default_rng(seed)
    for v in range(len(coords)):
        if on_wall[v]:
            continue
        cap = 0.45 * min_edge[v]
        for _ in range(20):
            theta = rng.uniform(0.0, 2 * np.pi)
            mag = rng.uniform(0.0, cap)
            cand = verts[v] + mag * np.array([np.cos(theta), np.sin(theta)])
            old = verts[v].copy()
            verts[v] = cand
            if all(_polygon_convex_ccw(verts[loops[ci]]) for ci in incident[v]):
                break
            verts[v] = old
    return mesh_from_polygons(verts, loops)


# --------------------------------------------------------------------- Voronoi

def _gpgm(n_seeds: int, n_splits: int, seed: int) -> PolytopalMesh:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.02, 0.98, size=(n_seeds, 2))
    mirrored = np.vstack([
        pts,
        np.column_stack([-pts[:, 0], pts[:, 1]]),
        np.column_stack([2.0 - pts[:, 0], pts[:, 1]]),
        np.column_stack([pts[:, 0], -pts[:, 1]]),
        np.column_stack([pts[:, 0], 2.0 - pts[:, 1]]),
    ])
    vor = Voronoi(mirrored)
    coords = vor.vertices.copy()
    for w, val in ((0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)):
        snap = np.abs(coords[:, w] - val) < 1e-9
        coords[snap, w] = val

    used: dict[int, int] = {}
    verts: list[np.ndarray] = []
    loops: list[list[int]] = []
    for i in range(n_seeds):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or not region:
            raise SpecError("unbounded Voronoi region; mirroring failed")
        ang = np.arctan2(coords[region][:, 1] - pts[i, 1],
                         coords[region][:, 0] - pts[i, 0])
        ordered = [region[j] for j in np.argsort(ang)]
        loop = []
        for v in ordered:
            if v not in used:
                used[v] = len(verts)
                verts.append(coords[v])
            loop.append(used[v])
        loops.append(loop)

    verts = [np.asarray(v) for v in verts]
    _chord_split(verts, loops, n_splits, rng)
    return mesh_from_polygons(np.array(verts), loops)


def _chord_split(verts: list, loops: list, n_splits: int, rng) -> None:
    """Split cells by interior chords; neighbours get hanging flat vertices."""
    done = 0
    candidates = rng.permutation(len(loops))
    touched: set[int] = set()
    for ci in candidates:
        if done >= n_splits:
            break
        loop = loops[ci]
        m = len(loop)
        if m < 4 or ci in touched:
            continue
        i = int(rng.integers(0, m))
        j = (i + m // 2) % m
        if j in (i, (i + 1) % m, (i - 1) % m):
            continue
        t1 = rng.uniform(0.35, 0.65)
        t2 = rng.uniform(0.35, 0.65)
        a0, a1 = verts[loop[i]], verts[loop[(i + 1) % m]]
        b0, b1 = verts[loop[j]], verts[loop[(j + 1) % m]]
        p = a0 + t1 * (a1 - a0)
        q = b0 + t2 * (b1 - b0)
        pid, qid = len(verts), len(verts) + 1
        verts.extend([p, q])

        # the two halves, walking the loop between the cut points
        half1 = [pid] + [loop[(i + 1 + s) % m] for s in range((j - i) % m)] + [qid]
        half2 = [qid] + [loop[(j + 1 + s) % m] for s in range((i - j) % m)] + [pid]
        if not (_polygon_convex_ccw(np.array([verts[v] for v in half1]))
                and _polygon_convex_ccw(np.array([verts[v] for v in half2]))):
            del verts[-2:]
            continue
        # insert hanging vertices into the neighbours sharing the cut edges
        for (u, v, new) in ((loop[i], loop[(i + 1) % m], pid),
                            (loop[j], loop[(j + 1) % m], qid)):
            for cj, other in enumerate(loops):
                if cj == ci:
                    continue
                mm = len(other)
                for s in range(mm):
                    if other[s] == v and other[(s + 1) % mm] == u:
                        loops[cj] = other[: s + 1] + [new] + other[s + 1:]
                        touched.add(cj)
                        break
                else:
                    continue
                break
        loops[ci] = half1
        loops.append(half2)
        touched.add(ci)
        touched.add(len(loops) - 1)
        done += 1


# ---------------------------------------------------------------------- octree

def _gpdm(n: int, refine_fraction: float, seed: int) -> PolytopalMesh:
    if not 0.0 <= refine_fraction <= 1.0:
        raise SpecError("refine_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    # jittered coarse planes for anisotropic boxes
    levels = []
    for _ in range(3):
        inner = np.sort(rng.uniform(0.08, 0.92, size=n - 1))
        while n > 1 and np.diff(np.concatenate([[0.0], inner, [1.0]])).min() < 0.04:
            inner = np.sort(rng.uniform(0.08, 0.92, size=n - 1))
        levels.append(np.concatenate([[0.0], inner, [1.0]]))
    # fine lattice: coarse planes plus their midpoints
    fine = []
    for lv in levels:
        mids = 0.5 * (lv[:-1] + lv[1:])
        f = np.empty(2 * n + 1)
        f[0::2] = lv
        f[1::2] = mids
        fine.append(f)

    n_ref = int(round(refine_fraction * n ** 3))
    ref_ids = rng.choice(n ** 3, size=n_ref, replace=False)
    refined = np.zeros((n, n, n), dtype=bool)
    for cid in ref_ids:
        refined[np.unravel_index(int(cid), (n, n, n))] = True

    vid_of: dict[tuple, int] = {}
    coords: list[list[float]] = []

    def vert(i, j, k):
        key = (i, j, k)
        if key not in vid_of:
            vid_of[key] = len(coords)
            coords.append([fine[0][i], fine[1][j], fine[2][k]])
        return vid_of[key]

    def vert_exists(i, j, k):
        return (i, j, k) in vid_of

    # register corners: fine lattice for refined cells, coarse corners always
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if refined[i, j, k]:
                    for a in range(3):
                        for b in range(3):
                            for c in range(3):
                                vert(2 * i + a, 2 * j + b, 2 * k + c)
    for i in range(n + 1):
        for j in range(n + 1):
            for k in range(n + 1):
                vert(2 * i, 2 * j, 2 * k)

    face_ids: dict[frozenset, int] = {}
    faces: list[list[int]] = []
    cells: list[list[int]] = []

    def face_of(loop):
        key = frozenset(loop)
        if key not in face_ids:
            face_ids[key] = len(faces)
            faces.append(list(loop))
        return face_ids[key]

    def quad_loop(axis, lvl, u0, v0, du, dv, insert_midpoints):
        """Rectangle loop on the plane ``axis = lvl`` in fine-lattice indices."""
        corners = [(u0, v0), (u0 + du, v0), (u0 + du, v0 + dv), (u0, v0 + dv)]
        loop = []
        m = len(corners)
        for s in range(m):
            loop.append(corners[s])
            if insert_midpoints:
                a, b = corners[s], corners[(s + 1) % m]
                mid = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
                key = _uv_to_ijk(axis, lvl, mid)
                if vert_exists(*key):
                    loop.append(mid)
        return [vert(*_uv_to_ijk(axis, lvl, uv)) for uv in loop]

    def _uv_to_ijk(axis, lvl, uv):
        if axis == 0:
            return (lvl, uv[0], uv[1])
        if axis == 1:
            return (uv[0], lvl, uv[1])
        return (uv[0], uv[1], lvl)

    def neighbour_refined(axis, side, i, j, k):
        d = [i, j, k]
        d[axis] += side
        if not 0 <= d[axis] < n:
            return False
        return bool(refined[d[0], d[1], d[2]])

    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = (2 * i, 2 * j, 2 * k)
                if refined[i, j, k]:
                    for a in (0, 1):
                        for b in (0, 1):
                            for c in (0, 1):
                                o = (base[0] + a, base[1] + b, base[2] + c)
                                sides = []
                                for axis in range(3):
                                    uv = tuple(o[d] for d in range(3) if d != axis)
                                    for side in (0, 1):
                                        sides.append(quad_loop(
                                            axis, o[axis] + side, uv[0], uv[1], 1, 1, False))
                                cells.append([face_of(s) for s in sides])
                else:
                    sides = []
                    for axis in range(3):
                        uv = tuple(base[d] for d in range(3) if d != axis)
                        for side in (0, 1):
                            lvl = base[axis] + 2 * side
                            if neighbour_refined(axis, -1 if side == 0 else 1, i, j, k):
                                for du in (0, 1):
                                    for dv in (0, 1):
                                        sides.append(quad_loop(
                                            axis, lvl, uv[0] + du, uv[1] + dv, 1, 1, False))
                            else:
                                sides.append(quad_loop(axis, lvl, uv[0], uv[1], 2, 2, True))
                    cells.append([face_of(s) for s in sides])
    return _compact_mesh_3d(np.array(coords), faces, cells)
