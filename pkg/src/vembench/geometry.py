"""Exact geometry of convex polygons and polyhedra.

Measures and centroids come from closed-form shoelace/divergence formulas;
second-moment (mass) matrices from degree-2-exact simplex rules on centroid
fans, so every quantity is exact for the polytopes handled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateElement, NonPlanarFace
from .quadrature import tetrahedron_rule

#: Relative measure threshold below which an element counts as degenerate.
DEGENERATE_REL_TOL = 1e-14

#: Relative tolerance for the planarity of 3D face loops.
PLANARITY_REL_TOL = 1e-12


@dataclass(frozen=True)
class Polygon:
    """Vertex loop of a convex polygon; orientation is recorded, not forced."""

    vertices: np.ndarray  # (m, 2) in loop order

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def orientation(self) -> float:
        return 1.0 if polygon_area_centroid(self.vertices)[0] >= 0.0 else -1.0


@dataclass(frozen=True)
class Polyhedron:
    """Convex polyhedron as vertex coordinates plus face loops.

    ``face_signs`` records, per face, whether the stored loop is outward (+1)
    or inward (-1); it is computed geometrically, which is unambiguous for
    convex cells.
    """

    vertices: np.ndarray  # (m, 3)
    faces: tuple  # tuple of int arrays, loops into `vertices`
    face_signs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.face_signs is None:
            interior = self.vertices.mean(axis=0)
            signs = np.empty(len(self.faces))
            for i, loop in enumerate(self.faces):
                pts = self.vertices[np.asarray(loop, dtype=int)]
                n = newell_normal(pts)
                signs[i] = 1.0 if np.dot(n, pts.mean(axis=0) - interior) >= 0.0 else -1.0
            object.__setattr__(self, "face_signs", signs)

    def outward_loops(self) -> list[np.ndarray]:
        out = []
        for loop, s in zip(self.faces, self.face_signs):
            arr = np.asarray(loop, dtype=int)
            out.append(arr if s > 0 else arr[::-1])
        return out


@dataclass(frozen=True)
class ElementGeometry:
    """Exact geometric quantities of one polytope."""

    dim: int
    measure: float
    centroid: np.ndarray
    diameter: float
    mass_matrix: np.ndarray      # H = int (x-c)(x-c)^T
    inertia_tensor: np.ndarray   # T = trace(H) I - H
    anisotropic_ratio: float
    edge_ratio: float | None = None
    face_ratio: float | None = None


def polygon_area_centroid(vertices) -> tuple[float, np.ndarray]:
    """Signed area and centroid of a polygon loop (shoelace)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, v.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def newell_normal(points3d) -> np.ndarray:
    """Non-normalized Newell normal of a 3D vertex loop."""
    p = np.asarray(points3d, dtype=float)
    q = np.roll(p, -1, axis=0)
    n = np.array([
        np.sum((p[:, 1] - q[:, 1]) * (p[:, 2] + q[:, 2])),
        np.sum((p[:, 2] - q[:, 2]) * (p[:, 0] + q[:, 0])),
        np.sum((p[:, 0] - q[:, 0]) * (p[:, 1] + q[:, 1])),
    ])
    return 0.5 * n


def diameter_of(points) -> float:
    """Largest pairwise vertex distance (O(n^2); element loops are small)."""
    p = np.asarray(points, dtype=float)
    d2 = np.sum((p[:, None, :] - p[None, :, :]) ** 2, axis=-1)
    return float(np.sqrt(d2.max()))


def polyhedron_volume_centroid(vertices, face_loops) -> tuple[float, np.ndarray]:
    """Volume and centroid from signed tetrahedral fans off the origin.

    ``face_loops`` must be outward oriented.
    """
    verts = np.asarray(vertices, dtype=float)
    vol = 0.0
    mom = np.zeros(3)
    for loop in face_loops:
        fverts = verts[np.asarray(loop, dtype=int)]
        fc = fverts.mean(axis=0)
        m = fverts.shape[0]
        for i in range(m):
            a, b = fverts[i], fverts[(i + 1) % m]
            v6 = float(np.linalg.det(np.stack([fc, a, b])))
            vol += v6 / 6.0
            mom += v6 / 6.0 * (fc + a + b) / 4.0
    if vol == 0.0:
        return 0.0, verts.mean(axis=0)
    return float(vol), mom / vol


def _polygon_mass_matrix(vertices, centroid) -> np.ndarray:
    """H = int_P (x-c)(x-c)^T via degree-2 midpoint rules on a centroid fan."""
    v = np.asarray(vertices, dtype=float) - centroid
    m = v.shape[0]
    h = np.zeros((2, 2))
    for i in range(m):
        a, b = v[i], v[(i + 1) % m]
        s = 0.5 * (a[0] * b[1] - a[1] * b[0])  # signed, fan apex at origin
        mids = np.array([0.5 * a, 0.5 * b, 0.5 * (a + b)])
        h += s / 3.0 * mids.T @ mids
    tot = _polygon_signed_area(v)
    return h if tot >= 0 else -h


def _polygon_signed_area(v) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polyhedron_mass_matrix(vertices, face_loops_outward, centroid) -> np.ndarray:
    """H via a degree-2-exact rule on the centroid/face-centroid tet fan."""
    verts = np.asarray(vertices, dtype=float)
    h = np.zeros((3, 3))
    for loop in face_loops_outward:
        fverts = verts[np.asarray(loop, dtype=int)]
        fc = fverts.mean(axis=0)
        m = fverts.shape[0]
        for i in range(m):
            rule = tetrahedron_rule(centroid, fc, fverts[i], fverts[(i + 1) % m], 2)
            if rule.weights.sum() == 0.0:
                continue
            d = rule.points - centroid
            h += (d * rule.weights[:, None]).T @ d
    return h


def inertia_from_mass(h: np.ndarray) -> np.ndarray:
    """Inertia tensor from the mass matrix: T = trace(H) I - H."""
    return np.trace(h) * np.eye(h.shape[0]) - h


def mass_eigen_ratio(h: np.ndarray) -> float:
    """Anisotropy measure: extreme eigenvalue ratio of the mass matrix."""
    ev = np.linalg.eigvalsh(h)
    if ev[0] <= 0.0:
        return float("inf")
    return float(ev[-1] / ev[0])


def face_plane_frame(points3d) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane frame (origin, 3x2 axes) of a planar loop.

    The origin is the area centroid; the first axis is set by the caller's
    convention through ``first_axis`` handling in mesh code.  Here the first
    axis simply follows the first loop edge.
    """
    pts = np.asarray(points3d, dtype=float)
    n = newell_normal(pts)
    nn = np.linalg.norm(n)
    if nn == 0.0:
        raise DegenerateElement("face loop has zero area")
    n = n / nn
    e1 = pts[1] - pts[0]
    e1 = e1 - np.dot(e1, n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    r = np.stack([e1, e2], axis=1)
    uv = (pts - pts[0]) @ r
    area, c2 = polygon_area_centroid(uv)
    origin = pts[0] + r @ c2
    return origin, r


def check_planarity(points3d, tol_abs: float) -> float:
    """Largest out-of-plane deviation of a loop; raises if above tol_abs."""
    pts = np.asarray(points3d, dtype=float)
    n = newell_normal(pts)
    nn = np.linalg.norm(n)
    if nn == 0.0:
        raise DegenerateElement("face loop has zero area")
    n = n / nn
    dev = float(np.max(np.abs((pts - pts.mean(axis=0)) @ n)))
    if dev > tol_abs:
        raise NonPlanarFace(f"face deviates from plane by {dev:.3e} > {tol_abs:.3e}")
    return dev


def compute_geometry(poly) -> ElementGeometry:
    """Measure, centroid, diameter, second moments and quality ratios.

    Accepts a :class:`Polygon` or :class:`Polyhedron`.
    """
    if isinstance(poly, Polygon):
        return _compute_geometry_2d(poly.vertices)
    if isinstance(poly, Polyhedron):
        return _compute_geometry_3d(poly)
    raise TypeError(f"unsupported polytope type {type(poly)!r}")


def _compute_geometry_2d(vertices) -> ElementGeometry:
    verts = np.asarray(vertices, dtype=float)
    area, centroid = polygon_area_centroid(verts)
    diam = diameter_of(verts)
    if abs(area) <= DEGENERATE_REL_TOL * diam ** 2:
        raise DegenerateElement(f"polygon area {area:.3e} below tolerance")
    h = _polygon_mass_matrix(verts, centroid)
    edges = np.linalg.norm(np.roll(verts, -1, axis=0) - verts, axis=1)
    return ElementGeometry(
        dim=2, measure=abs(area), centroid=centroid, diameter=diam,
        mass_matrix=h, inertia_tensor=inertia_from_mass(h),
        anisotropic_ratio=mass_eigen_ratio(h),
        edge_ratio=float(edges.max() / edges.min()) if edges.min() > 0 else float("inf"),
    )


def _compute_geometry_3d(poly: Polyhedron) -> ElementGeometry:
    verts = poly.vertices
    diam = diameter_of(verts)
    loops = poly.outward_loops()
    for loop in poly.faces:
        check_planarity(verts[np.asarray(loop, dtype=int)], PLANARITY_REL_TOL * diam)
    vol, centroid = polyhedron_volume_centroid(verts, loops)
    if vol <= DEGENERATE_REL_TOL * diam ** 3:
        raise DegenerateElement(f"polyhedron volume {vol:.3e} below tolerance")
    h = _polyhedron_mass_matrix(verts, loops, centroid)
    areas = []
    for loop in loops:
        pts = verts[np.asarray(loop, dtype=int)]
        areas.append(float(np.linalg.norm(newell_normal(pts))))
    areas = np.asarray(areas)
    return ElementGeometry(
        dim=3, measure=vol, centroid=centroid, diameter=diam,
        mass_matrix=h, inertia_tensor=inertia_from_mass(h),
        anisotropic_ratio=mass_eigen_ratio(h),
        face_ratio=float(areas.max() / areas.min()) if areas.min() > 0 else float("inf"),
    )
