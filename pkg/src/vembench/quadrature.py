"""Numerical integration on segments, simplices, polygons and polyhedra.

All rules are exact for polynomials up to their declared order.  Polytope
rules are built by fan sub-triangulation from the centroid (2D) or by
centroid/face-centroid tetrahedral fans (3D); simplex rules use collapsed
Gauss-Jacobi products, so arbitrary orders are available.

The module also provides the Gauss-Lobatto nodes used to place edge degrees
of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi, roots_legendre

from .errors import DegenerateElement


@dataclass(frozen=True)
class QuadratureRule:
    """Points (n, d) and positive weights (n,) summing to the region measure."""

    points: np.ndarray
    weights: np.ndarray
    order: int

    def __len__(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract sampled integrand values (last axis = points) with weights."""
        return np.asarray(values) @ self.weights


def _npoints(order: int) -> int:
    return max(1, (order + 2) // 2)


@lru_cache(maxsize=None)
def _gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def _jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights for int_0^1 (1-t)^alpha f(t) dt
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def segment_gauss(order: int) -> QuadratureRule:
    """Gauss-Legendre rule on the reference segment [0, 1].

    Parameters
    ----------
    order : int
        Highest polynomial degree integrated exactly.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    x, w = _gauss01(_npoints(order))
    return QuadratureRule(x.reshape(-1, 1), w.copy(), order)


def segment_rule(p0, p1, order: int) -> QuadratureRule:
    """Gauss rule along the straight segment p0 -> p1 in ambient coordinates."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    x, w = _gauss01(_npoints(order))
    pts = p0[None, :] + x[:, None] * (p1 - p0)[None, :]
    return QuadratureRule(pts, w * float(np.linalg.norm(p1 - p0)), order)


def gauss_lobatto_params(n_nodes: int) -> np.ndarray:
    """The n_nodes Gauss-Lobatto points on [0, 1], endpoints included."""
    if n_nodes < 2:
        raise ValueError("Gauss-Lobatto needs at least two nodes")
    if n_nodes == 2:
        interior = np.empty(0)
    else:
        c = np.zeros(n_nodes)
        c[n_nodes - 1] = 1.0
        interior = np.sort(npleg.legroots(npleg.legder(c)))
    return np.concatenate(([0.0], (interior + 1.0) / 2.0, [1.0]))


def edge_gauss_lobatto(k: int) -> np.ndarray:
    """The k+1 Gauss-Lobatto nodes on [0, 1] carrying edge DOFs of degree k."""
    return gauss_lobatto_params(k + 1)


@lru_cache(maxsize=None)
def _tri_reference(n: int):
    gx, gw = _gauss01(n)
    jx, jw = _jacobi01(n, 1)
    xi, eta = np.meshgrid(gx, jx, indexing="ij")
    wgt = np.outer(gw, jw).ravel()
    a = (xi * (1.0 - eta)).ravel()
    b = eta.ravel()
    return a, b, wgt


@lru_cache(maxsize=None)
def _tet_reference(n: int):
    gx, gw = _gauss01(n)
    jx1, jw1 = _jacobi01(n, 1)
    jx2, jw2 = _jacobi01(n, 2)
    xi, eta, zta = np.meshgrid(gx, jx1, jx2, indexing="ij")
    wgt = (gw[:, None, None] * jw1[None, :, None] * jw2[None, None, :]).ravel()
    a = (xi * (1.0 - eta) * (1.0 - zta)).ravel()
    b = (eta * (1.0 - zta)).ravel()
    c = zta.ravel()
    return a, b, c, wgt


def _tri_pw(v0, v1, v2, order: int):
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    a, b, wgt = _tri_reference(_npoints(order))
    pts = v0[None, :] + np.outer(a, v1 - v0) + np.outer(b, v2 - v0)
    e1, e2 = v1 - v0, v2 - v0
    if v0.shape[0] == 2:
        area2 = abs(e1[0] * e2[1] - e1[1] * e2[0])
    else:
        area2 = np.linalg.norm(np.cross(e1, e2))
    return pts, wgt * area2


def _tet_pw(v0, v1, v2, v3, order: int):
    vs = [np.asarray(v, dtype=float) for v in (v0, v1, v2, v3)]
    a, b, c, wgt = _tet_reference(_npoints(order))
    e1, e2, e3 = vs[1] - vs[0], vs[2] - vs[0], vs[3] - vs[0]
    pts = vs[0][None, :] + np.outer(a, e1) + np.outer(b, e2) + np.outer(c, e3)
    vol6 = abs(float(np.linalg.det(np.stack([e1, e2, e3]))))
    return pts, wgt * vol6


def triangle_rule(v0, v1, v2, order: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi product rule on a (possibly 3D-embedded) triangle."""
    return QuadratureRule(*_tri_pw(v0, v1, v2, order), order)


def tetrahedron_rule(v0, v1, v2, v3, order: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi product rule on a tetrahedron."""
    return QuadratureRule(*_tet_pw(v0, v1, v2, v3, order), order)


def polygon_rule(vertices, order: int) -> QuadratureRule:
    """Rule on a convex polygon, exact to ``order``.

    The polygon is fan-triangulated from its area centroid; vertex loop
    orientation may be either way.
    """
    from .geometry import polygon_area_centroid  # local import, no cycle at module load

    verts = np.asarray(vertices, dtype=float)
    area, centroid = polygon_area_centroid(verts)
    if abs(area) <= 0.0:
        raise DegenerateElement("polygon has zero area")
    m = verts.shape[0]
    if m == 3:
        return QuadratureRule(*_tri_pw(verts[0], verts[1], verts[2], order), order)
    pts, wts = [], []
    for i in range(m):
        p, w = _tri_pw(centroid, verts[i], verts[(i + 1) % m], order)
        if w.sum() <= 0.0:
            continue
        pts.append(p)
        wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), order)


def polyhedron_rule(vertices, face_loops, order: int) -> QuadratureRule:
    """Rule on a convex polyhedron given by outward-oriented face loops.

    Tetrahedral fan: cell centroid -> face centroid -> face edge.
    """
    from .geometry import polyhedron_volume_centroid

    verts = np.asarray(vertices, dtype=float)
    vol, centroid = polyhedron_volume_centroid(verts, face_loops)
    if vol <= 0.0:
        raise DegenerateElement("polyhedron has non-positive volume")
    if verts.shape[0] == 4 and len(face_loops) == 4:
        return QuadratureRule(*_tet_pw(verts[0], verts[1], verts[2], verts[3], order),
                              order)
    pts, wts = [], []
    for loop in face_loops:
        fverts = verts[np.asarray(loop, dtype=int)]
        m = fverts.shape[0]
        if m == 3:
            fans = [(fverts[0], fverts[1], fverts[2])]
        else:
            fc = fverts.mean(axis=0)
            fans = [(fc, fverts[i], fverts[(i + 1) % m]) for i in range(m)]
        for a, b, c in fans:
            p, w = _tet_pw(centroid, a, b, c, order)
            if w.sum() <= 0.0:
                continue
            pts.append(p)
            wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), order)
