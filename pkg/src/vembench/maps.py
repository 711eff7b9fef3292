"""Per-element affine maps sending polytopes to well-shaped counterparts.

The construction runs a three-stage chain: rescale by the element diameter,
apply the linear map built from the spectral decomposition of the rescaled
element's second-moment matrix, then rescale to unit diameter.  The composed
map F (mapped -> original coordinates) is stored with its inverse and
determinant cached.

Face maps in 3D are always derived from the original faces, inside a frame
that depends on the face data only, so the two cells sharing a face obtain
bit-identical maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMassMatrix
from .geometry import (Polygon, Polyhedron, compute_geometry, diameter_of)

#: Relative eigenvalue floor of the rescaled second-moment matrix.
SINGULAR_EIG_REL_TOL = 1e-14

#: Eigenvalue gap under which two eigenvalues count as repeated.
EIG_TIE_REL_TOL = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """x = translation + linear @ x_hat, with the inverse direction cached."""

    translation: np.ndarray
    linear: np.ndarray
    inverse: np.ndarray
    det_abs: float
    kind: str  # "identity" | "inertial"

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def apply(self, points_hat) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points_hat, dtype=float))
        return p @ self.linear.T + self.translation

    def pull(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (p - self.translation) @ self.inverse.T


def identity_map(dim: int) -> AffineMap:
    eye = np.eye(dim)
    return AffineMap(np.zeros(dim), eye, eye, 1.0, "identity")


def _ordered_eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition, eigenvalues descending, signs fixed.

    Each eigenvector's largest-magnitude component is made positive so the
    decomposition is reproducible; near-repeated eigenvalues keep the
    deterministic orthonormal basis the solver returns.
    """
    lam, q = np.linalg.eigh(h)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    q = q[:, order]
    for j in range(q.shape[1]):
        i = int(np.argmax(np.abs(q[:, j])))
        if q[i, j] < 0:
            q[:, j] = -q[:, j]
    return lam, q


def _inertial_linear(poly):
    """Linear part of the chain for one polytope.

    Returns (F, F_inv, |det F|, geometry) with F mapping the final
    well-shaped polytope back to the original one.
    """
    geo = compute_geometry(poly)
    d = geo.dim
    h_orig = geo.diameter
    # stage 1: rescale so eigenvalues of the moment matrix are O(1)
    h_tilde = geo.mass_matrix / h_orig ** (d + 2)
    lam, q = _ordered_eigh(h_tilde)
    if lam[-1] < SINGULAR_EIG_REL_TOL * lam[0]:
        raise SingularMassMatrix(
            f"rescaled moment matrix eigenvalues {lam} are numerically singular")
    # stage 2: equalize second moments
    b = np.sqrt(lam[0]) * (q / np.sqrt(lam)).T
    b_inv = (q * np.sqrt(lam)) / np.sqrt(lam[0])
    # stage 3: rescale the mapped polytope to unit diameter
    verts = poly.vertices if isinstance(poly, (Polygon, Polyhedron)) else np.asarray(poly)
    centroid_tilde = geo.centroid / h_orig
    mapped = (verts / h_orig - centroid_tilde) @ b.T
    h_breve = diameter_of(mapped)
    lin = h_orig * h_breve * b_inv
    lin_inv = (b / (h_orig * h_breve))
    det_abs = abs(float(np.linalg.det(lin)))
    return lin, lin_inv, det_abs, geo


def _mapped_polytope(poly, amap: AffineMap):
    if isinstance(poly, Polygon):
        return Polygon(amap.pull(poly.vertices))
    return Polyhedron(amap.pull(poly.vertices), poly.faces)


def build_inertial_map(poly) -> tuple[AffineMap, object]:
    """Inertial map of a polygon or polyhedron, plus the mapped polytope.

    The mapped polytope has centroid at the origin, unit diameter, and a
    second-moment matrix proportional to the identity.
    """
    lin, lin_inv, det_abs, geo = _inertial_linear(poly)
    amap = AffineMap(geo.centroid.copy(), lin, lin_inv, det_abs, "inertial")
    return amap, _mapped_polytope(poly, amap)


def build_cell_map(poly, inertial: bool) -> tuple[AffineMap, object]:
    if inertial:
        return build_inertial_map(poly)
    dim = poly.vertices.shape[1]
    amap = identity_map(dim)
    return amap, _mapped_polytope(poly, amap)


@dataclass(frozen=True)
class ApproachConfig:
    """Which basis family to use, and which 3D remapping variant.

    basis_kind is one of "mon", "ortho", "inrt"; the variant ("b", "f", "bf")
    is meaningful only for the inertial family in 3D.
    """

    basis_kind: str
    variant: str | None = None

    def __post_init__(self):
        if self.basis_kind not in ("mon", "ortho", "inrt"):
            raise ValueError(f"unknown basis kind {self.basis_kind!r}")
        if self.variant is not None and self.variant not in ("b", "f", "bf"):
            raise ValueError(f"unknown 3D variant {self.variant!r}")
        if self.variant is not None and self.basis_kind != "inrt":
            raise ValueError("variant applies to the inertial family only")

    @classmethod
    def parse(cls, label: str) -> "ApproachConfig":
        s = label.strip().lower()
        if s in ("mon", "ortho", "inrt"):
            return cls(s)
        if s.startswith("inrt-"):
            return cls("inrt", s.split("-", 1)[1])
        raise ValueError(f"unknown approach {label!r}")

    @property
    def label(self) -> str:
        if self.variant:
            return f"inrt-{self.variant}"
        return self.basis_kind

    def maps_cell(self, dim: int) -> bool:
        if self.basis_kind != "inrt":
            return False
        if dim == 2:
            return True
        return self.variant in ("b", "bf")

    def maps_faces(self) -> bool:
        return self.basis_kind == "inrt" and self.variant in ("f", "bf")

    def validate_for_dim(self, dim: int):
        if dim == 3 and self.basis_kind == "inrt" and self.variant is None:
            raise ValueError("3D inertial approach needs a variant: inrt-b / inrt-f / inrt-bf")
        if dim == 2 and self.variant is not None:
            raise ValueError("2D inertial approach takes no variant")


def build_face_map(mesh, fid: int) -> tuple[AffineMap, Polygon]:
    """In-plane inertial map of a 3D face and the mapped face polygon.

    Built from the face geometry alone (canonical frame, stored loop), never
    from an owning cell's map, so both neighbours derive identical maps.
    """
    poly2d, _, _ = mesh.face_polygon2d(fid)
    return build_inertial_map(poly2d)


def select_maps(mesh, ci: int, config: ApproachConfig):
    """(cell map, per-face maps) for one element under the given approach.

    Mon/Ortho get identity maps throughout; the inertial variants remap the
    bulk, the faces, or both. Face maps always come from the original faces.
    """
    config.validate_for_dim(mesh.dimension)
    if not config.maps_cell(mesh.dimension):
        cell_map = identity_map(mesh.dimension)
    elif mesh.dimension == 2:
        cell_map, _ = build_inertial_map(mesh.cell_polygon(ci))
    else:
        poly, _ = mesh.cell_polyhedron(ci)
        cell_map, _ = build_inertial_map(poly)
    face_maps = {}
    if mesh.dimension == 3:
        for fid in mesh.cells_faces[ci]:
            if config.maps_faces():
                face_maps[int(fid)] = build_face_map(mesh, int(fid))[0]
            else:
                face_maps[int(fid)] = identity_map(2)
    return cell_map, face_maps
