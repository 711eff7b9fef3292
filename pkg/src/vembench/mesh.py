"""Polytopal mesh data model, validation, and JSON file I/O.

A mesh is immutable after construction: vertices, canonical edges
(lower vertex index first), faces (3D vertex loops stored once and shared),
and cells.  2D cells are CCW vertex loops; 3D cells reference faces with an
orientation flag telling whether the stored loop is outward for that cell.

The file format is a single JSON document; ``save_mesh`` / ``load_mesh``
round-trip bit-identically on coordinates and exactly on topology.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateElement, ParseError, TopologyError
from .geometry import (Polygon, Polyhedron, compute_geometry, diameter_of,
                       newell_normal, polygon_area_centroid)

#: Half-space slack allowed when checking convexity, relative to the diameter.
CONVEXITY_REL_TOL = 1e-10


@dataclass
class PolytopalMesh:
    dimension: int
    vertices: np.ndarray                 # (N, d)
    edges: np.ndarray                    # (NE, 2), canonical a < b
    cells_vertices: list | None = None   # 2D: loops (CCW)
    faces: list | None = None            # 3D: vertex loops
    cells_faces: list | None = None      # 3D: face index lists
    cells_orient: list | None = None     # 3D: +-1 per cell face
    boundary_vertices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    boundary_edges: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    boundary_faces: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    # ------------------------------------------------------------------ setup
    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        self._edge_lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}
        if self.dimension == 2:
            self.cells_vertices = [np.asarray(c, dtype=int) for c in self.cells_vertices]
            self._cell_edges_2d = [
                np.array([self.edge_index(c[i], c[(i + 1) % len(c)]) for i in range(len(c))])
                for c in self.cells_vertices
            ]
        else:
            self.faces = [np.asarray(f, dtype=int) for f in self.faces]
            self.cells_faces = [np.asarray(c, dtype=int) for c in self.cells_faces]
            self.cells_orient = [np.asarray(o, dtype=int) for o in self.cells_orient]
            self._face_edges = [
                np.array([self.edge_index(f[i], f[(i + 1) % len(f)]) for i in range(len(f))])
                for f in self.faces
            ]
        self._incidence = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_faces(self) -> int:
        return len(self.faces) if self.faces is not None else 0

    @property
    def n_cells(self) -> int:
        if self.dimension == 2:
            return len(self.cells_vertices)
        return len(self.cells_faces)

    def edge_index(self, a: int, b: int) -> int:
        key = (min(int(a), int(b)), max(int(a), int(b)))
        try:
            return self._edge_lookup[key]
        except KeyError:
            raise TopologyError(f"edge {key} referenced by a cell/face is not in the edge list")

    # ------------------------------------------------------------- incidence
    def _build_incidence(self):
        if self._incidence is not None:
            return self._incidence
        edge_cells = [[] for _ in range(self.n_edges)]
        face_cells = [[] for _ in range(self.n_faces)]
        if self.dimension == 2:
            for ci, eids in enumerate(self._cell_edges_2d):
                for e in eids:
                    edge_cells[e].append(ci)
        else:
            for ci, fids in enumerate(self.cells_faces):
                for f in fids:
                    face_cells[f].append(ci)
            for fi, eids in enumerate(self._face_edges):
                for e in eids:
                    edge_cells[e].append(fi)  # 3D: edge -> faces
        self._incidence = (edge_cells, face_cells)
        return self._incidence

    def cells_of_face(self, f: int) -> list[int]:
        return self._build_incidence()[1][f]

    # ------------------------------------------------------------ polytopes
    def cell_polygon(self, ci: int) -> Polygon:
        loop = self.cells_vertices[ci]
        return Polygon(self.vertices[loop])

    def cell_vertex_ids(self, ci: int) -> np.ndarray:
        if self.dimension == 2:
            return self.cells_vertices[ci]
        ids = np.unique(np.concatenate([self.faces[f] for f in self.cells_faces[ci]]))
        return ids

    def cell_edge_ids(self, ci: int) -> np.ndarray:
        if self.dimension == 2:
            return self._cell_edges_2d[ci]
        eids = np.unique(np.concatenate([self._face_edges[f] for f in self.cells_faces[ci]]))
        return eids

    def cell_polyhedron(self, ci: int) -> tuple[Polyhedron, np.ndarray]:
        """Cell as a local polyhedron plus the global ids of its vertices."""
        vids = self.cell_vertex_ids(ci)
        local = {int(v): i for i, v in enumerate(vids)}
        loops = []
        for f, o in zip(self.cells_faces[ci], self.cells_orient[ci]):
            loop = self.faces[f] if o > 0 else self.faces[f][::-1]
            loops.append(np.array([local[int(v)] for v in loop]))
        return Polyhedron(self.vertices[vids], tuple(loops)), vids

    def face_frame(self, fi: int) -> tuple[np.ndarray, np.ndarray]:
        """Canonical in-plane frame of a face: (origin, 3x2 axes).

        Origin is the face area centroid; the first axis runs along the face
        edge with the lowest global edge id, from its lower to its higher
        vertex id.  The frame depends on the face data only, never on an
        owning cell, so both neighbours derive the same frame.
        """
        loop = self.faces[fi]
        pts = self.vertices[loop]
        n = newell_normal(pts)
        nn = np.linalg.norm(n)
        if nn == 0.0:
            raise DegenerateElement(f"face {fi} has zero area")
        n = n / nn
        e_min = int(self._face_edges[fi].min())
        a, b = self.edges[e_min]
        e1 = self.vertices[b] - self.vertices[a]
        e1 = e1 - np.dot(e1, n) * n
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        r = np.stack([e1, e2], axis=1)
        uv = (pts - pts[0]) @ r
        _, c2 = polygon_area_centroid(uv)
        origin = pts[0] + r @ c2
        return origin, r

    def face_polygon2d(self, fi: int) -> tuple[Polygon, np.ndarray, np.ndarray]:
        """In-plane polygon of a face, with its loop vertex ids and frame."""
        origin, r = self.face_frame(fi)
        loop = self.faces[fi]
        uv = (self.vertices[loop] - origin) @ r
        return Polygon(uv), loop, (origin, r)

    # ------------------------------------------------------------ validation
    def validate(self):
        """Check conformity, convexity, planarity and boundary marks."""
        edge_cells, face_cells = self._build_incidence()
        derived = set()
        if self.dimension == 2:
            for c in self.cells_vertices:
                for i in range(len(c)):
                    a, b = int(c[i]), int(c[(i + 1) % len(c)])
                    derived.add((min(a, b), max(a, b)))
        else:
            for f in self.faces:
                for i in range(len(f)):
                    a, b = int(f[i]), int(f[(i + 1) % len(f)])
                    derived.add((min(a, b), max(a, b)))
        stored = {tuple(e) for e in self.edges.tolist()}
        if stored != derived:
            raise TopologyError("edge list does not match edges derived from cells/faces")

        if self.dimension == 2:
            counts = np.array([len(c) for c in edge_cells])
            if counts.min() < 1 or counts.max() > 2:
                bad = int(np.argmax(counts))
                raise TopologyError(
                    f"edge {bad} is shared by {counts.max()} cells (must be 1 or 2)")
            bnd = np.flatnonzero(counts == 1)
        else:
            counts = np.array([len(c) for c in face_cells]) if face_cells else np.empty(0, int)
            if self.n_faces and (counts.min() < 1 or counts.max() > 2):
                bad = int(np.argmax(counts))
                raise TopologyError(
                    f"face {bad} is shared by {counts.max()} cells (must be 1 or 2)")
            bnd = np.flatnonzero(counts == 1)
            for fi in np.flatnonzero(counts == 2):
                (c1, c2) = face_cells[fi]
                o1 = int(self.cells_orient[c1][list(self.cells_faces[c1]).index(fi)])
                o2 = int(self.cells_orient[c2][list(self.cells_faces[c2]).index(fi)])
                if o1 == o2:
                    raise TopologyError(f"face {fi}: both cells claim the same orientation")

        marked = self.boundary_edges if self.dimension == 2 else self.boundary_faces
        if set(map(int, marked)) != set(map(int, bnd)):
            raise TopologyError("boundary markers do not match single-cell incidence")

        for ci in range(self.n_cells):
            self._validate_cell(ci)

    def _validate_cell(self, ci: int):
        if self.dimension == 2:
            poly = self.cell_polygon(ci)
            v = poly.vertices
            area, _ = polygon_area_centroid(v)
            h = diameter_of(v)
            if area <= 0:
                raise TopologyError(f"cell {ci}: vertex loop must be CCW with positive area")
            if area <= 1e-14 * h * h:
                raise DegenerateElement(f"cell {ci}: area {area:.3e} is degenerate")
            tol = CONVEXITY_REL_TOL * h
            m = len(v)
            for i in range(m):
                p, q = v[i], v[(i + 1) % m]
                t = q - p
                ln = float(np.hypot(t[0], t[1]))
                if ln == 0.0:
                    raise TopologyError(f"cell {ci} has a zero-length edge")
                nrm = np.array([t[1], -t[0]])  # outward for CCW
                d = (v - p) @ nrm / ln
                if d.max() > tol:
                    raise TopologyError(f"cell {ci} is not convex (violation {d.max():.3e})")
        else:
            poly, _ = self.cell_polyhedron(ci)
            h = diameter_of(poly.vertices)
            geo = compute_geometry(poly)  # raises on degeneracy / non-planarity
            tol = CONVEXITY_REL_TOL * h
            for loop, sign in zip(poly.faces, poly.face_signs):
                pts = poly.vertices[np.asarray(loop, dtype=int)]
                n = sign * newell_normal(pts)
                n = n / np.linalg.norm(n)
                d = (poly.vertices - pts.mean(axis=0)) @ n
                if d.max() > tol:
                    raise TopologyError(f"cell {ci} is not convex (violation {d.max():.3e})")
            # orientation flags must agree with geometry
            for f, o in zip(self.cells_faces[ci], self.cells_orient[ci]):
                pts = self.vertices[self.faces[f]]
                n = newell_normal(pts)
                out = np.dot(n, pts.mean(axis=0) - geo.centroid)
                if out * o <= 0:
                    raise TopologyError(f"cell {ci}: orientation flag of face {f} is wrong")

    # ------------------------------------------------------------------- I/O
    def to_dict(self) -> dict:
        doc = {
            "dimension": self.dimension,
            "vertices": self.vertices.tolist(),
            "edges": self.edges.tolist(),
        }
        if self.dimension == 2:
            doc["cells"] = [{"vertices": c.tolist()} for c in self.cells_vertices]
            doc["boundary"] = {
                "vertices": sorted(map(int, self.boundary_vertices)),
                "edges": sorted(map(int, self.boundary_edges)),
            }
        else:
            doc["faces"] = [{"loop": f.tolist()} for f in self.faces]
            doc["cells"] = [
                {"faces": f.tolist(), "orientations": o.tolist()}
                for f, o in zip(self.cells_faces, self.cells_orient)
            ]
            doc["boundary"] = {
                "vertices": sorted(map(int, self.boundary_vertices)),
                "edges": sorted(map(int, self.boundary_edges)),
                "faces": sorted(map(int, self.boundary_faces)),
            }
        return doc


def _derive_boundary_2d(edges, cells_vertices, edge_lookup):
    count = np.zeros(len(edges), dtype=int)
    for c in cells_vertices:
        for i in range(len(c)):
            a, b = int(c[i]), int(c[(i + 1) % len(c)])
            count[edge_lookup[(min(a, b), max(a, b))]] += 1
    bnd_edges = np.flatnonzero(count == 1)
    bnd_verts = np.unique(edges[bnd_edges].ravel()) if len(bnd_edges) else np.empty(0, int)
    return bnd_verts, bnd_edges


def mesh_from_polygons(vertices, loops) -> PolytopalMesh:
    """Build and validate a 2D mesh from vertex coordinates and CCW cell loops."""
    vertices = np.asarray(vertices, dtype=float)
    loops = [np.asarray(c, dtype=int) for c in loops]
    pairs = sorted({(min(int(a), int(b)), max(int(a), int(b)))
                    for c in loops for a, b in zip(c, np.roll(c, -1))})
    edges = np.array(pairs, dtype=int).reshape(-1, 2)
    lookup = {tuple(e): i for i, e in enumerate(pairs)}
    bnd_v, bnd_e = _derive_boundary_2d(edges, loops, lookup)
    mesh = PolytopalMesh(2, vertices, edges, cells_vertices=loops,
                         boundary_vertices=bnd_v, boundary_edges=bnd_e)
    mesh.validate()
    return mesh


def mesh_from_faces(vertices, face_loops, cell_faces) -> PolytopalMesh:
    """Build and validate a 3D mesh; orientation flags are derived geometrically."""
    vertices = np.asarray(vertices, dtype=float)
    face_loops = [np.asarray(f, dtype=int) for f in face_loops]
    cell_faces = [np.asarray(c, dtype=int) for c in cell_faces]
    pairs = sorted({(min(int(a), int(b)), max(int(a), int(b)))
                    for f in face_loops for a, b in zip(f, np.roll(f, -1))})
    edges = np.array(pairs, dtype=int).reshape(-1, 2)

    orients = []
    for fids in cell_faces:
        vids = np.unique(np.concatenate([face_loops[f] for f in fids]))
        interior = vertices[vids].mean(axis=0)
        o = []
        for f in fids:
            pts = vertices[face_loops[f]]
            n = newell_normal(pts)
            o.append(1 if np.dot(n, pts.mean(axis=0) - interior) > 0 else -1)
        orients.append(np.array(o, dtype=int))

    count = np.zeros(len(face_loops), dtype=int)
    for fids in cell_faces:
        for f in fids:
            count[f] += 1
    bnd_f = np.flatnonzero(count == 1)
    bnd_v = (np.unique(np.concatenate([face_loops[f] for f in bnd_f]))
             if len(bnd_f) else np.empty(0, int))
    lookup = {tuple(e): i for i, e in enumerate(pairs)}
    bnd_e = sorted({lookup[(min(int(a), int(b)), max(int(a), int(b)))]
                    for f in bnd_f for a, b in zip(face_loops[f], np.roll(face_loops[f], -1))})
    mesh = PolytopalMesh(3, vertices, edges, faces=face_loops, cells_faces=cell_faces,
                         cells_orient=orients,
                         boundary_vertices=bnd_v,
                         boundary_edges=np.array(bnd_e, dtype=int),
                         boundary_faces=bnd_f)
    mesh.validate()
    return mesh


def save_mesh(mesh: PolytopalMesh, path):
    with open(path, "w") as fh:
        json.dump(mesh.to_dict(), fh)


def _require(doc, key, context):
    if key not in doc:
        raise ParseError(f"{context}: missing field '{key}'")
    return doc[key]


def load_mesh(path) -> PolytopalMesh:
    """Read a mesh file; raises ParseError / TopologyError on bad input."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    dim = _require(doc, "dimension", str(path))
    if dim not in (2, 3):
        raise ParseError(f"{path}: dimension must be 2 or 3, got {dim!r}")
    vertices = np.asarray(_require(doc, "vertices", str(path)), dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != dim:
        raise ParseError(f"{path}: vertices must be an Nx{dim} array")
    edges = np.asarray(_require(doc, "edges", str(path)), dtype=int)
    cells = _require(doc, "cells", str(path))
    boundary = _require(doc, "boundary", str(path))
    try:
        if dim == 2:
            loops = [np.asarray(_require(c, "vertices", f"cells[{i}]"), dtype=int)
                     for i, c in enumerate(cells)]
            mesh = PolytopalMesh(
                2, vertices, edges, cells_vertices=loops,
                boundary_vertices=np.asarray(boundary.get("vertices", []), dtype=int),
                boundary_edges=np.asarray(boundary.get("edges", []), dtype=int))
        else:
            faces = [np.asarray(_require(f, "loop", f"faces[{i}]"), dtype=int)
                     for i, f in enumerate(_require(doc, "faces", str(path)))]
            cf = [np.asarray(_require(c, "faces", f"cells[{i}]"), dtype=int)
                  for i, c in enumerate(cells)]
            co = [np.asarray(_require(c, "orientations", f"cells[{i}]"), dtype=int)
                  for i, c in enumerate(cells)]
            mesh = PolytopalMesh(
                3, vertices, edges, faces=faces, cells_faces=cf, cells_orient=co,
                boundary_vertices=np.asarray(boundary.get("vertices", []), dtype=int),
                boundary_edges=np.asarray(boundary.get("edges", []), dtype=int),
                boundary_faces=np.asarray(boundary.get("faces", []), dtype=int))
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{path}: malformed mesh document ({exc})")
    mesh.validate()
    return mesh
