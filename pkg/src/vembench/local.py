"""Per-element virtual element machinery.

Everything local is computed on the mapped element: degrees of freedom are
vertex values, internal Gauss-Lobatto values per edge, face moments against
the face basis on the mapped face (3D), and interior moments against the
element basis on the mapped element.  The projector systems are assembled by
integration by parts; in 3D the boundary terms go through the face L2
projectors, which makes them exact for polynomial weights up to degree k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisRep, monomial_basis, orthonormalize, poly_space_dim
from .errors import SingularG
from .geometry import Polygon, Polyhedron, compute_geometry, newell_normal
from .maps import AffineMap, ApproachConfig, build_cell_map, build_inertial_map, identity_map
from .quadrature import (QuadratureRule, gauss_lobatto_params, polygon_rule,
                         polyhedron_rule, segment_gauss)

#: Residual threshold for declaring the projector system singular.
SINGULAR_G_REL_TOL = 1e-12


@dataclass(frozen=True)
class DofEntry:
    kind: str    # "v" vertex value | "e" edge node | "f" face moment | "c" cell moment
    entity: int  # global id of the carrying entity (-1 for cell moments)
    comp: int


class DofTable:
    """Ordered local DOF list with an index by (kind, entity, comp)."""

    def __init__(self, entries: list[DofEntry]):
        self.entries = entries
        self.index = {(e.kind, e.entity, e.comp): i for i, e in enumerate(entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def col(self, kind: str, entity: int, comp: int = 0) -> int:
        return self.index[(kind, entity, comp)]


@dataclass
class LocalVem:
    """Projection matrices and building blocks of one element (or face)."""

    k: int
    dof: DofTable
    basis: BasisRep
    measure_hat: float
    D: np.ndarray
    G: np.ndarray
    B: np.ndarray
    H: np.ndarray
    pi_nabla: np.ndarray
    pi0_k: np.ndarray
    pi0_km1: np.ndarray
    pi0_x: list[np.ndarray]


@dataclass
class AdrCoefficients:
    """Callable coefficient fields of the advection-diffusion-reaction form.

    Each callable takes points of shape (n, d); diffusion returns (n, d, d),
    advection (n, d), reaction and source (n,).
    """

    diffusion: callable
    advection: callable
    reaction: callable
    source: callable

    @classmethod
    def constant(cls, dim: int, diffusion=None, advection=None, reaction=0.0):
        dmat = np.eye(dim) if diffusion is None else np.asarray(diffusion, dtype=float)
        bvec = np.zeros(dim) if advection is None else np.asarray(advection, dtype=float)

        return cls(
            diffusion=lambda p: np.broadcast_to(dmat, (len(p), dim, dim)),
            advection=lambda p: np.broadcast_to(bvec, (len(p), dim)),
            reaction=lambda p: np.full(len(p), float(reaction)),
            source=lambda p: np.zeros(len(p)),
        )


def edge_dof_points(mesh, eid: int, k: int) -> np.ndarray:
    """Original coordinates of the k-1 internal Gauss-Lobatto nodes of an edge.

    Nodes run from the lower to the higher global vertex id, so both cells
    sharing the edge see the same ordering.
    """
    a, b = mesh.edges[eid]
    lo, hi = mesh.vertices[a], mesh.vertices[b]
    s = gauss_lobatto_params(k + 1)[1:-1]
    return lo[None, :] + s[:, None] * (hi - lo)[None, :]


def _lagrange_values(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lagrange basis at ``nodes`` evaluated at points ``x``; (n_nodes, n_x)."""
    n = nodes.shape[0]
    out = np.ones((n, x.shape[0]))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return out


def _solve_checked(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularG(f"{what} system is singular: {exc}")
    resid = np.abs(a @ x - b).max()
    scale = np.abs(b).max() + np.abs(a).max() * np.abs(x).max()
    if not np.isfinite(resid) or resid > max(SINGULAR_G_REL_TOL * scale, 1e-300) * 1e4:
        raise SingularG(f"{what} system solve failed (residual {resid:.3e})")
    return x


def moment_weight(basis: BasisRep, measure: float) -> float:
    """Normalization of moment DOFs: dof(v) = (v, q)/weight.

    Scaled monomials keep the classical measure normalization; the
    orthonormal family uses sqrt(measure) so moment DOFs stay on the same
    scale as nodal values even on tiny or huge elements.
    """
    return measure if basis.is_monomial else float(np.sqrt(measure))


def element_basis(kind: str, dim: int, k: int, geo_hat, quad_hat) -> BasisRep:
    """Basis on the mapped element: monomials, or the orthonormalized family."""
    if kind == "ortho":
        return orthonormalize(dim, k, geo_hat.centroid, geo_hat.diameter,
                              quad_hat.points, quad_hat.weights)
    return monomial_basis(dim, k, geo_hat.centroid, geo_hat.diameter)


def _finish_local(basis, k, dof, measure_hat, H, g_stiff, p0_basis, p0_phi, n_list):
    """Common tail of the 2D and 3D builders: solve all projector systems."""
    dim = basis.dim
    n_k = basis.n
    n_km1 = poly_space_dim(dim, k - 1)
    n_km2 = poly_space_dim(dim, k - 2)
    n_dof = len(dof)
    cols_c = [dof.col("c", -1, a) for a in range(n_km2)]
    mw = moment_weight(basis, measure_hat)

    g_mat = g_stiff.copy()
    g_mat[0, :] = p0_basis
    b_mat = np.zeros((n_k, n_dof))
    b_mat[0, :] = p0_phi
    if n_km2 > 0:
        lap_q = basis.monomial_to_basis(basis.laplacian_monomial_coeffs())
        for g, c in enumerate(cols_c):
            b_mat[1:, c] -= lap_q[1:, g] * mw
    for j in range(dim):
        grad_m = basis.gradient_monomial_coeffs(j)
        b_mat[1:, :] += grad_m[1:, :] @ n_list[j][: grad_m.shape[1], :]

    pi_nabla = _solve_checked(g_mat, b_mat, "projector")

    c_mat = np.zeros((n_k, n_dof))
    for a, c in enumerate(cols_c):
        c_mat[a, c] = mw
    c_mat[n_km2:, :] = (H @ pi_nabla)[n_km2:, :]
    pi0_k = _solve_checked(H, c_mat, "L2 projector")
    pi0_km1 = _solve_checked(H[:n_km1, :n_km1], c_mat[:n_km1, :], "L2 projector")

    pi0_x = []
    for j in range(dim):
        rhs = np.zeros((n_km1, n_dof))
        if n_km2 > 0:
            grad_q = basis.monomial_to_basis(
                basis.gradient_monomial_coeffs(j)[:n_km1, :n_km2])
            for g, c in enumerate(cols_c):
                rhs[:, c] -= grad_q[:, g] * mw
        rhs += basis.coeff[:n_km1, :] @ n_list[j]
        pi0_x.append(_solve_checked(H[:n_km1, :n_km1], rhs, "gradient projector"))

    return LocalVem(k=k, dof=dof, basis=basis, measure_hat=measure_hat,
                    D=None, G=g_mat, B=b_mat, H=H, pi_nabla=pi_nabla,
                    pi0_k=pi0_k, pi0_km1=pi0_km1, pi0_x=pi0_x)


# ------------------------------------------------------------------ 2D builder

@dataclass
class Element2D:
    """Context of one polygonal element (or one 3D face treated in-plane)."""

    k: int
    map: AffineMap
    poly_orig: Polygon
    poly_hat: Polygon
    geo_orig: object
    geo_hat: object
    quad_hat: QuadratureRule
    basis: BasisRep
    vertex_ids: np.ndarray
    edge_ids: np.ndarray
    edge_forward: np.ndarray
    dof: DofTable


def _build_element_2d(poly_orig: Polygon, vertex_ids, edge_ids,
                      edge_forward, config: ApproachConfig, k: int,
                      use_map: bool, quad_order=None) -> tuple[Element2D, LocalVem]:
    if use_map:
        amap, poly_hat = build_inertial_map(poly_orig)
    else:
        amap, poly_hat = identity_map(2), Polygon(poly_orig.vertices.copy())
    geo_orig = compute_geometry(poly_orig)
    geo_hat = geo_orig if use_map is False else compute_geometry(poly_hat)
    if quad_order is None:
        quad_order = 2 * k + 2
    quad_hat = polygon_rule(poly_hat.vertices, quad_order)
    basis = element_basis(config.basis_kind, 2, k, geo_hat, quad_hat)

    n_km2 = poly_space_dim(2, k - 2)
    entries = [DofEntry("v", int(v), 0) for v in vertex_ids]
    for e in edge_ids:
        entries += [DofEntry("e", int(e), j) for j in range(k - 1)]
    entries += [DofEntry("c", -1, a) for a in range(n_km2)]
    dof = DofTable(entries)

    ctx = Element2D(k=k, map=amap, poly_orig=poly_orig, poly_hat=poly_hat,
                    geo_orig=geo_orig, geo_hat=geo_hat, quad_hat=quad_hat,
                    basis=basis, vertex_ids=np.asarray(vertex_ids, dtype=int),
                    edge_ids=np.asarray(edge_ids, dtype=int),
                    edge_forward=np.asarray(edge_forward, dtype=bool), dof=dof)
    lv = _local_vem_2d(ctx)
    lv.D = _d_matrix_2d(ctx, lv)
    return ctx, lv


def _boundary_tensors_2d(ctx: Element2D):
    """Monomial-weighted boundary moment tensors N_j[gamma, dof] and the
    plain trace tensor used for the k=1 boundary mean."""
    k, dof, basis = ctx.k, ctx.dof, ctx.basis
    verts_hat = ctx.poly_hat.vertices
    m = verts_hat.shape[0]
    orient = ctx.poly_hat.orientation()
    n_k = basis.n
    n_dof = len(dof)
    n_list = [np.zeros((n_k, n_dof)) for _ in range(2)]
    m_bnd = np.zeros((n_k, n_dof))
    perimeter = 0.0

    gl = gauss_lobatto_params(k + 1)
    ref = segment_gauss(2 * k + 2)
    ug, wg = ref.points[:, 0], ref.weights
    for i in range(m):
        p0, p1 = verts_hat[i], verts_hat[(i + 1) % m]
        t = p1 - p0
        length = float(np.hypot(t[0], t[1]))
        normal = orient * np.array([t[1], -t[0]]) / length
        pts = p0[None, :] + ug[:, None] * t[None, :]
        wts = wg * length
        mono = basis.monomial_values(pts)
        # trace nodes in loop parameter; canonical node order runs lower->higher id
        u_nodes = gl if ctx.edge_forward[i] else 1.0 - gl
        lag = _lagrange_values(u_nodes, ug)
        contrib = (mono * wts) @ lag.T
        v0 = dof.col("v", int(ctx.vertex_ids[i]))
        v1 = dof.col("v", int(ctx.vertex_ids[(i + 1) % m]))
        cols = [v0 if ctx.edge_forward[i] else v1]
        cols += [dof.col("e", int(ctx.edge_ids[i]), j) for j in range(k - 1)]
        cols += [v1 if ctx.edge_forward[i] else v0]
        for local, c in enumerate(cols):
            n_list[0][:, c] += normal[0] * contrib[:, local]
            n_list[1][:, c] += normal[1] * contrib[:, local]
            m_bnd[:, c] += contrib[:, local]
        perimeter += length
    return n_list, m_bnd, perimeter


def _local_vem_2d(ctx: Element2D) -> LocalVem:
    basis, quad, k = ctx.basis, ctx.quad_hat, ctx.k
    w = quad.weights
    phi, grad = basis.evaluate_with_gradient(quad.points)
    h_mat = (phi * w) @ phi.T
    g_stiff = sum((grad[j] * w) @ grad[j].T for j in range(2))
    measure_hat = ctx.geo_hat.measure

    n_list, m_bnd, perimeter = _boundary_tensors_2d(ctx)
    if k == 1:
        # boundary means: quadrature of the basis along the mapped loop
        p0_basis = np.zeros(basis.n)
        verts_hat = ctx.poly_hat.vertices
        m = verts_hat.shape[0]
        ref = segment_gauss(2 * k + 2)
        for i in range(m):
            p0, p1 = verts_hat[i], verts_hat[(i + 1) % m]
            length = float(np.linalg.norm(p1 - p0))
            pts = p0[None, :] + ref.points[:, 0][:, None] * (p1 - p0)[None, :]
            p0_basis += basis.evaluate(pts) @ (ref.weights * length)
        p0_basis /= perimeter
        p0_phi = m_bnd[0, :] / perimeter  # m_0 == 1, so this row is the trace integral
    else:
        p0_basis = (phi @ w) / measure_hat
        p0_phi = np.zeros(len(ctx.dof))
        p0_phi[ctx.dof.col("c", -1, 0)] = (
            moment_weight(basis, measure_hat) / (measure_hat * basis.coeff[0, 0]))
    return _finish_local(basis, k, ctx.dof, measure_hat, h_mat, g_stiff,
                         p0_basis, p0_phi, n_list)


def _d_matrix_2d(ctx: Element2D, lv: LocalVem) -> np.ndarray:
    """DOFs of the basis functions: D[i, alpha] = dof_i(q_alpha)."""
    k, dof, basis = ctx.k, ctx.dof, ctx.basis
    d_mat = np.zeros((len(dof), basis.n))
    vert_hat = ctx.poly_hat.vertices
    for i, v in enumerate(ctx.vertex_ids):
        d_mat[dof.col("v", int(v))] = basis.evaluate(vert_hat[i][None, :])[:, 0]
    if k > 1:
        s = gauss_lobatto_params(k + 1)[1:-1]
        verts_orig = ctx.poly_orig.vertices
        m = verts_orig.shape[0]
        node_pts = []
        for i in range(m):
            a, b = verts_orig[i], verts_orig[(i + 1) % m]
            lo, hi = (a, b) if ctx.edge_forward[i] else (b, a)
            node_pts.append(lo[None, :] + s[:, None] * (hi - lo)[None, :])
        vals = basis.evaluate(ctx.map.pull(np.vstack(node_pts)))
        for i in range(m):
            for j in range(k - 1):
                d_mat[dof.col("e", int(ctx.edge_ids[i]), j)] = vals[:, i * (k - 1) + j]
        n_km2 = poly_space_dim(2, k - 2)
        mw = moment_weight(basis, lv.measure_hat)
        for a in range(n_km2):
            d_mat[dof.col("c", -1, a)] = lv.H[:, a] / mw
    return d_mat


# ------------------------------------------------------------------ 3D faces

@dataclass
class FaceVem:
    """Face-local VEM data shared by the (at most two) touching cells."""

    fid: int
    frame_origin: np.ndarray
    frame_axes: np.ndarray  # (3, 2)
    ctx: Element2D
    lv: LocalVem
    points3d: np.ndarray    # mapped-face quadrature nodes in original 3D coords

    @property
    def quad_hat(self) -> QuadratureRule:
        return self.ctx.quad_hat

    def basis_values(self) -> np.ndarray:
        return self.lv.basis.evaluate(self.ctx.quad_hat.points)


def build_face_vem(mesh, fid: int, config: ApproachConfig, k: int) -> FaceVem:
    """Build the in-plane VEM of one face from the face data only."""
    poly2d, loop_ids, (origin, axes) = mesh.face_polygon2d(fid)
    m = len(loop_ids)
    edge_ids = [mesh.edge_index(loop_ids[i], loop_ids[(i + 1) % m]) for i in range(m)]
    forward = [int(mesh.edges[e][0]) == int(loop_ids[i]) for i, e in enumerate(edge_ids)]
    ctx, lv = _build_element_2d(poly2d, loop_ids, edge_ids, forward,
                                ApproachConfig(config.basis_kind), k,
                                use_map=config.maps_faces())
    pts3d = origin[None, :] + ctx.map.apply(ctx.quad_hat.points) @ axes.T
    return FaceVem(fid=fid, frame_origin=origin, frame_axes=axes,
                   ctx=ctx, lv=lv, points3d=pts3d)


def build_face_cache(mesh, config: ApproachConfig, k: int) -> dict[int, FaceVem]:
    """All face VEMs, built once before any element-level work."""
    return {fid: build_face_vem(mesh, fid, config, k) for fid in range(mesh.n_faces)}


# ------------------------------------------------------------------ 3D builder

@dataclass
class Element3D:
    k: int
    map: AffineMap
    poly_orig: Polyhedron
    poly_hat: Polyhedron
    geo_orig: object
    geo_hat: object
    quad_hat: QuadratureRule
    basis: BasisRep
    vertex_ids: np.ndarray
    edge_ids: np.ndarray
    face_ids: np.ndarray
    dof: DofTable


def _build_element_3d(mesh, ci: int, config: ApproachConfig, k: int,
                      face_cache: dict[int, FaceVem],
                      quad_order=None) -> tuple[Element3D, LocalVem]:
    poly_orig, vids = mesh.cell_polyhedron(ci)
    amap, poly_hat = build_cell_map(poly_orig, config.maps_cell(3))
    geo_orig = compute_geometry(poly_orig)
    geo_hat = geo_orig if amap.is_identity else compute_geometry(poly_hat)
    if quad_order is None:
        quad_order = 2 * k + 2
    quad_hat = polyhedron_rule(poly_hat.vertices, poly_hat.outward_loops(), quad_order)
    basis = element_basis(config.basis_kind, 3, k, geo_hat, quad_hat)

    eids = mesh.cell_edge_ids(ci)
    fids = mesh.cells_faces[ci]
    n_km2_2d = poly_space_dim(2, k - 2)
    n_km2 = poly_space_dim(3, k - 2)
    entries = [DofEntry("v", int(v), 0) for v in vids]
    for e in eids:
        entries += [DofEntry("e", int(e), j) for j in range(k - 1)]
    for f in fids:
        entries += [DofEntry("f", int(f), a) for a in range(n_km2_2d)]
    entries += [DofEntry("c", -1, a) for a in range(n_km2)]
    dof = DofTable(entries)

    ctx = Element3D(k=k, map=amap, poly_orig=poly_orig, poly_hat=poly_hat,
                    geo_orig=geo_orig, geo_hat=geo_hat, quad_hat=quad_hat,
                    basis=basis, vertex_ids=vids, edge_ids=eids,
                    face_ids=np.asarray(fids, dtype=int), dof=dof)
    lv = _local_vem_3d(mesh, ctx, face_cache)
    lv.D = _d_matrix_3d(mesh, ctx, lv, face_cache)
    return ctx, lv


def _face_cell_cols(fv: FaceVem, dof: DofTable) -> list[int]:
    cols = []
    for e in fv.ctx.dof.entries:
        if e.kind == "c":
            cols.append(dof.col("f", fv.fid, e.comp))
        else:
            cols.append(dof.col(e.kind, e.entity, e.comp))
    return cols


def _face_embedding(ctx: Element3D, fv: FaceVem):
    """Mapped-face quadrature nodes in mapped-cell coordinates, the area
    scaling of the composed affine map, and the outward unit normal."""
    pts_hat = ctx.map.pull(fv.points3d)
    jac = ctx.map.inverse @ fv.frame_axes @ fv.ctx.map.linear
    scale = float(np.sqrt(max(np.linalg.det(jac.T @ jac), 0.0)))
    loop3d = ctx.map.pull(
        fv.frame_origin[None, :] + fv.ctx.poly_orig.vertices @ fv.frame_axes.T)
    normal = newell_normal(loop3d)
    normal /= np.linalg.norm(normal)
    centroid_hat = ctx.geo_hat.centroid
    if np.dot(normal, loop3d.mean(axis=0) - centroid_hat) < 0:
        normal = -normal
    return pts_hat, scale, normal


def _local_vem_3d(mesh, ctx: Element3D, face_cache) -> LocalVem:
    basis, quad, k, dof = ctx.basis, ctx.quad_hat, ctx.k, ctx.dof
    w = quad.weights
    phi, grad = basis.evaluate_with_gradient(quad.points)
    h_mat = (phi * w) @ phi.T
    g_stiff = sum((grad[j] * w) @ grad[j].T for j in range(3))
    measure_hat = ctx.geo_hat.measure

    n_k = basis.n
    n_dof = len(dof)
    n_list = [np.zeros((n_k, n_dof)) for _ in range(3)]
    m_bnd = np.zeros((n_k, n_dof))
    area_bnd = 0.0
    p0_basis_bnd = np.zeros(n_k)
    for fid in ctx.face_ids:
        fv = face_cache[int(fid)]
        pts_hat, scale, normal = _face_embedding(ctx, fv)
        w_f = fv.quad_hat.weights * scale
        mono = basis.monomial_values(pts_hat)
        q_face = fv.basis_values()
        # moments of the bulk monomials against the face basis, then through
        # the face L2 projector onto the face DOFs (exact up to weight degree k)
        wf_mat = (mono * w_f) @ q_face.T
        contrib = wf_mat @ fv.lv.pi0_k
        cols = _face_cell_cols(fv, dof)
        for j in range(3):
            n_list[j][:, cols] += normal[j] * contrib
        m_bnd[:, cols] += contrib
        area_bnd += fv.lv.measure_hat * scale
        p0_basis_bnd += (basis.coeff @ mono) @ w_f

    if k == 1:
        p0_basis = p0_basis_bnd / area_bnd
        p0_phi = m_bnd[0, :] / area_bnd
    else:
        p0_basis = (phi @ w) / measure_hat
        p0_phi = np.zeros(n_dof)
        p0_phi[dof.col("c", -1, 0)] = (
            moment_weight(basis, measure_hat) / (measure_hat * basis.coeff[0, 0]))
    return _finish_local(basis, k, dof, measure_hat, h_mat, g_stiff,
                         p0_basis, p0_phi, n_list)


def _d_matrix_3d(mesh, ctx: Element3D, lv: LocalVem, face_cache) -> np.ndarray:
    k, dof, basis = ctx.k, ctx.dof, ctx.basis
    d_mat = np.zeros((len(dof), basis.n))
    vids = ctx.vertex_ids
    vals = basis.evaluate(ctx.map.pull(mesh.vertices[vids]))
    for i, v in enumerate(vids):
        d_mat[dof.col("v", int(v))] = vals[:, i]
    if k == 1:
        return d_mat
    pts = np.vstack([edge_dof_points(mesh, int(e), k) for e in ctx.edge_ids])
    ev = basis.evaluate(ctx.map.pull(pts))
    for i, e in enumerate(ctx.edge_ids):
        for j in range(k - 1):
            d_mat[dof.col("e", int(e), j)] = ev[:, i * (k - 1) + j]
    n_km2_2d = poly_space_dim(2, k - 2)
    for fid in ctx.face_ids:
        fv = face_cache[int(fid)]
        pts_hat = ctx.map.pull(fv.points3d)
        bulk = basis.evaluate(pts_hat)
        q_face = fv.basis_values()[:n_km2_2d]
        mw_f = moment_weight(fv.lv.basis, fv.lv.measure_hat)
        moments = (bulk * fv.quad_hat.weights) @ q_face.T / mw_f
        for a in range(n_km2_2d):
            d_mat[dof.col("f", int(fid), a)] = moments[:, a]
    n_km2 = poly_space_dim(3, k - 2)
    mw = moment_weight(basis, lv.measure_hat)
    for a in range(n_km2):
        d_mat[dof.col("c", -1, a)] = lv.H[:, a] / mw
    return d_mat


# ------------------------------------------------------------------ public API

def build_element(mesh, ci: int, config: ApproachConfig, k: int,
                  face_cache=None):
    """Element context plus its local VEM matrices."""
    config.validate_for_dim(mesh.dimension)
    if mesh.dimension == 2:
        loop = mesh.cells_vertices[ci]
        eids = mesh.cell_edge_ids(ci)
        m = len(loop)
        forward = [int(mesh.edges[e][0]) == int(loop[i]) for i, e in enumerate(eids)]
        return _build_element_2d(mesh.cell_polygon(ci), loop, eids, forward,
                                 config, k, use_map=config.maps_cell(2))
    if face_cache is None:
        face_cache = build_face_cache(mesh, config, k)
    return _build_element_3d(mesh, ci, config, k, face_cache)


def stabilization(lv: LocalVem, h_orig: float, dim: int, scale: float = 1.0) -> np.ndarray:
    """dofi-dofi stabilization of the projector residual.

    Scaled by the diameter of the original element (h^(d-2)), so it matches
    the growth of the continuous form; ``scale`` carries the diffusion
    magnitude constant.
    """
    resid = np.eye(len(lv.dof)) - lv.D @ lv.pi_nabla
    return scale * h_orig ** (dim - 2) * resid.T @ resid


def local_bilinear(ctx, lv: LocalVem, coeffs: AdrCoefficients):
    """Local system matrix and load vector of the ADR form on one element.

    All integrals run on the mapped element; coefficient fields are composed
    with the element map and weighted by |det F| through the pulled-back
    tensor/vector/scalar coefficients.
    """
    quad = ctx.quad_hat
    dim = ctx.basis.dim
    w = quad.weights
    pts_orig = ctx.map.apply(quad.points)
    det = ctx.map.det_abs
    f_inv = ctx.map.inverse

    d_pts = np.asarray(coeffs.diffusion(pts_orig), dtype=float)
    k_hat = det * np.einsum("ij,qjl,kl->qik", f_inv, d_pts, f_inv)
    b_hat = det * np.asarray(coeffs.advection(pts_orig), dtype=float) @ f_inv.T
    rho_hat = det * np.asarray(coeffs.reaction(pts_orig), dtype=float)
    f_hat = det * np.asarray(coeffs.source(pts_orig), dtype=float)

    val = lv.basis.evaluate(quad.points, upto=ctx.k - 1)
    a_mat = np.zeros((len(lv.dof), len(lv.dof)))
    for j in range(dim):
        for l in range(dim):
            m_jl = (val * (w * k_hat[:, j, l])) @ val.T
            a_mat += lv.pi0_x[j].T @ m_jl @ lv.pi0_x[l]

    c_d = float(np.sum(w * np.einsum("qii->q", k_hat)) / (dim * np.sum(w)))
    a_mat += stabilization(lv, ctx.geo_orig.diameter, dim, scale=c_d)

    adv = np.zeros((val.shape[0], len(lv.dof)))
    for j in range(dim):
        m_j = (val * (w * b_hat[:, j])) @ val.T
        adv += m_j @ lv.pi0_x[j]
    a_mat += lv.pi0_km1.T @ adv

    m_rho = (val * (w * rho_hat)) @ val.T
    a_mat += lv.pi0_km1.T @ m_rho @ lv.pi0_km1

    rhs = lv.pi0_km1.T @ (val @ (w * f_hat))
    return a_mat, rhs


def interpolate_dofs(mesh, ctx, lv: LocalVem, func, face_cache=None) -> np.ndarray:
    """Local DOF vector of a smooth function (vertex/edge values, moments)."""
    out = np.zeros(len(lv.dof))
    dof = lv.dof
    k = ctx.k
    if ctx.basis.dim == 2:
        verts = ctx.poly_orig.vertices
        for i, v in enumerate(ctx.vertex_ids):
            out[dof.col("v", int(v))] = func(verts[i][None, :])[0]
        if k > 1:
            for i, e in enumerate(ctx.edge_ids):
                pts = edge_dof_points(mesh, int(e), k)
                vals = func(pts)
                for j in range(k - 1):
                    out[dof.col("e", int(e), j)] = vals[j]
    else:
        for v in ctx.vertex_ids:
            out[dof.col("v", int(v))] = func(mesh.vertices[int(v)][None, :])[0]
        if k > 1:
            for e in ctx.edge_ids:
                pts = edge_dof_points(mesh, int(e), k)
                vals = func(pts)
                for j in range(k - 1):
                    out[dof.col("e", int(e), j)] = vals[j]
            for fid in ctx.face_ids:
                fv = face_cache[int(fid)]
                mvals = face_moment_dofs(fv, func)
                for a, val in enumerate(mvals):
                    out[dof.col("f", int(fid), a)] = val
    n_km2 = poly_space_dim(ctx.basis.dim, k - 2)
    if n_km2 > 0:
        u_hat = func(ctx.map.apply(ctx.quad_hat.points))
        qv = ctx.basis.evaluate(ctx.quad_hat.points, upto=k - 2)
        moments = qv @ (ctx.quad_hat.weights * u_hat) / moment_weight(
            ctx.basis, lv.measure_hat)
        for a in range(n_km2):
            out[dof.col("c", -1, a)] = moments[a]
    return out


def face_moment_dofs(fv: FaceVem, func) -> np.ndarray:
    """Moments of a function against the face basis on the mapped face."""
    n_km2 = poly_space_dim(2, fv.ctx.k - 2)
    if n_km2 == 0:
        return np.empty(0)
    vals = func(fv.points3d)
    qv = fv.lv.basis.evaluate(fv.ctx.quad_hat.points, upto=fv.ctx.k - 2)
    return qv @ (fv.ctx.quad_hat.weights * vals) / moment_weight(
        fv.lv.basis, fv.lv.measure_hat)
