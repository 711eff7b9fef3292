"""Global DOF numbering, sparse assembly, direct solve, error norms, and
condition-number metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import poly_space_dim
from .errors import SingularSystem
from .local import (AdrCoefficients, build_element, build_face_cache,
                    edge_dof_points, face_moment_dofs, local_bilinear)
from .maps import ApproachConfig
from .quadrature import polygon_rule, polyhedron_rule

#: Residual tolerance factor of the direct solver check.
SOLVE_RESIDUAL_REL_TOL = 1e-10

#: Default cap on dense conditioning of the global matrix.
COND_DENSE_CAP = 20_000


class DofMap:
    """Global numbering: vertices, then edge nodes, then face moments (3D),
    then cell moments; shared entities appear exactly once."""

    def __init__(self, mesh, k: int):
        self.mesh = mesh
        self.k = k
        d = mesh.dimension
        self.n_face_moments = poly_space_dim(2, k - 2) if d == 3 else 0
        self.n_cell_moments = poly_space_dim(d, k - 2)
        self.vertex_offset = 0
        self.edge_offset = mesh.n_vertices
        self.face_offset = self.edge_offset + mesh.n_edges * (k - 1)
        self.cell_offset = self.face_offset + mesh.n_faces * self.n_face_moments
        self.n_dofs = self.cell_offset + mesh.n_cells * self.n_cell_moments

        bnd = np.zeros(self.n_dofs, dtype=bool)
        bnd[mesh.boundary_vertices] = True
        for e in mesh.boundary_edges:
            bnd[self.edge_offset + e * (k - 1):
                self.edge_offset + (e + 1) * (k - 1)] = True
        if d == 3:
            for f in mesh.boundary_faces:
                bnd[self.face_offset + f * self.n_face_moments:
                    self.face_offset + (f + 1) * self.n_face_moments] = True
        self.boundary_mask = bnd

    def global_index(self, entry, ci: int) -> int:
        if entry.kind == "v":
            return entry.entity
        if entry.kind == "e":
            return self.edge_offset + entry.entity * (self.k - 1) + entry.comp
        if entry.kind == "f":
            return self.face_offset + entry.entity * self.n_face_moments + entry.comp
        return self.cell_offset + ci * self.n_cell_moments + entry.comp

    def cell_dofs(self, dof_table, ci: int) -> np.ndarray:
        return np.array([self.global_index(e, ci) for e in dof_table.entries])


@dataclass
class LocalConditioning:
    """Worst-over-elements (and faces) condition numbers of the projectors."""

    pi_nabla: float = 1.0
    pi0_km1: float = 1.0
    pi0_x: list = field(default_factory=list)
    face_pi_nabla: float | None = None
    face_pi0: float | None = None


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    dirichlet_mask: np.ndarray
    dirichlet_values: np.ndarray
    elements: list           # (ctx, lv, global column indices)
    conditioning: LocalConditioning


def matrix_cond(m: np.ndarray) -> float:
    """Extreme singular value ratio of a (possibly rectangular) matrix."""
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if s[-1] <= 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def assemble(mesh, coeffs: AdrCoefficients, config: ApproachConfig, k: int,
             dirichlet=None, face_cache=None) -> GlobalSystem:
    """Scatter all local contributions and interpolate the Dirichlet data.

    ``dirichlet`` is the boundary data as a callable on (n, d) arrays; None
    means homogeneous.
    """
    config.validate_for_dim(mesh.dimension)
    if k < 1:
        raise ValueError("polynomial degree must be >= 1")
    dofmap = DofMap(mesh, k)
    if mesh.dimension == 3 and face_cache is None:
        face_cache = build_face_cache(mesh, config, k)

    rows, cols, vals = [], [], []
    rhs = np.zeros(dofmap.n_dofs)
    elements = []
    cond = LocalConditioning(pi0_x=[1.0] * mesh.dimension)
    for ci in range(mesh.n_cells):
        ctx, lv = build_element(mesh, ci, config, k, face_cache)
        a_loc, rhs_loc = local_bilinear(ctx, lv, coeffs)
        g = dofmap.cell_dofs(lv.dof, ci)
        rows.append(np.repeat(g, len(g)))
        cols.append(np.tile(g, len(g)))
        vals.append(a_loc.ravel())
        np.add.at(rhs, g, rhs_loc)
        elements.append((ctx, lv, g))
        cond.pi_nabla = max(cond.pi_nabla, matrix_cond(lv.pi_nabla))
        cond.pi0_km1 = max(cond.pi0_km1, matrix_cond(lv.pi0_km1))
        for j in range(mesh.dimension):
            cond.pi0_x[j] = max(cond.pi0_x[j], matrix_cond(lv.pi0_x[j]))
    if mesh.dimension == 3:
        cond.face_pi_nabla = max(matrix_cond(fv.lv.pi_nabla) for fv in face_cache.values())
        cond.face_pi0 = max(matrix_cond(fv.lv.pi0_km1) for fv in face_cache.values())

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofmap.n_dofs, dofmap.n_dofs)).tocsr()

    g_vals = np.zeros(dofmap.n_dofs)
    if dirichlet is not None:
        g_vals[mesh.boundary_vertices] = dirichlet(mesh.vertices[mesh.boundary_vertices])
        if k > 1:
            for e in mesh.boundary_edges:
                pts = edge_dof_points(mesh, int(e), k)
                g_vals[dofmap.edge_offset + e * (k - 1):
                       dofmap.edge_offset + (e + 1) * (k - 1)] = dirichlet(pts)
            if mesh.dimension == 3 and dofmap.n_face_moments:
                for f in mesh.boundary_faces:
                    m = face_moment_dofs(face_cache[int(f)], dirichlet)
                    off = dofmap.face_offset + f * dofmap.n_face_moments
                    g_vals[off: off + dofmap.n_face_moments] = m
    return GlobalSystem(matrix=matrix, rhs=rhs, dofmap=dofmap,
                        dirichlet_mask=dofmap.boundary_mask.copy(),
                        dirichlet_values=g_vals, elements=elements,
                        conditioning=cond)


def solve(system: GlobalSystem) -> np.ndarray:
    """Direct sparse solve of the Dirichlet-reduced system.

    Returns the full DOF vector, boundary values included; raises
    SingularSystem when the factorization fails or the residual is large.
    """
    free = ~system.dirichlet_mask
    a = system.matrix.tocsc()
    a_ff = a[free][:, free]
    b = system.rhs[free] - a[free][:, system.dirichlet_mask] @ \
        system.dirichlet_values[system.dirichlet_mask]
    try:
        x = spla.spsolve(a_ff.tocsc(), b)
    except Exception as exc:  # umfpack/superlu raise various types
        raise SingularSystem(f"sparse factorization failed: {exc}")
    if not np.all(np.isfinite(x)):
        raise SingularSystem("solver produced non-finite values (singular pivot)")
    resid = np.abs(a_ff @ x - b).max() if x.size else 0.0
    a_norm = np.abs(a_ff).max() if a_ff.nnz else 0.0
    scale = a_norm * (np.abs(x).max() if x.size else 0.0) + \
        (np.abs(b).max() if b.size else 0.0)
    if x.size and resid > SOLVE_RESIDUAL_REL_TOL * max(scale, 1e-300):
        raise SingularSystem(f"solver residual {resid:.3e} exceeds tolerance")
    out = system.dirichlet_values.copy()
    out[free] = x
    return out


def global_matrix_cond(system: GlobalSystem, dense_cap: int = COND_DENSE_CAP):
    """Condition number of the reduced matrix; (value, exact_flag).

    Dense singular values below the cap, a power/inverse-power estimate above
    it (flagged approximate).
    """
    free = ~system.dirichlet_mask
    a = system.matrix.tocsc()[free][:, free]
    n = a.shape[0]
    if n == 0:
        return 1.0, True
    if n <= dense_cap:
        return matrix_cond(a.toarray()), True
    rng = np.random.default_rng(0)
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    smax = 0.0
    for _ in range(50):
        w = a.T @ (a @ v)
        smax = np.linalg.norm(w)
        v = w / smax
    try:
        lu = spla.splu(a.tocsc())
    except Exception as exc:
        raise SingularSystem(f"factorization for conditioning failed: {exc}")
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(50):
        w = lu.solve(lu.solve(v, trans="T"), trans="N")
        lam = np.linalg.norm(w)
        v = w / lam
    return float(np.sqrt(smax) * np.sqrt(lam)), False


def energy_errors(mesh, system: GlobalSystem, solution: np.ndarray, problem,
                  quad_margin: int = 6) -> tuple[float, float]:
    """Relative projection errors of the discrete solution.

    Numerators run on mapped elements with the pulled-back volume weight;
    denominators are the exact norms on the original elements, integrated at
    a higher order so quadrature error stays below discretization error.
    """
    k = system.dofmap.k
    dim = mesh.dimension
    order = 2 * k + quad_margin
    num_u = num_g = den_u = den_g = 0.0
    for ctx, lv, g in system.elements:
        u_loc = solution[g]
        if dim == 2:
            quad = polygon_rule(ctx.poly_hat.vertices, order)
            quad_orig = polygon_rule(ctx.poly_orig.vertices, order)
        else:
            quad = polyhedron_rule(ctx.poly_hat.vertices, ctx.poly_hat.outward_loops(), order)
            quad_orig = polyhedron_rule(ctx.poly_orig.vertices,
                                        ctx.poly_orig.outward_loops(), order)
        det = ctx.map.det_abs
        pts_orig = ctx.map.apply(quad.points)
        u_hat = problem.exact(pts_orig)
        vals_k = ctx.basis.evaluate(quad.points)
        p_hat = vals_k.T @ (lv.pi0_k @ u_loc)
        num_u += float(np.sum(quad.weights * (u_hat - p_hat) ** 2)) * det

        grad_orig = problem.exact_gradient(pts_orig)
        grad_hat = grad_orig @ ctx.map.linear  # pull-back: hat gradient = F^T grad
        vals_km1 = vals_k[: poly_space_dim(dim, k - 1)]
        proj = np.column_stack([vals_km1.T @ (lv.pi0_x[j] @ u_loc) for j in range(dim)])
        r = grad_hat - proj
        s = r @ ctx.map.inverse  # rows times F^{-T}
        num_g += float(np.sum(quad.weights * np.sum(s * s, axis=1))) * det

        u_ex = problem.exact(quad_orig.points)
        den_u += float(np.sum(quad_orig.weights * u_ex ** 2))
        g_ex = problem.exact_gradient(quad_orig.points)
        den_g += float(np.sum(quad_orig.weights * np.sum(g_ex * g_ex, axis=1)))
    return float(np.sqrt(num_u / den_u)), float(np.sqrt(num_g / den_g))
