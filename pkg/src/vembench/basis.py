"""Scaled monomial bases and their calculus.

A polynomial basis on an element is stored as a coefficient matrix over the
scaled monomials m_a(x) = ((x - x_c)/h)**a, with the multi-indices a
enumerated in graded order: total degree first, descending lexicographic
within each degree.  The monomial basis itself has the identity coefficient
matrix; the orthonormalized basis has a lower-triangular one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalBreakdown

#: Pivot norm below which Gram-Schmidt is declared broken down.
MGS_BREAKDOWN_TOL = 1e-14


def poly_space_dim(dim: int, degree: int) -> int:
    """Dimension of the space of polynomials of total degree <= degree."""
    if degree < 0:
        return 0
    if dim == 1:
        return degree + 1
    if dim == 2:
        return (degree + 1) * (degree + 2) // 2
    if dim == 3:
        return (degree + 1) * (degree + 2) * (degree + 3) // 6
    raise ValueError(f"unsupported dimension {dim}")


@lru_cache(maxsize=None)
def exponent_tuples(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Multi-index enumeration for the graded scaled-monomial basis."""
    if degree < 0:
        return ()
    out: list[tuple[int, ...]] = []
    if dim == 2:
        for t in range(degree + 1):
            for a in range(t, -1, -1):
                out.append((a, t - a))
    elif dim == 3:
        for t in range(degree + 1):
            for a in range(t, -1, -1):
                for b in range(t - a, -1, -1):
                    out.append((a, b, t - a - b))
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return tuple(out)


@lru_cache(maxsize=None)
def _index_lookup(dim: int, degree: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(exponent_tuples(dim, degree))}


def index_of(dim: int, alpha: tuple[int, ...], degree: int | None = None) -> int:
    """Linear (0-based) index of a multi-index in the graded enumeration."""
    deg = sum(alpha) if degree is None else degree
    return _index_lookup(dim, deg)[tuple(alpha)]


def exponent_array(dim: int, degree: int) -> np.ndarray:
    return np.array(exponent_tuples(dim, degree), dtype=int).reshape(-1, dim)


def eval_scaled_monomials(dim, degree, centroid, diameter, points) -> np.ndarray:
    """Values of all scaled monomials at the given points.

    Returns an array of shape (n_poly, n_points); row order follows
    ``exponent_tuples``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = (pts - np.asarray(centroid, dtype=float)) / float(diameter)
    # cumulative powers per coordinate, shape (degree+1, n_points)
    powers = []
    for j in range(dim):
        pw = np.ones((degree + 1, u.shape[0]))
        for p in range(1, degree + 1):
            pw[p] = pw[p - 1] * u[:, j]
        powers.append(pw)
    exps = exponent_tuples(dim, degree)
    vals = np.empty((len(exps), u.shape[0]))
    for i, a in enumerate(exps):
        v = powers[0][a[0]]
        for j in range(1, dim):
            v = v * powers[j][a[j]]
        vals[i] = v
    return vals


@lru_cache(maxsize=None)
def _derivative_matrix_unit(dim: int, degree: int, j: int) -> np.ndarray:
    """d/dx_j as a map from monomial coefficients of degree k to degree k-1,
    for unit diameter.  Shape (n_{k-1}, n_k)."""
    n_lo = poly_space_dim(dim, degree - 1)
    n_hi = poly_space_dim(dim, degree)
    mat = np.zeros((n_lo, n_hi))
    lo = _index_lookup(dim, degree - 1) if degree >= 1 else {}
    for i, a in enumerate(exponent_tuples(dim, degree)):
        if a[j] == 0:
            continue
        b = list(a)
        b[j] -= 1
        mat[lo[tuple(b)], i] = a[j]
    return mat


def derivative_matrix(dim, degree, j, diameter=1.0) -> np.ndarray:
    """Coefficient map of d/dx_j from M_k to M_{k-1} on a scaled basis."""
    return _derivative_matrix_unit(dim, degree, j) / float(diameter)


def laplacian_matrix(dim, degree, diameter=1.0) -> np.ndarray:
    """Coefficient map of the Laplacian from M_k to M_{k-2}."""
    n_lo = poly_space_dim(dim, degree - 2)
    n_hi = poly_space_dim(dim, degree)
    mat = np.zeros((n_lo, n_hi))
    if degree < 2:
        return mat
    lo = _index_lookup(dim, degree - 2)
    h2 = float(diameter) ** 2
    for i, a in enumerate(exponent_tuples(dim, degree)):
        for j in range(dim):
            if a[j] < 2:
                continue
            b = list(a)
            b[j] -= 2
            mat[lo[tuple(b)], i] += a[j] * (a[j] - 1) / h2
    return mat


@dataclass(frozen=True)
class BasisRep:
    """Polynomial basis of degree <= degree on one element.

    ``coeff`` expresses each basis function as a row of coefficients over the
    scaled monomials of the element identified by (centroid, diameter).
    """

    dim: int
    degree: int
    centroid: np.ndarray
    diameter: float
    coeff: np.ndarray

    @property
    def n(self) -> int:
        return poly_space_dim(self.dim, self.degree)

    @property
    def is_monomial(self) -> bool:
        return bool(np.array_equal(self.coeff, np.eye(self.n)))

    def monomial_values(self, points) -> np.ndarray:
        return eval_scaled_monomials(self.dim, self.degree, self.centroid,
                                     self.diameter, points)

    def evaluate(self, points, upto: int | None = None) -> np.ndarray:
        """Basis values at points; restrict to degree ``upto`` if given."""
        vals = self.coeff @ self.monomial_values(points)
        if upto is not None:
            vals = vals[: poly_space_dim(self.dim, upto)]
        return vals

    def evaluate_gradient(self, points) -> np.ndarray:
        """Gradients of all basis functions; shape (dim, n, n_points)."""
        mono = self.monomial_values(points)
        out = np.empty((self.dim, self.n, mono.shape[1]))
        for j in range(self.dim):
            dj = derivative_matrix(self.dim, self.degree, j, self.diameter)
            out[j] = (self.coeff @ dj.T) @ mono[: dj.shape[0]]
        return out

    def evaluate_with_gradient(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients sharing one monomial evaluation."""
        mono = self.monomial_values(points)
        vals = self.coeff @ mono
        grads = np.empty((self.dim, self.n, mono.shape[1]))
        for j in range(self.dim):
            dj = derivative_matrix(self.dim, self.degree, j, self.diameter)
            grads[j] = (self.coeff @ dj.T) @ mono[: dj.shape[0]]
        return vals, grads

    def gradient_monomial_coeffs(self, j: int) -> np.ndarray:
        """Monomial coefficients of d(basis)/dx_j, shape (n, n_{k-1})."""
        dj = derivative_matrix(self.dim, self.degree, j, self.diameter)
        return self.coeff @ dj.T

    def laplacian_monomial_coeffs(self) -> np.ndarray:
        """Monomial coefficients of the basis Laplacians, shape (n, n_{k-2})."""
        lap = laplacian_matrix(self.dim, self.degree, self.diameter)
        return self.coeff @ lap.T

    def monomial_to_basis(self, mono_coeffs: np.ndarray) -> np.ndarray:
        """Re-express monomial coefficient vectors in this basis.

        ``mono_coeffs`` has monomial index on its last axis (length <= n);
        the result has the same shape with basis index instead.
        """
        m = np.asarray(mono_coeffs, dtype=float)
        nsub = m.shape[-1]
        sub = self.coeff[:nsub, :nsub]
        if np.array_equal(sub, np.eye(nsub)):
            return m
        return solve_triangular(sub, m.T, lower=True, trans="T").T


def monomial_basis(dim, degree, centroid, diameter) -> BasisRep:
    n = poly_space_dim(dim, degree)
    return BasisRep(dim, degree, np.asarray(centroid, dtype=float),
                    float(diameter), np.eye(n))


def orthonormalize(dim, degree, centroid, diameter, points, weights) -> BasisRep:
    """Orthonormal polynomial basis w.r.t. the quadrature inner product.

    Modified Gram-Schmidt over the sampled monomials, with an unconditional
    second orthogonalization pass.  The returned coefficient matrix is lower
    triangular with positive diagonal.
    """
    w = np.asarray(weights, dtype=float)
    measure = float(w.sum())
    wn = w / measure  # RMS inner product: pivot norms are element-size free
    vals = eval_scaled_monomials(dim, degree, centroid, diameter, points)
    n = vals.shape[0]
    coeff = np.eye(n)
    q = vals.astype(float).copy()
    for _ in range(2):  # unconditional second pass
        for i in range(n):
            nrm = float(np.sqrt(np.dot(wn, q[i] * q[i])))
            if nrm < MGS_BREAKDOWN_TOL:
                raise NumericalBreakdown(
                    f"Gram-Schmidt pivot {i} collapsed (norm {nrm:.3e})")
            q[i] /= nrm
            coeff[i] /= nrm
            if i + 1 < n:
                r = q[i + 1:] @ (wn * q[i])
                q[i + 1:] -= np.outer(r, q[i])
                coeff[i + 1:] -= np.outer(r, coeff[i])
    # rescale to the plain L2-orthonormal family
    return BasisRep(dim, degree, np.asarray(centroid, dtype=float),
                    float(diameter), coeff / np.sqrt(measure))
