"""Manufactured advection-diffusion-reaction problems.

Four benchmark problems with known exact solutions; sources are hand-derived
closed forms (each checked against a finite-difference residual oracle in the
test suite).  Problems evaluate coefficient fields point-wise on arrays of
shape (n, d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownProblem
from .local import AdrCoefficients


@dataclass
class Problem:
    """Coefficients plus the exact solution/gradient used for error norms."""

    name: str
    dim: int
    coeffs: AdrCoefficients
    exact: callable          # (n, d) -> (n,)
    exact_gradient: callable  # (n, d) -> (n, d)
    dirichlet: callable       # boundary data, defaults to the exact solution


def _quartic_bubble(eps: float) -> Problem:
    """Constant-coefficient diffusion with a degree-4 solution on (0, eps)^2."""
    c = 16.0 / eps ** 4

    def exact(p):
        x, y = p[:, 0], p[:, 1]
        return 1.1 + c * x * y * (eps - x) * (eps - y)

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        gx = c * (eps - 2 * x) * y * (eps - y)
        gy = c * x * (eps - x) * (eps - 2 * y)
        return np.column_stack([gx, gy])

    def source(p):
        x, y = p[:, 0], p[:, 1]
        return 2 * c * (x * (eps - x) + y * (eps - y))

    coeffs = AdrCoefficients(
        diffusion=lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2)),
        advection=lambda p: np.zeros((len(p), 2)),
        reaction=lambda p: np.zeros(len(p)),
        source=source,
    )
    return Problem("test1", 2, coeffs, exact, grad, exact)


def _sine_variable_2d() -> Problem:
    """Full variable-coefficient ADR with a sine solution on the unit square."""

    def diffusion(p):
        x, y = p[:, 0], p[:, 1]
        d = np.empty((len(p), 2, 2))
        d[:, 0, 0] = 1 + y ** 2
        d[:, 0, 1] = -x * y
        d[:, 1, 0] = -x * y
        d[:, 1, 1] = 1 + x ** 2
        return d

    def advection(p):
        return np.column_stack([p[:, 0], -p[:, 1]])  # divergence free

    def reaction(p):
        return p[:, 0] * p[:, 1]

    def exact(p):
        return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([
            np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
            np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        ])

    def source(p):
        x, y = p[:, 0], p[:, 1]
        sx, sy = np.sin(np.pi * x), np.sin(np.pi * y)
        cx, cy = np.cos(np.pi * x), np.cos(np.pi * y)
        pi2 = np.pi ** 2
        return (pi2 * (2 + x ** 2 + y ** 2) * sx * sy
                + 2 * pi2 * x * y * cx * cy
                + 2 * np.pi * x * cx * sy
                + x * y * sx * sy)

    coeffs = AdrCoefficients(diffusion, advection, reaction, source)
    return Problem("test2", 2, coeffs, exact, grad, exact)


def _sextic_bubble_3d() -> Problem:
    """Poisson with a degree-6 solution on the unit cube."""

    def g(t):
        return t * (1 - t)

    def exact(p):
        return 1.7 + 64 * g(p[:, 0]) * g(p[:, 1]) * g(p[:, 2])

    def grad(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        return 64 * np.column_stack([
            (1 - 2 * x) * g(y) * g(z),
            g(x) * (1 - 2 * y) * g(z),
            g(x) * g(y) * (1 - 2 * z),
        ])

    def source(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        return 128 * (g(x) * g(y) + g(y) * g(z) + g(x) * g(z))

    coeffs = AdrCoefficients(
        diffusion=lambda p: np.broadcast_to(np.eye(3), (len(p), 3, 3)),
        advection=lambda p: np.zeros((len(p), 3)),
        reaction=lambda p: np.zeros(len(p)),
        source=source,
    )
    return Problem("test3", 3, coeffs, exact, grad, exact)


def _sine_variable_3d() -> Problem:
    """Full variable-coefficient ADR with a sine solution on the unit cube."""

    def diffusion(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        d = np.empty((len(p), 3, 3))
        d[:, 0, 0] = 1 + y ** 2 + z ** 2
        d[:, 1, 1] = 1 + x ** 2 + z ** 2
        d[:, 2, 2] = 1 + x ** 2 + y ** 2
        d[:, 0, 1] = d[:, 1, 0] = -x * y
        d[:, 0, 2] = d[:, 2, 0] = -x * z
        d[:, 1, 2] = d[:, 2, 1] = -y * z
        return d

    def advection(p):
        return np.column_stack([p[:, 0], p[:, 1], -2 * p[:, 2]])  # divergence free

    def reaction(p):
        return p[:, 0] * p[:, 1] * p[:, 2]

    def exact(p):
        return (np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
                * np.sin(np.pi * p[:, 2]))

    def grad(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        sx, sy, sz = np.sin(np.pi * x), np.sin(np.pi * y), np.sin(np.pi * z)
        cx, cy, cz = np.cos(np.pi * x), np.cos(np.pi * y), np.cos(np.pi * z)
        return np.pi * np.column_stack([cx * sy * sz, sx * cy * sz, sx * sy * cz])

    def source(p):
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        sx, sy, sz = np.sin(np.pi * x), np.sin(np.pi * y), np.sin(np.pi * z)
        cx, cy, cz = np.cos(np.pi * x), np.cos(np.pi * y), np.cos(np.pi * z)
        u = sx * sy * sz
        pi2 = np.pi ** 2
        out = pi2 * (3 + 2 * (x ** 2 + y ** 2 + z ** 2)) * u
        out += 2 * pi2 * (x * y * cx * cy * sz + x * z * cx * cz * sy
                          + y * z * cy * cz * sx)
        # first-order terms: divergence of D contributes +2 x . grad u
        out += 2 * np.pi * (x * cx * sy * sz + y * cy * sx * sz + z * cz * sx * sy)
        out += np.pi * (x * cx * sy * sz + y * cy * sx * sz - 2 * z * cz * sx * sy)
        out += x * y * z * u
        return out

    coeffs = AdrCoefficients(diffusion, advection, reaction, source)
    return Problem("test4", 3, coeffs, exact, grad, exact)


def problem_library(name: str, epsilon: float = 1.0) -> Problem:
    """Look up a manufactured problem by id (test1 takes the domain edge)."""
    key = name.strip().lower()
    if key == "test1":
        return _quartic_bubble(epsilon)
    if key == "test2":
        return _sine_variable_2d()
    if key == "test3":
        return _sextic_bubble_3d()
    if key == "test4":
        return _sine_variable_3d()
    raise UnknownProblem(f"no problem named {name!r}")
