"""Reference-triangle shape functions and quadrature.

The reference triangle has vertices (0,0), (1,0), (0,1) and barycentric
coordinates ``lam = (1 - xi - eta, xi, eta)``.  Every basis is written in
barycentric form; gradients with respect to ``(xi, eta)`` follow by the
chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class Family(str, Enum):
    P0 = "P0"
    P1 = "P1"
    P2 = "P2"
    P1_BUBBLE = "P1_BUBBLE"
    P1_NONCONFORMING = "P1_NONCONFORMING"


# d(lam)/d(xi, eta)
_DLAM = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

_VERTICES = np.eye(3)
# edge i is opposite vertex i
_EDGE_MIDPOINTS = 0.5 * (np.ones((3, 3)) - np.eye(3))
_BARYCENTER = np.full((1, 3), 1.0 / 3.0)


@dataclass(frozen=True)
class ReferenceElement:
    family: Family
    dofs_per_cell: int
    nodes: np.ndarray
    _values: Callable[[np.ndarray], np.ndarray]
    _lam_derivs: Callable[[np.ndarray], np.ndarray]

    def eval(self, bary) -> np.ndarray:
        """Shape function values at barycentric points, shape (q, ndof)."""
        return self._values(np.atleast_2d(np.asarray(bary, dtype=float)))

    def grad(self, bary) -> np.ndarray:
        """Reference gradients d/d(xi, eta), shape (q, ndof, 2)."""
        dlam = self._lam_derivs(np.atleast_2d(np.asarray(bary, dtype=float)))
        return dlam @ _DLAM


def _p0_values(lam):
    return np.ones((len(lam), 1))


def _p0_derivs(lam):
    return np.zeros((len(lam), 1, 3))


def _p1_values(lam):
    return lam.copy()


def _p1_derivs(lam):
    return np.broadcast_to(np.eye(3), (len(lam), 3, 3)).copy()


def _p2_values(lam):
    l0, l1, l2 = lam.T
    return np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1]
    )


def _p2_derivs(lam):
    l0, l1, l2 = lam.T
    z = np.zeros_like(l0)
    d = np.empty((len(lam), 6, 3))
    d[:, 0] = np.column_stack([4 * l0 - 1, z, z])
    d[:, 1] = np.column_stack([z, 4 * l1 - 1, z])
    d[:, 2] = np.column_stack([z, z, 4 * l2 - 1])
    d[:, 3] = np.column_stack([z, 4 * l2, 4 * l1])
    d[:, 4] = np.column_stack([4 * l2, z, 4 * l0])
    d[:, 5] = np.column_stack([4 * l1, 4 * l0, z])
    return d


def _bubble_values(lam):
    b = 27.0 * lam.prod(axis=1)
    return np.column_stack([lam, b])


def _bubble_derivs(lam):
    l0, l1, l2 = lam.T
    d = np.empty((len(lam), 4, 3))
    d[:, :3] = np.eye(3)
    d[:, 3] = 27.0 * np.column_stack([l1 * l2, l0 * l2, l0 * l1])
    return d


def _cr_values(lam):
    return 1.0 - 2.0 * lam


def _cr_derivs(lam):
    return np.broadcast_to(-2.0 * np.eye(3), (len(lam), 3, 3)).copy()


_TABLE = {
    Family.P0: (1, _BARYCENTER, _p0_values, _p0_derivs),
    Family.P1: (3, _VERTICES, _p1_values, _p1_derivs),
    Family.P2: (6, np.vstack([_VERTICES, _EDGE_MIDPOINTS]), _p2_values, _p2_derivs),
    Family.P1_BUBBLE: (4, np.vstack([_VERTICES, _BARYCENTER]), _bubble_values, _bubble_derivs),
    Family.P1_NONCONFORMING: (3, _EDGE_MIDPOINTS, _cr_values, _cr_derivs),
}


def reference_element(family) -> ReferenceElement:
    try:
        family = Family(family)
    except ValueError:
        raise ValueError(f"unknown element family {family!r}") from None
    ndof, nodes, values, derivs = _TABLE[family]
    nodes = nodes.copy()
    nodes.setflags(write=False)
    return ReferenceElement(family, ndof, nodes, values, derivs)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


MAX_QUADRATURE_DEGREE = 10


@lru_cache(maxsize=None)
def quadrature(degree: int) -> QuadratureRule:
    """Collapsed-coordinate Gauss rule exact for polynomials of total degree ``degree``.

    Gauss-Legendre in the collapsed direction times Gauss-Jacobi(1, 0) in
    the other; weights sum to the reference area 1/2.
    """
    if int(degree) != degree or not 1 <= degree <= MAX_QUADRATURE_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r}")
    m = int(degree) // 2 + 1
    s, ws = roots_legendre(m)
    r, wr = roots_jacobi(m, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    t = 0.5 * (r + 1.0)
    wt = 0.25 * wr
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    xi = (S * (1.0 - T)).ravel()
    eta = T.ravel()
    points = np.column_stack([1.0 - xi - eta, xi, eta])
    weights = W.ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(degree))


# assembly integrands are at most degree 6 (bubble gradients squared: 4)
ASSEMBLY_DEGREE = 6
# error norms see trigonometric data
ERROR_DEGREE = 8
