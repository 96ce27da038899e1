"""Uniform triangulations of the unit square and their barycentric (Alfeld) refinement."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class PointOutsideDomainError(ValueError):
    """Raised by :func:`locate_point` when the query point is not in any triangle."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with edge and boundary topology.

    ``triangle_edges[k, i]`` is the edge opposite local vertex ``i`` of
    triangle ``k``.  ``edge_triangles[e]`` lists the one or two triangles
    sharing edge ``e`` (``-1`` pads boundary edges).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    h_nominal: float
    edges: np.ndarray = field(init=False)
    triangle_edges: np.ndarray = field(init=False)
    edge_triangles: np.ndarray = field(init=False)
    boundary_edge_flags: np.ndarray = field(init=False)
    boundary_vertex_flags: np.ndarray = field(init=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        triangles = np.asarray(self.triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (m, 3)")

        # local edge i joins the two vertices other than i
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = np.sort(triangles[:, local], axis=2).reshape(-1, 2)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise ValueError("non-manifold edge in triangulation")
        triangle_edges = inverse.reshape(-1, 3)

        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        owners = np.repeat(np.arange(len(triangles)), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.r_[True, sorted_edges[1:] != sorted_edges[:-1]]
        edge_triangles[sorted_edges[first], 0] = owners[order][first]
        edge_triangles[sorted_edges[~first], 1] = owners[order][~first]

        boundary_edges = counts == 1
        boundary_vertices = np.zeros(len(vertices), dtype=bool)
        boundary_vertices[edges[boundary_edges].ravel()] = True

        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "triangles", _frozen(triangles))
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "triangle_edges", _frozen(triangle_edges))
        object.__setattr__(self, "edge_triangles", _frozen(edge_triangles))
        object.__setattr__(self, "boundary_edge_flags", _frozen(boundary_edges))
        object.__setattr__(self, "boundary_vertex_flags", _frozen(boundary_vertices))

        if np.any(self.signed_areas <= 0.0):
            raise ValueError("triangles must be positively oriented and non-degenerate")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return _frozen(0.5 * self.vertices[self.edges].sum(axis=1))

    @cached_property
    def barycenters(self) -> np.ndarray:
        return _frozen(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Affine map Jacobians ``[v1 - v0, v2 - v0]`` as columns, shape (m, 2, 2)."""
        p = self.vertices[self.triangles]
        return _frozen(np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2))

    @cached_property
    def signed_areas(self) -> np.ndarray:
        return _frozen(0.5 * np.linalg.det(self.jacobians))

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return _frozen(np.linalg.inv(self.jacobians))

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
        return _frozen(lengths.max(axis=1))

    @property
    def h(self) -> float:
        """Mesh size, the largest triangle diameter."""
        return float(self.diameters.max())

    def to_physical(self, bary: np.ndarray) -> np.ndarray:
        """Map barycentric points (q, 3) into every triangle; returns (m, q, 2)."""
        return np.einsum("qi,kid->kqd", np.asarray(bary, dtype=float), self.vertices[self.triangles])


def build_uniform_mesh(n: int) -> Mesh:
    """Split an ``n x n`` grid of squares along their lower-left to upper-right diagonals."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    vertices = np.column_stack([i.ravel() / n, j.ravel() / n])

    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (b * (n + 1) + a).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles, h_nominal=1.0 / n)


def alfeld_split(mesh: Mesh) -> Mesh:
    """Replace each triangle by three children sharing its barycenter."""
    nv = mesh.n_vertices
    centers = nv + np.arange(mesh.n_triangles)
    t = mesh.triangles
    children = np.stack(
        [
            np.column_stack([t[:, 1], t[:, 2], centers]),
            np.column_stack([t[:, 2], t[:, 0], centers]),
            np.column_stack([t[:, 0], t[:, 1], centers]),
        ],
        axis=1,
    ).reshape(-1, 3)
    vertices = np.vstack([mesh.vertices, mesh.barycenters])
    return Mesh(vertices, children, h_nominal=mesh.h_nominal)


def barycentric_coordinates(mesh: Mesh, x) -> np.ndarray:
    """Barycentric coordinates of point ``x`` with respect to every triangle, shape (m, 3)."""
    x = np.asarray(x, dtype=float)
    rel = x - mesh.vertices[mesh.triangles[:, 0]]
    xi = np.einsum("kij,kj->ki", mesh.inverse_jacobians, rel)
    return np.column_stack([1.0 - xi.sum(axis=1), xi])


def locate_point(mesh: Mesh, x, tol: float = 1e-12) -> tuple[int, np.ndarray]:
    """Find the lowest-index triangle containing ``x``.

    Returns the triangle index and barycentric coordinates clipped into
    [0, 1] and renormalised to sum to one.
    """
    lam = barycentric_coordinates(mesh, x)
    inside = np.flatnonzero(np.all(lam >= -tol, axis=1))
    if inside.size == 0:
        raise PointOutsideDomainError(f"point {tuple(np.asarray(x, dtype=float))} lies outside the mesh")
    k = int(inside[0])
    coords = np.clip(lam[k], 0.0, 1.0)
    return k, coords / coords.sum()
