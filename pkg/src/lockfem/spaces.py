"""Degree-of-freedom layouts, nodal interpolation and Dirichlet elimination."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .fem_basis import Family, ReferenceElement, reference_element
from .mesh import Mesh


@dataclass(frozen=True)
class ElementPair:
    name: str
    velocity_family: Family
    pressure_family: Family
    conforming: bool
    pressure_continuous: bool


TAYLOR_HOOD = ElementPair("TAYLOR_HOOD", Family.P2, Family.P1, True, True)
SCOTT_VOGELIUS = ElementPair("SCOTT_VOGELIUS", Family.P2, Family.P1, True, False)
MINI = ElementPair("MINI", Family.P1_BUBBLE, Family.P1, True, True)
CROUZEIX_RAVIART = ElementPair("CROUZEIX_RAVIART", Family.P1_NONCONFORMING, Family.P0, False, False)

ELEMENT_PAIRS = {p.name: p for p in (TAYLOR_HOOD, SCOTT_VOGELIUS, MINI, CROUZEIX_RAVIART)}
_ALIASES = {"TH": "TAYLOR_HOOD", "SV": "SCOTT_VOGELIUS", "CR": "CROUZEIX_RAVIART"}
SHORT_NAMES = {"TAYLOR_HOOD": "TH", "SCOTT_VOGELIUS": "SV", "MINI": "MINI", "CROUZEIX_RAVIART": "CR"}


def element_pair(name) -> ElementPair:
    """Look up a pair by full name or the usual abbreviation (TH, SV, MINI, CR)."""
    if isinstance(name, ElementPair):
        return name
    key = str(name).upper().replace("-", "_")
    key = _ALIASES.get(key, key)
    try:
        return ELEMENT_PAIRS[key]
    except KeyError:
        raise ValueError(f"unknown element pair {name!r}") from None


class ScalarSpace:
    """Scalar finite element space on a mesh.

    ``nodes`` holds the physical location of every degree of freedom;
    ``nodal`` marks the ones set by point evaluation during interpolation
    (bubble coefficients are not).
    """

    def __init__(self, mesh: Mesh, family, continuous: bool = True):
        self.mesh = mesh
        self.element: ReferenceElement = reference_element(family)
        self.family = self.element.family
        self.continuous = continuous if self.family not in (Family.P0, Family.P1_NONCONFORMING) else False
        nt, nv = mesh.n_triangles, mesh.n_vertices
        fam = self.family
        nodal = None
        if fam is Family.P0:
            cell_dofs = np.arange(nt)[:, None]
            nodes = mesh.barycenters
            boundary = np.zeros(nt, dtype=bool)
        elif fam is Family.P1 and continuous:
            cell_dofs = mesh.triangles
            nodes = mesh.vertices
            boundary = mesh.boundary_vertex_flags
        elif fam is Family.P1:
            cell_dofs = np.arange(3 * nt).reshape(nt, 3)
            nodes = mesh.vertices[mesh.triangles].reshape(-1, 2)
            boundary = mesh.boundary_vertex_flags[mesh.triangles].ravel()
        elif fam is Family.P2:
            cell_dofs = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
            nodes = np.vstack([mesh.vertices, mesh.edge_midpoints])
            boundary = np.r_[mesh.boundary_vertex_flags, mesh.boundary_edge_flags]
        elif fam is Family.P1_BUBBLE:
            cell_dofs = np.hstack([mesh.triangles, nv + np.arange(nt)[:, None]])
            nodes = np.vstack([mesh.vertices, mesh.barycenters])
            boundary = np.r_[mesh.boundary_vertex_flags, np.zeros(nt, dtype=bool)]
            nodal = np.r_[np.ones(nv, dtype=bool), np.zeros(nt, dtype=bool)]
        else:
            cell_dofs = mesh.triangle_edges
            nodes = mesh.edge_midpoints
            boundary = mesh.boundary_edge_flags
        self.cell_dofs = np.ascontiguousarray(cell_dofs, dtype=np.int64)
        self.nodes = np.asarray(nodes, dtype=float)
        self.n_dofs = len(self.nodes)
        self.boundary_dofs = np.flatnonzero(boundary)
        self.nodal = np.ones(self.n_dofs, dtype=bool) if nodal is None else nodal

    def __repr__(self):
        kind = "" if self.continuous or self.family is Family.P0 else " disc"
        return f"ScalarSpace({self.family.value}{kind}, n_dofs={self.n_dofs})"

    def values(self, bary) -> np.ndarray:
        """Reference shape values at barycentric points, shape (q, nloc)."""
        return self.element.eval(bary)

    def gradients(self, bary) -> np.ndarray:
        """Physical shape gradients on every cell, shape (m, q, nloc, 2)."""
        ref = self.element.grad(bary)
        return np.einsum("qad,kdc->kqac", ref, self.mesh.inverse_jacobians)

    def evaluate(self, coeffs, bary) -> np.ndarray:
        """Field values on every cell at barycentric points, shape (m, q)."""
        local = np.asarray(coeffs)[self.cell_dofs]
        return local @ self.values(bary).T

    def evaluate_gradient(self, coeffs, bary) -> np.ndarray:
        """Broken gradient on every cell, shape (m, q, 2)."""
        local = np.asarray(coeffs)[self.cell_dofs]
        return np.einsum("ka,kqac->kqc", local, self.gradients(bary))

    def interpolate(self, f, t: float = 0.0) -> np.ndarray:
        x, y = self.nodes.T
        coeffs = np.zeros(self.n_dofs)
        coeffs[self.nodal] = np.broadcast_to(f(x[self.nodal], y[self.nodal], t), (int(self.nodal.sum()),))
        return coeffs


class DofMap:
    """Velocity/pressure layout for one element pair.

    Velocity unknowns are blocked by component: all x-coefficients, then all
    y-coefficients of the scalar velocity space.
    """

    def __init__(self, mesh: Mesh, pair: ElementPair):
        self.mesh = mesh
        self.pair = pair
        self.velocity_space = ScalarSpace(mesh, pair.velocity_family)
        self.pressure_space = ScalarSpace(mesh, pair.pressure_family, continuous=pair.pressure_continuous)
        ns = self.velocity_space.n_dofs
        self.n_scalar_velocity_dofs = ns
        self.n_velocity_dofs = 2 * ns
        self.n_pressure_dofs = self.pressure_space.n_dofs
        self.cell_to_velocity_dofs = np.hstack([self.velocity_space.cell_dofs, ns + self.velocity_space.cell_dofs])
        self.cell_to_pressure_dofs = self.pressure_space.cell_dofs
        b = self.velocity_space.boundary_dofs
        self.dirichlet_dofs = np.r_[b, ns + b]
        self.dirichlet_points = np.vstack([self.velocity_space.nodes[b]] * 2)

    def __repr__(self):
        return (
            f"DofMap({self.pair.name}, velocity={self.n_velocity_dofs}, "
            f"pressure={self.n_pressure_dofs}, dirichlet={len(self.dirichlet_dofs)})"
        )

    @property
    def n_total(self) -> int:
        """Velocity + pressure + one mean-value multiplier."""
        return self.n_velocity_dofs + self.n_pressure_dofs + 1

    @cached_property
    def free_velocity_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_velocity_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


def build_dof_map(mesh: Mesh, pair) -> DofMap:
    return DofMap(mesh, element_pair(pair))


@dataclass
class DiscreteField:
    dofmap: DofMap
    velocity: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.pressure = np.asarray(self.pressure, dtype=float)
        if self.velocity.shape != (self.dofmap.n_velocity_dofs,):
            raise ValueError("velocity coefficient length does not match the dof map")
        if self.pressure.shape != (self.dofmap.n_pressure_dofs,):
            raise ValueError("pressure coefficient length does not match the dof map")

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "DiscreteField":
        return cls(dofmap, np.zeros(dofmap.n_velocity_dofs), np.zeros(dofmap.n_pressure_dofs))

    def velocity_components(self) -> tuple[np.ndarray, np.ndarray]:
        ns = self.dofmap.n_scalar_velocity_dofs
        return self.velocity[:ns], self.velocity[ns:]


def velocity_values(dofmap: DofMap, coeffs, bary) -> np.ndarray:
    """Velocity on every cell at barycentric points, shape (m, q, 2)."""
    ns = dofmap.n_scalar_velocity_dofs
    V = dofmap.velocity_space
    return np.stack([V.evaluate(coeffs[:ns], bary), V.evaluate(coeffs[ns:], bary)], axis=-1)


def velocity_gradients(dofmap: DofMap, coeffs, bary) -> np.ndarray:
    """Broken velocity gradient ``G[..., i, j] = d u_i / d x_j``, shape (m, q, 2, 2)."""
    ns = dofmap.n_scalar_velocity_dofs
    V = dofmap.velocity_space
    return np.stack([V.evaluate_gradient(coeffs[:ns], bary), V.evaluate_gradient(coeffs[ns:], bary)], axis=-2)


def interpolate_nodally(f, dofmap: DofMap, t: float = 0.0, component: str = "velocity") -> np.ndarray:
    """Nodal interpolant coefficients of ``f(x, y, t)``.

    For ``component="velocity"`` ``f`` returns a pair ``(u1, u2)``; for
    ``"pressure"`` a scalar.  Bubble coefficients are zero and P0 takes the
    barycenter value.
    """
    if component == "velocity":
        V = dofmap.velocity_space
        x, y = V.nodes[V.nodal].T
        u1, u2 = f(x, y, t)
        out = np.zeros(dofmap.n_velocity_dofs)
        ns = dofmap.n_scalar_velocity_dofs
        idx = np.flatnonzero(V.nodal)
        out[idx] = u1
        out[ns + idx] = u2
        return out
    if component == "pressure":
        return dofmap.pressure_space.interpolate(f, t)
    raise ValueError(f"component must be 'velocity' or 'pressure', got {component!r}")


def dirichlet_values(dofmap: DofMap, g, t: float = 0.0) -> np.ndarray:
    """Values of the velocity function ``g`` at the Dirichlet nodes, ordered like ``dirichlet_dofs``."""
    if g is None:
        return np.zeros(len(dofmap.dirichlet_dofs))
    b = dofmap.velocity_space.boundary_dofs
    x, y = dofmap.velocity_space.nodes[b].T
    u1, u2 = g(x, y, t)
    return np.r_[np.broadcast_to(u1, x.shape), np.broadcast_to(u2, x.shape)]


def apply_dirichlet(matrix, rhs, dofs, values):
    """Symmetric elimination of prescribed unknowns.

    Rows and columns of ``dofs`` are replaced by identity; the right-hand
    side of the remaining rows is corrected by the eliminated columns.
    """
    matrix = sp.csr_matrix(matrix)
    n = matrix.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    g = np.zeros(n)
    g[dofs] = values
    rhs = np.asarray(rhs, dtype=float) - matrix @ g
    rhs[dofs] = values
    keep = np.ones(n)
    keep[dofs] = 0.0
    K = sp.diags(keep) @ matrix @ sp.diags(keep) + sp.diags(1.0 - keep)
    K = sp.csr_matrix(K)
    K.eliminate_zeros()
    K.sort_indices()
    return K, rhs
