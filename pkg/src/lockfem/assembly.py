"""Sparse assembly of the mass, stiffness, divergence and convection operators.

All element loops are vectorised over cells; local contributions are
scattered in cell order and duplicate entries summed by scipy, so the
result does not depend on anything but the mesh numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem_basis import ASSEMBLY_DEGREE, quadrature
from .spaces import DofMap, ScalarSpace, velocity_values


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    mat = sp.coo_matrix((vals.ravel(), (r, c)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _block_diag2(scalar: sp.spmatrix) -> sp.csr_matrix:
    return sp.block_diag([scalar, scalar], format="csr")


def _cell_weights(mesh, degree: int):
    rule = quadrature(degree)
    # reference area is 1/2, so |det J| = 2 * area
    scale = 2.0 * np.abs(mesh.signed_areas)
    return rule, scale[:, None] * rule.weights[None, :]


def scalar_mass(space: ScalarSpace, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    rule, wk = _cell_weights(space.mesh, degree)
    phi = space.values(rule.points)
    local = np.einsum("kq,qa,qb->kab", wk, phi, phi)
    return _scatter(space.cell_dofs, space.cell_dofs, local, (space.n_dofs, space.n_dofs))


def scalar_stiffness(space: ScalarSpace, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    rule, wk = _cell_weights(space.mesh, degree)
    G = space.gradients(rule.points)
    local = np.einsum("kq,kqad,kqbd->kab", wk, G, G)
    return _scatter(space.cell_dofs, space.cell_dofs, local, (space.n_dofs, space.n_dofs))


def assemble_mass(dofmap: DofMap, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """Vector velocity mass matrix ``M_ij = (phi_j, phi_i)``."""
    return _block_diag2(scalar_mass(dofmap.velocity_space, degree))


def assemble_stiffness(dofmap: DofMap, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """Vector Laplacian ``A_ij = (grad phi_j, grad phi_i)``, cellwise for nonconforming spaces."""
    return _block_diag2(scalar_stiffness(dofmap.velocity_space, degree))


def assemble_divergence(dofmap: DofMap, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """``B[q, j] = (div phi_j, psi_q)`` with the broken divergence on each cell."""
    V, Q = dofmap.velocity_space, dofmap.pressure_space
    rule, wk = _cell_weights(dofmap.mesh, degree)
    G = V.gradients(rule.points)
    psi = Q.values(rule.points)
    bx = np.einsum("kq,qi,kqa->kia", wk, psi, G[..., 0])
    by = np.einsum("kq,qi,kqa->kia", wk, psi, G[..., 1])
    local = np.concatenate([bx, by], axis=2)
    return _scatter(Q.cell_dofs, dofmap.cell_to_velocity_dofs, local, (Q.n_dofs, dofmap.n_velocity_dofs))


def assemble_pressure_mass(dofmap: DofMap, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    return scalar_mass(dofmap.pressure_space, degree)


def assemble_pressure_mean(dofmap: DofMap, degree: int = ASSEMBLY_DEGREE) -> np.ndarray:
    """``m_q = integral of psi_q``, so that ``m @ p`` is the integral of the pressure."""
    Q = dofmap.pressure_space
    rule, wk = _cell_weights(dofmap.mesh, degree)
    local = wk @ Q.values(rule.points)
    out = np.zeros(Q.n_dofs)
    np.add.at(out, Q.cell_dofs, local)
    return out


def assemble_load(dofmap: DofMap, f, t: float = 0.0, degree: int = ASSEMBLY_DEGREE) -> np.ndarray:
    """``(f(., t), phi_i)`` for a vector function ``f(x, y, t) -> (f1, f2)``."""
    V = dofmap.velocity_space
    rule, wk = _cell_weights(dofmap.mesh, degree)
    xq = dofmap.mesh.to_physical(rule.points)
    f1, f2 = f(xq[..., 0], xq[..., 1], t)
    phi = V.values(rule.points)
    out = np.zeros(dofmap.n_velocity_dofs)
    ns = V.n_dofs
    for comp, fc in enumerate((f1, f2)):
        fc = np.broadcast_to(fc, wk.shape)
        np.add.at(out[comp * ns:(comp + 1) * ns], V.cell_dofs, np.einsum("kq,kq,qa->ka", wk, fc, phi))
    return out


def assemble_convection(dofmap: DofMap, w, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """``N_ij = ((w . grad) phi_j, phi_i)`` for velocity coefficients ``w`` of the same space."""
    V = dofmap.velocity_space
    rule, wk = _cell_weights(dofmap.mesh, degree)
    wq = velocity_values(dofmap, np.asarray(w, dtype=float), rule.points)
    G = V.gradients(rule.points)
    adv = np.einsum("kqc,kqac->kqa", wq, G)
    local = np.einsum("kq,qi,kqa->kia", wk, V.values(rule.points), adv)
    n = V.n_dofs
    return _block_diag2(_scatter(V.cell_dofs, V.cell_dofs, local, (n, n)))


@dataclass
class SaddleSystem:
    """Blocks of the discrete Stokes operator.

    The combined matrix acting on ``(u, p, mu)`` is::

        [ alpha M + nu A (+ N)   -B^T   0 ]
        [ -B                      0     m ]
        [ 0                       m^T   0 ]

    which is symmetric when no convection block is present.  The scalar
    ``mu`` enforces zero pressure mean.
    """

    dofmap: DofMap
    M: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    mean_row: np.ndarray
    rhs_velocity: np.ndarray = None
    rhs_pressure: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rhs_velocity is None:
            self.rhs_velocity = np.zeros(self.dofmap.n_velocity_dofs)
        if self.rhs_pressure is None:
            self.rhs_pressure = np.zeros(self.dofmap.n_pressure_dofs)

    def matrix(self, alpha: float = 0.0, nu: float = 1.0, convection=None, velocity_block=None) -> sp.csr_matrix:
        """Assemble the full saddle matrix; ``velocity_block`` overrides ``alpha M + nu A``."""
        if velocity_block is None:
            velocity_block = alpha * self.M + nu * self.A
        if convection is not None:
            velocity_block = velocity_block + convection
        m = sp.csr_matrix(self.mean_row[:, None])
        K = sp.bmat(
            [
                [velocity_block, -self.B.T, None],
                [-self.B, None, m],
                [None, m.T, None],
            ],
            format="csr",
        )
        K.sort_indices()
        return K

    def rhs(self, rhs_velocity=None, rhs_pressure=None) -> np.ndarray:
        rv = self.rhs_velocity if rhs_velocity is None else rhs_velocity
        rp = self.rhs_pressure if rhs_pressure is None else rhs_pressure
        return np.r_[rv, rp, 0.0]


def assemble_saddle_system(dofmap: DofMap, f=None, t: float = 0.0) -> SaddleSystem:
    rhs = assemble_load(dofmap, f, t) if f is not None else None
    return SaddleSystem(
        dofmap,
        M=assemble_mass(dofmap),
        A=assemble_stiffness(dofmap),
        B=assemble_divergence(dofmap),
        mean_row=assemble_pressure_mean(dofmap),
        rhs_velocity=rhs,
    )
