"""Direct solution of the Dirichlet-eliminated saddle-point systems.

The symmetric saddle matrix is factorised once by a sparse LDL^T (qdldl,
AMD ordering, no pivoting).  A zero pressure block admits no pivot-free
LDL^T, so the factor is taken of a symmetrically equilibrated copy with
``-delta`` on the pressure diagonal and the exact system is recovered by
iterative refinement.  A
convection block makes the matrix nonsymmetric; those systems run GMRES
preconditioned by the same factorisation.  Either way the returned
solution is accepted only at the residual tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import qdldl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SaddleSystem
from .spaces import DiscreteField, apply_dirichlet

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-11
REGULARIZATION = 1e-10
MAX_REFINEMENT_STEPS = 40


class SolverError(RuntimeError):
    pass


class SingularFactorizationError(SolverError):
    pass


class ResidualToleranceError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverReport:
    relative_residual: float
    factorization_ok: bool
    n_velocity: int
    n_pressure: int
    n_total: int
    iterations: int = 0


def _relative(r, bnorm):
    rn = np.linalg.norm(r)
    return rn / bnorm if bnorm > 0 else rn


class SaddleSolver:
    """Factorised saddle operator ``alpha M + nu A`` with Dirichlet elimination.

    One instance serves any number of right-hand sides, Dirichlet values and
    convection blocks, which is what a constant-step time loop needs.
    """

    def __init__(self, system: SaddleSystem, alpha: float = 0.0, nu: float = 1.0, *,
                 velocity_block=None, tol: float = RESIDUAL_TOLERANCE):
        self.system = system
        self.dofmap = dm = system.dofmap
        self.tol = tol
        self.raw = system.matrix(alpha, nu, velocity_block=velocity_block)
        self.dirichlet_dofs = dm.dirichlet_dofs
        n = self.raw.shape[0]
        self.K, _ = apply_dirichlet(self.raw, np.zeros(n), self.dirichlet_dofs, np.zeros(len(self.dirichlet_dofs)))

        if not np.any(system.mean_row):
            raise SingularFactorizationError("pressure mean constraint is empty; the pressure is not unique")

        # symmetric equilibration: unit velocity diagonal, pressure rows of B
        # of unit norm, so the -delta shift means the same thing for every nu
        nv = dm.n_velocity_dofs
        npr = dm.n_pressure_dofs
        vdiag = np.abs(self.K.diagonal()[:nv])
        if np.any(vdiag == 0.0):
            raise SingularFactorizationError("zero diagonal in the velocity block")
        sv = 1.0 / np.sqrt(vdiag)
        Bs = self.K[nv:nv + npr, :nv] @ sp.diags(sv)
        rows = np.sqrt(np.asarray(Bs.multiply(Bs).sum(axis=1)).ravel())
        sq = np.where(rows > 0, 1.0 / np.where(rows > 0, rows, 1.0), 1.0)
        smu = 1.0 / np.linalg.norm(system.mean_row * sq)
        self.scale = np.r_[sv, sq, smu]
        S = sp.diags(self.scale)
        shift = np.zeros(n)
        shift[nv:] = -REGULARIZATION
        try:
            self._ldl = qdldl.Solver(sp.csc_matrix(S @ self.K @ S + sp.diags(shift)))
        except (ValueError, RuntimeError) as exc:
            raise SingularFactorizationError(f"LDL^T factorisation of size {n} failed: {exc}") from None
        _, d, _ = self._ldl.factors()
        if not np.all(np.isfinite(d)) or np.any(d == 0.0):
            raise SingularFactorizationError("zero or non-finite pivot in saddle factorisation")

    def _apply(self, r):
        """Approximate inverse of the eliminated operator through the scaled factor."""
        return self.scale * self._ldl.solve(self.scale * r)

    def _refine(self, K, b):
        bnorm = np.linalg.norm(b)
        x = self._apply(b)
        rel = _relative(b - K @ x, bnorm)
        steps = 0
        while rel > 0.01 * self.tol and steps < MAX_REFINEMENT_STEPS:
            trial = x + self._apply(b - K @ x)
            new = _relative(b - K @ trial, bnorm)
            steps += 1
            if new >= rel:
                break
            x, rel = trial, new
        return x, rel, steps

    def _gmres(self, K, b):
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b), 0.0, 0
        pre = spla.LinearOperator(K.shape, matvec=self._apply, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(K, b, x0=self._apply(b), M=pre, rtol=0.01 * self.tol, atol=0.0,
                             restart=50, maxiter=20, callback=cb, callback_type="pr_norm")
        rel = _relative(b - K @ x, bnorm)
        if rel > self.tol:
            # polish with refinement steps against the exact operator
            for _ in range(MAX_REFINEMENT_STEPS):
                x, _i = spla.gmres(K, b, x0=x, M=pre, rtol=0.01 * self.tol, atol=0.0, restart=50, maxiter=5)
                rel = _relative(b - K @ x, bnorm)
                if rel <= self.tol:
                    break
        return x, rel, count[0]

    def solve(self, rhs, dirichlet_values=None, convection=None) -> tuple[DiscreteField, SolverReport]:
        """Solve for the right-hand side ``rhs = (F, G, 0)`` with the given boundary values."""
        rhs = np.asarray(rhs, dtype=float)
        nd = len(self.dirichlet_dofs)
        dirichlet_values = np.zeros(nd) if dirichlet_values is None else np.asarray(dirichlet_values, dtype=float)
        dm = self.dofmap
        nv, npr = dm.n_velocity_dofs, dm.n_pressure_dofs

        if convection is None:
            raw, K = self.raw, self.K
        else:
            n = self.raw.shape[0]
            N = sp.block_diag([convection, sp.csr_matrix((n - nv, n - nv))], format="csr")
            raw = sp.csr_matrix(self.raw + N)
            K, _ = apply_dirichlet(raw, np.zeros(n), self.dirichlet_dofs, np.zeros(nd))

        g = np.zeros(len(rhs))
        g[self.dirichlet_dofs] = dirichlet_values
        b = rhs - raw @ g
        b[self.dirichlet_dofs] = dirichlet_values

        if convection is None:
            x, rel, its = self._refine(K, b)
        else:
            x, rel, its = self._gmres(K, b)

        report = SolverReport(float(rel), True, nv, npr, len(rhs), its)
        if not rel <= self.tol:
            raise ResidualToleranceError(f"relative residual {rel:.3e} exceeds {self.tol:.1e}", report)
        field = DiscreteField(dm, x[:nv], x[nv:nv + npr])
        mean = float(self.system.mean_row @ field.pressure)
        if abs(mean) > self.tol:
            raise ResidualToleranceError(f"pressure mean {mean:.3e} exceeds {self.tol:.1e}", report)
        return field, report


def solve_saddle(system: SaddleSystem, alpha: float = 0.0, nu: float = 1.0, convection=None,
                 dirichlet_values=None, rhs_velocity=None, rhs_pressure=None) -> tuple[DiscreteField, SolverReport]:
    """Solve ``(alpha M + nu A [+ N]) u - B^T p = F``, ``B u = G``, zero pressure mean."""
    solver = SaddleSolver(system, alpha, nu)
    return solver.solve(system.rhs(rhs_velocity, rhs_pressure), dirichlet_values, convection)
