"""Error norms, discrete projections and convergence rates.

``helmholtz_projection`` and ``stokes_projection`` map into the discretely
divergence-free space: the L2- and H1-orthogonal projections subject to
``(div v, q) = 0`` for every discrete pressure ``q``.  With ``boundary``
given, the projection carries that function's nodal boundary values (the
affine space a time-dependent solution with inhomogeneous Dirichlet data
lives in); otherwise it vanishes on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (
    SaddleSystem,
    assemble_load,
    assemble_pressure_mass,
    assemble_saddle_system,
)
from .fem_basis import ASSEMBLY_DEGREE, ERROR_DEGREE, MAX_QUADRATURE_DEGREE, Family, quadrature
from .linsolve import SaddleSolver
from .spaces import DiscreteField, DofMap, dirichlet_values, velocity_gradients, velocity_values


class HypothesisViolationError(ValueError):
    """The pressure space has no continuous, elementwise affine subspace."""


def _cell_rule(dofmap: DofMap, degree: int):
    rule = quadrature(degree)
    wk = 2.0 * np.abs(dofmap.mesh.signed_areas)[:, None] * rule.weights[None, :]
    xq = dofmap.mesh.to_physical(rule.points)
    return rule, wk, xq[..., 0], xq[..., 1]


def _coeffs(u) -> np.ndarray:
    return u.velocity if isinstance(u, DiscreteField) else np.asarray(u, dtype=float)


def _solver(system: SaddleSystem, alpha: float, nu: float) -> SaddleSolver:
    key = ("solver", alpha, nu)
    if key not in system._cache:
        system._cache[key] = SaddleSolver(system, alpha, nu)
    return system._cache[key]


def l2_error(u_h, exact, t: float = 0.0, dofmap: DofMap | None = None) -> float:
    """``||u_h - u(t)||_0`` by degree-8 quadrature; ``exact=None`` gives ``||u_h||_0``."""
    dofmap = u_h.dofmap if dofmap is None else dofmap
    rule, wk, x, y = _cell_rule(dofmap, ERROR_DEGREE)
    uh = velocity_values(dofmap, _coeffs(u_h), rule.points)
    if exact is not None:
        u1, u2 = exact(x, y, t)
        uh = uh - np.stack(np.broadcast_arrays(u1, u2), axis=-1)
    return float(np.sqrt(np.sum(wk * np.sum(uh**2, axis=-1))))


def h1_seminorm_error(u_h, exact_gradient, t: float = 0.0, dofmap: DofMap | None = None) -> float:
    """``||grad_h (u_h - u(t))||_0`` with the cellwise gradient."""
    dofmap = u_h.dofmap if dofmap is None else dofmap
    rule, wk, x, y = _cell_rule(dofmap, ERROR_DEGREE)
    G = velocity_gradients(dofmap, _coeffs(u_h), rule.points)
    if exact_gradient is not None:
        (a, b), (c, d) = exact_gradient(x, y, t)
        a, b, c, d = np.broadcast_arrays(a, b, c, d)
        G = G - np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)
    return float(np.sqrt(np.sum(wk * np.sum(G**2, axis=(-2, -1)))))


def pressure_l2_error(dofmap: DofMap, p_coeffs, exact=None, t: float = 0.0) -> float:
    rule, wk, x, y = _cell_rule(dofmap, ERROR_DEGREE)
    ph = dofmap.pressure_space.evaluate(p_coeffs, rule.points)
    if exact is not None:
        ph = ph - exact(x, y, t)
    return float(np.sqrt(np.sum(wk * ph**2)))


def pressure_gradient_error(dofmap: DofMap, p_coeffs, exact_gradient=None, t: float = 0.0) -> float:
    """``||grad_h (p - p_h)||_0`` with the cellwise gradient of the discrete pressure."""
    rule, wk, x, y = _cell_rule(dofmap, ERROR_DEGREE)
    g = dofmap.pressure_space.evaluate_gradient(p_coeffs, rule.points)
    if exact_gradient is not None:
        gx, gy = exact_gradient(x, y, t)
        g = g - np.stack(np.broadcast_arrays(gx, gy), axis=-1)
    return float(np.sqrt(np.sum(wk * np.sum(g**2, axis=-1))))


def _gradient_load(dofmap: DofMap, grad, t: float) -> np.ndarray:
    """``(grad w, grad phi_i)`` for ``grad(x, y, t) -> ((w1x, w1y), (w2x, w2y))``."""
    V = dofmap.velocity_space
    rule, wk, x, y = _cell_rule(dofmap, ASSEMBLY_DEGREE)
    G = V.gradients(rule.points)
    rows = grad(x, y, t)
    out = np.zeros(dofmap.n_velocity_dofs)
    ns = V.n_dofs
    for comp, (gx, gy) in enumerate(rows):
        gx, gy = np.broadcast_arrays(gx, gy)
        local = np.einsum("kq,kqa->ka", wk * gx, G[..., 0]) + np.einsum("kq,kqa->ka", wk * gy, G[..., 1])
        np.add.at(out[comp * ns:(comp + 1) * ns], V.cell_dofs, local)
    return out


def helmholtz_projection(w, dofmap: DofMap, t: float = 0.0, boundary=None,
                         system: SaddleSystem | None = None, degree: int = ASSEMBLY_DEGREE) -> DiscreteField:
    """Discrete Helmholtz projection: ``(P w, v) = (w, v)`` for discretely divergence-free ``v``.

    ``w`` is a callable ``(x, y, t) -> (w1, w2)`` or velocity coefficients;
    ``degree`` is the quadrature degree for the callable's load vector.
    The returned field's pressure slot holds the Lagrange multiplier.
    """
    system = assemble_saddle_system(dofmap) if system is None else system
    if callable(w):
        rhs = assemble_load(dofmap, w, t, degree)
    else:
        rhs = system.M @ _coeffs(w)
    g = dirichlet_values(dofmap, boundary, t)
    field, _ = _solver(system, 1.0, 0.0).solve(system.rhs(rhs), g)
    return field


def stokes_projection(w, dofmap: DofMap, t: float = 0.0, gradient=None, boundary=None,
                      system: SaddleSystem | None = None) -> DiscreteField:
    """Discrete Stokes projection: ``(grad S w, grad v) = (grad w, grad v)`` for discretely divergence-free ``v``.

    A callable ``w`` needs its ``gradient``; coefficient vectors use the
    stiffness matrix directly.
    """
    system = assemble_saddle_system(dofmap) if system is None else system
    if callable(w):
        if gradient is None:
            raise ValueError("a callable w needs its gradient")
        rhs = _gradient_load(dofmap, gradient, t)
    else:
        rhs = system.A @ _coeffs(w)
    g = dirichlet_values(dofmap, boundary, t)
    field, _ = _solver(system, 0.0, 1.0).solve(system.rhs(rhs), g)
    return field


def pressure_l2_projection(p, dofmap: DofMap, t: float = 0.0) -> np.ndarray:
    """L2 best approximation of ``p(x, y, t)`` in the pressure space."""
    Q = dofmap.pressure_space
    rule, wk, x, y = _cell_rule(dofmap, ASSEMBLY_DEGREE)
    vals = np.broadcast_to(p(x, y, t), wk.shape)
    rhs = np.zeros(Q.n_dofs)
    np.add.at(rhs, Q.cell_dofs, np.einsum("kq,qa->ka", wk * vals, Q.values(rule.points)))
    Mp = assemble_pressure_mass(dofmap).tocsc()
    return spla.splu(Mp).solve(rhs)


def pressure_lagrange_interpolant(p, dofmap: DofMap, t: float = 0.0) -> np.ndarray:
    """Vertex interpolant of ``p`` in the continuous P1 part of the pressure space.

    For discontinuous P1 the interpolant is continuous and written in the
    cellwise numbering.  P0 has no such subspace.
    """
    Q = dofmap.pressure_space
    if Q.family is not Family.P1:
        raise HypothesisViolationError(
            f"{dofmap.pair.name}: pressure space {Q.family.value} contains no continuous affine subspace"
        )
    return Q.interpolate(p, t)


def supercloseness_error(u_h, problem, t: float, system: SaddleSystem | None = None) -> float:
    """``||u_h - P_h u(t)||_0`` with the projection carrying the exact boundary values."""
    dofmap = u_h.dofmap
    proj = helmholtz_projection(problem.velocity, dofmap, t, boundary=problem.velocity, system=system)
    return l2_error(_coeffs(u_h) - proj.velocity, None, dofmap=dofmap)


def pressure_robustness_defect(grad_q, dofmap: DofMap, system: SaddleSystem | None = None) -> float:
    """``||P_h(grad q)||_0`` for a gradient field ``grad_q(x, y) -> (qx, qy)``; zero for pressure-robust pairs.

    The load uses the highest available quadrature so that, for smooth
    ``q``, quadrature error stays below the 1e-10 scale of the zero.
    """
    proj = helmholtz_projection(lambda x, y, t: grad_q(x, y), dofmap, system=system, degree=MAX_QUADRATURE_DEGREE)
    return l2_error(proj, None)


def _trapezoid(times, values) -> float:
    return float(np.trapezoid(values, times))


@dataclass(frozen=True)
class TheoremBounds:
    """Both sides of the supercloseness estimates for one time run.

    ``lhs = ||e_h(T)||^2 + nu int ||grad e_h||^2``;
    ``rhs_robust = nu int ||grad(S_h u - P_h u)||^2`` (pressure-robust pairs);
    ``rhs_classical = e * rhs_robust + e * T * max_t ||grad(p - L_h p)||^2``.
    Time integrals use the trapezoidal rule over the stored levels.
    """

    lhs: float
    rhs_robust: float
    rhs_classical: float | None
    final_error_sq: float
    gradient_error_sq: float


def theorem_bounds(run, problem) -> TheoremBounds:
    """Evaluate the supercloseness bounds on a :class:`~lockfem.timestepper.TimeRun`."""
    dofmap, system = run.dofmap, run.system
    nu = problem.nu
    e_grad, d_grad, p_grad = [], [], []
    for t, u in zip(run.times, run.velocities):
        P = helmholtz_projection(problem.velocity, dofmap, t, boundary=problem.velocity, system=system).velocity
        S = stokes_projection(problem.velocity, dofmap, t, gradient=problem.velocity_gradient,
                              boundary=problem.velocity, system=system).velocity
        e = u - P
        e_grad.append(h1_seminorm_error(e, None, dofmap=dofmap) ** 2)
        d_grad.append(h1_seminorm_error(S - P, None, dofmap=dofmap) ** 2)
        if dofmap.pressure_space.family is Family.P1:
            Lp = pressure_lagrange_interpolant(problem.pressure, dofmap, t)
            p_grad.append(pressure_gradient_error(dofmap, Lp, problem.pressure_gradient, t) ** 2)
    final_sq = l2_error(e, None, dofmap=dofmap) ** 2
    grad_int = nu * _trapezoid(run.times, e_grad)
    robust = nu * _trapezoid(run.times, d_grad)
    classical = None
    if p_grad:
        T = run.times[-1]
        classical = math.e * robust + math.e * T * max(p_grad)
    return TheoremBounds(final_sq + grad_int, robust, classical, final_sq, grad_int)


@dataclass(frozen=True)
class ConvergenceRow:
    nu: float
    h: float
    error_l2: float
    rate: float | None = None


def compute_rates(rows, nu: float = float("nan")) -> list[ConvergenceRow]:
    """Observed orders ``log(e_coarse / e_fine) / log(h_coarse / h_fine)`` for rows ordered coarse to fine."""
    out = []
    prev = None
    for h, err in rows:
        rate = None
        if prev is not None:
            h0, e0 = prev
            if not h < h0:
                raise ValueError("mesh sizes must decrease")
            rate = math.log(e0 / err) / math.log(h0 / h)
        out.append(ConvergenceRow(nu, float(h), float(err), rate))
        prev = (h, err)
    return out
