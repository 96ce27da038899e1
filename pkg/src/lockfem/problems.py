"""Benchmark flows with closed-form solutions.

All callables take ``(x, y, t)`` with numpy-broadcastable ``x``, ``y`` and
return plain arrays: velocities as a pair ``(u1, u2)``, velocity gradients
as ``((du1/dx, du1/dy), (du2/dx, du2/dy))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[..., object]


@dataclass(frozen=True)
class FlowProblem:
    name: str
    nu: float
    velocity: Field
    velocity_gradient: Field
    pressure: Field
    pressure_gradient: Field
    forcing: Field
    end_time: float = 0.01
    is_nse: bool = False

    def initial_velocity(self, x, y):
        return self.velocity(x, y, 0.0)


# integral of sin(x + y) over the unit square
_SIN_MEAN = 2.0 * np.sin(1.0) - np.sin(2.0)


def stokes_manufactured(nu: float) -> FlowProblem:
    """``u = (cos y, sin x)(1 + t)``, ``p = sin(x + y)`` shifted to zero mean."""
    if not nu > 0:
        raise ValueError("viscosity must be positive")

    def velocity(x, y, t):
        s = 1.0 + t
        return np.cos(y) * s + 0.0 * x, np.sin(x) * s + 0.0 * y

    def velocity_gradient(x, y, t):
        s = 1.0 + t
        z = 0.0 * (x + y)
        return (z, -np.sin(y) * s + z), (np.cos(x) * s + z, z)

    def pressure(x, y, t):
        return np.sin(x + y) - _SIN_MEAN

    def pressure_gradient(x, y, t):
        c = np.cos(x + y)
        return c, c

    def forcing(x, y, t):
        s = 1.0 + t
        c = np.cos(x + y)
        return np.cos(y) * (1.0 + nu * s) + c, np.sin(x) * (1.0 + nu * s) + c

    return FlowProblem("stokes", nu, velocity, velocity_gradient, pressure, pressure_gradient, forcing,
                       end_time=0.01, is_nse=False)


def chorin_vortex(nu: float, n_waves: int = 2, pressure_decay: float = 4.0) -> FlowProblem:
    """Decaying vortex array, an exact Navier-Stokes solution with zero forcing.

    With ``n = n_waves`` the velocity decays like ``exp(-2 n^2 pi^2 nu t)``; the pressure balances
    ``(u . grad) u`` and therefore decays with the square of that factor,
    ``pressure_decay = 4``.  Other values are accepted so the residual oracle
    can be pointed at them.
    """
    if nu < 0:
        raise ValueError("viscosity must be non-negative")
    if int(n_waves) != n_waves or n_waves < 1:
        raise ValueError("n_waves must be a positive integer")
    k = n_waves * np.pi
    rate = n_waves**2 * np.pi**2 * nu

    def decay(t, factor):
        return np.exp(-factor * rate * t)

    def velocity(x, y, t):
        e = decay(t, 2.0)
        return -np.cos(k * x) * np.sin(k * y) * e, np.sin(k * x) * np.cos(k * y) * e

    def velocity_gradient(x, y, t):
        e = decay(t, 2.0)
        return (
            (k * np.sin(k * x) * np.sin(k * y) * e, -k * np.cos(k * x) * np.cos(k * y) * e),
            (k * np.cos(k * x) * np.cos(k * y) * e, -k * np.sin(k * x) * np.sin(k * y) * e),
        )

    def pressure(x, y, t):
        return -0.25 * (np.cos(2 * k * x) + np.cos(2 * k * y)) * decay(t, pressure_decay)

    def pressure_gradient(x, y, t):
        e = decay(t, pressure_decay)
        return 0.5 * k * np.sin(2 * k * x) * e, 0.5 * k * np.sin(2 * k * y) * e

    def forcing(x, y, t):
        z = 0.0 * (x + y)
        return z, z

    return FlowProblem("chorin", nu, velocity, velocity_gradient, pressure, pressure_gradient, forcing,
                       end_time=0.01, is_nse=True)


def polynomial_patch(nu: float, time_power: int = 3) -> FlowProblem:
    """``u = (y, -x)(1 + t^k)``, ``p = x + y - 1``: exactly representable by P2/P1 in space."""

    def velocity(x, y, t):
        s = 1.0 + t**time_power
        return y * s + 0.0 * x, -x * s + 0.0 * y

    def velocity_gradient(x, y, t):
        s = 1.0 + t**time_power
        z = 0.0 * (x + y)
        return (z, z + s), (z - s, z)

    def pressure(x, y, t):
        return x + y - 1.0

    def pressure_gradient(x, y, t):
        one = 1.0 + 0.0 * (x + y)
        return one, one

    def forcing(x, y, t):
        ds = time_power * t ** (time_power - 1) if time_power else 0.0
        return y * ds + 1.0 + 0.0 * x, -x * ds + 1.0 + 0.0 * y

    return FlowProblem("patch", nu, velocity, velocity_gradient, pressure, pressure_gradient, forcing,
                       end_time=0.01, is_nse=False)


def make_problem(name: str, nu: float, n_waves: int = 2) -> FlowProblem:
    if name == "stokes":
        return stokes_manufactured(nu)
    if name == "chorin":
        return chorin_vortex(nu, n_waves)
    if name == "patch":
        return polynomial_patch(nu)
    raise ValueError(f"unknown problem {name!r}")


# fourth-order central differences
_D1 = (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, np.arange(-2, 3))
_D2 = (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, np.arange(-2, 3))


def _diff(g, h, stencil):
    coef, offsets = stencil
    return sum(c * g(o * h) for c, o in zip(coef, offsets))


def pde_residual(problem: FlowProblem, x, y, t, h: float = 2e-4):
    """Momentum and continuity residuals of the exact solution by finite differences.

    Returns ``(r1, r2, div)`` where ``r = u_t [+ (u.grad)u] - nu lap u + grad p - f``.
    Nothing but point values of ``velocity``, ``pressure`` and ``forcing``
    is used, so this checks the closed forms independently.
    """
    u, p, nu = problem.velocity, problem.pressure, problem.nu
    out = []
    comps = []
    for i in range(2):
        ui = lambda X, Y, T, i=i: u(X, Y, T)[i]
        ux = _diff(lambda d: ui(x + d, y, t), h, _D1) / h
        uy = _diff(lambda d: ui(x, y + d, t), h, _D1) / h
        uxx = _diff(lambda d: ui(x + d, y, t), h, _D2) / h**2
        uyy = _diff(lambda d: ui(x, y + d, t), h, _D2) / h**2
        ut = _diff(lambda d: ui(x, y, t + d), h, _D1) / h
        comps.append((ux, uy, uxx, uyy, ut))
    px = _diff(lambda d: p(x + d, y, t), h, _D1) / h
    py = _diff(lambda d: p(x, y + d, t), h, _D1) / h
    f1, f2 = problem.forcing(x, y, t)
    u1, u2 = u(x, y, t)
    for i, (gp, fi) in enumerate(((px, f1), (py, f2))):
        ux, uy, uxx, uyy, ut = comps[i]
        r = ut - nu * (uxx + uyy) + gp - fi
        if problem.is_nse:
            r = r + u1 * ux + u2 * uy
        out.append(r)
    div = comps[0][0] + comps[1][1]
    return out[0], out[1], div


def self_test(problem: FlowProblem, n_points: int = 100, tol: float = 1e-6, seed: int = 0) -> float:
    """Largest finite-difference residual over random space-time points; raises above ``tol``."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.0, 1.0, (2, n_points))
    t = rng.uniform(0.0, problem.end_time, n_points)
    worst = max(float(np.max(np.abs(r))) for r in pde_residual(problem, x, y, t))
    if worst > tol:
        raise AssertionError(f"{problem.name}: exact solution residual {worst:.2e} exceeds {tol:.0e}")
    return worst
