"""BDF3 time integration of the discrete Stokes and Navier-Stokes systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import SaddleSystem, assemble_convection, assemble_load, assemble_saddle_system
from .linsolve import SaddleSolver, SolverError
from .problems import FlowProblem
from .spaces import DiscreteField, DofMap, dirichlet_values, interpolate_nodally

logger = logging.getLogger(__name__)

# u' ~ (11/6 u^{n+1} - 3 u^n + 3/2 u^{n-1} - 1/3 u^{n-2}) / dt
BDF3_LEAD = 11.0 / 6.0
BDF3_HISTORY = (3.0, -1.5, 1.0 / 3.0)
# third-order extrapolation of u^{n+1} from (u^n, u^{n-1}, u^{n-2})
EXTRAPOLATION = (3.0, -3.0, 1.0)


class TimeStepError(SolverError):
    pass


@dataclass(frozen=True)
class Bdf3State:
    """``history`` is newest first: ``(u^n, u^{n-1}, u^{n-2})``; ``t = step * dt``."""

    dt: float
    step: int
    history: tuple
    pressure: np.ndarray | None = None
    reports: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if len(self.history) != 3:
            raise ValueError("BDF3 needs exactly three history states")

    @property
    def t(self) -> float:
        return self.step * self.dt

    @property
    def velocity(self) -> np.ndarray:
        return self.history[0]


def initialize(problem: FlowProblem, dofmap: DofMap, dt: float, mode: str = "nodal",
               system: SaddleSystem | None = None) -> Bdf3State:
    """History at ``t = 0, dt, 2 dt``.

    ``mode="nodal"`` interpolates the exact velocity at the nodes.
    ``mode="helmholtz"`` uses the discrete Helmholtz projection of the exact
    velocity at all three levels, boundary values taken nodally.
    """
    if mode == "nodal":
        levels = [interpolate_nodally(problem.velocity, dofmap, k * dt) for k in range(3)]
    elif mode == "helmholtz":
        from .analysis import helmholtz_projection

        levels = [
            helmholtz_projection(problem.velocity, dofmap, t=k * dt, boundary=problem.velocity, system=system).velocity
            for k in range(3)
        ]
    else:
        raise ValueError(f"unknown initialisation mode {mode!r}")
    return Bdf3State(dt, 2, (levels[2], levels[1], levels[0]))


def bdf3_step(state: Bdf3State, system: SaddleSystem, nu: float, problem: FlowProblem,
              nse: bool = False, solver: SaddleSolver | None = None) -> Bdf3State:
    """Advance one step; ``solver`` must factorise ``11/(6 dt) M + nu A`` if given."""
    dt = state.dt
    dm = system.dofmap
    if solver is None:
        solver = SaddleSolver(system, BDF3_LEAD / dt, nu)
    t_new = (state.step + 1) * dt
    un, un1, un2 = state.history
    memory = BDF3_HISTORY[0] * un + BDF3_HISTORY[1] * un1 + BDF3_HISTORY[2] * un2
    rhs_v = assemble_load(dm, problem.forcing, t_new) + (system.M @ memory) / dt
    convection = None
    if nse:
        advecting = EXTRAPOLATION[0] * un + EXTRAPOLATION[1] * un1 + EXTRAPOLATION[2] * un2
        convection = assemble_convection(dm, advecting)
    g = dirichlet_values(dm, problem.velocity, t_new)
    try:
        sol, report = solver.solve(system.rhs(rhs_v), g, convection)
    except SolverError as exc:
        raise TimeStepError(f"step to t={t_new:.6g} failed: {exc}") from exc
    return replace(state, step=state.step + 1, history=(sol.velocity, un, un1), pressure=sol.pressure,
                   reports=state.reports + (report,))


@dataclass
class TimeRun:
    """Result of :func:`integrate`; ``velocities[k]`` is the solution at ``times[k]``."""

    dofmap: DofMap
    system: SaddleSystem
    times: list
    velocities: list
    final: DiscreteField
    reports: list

    @property
    def max_residual(self) -> float:
        return max((r.relative_residual for r in self.reports), default=0.0)


def n_steps(dt: float, t_end: float) -> int:
    steps = int(round(t_end / dt))
    if steps < 3 or not np.isclose(steps * dt, t_end, rtol=1e-12, atol=0.0):
        raise ValueError(f"t_end/dt must be an integer >= 3, got {t_end}/{dt}")
    return steps


def integrate(problem: FlowProblem, dofmap: DofMap, dt: float = 1e-3, t_end: float | None = None,
              init: str = "nodal", nse: bool | None = None, system: SaddleSystem | None = None) -> TimeRun:
    """Run BDF3 from the three start levels up to ``t_end``.

    The saddle operator ``11/(6 dt) M + nu A`` is factorised once; Navier-Stokes
    steps add the convection block on top of it.
    """
    t_end = problem.end_time if t_end is None else t_end
    nse = problem.is_nse if nse is None else nse
    total = n_steps(dt, t_end)
    system = assemble_saddle_system(dofmap) if system is None else system
    state = initialize(problem, dofmap, dt, init, system)
    solver = SaddleSolver(system, BDF3_LEAD / dt, problem.nu)
    times = [k * dt for k in range(3)]
    velocities = list(reversed(state.history))
    while state.step < total:
        state = bdf3_step(state, system, problem.nu, problem, nse, solver)
        times.append(state.t)
        velocities.append(state.velocity)
    final = DiscreteField(dofmap, state.velocity, state.pressure)
    return TimeRun(dofmap, system, times, velocities, final, list(state.reports))
