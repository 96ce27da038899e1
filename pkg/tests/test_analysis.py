import numpy as np
import pytest

from lockfem.analysis import (
    HypothesisViolationError,
    _cell_rule,
    compute_rates,
    h1_seminorm_error,
    helmholtz_projection,
    l2_error,
    pressure_gradient_error,
    pressure_l2_error,
    pressure_l2_projection,
    pressure_lagrange_interpolant,
    pressure_robustness_defect,
    stokes_projection,
    supercloseness_error,
)
from lockfem.assembly import assemble_pressure_mass
from lockfem.problems import stokes_manufactured
from lockfem.mesh import locate_point
from lockfem.spaces import DiscreteField, interpolate_nodally
from lockfem.timestepper import integrate

from conftest import dofmap, saddle

GRAD_SIN = lambda x, y: (np.cos(x + y), np.cos(x + y))
SIN = lambda x, y, t: np.sin(x + y)


def slopes(values):
    v = np.asarray(values)
    return np.log2(v[:-1] / v[1:])


def test_l2_error_zero_for_representable(pair_name):
    dm = dofmap(pair_name, 2)
    f = lambda x, y, t: (1 - 2 * x + y, 3 * y - x)
    assert l2_error(interpolate_nodally(f, dm), f, dofmap=dm) < 1e-13


def test_l2_norm_of_constant():
    dm = dofmap("TH", 2)
    u = interpolate_nodally(lambda x, y, t: (3 + 0 * x, 4 + 0 * y), dm)
    assert np.isclose(l2_error(u, None, dofmap=dm), 5.0, atol=1e-13)


def test_h1_constant_part():
    dm = dofmap("CR", 2)
    zero = np.zeros(dm.n_velocity_dofs)
    const_grad = lambda x, y, t: ((0 * x, 0 * x), (0 * x, 0 * x))
    assert h1_seminorm_error(zero, const_grad, dofmap=dm) == 0.0


def test_h1_rates():
    prob = stokes_manufactured(1.0)
    th, cr = [], []
    for n in (4, 8, 16):
        for name, out in (("TH", th), ("CR", cr)):
            dm = dofmap(name, n)
            run = integrate(prob, dm, system=saddle(name, n))
            out.append(h1_seminorm_error(run.final, prob.velocity_gradient, 0.01))
    assert np.all(np.abs(slopes(th) - 2) < 0.15)
    assert np.all(np.diff(cr) < 0) and np.all(np.isfinite(cr))


def test_compute_rates_examples():
    rows = compute_rates([(1 / 8, 1.260e-4), (1 / 16, 1.532e-5)], nu=1.0)
    assert rows[0].rate is None
    assert rows[1].rate == pytest.approx(3.04, abs=0.005)
    assert compute_rates([(0.5, 1e-3), (0.25, 1e-3)])[1].rate == 0.0
    cr = compute_rates([(1 / 8, 5.294e-3), (1 / 16, 5.074e-3), (1 / 32, 5.106e-3)])
    assert [round(r.rate, 2) for r in cr[1:]] == [0.06, -0.01]
    with pytest.raises(ValueError):
        compute_rates([(0.25, 1.0), (0.5, 1.0)])


def test_helmholtz_idempotent(pair_name):
    dm = dofmap(pair_name, 3)
    sys = saddle(pair_name, 3)
    w = lambda x, y, t: (np.sin(3 * y) * x, np.cos(2 * x) + y * y)
    P = helmholtz_projection(w, dm, system=sys)
    PP = helmholtz_projection(P.velocity, dm, system=sys)
    assert np.abs(sys.B @ P.velocity).max() <= 1e-10
    np.testing.assert_allclose(PP.velocity, P.velocity, atol=1e-11)
    assert not np.any(P.velocity[dm.dirichlet_dofs])


@pytest.mark.parametrize("grad_q", [
    GRAD_SIN,
    lambda x, y: (2 * x * y, x * x),
    lambda x, y: (-2 * np.pi * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                  -2 * np.pi * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)),
], ids=["sin", "x2y", "cos_cos"])
def test_sv_gradients_project_to_zero(grad_q):
    assert pressure_robustness_defect(grad_q, dofmap("SV", 8), saddle("SV", 8)) <= 1e-10


@pytest.mark.parametrize("name", ["TH", "MINI", "CR"])
def test_classical_pairs_see_gradients(name):
    assert pressure_robustness_defect(GRAD_SIN, dofmap(name, 8), saddle(name, 8)) > 1e-4


def test_th_gradient_defect_first_order():
    d = [pressure_robustness_defect(GRAD_SIN, dofmap("TH", n), saddle("TH", n)) for n in (8, 16, 32)]
    assert np.all(np.abs(slopes(d) - 1) < 0.1)


def test_stokes_projection_reproduces_member():
    dm = dofmap("SV", 3)
    sys = saddle("SV", 3)
    u = interpolate_nodally(lambda x, y, t: (y, -x), dm)
    S = stokes_projection(u, dm, boundary=lambda x, y, t: (y, -x), system=sys)
    np.testing.assert_allclose(S.velocity, u, atol=1e-11)
    with pytest.raises(ValueError):
        stokes_projection(lambda x, y, t: (y, -x), dm, system=sys)


def test_stokes_projection_homogeneous_boundary():
    dm = dofmap("TH", 3)
    w = lambda x, y, t: (np.sin(np.pi * x) * np.sin(np.pi * y), x * (1 - x) * y * (1 - y))
    grad = lambda x, y, t: (
        (np.pi * np.cos(np.pi * x) * np.sin(np.pi * y), np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)),
        ((1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)),
    )
    S = stokes_projection(w, dm, gradient=grad, system=saddle("TH", 3))
    assert not np.any(S.velocity[dm.dirichlet_dofs])


@pytest.mark.parametrize("name", ["TH", "SV"])
def test_stokes_minus_helmholtz_h1_rate(name):
    prob = stokes_manufactured(1.0)
    d = []
    for n in (8, 16, 32):
        dm, sys = dofmap(name, n), saddle(name, n)
        P = helmholtz_projection(prob.velocity, dm, 0.0, boundary=prob.velocity, system=sys).velocity
        S = stokes_projection(prob.velocity, dm, 0.0, gradient=prob.velocity_gradient,
                              boundary=prob.velocity, system=sys).velocity
        d.append(h1_seminorm_error(S - P, None, dofmap=dm))
    assert np.all(slopes(d) > 1.85)


def test_pressure_projection_orthogonality():
    dm = dofmap("SV", 3)
    ph = pressure_l2_projection(SIN, dm)
    Mp = assemble_pressure_mass(dm)
    # (p - pi_h p, q) = (p, q) - (pi_h p, q): both via the same quadrature
    rule, wk, x, y = _cell_rule(dm, 6)
    Q = dm.pressure_space
    rng = np.random.default_rng(4)
    for _ in range(5):
        q = rng.standard_normal(dm.n_pressure_dofs)
        pq = np.sum(wk * SIN(x, y, 0) * Q.evaluate(q, rule.points))
        assert abs(pq - ph @ Mp @ q) < 1e-11


@pytest.mark.parametrize("name", ["TH", "SV", "CR"])
def test_pressure_projection_reproduces_discrete(name):
    dm = dofmap(name, 2)
    q = np.random.default_rng(0).standard_normal(dm.n_pressure_dofs)
    # the discrete pressure as a pointwise callable
    def qfun(x, y, t):
        out = np.empty(np.shape(x))
        for i, (xi, yi) in enumerate(zip(np.ravel(x), np.ravel(y))):
            # points are interior quadrature points: the containing cell is unique
            k, lam = locate_point(dm.mesh, (xi, yi))
            out.flat[i] = q[dm.pressure_space.cell_dofs[k]] @ dm.pressure_space.values(lam[None])[0]
        return out

    np.testing.assert_allclose(pressure_l2_projection(qfun, dm), q, atol=1e-11)


def test_pressure_projection_rates():
    p1 = [pressure_l2_error(dofmap("TH", n), pressure_l2_projection(SIN, dofmap("TH", n)), SIN) for n in (4, 8, 16)]
    p0 = [pressure_l2_error(dofmap("CR", n), pressure_l2_projection(SIN, dofmap("CR", n)), SIN) for n in (4, 8, 16)]
    assert np.all(np.abs(slopes(p1) - 2) < 0.1)
    assert np.all(np.abs(slopes(p0) - 1) < 0.1)


def test_lagrange_interpolant():
    lin = lambda x, y, t: 2 * x - y + 0.5
    for name in ("TH", "SV", "MINI"):
        dm = dofmap(name, 2)
        Lp = pressure_lagrange_interpolant(lin, dm)
        g = lambda x, y, t: (2 + 0 * x, -1 + 0 * y)
        assert pressure_gradient_error(dm, Lp, g) < 1e-13
    grad = lambda x, y, t: (np.cos(x + y), np.cos(x + y))
    e = [pressure_gradient_error(dofmap("TH", n), pressure_lagrange_interpolant(SIN, dofmap("TH", n)), grad)
         for n in (4, 8, 16)]
    assert np.all(np.abs(slopes(e) - 1) < 0.1)
    with pytest.raises(HypothesisViolationError):
        pressure_lagrange_interpolant(SIN, dofmap("CR", 2))


def test_sv_lagrange_interpolant_is_continuous():
    dm = dofmap("SV", 2)
    Lp = pressure_lagrange_interpolant(SIN, dm)
    # every copy of a vertex carries the same value
    verts = dm.mesh.triangles.ravel()
    for v in np.unique(verts)[:20]:
        assert np.ptp(Lp[verts == v]) == 0.0


def test_supercloseness_of_projection_is_zero():
    prob = stokes_manufactured(1.0)
    dm, sys = dofmap("TH", 3), saddle("TH", 3)
    P = helmholtz_projection(prob.velocity, dm, 0.004, boundary=prob.velocity, system=sys)
    assert supercloseness_error(DiscreteField(dm, P.velocity, np.zeros(dm.n_pressure_dofs)), prob, 0.004, sys) < 1e-13
