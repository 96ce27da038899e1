import numpy as np
import pytest

from lockfem import build_dof_map, build_uniform_mesh, element_pair
from lockfem.analysis import l2_error
from lockfem.fem_basis import Family
from lockfem.problems import stokes_manufactured
from lockfem.spaces import (
    DiscreteField,
    ScalarSpace,
    apply_dirichlet,
    dirichlet_values,
    interpolate_nodally,
)

from conftest import alfeld_mesh, dofmap, saddle


def test_pair_lookup():
    assert element_pair("th").name == element_pair("Taylor-Hood").name
    with pytest.raises(ValueError):
        element_pair("Q2Q1")


def test_cr_counts_two_triangles():
    dm = build_dof_map(build_uniform_mesh(1), "CR")
    assert dm.n_scalar_velocity_dofs == 5
    assert dm.n_pressure_dofs == 2


def test_sv_pressure_count():
    assert dofmap("SV", 1).n_pressure_dofs == 18


def test_th_pressure_is_vertex_count():
    assert dofmap("TH", 8).n_pressure_dofs == alfeld_mesh(8).n_vertices


def test_counts_all_pairs(pair_name):
    m = alfeld_mesh(2)
    dm = dofmap(pair_name, 2)
    nv, ne, nt = m.n_vertices, m.n_edges, m.n_triangles
    expected = {"TH": (nv + ne, nv), "SV": (nv + ne, 3 * nt), "MINI": (nv + nt, nv), "CR": (ne, nt)}
    assert (dm.n_scalar_velocity_dofs, dm.n_pressure_dofs) == expected[pair_name]
    assert dm.n_total == 2 * dm.n_scalar_velocity_dofs + dm.n_pressure_dofs + 1
    # every Dirichlet node sits on the boundary
    x, y = dm.dirichlet_points.T
    assert np.all(np.minimum.reduce([x, y, 1 - x, 1 - y]) < 1e-14)


def test_constant_into_p1():
    V = ScalarSpace(build_uniform_mesh(4), Family.P1)
    np.testing.assert_array_equal(V.interpolate(lambda x, y, t: 2.5 + 0 * x), 2.5)


def test_linear_into_p2_exact():
    dm = dofmap("TH", 4)
    u = interpolate_nodally(lambda x, y, t: (x, 0 * y), dm)
    assert l2_error(DiscreteField(dm, u, np.zeros(dm.n_pressure_dofs)), lambda x, y, t: (x, 0 * y)) < 1e-13


def test_p1_interpolation_order():
    f = lambda x, y, t: (np.sin(x + y), 0 * x)
    errs = []
    for n in (8, 16):
        dm = build_dof_map(build_uniform_mesh(n), "MINI")
        u = interpolate_nodally(f, dm)
        errs.append(l2_error(u, f, dofmap=dm))
    assert 3.7 < errs[0] / errs[1] < 4.3


def test_field_validates_length():
    dm = dofmap("TH", 1)
    with pytest.raises(ValueError):
        DiscreteField(dm, np.zeros(3), np.zeros(dm.n_pressure_dofs))


def test_dirichlet_values_exact():
    dm = dofmap("TH", 2)
    u = stokes_manufactured(1.0).velocity
    g = dirichlet_values(dm, u, 0.3)
    ref = interpolate_nodally(u, dm, 0.3)[dm.dirichlet_dofs]
    np.testing.assert_allclose(g, ref, atol=1e-13)
    np.testing.assert_array_equal(dirichlet_values(dm, None), 0.0)


def test_apply_dirichlet_assigns_and_keeps_symmetry():
    dm = dofmap("TH", 2)
    sys = saddle("TH", 2)
    K = sys.matrix(1.0, 1.0)
    g = dirichlet_values(dm, stokes_manufactured(1.0).velocity, 0.0)
    Kd, rhs = apply_dirichlet(K, np.ones(K.shape[0]), dm.dirichlet_dofs, g)
    assert abs(Kd - Kd.T).max() < 1e-15
    np.testing.assert_allclose(rhs[dm.dirichlet_dofs], g, atol=1e-13)
    x = np.linalg.solve(Kd.toarray(), rhs)
    np.testing.assert_allclose(x[dm.dirichlet_dofs], g, atol=1e-13)


@pytest.mark.parametrize("name", ["TH", "MINI", "CR"])
def test_eliminated_velocity_block_spd(name):
    dm = dofmap(name, 2)
    A = saddle(name, 2).A.toarray()
    free = dm.free_velocity_dofs
    L = np.linalg.cholesky(A[np.ix_(free, free)])
    assert np.all(np.diag(L) > 0)


def test_conformity_across_edges():
    # P2 functions agree at points on shared interior edges
    m = alfeld_mesh(2)
    V = ScalarSpace(m, Family.P2)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(V.n_dofs)
    interior = np.flatnonzero(~m.boundary_edge_flags)
    for e in interior[:10]:
        a, b = m.edges[e]
        vals = []
        for k in m.edge_triangles[e]:
            tri = list(m.triangles[k])
            lam = np.zeros((3, 3))
            for j, s in enumerate((0.2, 0.5, 0.9)):
                lam[j, tri.index(a)] = s
                lam[j, tri.index(b)] = 1 - s
            vals.append(c[V.cell_dofs[k]] @ V.values(lam).T)
        np.testing.assert_allclose(vals[0], vals[1], atol=1e-13)
