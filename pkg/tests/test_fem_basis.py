from math import factorial

import numpy as np
import pytest

from lockfem.fem_basis import ASSEMBLY_DEGREE, ERROR_DEGREE, Family, quadrature, reference_element

VERTS_BARY = np.eye(3)
# midpoint of the edge opposite vertex i
MIDS_BARY = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])


def exact_monomial(a, b, c):
    """Integral of l1^a l2^b l3^c over the reference triangle (area 1/2)."""
    return factorial(a) * factorial(b) * factorial(c) * 2 / factorial(a + b + c + 2) * 0.5


def test_p1_kronecker():
    np.testing.assert_allclose(reference_element(Family.P1).eval(VERTS_BARY), np.eye(3), atol=1e-15)


def test_p2_kronecker():
    el = reference_element(Family.P2)
    vals = el.eval(np.vstack([VERTS_BARY, MIDS_BARY]))
    np.testing.assert_allclose(vals, np.eye(6), atol=1e-15)


def test_bubble_at_barycenter():
    el = reference_element(Family.P1_BUBBLE)
    vals = el.eval(np.full((1, 3), 1 / 3))
    assert np.isclose(vals[0, 3], 1.0)
    assert np.allclose(el.eval(VERTS_BARY)[:, 3], 0.0)


def test_cr_kronecker_at_midpoints():
    el = reference_element(Family.P1_NONCONFORMING)
    np.testing.assert_allclose(el.eval(MIDS_BARY), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("family", [Family.P1, Family.P2, Family.P1_NONCONFORMING, Family.P0])
def test_partition_of_unity(family):
    rng = np.random.default_rng(1)
    lam = rng.dirichlet(np.ones(3), size=20)
    el = reference_element(family)
    np.testing.assert_allclose(el.eval(lam).sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(el.grad(lam).sum(axis=1), 0.0, atol=1e-13)


@pytest.mark.parametrize("family", list(Family))
def test_gradient_matches_finite_differences(family):
    el = reference_element(family)
    rng = np.random.default_rng(2)
    lam = rng.dirichlet(np.ones(3) * 3, size=5)
    h = 1e-6
    g = el.grad(lam)
    for d in range(2):
        step = np.zeros(3)
        step[0] = -h
        step[d + 1] = h
        fd = (el.eval(lam + step) - el.eval(lam - step)) / (2 * h)
        np.testing.assert_allclose(g[..., d], fd, atol=1e-8)


def test_unknown_family():
    with pytest.raises(ValueError):
        reference_element("P7")


def test_quadrature_basic():
    assert np.isclose(quadrature(1).weights.sum(), 0.5, atol=1e-15)
    r = quadrature(2)
    l1, l2 = r.points[:, 0], r.points[:, 1]
    assert abs(r.weights @ (l1 * l2) - 1 / 24) < 1e-15
    r5 = quadrature(5)
    assert abs(r5.weights @ r5.points[:, 0] ** 4 - 1 / 30) < 1e-15


@pytest.mark.parametrize("degree", range(1, 11))
def test_quadrature_exactness(degree):
    r = quadrature(degree)
    l1, l2, l3 = r.points.T
    assert np.all(r.points >= 0) and np.all(r.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                got = r.weights @ (l1**a * l2**b * l3**c)
                assert abs(got - exact_monomial(a, b, c)) < 1e-14, (a, b, c)


def test_quadrature_degrees():
    assert ASSEMBLY_DEGREE >= 5 and ERROR_DEGREE == 8
    with pytest.raises(ValueError):
        quadrature(0)
