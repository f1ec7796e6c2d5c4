from math import factorial

import numpy as np
import pytest

from degeneig.mesh import Mesh, build_unit_square_mesh
from degeneig.quadrature import RULE7_BARY, RULE7_WEIGHTS, build_quadrature, p1_gradients

# int over the unit-square corner of |x| dx dy
CORNER_R_INTEGRAL = (np.sqrt(2.0) + np.log1p(np.sqrt(2.0))) / 3.0


def test_rule_weights():
    np.testing.assert_allclose(RULE7_WEIGHTS.sum(), 1.0, rtol=1e-15)
    np.testing.assert_allclose(RULE7_BARY.sum(axis=1), 1.0, rtol=1e-15)


@pytest.mark.parametrize("a,b", [(i, j) for i in range(6) for j in range(6 - i)])
def test_rule_exact_to_degree_five(a, b):
    # int over the reference triangle of x^a y^b = a! b! / (a+b+2)!
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    x, y = RULE7_BARY[:, 1], RULE7_BARY[:, 2]
    approx = 0.5 * np.sum(RULE7_WEIGHTS * x ** a * y ** b)
    np.testing.assert_allclose(approx, exact, rtol=1e-13)


def test_weights_sum_to_areas_with_singular_split():
    m = build_unit_square_mesh(6)
    q = build_quadrature(m, (0.0, 0.0))
    np.testing.assert_allclose(q.integrate(np.ones(len(q.weights)), m.nt), m.areas, rtol=1e-13)
    # no node at the singular point
    assert np.linalg.norm(q.points, axis=1).min() > 0
    assert len(q.weights) > 7 * m.nt


def test_split_resolves_corner_singularity():
    m = build_unit_square_mesh(16)
    r = lambda p: np.linalg.norm(p, axis=1) ** -1.0
    exact = 2.0 * np.log1p(np.sqrt(2.0))  # int of 1/|x| over the unit square
    err_plain = abs(build_quadrature(m, None).weights @ r(build_quadrature(m, None).points) - exact)
    q = build_quadrature(m, (0.0, 0.0))
    err_split = abs(q.weights @ r(q.points) - exact)
    assert err_split < err_plain
    np.testing.assert_allclose(q.weights @ np.linalg.norm(q.points, axis=1), CORNER_R_INTEGRAL, rtol=1e-6)


def test_interpolate_linear_field():
    m = build_unit_square_mesh(4)
    q = build_quadrature(m, (0.0, 0.0))
    f = 2 * m.vertices[:, 0] - 3 * m.vertices[:, 1] + 1
    np.testing.assert_allclose(q.interpolate(m.triangles, f), 2 * q.points[:, 0] - 3 * q.points[:, 1] + 1,
                               atol=1e-14)


def test_p1_gradients_reproduce_linear_functions():
    rng = np.random.default_rng(0)
    m = Mesh.from_arrays(rng.uniform(size=(3, 2)), [[0, 1, 2]])
    G = p1_gradients(m)
    np.testing.assert_allclose(G[0].sum(axis=0), 0, atol=1e-12)
    for coef in ([1.0, 0.0], [0.0, 1.0], [2.5, -1.0]):
        u = m.vertices @ np.array(coef)
        np.testing.assert_allclose(u[m.triangles[0]] @ G[0], coef, atol=1e-12)
