import itertools
import math

import numpy as np
import pytest

from simplexfem.mesh import build_box_mesh, refine_uniform
from simplexfem.quadrature import (QuadratureError, cell_weights,
                                   facet_rule_for_degree, integrate,
                                   reference_monomial_integral, rule_for_degree)


def monomial_error(rule, alpha):
    x = rule.points[:, 1:]
    val = (np.prod(x ** np.array(alpha), axis=1) * rule.weights).sum()
    exact = reference_monomial_integral(alpha)
    return abs(val - exact) / max(abs(exact), 1e-300)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", list(range(0, 11)))
def test_monomial_exactness_sweep(dim, degree):
    rule = rule_for_degree(dim, degree)
    assert rule.exact_degree >= degree
    assert rule.weights.min() > 0
    assert abs(rule.weights.sum() - 1 / math.factorial(dim)) < 1e-14
    for alpha in itertools.product(range(degree + 1), repeat=dim):
        if sum(alpha) <= degree:
            assert monomial_error(rule, alpha) < 1e-12, (alpha, degree)


def test_degree_one_is_centroid_rule():
    rule = rule_for_degree(2, 1)
    assert rule.n_points == 1
    assert rule.weights[0] == pytest.approx(0.5, abs=1e-16)
    assert np.allclose(rule.points, 1 / 3)


def test_named_reference_integrals():
    # int x^2 y^2 over the reference triangle = 2!2!/6! = 1/180
    rule = rule_for_degree(2, 4)
    x = rule.points[:, 1]
    y = rule.points[:, 2]
    assert (x ** 2 * y ** 2 * rule.weights).sum() == pytest.approx(1 / 180, abs=1e-14)
    # int x^2 over the reference tet = 2/5! = 1/60
    rule = rule_for_degree(3, 2)
    x = rule.points[:, 1]
    assert (x ** 2 * rule.weights).sum() == pytest.approx(1 / 60, abs=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_mapped_integration_of_one_gives_measure(dim):
    m = refine_uniform(build_box_mesh(dim, 1))
    rule = rule_for_degree(dim, 3)
    w = cell_weights(m, rule)
    assert np.allclose(w.sum(axis=1), m.cell_measures, rtol=1e-14)
    ones = np.ones((m.n_cells, rule.n_points))
    assert integrate(m, ones, rule) == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
def test_facet_rules_are_exact(dim):
    rule = facet_rule_for_degree(dim, 4)
    assert rule.weights.min() > 0
    if dim == 2:
        # segment rule: int_0^1 t^k dt = 1/(k+1)
        t = rule.points[:, 1]
        for k in range(5):
            assert (t ** k * rule.weights).sum() == pytest.approx(1 / (k + 1), rel=1e-14)
    else:
        for alpha in itertools.product(range(5), repeat=2):
            if sum(alpha) <= 4:
                assert monomial_error(rule, alpha) < 1e-12


def test_unsupported_requests_raise():
    with pytest.raises(QuadratureError):
        rule_for_degree(0, 2)
    with pytest.raises(QuadratureError):
        rule_for_degree(2, 31)
    with pytest.raises(QuadratureError):
        facet_rule_for_degree(4, 2)


def test_high_degree_available():
    # rhs/error norms rely on degree >= 8 in both dimensions
    for dim in (2, 3):
        rule = rule_for_degree(dim, 8)
        assert rule.exact_degree >= 8
