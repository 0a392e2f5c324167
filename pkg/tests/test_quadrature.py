import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axistokes.quadrature import MAX_ORDER, edge_rule, map_to_physical, triangle_rule


def exact_monomial(a, b):
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 2))


def test_order_one_weights_sum_to_half():
    rule = triangle_rule(1)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)


def test_order_three_x2y():
    rule = triangle_rule(3)
    x, y = rule.points.T
    assert rule.weights @ (x**2 * y) == pytest.approx(1 / 60, rel=1e-14)


def test_order_fifty_highest_monomial():
    rule = triangle_rule(50)
    x, y = rule.points.T
    exact = float(exact_monomial(25, 25))
    assert abs(rule.weights @ (x**25 * y**25) - exact) / exact <= 1e-12


@settings(max_examples=60, deadline=None)
@given(order=st.integers(1, MAX_ORDER), data=st.data())
def test_monomial_exactness(order, data):
    a = data.draw(st.integers(0, order))
    b = data.draw(st.integers(0, order - a))
    rule = triangle_rule(order)
    x, y = rule.points.T
    exact = float(exact_monomial(a, b))
    assert abs(rule.weights @ (x**a * y**b) - exact) / exact <= 1e-12


@pytest.mark.parametrize("order", [1, 4, 10, 20, 50])
def test_rules_are_positive_and_interior(order):
    rule = triangle_rule(order)
    assert np.all(rule.weights > 0)
    assert np.all(rule.barycentric > 0)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    assert rule.exactness_order == order


def test_rules_are_cached_and_immutable():
    assert triangle_rule(7) is triangle_rule(7)
    with pytest.raises(ValueError):
        triangle_rule(7).weights[0] = 1.0


@pytest.mark.parametrize("bad", [0, 51, -3])
def test_out_of_range_orders(bad):
    with pytest.raises(ValueError):
        triangle_rule(bad)
    with pytest.raises(ValueError):
        edge_rule(bad)


def test_non_integer_order():
    with pytest.raises(TypeError):
        triangle_rule(2.5)


def test_edge_rules():
    assert edge_rule(1).weights @ edge_rule(1).points == pytest.approx(0.5, rel=1e-15)
    r3 = edge_rule(3)
    assert r3.n_points == 2
    assert r3.weights @ r3.points**3 == pytest.approx(0.25, rel=1e-15)
    r9 = edge_rule(9)
    assert abs(r9.weights @ r9.points**9 - 0.1) <= 1e-14
    assert np.all((r9.points > 0) & (r9.points < 1))


def test_map_reference_triangle_to_itself():
    rule = triangle_rule(5)
    pts, w = map_to_physical(rule, [[0, 0], [1, 0], [0, 1]])
    np.testing.assert_array_equal(pts, rule.points)
    np.testing.assert_allclose(w, rule.weights)


def test_map_weights_sum_to_area_and_length():
    rule = triangle_rule(4)
    tri = np.array([[0.2, 0.1], [1.3, 0.4], [0.5, 2.0]])
    a, b = tri[1] - tri[0], tri[2] - tri[0]
    area = 0.5 * abs(a[0] * b[1] - a[1] * b[0])
    _, w = map_to_physical(rule, tri)
    assert w.sum() == pytest.approx(area, rel=1e-14)
    _, we = map_to_physical(edge_rule(3), [[0, 0], [3, 4]])
    assert we.sum() == pytest.approx(5.0, rel=1e-14)


def test_map_rejects_degenerate_and_mismatched():
    with pytest.raises(ValueError):
        map_to_physical(triangle_rule(2), [[0, 0], [1, 1], [2, 2]])
    with pytest.raises(ValueError):
        map_to_physical(triangle_rule(2), [[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        map_to_physical(edge_rule(2), [[0, 0], [0, 0]])


def test_mapped_nodes_stay_off_axis():
    tri = np.array([[0.0, 0.0], [0.25, 0.0], [0.0, 0.25]])
    for order in (4, 10, 50):
        pts, _ = map_to_physical(triangle_rule(order), tri)
        assert np.all(pts[:, 0] > 0)
