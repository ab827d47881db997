import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polydg.quadrature import (
    GeometryError,
    edge_rule,
    polygon_area,
    polygon_centroid,
    triangulate_polygon,
    volume_rule,
)

SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
L_HEX = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)


def tri_area(t):
    return 0.5 * abs((t[1, 0] - t[0, 0]) * (t[2, 1] - t[0, 1]) - (t[2, 0] - t[0, 0]) * (t[1, 1] - t[0, 1]))


def test_triangulation_counts():
    assert len(triangulate_polygon(SQUARE)) == 2
    tri = np.array([[0, 0], [1, 0], [0, 1]], float)
    out = triangulate_polygon(tri)
    assert len(out) == 1
    assert np.allclose(sorted(map(tuple, out[0])), sorted(map(tuple, tri)))
    tris = triangulate_polygon(L_HEX)
    assert len(tris) == 4
    assert abs(sum(tri_area(t) for t in tris) - polygon_area(L_HEX)) < 1e-12


def test_triangulation_rejects_bad_input():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
    with pytest.raises(GeometryError):
        triangulate_polygon(bowtie)
    with pytest.raises(GeometryError):
        triangulate_polygon(SQUARE[::-1])


def test_square_x2y2():
    rule = volume_rule(SQUARE, 4)
    x, y = rule.points.T
    assert abs(rule.weights @ (x ** 2 * y ** 2) - 1 / 9) < 1e-13


def test_weights_sum_to_area():
    for poly in (SQUARE, L_HEX):
        rule = volume_rule(poly, 6)
        assert (rule.weights > 0).all()
        assert abs(rule.weights.sum() - polygon_area(poly)) < 1e-12


def test_first_moment_matches_centroid():
    rule = volume_rule(L_HEX, 1)
    x, y = rule.points.T
    cx, cy = polygon_centroid(L_HEX)
    area = polygon_area(L_HEX)
    assert abs(rule.weights @ (x + y) - area * (cx + cy)) < 1e-12


def test_edge_rule():
    rule = edge_rule(np.array([0.0, 0.0]), np.array([1.0, 0.0]), 3)
    assert abs(rule.weights @ rule.points[:, 0] ** 3 - 0.25) < 1e-14
    a, b = np.array([0.2, 0.1]), np.array([1.3, 0.7])
    rule = edge_rule(a, b, 5)
    assert abs(rule.weights.sum() - np.linalg.norm(b - a)) < 1e-14
    s = (rule.points - (a + b) / 2) @ (b - a)
    assert abs(rule.weights @ s ** 3) < 1e-14


def monomial_triangle(tri, a, b):
    """Exact ∫ x^a y^b over a triangle via the affine map and Beta integrals."""
    p0, p1, p2 = tri
    J = abs((p1 - p0)[0] * (p2 - p0)[1] - (p1 - p0)[1] * (p2 - p0)[0])
    total = 0.0
    # expand (p0 + s e1 + t e2)^(a, b) in s, t and integrate s^i t^j over the unit triangle
    e1, e2 = p1 - p0, p2 - p0
    for ia, ja in product(range(a + 1), repeat=2):
        if ia + ja > a:
            continue
        ca = math.comb(a, ia) * math.comb(a - ia, ja) * p0[0] ** (a - ia - ja) * e1[0] ** ia * e2[0] ** ja
        for ib, jb in product(range(b + 1), repeat=2):
            if ib + jb > b:
                continue
            cb = math.comb(b, ib) * math.comb(b - ib, jb) * p0[1] ** (b - ib - jb) * e1[1] ** ib * e2[1] ** jb
            i, j = ia + ib, ja + jb
            total += ca * cb * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
    return J * total


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 8), st.data())
def test_polynomial_exactness(degree, data):
    a = data.draw(st.integers(0, degree))
    b = degree - a
    rule = volume_rule(L_HEX, degree)
    exact = sum(monomial_triangle(t, a, b) for t in triangulate_polygon(L_HEX))
    x, y = rule.points.T
    got = rule.weights @ (x ** a * y ** b)
    assert abs(got - exact) <= 1e-11 * max(1.0, abs(exact))
    assert rule.exact_degree >= degree


def test_triangulation_independence():
    # the same square split along either diagonal
    f = lambda p: (p[:, 0] + 2 * p[:, 1] - 0.3) ** 8
    rot = np.roll(SQUARE, 1, axis=0)
    r1, r2 = volume_rule(SQUARE, 8), volume_rule(rot, 8)
    i1, i2 = r1.weights @ f(r1.points), r2.weights @ f(r2.points)
    assert abs(i1 - i2) < 1e-12 * abs(i1)
