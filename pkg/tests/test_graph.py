import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwconsensus import build_topology, diameter, is_connected, laplacian
from hwconsensus.errors import (
    Disconnected,
    DuplicateEdge,
    IndexOutOfRange,
    NonpositiveWeight,
    SelfLoop,
    ValidationError,
)

SQUARE = [(1, 2, 1.0), (1, 4, 1.0), (2, 3, 1.0), (2, 4, 1.0)]


def square():
    return build_topology(4, SQUARE)


def test_square_with_chord_degrees():
    t = square()
    lap = laplacian(t)
    assert np.allclose(np.diag(lap.D), [2, 3, 1, 2])
    assert list(t.neighbors(2)) == [1, 3, 4]
    assert list(t.neighbors(3)) == [2]


def test_square_laplacian_matrix():
    L = laplacian(square()).L
    expect = np.array([[2, -1, 0, -1],
                       [-1, 3, -1, -1],
                       [0, -1, 1, 0],
                       [-1, -1, 0, 2]], dtype=float)
    assert np.array_equal(L, expect)


def test_two_node_laplacian():
    L = laplacian(build_topology(2, [(1, 2, 0.7)])).L
    assert np.array_equal(L, np.array([[0.7, -0.7], [-0.7, 0.7]]))


def test_quadratic_form_by_hand():
    # y = e_1 picks out node 1's two unit edges on the chorded square
    L = laplacian(square()).L
    y = np.array([1.0, 0.0, 0.0, 0.0])
    assert y @ L @ y == 2.0


def test_diameter_values():
    assert diameter(square()) == 2
    tri = build_topology(3, [(1, 2, 1), (2, 3, 1), (1, 3, 1)])
    assert diameter(tri) == 1
    path = build_topology(3, [(1, 2, 1), (2, 3, 1)])
    assert diameter(path) == 2


def test_connectivity():
    assert is_connected(square())
    assert not is_connected(build_topology(4, [(1, 2, 1.0)]))
    assert is_connected(build_topology(2, [(1, 2, 1.0)]))


def test_diameter_requires_connected():
    with pytest.raises(Disconnected):
        diameter(build_topology(4, [(1, 2, 1.0)]))


def test_build_rejections():
    with pytest.raises(SelfLoop):
        build_topology(3, [(1, 1, 1.0)])
    with pytest.raises(NonpositiveWeight):
        build_topology(3, [(1, 2, 0.0)])
    with pytest.raises(NonpositiveWeight):
        build_topology(3, [(1, 2, -2.0)])
    with pytest.raises(DuplicateEdge):
        build_topology(3, [(1, 2, 1.0), (2, 1, 2.0)])
    with pytest.raises(IndexOutOfRange):
        build_topology(3, [(1, 4, 1.0)])
    with pytest.raises(ValidationError):
        build_topology(1, [])


@st.composite
def connected_topologies(draw):
    n = draw(st.integers(min_value=2, max_value=8))
    weights = st.floats(min_value=0.1, max_value=5.0,
                        allow_nan=False, allow_infinity=False)
    edges = []
    seen = set()
    for v in range(2, n + 1):
        a = draw(st.integers(min_value=1, max_value=v - 1))
        edges.append((a, v, draw(weights)))
        seen.add((min(a, v), max(a, v)))
    extra = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
             if (i, j) not in seen]
    for (i, j) in extra:
        if draw(st.booleans()):
            edges.append((i, j, draw(weights)))
    return build_topology(n, edges)


@settings(max_examples=100, deadline=None)
@given(connected_topologies(), st.data())
def test_quadratic_form_identity(t, data):
    lap = laplacian(t)
    y = np.array([data.draw(st.floats(min_value=-10, max_value=10,
                                      allow_nan=False)) for _ in range(t.n)])
    direct = float(y @ lap.L @ y)
    pair_sum = 0.0
    for (i, j, w) in t.edge_list():
        pair_sum += w * (y[i - 1] - y[j - 1]) ** 2
    assert direct == pytest.approx(pair_sum, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(connected_topologies())
def test_laplacian_structure(t):
    lap = laplacian(t)
    L = lap.L
    assert np.array_equal(L, L.T)
    assert np.max(np.abs(L.sum(axis=1))) <= 1e-12
    eig = np.linalg.eigvalsh(L)
    assert eig[0] >= -1e-9
    if t.n >= 2:
        assert eig[1] > 1e-9  # algebraic connectivity of a connected graph
    d = diameter(t)
    assert 1 <= d <= t.n - 1
