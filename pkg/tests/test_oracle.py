import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locmorse.builtins import builtin
from locmorse.errors import BadParameter, GridBudgetExceeded
from locmorse.field import lagrange_potential, polynomial_field
from locmorse.oracle import oracle_homology, relative_betti, relative_betti_dense, sublevel_complex

EXPECTED = {
    "quadratic-saddle": (0, 1, 0),
    "quadratic-min": (1, 0, 0),
    "quadratic-max": (0, 0, 1),
    "monkey-saddle": (0, 2, 0),
    "degenerate-saddle": (0, 1, 0),
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
@pytest.mark.parametrize("n", [64, 128])
def test_builtin_local_homology(name, n):
    b = builtin(name)
    res = oracle_homology(b.field, b.ball.center, b.ball.delta, n)
    assert res.betti == EXPECTED[name]
    assert res.level == pytest.approx(b.field.value(b.ball.center))


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_dense_ranks_agree(name):
    b = builtin(name)
    K = sublevel_complex(b.field, b.ball.center, b.ball.delta, 24)
    assert relative_betti(K) == relative_betti_dense(K) == EXPECTED[name]


coef = st.floats(-1.0, 1.0, allow_nan=False).map(lambda v: round(v, 3))


@given(c=st.lists(coef, min_size=7, max_size=7), n=st.sampled_from([8, 12, 16]))
@settings(max_examples=60, deadline=None)
def test_combinatorial_matches_dense_on_random_cubics(c, n):
    # ranks must agree whether or not the origin is critical
    terms = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (1, 2)]
    f = polynomial_field(dict(zip(terms, c)), "cubic")
    K = sublevel_complex(f, (0.0, 0.0), 1.0, n)
    assert relative_betti(K) == relative_betti_dense(K)


def test_regular_point_is_acyclic():
    f = polynomial_field({(1, 0): 1.0, (0, 2): 0.3}, "tilt")
    assert oracle_homology(f, (0.0, 0.0), 0.5, 64).betti == (0, 0, 0)


def test_refinement_is_stable():
    b = builtin("monkey-saddle")
    coarse = oracle_homology(b.field, b.ball.center, b.ball.delta, 128)
    fine = oracle_homology(b.field, b.ball.center, b.ball.delta, 256)
    assert coarse.betti == fine.betti


def test_relative_euler_matches_cell_counts():
    b = builtin("quadratic-saddle")
    K = sublevel_complex(b.field, b.ball.center, b.ball.delta, 16)
    live = (~K.vertex_in_A).sum() - (~K.edge_in_A).sum() + (~K.square_in_A).sum()
    assert K.relative_euler() == live == -1


def test_as_dict():
    b = builtin("quadratic-min")
    d = oracle_homology(b.field, b.ball.center, b.ball.delta, 16).as_dict()
    assert d == {"betti": [1, 0, 0], "n": 16, "radius": 0.5, "level": 0.0}


@pytest.mark.parametrize("n", [0, 1, 7, 129])
def test_grid_must_be_even(n):
    with pytest.raises(BadParameter):
        sublevel_complex(builtin("quadratic-min").field, (0, 0), 0.5, n)


def test_grid_budget():
    with pytest.raises(GridBudgetExceeded):
        sublevel_complex(builtin("quadratic-min").field, (0, 0), 0.5, 8192)


def test_lagrange_points():
    V = lagrange_potential(0.5, 0.5, 1.0)
    # disks of radius 0.2 stay clear of the centres at (±½, 0)
    assert oracle_homology(V, (0.0, 0.0), 0.2, 128).betti == (0, 1, 0)
    assert oracle_homology(V, (1.19840614455492, 0.0), 0.2, 128).betti == (0, 1, 0)
    assert oracle_homology(V, (0.0, np.sqrt(3) / 2), 0.2, 128).betti == (0, 0, 1)
