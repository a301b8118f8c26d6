import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locmorse.builtins import builtin
from locmorse.critpoints import (
    ToleranceSet,
    classify,
    find_critical_points,
    newton_batch,
    sym2_eig,
    validate_isolation,
)
from locmorse.errors import BadParameter, NotCritical
from locmorse.field import Ball, Perturbation, lagrange_potential, perturb, polynomial_field

SADDLE = polynomial_field({(2, 0): 1.0, (0, 2): -1.0}, "saddle")
MONKEY = polynomial_field({(3, 0): 1.0, (1, 2): -3.0}, "monkey")


def tols_for(f, ball):
    return ToleranceSet.for_field(f, ball)


def test_saddle_single_point():
    ball = Ball((0, 0), 0.5)
    crits = find_critical_points(SADDLE, ball, 16, tols_for(SADDLE, ball))
    assert len(crits) == 1
    c = crits[0]
    assert c.location == (0.0, 0.0)
    assert c.morse_index == 1 and not c.degenerate
    assert c.hess_eigenvalues == (-2.0, 2.0)


def test_monkey_origin_is_degenerate():
    ball = Ball((0, 0), 0.5)
    crits = find_critical_points(MONKEY, ball, 16, tols_for(MONKEY, ball))
    assert len(crits) == 1
    assert crits[0].degenerate
    assert np.hypot(*crits[0].q) <= 1e-6 * ball.delta


def test_perturbed_monkey_has_two_nondegenerate_saddles():
    ball = Ball((0, 0), 0.5)
    f = perturb(MONKEY, ball, Perturbation(1e-3, seed=0))
    crits = find_critical_points(f, ball, 16, tols_for(f, ball))
    assert crits.counts() == (0, 2, 0)
    assert not crits.degenerate
    assert [c.id for c in crits] == [0, 1]


def test_lagrange_five_points_equal_masses():
    V = lagrange_potential(0.5, 0.5, 1.0)
    ball = Ball((0.0, 0.0), 1.0)
    tols = ToleranceSet(1e-11, 1e-8, 1e-8)
    crits = find_critical_points(V, ball, 48, tols)
    assert len(crits) == 5
    assert crits.counts() == (0, 3, 2)
    maxima = sorted(c.location for c in crits.by_index(2))
    np.testing.assert_allclose(maxima, [(0, -np.sqrt(3) / 2), (0, np.sqrt(3) / 2)], atol=1e-9)
    xs = sorted(c.location[0] for c in crits.by_index(1))
    np.testing.assert_allclose(xs, [-1.19840614455492, 0.0, 1.19840614455492], atol=1e-9)


def test_classify_minimum_and_maximum():
    bowl = polynomial_field({(2, 0): 1.0, (0, 2): 1.0}, "bowl")
    ball = Ball((0, 0), 0.5)
    c = classify(bowl, (0, 0), tols_for(bowl, ball))
    assert c.hess_eigenvalues == (2.0, 2.0) and c.morse_index == 0
    cap = polynomial_field({(2, 0): -1.0, (0, 2): -1.0}, "cap")
    assert classify(cap, (0, 0), tols_for(cap, ball)).morse_index == 2


def test_classify_lagrange_l1():
    V = lagrange_potential(0.5, 0.5, 1.0)
    c = classify(V, (0, 0), ToleranceSet.for_field(V, Ball((0, 0), 0.2)))
    np.testing.assert_allclose(c.hess_eigenvalues, (-17.0, 7.0), rtol=1e-12)
    assert c.morse_index == 1
    np.testing.assert_allclose(np.abs(c.direction("negative")), [1.0, 0.0], atol=1e-12)


def test_classify_rejects_regular_point():
    with pytest.raises(NotCritical):
        classify(SADDLE, (0.1, 0.0), tols_for(SADDLE, Ball((0, 0), 0.5)))


@pytest.mark.parametrize("delta,expected", [(0.4, True), (0.1, True), (0.5, False), (2.0, False)])
def test_isolation_double_well_minimum(delta, expected):
    # (x²−1)² + y² has critical points at x = 0, ±1; at δ = 0.5 the saddle sits on ∂B_{2δ}
    f = builtin("double-well").field
    assert validate_isolation(f, Ball((1.0, 0.0), delta)) is expected


def test_isolation_lagrange_ball_near_primary():
    V = lagrange_potential(0.5, 0.5, 1.0)
    assert validate_isolation(V, Ball((0, 0), 0.2))
    assert not validate_isolation(V, Ball((0, 0), 0.3))  # B_{2δ} reaches the primaries


@pytest.mark.parametrize("name", ["quadratic-saddle", "monkey-saddle", "degenerate-saddle", "double-well"])
def test_grid_refinement_is_stable(name):
    b = builtin(name)
    f = perturb(b.field, b.ball, Perturbation(1e-3 * 2, seed=1))
    t = tols_for(f, b.ball)
    coarse = find_critical_points(f, b.ball, 16, t)
    fine = find_critical_points(f, b.ball, 32, t)
    assert len(coarse) == len(fine)
    for c in coarse:
        _, d = fine.nearest(c.q)
        assert d <= t.merge_tol


@pytest.mark.parametrize("seed", range(4))
def test_spawned_points_stay_in_perturbation_support(seed):
    b = builtin("monkey-saddle")
    f = perturb(b.field, b.ball, Perturbation(1e-3, seed=seed))
    crits = find_critical_points(f, b.ball, 16, tols_for(f, b.ball))
    assert len(crits) > 0
    assert all(b.ball.dist(c.q) < b.ball.delta for c in crits)


def test_newton_batch_reports_divergence():
    # x + y² has no critical point
    tilt = polynomial_field({(1, 0): 1.0, (0, 2): 1.0}, "tilt")
    _, status = newton_batch(tilt, [[0.3, 0.3], [1.0, -1.0]], 1e-12, 1e-12, max_iter=20)
    assert set(status) <= {"diverged", "budget"}
    assert "converged" not in status


def test_find_requires_reasonable_grid():
    with pytest.raises(ValueError):
        find_critical_points(SADDLE, Ball((0, 0), 0.5), 4, ToleranceSet(1e-10, 1e-6, 1e-6))


@pytest.mark.parametrize("bad", [dict(grad_tol=0.0), dict(merge_tol=-1.0), dict(degen_tol=0.0)])
def test_tolerance_set_rejects_nonpositive(bad):
    kw = dict(grad_tol=1e-10, merge_tol=1e-6, degen_tol=1e-6) | bad
    with pytest.raises(BadParameter):
        ToleranceSet(**kw)


def test_default_tolerances_scale_with_ball():
    t = ToleranceSet.for_field(SADDLE, Ball((0, 0), 0.5))
    assert t.merge_tol == pytest.approx(5e-7)
    assert t.grad_tol == pytest.approx(1e-10, rel=0.05)  # max |∇f| on B_δ is 2δ = 1
    assert t.degen_tol == pytest.approx(2e-6, rel=1e-9)


sym = st.floats(-1e3, 1e3, allow_nan=False)


@given(a=sym, b=sym, c=sym)
@settings(max_examples=200, deadline=None)
def test_sym2_eig_matches_lapack(a, b, c):
    H = np.array([[a, b], [b, c]])
    vals, vecs = sym2_eig(H)
    ref = np.linalg.eigvalsh(H)
    scale = max(1.0, np.abs(H).max())
    np.testing.assert_allclose(vals, ref, atol=1e-12 * scale)
    V = np.asarray(vecs)
    np.testing.assert_allclose(V @ V.T, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(H @ V, V * vals, atol=1e-9 * scale)
