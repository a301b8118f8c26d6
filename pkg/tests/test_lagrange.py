import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locmorse.errors import BadParameter, CensusMismatch, IsolationLost, RootCountMismatch, SingularPoint
from locmorse.lagrange import (
    EXPECTED_BETTI,
    LABELS,
    LagrangeParams,
    collinear_hessian,
    collinear_points,
    equal_mass_homotopy,
    locate_all,
    theorem_a_pipeline,
)


def axis_slope(m1, m2, eps, x):
    # d/dx of −m₁/|x+½| − m₂/|x−½| − εx²/2
    return m1 * np.sign(x + 0.5) / (x + 0.5) ** 2 + m2 * np.sign(x - 0.5) / (x - 0.5) ** 2 - eps * x


def bisect(f, lo, hi, n=200):
    flo = f(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisection_oracle(m1, m2, eps):
    f = lambda x: axis_slope(m1, m2, eps, x)  # noqa: E731
    g = 1e-9
    return [bisect(f, -0.5 + g, 0.5 - g), bisect(f, 0.5 + g, 5.0), bisect(f, -5.0, -0.5 - g)]


masses = st.floats(0.05, 2.0)


@given(m1=masses, m2=masses, eps=st.floats(0.2, 2.0))
@settings(max_examples=40, deadline=None)
def test_collinear_points_match_bisection(m1, m2, eps):
    got = [p[0] for p in collinear_points(LagrangeParams(m1, m2, eps))]
    np.testing.assert_allclose(got, bisection_oracle(m1, m2, eps), rtol=0, atol=1e-12)


def test_equal_mass_collinear_points():
    l1, l2, l3 = collinear_points(LagrangeParams(0.5, 0.5, 1.0))
    assert l1[0] == pytest.approx(0.0, abs=1e-15)
    assert l2[0] == pytest.approx(1.19840614455492, abs=1e-12)
    assert l3[0] == pytest.approx(-1.19840614455492, abs=1e-12)


@given(m=masses, eps=st.floats(0.2, 2.0))
@settings(max_examples=25, deadline=None)
def test_equal_masses_are_mirror_symmetric(m, eps):
    l1, l2, l3 = collinear_points(LagrangeParams(m, m, eps))
    assert abs(l1[0]) < 1e-12
    assert l2[0] == pytest.approx(-l3[0], abs=1e-12)


def test_outer_roots_need_a_sign_change():
    # the outer points drift beyond the search window as ε → 0: (2m/ε)^⅓ ≈ 27
    with pytest.raises(RootCountMismatch):
        collinear_points(LagrangeParams(1.0, 1.0, 1e-4))


@given(m1=masses, m2=masses, eps=st.floats(0.2, 2.0), x=st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_collinear_hessian_matches_field(m1, m2, eps, x):
    if min(abs(x - 0.5), abs(x + 0.5)) < 0.05:
        return
    p = LagrangeParams(m1, m2, eps)
    H = collinear_hessian(p, x)
    ref = p.field().hessian([x, 0.0])
    np.testing.assert_allclose(H, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
    assert H[0, 0] < 0


def test_collinear_hessian_at_centre():
    with pytest.raises(SingularPoint):
        collinear_hessian(LagrangeParams(0.5, 0.5, 1.0), 0.5)


def test_l1_hessian_equal_masses():
    H = collinear_hessian(LagrangeParams(0.5, 0.5, 1.0), 0.0)
    np.testing.assert_allclose(np.diag(H), [-17.0, 7.0], rtol=1e-14)


def test_census_equal_masses():
    crits = locate_all(LagrangeParams(0.5, 0.5, 1.0))
    assert [c.morse_index for c in crits] == [1, 1, 1, 2, 2]
    np.testing.assert_allclose(crits[3].q, [0.0, np.sqrt(3) / 2], atol=1e-10)
    np.testing.assert_allclose(crits[4].q, [0.0, -np.sqrt(3) / 2], atol=1e-10)


@pytest.mark.parametrize("m1,m2,eps", [(0.6, 0.4, 1.0), (0.7, 0.2, 0.5), (1.0, 0.3, 2.0)])
def test_off_axis_distances(m1, m2, eps):
    # at an off-axis point ∇V = 0 forces mᵢ/rᵢ³ = ε/2, i.e. rᵢ = (2mᵢ/ε)^⅓
    crits = locate_all(LagrangeParams(m1, m2, eps))
    r1, r2 = (2 * m1 / eps) ** (1 / 3), (2 * m2 / eps) ** (1 / 3)
    for c in crits[3:]:
        assert np.hypot(c.q[0] + 0.5, c.q[1]) == pytest.approx(r1, rel=1e-9)
        assert np.hypot(c.q[0] - 0.5, c.q[1]) == pytest.approx(r2, rel=1e-9)
    assert crits[3].q[1] > 0 > crits[4].q[1]


def test_census_mismatch_when_triangle_fails():
    p = LagrangeParams(0.05, 0.05, 1.0)
    assert not p.off_axis_admissible()
    with pytest.raises(CensusMismatch) as info:
        locate_all(p)
    assert len(info.value.found) == 3


@pytest.mark.parametrize("m", [0.0625, 0.07, 0.5, 2.0])
def test_admissibility_equal_masses(m):
    # equal masses: the pair exists exactly when 2(2m/ε)^⅓ > 1, i.e. m > ε/16
    assert LagrangeParams(m, m, 1.0).off_axis_admissible() is (m > 1 / 16)


def test_mass_homotopy_endpoints():
    p = LagrangeParams(0.7, 0.2, 0.5)
    q = np.array([0.3, 0.9])
    assert equal_mass_homotopy(p, 1.0).value(q) == p.field().value(q)
    start = LagrangeParams(0.7, 0.7, 0.5).field()
    assert equal_mass_homotopy(p, 0.0).value(q) == pytest.approx(start.value(q), rel=1e-15)


def test_mass_homotopy_rejects_negative_masses():
    with pytest.raises(BadParameter):
        equal_mass_homotopy(LagrangeParams(0.7, 0.2, 0.5), 3.0)


@pytest.mark.parametrize("args", [(-1.0, 0.5, 1.0), (0.5, 0.0, 1.0), (0.5, 0.5, -2.0)])
def test_params_validation(args):
    with pytest.raises(BadParameter):
        LagrangeParams(*args)


def test_isolation_lost_when_pair_merges():
    # r₂ = (2m₂/ε)^⅓ falls below r₁ − 1 once m₂(t) < ~0.0088, i.e. near t ≈ 0.992
    with pytest.raises(IsolationLost) as info:
        theorem_a_pipeline(LagrangeParams(1.0, 0.001, 1.0))
    assert 0.98 < info.value.t <= 1.0


def test_theorem_a_equal_masses(theorem_a):
    rep = theorem_a(0.5, 0.5, 1.0)
    assert rep.matches_theorem
    assert all(rep.checks.values()), rep.checks
    assert rep.betti == {k: tuple(v) for k, v in EXPECTED_BETTI.items()}
    labels = [p.label for p in rep.points]
    assert labels == list(LABELS)
    assert [p.classification for p in rep.points] == ["saddle"] * 3 + ["maximum"] * 2


def test_report_files(theorem_a, tmp_path):
    rep = theorem_a(0.6, 0.4, 1.0)
    rep.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["params"] == {"m1": 0.6, "m2": 0.4, "eps": 1.0}
    assert [p["betti_end"] for p in data["points"]] == [[0, 1, 0]] * 3 + [[0, 0, 1]] * 2
    files = rep.write_paths(tmp_path)
    assert [f.name for f in files] == [f"{lab}_path.csv" for lab in LABELS]
    with open(files[0]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "q1", "q2"]
    s = np.array([r[0] for r in rows[1:]], dtype=float)
    assert s[0] == 0.0 and s[-1] == 1.0 and np.all(np.diff(s) > 0)
    # the tracked l₁ ends on the collinear root of the target masses
    end = np.array(rows[-1][1:], dtype=float)
    np.testing.assert_allclose(end, collinear_points(LagrangeParams(0.6, 0.4, 1.0))[0], atol=1e-9)
