import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsids.pointproc import SingleSitePotential
from gibbsids.packing import (
    Ball,
    Box,
    Bump,
    EmptyWindowError,
    SeparatedPacking,
    StarRadial,
    check_condition_S,
    direction_sample,
    erode,
    hardcore_floor,
    lattice,
    max_weight_packing,
    norm_u_S,
    packing_cap,
    staircase,
    staircase_upper_norm,
    upper2_convergence,
    window_contains,
)

TRI = Bump.triangle()
COS = Bump.cosine()


def chain_oracle(u, S, resolution):
    """Exact 1D lattice optimum by dynamic programming over sorted nodes.

    best[j] = u(x_j)^2 + max over earlier nodes i whose difference lies in S^c.
    Independent of the branch-and-bound: no ordering by weight, no bounds, no cap.
    """
    X = lattice(u.support_radius, 1, resolution)
    w = u(X) ** 2
    keep = w > 0
    X, w = X[keep], w[keep]
    best = np.zeros(len(X))
    for j in range(len(X)):
        ok = ~S.contains(X[:j] - X[j])
        best[j] = w[j] + (best[:j][ok].max() if np.any(ok) else 0.0)
    return float(best.max())


def enumerate_oracle(X, w, S):
    """Maximum over all S-separated subsets by plain recursive enumeration."""
    n = len(X)
    comp = np.array([[i != j and not S.contains(X[i] - X[j])[0] for j in range(n)] for i in range(n)])
    best = 0.0

    def rec(start, allowed, val):
        nonlocal best
        best = max(best, val)
        for i in range(start, n):
            if allowed[i]:
                rec(i + 1, allowed & comp[i], val + w[i])

    rec(0, np.ones(n, bool), 0.0)
    return best


# --- windows --------------------------------------------------------------------------


def test_window_contains_examples():
    assert window_contains(Ball(1.0), [0.5])
    assert not window_contains(Ball(1.0), [1.5])
    assert not window_contains(Ball(1.0), [1.0])  # open
    b = Box((1.0, 0.5))
    assert window_contains(b, [0.9, 0.4])
    assert not window_contains(b, [0.9, 0.6])
    np.testing.assert_array_equal(window_contains(Ball(1.0, 2), np.array([[0.1, 0.1], [2.0, 0.0]])), [True, False])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_windows_symmetric(x):
    x = np.array(x)
    star = StarRadial(lambda u: 1 + 0.5 * np.cos(2 * np.arctan2(u[:, 1], u[:, 0])) ** 2, 2)
    for S in (Ball(1.3, 2), Box((1.0, 2.0)), star):
        assert window_contains(S, x) == window_contains(S, -x)


def test_box_predicates_exact():
    S = Ball(1.0, 2)
    assert S.box_inside(np.array([-0.5, -0.5]), np.array([0.5, 0.5]))
    assert not S.box_inside(np.array([0.0, 0.0]), np.array([0.8, 0.8]))
    assert S.box_meets_complement(np.array([0.0, 0.0]), np.array([0.8, 0.8]))
    B = Box((1.0,))
    assert B.box_meets_complement(np.array([0.0]), np.array([1.0]), closed=True)
    assert not B.box_meets_complement(np.array([0.0]), np.array([1.0]), closed=False)


def test_condition_S_examples():
    assert check_condition_S(Ball(1.0, 2)).passed
    assert check_condition_S(Box((1.0, 0.3))).passed
    assert check_condition_S(Ball(1.0, 3)).passed

    def spike(u):
        # a disc of radius 0.02 plus a needle of length 1 along the first axis
        needle = np.abs(u[:, 1]) < 1e-12
        return np.where(needle, 1.0, 0.02)

    rep = check_condition_S(StarRadial(spike, 2))
    assert not rep.passed and rep.worst_margin < 0
    with pytest.raises(ValueError):
        check_condition_S(Ball(1.0), alphas=[1.0])


def test_star_rejects_asymmetric_profile():
    with pytest.raises(ValueError):
        StarRadial(lambda u: 1 + 0.5 * (u[:, 0] > 0), 2)


def test_direction_samples():
    assert direction_sample(2).shape == (720, 2)
    d3 = direction_sample(3)
    np.testing.assert_allclose(np.linalg.norm(d3, axis=1), 1.0)
    np.testing.assert_allclose(direction_sample(1), [[1.0], [-1.0]])


# --- erosion --------------------------------------------------------------------------------


def test_erode_examples():
    e = erode(Ball(1.0), 0.25)
    assert isinstance(e, Ball) and e.r == 0.75
    assert window_contains(e, [0.74]) and not window_contains(e, [0.75])
    assert erode(Box((1.0, 2.0)), 0.5).half_widths == (0.5, 1.5)
    assert erode(Ball(1.0), 0.0) == Ball(1.0)
    assert erode(Ball(1.0), 1e-12).r == pytest.approx(1.0, abs=1e-9)
    inner = erode(Ball(1.0, 2), 0.5)
    pts = np.random.default_rng(0).uniform(-1, 1, (2000, 2))
    assert np.all(Ball(1.0, 2).contains(pts[inner.contains(pts)]))
    assert np.any(Ball(1.0, 2).contains(pts) & ~inner.contains(pts))
    with pytest.raises(EmptyWindowError):
        erode(Ball(1.0), 1.0)
    with pytest.raises(ValueError):
        erode(Ball(1.0), -0.1)


def test_erode_star_matches_ball_erosion():
    star = StarRadial(lambda u: np.full(len(u), 1.0), 2, "disc")
    e = erode(star, 0.3)
    dirs = direction_sample(2)
    np.testing.assert_allclose(e.radial(dirs), 0.7, atol=1e-6)
    assert erode(star, 1e-12).radial(dirs) == pytest.approx(star.radial(dirs), abs=1e-9)


def test_erode_star_distance_semantics():
    # ellipse-like profile: every eroded boundary point sits at distance about eps from the original boundary
    star = StarRadial(lambda u: 1 / np.sqrt(u[:, 0] ** 2 + (u[:, 1] / 0.6) ** 2), 2)
    eps = 0.2
    e = erode(star, eps)
    dirs = direction_sample(2)
    inner = dirs * e.radial(dirs)[:, None]
    outer = dirs * star.radial(dirs)[:, None]
    dist = np.min(np.linalg.norm(inner[:, None] - outer[None], axis=-1), axis=1)
    np.testing.assert_allclose(dist, eps, atol=5e-3)


# --- separated-packing norm ---------------------------------------------------------------------


def test_norm_triangle_oracle_fine_lattice():
    res = norm_u_S(TRI, Ball(1.0), 1e-3)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    assert res.value == pytest.approx(chain_oracle(TRI, Ball(1.0), 1e-3), abs=1e-12)
    assert res.witness.is_feasible()
    np.testing.assert_allclose(res.witness.points, [[0.0]])


def test_norm_cosine_oracle_fine_lattice():
    res = norm_u_S(COS, Ball(1.0), 1e-3)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    assert res.value == pytest.approx(chain_oracle(COS, Ball(1.0), 1e-3), abs=1e-12)


@pytest.mark.parametrize("u", [TRI, COS], ids=["tri", "cos"])
@pytest.mark.parametrize("r", [0.3, 0.5, 0.75, 1.5])
def test_norm_matches_chain_oracle(u, r):
    S = Ball(r)
    res = norm_u_S(u, S, 1e-2)
    assert res.value == pytest.approx(chain_oracle(u, S, 1e-2), abs=1e-12)
    assert res.witness.is_feasible()
    assert len(res.witness) <= res.cap


def test_norm_half_ball_values():
    assert norm_u_S(TRI, Ball(0.5), 1e-2).value == pytest.approx(1.5)
    res = norm_u_S(COS, Ball(0.5), 1e-3)
    assert res.value == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(np.sort(res.witness.points[:, 0]), [-0.5, 0.0, 0.5], atol=1e-12)


@pytest.mark.parametrize("u", [TRI, COS, Bump.triangle(2.0, 0.5)], ids=["tri", "cos", "tri2"])
def test_norm_difference_set_regime_is_max_square(u):
    S = Ball(2 * u.support_radius + 0.01)
    res = norm_u_S(u, S, u.support_radius / 100)
    assert res.value == float(np.max(u(lattice(u.support_radius, 1, u.support_radius / 100)))) ** 2
    assert len(res.witness) == 1


def test_norm_2d_against_enumeration():
    u = Bump.triangle(1.0, 1.0, dim=2)
    for S in (Ball(0.7, 2), Box((0.6, 0.9)), Ball(1.1, 2)):
        res = norm_u_S(u, S, 0.25)
        X = lattice(1.0, 2, 0.25)
        w = u(X) ** 2
        keep = w > 0
        assert res.value == pytest.approx(enumerate_oracle(X[keep], w[keep], S), abs=1e-12)
        assert res.witness.is_feasible()


def test_norm_monotone_under_nested_lattices_and_slack():
    for u in (TRI, COS):
        S = Ball(0.6)
        coarse = norm_u_S(u, S, 1e-2)
        fine = norm_u_S(u, S, 1e-3)
        assert fine.value >= coarse.value - 1e-12
        assert fine.value - coarse.value <= coarse.slack


def test_norm_power_one_and_potential_input():
    u0 = SingleSitePotential.triangular(1.0, 1.5)
    res = norm_u_S(u0, Ball(1.0), 0.05, power=1)
    # {0, +-1} gives 1 + 2/3; nodes at +-1.05 give 1 + 2 * 0.3 = 1.6
    assert res.value == pytest.approx(5 / 3)


def test_norm_rejects_coarse_resolution():
    with pytest.raises(ValueError):
        norm_u_S(TRI, Ball(1.0), 0.6)


def test_packing_cap_and_report_row():
    assert packing_cap(1.0, Ball(0.5), 1) == 5
    assert packing_cap(1.0, Ball(1.0, 2), 2) == 9
    row = norm_u_S(TRI, Ball(1.0), 0.1).row("tri", "ball1")
    assert row[:3] == ("tri", "ball1", 0.1) and row[3] == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=11), st.integers(1, 4), st.integers(0, 1000))
def test_branch_and_bound_equals_enumeration(ws, cap, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (len(ws), 2))
    S = Ball(float(rng.uniform(0.3, 2.0)), 2)
    w = np.array(ws)
    comp = lambda i, rest: ~S.contains(X[rest] - X[i])  # noqa: E731
    val, idx = max_weight_packing(X, w, comp, cap)
    # oracle with the cap: enumerate separated subsets of size <= cap
    best = 0.0
    n = len(w)

    def rec(start, chosen, v):
        nonlocal best
        best = max(best, v)
        if len(chosen) == cap:
            return
        for i in range(start, n):
            if all(not S.contains(X[i] - X[j])[0] for j in chosen):
                rec(i + 1, chosen + [i], v + w[i])

    rec(0, [], 0.0)
    assert val == pytest.approx(best, abs=1e-12)
    assert len(idx) <= cap
    assert SeparatedPacking(X[idx], S, w[idx]).is_feasible()


# --- staircase -----------------------------------------------------------------------------------


def test_staircase_triangle_n2_cells():
    s = staircase(TRI, 2)
    assert s(np.array([[0.75]]))[0] == 0.5
    assert s(np.array([[1.0]]))[0] == 0.5
    assert s(np.array([[0.25]]))[0] == 1.0
    assert s(np.array([[0.5]]))[0] == 1.0  # right end of (0, 1/2]
    assert s(np.array([[-0.25]]))[0] == 1.0
    assert s(np.array([[1.3]]))[0] == 0.0


@pytest.mark.parametrize("u", [TRI, COS, Bump.triangle(1.0, 1.0, 2)], ids=["tri", "cos", "tri2d"])
@pytest.mark.parametrize("n", [3, 8, 17])
def test_staircase_dominates_and_converges(u, n):
    d = u.dim
    x = np.random.default_rng(n).uniform(-1.3, 1.3, (10_000, d))
    s = staircase(u, n)
    assert np.all(s(x) >= u(x) - 1e-12)
    assert np.max(s(x) - u(x)) <= u.lipschitz * math.sqrt(d) / n + 1e-12


def test_staircase_upper_bound_sandwich():
    for n in (4, 8, 16):
        s = staircase(TRI, n)
        for S in (Ball(1.0), Ball(0.5)):
            lower = norm_u_S(s, S, 1.0 / (8 * n)).value
            upper, _ = staircase_upper_norm(s, S)
            assert lower <= upper + 1e-12
            assert upper >= norm_u_S(TRI, S, 1e-2).value - 1e-12
    with pytest.raises(ValueError):
        staircase_upper_norm(staircase(TRI, 1), Ball(0.5))


def test_upper2_trend_and_no_erosion_case():
    rows = upper2_convergence(TRI, Ball(1.0), 2.0, [4, 8, 16, 32, 64], target=1.0)
    for r in rows:
        assert r.lower >= 1.0 - 1e-12
        assert r.lower <= r.upper + 1e-12
    assert rows[-1].gap < 0.05
    assert rows[1].gap > rows[-1].gap
    rows0 = upper2_convergence(TRI, Ball(1.0), 0.0, [4, 16], target=1.0)
    assert all(r.lower >= 1.0 - 1e-12 for r in rows0)
    with pytest.raises(EmptyWindowError):
        upper2_convergence(TRI, Ball(1.0), 2.0, [2], target=1.0)


def test_hardcore_floor_brackets_true_infimum():
    u0 = SingleSitePotential.triangular(1.0, 1.5)
    beta = hardcore_floor(u0, 1.0)
    assert -5 / 3 - 0.05 <= beta <= -5 / 3


def test_bump_from_potential_reflects():
    u0 = SingleSitePotential.triangular(2.0, 1.0)
    b = Bump.from_potential(u0)
    assert b(np.array([[0.25]]))[0] == pytest.approx(1.5)
    assert b.lipschitz == 2.0
