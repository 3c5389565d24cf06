from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from lpsi._lp import polytope_vertices, rank_exact, solve_exact, solve_lp, vertices_dd
from lpsi._parallel import pmap, thread_count


def test_solve_lp_small():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    r = solve_lp([-1, -1], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6])
    assert r.success and r.x == (F(8, 5), F(6, 5)) and r.fun == F(-14, 5)


def test_solve_lp_status():
    assert solve_lp([1], A_eq=[[1]], b_eq=[-1]).status == "infeasible"
    assert solve_lp([-1], A_ub=[[-1]], b_ub=[0]).status == "unbounded"
    r = solve_lp([1, 1], A_eq=[[1, -1]], b_eq=[F(1, 3)], bounds=[(None, None), (-2, 5)])
    assert r.success and r.x == (F(-5, 3), -2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5))
def test_solve_lp_matches_highs(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.integers(-4, 5, (m, n))
    b = rng.integers(0, 6, m)
    c = rng.integers(-3, 4, n)
    bounds = [(0, int(rng.integers(1, 6)))] * n
    ours = solve_lp(c.tolist(), A.tolist(), b.tolist(), bounds=bounds)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    assert ours.success == (ref.status == 0)
    if ours.success:
        assert float(ours.fun) == pytest.approx(ref.fun, abs=1e-9)
        x = np.array([float(v) for v in ours.x])
        assert np.all(A @ x <= b + 1e-12)


def test_solve_exact_and_rank():
    assert solve_exact([[2, 1], [1, 3]], [3, 5]) == (F(4, 5), F(7, 5))
    assert solve_exact([[1, 2], [2, 4]], [1, 2]) is None
    assert rank_exact([[1, 2, 3], [2, 4, 6], [0, 1, 1]]) == (2, [0, 2])


def random_polytope(rng, q, m):
    H = rng.normal(size=(m, q))
    h = rng.uniform(0.5, 2.0, m)
    # close it off with a box so it is bounded
    H = np.vstack([H, np.eye(q), -np.eye(q)])
    h = np.concatenate([h, np.full(2 * q, 3.0)])
    return H, h


def as_set(V):
    return sorted(tuple(np.round(v, 7)) for v in V)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 8))
def test_vertices_dd_matches_brute_force(seed, q, m):
    H, h = random_polytope(np.random.default_rng(seed), q, m)
    V_bf, _ = polytope_vertices(H, h)
    V_dd = vertices_dd(H, h, box=10.0)
    assert as_set(V_bf) == as_set(V_dd)


def test_vertices_dd_against_convex_hull():
    rng = np.random.default_rng(2)
    H, h = random_polytope(rng, 3, 12)
    V = vertices_dd(H, h, box=10.0)
    hull = ConvexHull(V)
    assert len(hull.vertices) == len(V)


def test_vertices_dd_degenerate_cube_corner():
    # a pyramid apex shared by four facets (degenerate in 3D)
    H = np.array([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1], [0, 0, -1]], float)
    h = np.array([1, 1, 1, 1, 0], float)
    V = vertices_dd(H, h, box=5.0)
    assert as_set(V) == as_set([[0, 0, 1], [1, 1, 0], [1, -1, 0], [-1, 1, 0], [-1, -1, 0]])


def test_vertices_dd_rejects_unbounded():
    H = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, -1.0]])
    h = np.array([1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        vertices_dd(H, h, box=4.0)


def test_vertices_dd_empty_and_zero_dim():
    H = np.array([[1.0], [-1.0]])
    assert len(vertices_dd(H, np.array([-1.0, -1.0]), box=5.0)) == 0
    assert vertices_dd(np.zeros((1, 0)), np.array([1.0]), box=1.0).shape == (1, 0)


def test_pmap_order(monkeypatch):
    monkeypatch.setenv("LPSI_THREADS", "4")
    assert thread_count() == 4
    assert pmap(lambda v: v * v, range(20)) == [v * v for v in range(20)]
    monkeypatch.setenv("LPSI_THREADS", "junk")
    assert thread_count() == 1
