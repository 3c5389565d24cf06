"""Brute-force checks for the univariate solver.

None of these reuse the solver's run detection or knot construction:

* :func:`alpha_grid_oracle` searches the slope-bracketing family on a dense
  grid of mixing weights (interior points included) with an exact min-sum
  dynamic program along each run;
* :func:`random_restart_oracle` places ``N - 2`` knots at random, solves the
  square interpolation system and refines positions by coordinate descent;
* :func:`partition_lp_l0_oracle` finds the fewest knots by deciding, in exact
  rational arithmetic, which assignments of data points to affine pieces can
  be joined continuously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._parallel import pmap
from .core import (
    CPWLFunction,
    Dataset1D,
    ReLUNet1D,
    ResourceCapError,
    ValidationError,
    from_network,
    vp_cost,
)

__all__ = [
    "OracleConfig",
    "OracleResult",
    "L0OracleResult",
    "alpha_grid_oracle",
    "random_restart_oracle",
    "partition_lp_l0_oracle",
]

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: int = 20
    restarts: int = 100
    seed: int = 0
    l0_piece_cap: int = 10
    alpha_cap: int = 6
    iterations: int = 200
    line_search_evals: int = 24

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValidationError("grid_resolution must be at least 2")
        if self.restarts < 1 or self.iterations < 0 or self.line_search_evals < 1:
            raise ValidationError("restarts, iterations and line_search_evals must be positive")
        if self.l0_piece_cap < 0 or self.alpha_cap < 0:
            raise ValidationError("caps must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class OracleResult:
    cost: float
    f: CPWLFunction | None = None
    net: ReLUNet1D | None = None
    kind: str = ""


@dataclass(frozen=True)
class L0OracleResult:
    count: int
    labels: tuple  # knots per gap between consecutive data points


def _float_data(d: Dataset1D):
    return np.array([float(x) for x in d.xs]), np.array([float(y) for y in d.ys])


# ---------------------------------------------------------------- alpha grid


def _curvature_blocks(s):
    """Maximal blocks ``(first, last)`` of interior points with equal nonzero curvature sign."""
    n_int = len(s) - 1
    sg = [int(np.sign(s[k + 1] - s[k])) for k in range(n_int)]  # point k + 1
    blocks, k = [], 0
    while k < n_int:
        if sg[k] == 0:
            k += 1
            continue
        j = k
        while j + 1 < n_int and sg[j + 1] == sg[k]:
            j += 1
        blocks.append((k + 1, j + 1))
        k = j + 1
    return blocks


def _chain_dp(values: list, left: float, right: float, p: float):
    """Minimise |v_1 - left|^p + sum |v_j - v_{j-1}|^p + |right - v_last|^p over grid choices."""

    def cost(a, b):
        diff = np.abs(np.subtract.outer(a, b))
        with np.errstate(divide="ignore"):
            return np.where(diff > 0, diff**p, 0.0)

    acc = cost(values[0], np.array([left]))[:, 0]
    back = []
    for j in range(1, len(values)):
        tot = acc[None, :] + cost(values[j], values[j - 1])
        arg = np.argmin(tot, axis=1)
        back.append(arg)
        acc = tot[np.arange(len(values[j])), arg]
    final = acc + cost(np.array([right]), values[-1])[0]
    k = int(np.argmin(final))
    choice = [k]
    for arg in reversed(back):
        choice.append(int(arg[choice[-1]]))
    choice.reverse()
    return float(final[k]), [float(values[j][c]) for j, c in enumerate(choice)]


def _line_meet(xa, ya, sa, xb, yb, sb):
    return xa + ((yb - ya) - sb * (xb - xa)) / (sa - sb)


def alpha_grid_oracle(d: Dataset1D, p: float, cfg: OracleConfig | None = None) -> OracleResult:
    """Best cost over mixing weights ``alpha_j in {0, 1/g, ..., 1}`` on every run."""
    cfg = cfg or OracleConfig()
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    x, y = _float_data(d)
    s = np.diff(y) / np.diff(x)
    g = cfg.grid_resolution
    grid = np.arange(g + 1) / g
    total = 0.0
    blocks = _curvature_blocks(s)
    for lo, hi in blocks:
        if hi - lo - 1 > cfg.alpha_cap:
            raise ResourceCapError(f"run with {hi - lo - 1} free slopes exceeds alpha_cap={cfg.alpha_cap}")
    # walk interior points, emitting knots
    knots = []
    k = 1
    n = len(x)
    block_at = {lo: hi for lo, hi in blocks}
    while k <= n - 2:
        hi = block_at.get(k)
        if hi is None:
            k += 1
            continue
        m = hi - k
        if m == 0:
            c = s[k] - s[k - 1]
            knots.append((x[k], c))
            total += abs(c) ** p
        elif m == 1:
            u = _line_meet(x[k], y[k], s[k - 1], x[k + 1], y[k + 1], s[k + 1])
            c = s[k + 1] - s[k - 1]
            knots.append((u, c))
            total += abs(c) ** p
        else:
            values = [(1 - grid) * s[k + j - 1] + grid * s[k + j] for j in range(1, m)]
            cost, us = _chain_dp(values, s[k - 1], s[k + m], p)
            total += cost
            slopes = [s[k - 1]] + us + [s[k + m]]
            through = list(range(k, k + m + 1))
            for j in range(1, len(slopes)):
                if slopes[j] != slopes[j - 1]:
                    pa, pb = through[j - 1], through[j]
                    u = _line_meet(x[pa], y[pa], slopes[j - 1], x[pb], y[pb], slopes[j])
                    knots.append((u, slopes[j] - slopes[j - 1]))
        k = hi + 1
    f = CPWLFunction.canonical(x[0] - 1, y[0] - s[0], s[0], knots)
    return OracleResult(total, f=f, kind="grid")


# ---------------------------------------------------------------- random restarts


def _fit(x, y, t):
    """Interpolate with knots ``t`` (shape (B, k)); returns coefficients (B, k+2) and residuals."""
    B, k = t.shape
    n = len(x)
    M = np.empty((B, n, k + 2))
    M[:, :, 0] = 1.0
    M[:, :, 1] = x[None, :]
    M[:, :, 2:] = np.maximum(x[None, :, None] - t[:, None, :], 0.0)
    rhs = np.broadcast_to(y, (B, n))
    try:
        coef = np.linalg.solve(M, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        # exactly singular placements (e.g. two knots right of the last but one
        # point) are rejected; the rest are solved normally
        sign, _ = np.linalg.slogdet(M)
        good = sign != 0
        coef = np.full((B, k + 2), np.nan)
        if good.any():
            coef[good] = np.linalg.solve(M[good], rhs[good][..., None])[..., 0]
    return M, coef


def _restart_costs(x, y, t, p, scale):
    M, coef = _fit(x, y, t)
    c = coef[:, 2:].copy()
    c[np.abs(c) <= 1e-12 * scale] = 0.0
    coef = np.concatenate([coef[:, :2], c], axis=1)
    resid = np.abs(np.einsum("bnk,bk->bn", M, coef) - y[None, :]).max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = np.where(c != 0, np.abs(c) ** p, 0.0).sum(axis=1)
    ok = np.isfinite(cost) & (resid <= 1e-8 * (1 + np.abs(y).max()))
    return np.where(ok, cost, np.inf), coef


def random_restart_oracle(d: Dataset1D, p: float, cfg: OracleConfig | None = None) -> OracleResult:
    """Best interpolating network found from random knot placements.

    Each restart draws ``N - 2`` knot positions uniformly in ``[x_1, x_N]`` and
    fits the remaining parameters by solving the interpolation system.  Knot
    positions are then improved one at a time by golden-section search; all
    restarts are advanced together as one batch.  ``cfg.iterations`` counts
    single-knot updates per restart.
    """
    cfg = cfg or OracleConfig()
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    x, y = _float_data(d)
    n = len(x)
    k = n - 2
    rng = np.random.default_rng(cfg.seed)
    if k == 0:
        s = (y[1] - y[0]) / (x[1] - x[0])
        net = ReLUNet1D((), s, y[0] - s * x[0])
        return OracleResult(0.0, net=net, kind="restart")
    lo, hi = x[0], x[-1]
    scale = 1.0 + np.abs(np.diff(y) / np.diff(x)).max()
    t = np.sort(rng.uniform(lo, hi, size=(cfg.restarts, k)), axis=1)
    best, _ = _restart_costs(x, y, t, p, scale)

    for it in range(cfg.iterations):
        j = it % k
        a = np.full(cfg.restarts, lo)
        b = np.full(cfg.restarts, hi)

        def at(pos):
            tt = t.copy()
            tt[:, j] = pos
            return _restart_costs(x, y, tt, p, scale)[0]

        c1 = b - _GOLDEN * (b - a)
        c2 = a + _GOLDEN * (b - a)
        f1, f2 = at(c1), at(c2)
        for _ in range(cfg.line_search_evals):
            left = f1 <= f2
            b = np.where(left, c2, b)
            a = np.where(left, a, c1)
            new = np.where(left, b - _GOLDEN * (b - a), a + _GOLDEN * (b - a))
            fn = at(new)
            c2, f2, c1, f1 = (
                np.where(left, c1, new),
                np.where(left, f1, fn),
                np.where(left, new, c2),
                np.where(left, fn, f2),
            )
        cand = np.where(f1 <= f2, c1, c2)
        fc = np.minimum(f1, f2)
        improve = fc < best
        t[improve, j] = cand[improve]
        best = np.where(improve, fc, best)

    cost, coef = _restart_costs(x, y, t, p, scale)
    r = int(np.argmin(cost))
    if not np.isfinite(cost[r]):
        return OracleResult(math.inf, kind="restart")
    neurons = tuple((1.0, -float(t[r, i]), float(coef[r, 2 + i])) for i in range(k) if coef[r, 2 + i] != 0)
    net = ReLUNet1D(neurons, float(coef[r, 1]), float(coef[r, 0]))
    merged = vp_cost(from_network(net), p)
    return OracleResult(min(float(cost[r]), merged), net=net, kind="restart")


# ---------------------------------------------------------------- partition l0


def partition_lp_l0_oracle(d: Dataset1D, cfg: OracleConfig | None = None) -> L0OracleResult:
    """Fewest knots of any continuous piecewise-linear interpolant of ``d``.

    Each gap between consecutive data points holds 0, 1 or 2 knots (three or
    more can always be reduced to two).  A 0-gap keeps both points on one
    affine piece, which must then be collinear; a 2-gap always admits a
    connecting segment; a 1-gap needs the two adjacent piece lines to meet
    inside the closed gap.  A piece holding a single data point has a free
    slope constrained only through its neighbouring 1-gaps, which reduces to
    propagating the admissible sign of each crossing along the chain.
    Every decision is made in exact rational arithmetic; ``k`` is increased
    from 0 until some assignment is feasible.
    """
    cfg = cfg or OracleConfig()
    n = d.n
    if n > 12:
        raise ResourceCapError(f"partition oracle supports N <= 12, got {n}")
    xs = [Fraction(v) for v in d.xs]
    ys = [Fraction(v) for v in d.ys]

    def slope(a, b):
        return (ys[b] - ys[a]) / (xs[b] - xs[a])

    @lru_cache(maxsize=None)
    def collinear(b, e):
        if e - b < 2:
            return True
        s0 = slope(b, b + 1)
        return all(slope(b, q) == s0 for q in range(b + 2, e + 1))

    def line_at(b, e, x):
        return ys[b] + slope(b, e) * (x - xs[b])

    # ``signs``: admissible crossing signs s of the 1-gap entering piece b,
    # already consistent with everything to its left.  Convention: with
    # A_P = (L_P(x_b) - y_b) / dx and A_Q = (y_a - L_Q(x_a)) / dx, a crossing
    # exists iff some s in {+1, -1} has s*A_P <= 0 and s*A_Q >= 0.  For a
    # single-point piece the A values are (sigma - slope(a, b)).
    @lru_cache(maxsize=None)
    def solve_from(b, signs, budget):
        """Labels for gaps from piece start ``b`` onward using at most ``budget`` knots, or None."""
        for e in range(b, n):
            if not collinear(b, e):
                break
            if e > b and signs is not None:
                a = b - 1
                aq = (ys[a] - line_at(b, e, xs[a])) / (xs[b] - xs[a])
                ok = frozenset(sg for sg in signs if sg * aq >= 0)
                if not ok:
                    continue
            zeros = (0,) * (e - b)
            if e == n - 1:
                return zeros
            for label in (1, 2):
                if label > budget:
                    continue
                if label == 2:
                    nxt = None
                elif e > b:
                    ap = (line_at(b, e, xs[e + 1]) - ys[e + 1]) / (xs[e + 1] - xs[e])
                    nxt = frozenset(sg for sg in (1, -1) if sg * ap <= 0)
                else:
                    m2 = slope(e, e + 1)
                    if signs is None:
                        nxt = frozenset((1, -1))
                    else:
                        m1 = slope(e - 1, e)
                        nxt = frozenset(
                            s2 for s2 in (1, -1) if any(_compatible(s1, s2, m1, m2) for s1 in signs)
                        )
                if nxt is not None and not nxt:
                    continue
                rest = solve_from(e + 1, nxt, budget - label)
                if rest is not None:
                    return zeros + (label,) + rest
        return None

    for k in range(0, min(cfg.l0_piece_cap, max(n - 2, 0)) + 1):
        labels = solve_from(0, None, k)
        if labels is not None:
            return L0OracleResult(sum(labels), labels)
    raise ResourceCapError(f"no interpolant with at most {cfg.l0_piece_cap} knots; lower bound {cfg.l0_piece_cap + 1}")


def _compatible(s1, s2, m1, m2) -> bool:
    """Is there a slope sigma with s1*(sigma - m1) >= 0 and s2*(sigma - m2) <= 0?"""
    if s1 == s2:
        return m1 <= m2 if s1 > 0 else m2 <= m1
    return True
