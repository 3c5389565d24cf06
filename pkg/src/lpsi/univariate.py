"""Exact minimum p-variation interpolation of univariate data.

The interpolant is fixed everywhere except on runs of three or more
consecutive data points sharing a nonzero discrete curvature.  On such a run
the free slopes ``u_j`` are convex combinations of neighbouring secant slopes,
the cost is strictly concave in the combination weights, and the optimum sits
at a vertex of ``{0, 1}^(m-1)``.  Vertices are enumerated exhaustively.

Point indices are 0-based throughout: ``slopes[k]`` joins points ``k`` and
``k + 1`` and ``curvatures[k - 1]`` belongs to interior point ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._parallel import pmap
from .core import (
    COST_RTOL,
    CPWLFunction,
    Dataset1D,
    PathNormReport,
    ResourceCapError,
    StructuralError,
    ValidationError,
    is_exact,
    report,
    vp_cost,
)

__all__ = [
    "SlopeProfile",
    "CurvatureRun",
    "Region",
    "RunDecomposition",
    "Skeleton",
    "VertexChoice",
    "CostCurve",
    "RunSolution",
    "SolveResult",
    "RunThreshold",
    "PStarResult",
    "L0Result",
    "Check",
    "VerificationReport",
    "MAX_FREE_SLOPES",
    "slope_profile",
    "decompose_runs",
    "skeleton",
    "run_knots",
    "run_cost_curve",
    "iter_vertices",
    "solve_run",
    "solve",
    "min_l0",
    "compute_pstar",
    "verify",
]

MAX_FREE_SLOPES = 30
PSTAR_GRID = 512
PSTAR_TOL = 1e-10
P_LIMIT = 1e-6
_CHUNK = 1 << 16


def _sign(v) -> int:
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class SlopeProfile:
    slopes: tuple
    curvatures: tuple

    @property
    def n_points(self) -> int:
        return len(self.slopes) + 1


@dataclass(frozen=True)
class CurvatureRun:
    """Maximal block of points ``start .. start + m`` sharing curvature ``sign``."""

    start: int
    m: int
    sign: int

    @property
    def end(self) -> int:
        return self.start + self.m

    @property
    def n_free(self) -> int:
        return max(self.m - 1, 0)


@dataclass(frozen=True)
class Region:
    kind: str  # "line" or "run"
    lo: int
    hi: int


@dataclass(frozen=True)
class RunDecomposition:
    runs: tuple
    isolated: tuple
    regions: tuple

    @property
    def free_runs(self) -> tuple:
        return tuple(r for r in self.runs if r.m >= 2)


@dataclass(frozen=True)
class Skeleton:
    """Forced structure of every optimal interpolant."""

    data: Dataset1D
    profile: SlopeProfile
    decomposition: RunDecomposition
    fixed_knots: tuple
    pending: tuple

    @property
    def partial(self) -> CPWLFunction:
        """The forced knots alone, on top of the leftmost data line."""
        return _assemble(self.data, self.profile, self.fixed_knots)


@dataclass(frozen=True)
class VertexChoice:
    run: CurvatureRun
    alpha: tuple

    def slopes(self, sp: SlopeProfile) -> tuple:
        i = self.run.start
        s = sp.slopes
        return tuple((1 - a) * s[i + j - 1] + a * s[i + j] for j, a in enumerate(self.alpha, start=1))


@dataclass(frozen=True)
class CostCurve:
    """``C(p) = sum_i b_i**p`` over positive magnitudes ``b_i``."""

    magnitudes: tuple

    def __post_init__(self):
        if any(not b > 0 for b in self.magnitudes):
            raise ValidationError("cost curve magnitudes must be positive")

    @property
    def n_knots(self) -> int:
        return len(self.magnitudes)

    def __call__(self, p):
        b = np.asarray(self.magnitudes, dtype=float)
        if np.ndim(p) == 0:
            return math.fsum(float(v) ** p for v in self.magnitudes)
        p = np.asarray(p, dtype=float)
        return (b[:, None] ** p[None, :]).sum(axis=0)


@dataclass(frozen=True)
class RunSolution:
    choice: VertexChoice
    cost: float
    n_knots: int
    ties: tuple = ()

    @property
    def run(self) -> CurvatureRun:
        return self.choice.run


@dataclass(frozen=True)
class SolveResult:
    f: CPWLFunction
    runs: tuple
    report: PathNormReport
    unique: bool
    ties: tuple = ()


@dataclass(frozen=True)
class RunThreshold:
    run: CurvatureRun
    winner: tuple
    threshold: float
    rival: tuple | None
    permanent_ties: tuple = ()


@dataclass(frozen=True)
class PStarResult:
    value: float
    runs: tuple = ()

    @property
    def crossings(self) -> list:
        return [(r.run, r.winner, r.rival, r.threshold) for r in self.runs if r.rival is not None]


@dataclass(frozen=True)
class L0Result:
    count: int
    witness: CPWLFunction
    per_run: tuple = ()


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


# ---------------------------------------------------------------- structure


def slope_profile(d: Dataset1D) -> SlopeProfile:
    xs, ys = d.xs, d.ys
    slopes = tuple((ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]) for k in range(d.n - 1))
    curv = tuple(_sign(slopes[k] - slopes[k - 1]) for k in range(1, len(slopes)))
    return SlopeProfile(slopes, curv)


def decompose_runs(sp: SlopeProfile) -> RunDecomposition:
    """Group interior points into maximal blocks of equal nonzero curvature.

    Blocks of two or more points become :class:`CurvatureRun` (``m >= 1``);
    single points are ``isolated`` and force a knot at the data point itself.
    ``regions`` partitions ``[x_0, x_{N-1}]`` into stretches that follow one
    secant line and run spans.
    """
    eps = sp.curvatures
    n_pts = sp.n_points
    runs: list[CurvatureRun] = []
    isolated: list[int] = []
    k = 1
    while k <= n_pts - 2:
        e = eps[k - 1]
        if e == 0:
            k += 1
            continue
        j = k
        while j + 1 <= n_pts - 2 and eps[j] == e:
            j += 1
        if j == k:
            isolated.append(k)
        else:
            runs.append(CurvatureRun(k, j - k, e))
        k = j + 1

    in_run = [False] * (n_pts - 1)
    for r in runs:
        for g in range(r.start, r.end):
            in_run[g] = True
    regions: list[Region] = []
    g = 0
    while g < n_pts - 1:
        if in_run[g]:
            r = next(r for r in runs if r.start == g)
            regions.append(Region("run", r.start, r.end))
            g = r.end
            continue
        lo = g
        while g + 1 < n_pts - 1 and not in_run[g + 1] and eps[g] == 0:
            g += 1
        regions.append(Region("line", lo, g + 1))
        g += 1
    return RunDecomposition(tuple(runs), tuple(isolated), tuple(regions))


def _intersect(xa, ya, sa, xb, yb, sb):
    """Abscissa where the line through (xa, ya) with slope sa meets the one through (xb, yb) with slope sb."""
    return (yb - ya + sa * xa - sb * xb) / (sa - sb)


def run_knots(d: Dataset1D, sp: SlopeProfile, run: CurvatureRun, alpha: Sequence[int]) -> list:
    """Knots ``(u, c)`` realised on ``run`` by the vertex ``alpha``.

    The segment with slope ``u_j`` passes through point ``start + j``; knots are
    intersections of consecutive distinct segments.
    """
    i, m = run.start, run.m
    if len(alpha) != run.n_free:
        raise ValidationError(f"alpha must have length {run.n_free}")
    if any(a not in (0, 1) for a in alpha):
        raise ValidationError("alpha must be a binary vector")
    xs, ys, s = d.xs, d.ys, sp.slopes
    idx = [i - 1] + [i + j - 1 + a for j, a in enumerate(alpha, start=1)] + [i + m]
    anchor = [i] + [i + j for j in range(1, m)] + [i + m]
    knots = []
    for j in range(1, len(idx)):
        ta, tb = idx[j - 1], idx[j]
        if ta == tb:
            continue
        pa, pb = anchor[j - 1], anchor[j]
        if tb == ta + 1:
            # adjacent secants meet exactly at their shared data point
            u = xs[tb]
        else:
            u = _intersect(xs[pa], ys[pa], s[ta], xs[pb], ys[pb], s[tb])
        knots.append((u, s[tb] - s[ta]))
    return knots


def skeleton(d: Dataset1D) -> Skeleton:
    sp = slope_profile(d)
    dec = decompose_runs(sp)
    s = sp.slopes
    fixed = [(d.xs[k], s[k] - s[k - 1]) for k in dec.isolated]
    for r in dec.runs:
        if r.m == 1:
            fixed.extend(run_knots(d, sp, r, ()))
    for u, _ in fixed:
        if not d.xs[0] < u < d.xs[-1]:
            raise StructuralError(f"forced knot {u} outside the data range")
    return Skeleton(d, sp, dec, tuple(sorted(fixed)), dec.free_runs)


def _assemble(d: Dataset1D, sp: SlopeProfile, knots) -> CPWLFunction:
    s0 = sp.slopes[0]
    return CPWLFunction.canonical(d.xs[0] - 1, d.ys[0] - s0, s0, knots)


# ---------------------------------------------------------------- vertices


def _absdiff_table(sp: SlopeProfile, run: CurvatureRun) -> np.ndarray:
    lo, hi = run.start - 1, run.end
    s = sp.slopes
    size = len(s)
    table = np.zeros((size, size))
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            table[a, b] = abs(float(s[a] - s[b]))
    return table


def _check_cap(run: CurvatureRun):
    if run.n_free > MAX_FREE_SLOPES:
        raise ResourceCapError(
            f"run at point {run.start} has {run.n_free} free slopes (cap {MAX_FREE_SLOPES})"
        )


def iter_vertices(run: CurvatureRun, sp: SlopeProfile, chunk: int = _CHUNK) -> Iterator[tuple]:
    """Yield ``(indices, bits, magnitudes, knot_counts)`` over all vertices of a run.

    Vertex ``k`` has ``alpha_1`` as its most significant bit, so integer order
    is lexicographic order of ``alpha``.
    """
    _check_cap(run)
    n = run.n_free
    i, m = run.start, run.m
    table = _absdiff_table(sp, run)
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int64)
        t = np.empty((len(idx), m + 1), dtype=np.int64)
        t[:, 0] = i - 1
        t[:, 1:m] = i + np.arange(m - 1)[None, :] + bits
        t[:, m] = i + m
        mags = table[t[:, 1:], t[:, :-1]]
        counts = (t[:, 1:] != t[:, :-1]).sum(axis=1)
        yield idx, bits, mags, counts


def _costs(mags: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(mags > 0, mags**p, 0.0).sum(axis=1)


def run_cost_curve(run: CurvatureRun, alpha: Sequence, sp: SlopeProfile) -> CostCurve:
    """Nonzero slope-change magnitudes across ``run`` for weights ``alpha``.

    Binary ``alpha`` is evaluated exactly (zero changes are decided
    combinatorially); fractional ``alpha`` falls back to floating point.
    """
    if run.m < 2:
        raise ValidationError("cost curves are defined for runs with m >= 2")
    if len(alpha) != run.n_free:
        raise ValidationError(f"alpha must have length {run.n_free}")
    i, m = run.start, run.m
    s = sp.slopes
    if all(a in (0, 1) for a in alpha):
        us = [s[i + j - 1 + int(a)] for j, a in enumerate(alpha, start=1)]
    else:
        us = [(1 - float(a)) * float(s[i + j - 1]) + float(a) * float(s[i + j]) for j, a in enumerate(alpha, start=1)]
    chain = [s[i - 1]] + us + [s[i + m]]
    mags = tuple(abs(float(b - a)) for a, b in zip(chain, chain[1:]) if b != a)
    return CostCurve(mags)


def _bits_tuple(bits_row) -> tuple:
    return tuple(int(b) for b in bits_row)


def solve_run(run: CurvatureRun, sp: SlopeProfile, p: float) -> RunSolution:
    """Minimise the run cost over all ``2**(m-1)`` vertices.

    Costs within relative ``COST_RTOL`` of the minimum are ties; the
    lexicographically smallest ``alpha`` wins and the rest are listed.
    """
    if run.m < 2:
        raise ValidationError("solve_run needs a run with m >= 2")
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    best = math.inf
    for _, _, mags, _ in iter_vertices(run, sp):
        best = min(best, float(_costs(mags, p).min()))
    limit = best * (1 + COST_RTOL)
    tied: list[tuple] = []
    counts: list[int] = []
    for _, bits, mags, cnt in iter_vertices(run, sp):
        hit = np.nonzero(_costs(mags, p) <= limit)[0]
        tied.extend(_bits_tuple(bits[h]) for h in hit)
        counts.extend(int(cnt[h]) for h in hit)
    winner = tied[0]
    return RunSolution(VertexChoice(run, winner), best, counts[0], tuple(tied[1:]))


# ---------------------------------------------------------------- solvers


def _check_open_p(p):
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")


def solve(d: Dataset1D, p: float) -> SolveResult:
    """Minimum ``V_p`` interpolant of ``d`` for ``0 < p < 1``."""
    _check_open_p(p)
    sk = skeleton(d)
    sols = pmap(lambda r: solve_run(r, sk.profile, p), sk.pending)
    knots = list(sk.fixed_knots)
    for sol in sols:
        knots.extend(run_knots(d, sk.profile, sol.run, sol.choice.alpha))
    f = _assemble(d, sk.profile, knots)
    ties = tuple((sol.run, t) for sol in sols for t in sol.ties)
    return SolveResult(f, tuple(sols), report(f, p), unique=not ties, ties=ties)


def min_l0(d: Dataset1D) -> L0Result:
    """Fewest knots of any interpolant, with a witness.

    Each free run contributes the smallest vertex knot count, which must equal
    ``ceil((m + 1) / 2)``.
    """
    sk = skeleton(d)
    knots = list(sk.fixed_knots)
    per_run = []
    for run in sk.pending:
        best_cnt, best_bits = None, None
        for _, bits, _, cnt in iter_vertices(run, sk.profile):
            k = int(np.argmin(cnt))
            if best_cnt is None or cnt[k] < best_cnt:
                best_cnt, best_bits = int(cnt[k]), _bits_tuple(bits[k])
        expected = -(-(run.m + 1) // 2)
        if best_cnt != expected:
            raise StructuralError(f"run at {run.start}: sparsest vertex has {best_cnt} knots, expected {expected}")
        per_run.append((run, best_bits, best_cnt))
        knots.extend(run_knots(d, sk.profile, run, best_bits))
    f = _assemble(d, sk.profile, knots)
    return L0Result(len(f.knots), f, tuple(per_run))


def _diff_fn(mags_v: np.ndarray, mags_w: np.ndarray):
    bv = [float(b) for b in mags_v if b > 0]
    bw = [float(b) for b in mags_w if b > 0]

    def h(p: float) -> float:
        return math.fsum(b**p for b in bv) - math.fsum(b**p for b in bw)

    return h


def _run_threshold(run: CurvatureRun, sp: SlopeProfile, grid: int, tol: float) -> RunThreshold:
    chunks = list(iter_vertices(run, sp))
    bits = np.concatenate([c[1] for c in chunks])
    mags = np.concatenate([c[2] for c in chunks])
    counts = np.concatenate([c[3] for c in chunks])

    cand = np.nonzero(counts == counts.min())[0]
    c0 = _costs(mags[cand], P_LIMIT)
    near = cand[c0 <= c0.min() * (1 + COST_RTOL)]
    w = int(near[0])
    winner = _bits_tuple(bits[w])

    ps = np.concatenate([[P_LIMIT], np.arange(1, grid) / grid])
    sorted_w = np.sort(mags[w])
    best_p, rival = 1.0, None
    permanent = []
    cost_w = np.array([_costs(mags[w : w + 1], q)[0] for q in ps])
    for v in range(len(mags)):
        if v == w:
            continue
        if np.allclose(np.sort(mags[v]), sorted_w, rtol=COST_RTOL, atol=0.0):
            permanent.append(_bits_tuple(bits[v]))
            continue
        with np.errstate(divide="ignore"):
            cv = np.where(mags[v][:, None] > 0, mags[v][:, None] ** ps[None, :], 0.0).sum(axis=0)
        diff = cv - cost_w
        below = np.nonzero(diff < -COST_RTOL * cost_w)[0]
        if len(below) == 0:
            continue
        k = int(below[0])
        if k == 0:
            root = P_LIMIT
        else:
            h = _diff_fn(mags[v], mags[w])
            lo, hi = float(ps[k - 1]), float(ps[k])
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if h(mid) < 0:
                    hi = mid
                else:
                    lo = mid
            root = 0.5 * (lo + hi)
        if root < best_p:
            best_p, rival = root, _bits_tuple(bits[v])
    return RunThreshold(run, winner, best_p, rival, tuple(permanent))


def compute_pstar(d: Dataset1D, grid: int = PSTAR_GRID, tol: float = PSTAR_TOL) -> PStarResult:
    """Threshold below which the minimum ``V_p`` interpolant is also sparsest.

    Per run, the ``p -> 0+`` winner (fewest knots, then smallest cost at
    ``p = 1e-6``, then lexicographic) is compared against every other vertex:
    the first sign change of the cost difference on a ``grid``-point scan is
    refined by bisection to width ``tol``.  The result is the minimum over runs,
    or 1 when no rival ever undercuts a winner.
    """
    if grid < 2:
        raise ValidationError("grid must have at least two points")
    sk = skeleton(d)
    if not sk.pending:
        return PStarResult(1.0, ())
    per_run = tuple(pmap(lambda r: _run_threshold(r, sk.profile, grid, tol), sk.pending))
    return PStarResult(min(r.threshold for r in per_run), per_run)


# ---------------------------------------------------------------- verification


def verify(
    d: Dataset1D,
    f: CPWLFunction,
    p: float | None = None,
    reference_cost: float | None = None,
) -> VerificationReport:
    """Check an interpolant against the properties every optimum must have.

    Deliberately recomputes slopes and curvature from the raw data instead of
    reusing the solver's helpers.
    """
    xs, ys = d.xs, d.ys
    n = d.n
    exact = d.exact and all(is_exact(u, c) for u, c in f.knots) and is_exact(f.anchor_x, f.anchor_y, f.base_slope)
    checks: list[Check] = []

    res = [f(x) - y for x, y in zip(xs, ys)]
    if exact:
        ok = all(r == 0 for r in res)
        worst = max(abs(float(r)) for r in res)
    else:
        worst = max(abs(float(r)) / (1 + abs(float(y))) for r, y in zip(res, ys))
        ok = worst <= 1e-10
    checks.append(Check("interpolation", ok, f"max residual {worst:.3g}"))

    k = len(f.knots)
    checks.append(Check("knot_count", k <= max(n - 2, 0), f"{k} knots for N={n}"))

    if n >= 3:
        lo, hi = xs[1], xs[-2]
        bad = [u for u in f.locations if not lo <= u <= hi]
    else:
        bad = list(f.locations)
    checks.append(Check("knot_range", not bad, f"outside [x_2, x_(N-1)]: {[float(u) for u in bad]}"))

    sec = [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(n - 1)]
    target = sum(abs(sec[i + 1] - sec[i]) for i in range(n - 2))
    l1 = sum(abs(c) for c in f.changes)
    if exact:
        ok = l1 == target
    else:
        ok = abs(float(l1) - float(target)) <= 1e-9 * max(1.0, abs(float(target)))
    checks.append(Check("l1_cost", ok, f"V_1 = {float(l1):.17g}, expected {float(target):.17g}"))

    lip = max(abs(float(s)) for s in f.piece_slopes())
    bound = max(abs(float(s)) for s in sec)
    checks.append(Check("lipschitz", lip <= bound + 1e-12 * max(1.0, bound), f"{lip:.17g} <= {bound:.17g}"))

    curv = [0] + [(sec[i] > sec[i - 1]) - (sec[i] < sec[i - 1]) for i in range(1, n - 1)] + [0]
    forced_bad = []
    for g in range(n - 1):
        shared = curv[g] != 0 and curv[g] == curv[g + 1]
        if not shared and any(xs[g] < u < xs[g + 1] for u in f.locations):
            forced_bad.append(f"knot inside ({float(xs[g])}, {float(xs[g + 1])})")
    for i in range(1, n - 1):
        if curv[i] == 0 and xs[i] in f.locations:
            forced_bad.append(f"knot at collinear point {float(xs[i])}")
    checks.append(Check("forced_linear", not forced_bad, "; ".join(forced_bad)))

    bracket_bad = []
    i = 1
    while i <= n - 2:
        e = curv[i]
        j = i
        while e != 0 and j + 1 <= n - 2 and curv[j + 1] == e:
            j += 1
        if e != 0 and j - i >= 1:
            for u, c in f.knots:
                if xs[i] <= u <= xs[j] and (c > 0) - (c < 0) != e:
                    bracket_bad.append(f"change {float(c)} at {float(u)} against curvature {e}")
            for t in range(i + 1, j):
                left = f.base_slope + sum((c for u, c in f.knots if u < xs[t]), 0 * f.base_slope)
                right = left + sum((c for u, c in f.knots if u == xs[t]), 0 * f.base_slope)
                a, b = sorted((sec[t - 1], sec[t]))
                if not exact:
                    scale = abs(float(f.base_slope)) + sum(abs(float(c)) for u, c in f.knots if u <= xs[t])
                    slack = 1e-12 * max(1.0, abs(float(a)), abs(float(b)), scale)
                    a, b = a - slack, b + slack
                if not (a <= left <= b or a <= right <= b):
                    bracket_bad.append(f"slope through point {t} not in [{float(a)}, {float(b)}]")
        i = j + 1
    checks.append(Check("slope_bracketing", not bracket_bad, "; ".join(bracket_bad)))

    if p is not None and reference_cost is not None:
        cost = vp_cost(f, p)
        ok = cost <= reference_cost * (1 + 1e-9) + 1e-12
        checks.append(Check("optimality", ok, f"V_p = {cost:.17g}, reference {reference_cost:.17g}"))
    return VerificationReport(tuple(checks))
