"""Sparse interpolation with multivariate single-hidden-layer ReLU networks.

A neuron ``v (w . xbar)_+`` that is active exactly on the data points flagged
by a binary pattern ``s`` contributes ``D X̄ w`` to the fitted values, with
``D = diag(s)``, provided ``(2D - I) X̄ w >= 0``.  Grouping neurons by pattern
and by the sign of ``v`` gives the linear system

    A z = y,   G z >= 0,   ||z||_inf <= R,

with ``z = [nu_1, omega_1, nu_2, omega_2, ...]`` and ``A = [D_j X̄, -D_j X̄]_j``.
Minimising ``sum |z_i|**p`` (or the support size) over this polytope is the
finite-dimensional problem solved here.  Unlike the univariate networks there
is no skip connection: affine parts must be built from neurons.

Exact solving enumerates supports block by block.  A block (pattern, side)
may use a local support ``T`` only if its cone contains a vector whose
entries on ``T`` are all nonzero; combinations of such block options are
visited by increasing total support, and for each one the restricted polytope
is parametrised over the null space of ``A`` and its vertices enumerated.
Vertex minima of a concave objective over every restricted polytope cover
all vertices of every orthant piece of the feasible set, which is where
``sum |z_i|**p`` attains its minimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from ._lp import rank_exact, solve_exact, solve_lp, vertices_dd
from ._parallel import pmap
from .core import InfeasibleError, ResourceCapError, ValidationError

__all__ = [
    "DatasetND",
    "ActivationPattern",
    "ReformulatedProblem",
    "SparseSolution",
    "ReconstructedNet",
    "PStarBound",
    "TRACKED_Q",
    "default_radius",
    "default_pattern_mode",
    "enumerate_patterns",
    "build_reformulation",
    "check_feasible",
    "solve_l0",
    "solve_lp_exact",
    "solve_lp_irl1",
    "reconstruct_network",
    "pstar_formula",
    "pstar_bound",
]

TRACKED_Q = (0.1, 0.5, 0.9, 1.0)
MAX_SUPPORT_CAP = 8
ALL_MODE_MAX_N = 12
REALIZABLE_MAX_N = 16


@dataclass(frozen=True, eq=False)
class DatasetND:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError("X must be an N x d matrix with N >= 1 and d >= 1")
        if y.shape[0] != X.shape[0]:
            raise ValidationError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("data must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def Xbar(self) -> np.ndarray:
        return np.hstack([self.X, np.ones((self.n, 1))])

    def __eq__(self, other):
        return isinstance(other, DatasetND) and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    __hash__ = None


@dataclass(frozen=True)
class ActivationPattern:
    s: tuple

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.s):
            raise ValidationError("patterns are binary vectors")

    @property
    def D(self) -> np.ndarray:
        return np.diag(np.array(self.s, dtype=float))

    @property
    def sign(self) -> np.ndarray:
        return 2 * np.array(self.s, dtype=float) - 1

    def __str__(self):
        return "".join(map(str, self.s))


@dataclass(frozen=True, eq=False)
class ReformulatedProblem:
    dataset: DatasetND
    patterns: tuple
    A: np.ndarray
    G: np.ndarray
    R: float
    block_map: tuple  # coordinate -> (pattern index, "nu" | "omega", input coordinate)
    bias_penalty: bool = True

    @property
    def J(self) -> int:
        return len(self.patterns)

    @property
    def d1(self) -> int:
        return self.dataset.d + 1

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]

    @property
    def counted(self) -> np.ndarray:
        """Mask of coordinates that enter the cost and the support count."""
        mask = np.ones(self.n_vars, dtype=bool)
        if not self.bias_penalty:
            mask[self.d1 - 1 :: self.d1] = False
        return mask

    def index(self, j: int, side: str, coord: int) -> int:
        return (2 * j + (side == "omega")) * self.d1 + coord

    def block(self, b: int) -> slice:
        return slice(b * self.d1, (b + 1) * self.d1)

    def cost(self, z, p: float) -> float:
        z = np.abs(np.asarray(z, dtype=float))[self.counted]
        if p == 0:
            return float(np.count_nonzero(z))
        return math.fsum(float(v) ** p for v in z if v != 0)


@dataclass(frozen=True, eq=False)
class SparseSolution:
    z: np.ndarray
    support: tuple
    l0: int
    lp_costs: dict
    method: str  # "support_enum", "irl1" or "l0_oracle"
    exact: bool = False
    z_exact: tuple | None = None
    caveat: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReconstructedNet:
    """``f(x) = sum_k v_k (w_k . [x, 1])_+`` (no skip connection)."""

    neurons: tuple  # (w: tuple of length d + 1, v: +1 or -1, pattern index, side)
    bias_penalty: bool = True

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        out = np.zeros(X.shape[0])
        for w, v, _, _ in self.neurons:
            out = out + v * np.maximum(Xb @ np.asarray(w, dtype=float), 0.0)
        return out

    def _params(self):
        for w, v, _, _ in self.neurons:
            vw = [v * c for c in w]
            yield vw if self.bias_penalty else vw[:-1]

    def path_norm(self, q: float) -> float:
        if q == 0:
            return float(sum(1 for vw in self._params() for c in vw if c != 0))
        return math.fsum(abs(float(c)) ** q for vw in self._params() for c in vw if c != 0)

    @property
    def active_neurons(self) -> int:
        return len(self.neurons)


@dataclass(frozen=True)
class PStarBound:
    value: float
    r_hat: float
    m0: int
    R: float
    estimate: bool = True
    clipped: bool = False


# ---------------------------------------------------------------- patterns and assembly


def default_radius(ds: DatasetND) -> float:
    return 10.0 * max(1.0, float(np.abs(ds.y).max())) * max(1.0, float(np.abs(ds.Xbar).max()))


def default_pattern_mode(ds: DatasetND) -> str:
    return "all" if ds.n <= 8 else "realizable"


def _exact_matrix(M: np.ndarray) -> list:
    return [[Fraction(float(v)) for v in row] for row in M]


def _realizable(Gj: np.ndarray) -> bool:
    """Does some w satisfy Gj w >= 0 with at least one strictly positive row?"""
    rows = _exact_matrix(Gj)
    n = Gj.shape[1]
    # maximise the total margin over the unit box; positive iff some row can be made positive
    c = [-sum((r[k] for r in rows), Fraction(0)) for k in range(n)]
    res = solve_lp(c, A_ub=[[-v for v in r] for r in rows], b_ub=[0] * len(rows), bounds=[(-1, 1)] * n)
    return res.success and res.fun < 0


def enumerate_patterns(ds: DatasetND, mode: str = "all") -> list:
    """Binary activation patterns in ``itertools.product`` order.

    ``all`` returns every pattern; ``realizable`` keeps those for which some
    affine function is nonnegative exactly where the pattern is 1 (up to ties)
    and not identically zero on the data.
    """
    n = ds.n
    if mode == "all":
        if n > ALL_MODE_MAX_N:
            raise ResourceCapError(f"'all' pattern mode supports N <= {ALL_MODE_MAX_N}, got {n}")
        return [ActivationPattern(s) for s in itertools.product((0, 1), repeat=n)]
    if mode != "realizable":
        raise ValidationError(f"unknown pattern mode {mode!r}")
    if n > REALIZABLE_MAX_N:
        raise ResourceCapError(f"'realizable' pattern mode supports N <= {REALIZABLE_MAX_N}, got {n}")
    Xb = ds.Xbar
    cands = [ActivationPattern(s) for s in itertools.product((0, 1), repeat=n)]
    keep = pmap(lambda pat: _realizable(pat.sign[:, None] * Xb), cands)
    return [pat for pat, k in zip(cands, keep) if k]


def build_reformulation(
    ds: DatasetND,
    patterns: Sequence[ActivationPattern],
    R: float | None = None,
    bias_penalty: bool = True,
) -> ReformulatedProblem:
    patterns = tuple(patterns)
    if not patterns:
        raise ValidationError("need at least one activation pattern")
    if any(len(pat.s) != ds.n for pat in patterns):
        raise ValidationError("pattern length must equal the number of data points")
    R = default_radius(ds) if R is None else float(R)
    if not R > 0:
        raise ValidationError("R must be positive")
    Xb = ds.Xbar
    n, d1, J = ds.n, ds.d + 1, len(patterns)
    A = np.zeros((n, 2 * J * d1))
    G = np.zeros((2 * J * n, 2 * J * d1))
    block_map = []
    for j, pat in enumerate(patterns):
        DX = np.array(pat.s, dtype=float)[:, None] * Xb
        SX = pat.sign[:, None] * Xb
        for side_i, side in enumerate(("nu", "omega")):
            b = 2 * j + side_i
            cols = slice(b * d1, (b + 1) * d1)
            A[:, cols] = DX if side == "nu" else -DX
            G[b * n : (b + 1) * n, cols] = SX
            block_map.extend((j, side, c) for c in range(d1))
    A.setflags(write=False)
    G.setflags(write=False)
    return ReformulatedProblem(ds, patterns, A, G, R, tuple(block_map), bias_penalty)


def check_feasible(problem: ReformulatedProblem, z, eq_tol: float = 1e-8, ineq_tol: float = 1e-10) -> list:
    """Violated feasibility conditions (empty when ``z`` is feasible)."""
    z = np.asarray(z, dtype=float)
    out = []
    r = np.abs(problem.A @ z - problem.dataset.y).max(initial=0.0)
    if r > eq_tol:
        out.append(f"A z = y violated by {r:.3g}")
    g = (problem.G @ z).min(initial=0.0)
    if g < -ineq_tol:
        out.append(f"G z >= 0 violated by {-g:.3g}")
    m = np.abs(z).max(initial=0.0)
    if m > problem.R + ineq_tol:
        out.append(f"|z|_inf = {m:.17g} exceeds R = {problem.R:.17g}")
    return out


# ---------------------------------------------------------------- block options


@dataclass(frozen=True)
class _Option:
    block: int
    local: tuple  # counted coordinates inside the block
    free: tuple  # uncounted coordinates inside the block


def _cone_rows(problem: ReformulatedProblem, b: int) -> np.ndarray:
    n = problem.dataset.n
    return problem.G[b * n : (b + 1) * n, problem.block(b)]


def _admissible(Gb: np.ndarray, T: tuple, free: tuple) -> bool:
    """Can the cone ``Gb w >= 0`` hold a vector supported on ``T + free`` with every ``T`` entry nonzero?"""
    cols = list(T) + list(free)
    rows = [[Fraction(float(v)) for v in Gb[i, cols]] for i in range(Gb.shape[0])]
    rows = [r for r in rows if any(r)]
    A_ub = [[-v for v in r] for r in rows]
    b_ub = [0] * len(rows)
    bounds = [(-1, 1)] * len(cols)
    for k in range(len(T)):
        hit = False
        for sgn in (1, -1):
            c = [0] * len(cols)
            c[k] = -sgn
            res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
            if res.success and res.fun < 0:
                hit = True
                break
        if not hit:
            return False
    return True


def _block_options(problem: ReformulatedProblem) -> list:
    d1 = problem.d1
    counted_local = tuple(c for c in range(d1) if problem.bias_penalty or c < d1 - 1)
    free_local = () if problem.bias_penalty else (d1 - 1,)
    Xb = problem.dataset.Xbar
    subsets = [T for r in range(1, len(counted_local) + 1) for T in itertools.combinations(counted_local, r)]

    def for_pattern(j):
        pat = problem.patterns[j]
        if not any(pat.s):
            return []
        Gb = pat.sign[:, None] * Xb
        active = Xb[np.array(pat.s, dtype=bool)]
        found = []
        for T in subsets:
            if not np.any(active[:, list(T) + list(free_local)]):
                continue
            if _admissible(Gb, T, free_local):
                found.extend(_Option(2 * j + side, T, free_local) for side in (0, 1))
        return found

    per = pmap(for_pattern, range(problem.J))
    # _combinations walks options in block order
    return sorted((o for group in per for o in group), key=lambda o: (o.block, len(o.local), o.local))


def _always_free(problem: ReformulatedProblem) -> list:
    """Uncounted coordinates that may be nonzero without any counted coordinate in their block."""
    if problem.bias_penalty:
        return []
    out = []
    for j, pat in enumerate(problem.patterns):
        if all(pat.s):
            out.extend((2 * j, 2 * j + 1))
    return out


def _combinations(options: list, k: int) -> Iterator[tuple]:
    """Index tuples of options on strictly increasing blocks with total local support ``k``."""
    n = len(options)

    def rec(start, last_block, remaining, acc):
        if remaining == 0:
            yield tuple(acc)
            return
        for i in range(start, n):
            o = options[i]
            if o.block <= last_block or len(o.local) > remaining:
                continue
            acc.append(i)
            yield from rec(i + 1, o.block, remaining - len(o.local), acc)
            acc.pop()

    yield from rec(0, -1, k, [])


# ---------------------------------------------------------------- restricted polytopes


@dataclass
class _Restricted:
    coords: np.ndarray  # global indices of the variables
    counted: np.ndarray  # mask over coords
    A: np.ndarray
    C: np.ndarray  # cone rows: C z >= 0
    blocks: tuple


def _block_piece(problem: ReformulatedProblem, b: int, cols: tuple, cache: dict):
    """Deduplicated nonzero cone rows of block ``b`` restricted to local columns ``cols``."""
    key = (b, cols)
    piece = cache.get(key)
    if piece is None:
        Gb = _cone_rows(problem, b)[:, list(cols)]
        rows = np.unique(Gb, axis=0)
        piece = rows[np.any(rows != 0, axis=1)]
        cache[key] = piece
    return piece


def _restricted(
    problem: ReformulatedProblem, opts: Sequence[_Option], extra_blocks: Sequence[int], cache: dict | None = None
) -> _Restricted:
    d1 = problem.d1
    cache = {} if cache is None else cache
    local: dict[int, tuple[frozenset, frozenset]] = {}
    for o in opts:
        local[o.block] = (frozenset(o.local), frozenset(o.free))
    for b in extra_blocks:
        cnt, fr = local.get(b, (frozenset(), frozenset()))
        local[b] = (cnt, fr | {d1 - 1})
    coords, counted, pieces = [], [], []
    for b in sorted(local):
        cnt, fr = local[b]
        cols = tuple(sorted(cnt | fr))
        pieces.append((len(coords), _block_piece(problem, b, cols, cache)))
        coords.extend(b * d1 + c for c in cols)
        counted.extend(c in cnt for c in cols)
    nv = len(coords)
    C = np.zeros((sum(len(pc) for _, pc in pieces), nv))
    r = 0
    for start, pc in pieces:
        C[r : r + len(pc), start : start + pc.shape[1]] = pc
        r += len(pc)
    coords = np.array(coords, dtype=np.int64)
    return _Restricted(coords, np.array(counted, dtype=bool), problem.A[:, coords], C, tuple(sorted(local)))


def _vertices(problem: ReformulatedProblem, rp: _Restricted):
    """Float vertices of ``{z : A z = y, C z >= 0, |z| <= R}`` with their pinning constraints.

    Returns ``(Z, pins)`` where each pin set lists constraint rows of the
    stacked system ``[C; I; -I]`` that are tight at the vertex.
    """
    y = problem.dataset.y
    R = problem.R
    nv = len(rp.coords)
    if nv == 0:
        ok = np.abs(y).max(initial=0.0) == 0
        return (np.zeros((1, 0)), [()]) if ok else (np.zeros((0, 0)), [])
    U, sv, Vt = np.linalg.svd(rp.A, full_matrices=True)
    tol = 1e-10 * max(1.0, sv.max(initial=0.0))
    rank = int(np.sum(sv > tol))
    z0 = Vt[:rank].T @ ((U[:, :rank].T @ y) / sv[:rank])
    scale = 1.0 + np.abs(y).max(initial=0.0)
    if np.abs(rp.A @ z0 - y).max(initial=0.0) > 1e-9 * scale:
        return np.zeros((0, nv)), []
    Z = Vt[rank:].T
    I = np.eye(nv)
    Cfull = np.vstack([rp.C, I, -I])
    bound = np.concatenate([np.zeros(len(rp.C)), np.full(nv, -R), np.full(nv, -R)])
    # Cfull z >= bound  <=>  -Cfull Z t <= Cfull z0 - bound
    H = -Cfull @ Z
    h = Cfull @ z0 - bound
    Hn = np.linalg.norm(H, axis=1) if Z.shape[1] else np.zeros(len(H))
    keep = Hn > 1e-12
    if Z.shape[1] and not np.all(h[~keep] >= -1e-9 * scale * max(1.0, R)):
        return np.zeros((0, nv)), []
    if Z.shape[1] == 0:
        if np.all(h >= -1e-9 * scale * max(1.0, R)):
            pins = tuple(int(i) for i in np.nonzero(np.abs(h) <= 1e-9 * scale * max(1.0, R))[0])
            return z0[None, :], [pins]
        return np.zeros((0, nv)), []
    idx = np.nonzero(keep)[0]
    box = 2.0 * (math.sqrt(nv) * R + float(np.linalg.norm(z0))) + 1.0
    T = vertices_dd(H[idx], h[idx], box=box, tol=1e-9 * max(1.0, R))
    if len(T) == 0:
        return np.zeros((0, nv)), []
    Zs = z0[None, :] + T @ Z.T
    pins = []
    for zz in Zs:
        slack = Cfull @ zz - bound
        pins.append(tuple(int(i) for i in np.nonzero(np.abs(slack) <= 1e-9 * scale * max(1.0, R))[0]))
    return Zs, pins


def _exact_vertex(problem: ReformulatedProblem, rp: _Restricted, pins: tuple):
    """Recompute a vertex in rationals from its tight constraints and verify feasibility exactly."""
    nv = len(rp.coords)
    Aq = _exact_matrix(rp.A)
    yq = [Fraction(float(v)) for v in problem.dataset.y]
    Rq = Fraction(problem.R)
    Cq = _exact_matrix(rp.C)
    eye = [[Fraction(int(i == j)) for j in range(nv)] for i in range(nv)]
    Cfull = Cq + eye + [[-v for v in row] for row in eye]
    bound = [Fraction(0)] * len(Cq) + [-Rq] * nv + [-Rq] * nv
    rows = Aq + [Cfull[i] for i in pins]
    rhs = yq + [bound[i] for i in pins]
    rank, chosen = rank_exact(rows)
    if rank < nv:
        return None
    # every equality row must be used; pick tight inequalities to complete the basis
    rA, chosenA = rank_exact(Aq)
    sel = list(chosenA)
    for i in chosen:
        if i >= len(Aq) and len(sel) < nv:
            trial = [rows[k] for k in sel] + [rows[i]]
            if rank_exact(trial)[0] == len(trial):
                sel.append(i)
    if len(sel) < nv:
        return None
    zq = solve_exact([rows[k] for k in sel], [rhs[k] for k in sel])
    if zq is None:
        return None
    if any(sum((a * b for a, b in zip(row, zq)), Fraction(0)) != yi for row, yi in zip(Aq, yq)):
        return None
    if any(sum((a * b for a, b in zip(row, zq)), Fraction(0)) < bi for row, bi in zip(Cfull, bound)):
        return None
    return zq


def _exact_feasible(problem: ReformulatedProblem, rp: _Restricted):
    """Exact rational feasibility of a restricted polytope; returns a point or None."""
    nv = len(rp.coords)
    Rq = Fraction(problem.R)
    res = solve_lp(
        [0] * nv,
        A_ub=[[-v for v in row] for row in _exact_matrix(rp.C)] or None,
        b_ub=[0] * len(rp.C) or None,
        A_eq=_exact_matrix(rp.A),
        b_eq=[Fraction(float(v)) for v in problem.dataset.y],
        bounds=[(-Rq, Rq)] * nv,
    )
    return res.x if res.success else None


def _embed(problem: ReformulatedProblem, rp: _Restricted, zloc) -> np.ndarray:
    z = np.zeros(problem.n_vars)
    z[rp.coords] = np.asarray([float(v) for v in zloc])
    return z


def _embed_exact(problem: ReformulatedProblem, rp: _Restricted, zloc) -> tuple:
    z = [Fraction(0)] * problem.n_vars
    for c, v in zip(rp.coords, zloc):
        z[int(c)] = v
    return tuple(z)


def _make_solution(problem, z, method, z_exact=None, caveat=False, diagnostics=None, extra_p=()):
    z = np.where(np.abs(z) > 0, z, 0.0)
    counted = problem.counted
    support = tuple(int(i) for i in np.nonzero((z != 0) & counted)[0])
    costs = {q: problem.cost(z, q) for q in sorted(set(TRACKED_Q) | set(extra_p))}
    z.setflags(write=False)
    return SparseSolution(
        z=z,
        support=support,
        l0=len(support),
        lp_costs=costs,
        method=method,
        exact=z_exact is not None,
        z_exact=z_exact,
        caveat=caveat,
        diagnostics=dict(diagnostics or {}),
    )


def _check_cap(cap: int):
    if not 0 <= cap <= MAX_SUPPORT_CAP:
        raise ValidationError(f"support cap must lie in [0, {MAX_SUPPORT_CAP}], got {cap}")


def _assert_nonempty(problem: ReformulatedProblem):
    n = problem.n_vars
    res = linprog(
        np.zeros(n),
        A_ub=-problem.G,
        b_ub=np.zeros(problem.G.shape[0]),
        A_eq=problem.A,
        b_eq=problem.dataset.y,
        bounds=[(-problem.R, problem.R)] * n,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError(f"no interpolating parameters with |z|_inf <= R = {problem.R:.17g}")


# ---------------------------------------------------------------- exact solvers


def solve_l0(problem: ReformulatedProblem, support_cap: int = MAX_SUPPORT_CAP) -> SparseSolution:
    """Fewest nonzero (counted) coordinates of any feasible ``z``.

    Supports are visited by increasing size; the first restricted polytope that
    is nonempty — confirmed by an exact rational simplex — gives the answer and
    its witness.  Raises :class:`ResourceCapError` (with ``lower_bound``) when
    nothing is feasible up to ``support_cap``.
    """
    _check_cap(support_cap)
    _assert_nonempty(problem)
    options = _block_options(problem)
    cache: dict = {}
    extra = _always_free(problem)
    checked = 0
    for k in range(support_cap + 1):
        for combo in _combinations(options, k):
            checked += 1
            rp = _restricted(problem, [options[i] for i in combo], extra, cache)
            Z, _ = _vertices(problem, rp)
            if len(Z) == 0:
                continue
            zq = _exact_feasible(problem, rp)
            if zq is None:
                continue
            z = _embed(problem, rp, zq)
            diag = {"supports_checked": checked, "options": len(options)}
            return _make_solution(problem, z, "l0_oracle", _embed_exact(problem, rp, zq), diagnostics=diag)
    err = ResourceCapError(f"no feasible support of size <= {support_cap}; lower bound {support_cap + 1}")
    err.lower_bound = support_cap + 1
    raise err


def solve_lp_exact(problem: ReformulatedProblem, p: float, support_cap: int = MAX_SUPPORT_CAP) -> SparseSolution:
    """Global minimum of ``sum |z_i|**p`` over feasible ``z`` with at most ``support_cap`` nonzeros.

    Every vertex of every restricted polytope with support size up to the cap
    is evaluated; the winner (lowest cost, then smaller support, then
    lexicographically smaller support) is recomputed and verified in exact
    arithmetic.  ``caveat`` is set when supports above the cap exist, since the
    unrestricted optimum could then lie beyond the search.  ``diagnostics``
    records ``r_hat``, the smallest nonzero coordinate magnitude met at any
    enumerated vertex.
    """
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    _check_cap(support_cap)
    _assert_nonempty(problem)
    options = _block_options(problem)
    cache: dict = {}
    extra = _always_free(problem)
    combos = [c for k in range(support_cap + 1) for c in _combinations(options, k)]
    zero_tol = 1e-12 * max(1.0, problem.R)

    def evaluate(combo):
        rp = _restricted(problem, [options[i] for i in combo], extra, cache)
        Z, pins = _vertices(problem, rp)
        if len(Z) == 0:
            return None
        mags = np.abs(Z[:, rp.counted])
        mags = np.where(mags > zero_tol, mags, 0.0)
        with np.errstate(divide="ignore"):
            costs = np.where(mags > 0, mags**p, 0.0).sum(axis=1)
        nz = mags[mags > 0]
        r_min = float(nz.min()) if nz.size else math.inf
        order = np.argsort(costs, kind="stable")
        return combo, rp, Z[order], [pins[i] for i in order], costs[order], r_min, len(Z)

    # a feasible empty support costs 0, which no larger support can beat
    results = [r for r in map(evaluate, _combinations(options, 0)) if r is not None]
    if results:
        combos = list(_combinations(options, 0))
    else:
        results = [r for r in pmap(evaluate, combos) if r is not None]
    if not results:
        err = ResourceCapError(f"no feasible support of size <= {support_cap}; lower bound {support_cap + 1}")
        err.lower_bound = support_cap + 1
        raise err
    r_hat = min(r[5] for r in results)
    n_vertices = sum(r[6] for r in results)

    cands = []
    for combo, rp, Z, pins, costs, _, _ in results:
        for zz, pin, c in zip(Z, pins, costs):
            zfull = _embed(problem, rp, zz)
            zfull[np.abs(zfull) <= zero_tol] = 0.0
            supp = tuple(int(i) for i in np.nonzero((zfull != 0) & problem.counted)[0])
            cands.append((float(c), len(supp), supp, rp, pin, zfull))
    cands.sort(key=lambda t: (t[0], t[1], t[2]))
    best_cost = cands[0][0]
    chosen = None
    for c, _, _, rp, pin, zfull in cands:
        if c > best_cost * (1 + 1e-9) + 1e-300 and chosen is not None:
            break
        zq = _exact_vertex(problem, rp, pin)
        if zq is not None:
            chosen = (zfull, _embed_exact(problem, rp, zq))
            break
    if chosen is None:
        zfull, zq = cands[0][5], None
    else:
        zq_full = chosen[1]
        zfull = np.array([float(v) for v in zq_full])
        zq = zq_full
    total_counted = int(problem.counted.sum())
    diag = {
        "r_hat": r_hat,
        "vertices_enumerated": n_vertices,
        "supports_checked": len(combos),
        "support_cap": support_cap,
        "options": len(options),
    }
    certified = support_cap >= total_counted or best_cost == 0
    return _make_solution(problem, zfull, "support_enum", zq, caveat=not certified, diagnostics=diag, extra_p=(p,))


# ---------------------------------------------------------------- IRL1 heuristic


def _weighted_l1(problem: ReformulatedProblem, weights: np.ndarray, cols: np.ndarray | None = None):
    """min sum weights |z| over the feasible set (optionally restricted to ``cols``); HiGHS dual simplex."""
    n = problem.n_vars
    cols = np.arange(n) if cols is None else cols
    A = problem.A[:, cols]
    G = problem.G[:, cols]
    G = G[np.any(G != 0, axis=1)]
    m = len(cols)
    c = np.concatenate([weights[cols], weights[cols]])
    res = linprog(
        c,
        A_ub=np.hstack([-G, G]) if len(G) else None,
        b_ub=np.zeros(len(G)) if len(G) else None,
        A_eq=np.hstack([A, -A]),
        b_eq=problem.dataset.y,
        bounds=[(0, problem.R)] * (2 * m),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        return None
    z = np.zeros(n)
    z[cols] = res.x[:m] - res.x[m:]
    return z


def _polish(problem: ReformulatedProblem, z: np.ndarray, weights: np.ndarray):
    """Exact vertex on the support and sign pattern of ``z`` minimising the weighted l1 cost."""
    tol = 1e-9 * max(1.0, problem.R)
    supp = np.nonzero(np.abs(z) > tol)[0]
    blocks = sorted({int(i) // problem.d1 for i in supp})
    if not problem.bias_penalty:
        for b in _always_free(problem):
            if b not in blocks:
                blocks.append(b)
        blocks.sort()
    # restrict to the support, keeping free biases of touched blocks
    keep = {int(i) for i in supp}
    if not problem.bias_penalty:
        keep |= {b * problem.d1 + problem.d1 - 1 for b in blocks}
    cols = np.array(sorted(keep), dtype=np.int64)
    if len(cols) == 0:
        return None
    Aq = _exact_matrix(problem.A[:, cols])
    yq = [Fraction(float(v)) for v in problem.dataset.y]
    Gs = problem.G[:, cols]
    Gs = Gs[np.any(Gs != 0, axis=1)]
    Gs = np.unique(Gs, axis=0) if len(Gs) else Gs
    Gq = _exact_matrix(Gs)
    Rq = Fraction(problem.R)
    sgn = np.sign(z[cols])
    counted = problem.counted[cols]
    bounds, c = [], []
    for s_i, w_i, cnt in zip(sgn, weights[cols], counted):
        if not cnt or s_i == 0:
            bounds.append((-Rq, Rq))
            c.append(Fraction(0))
        elif s_i > 0:
            bounds.append((0, Rq))
            c.append(Fraction(float(w_i)))
        else:
            bounds.append((-Rq, 0))
            c.append(-Fraction(float(w_i)))
    res = solve_lp(c, A_ub=[[-v for v in r] for r in Gq] or None, b_ub=[0] * len(Gq) or None, A_eq=Aq, b_eq=yq, bounds=bounds)
    if not res.success:
        return None
    zq = [Fraction(0)] * problem.n_vars
    for k, v in zip(cols, res.x):
        zq[int(k)] = v
    return np.array([float(v) for v in zq]), tuple(zq)


def solve_lp_irl1(
    problem: ReformulatedProblem,
    p: float,
    restarts: int = 5,
    seed: int = 0,
    eps_start: float = 1e-1,
    eps_end: float = 1e-6,
    inner: int = 3,
) -> SparseSolution:
    """Iteratively reweighted l1 upper bound for ``min sum |z_i|**p``.

    Each restart solves weighted l1 programs with weights ``(|z_i| + eps)**(p - 1)``
    while ``eps`` decays geometrically from ``eps_start`` to ``eps_end``; the
    first restart starts from uniform weights, later ones from random weights.
    The final iterate is polished to an exact vertex on its own support.  The
    result is a feasible point, never a certificate of optimality.
    """
    if not 0 < p < 1:
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    if restarts < 1:
        raise ValidationError("restarts must be positive")
    rng = np.random.default_rng(seed)
    counted = problem.counted.astype(float)
    n_stage = max(1, int(round(math.log10(eps_start / eps_end))) + 1)
    eps_seq = np.geomspace(eps_start, eps_end, n_stage)
    best = None
    for r in range(restarts):
        w = np.ones(problem.n_vars) if r == 0 else rng.uniform(0.5, 1.5, problem.n_vars)
        w = w * counted
        z = _weighted_l1(problem, w)
        if z is None:
            raise InfeasibleError("weighted l1 program is infeasible")
        for eps in eps_seq:
            for _ in range(inner):
                w = (np.abs(z) + eps) ** (p - 1) * counted
                nz = _weighted_l1(problem, w)
                if nz is None:
                    break
                z = nz
        polished = _polish(problem, z, (np.abs(z) + eps_end) ** (p - 1) * counted)
        if polished is not None:
            zf, zq = polished
        else:
            zf, zq = z, None
        if check_feasible(problem, zf):
            continue
        cost = problem.cost(zf, p)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, zf, zq, r)
    if best is None:
        raise InfeasibleError("no restart produced a feasible point")
    return _make_solution(problem, best[1], "irl1", best[2], diagnostics={"restart": best[3]}, extra_p=(p,))


# ---------------------------------------------------------------- reconstruction and bounds


def reconstruct_network(sol: SparseSolution, problem: ReformulatedProblem) -> ReconstructedNet:
    """One neuron per nonzero block: ``w = nu_j`` with ``v = +1`` and ``w = omega_j`` with ``v = -1``."""
    z = np.asarray(sol.z, dtype=float)
    bad = check_feasible(problem, z)
    if bad:
        raise InfeasibleError("cannot reconstruct an infeasible solution: " + "; ".join(bad))
    neurons = []
    for b in range(2 * problem.J):
        w = z[problem.block(b)]
        if np.any(w != 0):
            j, side = divmod(b, 2)
            neurons.append((tuple(float(v) for v in w), 1 if side == 0 else -1, j, "nu" if side == 0 else "omega"))
    net = ReconstructedNet(tuple(neurons), problem.bias_penalty)
    resid = np.abs(net(problem.dataset.X) - problem.dataset.y).max(initial=0.0)
    if resid > 1e-8:
        raise InfeasibleError(f"reconstructed network misses the data by {resid:.3g}")
    return net


def pstar_formula(m0: int, R: float, r_hat: float) -> float:
    """``(log(m0 + 1) - log(m0)) / (log R - log r_hat)``, clipped to 1."""
    if m0 < 1:
        raise ValidationError("m0 must be at least 1")
    if not 0 < r_hat <= R:
        raise ValidationError("need 0 < r_hat <= R")
    if r_hat >= R:
        return 1.0
    val = (math.log(m0 + 1) - math.log(m0)) / (math.log(R) - math.log(r_hat))
    return min(1.0, val)


def pstar_bound(problem: ReformulatedProblem, candidates: Iterable[SparseSolution]) -> PStarBound:
    """Estimated threshold below which l^p minimisers are sparsest.

    ``m0`` is the smallest support among ``candidates`` (use a ``solve_l0``
    result to make it exact) and ``r_hat`` the smallest nonzero magnitude seen
    in their coordinates and in any vertex enumeration they record.  Because
    ``r_hat`` only over-estimates the true smallest vertex coordinate, the value
    is an estimate rather than a certified threshold.
    """
    cands = list(candidates)
    if not cands:
        raise ValidationError("need at least one candidate solution")
    mags = []
    for sol in cands:
        z = np.abs(np.asarray(sol.z, dtype=float))[problem.counted]
        mags.extend(z[z > 0].tolist())
        r = sol.diagnostics.get("r_hat")
        if r is not None and math.isfinite(r):
            mags.append(float(r))
    if not mags:
        raise ValidationError("no nonzero coordinates: the bound is undefined")
    m0 = min(sol.l0 for sol in cands)
    if m0 == 0:
        raise ValidationError("the zero solution is optimal for every p; the bound is undefined")
    r_hat = min(mags)
    R = problem.R
    raw = 1.0 if r_hat >= R else (math.log(m0 + 1) - math.log(m0)) / (math.log(R) - math.log(r_hat))
    return PStarBound(min(1.0, raw), r_hat, m0, R, estimate=True, clipped=raw > 1.0)
