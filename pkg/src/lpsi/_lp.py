"""Small linear-programming toolkit.

* :func:`solve_lp` — dense two-phase simplex over :class:`fractions.Fraction`
  with Bland's anti-cycling rule, so results are exact and the pivot sequence
  is fully deterministic.
* :func:`solve_exact` — Gaussian elimination over Fractions.
* :func:`polytope_vertices` — floating-point vertex enumeration of
  ``{t : H t <= h}`` in a handful of dimensions by solving every square
  subsystem of active constraints.
* :func:`vertices_dd` — incremental (double description) vertex enumeration
  for the same problem, much faster once the dimension exceeds two or three.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = ["LPResult", "solve_lp", "solve_exact", "rank_exact", "polytope_vertices", "vertices_dd"]


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: tuple | None = None
    fun: Fraction | None = None

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _pivot(T: list, r: int, c: int):
    piv = T[r][c]
    row = T[r]
    if piv != 1:
        T[r] = row = [v / piv for v in row]
    for i, other in enumerate(T):
        if i != r:
            f = other[c]
            if f != 0:
                T[i] = [a - f * b for a, b in zip(other, row)]


def _simplex(T: list, basis: list, cost_row: int, allowed: int) -> str:
    """Bland-rule simplex on tableau ``T`` (last column = rhs) minimising row ``cost_row``.

    Only the first ``allowed`` columns may enter the basis.
    """
    m = len(basis)
    while True:
        obj = T[cost_row]
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return "optimal"
        best, leave = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return "unbounded"
        _pivot(T, leave, enter)
        basis[leave] = enter


def solve_lp(
    c: Sequence,
    A_ub: Sequence[Sequence] | None = None,
    b_ub: Sequence | None = None,
    A_eq: Sequence[Sequence] | None = None,
    b_eq: Sequence | None = None,
    bounds: Sequence[tuple] | None = None,
) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` holds ``(lo, hi)`` pairs with ``None`` for an infinite side; the
    default is ``x >= 0``.  All data are converted to Fractions.
    """
    n = len(c)
    c = [_frac(v) for v in c]
    A_ub = [[_frac(v) for v in row] for row in (A_ub or [])]
    b_ub = [_frac(v) for v in (b_ub or [])]
    A_eq = [[_frac(v) for v in row] for row in (A_eq or [])]
    b_eq = [_frac(v) for v in (b_eq or [])]
    bounds = list(bounds) if bounds is not None else [(0, None)] * n

    # x_j = shift_j + sum_k coef * y_k with y >= 0
    cols: list[list[tuple[int, Fraction]]] = []
    shift = []
    extra_ub: list[tuple[int, Fraction]] = []  # (y index, bound) rows y <= bound
    ny = 0
    for lo, hi in bounds:
        lo = None if lo is None else _frac(lo)
        hi = None if hi is None else _frac(hi)
        if lo is not None and hi is not None and hi < lo:
            return LPResult("infeasible")
        if lo is not None:
            shift.append(lo)
            cols.append([(ny, Fraction(1))])
            if hi is not None:
                extra_ub.append((ny, hi - lo))
            ny += 1
        elif hi is not None:
            shift.append(hi)
            cols.append([(ny, Fraction(-1))])
            ny += 1
        else:
            shift.append(Fraction(0))
            cols.append([(ny, Fraction(1)), (ny + 1, Fraction(-1))])
            ny += 2

    def transform(row, rhs):
        out = [Fraction(0)] * ny
        for j, a in enumerate(row):
            if a:
                rhs -= a * shift[j]
                for k, s in cols[j]:
                    out[k] += a * s
        return out, rhs

    rows, rhs, kinds = [], [], []
    for row, b in zip(A_ub, b_ub):
        r, b = transform(row, b)
        rows.append(r), rhs.append(b), kinds.append("ub")
    for k, b in extra_ub:
        r = [Fraction(0)] * ny
        r[k] = Fraction(1)
        rows.append(r), rhs.append(b), kinds.append("ub")
    for row, b in zip(A_eq, b_eq):
        r, b = transform(row, b)
        rows.append(r), rhs.append(b), kinds.append("eq")
    cy = [Fraction(0)] * ny
    const = Fraction(0)
    for j, cj in enumerate(c):
        const += cj * shift[j]
        for k, s in cols[j]:
            cy[k] += cj * s

    m = len(rows)
    n_slack = sum(1 for k in kinds if k == "ub")
    width = ny + n_slack + m  # structural, slack, artificial
    T = []
    si = 0
    for i in range(m):
        line = rows[i] + [Fraction(0)] * (n_slack + m) + [rhs[i]]
        if kinds[i] == "ub":
            line[ny + si] = Fraction(1)
            si += 1
        if line[-1] < 0:
            line = [-v for v in line]
        line[ny + n_slack + i] = Fraction(1)
        T.append(line)
    basis = [ny + n_slack + i for i in range(m)]

    # phase 1
    phase1 = [Fraction(0)] * (width + 1)
    for i in range(m):
        phase1 = [a - b for a, b in zip(phase1, T[i])]
    for i in range(m):
        phase1[ny + n_slack + i] = Fraction(0)
    T.append(phase1)
    _simplex(T, basis, m, ny + n_slack)
    if T[m][-1] != 0:
        return LPResult("infeasible")
    T.pop()
    # drive artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= ny + n_slack:
            j = next((j for j in range(ny + n_slack) if T[i][j] != 0), None)
            if j is None:
                continue  # redundant row
            _pivot(T, i, j)
            basis[i] = j
        keep.append(i)
    T = [T[i][: ny + n_slack] + [T[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    m = len(T)

    # phase 2
    obj = cy + [Fraction(0)] * n_slack + [Fraction(0)]
    for i, b in enumerate(basis):
        f = obj[b]
        if f:
            obj = [a - f * v for a, v in zip(obj, T[i])]
    T.append(obj)
    status = _simplex(T, basis, m, ny + n_slack)
    if status == "unbounded":
        return LPResult("unbounded")
    y = [Fraction(0)] * (ny + n_slack)
    for i, b in enumerate(basis):
        y[b] = T[i][-1]
    x = tuple(shift[j] + sum((s * y[k] for k, s in cols[j]), Fraction(0)) for j in range(n))
    fun = sum((cj * xj for cj, xj in zip(c, x)), Fraction(0))
    return LPResult("optimal", x, fun)


def solve_exact(M: Sequence[Sequence], b: Sequence) -> tuple | None:
    """Solve the square system ``M x = b`` over Fractions; None if singular."""
    n = len(M)
    A = [[_frac(v) for v in row] + [_frac(bi)] for row, bi in zip(M, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [v / p for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * v for a, v in zip(A[r], A[col])]
    return tuple(A[r][n] for r in range(n))


def rank_exact(M: Sequence[Sequence]) -> tuple[int, list]:
    """Rank of ``M`` over Fractions and the indices of a maximal independent row set."""
    rows = [[_frac(v) for v in row] for row in M]
    basis: list[list] = []
    pivots: list[int] = []
    chosen = []
    for idx, row in enumerate(rows):
        r = list(row)
        for bvec, pc in zip(basis, pivots):
            if r[pc] != 0:
                f = r[pc] / bvec[pc]
                r = [a - f * v for a, v in zip(r, bvec)]
        pc = next((j for j, v in enumerate(r) if v != 0), None)
        if pc is not None:
            basis.append(r)
            pivots.append(pc)
            chosen.append(idx)
    return len(basis), chosen


def polytope_vertices(H: np.ndarray, h: np.ndarray, tol: float = 1e-9, max_subsets: int = 2_000_000):
    """Vertices of the bounded polytope ``{t : H t <= h}`` in dimension ``q``.

    Returns ``(V, active)`` where ``V`` is (n_vertices, q) and ``active[k]`` is
    the tuple of constraint rows used to pin vertex ``k``.  Vertices are
    deduplicated; order follows the lexicographic order of row subsets.
    """
    m, q = H.shape
    if q == 0:
        ok = np.all(h >= -tol * (1 + np.abs(h)))
        return (np.zeros((1, 0)), [()]) if ok else (np.zeros((0, 0)), [])
    subsets = np.array(list(itertools.combinations(range(m), q)), dtype=np.int64)
    if len(subsets) > max_subsets:
        raise OverflowError(f"{len(subsets)} active sets exceed the enumeration budget")
    if len(subsets) == 0:
        return np.zeros((0, q)), []
    Ms = H[subsets]  # (S, q, q)
    rs = h[subsets]
    det = np.linalg.det(Ms) if q > 1 else Ms[:, 0, 0]
    scale = np.prod(np.linalg.norm(Ms, axis=2), axis=1)
    good = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
    Ms, rs, subsets = Ms[good], rs[good], subsets[good]
    if len(subsets) == 0:
        return np.zeros((0, q)), []
    T = np.linalg.solve(Ms, rs[..., None])[..., 0]
    slack = T @ H.T - h[None, :]
    feas = np.all(slack <= tol * (1 + np.abs(h))[None, :], axis=1)
    T, subsets = T[feas], subsets[feas]
    verts, active, seen = [], [], set()
    for t, sub in zip(T, subsets):
        key = tuple(np.round(t, 9))
        if key in seen:
            continue
        seen.add(key)
        verts.append(t)
        active.append(tuple(int(v) for v in sub))
    return (np.array(verts) if verts else np.zeros((0, q))), active


def vertices_dd(H: np.ndarray, h: np.ndarray, box: float, tol: float = 1e-9) -> np.ndarray:
    """Vertices of ``{t : H t <= h}`` known to lie inside ``[-box, box]**q``.

    Starts from the vertices of that box and cuts by one constraint at a
    time.  A new vertex is created on every edge crossing the cut; two
    vertices span an edge when their common tight set has at least ``q - 1``
    members and no third vertex is tight on all of them (the combinatorial
    adjacency test, exact also for degenerate polytopes).  Raises
    :class:`ValueError` if a final vertex still touches the artificial box.
    """
    m, q = H.shape
    if q == 0:
        ok = np.all(h >= -tol)
        return np.zeros((1, 0)) if ok else np.zeros((0, 0))
    norms = np.linalg.norm(H, axis=1)
    norms[norms == 0] = 1.0
    Hn, hn = H / norms[:, None], h / norms
    V = np.array(list(itertools.product((-box, box), repeat=q)), dtype=float)
    n_art = 2 * q
    total = n_art + m
    tight = np.zeros((len(V), total), dtype=bool)
    for k in range(q):
        tight[:, 2 * k] = V[:, k] == -box
        tight[:, 2 * k + 1] = V[:, k] == box
    for i in range(m):
        s = V @ Hn[i] - hn[i]
        out = s > tol
        on = np.abs(s) <= tol
        inn = s < -tol
        if not out.any():
            tight[on, n_art + i] = True
            continue
        iu, io = np.nonzero(inn)[0], np.nonzero(out)[0]
        new_v, new_t = [], []
        if len(iu) and len(io):
            Ti = tight.astype(np.int32)
            common = tight[iu][:, None, :] & tight[io][None, :, :]  # (a, b, total)
            cnt = common.sum(axis=2)
            cand = np.argwhere(cnt >= q - 1)
            if len(cand):
                cm = common[cand[:, 0], cand[:, 1]].astype(np.int32)  # (c, total)
                # vertices tight on every common constraint
                cover = (cm @ Ti.T) == cm.sum(axis=1)[:, None]
                cover[np.arange(len(cand)), iu[cand[:, 0]]] = False
                cover[np.arange(len(cand)), io[cand[:, 1]]] = False
                adj = ~cover.any(axis=1)
                for (a, b), ok, c in zip(cand, adj, cm):
                    if not ok:
                        continue
                    u, w = V[iu[a]], V[io[b]]
                    su, sw = s[iu[a]], s[io[b]]
                    lam = su / (su - sw)
                    new_v.append(u + lam * (w - u))
                    tt = c.astype(bool)
                    tt[n_art + i] = True
                    new_t.append(tt)
        keep = ~out
        tight[on, n_art + i] = True
        V = V[keep]
        tight = tight[keep]
        if new_v:
            V = np.vstack([V, np.array(new_v)])
            tight = np.vstack([tight, np.array(new_t)])
        if len(V) == 0:
            return np.zeros((0, q))
    if len(V) and tight[:, :n_art].any():
        raise ValueError("polytope is not contained in the declared box")
    if len(V):
        _, first = np.unique(np.round(V / max(box, 1.0), 10), axis=0, return_index=True)
        V = V[np.sort(first)]
    return V
