"""Domain types, exact evaluation and p-variation costs for univariate CPWL functions.

Values may be :class:`fractions.Fraction` (exact mode) or ``float``.  All
structural arithmetic (knot placement, slope changes) stays in whatever number
type the inputs carry; costs ``|c|**p`` are always computed in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LpsiError",
    "ValidationError",
    "ResourceCapError",
    "InfeasibleError",
    "StructuralError",
    "Dataset1D",
    "CPWLFunction",
    "ReLUNet1D",
    "PathNormReport",
    "to_exact",
    "is_exact",
    "eval_cpwl",
    "eval_net",
    "vp_cost",
    "to_network",
    "from_network",
    "report",
]

FLOAT_ELISION = 1e-14
COST_RTOL = 1e-12


class LpsiError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(LpsiError, ValueError):
    """Invalid input data or arguments."""


class ResourceCapError(LpsiError):
    """A declared combinatorial cap would be exceeded."""


class InfeasibleError(LpsiError):
    """A constraint system has no solution."""


class StructuralError(LpsiError):
    """An internal structural invariant was violated."""


def to_exact(value) -> Fraction:
    """Convert a number or decimal string to an exact rational.

    Floats go through ``repr`` so that ``0.05`` becomes ``1/20`` rather than
    the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(repr(float(value)))


def is_exact(*values) -> bool:
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)


def _pos(t):
    return t if t > 0 else 0 * t


@dataclass(frozen=True)
class Dataset1D:
    """Labeled points ``(x_i, y_i)`` with strictly increasing abscissae."""

    xs: tuple
    ys: tuple
    input_order: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ValidationError("xs and ys differ in length")
        if len(self.xs) < 2:
            raise ValidationError("need at least two points")
        for i in range(len(self.xs) - 1):
            if not self.xs[i] < self.xs[i + 1]:
                if self.xs[i] == self.xs[i + 1]:
                    raise ValidationError(f"duplicate abscissa at rows {i} and {i + 1}: {self.xs[i]}")
                raise ValidationError("abscissae must be strictly increasing")

    @classmethod
    def from_points(cls, points: Iterable[Sequence], exact: bool = False, sort: bool = True) -> "Dataset1D":
        pts = [(p[0], p[1]) for p in points]
        if exact:
            pts = [(to_exact(x), to_exact(y)) for x, y in pts]
        else:
            pts = [(float(x), float(y)) for x, y in pts]
        order = list(range(len(pts)))
        if sort:
            order.sort(key=lambda i: pts[i][0])
            for a, b in zip(order, order[1:]):
                if pts[a][0] == pts[b][0]:
                    raise ValidationError(f"duplicate abscissa at rows {min(a, b)} and {max(a, b)}: {pts[a][0]}")
        xs = tuple(pts[i][0] for i in order)
        ys = tuple(pts[i][1] for i in order)
        return cls(xs, ys, tuple(order) if order != sorted(order) else None)

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def exact(self) -> bool:
        return is_exact(*self.xs, *self.ys)

    def as_float(self) -> "Dataset1D":
        return Dataset1D(tuple(float(x) for x in self.xs), tuple(float(y) for y in self.ys))

    def as_exact(self) -> "Dataset1D":
        return Dataset1D(tuple(to_exact(x) for x in self.xs), tuple(to_exact(y) for y in self.ys))


@dataclass(frozen=True)
class CPWLFunction:
    """Continuous piecewise-linear function.

    ``f(x) = anchor_y + base_slope * (x - anchor_x) + sum_k c_k * (x - u_k)_+``
    with ``anchor_x`` at or left of every knot ``u_k``.
    """

    anchor_x: Real
    anchor_y: Real
    base_slope: Real
    knots: tuple = ()

    def __post_init__(self):
        us = [u for u, _ in self.knots]
        if any(not a < b for a, b in zip(us, us[1:])):
            raise ValidationError("knot locations must be strictly increasing")
        if any(c == 0 for _, c in self.knots):
            raise ValidationError("zero slope changes must be elided")
        if us and self.anchor_x > us[0]:
            raise ValidationError("anchor must lie at or left of the first knot")

    @classmethod
    def canonical(cls, anchor_x, anchor_y, base_slope, knots: Iterable[tuple]) -> "CPWLFunction":
        """Merge coincident knots, drop zero changes and re-anchor if needed."""
        merged: dict = {}
        for u, c in knots:
            merged[u] = merged.get(u, 0) + c
        items = sorted(merged.items())
        exact = all(is_exact(u, c) for u, c in items)
        if exact:
            kept = [(u, c) for u, c in items if c != 0]
        else:
            scale = max((abs(float(c)) for _, c in items), default=0.0)
            kept = [(u, c) for u, c in items if abs(float(c)) > FLOAT_ELISION * scale]
        if kept and anchor_x > kept[0][0]:
            new_x = kept[0][0] - 1
            probe = cls(new_x, 0 * anchor_y, base_slope, tuple(kept))
            # shift so that the original anchor value is reproduced
            anchor_y = anchor_y - probe(anchor_x)
            anchor_x = new_x
        return cls(anchor_x, anchor_y, base_slope, tuple(kept))

    @property
    def locations(self) -> tuple:
        return tuple(u for u, _ in self.knots)

    @property
    def changes(self) -> tuple:
        return tuple(c for _, c in self.knots)

    def piece_slopes(self) -> list:
        slopes = [self.base_slope]
        for _, c in self.knots:
            slopes.append(slopes[-1] + c)
        return slopes

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            x = x.astype(float)
            out = float(self.anchor_y) + float(self.base_slope) * (x - float(self.anchor_x))
            for u, c in self.knots:
                out = out + float(c) * np.maximum(x - float(u), 0.0)
            return out
        return eval_cpwl(self, x)

    def with_anchor(self, x) -> "CPWLFunction":
        return CPWLFunction.canonical(x, self(x), self.base_slope, self.knots)

    def same_function(self, other: "CPWLFunction", tol: float = 0.0) -> bool:
        """Equality of represented functions, ignoring the anchor choice."""
        if len(self.knots) != len(other.knots):
            return False
        probe = self.anchor_x
        pairs = [(self.base_slope, other.base_slope), (self(probe), other(probe))]
        for (u1, c1), (u2, c2) in zip(self.knots, other.knots):
            pairs += [(u1, u2), (c1, c2)]
        if tol == 0.0:
            return all(a == b for a, b in pairs)
        return all(abs(float(a) - float(b)) <= tol * (1 + abs(float(a))) for a, b in pairs)


@dataclass(frozen=True)
class ReLUNet1D:
    """``f(x) = sum_k v_k (w_k x + b_k)_+ + skip_a x + skip_c``."""

    neurons: tuple = ()
    skip_a: Real = 0
    skip_c: Real = 0

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            x = x.astype(float)
            out = float(self.skip_a) * x + float(self.skip_c)
            for w, b, v in self.neurons:
                out = out + float(v) * np.maximum(float(w) * x + float(b), 0.0)
            return out
        return eval_net(self, x)

    def path_norm(self, p: float) -> float:
        if p == 0:
            return float(sum(1 for w, _, v in self.neurons if w * v != 0))
        return math.fsum(abs(float(w * v)) ** p for w, _, v in self.neurons if w * v != 0)


@dataclass(frozen=True)
class PathNormReport:
    p: float
    lp_cost: float
    l1_cost: float
    l0_count: int
    lipschitz: float


def eval_cpwl(f: CPWLFunction, x):
    out = f.anchor_y + f.base_slope * (x - f.anchor_x)
    for u, c in f.knots:
        out = out + c * _pos(x - u)
    return out


def eval_net(net: ReLUNet1D, x):
    out = net.skip_a * x + net.skip_c
    for w, b, v in net.neurons:
        out = out + v * _pos(w * x + b)
    return out


def _check_p(p, lo_open: bool = False):
    if not (0 <= p <= 1) or (lo_open and p == 0):
        raise ValidationError(f"p must lie in {'(0' if lo_open else '[0'}, 1], got {p}")


def _power_sum(magnitudes: Iterable, p: float) -> float:
    """``sum |c|**p`` with the convention ``0**p = 0``; ``p = 0`` counts nonzeros."""
    mags = [abs(float(c)) for c in magnitudes if c != 0]
    if p == 0:
        return float(len(mags))
    return math.fsum(m**p for m in mags)


def vp_cost(f: CPWLFunction, p: float) -> float:
    """p-variation of the derivative: knot count at ``p = 0``, else ``sum |c_k|**p``."""
    _check_p(p)
    if p == 0:
        return float(len(f.knots))
    return _power_sum(f.changes, p)


def to_network(f: CPWLFunction) -> ReLUNet1D:
    """Canonical network: one unit-weight neuron per knot plus the affine skip."""
    neurons = tuple((1 + 0 * u, -u, c) for u, c in f.knots)
    a = f.base_slope
    c0 = f.anchor_y - f.base_slope * f.anchor_x
    return ReLUNet1D(neurons, a, c0)


def from_network(net: ReLUNet1D) -> CPWLFunction:
    """Collapse a network to its canonical CPWL form.

    Neurons are rescaled to ``|w| = 1``; a neuron with ``w = -1`` is rewritten
    through ``(u - x)_+ = (x - u)_+ - (x - u)`` and neurons sharing an activation
    site are merged.  Merging is subadditive in ``|.|**p`` so the p-variation of
    the result never exceeds the path norm of ``net``.
    """
    slope = net.skip_a
    const = net.skip_c
    changes: dict = {}
    for w, b, v in net.neurons:
        if w == 0:
            const = const + v * _pos(b)
            continue
        scale = abs(w)
        u = Fraction(-b) / w if is_exact(w, b) else -b / w
        vv = v * scale
        changes[u] = changes.get(u, 0) + vv
        if w < 0:
            # v'(u - x)_+ = v'(x - u)_+ - v'(x - u)
            slope = slope - vv
            const = const + vv * u
    # ``slope``/``const`` now describe the affine part valid for every x when
    # combined with sum c (x - u)_+; left of all knots only that affine part remains.
    if changes:
        anchor_x = min(changes) - 1
    else:
        anchor_x = 0 * slope
    anchor_y = slope * anchor_x + const
    return CPWLFunction.canonical(anchor_x, anchor_y, slope, changes.items())


def report(f: CPWLFunction, p: float) -> PathNormReport:
    _check_p(p)
    lip = max(abs(float(s)) for s in f.piece_slopes())
    return PathNormReport(
        p=float(p),
        lp_cost=vp_cost(f, p),
        l1_cost=vp_cost(f, 1),
        l0_count=len(f.knots),
        lipschitz=lip,
    )
