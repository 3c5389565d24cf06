"""Dataset ingestion, result documents and plot-data emission.

Result documents are JSON with every float written as a 17-significant-digit
decimal and every exact rational as a ``"num/den"`` string, so that a
document read back with :func:`loads_document` compares equal to the one
written.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import CPWLFunction, Dataset1D, ReLUNet1D, ValidationError, to_exact
from .multivariate import DatasetND, ReconstructedNet

__all__ = [
    "FormatError",
    "SCHEMA_VERSION",
    "ResultDocument",
    "load_dataset",
    "dump_dataset",
    "dumps_json",
    "dumps_document",
    "loads_document",
    "emit_plot_data",
    "encode_number",
    "decode_number",
]

SCHEMA_VERSION = "1"
_RATIONAL = re.compile(r"^-?\d+/\d+$")


class FormatError(ValidationError):
    """Malformed input file (ragged rows, bad header, unparsable numbers)."""


# ---------------------------------------------------------------- datasets


def _number(text: str, exact: bool, where: str):
    try:
        return to_exact(text) if exact else float(text)
    except (ValueError, ZeroDivisionError) as e:
        raise FormatError(f"{where}: cannot parse {text!r} as a number") from e


def _build(xs: list, ys: list, dimension: str, exact: bool):
    d = len(xs[0]) if xs else 0
    if dimension == "1d" or (dimension == "auto" and d == 1):
        if d != 1:
            raise ValidationError(f"expected one input column, found {d}")
        return Dataset1D.from_points([(x[0], y) for x, y in zip(xs, ys)], exact=exact)
    if dimension not in ("auto", "nd"):
        raise ValidationError(f"unknown dimension mode {dimension!r}")
    if not xs:
        raise ValidationError("dataset is empty")
    return DatasetND(np.array([[float(v) for v in x] for x in xs]), np.array([float(v) for v in ys]))


def _load_csv(text: str, dimension: str, exact: bool):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[-1] != "y":
        raise FormatError("CSV header must be 'x,y' or 'x1,...,xd,y'")
    names = header[:-1]
    if names != ["x"] and names != [f"x{i}" for i in range(1, len(names) + 1)]:
        raise FormatError(f"unexpected input column names {names}")
    xs, ys = [], []
    for i, r in enumerate(rows[1:]):
        if len(r) != len(header):
            raise FormatError(f"row {i} has {len(r)} fields, expected {len(header)}")
        xs.append([_number(c, exact, f"row {i}") for c in r[:-1]])
        ys.append(_number(r[-1], exact, f"row {i}"))
    if dimension == "auto" and names != ["x"]:
        dimension = "nd"
    return _build(xs, ys, dimension, exact)


def _load_json(text: str, dimension: str, exact: bool):
    try:
        obj = json.loads(text, parse_float=str, parse_int=str)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e}") from e
    pts = obj.get("points") if isinstance(obj, dict) else None
    if not isinstance(pts, list):
        raise FormatError('JSON dataset must be an object with a "points" list')
    xs, ys = [], []
    width = None
    for i, pt in enumerate(pts):
        if not (isinstance(pt, list) and len(pt) == 2):
            raise FormatError(f"point {i} must be [x, y] or [[x1, ..., xd], y]")
        x, y = pt
        x = x if isinstance(x, list) else [x]
        if width is None:
            width = len(x)
        if len(x) != width or width == 0:
            raise FormatError(f"point {i} has {len(x)} inputs, expected {width}")
        xs.append([_number(str(v), exact, f"point {i}") for v in x])
        ys.append(_number(str(y), exact, f"point {i}"))
    return _build(xs, ys, dimension, exact)


def load_dataset(path, fmt: str | None = None, dimension: str = "auto", exact: bool = False):
    """Read a CSV (``x,y`` or ``x1..xd,y``) or JSON (``{"points": [[x, y], ...]}``) dataset.

    One-input data become a :class:`Dataset1D` sorted by ``x`` (the input
    order is kept in ``input_order``) unless ``dimension="nd"``; with
    ``exact=True`` decimal strings are read as exact rationals.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "json"):
        raise FormatError(f"unknown dataset format {fmt!r}")
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e
    return _load_csv(text, dimension, exact) if fmt == "csv" else _load_json(text, dimension, exact)


def dump_dataset(ds, fmt: str = "csv") -> str:
    """Serialise a dataset so that :func:`load_dataset` reads it back unchanged."""
    if isinstance(ds, Dataset1D):
        pts = [([x], y) for x, y in zip(ds.xs, ds.ys)]
        names = ["x"]
    else:
        pts = [(list(row), y) for row, y in zip(ds.X, ds.y)]
        names = [f"x{i}" for i in range(1, ds.d + 1)]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names + ["y"])
        for x, y in pts:
            w.writerow([_fmt_scalar(v) for v in x] + [_fmt_scalar(y)])
        return buf.getvalue()
    if fmt == "json":
        return dumps_json({"points": [[list(x), y] for x, y in pts]})
    raise FormatError(f"unknown dataset format {fmt!r}")


def _fmt_scalar(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


# ---------------------------------------------------------------- JSON


def encode_number(v):
    """JSON-ready form of a number: rationals become ``"num/den"`` strings."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v


def decode_number(v):
    if isinstance(v, str) and _RATIONAL.match(v):
        return Fraction(v)
    return v


def _emit(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValidationError(f"cannot serialise non-finite number {x}")
        out.append("%.17g" % x)
    elif isinstance(obj, Fraction):
        out.append(json.dumps(encode_number(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k)) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            out.append("[")
            for i, v in enumerate(items):
                _emit(v, indent, level + 1, out)
                if i < len(items) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(items):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "]")
    else:
        raise ValidationError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats and ``"num/den"`` rationals."""
    out: list = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def _decode_tree(obj):
    if isinstance(obj, dict):
        return {k: _decode_tree(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode_tree(v) for v in obj]
    return decode_number(obj)


@dataclass
class ResultDocument:
    problem: dict
    solution: dict
    provenance: dict
    pstar: dict | None = None
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version, "problem": self.problem, "solution": self.solution}
        if self.pstar is not None:
            out["pstar"] = self.pstar
        out["provenance"] = self.provenance
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ResultDocument":
        missing = {"schema_version", "problem", "solution", "provenance"} - set(d)
        if missing:
            raise FormatError(f"result document lacks {sorted(missing)}")
        if d["schema_version"] != SCHEMA_VERSION:
            raise FormatError(f"unsupported schema version {d['schema_version']!r}")
        return cls(d["problem"], d["solution"], d["provenance"], d.get("pstar"), d["schema_version"])


def dumps_document(doc: ResultDocument) -> str:
    return dumps_json(doc.to_dict())


def loads_document(text: str) -> ResultDocument:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid result JSON: {e}") from e
    if not isinstance(raw, dict):
        raise FormatError("result document must be a JSON object")
    return ResultDocument.from_dict(_decode_tree(raw))


# ---------------------------------------------------------------- plot data


def emit_plot_data(f, x_range: tuple, samples: int, stream=None) -> str:
    """Sampled values of a fitted function as CSV.

    One-input functions (CPWL, univariate network or one-input multivariate
    network) give ``x,f(x)`` rows at ``samples`` equispaced points plus every
    knot inside the range; two-input networks give a ``samples x samples``
    grid with columns ``x1,x2,f``.
    """
    if samples < 2:
        raise ValidationError("need at least two samples")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not lo < hi:
        raise ValidationError("plot range must satisfy lo < hi")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = 1
    if isinstance(f, ReconstructedNet):
        dim = len(f.neurons[0][0]) - 1 if f.neurons else 1
    if dim == 1:
        xs = {float(v) for v in np.linspace(lo, hi, samples)}
        if isinstance(f, CPWLFunction):
            xs |= {float(u) for u in f.locations if lo <= float(u) <= hi}
        elif isinstance(f, ReLUNet1D):
            xs |= {float(-b / wt) for wt, b, _ in f.neurons if wt != 0 and lo <= float(-b / wt) <= hi}
        else:
            xs |= {-b / wt for (wt, b), *_ in f.neurons if wt != 0 and lo <= -b / wt <= hi}
        grid = np.array(sorted(xs))
        vals = f(grid) if not isinstance(f, ReconstructedNet) else f(grid[:, None])
        vals = np.broadcast_to(np.asarray(vals, dtype=float), grid.shape)
        w.writerow(["x", "f(x)"])
        for x, v in zip(grid, vals):
            w.writerow(["%.17g" % x, "%.17g" % v])
    elif dim == 2:
        g = np.linspace(lo, hi, samples)
        X1, X2 = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([X1.ravel(), X2.ravel()])
        vals = f(pts)
        w.writerow(["x1", "x2", "f"])
        for (a, b), v in zip(pts, vals):
            w.writerow(["%.17g" % a, "%.17g" % b, "%.17g" % v])
    else:
        raise ValidationError("plot data is available for one or two inputs only")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
