import json
import tempfile
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpsi.core import CPWLFunction, Dataset1D, ValidationError
from lpsi.dataio import (
    FormatError,
    ResultDocument,
    decode_number,
    dump_dataset,
    dumps_document,
    dumps_json,
    emit_plot_data,
    encode_number,
    load_dataset,
    loads_document,
)
from lpsi.multivariate import DatasetND, ReconstructedNet


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_1d(tmp_path):
    d = load_dataset(write(tmp_path, "a.csv", "x,y\n2,0\n0,1\n1,5\n"))
    assert isinstance(d, Dataset1D) and d.xs == (0.0, 1.0, 2.0) and d.input_order == (1, 2, 0)
    e = load_dataset(write(tmp_path, "b.csv", "x,y\n0.1,1\n0.3,2/3\n"), exact=True)
    assert e.xs == (F(1, 10), F(3, 10)) and e.ys[1] == F(2, 3)


def test_load_csv_nd(tmp_path):
    d = load_dataset(write(tmp_path, "a.csv", "x1,x2,y\n0,0,1\n1,2,3\n"))
    assert isinstance(d, DatasetND) and d.X.shape == (2, 2)
    one = load_dataset(write(tmp_path, "b.csv", "x1,y\n0,1\n1,0\n"))
    assert isinstance(one, DatasetND)
    forced = load_dataset(write(tmp_path, "c.csv", "x,y\n0,1\n1,0\n"), dimension="nd")
    assert isinstance(forced, DatasetND)


def test_load_json(tmp_path):
    d = load_dataset(write(tmp_path, "a.json", '{"points": [[0, 1], [1.5, 2]]}'))
    assert d.xs == (0.0, 1.5)
    nd = load_dataset(write(tmp_path, "b.json", '{"points": [[[0, 1], 1], [[1, 0], 2]]}'))
    assert isinstance(nd, DatasetND) and nd.d == 2
    ex = load_dataset(write(tmp_path, "c.json", '{"points": [[0.1, 0.2], [1, 0]]}'), exact=True)
    assert ex.xs[0] == F(1, 10)


@pytest.mark.parametrize(
    "name,text",
    [
        ("a.csv", "x,y\n0,1\n1\n"),
        ("b.csv", "a,b\n0,1\n"),
        ("c.csv", "x,y\n0,abc\n"),
        ("d.csv", ""),
        ("e.json", "{not json"),
        ("f.json", '{"pts": []}'),
        ("g.json", '{"points": [[[0, 1], 1], [[1], 2]]}'),
        ("h.json", '{"points": [[0, 1, 2]]}'),
        ("i.txt", "x,y\n0,0\n"),
    ],
)
def test_malformed_inputs(tmp_path, name, text):
    with pytest.raises(FormatError):
        load_dataset(write(tmp_path, name, text))


def test_duplicate_abscissa_is_validation_error(tmp_path):
    with pytest.raises(ValidationError, match="duplicate"):
        load_dataset(write(tmp_path, "a.csv", "x,y\n0,1\n0,2\n"))
    with pytest.raises(ValidationError):
        load_dataset(tmp_path / "missing.csv")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=10, unique=True), st.data())
def test_dataset_roundtrip(xs, data):
    ys = data.draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=len(xs), max_size=len(xs)))
    d = Dataset1D.from_points(zip(xs, ys))
    with tempfile.TemporaryDirectory() as tmp:
        for fmt in ("csv", "json"):
            path = Path(tmp) / f"d.{fmt}"
            path.write_text(dump_dataset(d, fmt))
            again = load_dataset(path)
            assert again.xs == d.xs and again.ys == d.ys


def test_exact_dataset_roundtrip(tmp_path):
    d = Dataset1D.from_points([(F(1, 3), F(-2, 7)), (1, 0)], exact=True)
    again = load_dataset(write(tmp_path, "a.csv", dump_dataset(d)), exact=True)
    assert again.xs == d.xs and again.ys == d.ys


def test_json_number_format():
    text = dumps_json({"a": 0.1, "b": F(1, 3), "c": [1, 2.5], "d": True, "e": None})
    obj = json.loads(text)
    assert obj["a"] == 0.1 and obj["b"] == "1/3" and obj["c"] == [1, 2.5]
    assert '"a": 0.10000000000000001' in text
    with pytest.raises(ValidationError):
        dumps_json({"x": float("nan")})
    assert encode_number(F(2, 4)) == "1/2" and decode_number("1/2") == F(1, 2)
    assert decode_number("abc") == "abc"


def test_document_roundtrip():
    doc = ResultDocument(
        problem={"kind": "solve1d", "p": 0.5},
        solution={"knots": [[F(1), F(-2)], [F(2), F(2)]], "cost": 2.8284271247461903},
        provenance={"seed": None},
    )
    again = loads_document(dumps_document(doc))
    assert again.to_dict() == doc.to_dict()
    assert dumps_document(again) == dumps_document(doc)


def test_document_errors():
    with pytest.raises(FormatError):
        loads_document("[]")
    with pytest.raises(FormatError):
        loads_document('{"schema_version": "1"}')
    with pytest.raises(FormatError):
        loads_document('{"schema_version": "99", "problem": {}, "solution": {}, "provenance": {}}')


def test_plot_1d_includes_knots():
    f = CPWLFunction(0, 0, 1, ((F(1, 3), -2),))
    text = emit_plot_data(f, (0, 1), 3)
    rows = text.splitlines()
    assert rows[0] == "x,f(x)" and len(rows) == 1 + 4
    xs = [float(r.split(",")[0]) for r in rows[1:]]
    assert float(F(1, 3)) in xs and xs == sorted(xs)


def test_plot_2d_grid_and_empty_net():
    net = ReconstructedNet((((1.0, 0.0, 0.0), 1, 0, "nu"),))
    rows = emit_plot_data(net, (-1, 1), 3).splitlines()
    assert rows[0] == "x1,x2,f" and len(rows) == 10
    empty = ReconstructedNet(())
    rows = emit_plot_data(empty, (0, 1), 2).splitlines()
    assert rows[1:] == ["0,0", "1,0"]
    with pytest.raises(ValidationError):
        emit_plot_data(net, (1, 0), 3)
    with pytest.raises(ValidationError):
        emit_plot_data(net, (0, 1), 1)


def test_dump_nd_dataset(tmp_path):
    ds = DatasetND(np.array([[0.5, 1.0], [2.0, -1.0]]), np.array([1.0, 0.0]))
    again = load_dataset(write(tmp_path, "a.csv", dump_dataset(ds)))
    assert again == ds
