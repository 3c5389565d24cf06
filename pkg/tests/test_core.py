import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpsi.core import (
    CPWLFunction,
    Dataset1D,
    ReLUNet1D,
    ValidationError,
    eval_cpwl,
    eval_net,
    from_network,
    report,
    to_exact,
    to_network,
    vp_cost,
)

HAT = CPWLFunction(0, 0, 0, ((0, 1), (1, -2)))


def cpwl_strategy(exact=True):
    num = st.fractions(min_value=-5, max_value=5, max_denominator=8) if exact else st.floats(-5, 5)
    nonzero = num.filter(lambda c: c != 0)

    @st.composite
    def build(draw):
        locs = sorted(set(draw(st.lists(num, max_size=6))))
        changes = [draw(nonzero) for _ in locs]
        ax = (locs[0] - 1) if locs else draw(num)
        return CPWLFunction(ax, draw(num), draw(num), tuple(zip(locs, changes)))

    return build()


def test_dataset_validation():
    with pytest.raises(ValidationError, match="duplicate abscissa at rows 0 and 2"):
        Dataset1D.from_points([(0, 0), (1, 1), (0, 2)])
    with pytest.raises(ValidationError):
        Dataset1D.from_points([(0, 0)])
    d = Dataset1D.from_points([(2, 0), (0, 1), (1, 5)])
    assert d.xs == (0.0, 1.0, 2.0)
    assert d.ys == (1.0, 5.0, 0.0)
    assert d.input_order == (1, 2, 0)
    e = Dataset1D.from_points([("0.1", 1), (1, 0)], exact=True)
    assert e.xs[0] == F(1, 10) and e.exact


def test_to_exact_decimal_semantics():
    assert to_exact(0.05) == F(1, 20)
    assert to_exact("3/7") == F(3, 7)
    assert to_exact(4) == 4


def test_eval_examples():
    line = CPWLFunction(0, 0, 1)
    assert eval_cpwl(line, 5) == 5
    assert eval_cpwl(HAT, 2) == 0
    assert HAT(1) == 1
    assert HAT(np.array([2.0]))[0] == 0.0


def test_vp_cost_examples():
    f = CPWLFunction(-1, 0, 0, ((0, 3), (1, -4)))
    assert vp_cost(f, 0.5) == pytest.approx(math.sqrt(3) + 2, abs=1e-12)
    assert vp_cost(f, 0) == 2
    assert vp_cost(CPWLFunction(0, 1, 2), 0.3) == 0
    with pytest.raises(ValidationError):
        vp_cost(f, 1.5)
    with pytest.raises(ValidationError):
        vp_cost(f, -0.1)


def test_to_network_examples():
    net = to_network(CPWLFunction(0, 1, 3))
    assert net.neurons == () and net.skip_a == 3 and net.skip_c == 1
    net = to_network(HAT)
    assert [v for _, _, v in net.neurons] == [1, -2]
    assert all(abs(w) == 1 for w, _, _ in net.neurons)


def test_from_network_abs_value():
    f = from_network(ReLUNet1D(((1, 0, 1), (-1, 0, 1))))
    assert f.knots == ((0, 2),)
    assert f(-3) == 3 and f(2) == 2


def test_report_examples():
    r = report(HAT, 0.5)
    assert r.l0_count == 2 and r.l1_cost == 3 and r.lipschitz == 1
    assert r.lp_cost == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    r = report(CPWLFunction(0, 0, -2.5), 0.5)
    assert r.l0_count == 0 and r.lipschitz == 2.5


def test_canonical_merges_and_elides():
    f = CPWLFunction.canonical(0, 0, 1, [(1, 2), (1, -2), (2, 1), (0.5, 0)])
    assert f.knots == ((2, 1),)
    g = CPWLFunction.canonical(5, 7, 1, [(1, 2)])
    assert g.anchor_x <= 1 and g(5) == 7
    with pytest.raises(ValidationError):
        CPWLFunction(0, 0, 0, ((1, 0),))
    with pytest.raises(ValidationError):
        CPWLFunction(0, 0, 0, ((2, 1), (1, 1)))


@settings(max_examples=60, deadline=None)
@given(cpwl_strategy(exact=True), st.lists(st.fractions(-10, 10, max_denominator=16), min_size=1, max_size=40))
def test_network_evaluation_equivalence_exact(f, xs):
    net = to_network(f)
    for x in xs:
        assert eval_cpwl(f, x) == eval_net(net, x)


@settings(max_examples=40, deadline=None)
@given(cpwl_strategy(exact=False))
def test_network_evaluation_equivalence_float(f):
    xs = np.random.default_rng(0).uniform(-10, 10, 1000)
    a, b = f(xs), to_network(f)(xs)
    assert np.all(np.abs(a - b) <= 1e-12 * (1 + np.abs(a)) + 1e-11)


@settings(max_examples=60, deadline=None)
@given(cpwl_strategy(exact=True))
def test_roundtrip_and_identity(f):
    g = from_network(to_network(f))
    assert g.same_function(f)
    net = to_network(f)
    for p in np.linspace(0.05, 1.0, 20):
        assert vp_cost(f, p) == pytest.approx(net.path_norm(p), rel=1e-12, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from([-2, -1, 1, 3]),
            st.sampled_from([-1, 0, 2]),
            st.fractions(-3, 3, max_denominator=4).filter(lambda v: v != 0),
        ),
        max_size=6,
    )
)
def test_merging_never_increases_cost(neurons):
    net = ReLUNet1D(tuple(neurons), 0, 0)
    f = from_network(net)
    for x in (F(-5), F(-1, 3), F(0), F(1, 2), F(4)):
        assert f(x) == eval_net(net, x)
    for p in (0.3, 0.7, 1.0):
        assert vp_cost(f, p) <= net.path_norm(p) + 1e-12


def test_lipschitz_matches_dense_grid():
    rng = np.random.default_rng(3)
    for _ in range(20):
        locs = np.sort(rng.uniform(-3, 3, 4))
        f = CPWLFunction(-4.0, rng.normal(), rng.normal(), tuple(zip(locs, rng.normal(size=4))))
        xs = np.linspace(-5, 5, 20001)
        fd = np.abs(np.diff(f(xs)) / np.diff(xs)).max()
        assert report(f, 1).lipschitz == pytest.approx(fd, rel=1e-6)
