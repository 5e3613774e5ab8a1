from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from optmct.core import (CompositionError, PartitionError, SystemType, TRIVIAL, Test, as_label,
                         coarse_grain, compose_par, compose_seq, deterministic_effect,
                         full_coarse_graining, identity_test, observation_test, preparation_test,
                         probability, validate, vertex_state)

from conftest import nonempty_systems, systems, valid_tests


@given(systems)
def test_index_is_row_major(s):
    # leftmost factor most significant, as in itertools.product
    for flat, digits in enumerate(product(*[range(d) for d in s.factors])):
        assert s.index(digits) == flat
        assert s.digits(flat) == digits


def test_label_normalisation():
    assert as_label("a.b") == ("a", "b")
    assert as_label("") == ()
    assert as_label(3) == ("3",)
    with pytest.raises(ValueError):
        as_label(("a.b",))


def test_sequential_composition_by_hand():
    bit = SystemType.of(2)
    flip = Test(bit, bit, [("f", [[0, 1], [1, 0]])])
    meas = Test(bit, bit, [("0", [[1, 0], [0, 0]]), ("1", [[0, 0], [0, 1]])])
    t = compose_seq(flip, meas)
    assert t.labels == (("f", "0"), ("f", "1"))
    assert t["f.0"].matrix.rows() == [[0, 1], [0, 0]]
    assert t["f.1"].matrix.rows() == [[0, 0], [1, 0]]


def test_parallel_composition_orders_factors():
    p = preparation_test([2], {"a": [1, 0]})
    q = preparation_test([3], {"b": [0, 0, 1]})
    t = compose_par(p, q)
    assert t.output == SystemType.of(2, 3)
    assert t["a.b"].vector() == [0, 0, 1, 0, 0, 0]


def test_composition_type_errors():
    with pytest.raises(CompositionError):
        compose_seq(identity_test([2]), identity_test([3]))


@given(nonempty_systems, nonempty_systems, nonempty_systems, st.data())
def test_sequential_associative(a, b, c, data):
    f = data.draw(valid_tests(a, b))
    g = data.draw(valid_tests(b, c))
    h = data.draw(valid_tests(c, a))
    assert compose_seq(compose_seq(f, g), h) == compose_seq(f, compose_seq(g, h))


@settings(max_examples=25)
@given(nonempty_systems, nonempty_systems, st.data())
def test_interchange_law(a, b, data):
    f = data.draw(valid_tests(a, b, 2))
    h = data.draw(valid_tests(b, a, 2))
    g = data.draw(valid_tests(b, b, 2))
    k = data.draw(valid_tests(b, a, 2))
    lhs = compose_seq(compose_par(f, g), compose_par(h, k))
    rhs = compose_par(compose_seq(f, h), compose_seq(g, k))
    # (f|g);(h|k) reads its outcomes as x.y.z.w, (f;h)|(g;k) as x.z.y.w
    assert lhs.relabel(lambda l: (l[0], l[2], l[1], l[3])) == rhs


@given(nonempty_systems, nonempty_systems, st.data())
def test_valid_tests_stay_valid(a, b, data):
    f = data.draw(valid_tests(a, b))
    g = data.draw(valid_tests(b, a))
    assert validate(f).ok
    assert validate(compose_seq(f, g)).ok
    assert validate(compose_par(f, g)).ok
    assert full_coarse_graining(f).is_deterministic


@given(nonempty_systems, st.data())
def test_identity_is_neutral(a, data):
    f = data.draw(valid_tests(a, a))
    assert compose_seq(identity_test(a), f).relabel(lambda l: l) == f
    assert compose_seq(f, identity_test(a)) == f


def test_coarse_graining():
    t = observation_test([3], {"a": [1, 0, 0], "b": [0, 1, 0], "c": [0, 0, 1]})
    u = coarse_grain(t, {"ab": ["a", "b"], "c": ["c"]})
    assert u["ab"].vector() == [1, 1, 0]
    assert coarse_grain(t, [["a", "b", "c"]])["0"] == deterministic_effect([3])
    with pytest.raises(PartitionError):
        coarse_grain(t, {"x": ["a"], "y": ["a", "b", "c"]})
    with pytest.raises(PartitionError):
        coarse_grain(t, {"x": ["a"]})
    with pytest.raises(PartitionError):
        coarse_grain(t, {"x": ["a", "z"], "y": ["b", "c"]})


def test_probability_by_hand():
    bit = SystemType.of(2)
    noisy = Test(bit, bit, [("", [[Fraction(3, 4), Fraction(1, 4)], [Fraction(1, 4), Fraction(3, 4)]])])
    obs = observation_test(bit, {"0": [1, 0], "1": [0, 1]})
    p = probability(vertex_state(bit, 0), noisy, obs)
    assert p == {("0",): Fraction(3, 4), ("1",): Fraction(1, 4)}


def test_validate_reports_every_violation():
    bit = SystemType.of(2)
    bad = Test(bit, bit, [("0", [[1, 0], [1, -1]]), ("1", [[0, 0], [0, 0]])])
    rep = validate(bad)
    kinds = {v.kind for v in rep.violations}
    assert "negative entry" in kinds
    assert "column sum exceeds 1" in kinds
    assert not rep.ok
    sub = Test(bit, TRIVIAL, [("0", [[Fraction(1, 2), 0]])])
    assert not validate(sub).ok


def test_test_equality_ignores_listing_order():
    a = observation_test([2], {"0": [1, 0], "1": [0, 1]})
    b = observation_test([2], {"1": [0, 1], "0": [1, 0]})
    assert a == b and hash(a) == hash(b)


def test_test_construction_errors():
    with pytest.raises(ValueError):
        Test([2], [2], [])
    with pytest.raises(ValueError):
        Test([2], TRIVIAL, [("0", [[1, 0]]), ("0", [[0, 1]])])
    with pytest.raises(ValueError):
        Test([2], TRIVIAL, [("0", [[1, 0]]), ("1.2", [[0, 1]])])
