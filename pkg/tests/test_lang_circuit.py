from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from optmct.circuit import (CircuitError, Gate, Identity, OptTypeError, Par, Seq, evaluate,
                            is_generator_circuit, leaves, typecheck)
from optmct.core import SystemType, compose_par, compose_seq, identity_test
from optmct.lang import OptNameError, OptSyntaxError, format_expr, format_source, parse
from optmct.sampling import case_rng, random_circuit, reassociate

MEASURE_PREPARE = """
system A = [2]
system B = [3]
otest m on A {
  0 = [1, 0]
  1 = [0, 1]
}
ptest p on B {
  x = [1, 0, 0]
  "y" = [0, 1/2, 1/2]
}
circuit obs(m) ; prep(p)
"""


def test_parse_declarations():
    src = parse(MEASURE_PREPARE)
    assert src.systems == {"A": SystemType.of(2), "B": SystemType.of(3)}
    assert src.tests["m"][0] == "otest"
    assert src.test("p")["y"].vector() == [0, Fraction(1, 2), Fraction(1, 2)]


def test_evaluate_measure_and_prepare_by_hand():
    t = evaluate(parse(MEASURE_PREPARE).circuit)
    assert t.input == SystemType.of(2) and t.output == SystemType.of(3)
    assert t.labels == (("0", "x"), ("0", "y"), ("1", "x"), ("1", "y"))
    assert t["1.y"].matrix.rows() == [[0, 0], [0, Fraction(1, 2)], [0, Fraction(1, 2)]]


def test_identity_circuit():
    t = evaluate(parse("circuit id([2,3])").circuit)
    assert t == identity_test([2, 3])


def test_swap_and_perm_leaves():
    t = evaluate(parse("circuit swap([2], [3])").circuit)
    assert t.input == SystemType.of(2, 3) and t.output == SystemType.of(3, 2)
    same = evaluate(parse("circuit perm([2,3], (0 1))").circuit)
    assert t == same


def test_precedence_par_binds_tighter():
    src = parse("circuit id([2]) | id([3]) ; swap([2], [3])")
    assert isinstance(src.circuit, Seq)
    assert isinstance(src.circuit.first, Par)


@pytest.mark.parametrize("text, line, col", [
    ("system A = [2]\ncircuit id(A) ;", 2, 15),
    ("circuit id(B)", 1, 12),
    ("otest m on [2] {\n  0 = [1, 0, 0]\n}", 2, 7),
])
def test_errors_carry_positions(text, line, col):
    with pytest.raises(CircuitError) as info:
        parse(text)
    assert info.value.pos == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_type_error_names_the_mismatch():
    with pytest.raises(OptTypeError, match="does not match"):
        parse("circuit id([2]) ; id([3])")


def test_name_errors():
    with pytest.raises(OptNameError):
        parse("circuit prep(nope)")
    with pytest.raises(OptNameError):
        parse("otest m on [2] { 0 = [1, 1] }\ncircuit prep(m)")
    with pytest.raises(OptNameError):
        parse("otest m on [2] { 0 = [1, 1] }\notest m on [2] { 0 = [1, 1] }")


def test_syntax_errors():
    with pytest.raises(OptSyntaxError):
        parse("circuit id([2]) extra")
    with pytest.raises(OptSyntaxError):
        parse("circuit id([2])\ncircuit id([2])")
    with pytest.raises(OptSyntaxError):
        parse("circuit perm([2,2], (0 5))")


def test_apply_leaf_is_not_a_generator():
    src = parse("test t on [2] -> [2] { a = [[1, 0], [0, 1]] }\ncircuit apply(t) ; id([2])")
    assert isinstance(src.circuit.first, Gate)
    assert not is_generator_circuit(src.circuit)
    assert evaluate(src.circuit)["a"].matrix.rows() == [[1, 0], [0, 1]]


def test_evaluation_is_compositional():
    src = parse(MEASURE_PREPARE + "")
    m, p = src.test("m"), src.test("p")
    node = parse(MEASURE_PREPARE.replace("circuit obs(m) ; prep(p)",
                                         "circuit (obs(m) ; prep(p)) | id([2])")).circuit
    assert evaluate(node) == compose_par(compose_seq(m, p), identity_test([2]))


@given(st.integers(0, 10_000))
def test_reassociation_preserves_evaluation(i):
    rng = case_rng(0, "reassociate", i)
    src = random_circuit(rng, max_factors=3, max_dim=3, depth=4)
    other = reassociate(rng, src.circuit)
    assert [type(l) for l in leaves(other)] == [type(l) for l in leaves(src.circuit)]
    assert evaluate(other) == evaluate(src.circuit)


@given(st.integers(0, 10_000))
def test_format_parse_round_trip(i):
    src = random_circuit(case_rng(1, "round-trip", i), max_factors=3, max_dim=3, depth=4)
    text = format_source(src)
    again = parse(text)
    assert format_source(again) == text
    assert evaluate(again.circuit) == evaluate(src.circuit)
    assert typecheck(again.circuit).input == typecheck(src.circuit).input


def test_format_expr_parenthesises():
    node = Par(Identity(SystemType.of(2)), Seq(Identity(SystemType.of(2)), Identity(SystemType.of(2))))
    assert format_expr(node) == "id([2]) | (id([2]) ; id([2]))"
