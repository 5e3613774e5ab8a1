"""Generator circuits: AST, type checking and evaluation to tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .core import (SystemType, Test, TRIVIAL, compose_par, compose_seq,
                   identity_test)
from .permutations import PermutationSpec

__all__ = [
    "Identity", "Permutation", "Prep", "Obs", "Gate", "Seq", "Par", "Node",
    "Typed", "CircuitError", "OptTypeError", "typecheck", "evaluate",
    "node_types", "leaves", "is_generator_circuit", "seq_all", "par_all",
]


class CircuitError(ValueError):
    """Base class for circuit-language errors; carries an optional position."""

    def __init__(self, message: str, pos: tuple | None = None):
        self.message = message
        self.pos = pos
        where = f"line {pos[0]}, column {pos[1]}: " if pos else ""
        super().__init__(where + message)


class OptTypeError(CircuitError):
    pass


_pos = lambda: field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Identity:
    system: SystemType
    pos: tuple = _pos()


@dataclass(frozen=True)
class Permutation:
    spec: PermutationSpec
    pos: tuple = _pos()


@dataclass(frozen=True)
class Prep:
    name: str
    test: Test
    pos: tuple = _pos()


@dataclass(frozen=True)
class Obs:
    name: str
    test: Test
    pos: tuple = _pos()


@dataclass(frozen=True)
class Gate:
    """A named test that is not one of the generators (allowed in evaluation only)."""

    name: str
    test: Test
    pos: tuple = _pos()


@dataclass(frozen=True)
class Seq:
    first: "Node"
    second: "Node"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Par:
    top: "Node"
    bottom: "Node"
    pos: tuple = _pos()


Node = Union[Identity, Permutation, Prep, Obs, Gate, Seq, Par]


@dataclass(frozen=True)
class Typed:
    node: Node
    input: SystemType
    output: SystemType
    children: tuple = ()


def _describe(node: Node) -> str:
    from .lang import format_expr
    text = format_expr(node)
    return text if len(text) <= 60 else text[:57] + "..."


def typecheck(node: Node) -> Typed:
    """Annotate every node with its input and output systems."""
    if isinstance(node, Identity):
        return Typed(node, node.system, node.system)
    if isinstance(node, Permutation):
        return Typed(node, node.spec.input, node.spec.output)
    if isinstance(node, Prep):
        if node.test.input != TRIVIAL:
            raise OptTypeError(f"prep({node.name}) is not a preparation test", node.pos)
        return Typed(node, TRIVIAL, node.test.output)
    if isinstance(node, Obs):
        if node.test.output != TRIVIAL:
            raise OptTypeError(f"obs({node.name}) is not an observation test", node.pos)
        return Typed(node, node.test.input, TRIVIAL)
    if isinstance(node, Gate):
        return Typed(node, node.test.input, node.test.output)
    if isinstance(node, Seq):
        a, b = typecheck(node.first), typecheck(node.second)
        if a.output != b.input:
            raise OptTypeError(
                f"sequential composition mismatch: output {a.output} of "
                f"'{_describe(node.first)}' does not match input {b.input} of "
                f"'{_describe(node.second)}'", node.pos)
        return Typed(node, a.input, b.output, (a, b))
    if isinstance(node, Par):
        a, b = typecheck(node.top), typecheck(node.bottom)
        return Typed(node, a.input * b.input, a.output * b.output, (a, b))
    raise TypeError(f"not a circuit node: {node!r}")


def node_types(node: Node) -> tuple:
    t = typecheck(node)
    return t.input, t.output


def evaluate(ast) -> Test:
    """Evaluate a (typed or untyped) circuit to a test.

    Outcome labels are the concatenation of leaf labels, left to right and
    top to bottom.
    """
    typed = ast if isinstance(ast, Typed) else typecheck(ast)
    return _eval(typed)


def _eval(t: Typed) -> Test:
    node = t.node
    if isinstance(node, Identity):
        return identity_test(node.system)
    if isinstance(node, Permutation):
        return node.spec.test()
    if isinstance(node, (Prep, Obs, Gate)):
        return node.test
    a, b = t.children
    if isinstance(node, Seq):
        return compose_seq(_eval(a), _eval(b))
    return compose_par(_eval(a), _eval(b))


def leaves(node: Node) -> list:
    """Leaves in evaluation order."""
    if isinstance(node, Seq):
        return leaves(node.first) + leaves(node.second)
    if isinstance(node, Par):
        return leaves(node.top) + leaves(node.bottom)
    return [node]


def is_generator_circuit(node: Node) -> bool:
    return not any(isinstance(l, Gate) for l in leaves(node))


def seq_all(*nodes: Node) -> Node:
    out = nodes[0]
    for n in nodes[1:]:
        out = Seq(out, n)
    return out


def par_all(*nodes: Node) -> Node:
    out = nodes[0]
    for n in nodes[1:]:
        out = Par(out, n)
    return out
