"""Parser and printer for ``.opt`` circuit files.

Example::

    # measure a bit, then prepare the uniform state
    system A = [2]
    otest m on A { 0 = [1, 0]  1 = [0, 1] }
    ptest r on A { r = [1/2, 1/2] }
    circuit obs(m) ; prep(r)

Statements are ``system``, ``ptest``, ``otest``, ``test`` (a general,
non-generator test with one matrix per outcome, rows listed in order) and a
single ``circuit``.  In expressions ``|`` (parallel) binds tighter than
``;`` (sequence); both associate to the left.  Leaves are ``id(S)``,
``swap(S, T)``, ``perm(S, (0 1)...)``, ``prep(name)``, ``obs(name)`` and
``apply(name)``.  Systems are names or literals such as ``[2,3]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .circuit import (CircuitError, Gate, Identity, Node, Obs, Par, Permutation,
                      Prep, Seq, typecheck)
from .core import SystemType, Test, TRIVIAL, format_label
from .linalg import QMatrix
from .permutations import (PermutationError, PermutationSpec, block_swap,
                           format_cycles, parse_cycles)

__all__ = [
    "CircuitSource", "OptSyntaxError", "OptNameError",
    "parse", "format_source", "format_expr", "format_test_decl", "format_system",
    "load_file",
]


class OptSyntaxError(CircuitError):
    pass


class OptNameError(CircuitError):
    pass


@dataclass(frozen=True)
class CircuitSource:
    systems: dict = field(default_factory=dict)
    tests: dict = field(default_factory=dict)      # name -> (kind, Test)
    circuit: Node | None = None

    def test(self, name: str) -> Test:
        return self.tests[name][1]


# -- lexer ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<num>-?\d+(?:/\d+|\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<str>"[^"\n]*")
  | (?P<punct>[()\[\]{},;|=:])
""", re.VERBOSE)

_KEYWORDS = {"system", "ptest", "otest", "test", "circuit", "on",
             "id", "swap", "perm", "prep", "obs", "apply"}
_STATEMENTS = {"system", "ptest", "otest", "test", "circuit"}


@dataclass
class Token:
    kind: str
    value: str
    line: int
    col: int

    @property
    def pos(self) -> tuple:
        return (self.line, self.col)


def tokenize(text: str) -> list:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise OptSyntaxError(f"unexpected character {text[i]!r}", (line, i - line_start + 1))
        kind = m.lastgroup
        value = m.group()
        col = i - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident" and value in _KEYWORDS:
            tokens.append(Token("kw", value, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


# -- parser --------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.systems: dict = {}
        self.tests: dict = {}
        self.circuit = None

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        if tok.kind == "eof" and self.i > 0:
            # report at the last real token, which is where the input broke off
            prev = self.toks[self.i - 1]
            raise OptSyntaxError(f"{message}, found end of input after {prev.value!r}", prev.pos)
        found = tok.value if tok.kind != "eof" else "end of input"
        raise OptSyntaxError(f"{message}, found {found!r}", tok.pos)

    def at(self, kind: str, value: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def take(self, kind: str, value: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, value):
            self.error(f"expected {what or value or kind}")
        t = self.tok
        self.i += 1
        return t

    def punct(self, ch: str) -> Token:
        return self.take("punct", ch, repr(ch))

    def maybe(self, ch: str) -> bool:
        if self.at("punct", ch):
            self.i += 1
            return True
        return False

    # statements
    def program(self) -> CircuitSource:
        while not self.at("eof"):
            t = self.tok
            if t.kind != "kw" or t.value not in _STATEMENTS:
                self.error("expected a statement (system, ptest, otest, test or circuit)")
            getattr(self, "stmt_" + t.value)()
        return CircuitSource(self.systems, self.tests, self.circuit)

    def stmt_system(self):
        self.take("kw", "system")
        name = self.take("ident", what="system name")
        self.punct("=")
        self.systems[name.value] = self.system_literal()

    def stmt_ptest(self):
        self._vector_test("ptest")

    def stmt_otest(self):
        self._vector_test("otest")

    def _vector_test(self, kind: str):
        self.take("kw", kind)
        name = self.take("ident", what="test name")
        self.take("kw", "on")
        system = self.system_ref()
        events = []
        self.punct("{")
        while not self.at("punct", "}"):
            label = self.label()
            if not self.maybe("="):
                self.punct(":")
            start = self.tok
            vec = self.vector()
            if len(vec) != system.dim:
                raise OptSyntaxError(
                    f"vector has {len(vec)} entries but {system} has dimension {system.dim}",
                    start.pos)
            m = QMatrix.column(vec) if kind == "ptest" else QMatrix.row(vec)
            events.append((label, m))
            self.maybe(",")
        self.punct("}")
        inp, out = (TRIVIAL, system) if kind == "ptest" else (system, TRIVIAL)
        self._declare(name, kind, inp, out, events)

    def stmt_test(self):
        self.take("kw", "test")
        name = self.take("ident", what="test name")
        self.take("kw", "on")
        inp = self.system_ref()
        self.take("arrow", what="'->'")
        out = self.system_ref()
        events = []
        self.punct("{")
        while not self.at("punct", "}"):
            label = self.label()
            if not self.maybe("="):
                self.punct(":")
            start = self.tok
            self.punct("[")
            rows = []
            while not self.at("punct", "]"):
                rows.append(self.vector())
                self.maybe(",")
            self.punct("]")
            if len(rows) != out.dim or any(len(r) != inp.dim for r in rows):
                raise OptSyntaxError(
                    f"matrix must be {out.dim}x{inp.dim} for {inp} -> {out}", start.pos)
            events.append((label, QMatrix.from_rows(rows)))
            self.maybe(",")
        self.punct("}")
        self._declare(name, "test", inp, out, events)

    def _declare(self, name: Token, kind, inp, out, events):
        if name.value in self.tests:
            raise OptNameError(f"test {name.value!r} declared twice", name.pos)
        try:
            self.tests[name.value] = (kind, Test(inp, out, events))
        except ValueError as exc:
            raise OptSyntaxError(str(exc), name.pos) from None

    def stmt_circuit(self):
        tok = self.take("kw", "circuit")
        if self.circuit is not None:
            raise OptSyntaxError("only one circuit statement is allowed", tok.pos)
        self.circuit = self.expr()

    # values
    def label(self) -> tuple:
        t = self.tok
        if t.kind in ("ident", "num", "kw"):
            self.i += 1
            if t.kind == "num" and not t.value.isdigit():
                self.error("outcome labels must be names, integers or strings", t)
            return (t.value,)
        if t.kind == "str":
            self.i += 1
            inner = t.value[1:-1]
            return tuple(inner.split(".")) if inner else ()
        self.error("expected an outcome label")

    def number(self) -> Fraction:
        t = self.take("num", what="a rational number")
        try:
            return Fraction(t.value)
        except ZeroDivisionError:
            raise OptSyntaxError(f"zero denominator in {t.value}", t.pos) from None

    def vector(self) -> list:
        self.punct("[")
        vals = []
        while not self.at("punct", "]"):
            vals.append(self.number())
            if not self.maybe(","):
                break
        self.punct("]")
        return vals

    def system_literal(self) -> SystemType:
        self.punct("[")
        dims = []
        while not self.at("punct", "]"):
            t = self.take("num", what="a factor dimension")
            if not t.value.isdigit() or int(t.value) < 1:
                raise OptSyntaxError(f"factor dimension must be a positive integer, got {t.value}", t.pos)
            dims.append(int(t.value))
            if not self.maybe(","):
                break
        self.punct("]")
        return SystemType(tuple(dims))

    def system_ref(self) -> SystemType:
        if self.at("punct", "["):
            return self.system_literal()
        t = self.take("ident", what="a system name or literal")
        if t.value not in self.systems:
            raise OptNameError(f"unknown system {t.value!r}", t.pos)
        return self.systems[t.value]

    # expressions
    def expr(self) -> Node:
        node = self.par()
        while self.at("punct", ";"):
            op = self.tok
            self.i += 1
            node = Seq(node, self.par(), pos=op.pos)
        return node

    def par(self) -> Node:
        node = self.atom()
        while self.at("punct", "|"):
            op = self.tok
            self.i += 1
            node = Par(node, self.atom(), pos=op.pos)
        return node

    def atom(self) -> Node:
        t = self.tok
        if self.maybe("("):
            node = self.expr()
            self.punct(")")
            return node
        if t.kind != "kw" or t.value not in ("id", "swap", "perm", "prep", "obs", "apply"):
            self.error("expected a circuit expression")
        self.i += 1
        self.punct("(")
        if t.value == "id":
            node = Identity(self.system_ref(), pos=t.pos)
        elif t.value == "swap":
            a = self.system_ref()
            self.punct(",")
            b = self.system_ref()
            node = Permutation(block_swap(a, b), pos=t.pos)
        elif t.value == "perm":
            s = self.system_ref()
            self.punct(",")
            node = Permutation(self.cycles(s, t), pos=t.pos)
        else:
            name = self.take("ident", what="a test name")
            if name.value not in self.tests:
                raise OptNameError(f"unknown test {name.value!r}", name.pos)
            kind, test = self.tests[name.value]
            if t.value == "prep":
                if kind != "ptest":
                    raise OptNameError(f"{name.value!r} is not a ptest", name.pos)
                node = Prep(name.value, test, pos=t.pos)
            elif t.value == "obs":
                if kind != "otest":
                    raise OptNameError(f"{name.value!r} is not an otest", name.pos)
                node = Obs(name.value, test, pos=t.pos)
            else:
                node = Gate(name.value, test, pos=t.pos)
        self.punct(")")
        return node

    def cycles(self, s: SystemType, where: Token) -> PermutationSpec:
        parts = []
        while self.at("punct", "("):
            self.i += 1
            group = []
            while self.at("num"):
                group.append(self.tok.value)
                self.i += 1
            self.punct(")")
            parts.append("(" + " ".join(group) + ")")
        if not parts:
            self.error("expected cycle notation such as (0 1)")
        try:
            return PermutationSpec(s, parse_cycles("".join(parts), len(s.factors)))
        except PermutationError as exc:
            raise OptSyntaxError(str(exc), where.pos) from None


def parse(text: str) -> CircuitSource:
    """Parse ``.opt`` text; the circuit, if any, is type checked."""
    src = _Parser(text).program()
    if src.circuit is not None:
        typecheck(src.circuit)
    return src


def load_file(path) -> CircuitSource:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# -- printer -------------------------------------------------------------

_BARE = re.compile(r"^(?:[A-Za-z_][A-Za-z0-9_']*|\d+)$")


def _fmt_label(label: tuple) -> str:
    if len(label) == 1 and _BARE.match(label[0]) and label[0] not in _KEYWORDS:
        return label[0]
    return '"' + format_label(label) + '"'


def format_system(s: SystemType) -> str:
    return str(s)


def _fmt_vec(values) -> str:
    return "[" + ", ".join(str(v) for v in values) + "]"


def format_test_decl(name: str, kind: str, test: Test) -> str:
    if kind == "ptest":
        head = f"ptest {name} on {test.output} {{"
        body = [f"  {_fmt_label(l)} = {_fmt_vec(ev.vector())}" for l, ev in test]
    elif kind == "otest":
        head = f"otest {name} on {test.input} {{"
        body = [f"  {_fmt_label(l)} = {_fmt_vec(ev.vector())}" for l, ev in test]
    else:
        head = f"test {name} on {test.input} -> {test.output} {{"
        body = [f"  {_fmt_label(l)} = [" + ", ".join(_fmt_vec(r) for r in ev.matrix.rows()) + "]"
                for l, ev in test]
    return "\n".join([head] + body + ["}"])


def format_expr(node: Node, _ctx: str = "top") -> str:
    if isinstance(node, Identity):
        return f"id({node.system})"
    if isinstance(node, Permutation):
        return f"perm({node.spec.input}, {format_cycles(node.spec.mapping)})"
    if isinstance(node, Prep):
        return f"prep({node.name})"
    if isinstance(node, Obs):
        return f"obs({node.name})"
    if isinstance(node, Gate):
        return f"apply({node.name})"
    if isinstance(node, Seq):
        text = format_expr(node.first, "seq-left") + " ; " + format_expr(node.second, "seq-right")
        return f"({text})" if _ctx in ("seq-right", "par-left", "par-right") else text
    if isinstance(node, Par):
        text = format_expr(node.top, "par-left") + " | " + format_expr(node.bottom, "par-right")
        return f"({text})" if _ctx == "par-right" else text
    raise TypeError(f"not a circuit node: {node!r}")


def format_source(src: CircuitSource) -> str:
    lines = [f"system {name} = {s}" for name, s in src.systems.items()]
    for name, (kind, test) in src.tests.items():
        lines.append(format_test_decl(name, kind, test))
    if src.circuit is not None:
        lines.append("circuit " + format_expr(src.circuit))
    return "\n".join(lines) + "\n"
