"""Formula language: AST, concrete syntax, positivity, desugaring.

The language has propositions, negation, conjunction, individual
knowledge K, group operators S/E/E^k/D/C, the interval variant Eeps/Ceps,
the eventual variant Ev/Cv, clock-indexed Kt/Et/Ct, and a greatest
fixed-point binder nu. Or, implication, and iff are surface syntax only
and parse into negation and conjunction.

Concrete syntax (full grammar in docs/grammar.ebnf)::

    ~a  a & b  a | b  a -> b  a <-> b  true
    K1 a        S{0,1} a      E{0,1} a     E^3{0,1} a    D{0,1} a
    C{0,1} a    Eeps[2]{0,1} a   Ceps[2]{0,1} a
    Ev{0,1} a   Cv{0,1} a
    Kt1[5] a    Et[5]{0,1} a  Ct[5]{0,1} a
    nu X. E{0,1}(a & X)

Negation binds tightest, then modal prefixes, then & | -> <->; a nu body
extends as far right as possible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

AgentSet = tuple[int, ...]


class FormulaError(Exception):
    pass


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PositivityError(FormulaError):
    def __init__(self, variable: str, path: str):
        super().__init__(
            f"variable {variable!r} occurs negatively at {path}; fixed-point "
            f"bodies must use their variable under an even number of negations"
        )
        self.variable = variable
        self.path = path


class Formula:
    """Base class; all nodes are frozen and hashable."""

    __slots__ = ()


def _group(agents: Iterable[int]) -> AgentSet:
    members = tuple(sorted(set(int(a) for a in agents)))
    if not members:
        raise FormulaError("agent group must be nonempty")
    return members


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class K(Formula):
    agent: int
    child: Formula


@dataclass(frozen=True)
class S(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class E(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class EPow(Formula):
    group: AgentSet
    power: int
    child: Formula

    def __post_init__(self):
        if self.power < 1:
            raise FormulaError("E^k requires k >= 1")


@dataclass(frozen=True)
class D(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class C(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class EEps(Formula):
    group: AgentSet
    eps: int
    child: Formula

    def __post_init__(self):
        if self.eps < 0:
            raise FormulaError("Eeps requires a nonnegative width")


@dataclass(frozen=True)
class CEps(Formula):
    group: AgentSet
    eps: int
    child: Formula

    def __post_init__(self):
        if self.eps < 0:
            raise FormulaError("Ceps requires a nonnegative width")


@dataclass(frozen=True)
class EDiamond(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class CDiamond(Formula):
    group: AgentSet
    child: Formula


@dataclass(frozen=True)
class KTime(Formula):
    agent: int
    stamp: int
    child: Formula

    def __post_init__(self):
        if self.stamp < 0:
            raise FormulaError("clock stamps are nonnegative")


@dataclass(frozen=True)
class ETime(Formula):
    group: AgentSet
    stamp: int
    child: Formula

    def __post_init__(self):
        if self.stamp < 0:
            raise FormulaError("clock stamps are nonnegative")


@dataclass(frozen=True)
class CTime(Formula):
    group: AgentSet
    stamp: int
    child: Formula

    def __post_init__(self):
        if self.stamp < 0:
            raise FormulaError("clock stamps are nonnegative")


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula


def neg(f: Formula) -> Formula:
    return Not(f)


def conj(*fs: Formula) -> Formula:
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def disj(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def iff(a: Formula, b: Formula) -> Formula:
    return And(implies(a, b), implies(b, a))


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<arrow2><->)|(?P<arrow>->)|(?P<sym>[~&|(){}\[\],.^])"
    r"|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)

_K_RE = re.compile(r"^K(\d+)$")
_KT_RE = re.compile(r"^Kt(\d+)$")

_GROUP_HEADS = {"S", "E", "D", "C", "Eeps", "Ceps", "Ev", "Cv", "Et", "Ct"}
_RESERVED = _GROUP_HEADS | {"nu", "true"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[at]!r}", at)
        pos = m.end()
        if m.lastgroup == "arrow2":
            tokens.append(_Token("<->", "<->", m.start("arrow2")))
        elif m.lastgroup == "arrow":
            tokens.append(_Token("->", "->", m.start("arrow")))
        elif m.lastgroup == "sym":
            tokens.append(_Token(m.group("sym"), m.group("sym"), m.start("sym")))
        elif m.lastgroup == "int":
            tokens.append(_Token("int", m.group("int"), m.start("int")))
        else:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, free_vars: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.bound: list[str] = []
        self.free_vars = free_vars

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self, kind: str | None = None) -> _Token:
        tok = self.tokens[self.i]
        if kind is not None and tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.pos)
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.iff_level()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.pos)
        return f

    def iff_level(self) -> Formula:
        f = self.implies_level()
        while self.peek().kind == "<->":
            self.take()
            f = iff(f, self.implies_level())
        return f

    def implies_level(self) -> Formula:
        f = self.or_level()
        if self.peek().kind == "->":
            self.take()
            return implies(f, self.implies_level())
        return f

    def or_level(self) -> Formula:
        f = self.and_level()
        while self.peek().kind == "|":
            self.take()
            f = disj(f, self.and_level())
        return f

    def and_level(self) -> Formula:
        f = self.unary()
        while self.peek().kind == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "~":
            self.take()
            return Not(self.unary())
        if tok.kind == "name":
            modal = self.try_modal(tok)
            if modal is not None:
                return modal
        return self.atom()

    def try_modal(self, tok: _Token) -> Formula | None:
        m = _K_RE.match(tok.text)
        if m:
            self.take()
            return K(int(m.group(1)), self.unary())
        m = _KT_RE.match(tok.text)
        if m:
            self.take()
            stamp = self.bracket_int()
            return KTime(int(m.group(1)), stamp, self.unary())
        if tok.text not in _GROUP_HEADS:
            return None
        head = tok.text
        self.take()
        if head == "E" and self.peek().kind == "^":
            self.take()
            power = int(self.take("int").text)
            group = self.group()
            return EPow(group, power, self.unary())
        if head in ("Eeps", "Ceps", "Et", "Ct"):
            param = self.bracket_int()
            group = self.group()
            child = self.unary()
            if head == "Eeps":
                return EEps(group, param, child)
            if head == "Ceps":
                return CEps(group, param, child)
            if head == "Et":
                return ETime(group, param, child)
            return CTime(group, param, child)
        group = self.group()
        child = self.unary()
        if head == "S":
            return S(group, child)
        if head == "E":
            return E(group, child)
        if head == "D":
            return D(group, child)
        if head == "C":
            return C(group, child)
        if head == "Ev":
            return EDiamond(group, child)
        return CDiamond(group, child)

    def bracket_int(self) -> int:
        self.take("[")
        value = int(self.take("int").text)
        self.take("]")
        return value

    def group(self) -> AgentSet:
        tok = self.take("{")
        members = [int(self.take("int").text)]
        while self.peek().kind == ",":
            self.take()
            members.append(int(self.take("int").text))
        self.take("}")
        try:
            return _group(members)
        except FormulaError as exc:
            raise ParseError(str(exc), tok.pos) from None

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "(":
            self.take()
            f = self.iff_level()
            self.take(")")
            return f
        if tok.kind == "name":
            name = tok.text
            if name == "true":
                self.take()
                return TrueConst()
            if name == "nu":
                self.take()
                var = self.take("name").text
                if var in _RESERVED or _K_RE.match(var) or _KT_RE.match(var):
                    raise ParseError(f"{var!r} is reserved and cannot bind", tok.pos)
                self.take(".")
                self.bound.append(var)
                try:
                    body = self.iff_level()
                finally:
                    self.bound.pop()
                return Nu(var, body)
            if name in _RESERVED:
                raise ParseError(f"{name!r} is reserved", tok.pos)
            self.take()
            if name in self.bound or name in self.free_vars:
                return Var(name)
            return Prop(name)
        raise ParseError(
            f"expected a formula, found {tok.text or 'end of input'!r}", tok.pos
        )


def parse(text: str, free_vars: Iterable[str] = ()) -> Formula:
    """Parse concrete syntax into an AST.

    Identifiers bound by an enclosing ``nu`` (or listed in ``free_vars``)
    become variables; every other identifier is a proposition.
    """
    return _Parser(text, frozenset(free_vars)).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC_NU = 0
_PREC_AND = 2
_PREC_UNARY = 3
_PREC_ATOM = 4


def _fmt_group(group: AgentSet) -> str:
    return "{" + ",".join(str(a) for a in group) + "}"


def _render(f: Formula) -> tuple[str, int]:
    if isinstance(f, Prop) or isinstance(f, Var):
        return f.name, _PREC_ATOM
    if isinstance(f, TrueConst):
        return "true", _PREC_ATOM
    if isinstance(f, Not):
        return "~" + _child(f.child, _PREC_UNARY), _PREC_UNARY
    if isinstance(f, And):
        left = _child(f.left, _PREC_AND)
        right = _child(f.right, _PREC_AND + 1)
        return f"{left} & {right}", _PREC_AND
    if isinstance(f, Nu):
        body, _ = _render(f.body)
        return f"nu {f.var}. {body}", _PREC_NU
    head = _modal_head(f)
    if head is not None:
        return head + " " + _child(f.child, _PREC_UNARY), _PREC_UNARY
    raise FormulaError(f"cannot print {type(f).__name__}")


def _modal_head(f: Formula) -> str | None:
    if isinstance(f, K):
        return f"K{f.agent}"
    if isinstance(f, KTime):
        return f"Kt{f.agent}[{f.stamp}]"
    if isinstance(f, S):
        return "S" + _fmt_group(f.group)
    if isinstance(f, E):
        return "E" + _fmt_group(f.group)
    if isinstance(f, EPow):
        return f"E^{f.power}" + _fmt_group(f.group)
    if isinstance(f, D):
        return "D" + _fmt_group(f.group)
    if isinstance(f, C):
        return "C" + _fmt_group(f.group)
    if isinstance(f, EEps):
        return f"Eeps[{f.eps}]" + _fmt_group(f.group)
    if isinstance(f, CEps):
        return f"Ceps[{f.eps}]" + _fmt_group(f.group)
    if isinstance(f, EDiamond):
        return "Ev" + _fmt_group(f.group)
    if isinstance(f, CDiamond):
        return "Cv" + _fmt_group(f.group)
    if isinstance(f, ETime):
        return f"Et[{f.stamp}]" + _fmt_group(f.group)
    if isinstance(f, CTime):
        return f"Ct[{f.stamp}]" + _fmt_group(f.group)
    return None


def _child(f: Formula, min_prec: int) -> str:
    text, prec = _render(f)
    if prec < min_prec:
        return f"({text})"
    return text


def print_formula(f: Formula) -> str:
    """Deterministic pretty-printer; ``parse(print_formula(f)) == f``."""
    return _render(f)[0]


# ---------------------------------------------------------------------------
# Structure queries

def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Prop, TrueConst, Var)):
        return ()
    if isinstance(f, And):
        return (f.left, f.right)
    if isinstance(f, Nu):
        return (f.body,)
    return (f.child,)  # type: ignore[attr-defined]


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def free_variables(f: Formula) -> frozenset[str]:
    if isinstance(f, Var):
        return frozenset([f.name])
    if isinstance(f, Nu):
        return free_variables(f.body) - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_variables(c)
    return out


def agents_mentioned(f: Formula) -> frozenset[int]:
    out: set[int] = set()
    for node in walk(f):
        if isinstance(node, (K, KTime)):
            out.add(node.agent)
        group = getattr(node, "group", None)
        if group is not None:
            out.update(group)
    return frozenset(out)


def props_mentioned(f: Formula) -> frozenset[str]:
    return frozenset(node.name for node in walk(f) if isinstance(node, Prop))


# ---------------------------------------------------------------------------
# Positivity

def find_negative_occurrence(f: Formula) -> tuple[str, str] | None:
    """First nu-bound variable occurring under an odd number of negations.

    Returns (variable, path) or None. The path walks from the offending
    nu binder down to the occurrence.
    """

    def scan(node: Formula, tracked: str, positive: bool, path: str) -> tuple[str, str] | None:
        if isinstance(node, Var):
            if node.name == tracked and not positive:
                return (tracked, path)
            return None
        if isinstance(node, Nu) and node.var == tracked:
            return None  # rebinding shadows the outer variable
        if isinstance(node, Not):
            return scan(node.child, tracked, not positive, path + ".~")
        if isinstance(node, And):
            hit = scan(node.left, tracked, positive, path + ".&L")
            if hit:
                return hit
            return scan(node.right, tracked, positive, path + ".&R")
        if isinstance(node, Nu):
            return scan(node.body, tracked, positive, path + f".nu {node.var}")
        kids = children(node)
        if not kids:
            return None
        return scan(kids[0], tracked, positive, path + f".{type(node).__name__}")

    for node in walk(f):
        if isinstance(node, Nu):
            hit = scan(node.body, node.var, True, f"nu {node.var}")
            if hit:
                return hit
    return None


def check_positivity(f: Formula) -> None:
    """Raise PositivityError unless every nu body is positive in its variable."""
    hit = find_negative_occurrence(f)
    if hit is not None:
        raise PositivityError(hit[0], hit[1])


# ---------------------------------------------------------------------------
# Desugaring

class _FreshNames:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self) -> str:
        while True:
            name = f"X{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


def expand_fixpoints(f: Formula) -> Formula:
    """Rewrite derived operators into the kernel language.

    C, Ceps, Cv, and Ct become explicit nu forms over E, Eeps, Ev, and Et
    with fresh variables; E^k unrolls to k nested E; S becomes a
    disjunction of individual knowledge. The output evaluates to the same
    point set as the input on every model.
    """
    taken = {node.name for node in walk(f) if isinstance(node, Var)}
    taken |= {node.var for node in walk(f) if isinstance(node, Nu)}
    names = _FreshNames(taken)

    def go(node: Formula) -> Formula:
        if isinstance(node, (Prop, TrueConst, Var)):
            return node
        if isinstance(node, Not):
            return Not(go(node.child))
        if isinstance(node, And):
            return And(go(node.left), go(node.right))
        if isinstance(node, Nu):
            return Nu(node.var, go(node.body))
        if isinstance(node, K):
            return K(node.agent, go(node.child))
        if isinstance(node, KTime):
            return KTime(node.agent, node.stamp, go(node.child))
        if isinstance(node, E):
            return E(node.group, go(node.child))
        if isinstance(node, D):
            return D(node.group, go(node.child))
        if isinstance(node, EEps):
            return EEps(node.group, node.eps, go(node.child))
        if isinstance(node, EDiamond):
            return EDiamond(node.group, go(node.child))
        if isinstance(node, ETime):
            return ETime(node.group, node.stamp, go(node.child))
        if isinstance(node, S):
            child = go(node.child)
            out: Formula = K(node.group[0], child)
            for agent in node.group[1:]:
                out = disj(out, K(agent, child))
            return out
        if isinstance(node, EPow):
            out = go(node.child)
            for _ in range(node.power):
                out = E(node.group, out)
            return out
        if isinstance(node, C):
            x = names.fresh()
            return Nu(x, E(node.group, And(go(node.child), Var(x))))
        if isinstance(node, CEps):
            x = names.fresh()
            return Nu(x, EEps(node.group, node.eps, And(go(node.child), Var(x))))
        if isinstance(node, CDiamond):
            x = names.fresh()
            return Nu(x, EDiamond(node.group, And(go(node.child), Var(x))))
        if isinstance(node, CTime):
            x = names.fresh()
            return Nu(x, ETime(node.group, node.stamp, And(go(node.child), Var(x))))
        raise FormulaError(f"cannot expand {type(node).__name__}")

    return go(f)
