"""Syntax trees and text format for weighted first-order knowledge bases.

Grammar (loosest to tightest binding)::

    formula   := implies
    implies   := disj [ "->" ["@" num] implies ]
    disj      := conj { "|" ["@" num] conj }
    conj      := operand { "&" ["@" num] operand }
    operand   := unary [ "^" num ]
    unary     := "~" unary | quant | primary
    quant     := ("forall" | "exists") ident { ident } "." formula
    primary   := atom | "(" formula ")"
    atom      := Name [ "(" term { "," term } ")" ]

Identifiers bound by an enclosing quantifier are variables.  Outside a
quantifier an identifier is a constant if it is in the known constant set,
otherwise a free variable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .semantics import Bounds


class ParseError(ValueError):
    """Raised for malformed formula or knowledge-base text."""

    def __init__(self, message: str, position: int | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"col {position}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.message = message
        self.position = position
        self.line = line


# --------------------------------------------------------------------------
# Terms and formula nodes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Const]


@dataclass(frozen=True)
class Atom:
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]
    weights: tuple[float, ...]
    bias: float = 1.0


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]
    weights: tuple[float, ...]
    bias: float = 1.0


@dataclass(frozen=True)
class Implies:
    antecedent: "Formula"
    consequent: "Formula"
    weights: tuple[float, float] = (1.0, 1.0)
    bias: float = 1.0

    @property
    def children(self) -> tuple["Formula", "Formula"]:
        return (self.antecedent, self.consequent)


@dataclass(frozen=True)
class ForAll:
    vars: tuple[str, ...]
    child: "Formula"


@dataclass(frozen=True)
class Exists:
    vars: tuple[str, ...]
    child: "Formula"


Formula = Union[Atom, Not, And, Or, Implies, ForAll, Exists]
Connective = (And, Or, Implies)
Quantifier = (ForAll, Exists)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, (Not, ForAll, Exists)):
        return (f.child,)
    return tuple(f.children)


def free_vars(f: Formula) -> tuple[str, ...]:
    """Free variables in order of first occurrence."""
    out: list[str] = []

    def visit(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Atom):
            for t in g.args:
                if isinstance(t, Var) and t.name not in bound and t.name not in out:
                    out.append(t.name)
        elif isinstance(g, Quantifier):
            visit(g.child, bound | set(g.vars))
        else:
            for c in children(g):
                visit(c, bound)

    visit(f, frozenset())
    return tuple(out)


def atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    for c in children(f):
        yield from atoms(c)


def _check_params(weights: Iterable[float], bias: float) -> None:
    for w in (*weights, bias):
        if not math.isfinite(w) or w < 0:
            raise ValueError(f"weights and bias must be finite and nonnegative, got {w}")


# --------------------------------------------------------------------------
# Tokenizer
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
      | (?P<op>->|[~&|^@().,])
    )""",
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, constants: frozenset[str], binary: bool):
        self.toks = _tokenize(text)
        self.i = 0
        self.constants = constants
        self.binary = binary
        self.bound: list[str] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str | None = None, text: str | None = None) -> _Tok:
        t = self.tok
        if (kind and t.kind != kind) or (text and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", t.pos)
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def number(self) -> float:
        return float(self.take("num").text)

    def bias(self) -> float | None:
        return self.number() if self.accept("@") else None

    def parse(self) -> Formula:
        f = self.unweighted(self.implies)
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return f

    def unweighted(self, sub) -> Formula:
        pos = self.tok.pos
        f, w = sub()
        if w is not None:
            raise ParseError("operand weight outside a weighted connective", pos)
        return f

    # each level returns (formula, weight written on it or None)
    def implies(self) -> tuple[Formula, float | None]:
        left = self.disj()
        if not self.accept("->"):
            return left
        b = self.bias()
        right = self.implies()
        w = (_w(left[1]), _w(right[1]))
        bias = 1.0 if b is None else b
        _check_params(w, bias)
        return Implies(left[0], right[0], w, bias), None

    def chain(self, op: str, sub, node) -> tuple[Formula, float | None]:
        items = [sub()]
        bias: float | None = None
        while True:
            pos = self.tok.pos
            if not self.accept(op):
                break
            b = self.bias()
            if b is not None:
                if bias is not None and b != bias:
                    raise ParseError(f"conflicting bias annotations on {op!r} chain", pos)
                bias = b
            items.append(sub())
        if len(items) == 1:
            return items[0]
        bias_v = 1.0 if bias is None else bias
        ws = [_w(w) for _, w in items]
        _check_params(ws, bias_v)
        if self.binary:
            acc = node((items[0][0], items[1][0]), (ws[0], ws[1]), bias_v)
            for (f, _), w in zip(items[2:], ws[2:]):
                acc = node((acc, f), (1.0, w), bias_v)
            return acc, None
        return node(tuple(f for f, _ in items), tuple(ws), bias_v), None

    def disj(self) -> tuple[Formula, float | None]:
        return self.chain("|", self.conj, Or)

    def conj(self) -> tuple[Formula, float | None]:
        return self.chain("&", self.operand, And)

    def operand(self) -> tuple[Formula, float | None]:
        f = self.unary()
        return f, (self.number() if self.accept("^") else None)

    def unary(self) -> Formula:
        if self.accept("~"):
            return Not(self.unary())
        if self.tok.kind == "ident" and self.tok.text in ("forall", "exists"):
            kind = self.take().text
            names: list[str] = []
            while self.tok.kind == "ident":
                names.append(self.take().text)
            if not names:
                raise ParseError("quantifier needs at least one variable", self.tok.pos)
            self.take("op", ".")
            self.bound.extend(names)
            body = self.unweighted(self.implies)
            del self.bound[-len(names):]
            missing = sorted(set(names) - _body_vars(body))
            if missing:
                raise ParseError(f"quantified variable(s) {missing} do not occur in the body", self.tok.pos)
            cls = ForAll if kind == "forall" else Exists
            return cls(tuple(names), body)
        return self.primary()

    def primary(self) -> Formula:
        if self.accept("("):
            f = self.unweighted(self.implies)
            self.take("op", ")")
            return f
        name = self.take("ident").text
        if name in ("forall", "exists"):
            raise ParseError("misplaced quantifier", self.tok.pos)
        args: list[Term] = []
        if self.accept("("):
            if not self.accept(")"):
                while True:
                    t = self.take("ident").text
                    if t in self.bound or t not in self.constants:
                        args.append(Var(t))
                    else:
                        args.append(Const(t))
                    if self.accept(")"):
                        break
                    self.take("op", ",")
        return Atom(name, tuple(args))


def _w(w: float | None) -> float:
    return 1.0 if w is None else w


def _body_vars(f: Formula) -> set[str]:
    return {t.name for a in atoms(f) for t in a.args if isinstance(t, Var)}


def parse_formula(
    text: str,
    constants: Iterable[str] = (),
    *,
    binary: bool = False,
    closed: bool = False,
) -> Formula:
    """Parse formula text into a syntax tree.

    ``binary=True`` decomposes n-ary conjunctions/disjunctions into nested
    binary nodes. ``closed=True`` rejects free variables.
    """
    f = _Parser(text, frozenset(constants), binary).parse()
    if closed and free_vars(f):
        raise ParseError(f"unbound variable(s) {list(free_vars(f))} outside a quantifier")
    return f


# --------------------------------------------------------------------------
# Formatter
# --------------------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4, Atom: 5}


def _num(x: float) -> str:
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def format_formula(f: Formula) -> str:
    """Render a formula in the text grammar; ``parse_formula`` inverts it."""

    def operand(g: Formula, w: float, min_prec: int) -> str:
        if w == 1.0:
            return render(g, min_prec)
        # "^" binds to a unary operand, so connectives need parentheses
        return f"{render(g, _PREC[Not])}^{_num(w)}"

    def render(g: Formula, min_prec: int) -> str:
        if isinstance(g, Atom):
            return g.name if not g.args else f"{g.name}({','.join(map(str, g.args))})"
        if isinstance(g, Quantifier):
            kw = "forall" if isinstance(g, ForAll) else "exists"
            s = f"{kw} {' '.join(g.vars)}. {render(g.child, 0)}"
            return f"({s})" if min_prec > 0 else s
        if isinstance(g, Not):
            return "~" + render(g.child, _PREC[Not])
        prec = _PREC[type(g)]
        bias = "" if g.bias == 1.0 else f"@{_num(g.bias)}"
        if isinstance(g, Implies):
            left = operand(g.antecedent, g.weights[0], prec + 1)
            right = operand(g.consequent, g.weights[1], prec)
            s = f"{left} ->{bias} {right}"
        else:
            sym = "&" if isinstance(g, And) else "|"
            # nested same-kind nodes would be flattened, so they get parentheses
            parts = [operand(c, w, prec + 1) for c, w in zip(g.children, g.weights)]
            s = f" {sym}{bias} ".join(parts)
        return f"({s})" if prec < min_prec else s

    return render(f, 0)


# --------------------------------------------------------------------------
# Knowledge bases
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Axiom:
    id: str
    formula: Formula
    bounds: Bounds = Bounds(1.0, 1.0)


@dataclass(frozen=True)
class Query:
    id: str
    formula: Formula
    bindings: tuple[tuple[str, str], ...] = ()


@dataclass
class KnowledgeBase:
    predicates: dict[str, int] = field(default_factory=dict)
    constants: list[str] = field(default_factory=list)
    axioms: list[Axiom] = field(default_factory=list)
    facts: dict[tuple[str, tuple[str, ...]], Bounds] = field(default_factory=dict)
    queries: list[Query] = field(default_factory=list)

    def declare(self, name: str, arity: int, line: int | None = None) -> None:
        old = self.predicates.get(name)
        if old is not None and old != arity:
            raise ParseError(f"predicate {name} used with arity {arity}, declared {old}", line=line)
        self.predicates[name] = arity

    def add_constant(self, name: str) -> None:
        if name not in self.constants:
            self.constants.append(name)

    def add_fact(self, pred: str, args: tuple[str, ...], b: Bounds) -> None:
        key = (pred, tuple(args))
        old = self.facts.get(key)
        self.facts[key] = b if old is None else Bounds(max(old.lower, b.lower), min(old.upper, b.upper))

    def query(self, qid: str) -> Query:
        for q in self.queries:
            if q.id == qid:
                return q
        raise KeyError(f"no query {qid!r}")


_BOUNDS = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]\s*$")
_LINE = re.compile(r"^(pred|const|axiom|fact|query)\b\s*(.*)$")


def _parse_bounds(text: str, line: int) -> Bounds:
    m = _BOUNDS.match(text.strip())
    if not m:
        raise ParseError(f"malformed bounds {text.strip()!r}", line=line)
    try:
        lo, hi = float(m.group(1)), float(m.group(2))
    except ValueError as e:
        raise ParseError(f"malformed bounds {text.strip()!r}", line=line) from e
    if not (0.0 <= lo <= hi <= 1.0):
        raise ParseError(f"bounds must satisfy 0 <= L <= U <= 1, got [{lo},{hi}]", line=line)
    return Bounds(lo, hi)


def _split_annotation(rest: str) -> tuple[str, str | None]:
    """Split ``formula : [L,U]`` into its two parts."""
    m = re.search(r":\s*(\[[^\]]*\])\s*$", rest)
    if m:
        return rest[: m.start()].strip(), m.group(1)
    return rest.strip(), None


def _head(rest: str, line: int) -> tuple[str, str]:
    if ":" not in rest:
        raise ParseError("expected '<id> : ...'", line=line)
    ident, body = rest.split(":", 1)
    ident = ident.strip()
    if not re.fullmatch(r"[A-Za-z0-9_.'-]+", ident):
        raise ParseError(f"bad identifier {ident!r}", line=line)
    return ident, body.strip()


def _declare_atoms(kb: KnowledgeBase, f: Formula, line: int) -> None:
    for a in atoms(f):
        if a.name not in kb.predicates:
            kb.declare(a.name, len(a.args), line)
        elif kb.predicates[a.name] != len(a.args):
            raise ParseError(
                f"arity mismatch: {a.name} takes {kb.predicates[a.name]} argument(s), got {len(a.args)}",
                line=line,
            )


def parse_kb(text: str, *, binary: bool = False, closed: bool = False) -> KnowledgeBase:
    """Parse a line-oriented knowledge base.

    Predicates used without a ``pred`` line are declared on first use.
    Constants are the declared ones plus every constant named by a fact.
    """
    kb = KnowledgeBase()
    lines = []
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        m = _LINE.match(s)
        if not m:
            raise ParseError(f"unknown statement {s.split()[0]!r}", line=n)
        lines.append((n, m.group(1), m.group(2).strip()))

    # declarations and facts first so constants are known while parsing formulas
    for n, kind, rest in lines:
        if kind == "pred":
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_']*)\s*/\s*(\d+)", rest)
            if not m:
                raise ParseError(f"malformed predicate declaration {rest!r}", line=n)
            kb.declare(m.group(1), int(m.group(2)), n)
        elif kind == "const":
            for c in rest.replace(",", " ").split():
                kb.add_constant(c)
        elif kind == "fact":
            body, ann = _split_annotation(rest)
            if ann is None:
                raise ParseError("fact needs bounds ': [L,U]'", line=n)
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_']*)\s*(?:\((.*)\))?", body)
            if not m:
                raise ParseError(f"malformed fact {body!r}", line=n)
            args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
            if any(not re.fullmatch(r"[A-Za-z0-9_']+", a) for a in args):
                raise ParseError(f"malformed fact arguments {body!r}", line=n)
            if m.group(1) not in kb.predicates:
                kb.declare(m.group(1), len(args), n)
            if kb.predicates[m.group(1)] != len(args):
                raise ParseError(f"arity mismatch for fact {body!r}", line=n)
            for a in args:
                kb.add_constant(a)
            kb.add_fact(m.group(1), args, _parse_bounds(ann, n))

    consts = frozenset(kb.constants)
    ids: set[str] = set()
    for n, kind, rest in lines:
        if kind not in ("axiom", "query"):
            continue
        ident, body = _head(rest, n)
        if (kind, ident) in ids:
            raise ParseError(f"duplicate {kind} id {ident!r}", line=n)
        ids.add((kind, ident))
        body, ann = _split_annotation(body)
        try:
            f = parse_formula(body, consts, binary=binary, closed=closed and kind == "axiom")
        except ParseError as e:
            raise ParseError(e.message, e.position, n) from None
        _declare_atoms(kb, f, n)
        if kind == "axiom":
            kb.axioms.append(Axiom(ident, f, _parse_bounds(ann, n) if ann else Bounds(1.0, 1.0)))
        else:
            if ann is not None:
                raise ParseError("queries take no bounds", line=n)
            kb.queries.append(Query(ident, f))
    return kb


def format_kb(kb: KnowledgeBase) -> str:
    out = [f"pred {p}/{a}" for p, a in kb.predicates.items()]
    if kb.constants:
        out.append("const " + " ".join(kb.constants))
    for ax in kb.axioms:
        b = ax.bounds
        ann = "" if (b.lower, b.upper) == (1.0, 1.0) else f" : [{_num(b.lower)},{_num(b.upper)}]"
        out.append(f"axiom {ax.id} : {format_formula(ax.formula)}{ann}")
    for (p, args), b in kb.facts.items():
        atom = p if not args else f"{p}({','.join(args)})"
        out.append(f"fact {atom} : [{_num(b.lower)},{_num(b.upper)}]")
    for q in kb.queries:
        out.append(f"query {q.id} : {format_formula(q.formula)}")
    return "\n".join(out) + "\n"
