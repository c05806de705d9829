"""Neuron graph: one node per connective occurrence, one shared node per predicate.

Bounds live in each node's :class:`GroundingTable`.  Axioms and facts are
*assertions*: bounds (possibly trainable) that every reset writes onto a set
of rows before inference starts.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import tape
from .fol import BoundFormula, GroundingTable, Key, VariableMap, propagate_groundings
from .formula import (
    And,
    Atom,
    Exists,
    ForAll,
    Formula,
    Implies,
    KnowledgeBase,
    Not,
    Or,
    Query,
    Var,
    format_formula,
)
from .semantics import FAMILIES, Bounds, ConnectiveParams

CONNECTIVES = ("and", "or", "implies")
QUANTIFIERS = ("forall", "exists")


class TruthState(str, enum.Enum):
    UNKNOWN = "Unknown"
    TRUE = "True"
    FALSE = "False"
    CONTRADICTION = "Contradiction"
    APPROX_UNKNOWN = "~Unknown"
    APPROX_TRUE = "~True"
    APPROX_FALSE = "~False"

    def __str__(self) -> str:
        return self.value


def classify(bounds: Bounds | Sequence[float], alpha: float = 1.0) -> TruthState:
    lo, hi = bounds
    if lo > hi:
        return TruthState.CONTRADICTION
    if lo >= alpha:
        return TruthState.TRUE
    if hi <= 1.0 - alpha:
        return TruthState.FALSE
    if lo <= 1.0 - alpha and hi >= alpha:
        return TruthState.UNKNOWN
    if lo > 0.5:
        return TruthState.APPROX_TRUE
    if hi < 0.5:
        return TruthState.APPROX_FALSE
    return TruthState.APPROX_UNKNOWN


def intra_classical(lower: np.ndarray, upper: np.ndarray, alpha: float) -> np.ndarray:
    """Crossed bounds lying entirely on one classical side."""
    crossed = lower > upper
    return crossed & (((lower >= alpha) & (upper >= alpha)) | ((lower <= 1 - alpha) & (upper <= 1 - alpha)))


def aggregate(old: Bounds, new: Bounds) -> Bounds:
    """Tighten: max of lowers, min of uppers.  Crossing is kept, never repaired."""
    return Bounds(max(old.lower, new.lower), min(old.upper, new.upper))


@dataclass
class Node:
    id: int
    kind: str
    label: str
    vars: tuple[str, ...]
    edges: list[VariableMap] = field(default_factory=list)
    params: ConnectiveParams | None = None
    qvars: tuple[str, ...] = ()
    ground: bool = False  # quantifier over explicit operands instead of a variable
    table: GroundingTable = None  # type: ignore[assignment]
    w: tape.Tensor | None = None
    b: tape.Tensor | None = None
    version: int = 0
    # filled by NeuronGraph.finalize
    child_rows: list[np.ndarray] = field(default_factory=list)
    members: np.ndarray | None = None
    groups: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.table is None:
            self.table = GroundingTable(self.vars)

    @property
    def L(self) -> tape.Tensor:
        return self.table.L

    @property
    def U(self) -> tape.Tensor:
        return self.table.U

    def set_bounds(self, lower: tape.Tensor, upper: tape.Tensor) -> None:
        self.table.L, self.table.U = lower, upper


@dataclass
class Root:
    kind: str  # "axiom" or "query"
    id: str
    view: VariableMap
    bounds: Bounds | None = None
    expand: bool = True
    bindings: tuple[tuple[str, str], ...] = ()
    constants: tuple[str, ...] = ()
    text: str = ""


@dataclass
class Assertion:
    kind: str  # "fact" or "axiom"
    name: str
    node: int
    rows: np.ndarray
    keys: list[Key]
    L: tape.Tensor
    U: tape.Tensor
    initial: tuple[np.ndarray, np.ndarray] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.initial is None:
            self.initial = (np.array(self.L.value, dtype=float), np.array(self.U.value, dtype=float))


class NeuronGraph:
    def __init__(self, family: str = "lukasiewicz", alpha: float = 1.0, constants: Iterable[str] = ()):
        if family not in FAMILIES:
            raise ValueError(f"unknown semantics {family!r}; expected one of {FAMILIES}")
        self.family = family
        self.alpha = float(alpha)
        self.nodes: list[Node] = []
        self.atom_index: dict[str, int] = {}
        self.roots: list[Root] = []
        self.constants: list[str] = list(constants)
        self.facts: dict[tuple[str, Key], Bounds] = {}
        self.assertions: list[Assertion] = []
        self.finalized = False

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def add_atom(self, name: str, arity: int = 0) -> int:
        if name in self.atom_index:
            node = self.nodes[self.atom_index[name]]
            if len(node.vars) != arity:
                raise ValueError(f"predicate {name} has arity {len(node.vars)}, not {arity}")
            return node.id
        node = Node(len(self.nodes), "atom", name, tuple(f"_{i}" for i in range(arity)))
        self.nodes.append(node)
        self.atom_index[name] = node.id
        return node.id

    def add_node(
        self,
        kind: str,
        edges: Sequence[VariableMap],
        *,
        weights: Sequence[float] | None = None,
        bias: float = 1.0,
        qvars: Sequence[str] = (),
        label: str = "",
    ) -> int:
        """Add a connective (``not``/``and``/``or``/``implies``) or quantifier node.

        A quantifier with empty ``qvars`` and several operands reduces over
        those operands directly (a fully grounded quantifier).
        """
        edges = list(edges)
        if kind in QUANTIFIERS:
            ground = not qvars
            if ground:
                if any(e.view_vars for e in edges):
                    raise ValueError("grounded quantifier operands must be propositional")
                variables: tuple[str, ...] = ()
            else:
                if len(edges) != 1:
                    raise ValueError("quantifier takes one operand")
                variables = tuple(v for v in edges[0].view_vars if v not in qvars)
            node = Node(len(self.nodes), kind, label or kind, variables, edges, qvars=tuple(qvars), ground=ground)
        elif kind == "not" or kind in CONNECTIVES:
            if kind == "not" and len(edges) != 1:
                raise ValueError("negation takes one operand")
            if kind == "implies" and len(edges) != 2:
                raise ValueError("implication takes two operands")
            variables = []
            for e in edges:
                variables += [v for v in e.view_vars if v not in variables]
            node = Node(len(self.nodes), kind, label or kind, tuple(variables), edges)
            if kind in CONNECTIVES:
                w = tuple(float(x) for x in (weights if weights is not None else [1.0] * len(edges)))
                if len(w) != len(edges):
                    raise ValueError("one weight per operand required")
                node.params = ConnectiveParams(w, float(bias), self.alpha, self.family)
                node.w = tape.Tensor(np.array(w))
                node.b = tape.Tensor(np.array(float(bias)))
        else:
            raise ValueError(f"unknown node kind {kind!r}")
        self.nodes.append(node)
        return node.id

    def add_formula(self, f: Formula) -> VariableMap:
        """Compile a formula tree; returns the view of its top node."""
        if isinstance(f, Atom):
            nid = self.add_atom(f.name, len(f.args))
            return VariableMap.for_args(nid, [(t.name, isinstance(t, Var)) for t in f.args])
        if isinstance(f, Not):
            nid = self.add_node("not", [self.add_formula(f.child)], label=format_formula(f))
        elif isinstance(f, (And, Or, Implies)):
            kind = {And: "and", Or: "or", Implies: "implies"}[type(f)]
            edges = [self.add_formula(c) for c in f.children]
            nid = self.add_node(kind, edges, weights=f.weights, bias=f.bias, label=format_formula(f))
        elif isinstance(f, (ForAll, Exists)):
            kind = "forall" if isinstance(f, ForAll) else "exists"
            nid = self.add_node(kind, [self.add_formula(f.child)], qvars=f.vars, label=format_formula(f))
        else:
            raise TypeError(f"not a formula: {f!r}")
        return VariableMap.identity(nid, self.nodes[nid].vars)

    def add_axiom(self, ident: str, f: Formula | VariableMap, bounds: Bounds = Bounds(1.0, 1.0)) -> Root:
        view = f if isinstance(f, VariableMap) else self.add_formula(f)
        text = "" if isinstance(f, VariableMap) else format_formula(f)
        root = Root("axiom", ident, view, bounds, expand=True, text=text)
        self.roots.append(root)
        return root

    def add_query(self, ident: str, f: Formula | BoundFormula | Query | VariableMap) -> Root:
        bindings: tuple[tuple[str, str], ...] = ()
        if isinstance(f, (BoundFormula, Query)):
            bindings, f = tuple(f.bindings), f.formula
        view = f if isinstance(f, VariableMap) else self.add_formula(f)
        consts = () if isinstance(f, VariableMap) else tuple(_constants(f))
        text = "" if isinstance(f, VariableMap) else format_formula(f)
        root = Root("query", ident, view, None, expand=False, bindings=bindings, constants=consts, text=text)
        self.roots.append(root)
        return root

    def add_fact(self, pred: str, args: Key, bounds: Bounds) -> None:
        nid = self.add_atom(pred, len(args))
        key = (pred, tuple(args))
        old = self.facts.get(key)
        self.facts[key] = bounds if old is None else aggregate(old, bounds)
        self.nodes[nid].table.add(tuple(args))
        for c in args:
            if c not in self.constants:
                self.constants.append(c)

    def fact_keys(self) -> list[tuple[str, Key]]:
        return list(self.facts)

    def topological(self) -> list[int]:
        """Node ids with operands before parents."""
        order: list[int] = []
        seen: set[int] = set()

        def visit(n: int) -> None:
            if n in seen:
                return
            seen.add(n)
            for e in self.nodes[n].edges:
                visit(e.child)
            order.append(n)

        for n in range(len(self.nodes)):
            visit(n)
        return order

    # ------------------------------------------------------------------
    # groundings and assertions
    # ------------------------------------------------------------------

    def ground(self, guided: bool = False) -> None:
        """Materialise groundings, then freeze row indices and build assertions."""
        propagate_groundings(self, guided=guided)
        self.finalize()

    def finalize(self) -> None:
        for node in self.nodes:
            node.child_rows = []
            if node.kind in QUANTIFIERS and not node.ground:
                e = node.edges[0]
                child = self.nodes[e.child]
                pos = [e.view_vars.index(v) for v in node.vars]
                members, groups = [], []
                for r, key in enumerate(child.table.keys):
                    view = e.to_view(key)
                    if view is None:
                        continue
                    g = node.table.index.get(tuple(view[p] for p in pos))
                    if g is not None:
                        members.append(r)
                        groups.append(g)
                node.members = np.array(members, dtype=np.int64)
                node.groups = np.array(groups, dtype=np.int64)
                continue
            for e in node.edges:
                child = self.nodes[e.child]
                pos = [node.vars.index(v) for v in e.view_vars]
                rows = [child.table.index[e.to_child(tuple(k[p] for p in pos))] for k in node.table.keys]
                node.child_rows.append(np.array(rows, dtype=np.int64))

        self.assertions = []
        by_pred: dict[str, list[tuple[Key, Bounds]]] = {}
        for (pred, args), b in self.facts.items():
            by_pred.setdefault(pred, []).append((args, b))
        for pred, items in by_pred.items():
            node = self.nodes[self.atom_index[pred]]
            keys = [k for k, _ in items]
            self.assertions.append(Assertion(
                "fact", pred, node.id, np.array([node.table.index[k] for k in keys], dtype=np.int64), keys,
                tape.Tensor(np.array([b.lower for _, b in items])), tape.Tensor(np.array([b.upper for _, b in items])),
            ))
        for r in self.roots:
            if r.kind != "axiom":
                continue
            rows, keys = self.root_rows(r)
            self.assertions.append(Assertion(
                "axiom", r.id, r.view.child, np.array(rows, dtype=np.int64), keys,
                tape.Tensor(np.array(r.bounds.lower)), tape.Tensor(np.array(r.bounds.upper)),
            ))
        self.finalized = True
        self.reset()

    def root_rows(self, root: Root) -> tuple[list[int], list[Key]]:
        """Rows of the root node covered by the root's view, in view-key form."""
        node = self.nodes[root.view.child]
        fixed = dict(root.bindings)
        rows, keys = [], []
        for i, k in enumerate(node.table.keys):
            view = root.view.to_view(k)
            if view is None:
                continue
            if any(view[root.view.view_vars.index(v)] != c for v, c in fixed.items() if v in root.view.view_vars):
                continue
            rows.append(i)
            keys.append(view)
        return rows, keys

    def reset(self) -> None:
        """All rows back to (0, 1), then every assertion aggregated in."""
        for node in self.nodes:
            node.table.clear_bounds()
            node.version += 1
        for a in self.assertions:
            node = self.nodes[a.node]
            n = len(a.rows)
            lo = a.L if a.L.value.ndim else tape.expand(a.L, n)
            hi = a.U if a.U.value.ndim else tape.expand(a.U, n)
            node.set_bounds(tape.scatter_max(node.L, a.rows, lo), tape.scatter_min(node.U, a.rows, hi))

    def parameters(self) -> list[tape.Tensor]:
        out = [t for n in self.nodes for t in (n.w, n.b) if t is not None]
        return out + [t for a in self.assertions for t in (a.L, a.U)]

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, ref: int | str) -> Node:
        if isinstance(ref, str):
            if ref in self.atom_index:
                return self.nodes[self.atom_index[ref]]
            return self.nodes[self.root(ref).view.child]
        return self.nodes[ref]

    def root(self, ident: str) -> Root:
        for r in self.roots:
            if r.id == ident:
                return r
        raise KeyError(f"no axiom or query {ident!r}")

    def bounds(self, ref: int | str, key: Iterable[str] = ()) -> Bounds:
        return self.node(ref).table.get(tuple(key))

    def atom(self, pred: str, *args: str) -> Bounds:
        return self.nodes[self.atom_index[pred]].table.get(tuple(args))

    def answer(self, ident: str) -> dict[Key, Bounds]:
        """Bounds of a root per view tuple (bindings applied)."""
        r = self.root(ident)
        node = self.nodes[r.view.child]
        rows, keys = self.root_rows(r)
        return {k: Bounds(float(node.L.value[i]), float(node.U.value[i])) for i, k in zip(rows, keys)}

    def state(self, ref: int | str, key: Iterable[str] = ()) -> TruthState:
        return classify(self.bounds(ref, key), self.alpha)

    def contradictions(self) -> list[tuple[int, Key, Bounds]]:
        out = []
        for node in self.nodes:
            for i in np.nonzero(node.L.value > node.U.value)[0]:
                out.append((node.id, node.table.keys[i], Bounds(float(node.L.value[i]), float(node.U.value[i]))))
        return out

    def to_dict(self) -> dict[str, Any]:
        nodes = []
        for n in self.nodes:
            d: dict[str, Any] = {"id": n.id, "kind": n.kind, "label": n.label, "vars": list(n.vars)}
            if n.params is not None:
                d["params"] = {
                    "weights": [_fmt(x) for x in n.w.value], "bias": _fmt(n.b.value),
                    "alpha": _fmt(n.params.alpha), "family": n.params.family,
                }
            d["operands"] = [e.child for e in n.edges]
            d["groundings"] = [
                {"tuple": list(k), "L": _fmt(b.lower), "U": _fmt(b.upper), "state": str(classify(b, self.alpha))}
                for k, b in sorted(n.table.items())
            ]
            nodes.append(d)
        return {"family": self.family, "alpha": _fmt(self.alpha), "nodes": nodes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _fmt(x: float) -> float:
    return float(f"{float(x):.9g}")


def _constants(f: Formula) -> list[str]:
    from .formula import Const, atoms

    out: list[str] = []
    for a in atoms(f):
        out += [t.name for t in a.args if isinstance(t, Const) and t.name not in out]
    return out


def compile(
    kb: KnowledgeBase,
    semantics: str = "lukasiewicz",
    alpha: float = 1.0,
    *,
    guided: bool = False,
) -> NeuronGraph:
    """Build the graph, materialise groundings and assert axioms and facts."""
    g = NeuronGraph(semantics, alpha, kb.constants)
    for pred, arity in kb.predicates.items():
        g.add_atom(pred, arity)
    for ax in kb.axioms:
        g.add_axiom(ax.id, ax.formula, ax.bounds)
    for q in kb.queries:
        g.add_query(q.id, q)
    for (pred, args), b in kb.facts.items():
        g.add_fact(pred, args, b)
    g.ground(guided=guided)
    return g
