"""Grounding tables, variable maps, joins, quantifier rules and grounding propagation.

Every graph node owns a :class:`GroundingTable`; propositional nodes simply
have no columns and a single row ``()``.  A :class:`VariableMap` describes how
a parent sees one operand: the operand's columns are mapped onto a *view*
whose columns are the distinct variables of that occurrence, with constant
arguments and repeated variables folded in.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import IO, TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from . import tape
from .formula import Formula, Query, free_vars
from .semantics import UNKNOWN, Bounds

if TYPE_CHECKING:  # pragma: no cover
    from .graph import NeuronGraph

Key = tuple[str, ...]


class GroundingTable:
    """Rows keyed by constant tuples; absent rows read as Unknown (0, 1)."""

    def __init__(self, variables: Sequence[str]):
        self.vars: tuple[str, ...] = tuple(variables)
        self.keys: list[Key] = []
        self.index: dict[Key, int] = {}
        self.L = tape.Tensor(np.zeros(0))
        self.U = tape.Tensor(np.ones(0))

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: Key) -> bool:
        return tuple(key) in self.index

    def add(self, key: Iterable[str]) -> bool:
        """Materialise a row at (0, 1); returns False if it already existed."""
        key = tuple(key)
        if len(key) != len(self.vars):
            raise ValueError(f"tuple {key} does not match columns {self.vars}")
        if key in self.index:
            return False
        self.index[key] = len(self.keys)
        self.keys.append(key)
        self.L = tape.Tensor(np.append(self.L.value, 0.0))
        self.U = tape.Tensor(np.append(self.U.value, 1.0))
        return True

    def get(self, key: Iterable[str] = ()) -> Bounds:
        i = self.index.get(tuple(key))
        if i is None:
            return UNKNOWN
        return Bounds(float(self.L.value[i]), float(self.U.value[i]))

    def items(self):
        for k, i in self.index.items():
            yield k, Bounds(float(self.L.value[i]), float(self.U.value[i]))

    def clear_bounds(self) -> None:
        n = len(self.keys)
        self.L = tape.Tensor(np.zeros(n))
        self.U = tape.Tensor(np.ones(n))

    def to_csv(self, out: IO[str] | None = None) -> str:
        """Write tuple columns then L and U; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.vars, "L", "U"])
        for k in sorted(self.index):
            b = self.get(k)
            w.writerow([*k, f"{b.lower:.9g}", f"{b.upper:.9g}"])
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


@dataclass(frozen=True)
class VariableMap:
    """How a parent sees operand ``child``.

    ``view_vars`` are the distinct variables of the occurrence; ``cols[j]`` is
    the view position feeding child column ``j`` or ``None`` when the column
    holds the constant ``consts[j]``.
    """

    child: int
    view_vars: tuple[str, ...]
    cols: tuple[int | None, ...]
    consts: tuple[str | None, ...]

    @staticmethod
    def identity(child: int, variables: Sequence[str]) -> "VariableMap":
        n = len(variables)
        return VariableMap(child, tuple(variables), tuple(range(n)), (None,) * n)

    @staticmethod
    def for_args(child: int, args: Sequence[tuple[str, bool]]) -> "VariableMap":
        """Map from atom arguments given as (name, is_variable) pairs."""
        view: list[str] = []
        cols: list[int | None] = []
        consts: list[str | None] = []
        for name, is_var in args:
            if is_var:
                if name not in view:
                    view.append(name)
                cols.append(view.index(name))
                consts.append(None)
            else:
                cols.append(None)
                consts.append(name)
        return VariableMap(child, tuple(view), tuple(cols), tuple(consts))

    def to_child(self, view_key: Key) -> Key:
        return tuple(view_key[c] if c is not None else k for c, k in zip(self.cols, self.consts))

    def to_view(self, child_key: Key) -> Key | None:
        """Inverse of ``to_child``; None when constants or repeated variables disagree."""
        out: list[str | None] = [None] * len(self.view_vars)
        for value, c, k in zip(child_key, self.cols, self.consts):
            if c is None:
                if value != k:
                    return None
            elif out[c] is None:
                out[c] = value
            elif out[c] != value:
                return None
        return tuple(out)  # type: ignore[arg-type]


# --------------------------------------------------------------------------
# Pure table operations
# --------------------------------------------------------------------------


def _positions(parent_vars: Sequence[str], view_vars: Sequence[str]) -> list[int]:
    return [list(parent_vars).index(v) for v in view_vars]


def outer_join(parent_vars: Sequence[str], views: Sequence[tuple[Sequence[str], set[Key]]]) -> set[Key]:
    """Parent tuples reachable from any operand's rows.

    Each operand in turn drives the join: its rows are extended with the
    variables it lacks by matching other operands on shared variables, and by
    all observed combinations of a missing variable when nothing matches.
    """
    parent_vars = tuple(parent_vars)
    result: set[Key] = set()
    for i, (vi, rows_i) in enumerate(views):
        partial = [dict(zip(vi, r)) for r in rows_i]
        covered = set(vi)
        for k, (vk, rows_k) in enumerate(views):
            if k == i:
                continue
            new_vars = [v for v in vk if v not in covered]
            if not new_vars:
                continue
            shared = [v for v in vk if v in covered]
            combos = {tuple(dict(zip(vk, r))[v] for v in new_vars) for r in rows_k}
            extended = []
            for t in partial:
                matches = {
                    tuple(rk[v] for v in new_vars)
                    for rk in (dict(zip(vk, r)) for r in rows_k)
                    if all(rk[v] == t[v] for v in shared)
                }
                for combo in sorted(matches or combos):
                    extended.append({**t, **dict(zip(new_vars, combo))})
            partial = extended
            covered.update(new_vars)
        if covered >= set(parent_vars):
            result.update(tuple(t[v] for v in parent_vars) for t in partial)
    return result


def join_operands(
    parent_vars: Sequence[str],
    tables: Sequence[GroundingTable],
    maps: Sequence[VariableMap],
) -> list[tuple[Key, list[Bounds]]]:
    """Outer natural join of operand tables; operands lacking a tuple read (0, 1)."""
    views = []
    for t, m in zip(tables, maps):
        rows = {v for v in (m.to_view(k) for k in t.keys) if v is not None}
        views.append((m.view_vars, rows))
    out = []
    for key in sorted(outer_join(parent_vars, views)):
        inputs = []
        for t, m in zip(tables, maps):
            view_key = tuple(key[p] for p in _positions(parent_vars, m.view_vars))
            inputs.append(t.get(m.to_child(view_key)))
        out.append((key, inputs))
    return out


def quantify_upward(
    kind: str, table: GroundingTable | Mapping[Key, Bounds], quantified: Sequence[str] | None = None,
    variables: Sequence[str] | None = None,
) -> Bounds | dict[Key, Bounds]:
    """∀ → (min L, min U), ∃ → (max L, max U) over the quantified columns.

    Without remaining columns the result is a single Bounds; otherwise a map
    from the remaining columns' tuples to Bounds.  Empty input gives (0, 1).
    """
    if isinstance(table, GroundingTable):
        variables, rows = table.vars, dict(table.items())
    else:
        rows = dict(table)
        variables = tuple(variables or ())
    quantified = tuple(variables if quantified is None else quantified)
    keep = [i for i, v in enumerate(variables) if v not in quantified]
    red = min if kind == "forall" else max
    groups: dict[Key, list[Bounds]] = {}
    for k, b in rows.items():
        groups.setdefault(tuple(k[i] for i in keep), []).append(b)
    out = {g: Bounds(red(b.lower for b in bs), red(b.upper for b in bs)) for g, bs in groups.items()}
    if not keep:
        return out.get((), UNKNOWN)
    return out


def quantify_downward(kind: str, node: Bounds, table: GroundingTable | Mapping[Key, Bounds]) -> dict[Key, Bounds]:
    """Proposals for every grounding: ∀ offers (L_z, 1); ∃ offers (0, U_z) only."""
    keys = table.keys if isinstance(table, GroundingTable) else list(table)
    if kind == "forall":
        return {k: Bounds(node.lower, 1.0) for k in keys}
    return {k: Bounds(0.0, node.upper) for k in keys}


# --------------------------------------------------------------------------
# Variable binding
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundFormula:
    formula: Formula
    bindings: tuple[tuple[str, str], ...]


def bind(
    formula: Formula | BoundFormula | Query, variable: str, constant: str, constants: Iterable[str] | None = None
) -> BoundFormula:
    """Record ``variable = constant``; the variable keeps its column for joins."""
    base = formula.formula if isinstance(formula, (BoundFormula, Query)) else formula
    prior = formula.bindings if isinstance(formula, (BoundFormula, Query)) else ()
    if variable not in free_vars(base):
        raise ValueError(f"variable {variable!r} does not occur free in the formula")
    if constants is not None and constant not in set(constants):
        raise ValueError(f"unknown constant {constant!r}")
    return BoundFormula(base, tuple(prior) + ((variable, constant),))


# --------------------------------------------------------------------------
# Grounding propagation
# --------------------------------------------------------------------------


def guided_domain(graph: "NeuronGraph") -> list[str]:
    """Constants connected to query constants through shared facts.

    Without query constants every constant named by a fact is kept.
    """
    seeds = set()
    for r in graph.roots:
        if r.kind == "query":
            seeds.update(c for _, c in r.bindings)
            seeds.update(c for c in r.constants)
    fact_keys = [k for (_, k) in graph.fact_keys()]
    if not seeds:
        return sorted({c for k in fact_keys for c in k}, key=graph.constants.index)
    reach = set(seeds)
    changed = True
    while changed:
        changed = False
        for k in fact_keys:
            if reach.intersection(k) and not reach.issuperset(k):
                reach.update(k)
                changed = True
    return [c for c in graph.constants if c in reach]


def propagate_groundings(graph: "NeuronGraph", guided: bool = False) -> int:
    """Materialise every tuple inference may touch; returns the number added.

    Operands pass their tuples up through outer joins, parents push their
    tuples down to operands, quantifiers instantiate their body over the
    constant domain, and free-variable axioms range over the domain too.
    ``guided`` shrinks the domain to constants related to the queries.
    """
    domain = guided_domain(graph) if guided else list(graph.constants)
    nodes = graph.nodes
    added = 0

    def view_rows(m: VariableMap) -> set[Key]:
        t = nodes[m.child].table
        return {v for v in (m.to_view(k) for k in t.keys) if v is not None}

    def push(m: VariableMap, view_keys: Iterable[Key]) -> int:
        t = nodes[m.child].table
        return sum(t.add(m.to_child(v)) for v in view_keys)

    for r in graph.roots:
        if r.kind == "axiom" and r.expand:
            n = len(r.view.view_vars)
            fixed = dict(r.bindings)
            pools = [[fixed[v]] if v in fixed else domain for v in r.view.view_vars]
            added += push(r.view, itertools.product(*pools)) if n else push(r.view, [()])
        elif not r.view.view_vars:
            added += push(r.view, [()])

    order = graph.topological()
    changed = True
    while changed:
        changed = False
        for nid in order:  # operands before parents
            node = nodes[nid]
            if node.kind == "atom":
                continue
            if node.kind in ("forall", "exists") and not node.ground:
                m = node.edges[0]
                pos = [m.view_vars.index(v) for v in node.vars]
                keys = {tuple(v[p] for p in pos) for v in view_rows(m)}
            elif not node.vars:
                keys = {()} if any(len(nodes[m.child].table) for m in node.edges) else set()
            else:
                keys = outer_join(node.vars, [(m.view_vars, view_rows(m)) for m in node.edges])
            n_new = sum(node.table.add(k) for k in sorted(keys))
            changed |= n_new > 0
            added += n_new
        for nid in reversed(order):  # parents before operands
            node = nodes[nid]
            if node.kind == "atom":
                continue
            rows = list(node.table.keys)
            for m in node.edges:
                if node.kind in ("forall", "exists") and not node.ground:
                    fill = [v for v in m.view_vars if v not in node.vars]
                    pos = [node.vars.index(v) if v in node.vars else None for v in m.view_vars]
                    keys = []
                    for r in rows:
                        for combo in itertools.product(domain, repeat=len(fill)):
                            it = iter(combo)
                            keys.append(tuple(r[p] if p is not None else next(it) for p in pos))
                else:
                    pos = _positions(node.vars, m.view_vars)
                    keys = [tuple(r[p] for p in pos) for r in rows]
                n_new = push(m, keys)
                changed |= n_new > 0
                added += n_new
    return added
