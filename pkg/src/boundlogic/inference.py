"""Upward/downward bounds propagation to a fixpoint.

Rules operate on whole grounding tables at once: operand bounds are gathered
into the parent's row order, proposals are computed elementwise, and results
are aggregated back with scatter max/min.  Everything runs on :mod:`tape`
tensors so a training epoch can backpropagate through the unrolled passes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import tape
from .graph import QUANTIFIERS, NeuronGraph, Node, TruthState, classify
from .semantics import (
    Bounds,
    ConnectiveParams,
    logistic_coefficients,
    logistic_inverse,
    tailored_eval,
    tailored_inverse,
)

T = tape.Tensor
Pair = tuple[T, T]


@dataclass(frozen=True)
class InferenceConfig:
    epsilon: float = 1e-4
    max_iters: int = 1000
    w_min: float = 0.01
    # gradient scale outside the connective clamp ranges (1 = fully transparent)
    grad_scale: float = 1.0
    # gradient scale outside the clamps of downward proposals
    down_grad_scale: float = 0.0
    # a grounding whose bounds have crossed offers no downward proofs
    contain_contradictions: bool = False
    # skip recomputing a node whose inputs did not change since its last visit
    skip_unchanged: bool = True


# --------------------------------------------------------------------------
# small tensor helpers
# --------------------------------------------------------------------------


def _c(x) -> T:
    return tape.const(x)


def _wsum(ws: Sequence[T], xs: Sequence[T]) -> T | float:
    out: T | float = 0.0
    for w, x in zip(ws, xs):
        out = out + w * x
    return out


def _neg(p: Pair) -> Pair:
    return 1.0 - p[1], 1.0 - p[0]


def _full(n: int, v: float) -> T:
    return T(np.full(n, v))


def _guard(mask: np.ndarray, value: T, fallback: float) -> T:
    return tape.where(mask, value, _full(len(mask), fallback))


def _weights(node_w: T, n: int) -> list[T]:
    return [tape.gather(node_w, i) for i in range(n)]


def _unchecked_params(weights: Sequence[float], bias: float, alpha: float, family: str) -> ConnectiveParams:
    """Parameters without the α-floor check, for sub-connectives of a valid node."""
    p = object.__new__(ConnectiveParams)
    for k, v in (("weights", tuple(float(w) for w in weights)), ("bias", float(bias)), ("alpha", alpha),
                 ("family", family), ("biases", None)):
        object.__setattr__(p, k, v)
    return p


# --------------------------------------------------------------------------
# upward rules
# --------------------------------------------------------------------------


def _luk_up(kind: str, w: list[T], b: T, ops: list[Pair], scale: float) -> Pair:
    # gradients pass the saturated side only: False for conjunctions, True otherwise
    side = "lo" if kind == "and" else "hi"
    clamp = lambda v: tape.clamp(v, 0.0, 1.0, scale, side)  # noqa: E731
    if kind == "and":
        return (clamp(b - _wsum(w, [1.0 - L for L, _ in ops])), clamp(b - _wsum(w, [1.0 - U for _, U in ops])))
    if kind == "or":
        return clamp(1.0 - b + _wsum(w, [L for L, _ in ops])), clamp(1.0 - b + _wsum(w, [U for _, U in ops]))
    (Lx, Ux), (Ly, Uy) = ops
    return (clamp(1.0 - b + w[0] * (1.0 - Ux) + w[1] * Ly), clamp(1.0 - b + w[0] * (1.0 - Lx) + w[1] * Uy))


def _fold(fn, xs: Sequence[T]) -> T:
    out = xs[0]
    for x in xs[1:]:
        out = fn(out, x)
    return out


def _godel_term(b: T, w: T, x: T, scale: float) -> T:
    return tape.clamp(1.0 - b + w * x, 0.0, 1.0, scale)


def _godel_imp(xt: T, yt: T) -> T:
    return tape.where(xt.value <= yt.value, _full(len(xt), 1.0), yt)


def _godel_up(kind: str, w: list[T], b: T, ops: list[Pair], scale: float) -> Pair:
    clamp = lambda v: tape.clamp(v, 0.0, 1.0, scale)  # noqa: E731
    if kind == "and":
        lo = _fold(tape.minimum, [b - wi * (1.0 - L) for wi, (L, _) in zip(w, ops)])
        hi = _fold(tape.minimum, [b - wi * (1.0 - U) for wi, (_, U) in zip(w, ops)])
        return clamp(lo), clamp(hi)
    if kind == "or":
        lo = _fold(tape.maximum, [1.0 - b + wi * L for wi, (L, _) in zip(w, ops)])
        hi = _fold(tape.maximum, [1.0 - b + wi * U for wi, (_, U) in zip(w, ops)])
        return clamp(lo), clamp(hi)
    (Lx, Ux), (Ly, Uy) = ops
    t = lambda wi, v: _godel_term(b, wi, v, scale)  # noqa: E731
    return _godel_imp(t(w[0], Ux), t(w[1], Ly)), _godel_imp(t(w[0], Lx), t(w[1], Uy))


def _prob_up(kind: str, ops: list[Pair]) -> Pair:
    if kind == "or":
        return _fold(tape.maximum, [L for L, _ in ops]), tape.minimum(_wsum([1.0] * len(ops), [U for _, U in ops]), 1.0)
    if kind == "and":
        lo = tape.maximum(1.0 - _wsum([1.0] * len(ops), [1.0 - L for L, _ in ops]), 0.0)
        return lo, _fold(tape.minimum, [U for _, U in ops])
    (Lx, Ux), (Ly, Uy) = ops
    return tape.maximum(1.0 - Ux, Ly), tape.minimum(1.0 - Lx + Uy, 1.0)


def _activation(params: ConnectiveParams, s: np.ndarray, form: str) -> np.ndarray:
    if params.family == "tailored":
        return np.array([tailored_eval(params, float(v), form).value for v in s])
    A, B = logistic_coefficients(params, form)
    return 1.0 / (1.0 + np.exp(-(A * s - B)))


def _smooth_up(kind: str, params: ConnectiveParams, ops: list[Pair]) -> Pair:
    w = np.array(params.weights)
    Ls = [L.value for L, _ in ops]
    Us = [U.value for _, U in ops]
    if kind == "implies":
        Ls, Us = [1.0 - Us[0], Ls[1]], [1.0 - Ls[0], Us[1]]
        kind = "or"
    lo = _activation(params, sum(wi * x for wi, x in zip(w, Ls)), kind)
    hi = _activation(params, sum(wi * x for wi, x in zip(w, Us)), kind)
    return T(lo), T(hi)


def connective_up(node: Node, ops: list[Pair], family: str, scale: float = 1.0) -> Pair:
    if node.kind == "not":
        return _neg(ops[0])
    if family == "probability":
        return _prob_up(node.kind, ops)
    if family in ("tailored", "logistic"):
        _no_grad(node, family)
        return _smooth_up(node.kind, node.params, ops)
    w = _weights(node.w, len(ops))
    if family == "godel":
        return _godel_up(node.kind, w, node.b, ops, scale)
    return _luk_up(node.kind, w, node.b, ops, scale)


def _no_grad(node: Node, family: str) -> None:
    if (node.w is not None and node.w.requires_grad) or (node.b is not None and node.b.requires_grad):
        raise NotImplementedError(f"gradient tracking is not available for the {family} family inside the graph")


# --------------------------------------------------------------------------
# downward rules
# --------------------------------------------------------------------------


def _luk_down_or(w: list[T], b: T, ops: list[Pair], z: Pair, alpha: float, w_min: float, scale: float) -> list[Pair | None]:
    Lz, Uz = z
    out: list[Pair | None] = []
    for j in range(len(ops)):
        if float(w[j].value) < w_min:
            out.append(None)
            continue
        others = [i for i in range(len(ops)) if i != j]
        sU = _wsum([w[i] for i in others], [ops[i][1] for i in others])
        sL = _wsum([w[i] for i in others], [ops[i][0] for i in others])
        lo = tape.clamp((Lz - 1.0 + b - sU) / w[j], 0.0, 1.0, scale)
        hi = tape.clamp((Uz - 1.0 + b - sL) / w[j], 0.0, 1.0, scale)
        out.append((_guard(Lz.value > 1.0 - alpha, lo, 0.0), _guard(Uz.value < alpha, hi, 1.0)))
    return out


def _demorgan(rule, ops: list[Pair], z: Pair) -> list[Pair | None]:
    """Run an OR-shaped rule on complemented operands and output."""
    res = rule([_neg(p) for p in ops], _neg(z))
    return [None if r is None else _neg(r) for r in res]


def _godel_down(kind: str, w: list[T], b: T, ops: list[Pair], z: Pair, w_min: float, scale: float) -> list[Pair | None]:
    Lz, Uz = z
    n = len(Lz)
    clamp = lambda v: tape.clamp(v, 0.0, 1.0, scale)  # noqa: E731
    if kind == "implies":
        (Lx, Ux), (Ly, Uy) = ops
        if float(w[0].value) < w_min or float(w[1].value) < w_min:
            return [None, None]
        xt = (_godel_term(b, w[0], Lx, scale), _godel_term(b, w[0], Ux, scale))
        yt = (_godel_term(b, w[1], Ly, scale), _godel_term(b, w[1], Uy, scale))
        # bounds on the weighted terms, then back through the term map
        y_lo = tape.where(Lz.value > 0, tape.minimum(Lz, xt[0]), _full(n, 0.0))
        y_hi = tape.where(Uz.value < 1, Uz, _full(n, 1.0))
        x_lo = tape.where(Uz.value < 1, yt[0], _full(n, 0.0))
        x_hi = tape.where((yt[1].value < Lz.value), yt[1], _full(n, 1.0))
        inv = lambda t, wi: clamp((t - 1.0 + b) / wi)  # noqa: E731
        return [
            (_guard(x_lo.value > 0, inv(x_lo, w[0]), 0.0), _guard(x_hi.value < 1, inv(x_hi, w[0]), 1.0)),
            (_guard(y_lo.value > 0, inv(y_lo, w[1]), 0.0), _guard(y_hi.value < 1, inv(y_hi, w[1]), 1.0)),
        ]
    out: list[Pair | None] = []
    for j in range(len(ops)):
        if float(w[j].value) < w_min:
            out.append(None)
            continue
        others = [i for i in range(len(ops)) if i != j]
        if kind == "and":
            # every term is at least L_z; term j is at most U_z once the rest exceed U_z
            lo = clamp(1.0 - (b - Lz) / w[j])
            hi = clamp(1.0 - (b - Uz) / w[j])
            rest = np.ones(n, dtype=bool)
            for i in others:
                rest &= (b.value - w[i].value * (1.0 - ops[i][0].value)) > Uz.value
            out.append((_guard(Lz.value > 0, lo, 0.0), _guard(rest & (Uz.value < 1), hi, 1.0)))
        else:
            lo = clamp((Lz - 1.0 + b) / w[j])
            hi = clamp((Uz - 1.0 + b) / w[j])
            rest = np.ones(n, dtype=bool)
            for i in others:
                rest &= (1.0 - b.value + w[i].value * ops[i][1].value) < Lz.value
            out.append((_guard(rest & (Lz.value > 0), lo, 0.0), _guard(Uz.value < 1, hi, 1.0)))
    return out


def _prob_down(kind: str, ops: list[Pair], z: Pair) -> list[Pair | None]:
    Lz, Uz = z
    out: list[Pair | None] = []
    if kind == "implies":
        (Lx, Ux), (Ly, Uy) = ops
        return [
            (1.0 - Uz, tape.minimum(1.0 + Uy - Lz, 1.0)),
            (tape.maximum(Lx + Lz - 1.0, 0.0), Uz),
        ]
    for j in range(len(ops)):
        others = [i for i in range(len(ops)) if i != j]
        if kind == "or":
            rest = _wsum([1.0] * len(others), [ops[i][1] for i in others])
            out.append((tape.maximum(Lz - rest, 0.0), Uz))
        else:
            rest = _wsum([1.0] * len(others), [1.0 - ops[i][0] for i in others])
            out.append((Lz, tape.minimum(Uz + rest, 1.0)))
    return out


def conditioned_downward(
    params: ConnectiveParams,
    target: int,
    operands: Sequence[Bounds],
    output: Bounds,
    alpha: float | None = None,
    *,
    kind: str = "and",
    w_min: float = 0.0,
) -> Bounds:
    """Tailored downward bound for one operand.

    Combines the functional inverse of the activation with the tautology
    B → (A → (A ∧ B)), where A is the conjunction of the other operands.
    Disjunctions and implications are handled through their De Morgan image.
    """
    alpha = params.alpha if alpha is None else alpha
    ops = [Bounds(*b) for b in operands]
    z = Bounds(*output)
    if kind == "or":
        inv = conditioned_downward(params, target, [Bounds(1 - b.upper, 1 - b.lower) for b in ops],
                                   Bounds(1 - z.upper, 1 - z.lower), alpha, kind="and", w_min=w_min)
        return Bounds(1 - inv.upper, 1 - inv.lower)
    if kind == "implies":
        ops = [Bounds(1 - ops[0].upper, 1 - ops[0].lower), ops[1]]
        res = conditioned_downward(params, target, ops, z, alpha, kind="or", w_min=w_min)
        return Bounds(1 - res.upper, 1 - res.lower) if target == 0 else res
    w = params.weights
    if w[target] < w_min or w[target] <= 0:
        return Bounds(0.0, 1.0)
    p = _unchecked_params(w, params.bias, alpha, "tailored")
    others = [i for i in range(len(ops)) if i != target]
    if others:
        sub = _unchecked_params([w[i] for i in others], 1.0, alpha, "tailored")
        a_lo = tailored_eval(sub, sum(w[i] * ops[i].lower for i in others), "and").value
        a_hi = tailored_eval(sub, sum(w[i] * ops[i].upper for i in others), "and").value
    else:
        a_lo = a_hi = 1.0
    unit = _unchecked_params((1.0, 1.0), 1.0, alpha, "tailored")
    taut_hi = tailored_eval(unit, (1.0 - a_lo) + z.upper, "or").value
    taut_lo = tailored_eval(unit, (1.0 - a_hi) + z.lower, "or").value
    inv_hi = (tailored_inverse(p, z.upper, "and", "upper") - sum(w[i] * ops[i].lower for i in others)) / w[target]
    inv_lo = (tailored_inverse(p, z.lower, "and", "lower") - sum(w[i] * ops[i].upper for i in others)) / w[target]
    # classical-region membership, tolerant to rounding in 1 − α
    if z.upper <= 1.0 - alpha + 1e-12 and a_lo >= alpha - 1e-12:
        hi = taut_hi
    else:
        hi = max(taut_hi, inv_hi)
    lo = min(taut_lo, inv_lo)
    return Bounds(min(1.0, max(0.0, lo)), min(1.0, max(0.0, hi)))


def _smooth_down(kind: str, params: ConnectiveParams, ops: list[Pair], z: Pair, w_min: float) -> list[Pair | None]:
    n = len(z[0])
    out: list[Pair | None] = []
    w = params.weights
    for j in range(len(ops)):
        if w[j] < w_min or w[j] <= 0:
            out.append(None)
            continue
        lo, hi = np.zeros(n), np.ones(n)
        for r in range(n):
            bs = [Bounds(float(L.value[r]), float(U.value[r])) for L, U in ops]
            zr = Bounds(float(z[0].value[r]), float(z[1].value[r]))
            if params.family == "tailored":
                b = conditioned_downward(params, j, bs, zr, kind=kind, w_min=w_min)
            else:
                b = _logistic_down(kind, params, j, bs, zr)
            lo[r], hi[r] = b.lower, b.upper
        out.append((T(lo), T(hi)))
    return out


def _logistic_down(kind: str, params: ConnectiveParams, j: int, ops: list[Bounds], z: Bounds) -> Bounds:
    """Functional-inverse route in disjunction form, with the α guards."""
    if kind == "and":
        res = _logistic_down("or", params, j, [Bounds(1 - b.upper, 1 - b.lower) for b in ops], Bounds(1 - z.upper, 1 - z.lower))
        return Bounds(1 - res.upper, 1 - res.lower)
    if kind == "implies":
        neg = [Bounds(1 - ops[0].upper, 1 - ops[0].lower), ops[1]]
        res = _logistic_down("or", params, j, neg, z)
        return Bounds(1 - res.upper, 1 - res.lower) if j == 0 else res
    w, alpha = params.weights, params.alpha
    others = [i for i in range(len(ops)) if i != j]
    lo, hi = 0.0, 1.0
    if z.lower > 1.0 - alpha:
        lo = (logistic_inverse(params, z.lower, "or") - sum(w[i] * ops[i].upper for i in others)) / w[j]
    if z.upper < alpha:
        hi = (logistic_inverse(params, z.upper, "or") - sum(w[i] * ops[i].lower for i in others)) / w[j]
    clip = lambda v: min(1.0, max(0.0, v)) if not math.isnan(v) else 0.0  # noqa: E731
    return Bounds(clip(lo), clip(hi) if not math.isnan(hi) else 1.0)


def connective_down(
    node: Node, ops: list[Pair], z: Pair, family: str, alpha: float, w_min: float, scale: float = 1.0
) -> list[Pair | None]:
    """Proposed operand bounds (aligned to the parent's rows); None means no proof."""
    if node.kind == "not":
        return [_neg(z)]
    if family == "probability":
        return _prob_down(node.kind, ops, z)
    if family in ("tailored", "logistic"):
        _no_grad(node, family)
        return _smooth_down(node.kind, node.params, ops, z, w_min)
    w = _weights(node.w, len(ops))
    if family == "godel":
        return _godel_down(node.kind, w, node.b, ops, z, w_min, scale)
    if node.kind == "or":
        return _luk_down_or(w, node.b, ops, z, alpha, w_min, scale)
    if node.kind == "and":
        return _demorgan(lambda o, zz: _luk_down_or(w, node.b, o, zz, alpha, w_min, scale), ops, z)
    # implication as a disjunction of the negated antecedent and the consequent
    res = _luk_down_or(w, node.b, [_neg(ops[0]), ops[1]], z, alpha, w_min, scale)
    return [None if res[0] is None else _neg(res[0]), res[1]]


# --------------------------------------------------------------------------
# scalar entry points
# --------------------------------------------------------------------------


def _pairs(bounds: Sequence[Bounds]) -> list[Pair]:
    return [(T(np.array([float(b[0])])), T(np.array([float(b[1])]))) for b in bounds]


def _bounds(p: Pair | None) -> Bounds:
    if p is None:
        return Bounds(0.0, 1.0)
    return Bounds(float(p[0].value[0]), float(p[1].value[0]))


def downward_or(
    params: ConnectiveParams, j: int, operands: Sequence[Bounds], output: Bounds,
    alpha: float | None = None, w_min: float = 0.01,
) -> Bounds:
    """Bound on operand ``j`` of a weighted Łukasiewicz disjunction from its output."""
    alpha = params.alpha if alpha is None else alpha
    w = [T(np.array(x)) for x in params.weights]
    res = _luk_down_or(w, T(np.array(params.bias)), _pairs(operands), _pairs([output])[0], alpha, w_min, 1.0)
    return _bounds(res[j])


def downward_implies(
    params: ConnectiveParams, operands: Sequence[Bounds], output: Bounds,
    alpha: float | None = None, w_min: float = 0.01,
) -> tuple[Bounds, Bounds]:
    """(antecedent, consequent) bounds from an implication's output bounds."""
    alpha = params.alpha if alpha is None else alpha
    node = Node(-1, "implies", "implies", ())
    node.params, node.w, node.b = params, T(np.array(params.weights)), T(np.array(params.bias))
    res = connective_down(node, _pairs(operands), _pairs([output])[0], params.family, alpha, w_min)
    return _bounds(res[0]), _bounds(res[1])


# --------------------------------------------------------------------------
# passes
# --------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    iterations: int
    deltas: list[float]
    converged: bool
    contradictions: list[tuple[int, tuple[str, ...], Bounds]]
    bounds: dict[int, dict[tuple[str, ...], Bounds]] = field(default_factory=dict)
    answers: dict[str, dict[tuple[str, ...], tuple[Bounds, TruthState]]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        f = lambda x: float(f"{x:.9g}")  # noqa: E731
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "deltas": [f(d) for d in self.deltas],
            "contradictions": [
                {"node": n, "tuple": list(k), "L": f(b.lower), "U": f(b.upper)} for n, k, b in self.contradictions
            ],
            "answers": {
                q: [{"tuple": list(k), "L": f(b.lower), "U": f(b.upper), "state": str(s)} for k, (b, s) in sorted(rows.items())]
                for q, rows in self.answers.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class Engine:
    """One inference run over a graph: passes, change tracking and deltas."""

    def __init__(self, graph: NeuronGraph, config: InferenceConfig = InferenceConfig()):
        self.g = graph
        self.cfg = config
        self.delta = 0.0
        self._seen_up: dict[int, tuple] = {}
        self._seen_down: dict[int, tuple] = {}

    # aggregation ------------------------------------------------------
    def _tighten(self, node: Node, lower: T, upper: T) -> None:
        old_l, old_u = node.L.value, node.U.value
        if lower.value.shape != old_l.shape:
            raise ValueError("proposal shape mismatch")
        d = float(np.abs(lower.value - old_l).sum() + np.abs(upper.value - old_u).sum())
        if d > 0:
            node.set_bounds(lower, upper)
            node.version += 1
            self.delta += d

    def _scatter(self, node: Node, rows: np.ndarray, prop: Pair) -> None:
        # existing bounds win ties, so a proposal that tightens nothing is a no-op
        up = bool((prop[0].value > node.L.value[rows]).any())
        down = bool((prop[1].value < node.U.value[rows]).any())
        if not (up or down):
            return
        lo = tape.scatter_max(node.L, rows, prop[0]) if up else node.L
        hi = tape.scatter_min(node.U, rows, prop[1]) if down else node.U
        self._tighten(node, lo, hi)

    def _operands(self, node: Node) -> list[Pair]:
        out = []
        for e, rows in zip(node.edges, node.child_rows):
            c = self.g.nodes[e.child]
            out.append((tape.gather(c.L, rows), tape.gather(c.U, rows)))
        return out

    def _key(self, node: Node, own: bool) -> tuple:
        kids = tuple(self.g.nodes[e.child].version for e in node.edges)
        return (node.version, kids) if own else kids

    # passes -----------------------------------------------------------
    def upward(self, nid: int) -> None:
        node = self.g.nodes[nid]
        if node.kind == "atom":
            return
        for e in node.edges:
            self.upward(e.child)
        key = self._key(node, own=False)
        if self.cfg.skip_unchanged and self._seen_up.get(nid) == key:
            return
        n = len(node.table)
        if node.kind in QUANTIFIERS and not node.ground:
            c = self.g.nodes[node.edges[0].child]
            red = "min" if node.kind == "forall" else "max"
            lo = tape.segment_reduce(tape.gather(c.L, node.members), node.groups, n, red, 0.0)
            hi = tape.segment_reduce(tape.gather(c.U, node.members), node.groups, n, red, 1.0)
        elif node.kind in QUANTIFIERS:
            ops = self._operands(node)
            fn = tape.minimum if node.kind == "forall" else tape.maximum
            lo, hi = _fold(fn, [L for L, _ in ops]), _fold(fn, [U for _, U in ops])
        else:
            lo, hi = connective_up(node, self._operands(node), self.g.family, self.cfg.grad_scale)
        up, down = bool((lo.value > node.L.value).any()), bool((hi.value < node.U.value).any())
        if up or down:
            self._tighten(node, tape.maximum(node.L, lo) if up else node.L, tape.minimum(node.U, hi) if down else node.U)
        self._seen_up[nid] = self._key(node, own=False)

    def downward(self, nid: int) -> None:
        node = self.g.nodes[nid]
        if node.kind == "atom":
            return
        key = self._key(node, own=True)
        if not (self.cfg.skip_unchanged and self._seen_down.get(nid) == key):
            self._down_step(node)
            self._seen_down[nid] = self._key(node, own=True)
        for e in node.edges:
            self.downward(e.child)

    def _down_step(self, node: Node) -> None:
        z: Pair = (node.L, node.U)
        n = len(node.table)
        live = np.ones(n, dtype=bool)
        if self.cfg.contain_contradictions:
            live = node.L.value <= node.U.value
        if node.kind in QUANTIFIERS and not node.ground:
            c = self.g.nodes[node.edges[0].child]
            m = len(node.members)
            keep = live[node.groups]
            if node.kind == "forall":
                prop = (tape.where(keep, tape.gather(node.L, node.groups), _full(m, 0.0)), _full(m, 1.0))
            else:
                prop = (_full(m, 0.0), tape.where(keep, tape.gather(node.U, node.groups), _full(m, 1.0)))
            self._scatter(c, node.members, prop)
            return
        if node.kind in QUANTIFIERS:
            props: list[Pair | None] = [
                (z[0], _full(n, 1.0)) if node.kind == "forall" else (_full(n, 0.0), z[1]) for _ in node.edges
            ]
        else:
            props = connective_down(node, self._operands(node), z, self.g.family, node_alpha(node, self.g),
                                    self.cfg.w_min, self.cfg.down_grad_scale)
        for e, rows, prop in zip(node.edges, node.child_rows, props):
            if prop is None:
                continue
            if not live.all():
                prop = (tape.where(live, prop[0], _full(n, 0.0)), tape.where(live, prop[1], _full(n, 1.0)))
            self._scatter(self.g.nodes[e.child], rows, prop)

    def iterate(self, roots: Sequence[int]) -> float:
        self.delta = 0.0
        for nid in roots:
            self.upward(nid)
            self.downward(nid)
        return self.delta


def node_alpha(node: Node, graph: NeuronGraph) -> float:
    return node.params.alpha if node.params is not None else graph.alpha


def _root_nodes(graph: NeuronGraph, order: Sequence[str] | None) -> list[int]:
    roots = graph.roots if order is None else [graph.root(r) for r in order]
    out: list[int] = []
    for r in roots:
        if r.view.child not in out:
            out.append(r.view.child)
    return out


def upward_pass(graph: NeuronGraph, root: int | str, config: InferenceConfig = InferenceConfig()) -> float:
    """One leaves-to-root evaluation under ``root``; returns the total bounds change."""
    eng = Engine(graph, config)
    eng.upward(graph.node(root).id)
    return eng.delta


def downward_pass(graph: NeuronGraph, root: int | str, config: InferenceConfig = InferenceConfig()) -> float:
    """One root-to-leaves inverse sweep under ``root``; returns the total bounds change."""
    eng = Engine(graph, config)
    eng.downward(graph.node(root).id)
    return eng.delta


def infer(
    graph: NeuronGraph,
    epsilon: float | None = None,
    max_iters: int | None = None,
    *,
    config: InferenceConfig | None = None,
    order: Sequence[str] | None = None,
    on_iteration: Callable[[int, float], None] | None = None,
) -> ConvergenceReport:
    """Alternate upward and downward passes over every root until the change is at most ε."""
    cfg = config or InferenceConfig()
    eps = cfg.epsilon if epsilon is None else epsilon
    iters = cfg.max_iters if max_iters is None else max_iters
    if eps <= 0 or iters < 1:
        raise ValueError("need epsilon > 0 and max_iters >= 1")
    if not graph.finalized:
        graph.ground()
    eng = Engine(graph, cfg)
    roots = _root_nodes(graph, order)
    deltas: list[float] = []
    converged = False
    for it in range(1, iters + 1):
        d = eng.iterate(roots)
        deltas.append(d)
        if on_iteration is not None:
            on_iteration(it, d)
        if d <= eps:
            converged = True
            break
    return report(graph, deltas, converged)


def report(graph: NeuronGraph, deltas: list[float], converged: bool) -> ConvergenceReport:
    answers = {}
    for r in graph.roots:
        if r.kind == "query":
            answers[r.id] = {k: (b, classify(b, graph.alpha)) for k, b in graph.answer(r.id).items()}
    return ConvergenceReport(
        iterations=len(deltas),
        deltas=deltas,
        converged=converged,
        contradictions=graph.contradictions(),
        bounds={n.id: dict(n.table.items()) for n in graph.nodes},
        answers=answers,
    )
