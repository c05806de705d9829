"""Projected gradient descent on the composite logical loss.

Each epoch resets the graph to its current trainable assertions, runs
inference with the tape recording, evaluates

    loss = (1 + contradiction) / (1 + factalign + tightbounds)

and takes one clipped, projected gradient step with a linearly decaying
learning rate.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import tape
from .graph import NeuronGraph, intra_classical
from .inference import InferenceConfig, infer
from .semantics import ConnectiveParams, DualValue

TRAINABLE = ("weights", "bias", "axioms", "facts")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr_start: float = 0.1
    lr_end: float = 0.0
    grad_clip: float = 0.1
    w_min: float = 0.01
    alpha: float = 1.0
    train: tuple[str, ...] = ("weights", "axioms", "facts")
    grad_scale: float = 1.0
    down_grad_scale: float = 0.0
    normalize_weights: bool = True
    epsilon: float = 1e-4
    max_iters: int = 1000
    contain_contradictions: bool = False
    # node sets for the expectation terms
    factalign_over: str = "facts"  # "facts" or "facts+axioms"
    tightbounds_over: str = "all"  # "all" or "roots"
    seed: int = 0
    # optional uniform perturbation of initial weights, drawn from the seed
    init_noise: float = 0.0

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.grad_clip <= 0 or self.w_min <= 0 or self.max_iters < 1 or self.epsilon <= 0:
            raise ValueError("epochs >= 0, grad_clip > 0, w_min > 0, epsilon > 0 and max_iters >= 1 required")
        if not (0.5 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (1/2, 1]")
        bad = set(self.train) - set(TRAINABLE)
        if bad:
            raise ValueError(f"unknown trainable group(s) {sorted(bad)}; choose from {TRAINABLE}")
        if self.factalign_over not in ("facts", "facts+axioms") or self.tightbounds_over not in ("all", "roots"):
            raise ValueError("bad expectation node set")

    def inference(self) -> InferenceConfig:
        return InferenceConfig(self.epsilon, self.max_iters, self.w_min, self.grad_scale, self.down_grad_scale,
                               self.contain_contradictions)

    def lr(self, epoch: int) -> float:
        if self.epochs == 0:
            return self.lr_start
        return self.lr_start + (self.lr_end - self.lr_start) * epoch / self.epochs


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    contradiction: float
    factalign: float
    tightbounds: float
    contradictions: int
    iterations: int
    converged: bool
    lr: float = 0.0


@dataclass
class TrainReport:
    config: TrainConfig
    history: list[EpochRecord] = field(default_factory=list)
    initial: EpochRecord | None = None
    final: EpochRecord | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def start_loss(self) -> float:
        return self.initial.loss  # type: ignore[union-attr]

    @property
    def end_loss(self) -> float:
        return self.final.loss  # type: ignore[union-attr]

    def to_dict(self) -> dict[str, Any]:
        f = lambda x: float(f"{x:.9g}")  # noqa: E731

        def rec(r: EpochRecord) -> dict[str, Any]:
            return {k: f(v) if isinstance(v, float) else v for k, v in asdict(r).items()}

        cfg = asdict(self.config)
        cfg["train"] = list(cfg["train"])
        return {
            "config": cfg,
            "initial": rec(self.initial) if self.initial else None,
            "final": rec(self.final) if self.final else None,
            "history": [rec(r) for r in self.history],
            "parameters": _round(self.parameters),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --------------------------------------------------------------------------
# loss terms
# --------------------------------------------------------------------------


@dataclass
class LossTerms:
    total: tape.Tensor
    contradiction: tape.Tensor
    factalign: tape.Tensor
    tightbounds: tape.Tensor
    count: int


def _exclude_intra(graph: NeuronGraph) -> bool:
    return graph.family == "tailored"


def contradiction_term(graph: NeuronGraph) -> tuple[tape.Tensor, int]:
    """Σ max(0, L − U) over every node and grounding, plus the number of crossed rows."""
    out: tape.Tensor | float = 0.0
    count = 0
    for node in graph.nodes:
        if not len(node.table):
            continue
        gap = tape.relu(node.L - node.U)
        mask = node.L.value > node.U.value
        if _exclude_intra(graph):
            keep = ~intra_classical(node.L.value, node.U.value, graph.alpha)
            mask &= keep
            gap = tape.where(keep, gap, np.zeros(len(keep)))
        count += int(mask.sum())
        out = out + tape.total(gap)
    return tape.const(out), count


def _factalign(graph: NeuronGraph, over: str) -> tape.Tensor:
    parts = []
    n = 0
    for a in graph.assertions:
        if a.kind == "fact" or (over == "facts+axioms" and a.kind == "axiom"):
            if not (a.L.requires_grad or a.U.requires_grad):
                continue
            parts.append(tape.total(tape.absolute(a.L - a.initial[0]) + tape.absolute(a.U - a.initial[1])))
            n += a.L.value.size
    if not n:
        return tape.const(0.0)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out / float(n)


def _tightbounds(graph: NeuronGraph, over: str) -> tape.Tensor:
    nodes = graph.nodes if over == "all" else [graph.nodes[i] for i in {r.view.child for r in graph.roots}]
    parts = []
    n = 0
    for node in nodes:
        ok = np.nonzero(node.L.value <= node.U.value)[0]
        if len(ok):
            parts.append(tape.total(tape.exp(tape.gather(node.L - node.U, ok))))
            n += len(ok)
    if not n:
        return tape.const(0.0)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out / float(n)


def loss_terms(graph: NeuronGraph, config: TrainConfig = TrainConfig()) -> LossTerms:
    c, count = contradiction_term(graph)
    fa = _factalign(graph, config.factalign_over)
    tb = _tightbounds(graph, config.tightbounds_over)
    return LossTerms((1.0 + c) / (1.0 + fa + tb), c, fa, tb, count)


def _dual(t: tape.Tensor, graph: NeuronGraph) -> DualValue:
    partials: dict[str, float] = {}
    slots = parameter_slots(graph)
    for _, p in slots:
        p.grad = None
    tape.backward(t)
    for name, p in slots:
        if p.requires_grad:
            g = np.zeros(p.value.shape) if p.grad is None else p.grad
            for i, v in enumerate(np.atleast_1d(g)):
                partials[f"{name}[{i}]" if p.value.ndim else name] = float(v)
            p.grad = None
    return DualValue(float(t.value), partials)


def contradiction_loss(graph: NeuronGraph) -> DualValue:
    """Total contradiction over the graph's current bounds, with parameter partials."""
    return _dual(contradiction_term(graph)[0], graph)


def composite_loss(graph: NeuronGraph, config: TrainConfig = TrainConfig()) -> DualValue:
    """(1 + contradiction) / (1 + factalign + tightbounds) on the current bounds."""
    return _dual(loss_terms(graph, config).total, graph)


# --------------------------------------------------------------------------
# constraints
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint: str  # "true-operand" (one per operand) or "all-false"
    operand: int | None
    margin: float


def constraint_margins(params: ConnectiveParams, alpha: float | None = None,
                       slack: Sequence[float] | float | None = None) -> list[Violation]:
    """Margins of the classical-behaviour constraints of a disjunction; negative means violated.

    Per operand i: α w_i − β + 1 ≥ α.  Jointly: Σ (1 − α) w_i − β + 1 ≤ 1 − α.
    Slacks, when given, are added to the margins (one per operand, then one
    for the joint constraint, or a single value for all).
    """
    alpha = params.alpha if alpha is None else alpha
    w, b = params.weights, params.bias
    n = len(w)
    s = [0.0] * (n + 1) if slack is None else ([float(slack)] * (n + 1) if np.isscalar(slack) else list(slack))
    if len(s) != n + 1:
        raise ValueError(f"need {n + 1} slack values")
    out = [Violation("true-operand", i, alpha * wi - b + 1.0 - alpha + s[i]) for i, wi in enumerate(w)]
    out.append(Violation("all-false", None, (1.0 - alpha) - (sum((1.0 - alpha) * wi for wi in w) - b + 1.0) + s[n]))
    return out


def check_constraints(params: ConnectiveParams, alpha: float | None = None,
                      slack: Sequence[float] | float | None = None, tol: float = 1e-12) -> list[Violation]:
    """Only the violated constraints (margin below −tol)."""
    return [v for v in constraint_margins(params, alpha, slack) if v.margin < -tol]


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


def parameter_slots(graph: NeuronGraph) -> list[tuple[str, tape.Tensor]]:
    out = []
    for n in graph.nodes:
        if n.w is not None:
            out.append((f"n{n.id}.w", n.w))
            out.append((f"n{n.id}.beta", n.b))
    for a in graph.assertions:
        out.append((f"{a.kind}:{a.name}.L", a.L))
        out.append((f"{a.kind}:{a.name}.U", a.U))
    return out


def select_parameters(graph: NeuronGraph, groups: Sequence[str]) -> list[tape.Tensor]:
    """Turn the chosen parameter groups into gradient leaves; the rest become constants."""
    out = []
    for n in graph.nodes:
        if n.w is not None:
            n.w = tape.param(n.w.value) if "weights" in groups else tape.Tensor(n.w.value)
            n.b = tape.param(n.b.value) if "bias" in groups else tape.Tensor(n.b.value)
            out += [t for t in (n.w, n.b) if t.requires_grad]
    for a in graph.assertions:
        on = ("facts" if a.kind == "fact" else "axioms") in groups
        a.L = tape.param(a.L.value) if on else tape.Tensor(a.L.value)
        a.U = tape.param(a.U.value) if on else tape.Tensor(a.U.value)
        out += [t for t in (a.L, a.U) if t.requires_grad]
    return out


def project(graph: NeuronGraph, config: TrainConfig) -> None:
    """Restore parameter domains in place."""
    for n in graph.nodes:
        if n.w is None:
            continue
        w = n.w.value
        if config.normalize_weights and w.size and w.max() > 1.0:
            w = w / w.max()
        n.w.value = np.clip(w, config.w_min, 1.0)
        n.b.value = np.maximum(n.b.value, 0.0)
    for a in graph.assertions:
        lo, hi = np.clip(a.L.value, 0.0, 1.0), np.clip(a.U.value, 0.0, 1.0)
        crossed = lo > hi
        mid = (lo + hi) / 2.0
        a.L.value = np.where(crossed, mid, lo)
        a.U.value = np.where(crossed, mid, hi)


def _sync_params(graph: NeuronGraph) -> None:
    for n in graph.nodes:
        if n.params is not None and n.w is not None:
            object.__setattr__(n.params, "weights", tuple(float(x) for x in n.w.value))
            object.__setattr__(n.params, "bias", float(n.b.value))


def _round(obj: Any) -> Any:
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round(v) for v in obj]
    return obj


def snapshot(graph: NeuronGraph) -> dict[str, Any]:
    """All parameter values at full precision."""
    f = float
    return {
        "weights": {str(n.id): {"label": n.label, "w": [f(x) for x in n.w.value], "beta": f(n.b.value)}
                    for n in graph.nodes if n.w is not None},
        "assertions": [
            {"kind": a.kind, "name": a.name, "rows": [list(k) for k in a.keys],
             "L": [f(x) for x in np.atleast_1d(a.L.value)], "U": [f(x) for x in np.atleast_1d(a.U.value)]}
            for a in graph.assertions
        ],
    }


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


def evaluate(graph: NeuronGraph, config: TrainConfig = TrainConfig(), epoch: int = 0) -> tuple[LossTerms, EpochRecord]:
    graph.reset()
    rep = infer(graph, config=config.inference())
    terms = loss_terms(graph, config)
    rec = EpochRecord(epoch, float(terms.total.value), float(terms.contradiction.value),
                      float(terms.factalign.value), float(terms.tightbounds.value), terms.count,
                      rep.iterations, rep.converged)
    return terms, rec


def train(graph: NeuronGraph, config: TrainConfig = TrainConfig(),
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainReport:
    if config.alpha != graph.alpha:
        warnings.warn(f"graph alpha {graph.alpha} differs from config alpha {config.alpha}; using the graph's")
    params = select_parameters(graph, config.train)
    if config.init_noise > 0:
        rng = np.random.default_rng(config.seed)
        for n in graph.nodes:
            if n.w is not None and n.w.requires_grad:
                n.w.value = n.w.value + rng.uniform(-config.init_noise, config.init_noise, n.w.value.shape)
        project(graph, config)
    report = TrainReport(config)
    for epoch in range(config.epochs):
        terms, rec = evaluate(graph, config, epoch)
        rec.lr = config.lr(epoch)
        if epoch == 0:
            report.initial = rec
        report.history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        for p in params:
            p.grad = None
        tape.backward(terms.total)
        for p in params:
            if p.grad is None:
                continue
            p.value = p.value - rec.lr * np.clip(p.grad, -config.grad_clip, config.grad_clip)
            p.grad = None
        project(graph, config)
    _sync_params(graph)
    _, final = evaluate(graph, config, config.epochs)
    report.final = final
    if report.initial is None:
        report.initial = final
    report.parameters = snapshot(graph)
    return report


def finite_diff_gradient(
    graph: NeuronGraph,
    loss: Callable[[NeuronGraph], float],
    parameter: tape.Tensor,
    index: int | tuple = (),
    h: float = 1e-6,
    domain: tuple[float, float] = (-np.inf, np.inf),
) -> float:
    """Central difference of ``loss`` in one parameter entry, re-running ``loss`` each time.

    Near a domain edge a one-sided difference is used and a warning is issued.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = np.array(parameter.value, dtype=float)
    if index == () and base.ndim:
        if base.size != 1:
            raise ValueError("index required for a parameter with several entries")
        index = (0,) * base.ndim
    x = float(base[index])

    def at(v: float) -> float:
        arr = base.copy()
        arr[index] = v
        parameter.value = arr
        return float(loss(graph))

    try:
        if x - h < domain[0]:
            warnings.warn("parameter at lower domain edge; using a forward difference")
            return (at(x + h) - at(x)) / h
        if x + h > domain[1]:
            warnings.warn("parameter at upper domain edge; using a backward difference")
            return (at(x) - at(x - h)) / h
        return (at(x + h) - at(x - h)) / (2.0 * h)
    finally:
        parameter.value = base


# --------------------------------------------------------------------------
# locating faulty axioms
# --------------------------------------------------------------------------


def down_weight(graph: NeuronGraph, axiom: str, lower: float = 0.0) -> None:
    """Lower an axiom's asserted truth so it no longer forces its groundings.

    The graph is reset so the next inference starts from the new assertion.
    """
    for a in graph.assertions:
        if a.kind == "axiom" and a.name == axiom:
            a.L = tape.Tensor(np.minimum(a.L.value, lower))
            graph.reset()
            return
    raise KeyError(f"no axiom {axiom!r}")


def axiom_blame(graph: NeuronGraph, config: InferenceConfig = InferenceConfig()) -> dict[str, int]:
    """Contradictory rows left after relaxing each axiom in turn (fewest first).

    The graph's assertions are restored afterwards.
    """
    saved = [(a.L, a.U) for a in graph.assertions]
    out = {}
    try:
        for a in graph.assertions:
            if a.kind != "axiom":
                continue
            old = a.L
            a.L = tape.Tensor(np.zeros_like(old.value))
            graph.reset()
            infer(graph, config=config)
            out[a.name] = len(graph.contradictions())
            a.L = old
    finally:
        for a, (lo, hi) in zip(graph.assertions, saved):
            a.L, a.U = lo, hi
        graph.reset()
    return dict(sorted(out.items(), key=lambda kv: kv[1]))


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def save_checkpoint(graph: NeuronGraph, path: str | Path) -> None:
    """Field order: version, family, alpha, weights (by node id), assertions (graph order)."""
    data = {"version": CHECKPOINT_VERSION, "family": graph.family, "alpha": graph.alpha, **snapshot(graph)}
    Path(path).write_text(json.dumps(data, indent=2))


def load_checkpoint(graph: NeuronGraph, path: str | Path) -> None:
    data = json.loads(Path(path).read_text())
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')}")
    restore(graph, data)


def restore(graph: NeuronGraph, parameters: dict[str, Any]) -> None:
    """Write a :func:`snapshot` back into the graph (as constants)."""
    for nid, rec in parameters["weights"].items():
        n = graph.nodes[int(nid)]
        n.w = tape.Tensor(np.array(rec["w"], dtype=float))
        n.b = tape.Tensor(np.array(rec["beta"], dtype=float))
    if len(parameters["assertions"]) != len(graph.assertions):
        raise ValueError("parameters do not match the graph")
    for a, rec in zip(graph.assertions, parameters["assertions"]):
        shape = a.L.value.shape
        a.L = tape.Tensor(np.array(rec["L"], dtype=float).reshape(shape))
        a.U = tape.Tensor(np.array(rec["U"], dtype=float).reshape(shape))
    _sync_params(graph)
