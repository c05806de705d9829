import json
import warnings

import numpy as np
import pytest

from boundlogic import Bounds, NeuronGraph, compile, parse_kb, tape
from boundlogic.fol import VariableMap
from boundlogic.inference import InferenceConfig
from boundlogic.learning import (
    CHECKPOINT_VERSION,
    TrainConfig,
    axiom_blame,
    check_constraints,
    composite_loss,
    constraint_margins,
    contradiction_loss,
    down_weight,
    evaluate,
    finite_diff_gradient,
    load_checkpoint,
    parameter_slots,
    restore,
    save_checkpoint,
    select_parameters,
    train,
)
from boundlogic.semantics import ConnectiveParams

SMOOTH = """pred p/0
pred q/0
pred r/0
axiom a : (p & q^0.8) -> r : [0.7,1]
fact p : [0.7,0.9]
fact q : [0.6,0.95]
fact r : [0.1,0.6]
"""

CLASH = "pred x/0\nfact x : [1,1]\naxiom nx : ~x\n"


def with_bounds(pairs):
    g = NeuronGraph()
    for i, _ in enumerate(pairs):
        g.add_atom(f"p{i}")
        g.add_query(f"q{i}", VariableMap.identity(i, ()))
    g.ground()
    for i, (lo, hi) in enumerate(pairs):
        g.nodes[i].table.L.value[0], g.nodes[i].table.U.value[0] = lo, hi
    return g


# ---------------------------------------------------------------- loss terms


@pytest.mark.parametrize("pairs, expect", [
    ([(0.2, 0.4), (1, 1)], 0.0),
    ([(0.8, 0.3)], 0.5),
    ([(0.6, 0.5), (0.9, 0.2)], 0.8),
])
def test_contradiction_loss_examples(pairs, expect):
    assert contradiction_loss(with_bounds(pairs)).value == pytest.approx(expect)


def test_composite_loss_half_on_tight_consistent_start():
    g = compile(parse_kb("pred p/0\npred q/0\nfact p : [1,1]\nfact q : [0,0]\naxiom a : p | q\n"))
    terms, rec = evaluate(g)
    assert (rec.contradiction, rec.factalign, rec.tightbounds) == (0.0, 0.0, 1.0)
    assert rec.loss == pytest.approx(0.5)
    assert composite_loss(g).value == pytest.approx(0.5)


# ---------------------------------------------------------------- constraints


def test_constraint_at_boundary_is_satisfied():
    p = ConnectiveParams((1.0,), 1.0, 0.8)
    assert constraint_margins(p)[0].margin == pytest.approx(0.0)
    assert not [v for v in check_constraints(p, tol=1e-12) if v.constraint == "true-operand"]


def test_zero_weight_violates_unless_slack():
    p = ConnectiveParams((0.0, 1.0), 1.0, 0.8)
    bad = [v for v in check_constraints(p) if v.constraint == "true-operand"]
    assert len(bad) == 1 and bad[0].operand == 0 and bad[0].margin == pytest.approx(-0.8)
    assert not [v for v in check_constraints(p, slack=[0.8, 0.0, 0.0]) if v.constraint == "true-operand"]


def test_classical_unit_parameters_are_tight():
    margins = constraint_margins(ConnectiveParams((1.0, 1.0), 1.0, 1.0))
    assert all(m.margin == pytest.approx(0.0) for m in margins)


def test_slack_length_checked():
    with pytest.raises(ValueError):
        constraint_margins(ConnectiveParams((1.0, 1.0), 1.0, 0.9), slack=[0.1])


# ---------------------------------------------------------------- training


def test_clash_training_removes_contradiction():
    g = compile(parse_kb(CLASH))
    rep = train(g, TrainConfig(train=("facts", "axioms")))
    losses = [r.contradiction for r in rep.history]
    assert rep.initial.contradiction > 0 and rep.final.contradictions == 0
    first = losses.index(0.0)  # afterwards tightness pulls the bounds back and forth around zero
    assert all(b <= a + 1e-12 for a, b in zip(losses[:first], losses[1:first + 1]))


def test_clash_fact_only_budget():
    # the schedule moves one bound by at most sum(lr) * clip = 0.5, short of the gap of 1
    g = compile(parse_kb(CLASH))
    rep = train(g, TrainConfig(train=("facts",)))
    assert rep.final.contradiction < rep.initial.contradiction
    assert rep.parameters["assertions"][0]["L"][0] == pytest.approx(0.495)


def test_zero_epochs_report_is_initial_evaluation():
    g = compile(parse_kb(SMOOTH))
    rep = train(g, TrainConfig(epochs=0))
    _, rec = evaluate(compile(parse_kb(SMOOTH)))
    assert rep.initial == rep.final
    assert rep.final.loss == rec.loss and rep.history == []


def test_projection_keeps_domains():
    g = compile(parse_kb(SMOOTH + "fact p : [0.9,1]\n"))
    cfg = TrainConfig(epochs=15, lr_start=2.0, grad_clip=1.0, train=("weights", "bias", "axioms", "facts"))
    seen = []

    def check(_rec):
        for n in g.nodes:
            if n.w is not None:
                seen.append(n.w.value.copy())
                assert np.all(n.w.value >= cfg.w_min - 1e-15) and np.all(n.w.value <= 1.0)
                assert np.all(n.b.value >= 0)
        for a in g.assertions:
            assert np.all((0 <= a.L.value) & (a.L.value <= a.U.value) & (a.U.value <= 1))

    train(g, cfg, on_epoch=check)
    assert seen


def test_final_loss_reproducible_from_report():
    g = compile(parse_kb(SMOOTH))
    cfg = TrainConfig(epochs=10)
    rep = train(g, cfg)
    fresh = compile(parse_kb(SMOOTH))
    restore(fresh, rep.parameters)
    select_parameters(fresh, cfg.train)  # factalign only counts trainable bounds
    _, rec = evaluate(fresh, cfg)
    assert abs(rec.loss - rep.end_loss) <= 1e-9


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=8, init_noise=0.2, seed=3)
    a = train(compile(parse_kb(SMOOTH)), cfg).to_json()
    b = train(compile(parse_kb(SMOOTH)), cfg).to_json()
    assert a == b
    c = train(compile(parse_kb(SMOOTH)), TrainConfig(epochs=8, init_noise=0.2, seed=4)).to_json()
    assert c != a


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        TrainConfig(train=("everything",))
    with pytest.raises(ValueError):
        TrainConfig(factalign_over="nodes")


def test_report_json_terms_match_history():
    rep = train(compile(parse_kb(SMOOTH)), TrainConfig(epochs=3))
    d = json.loads(rep.to_json())
    assert len(d["history"]) == 3 and d["final"]["epoch"] == 3
    r = d["history"][0]
    assert r["loss"] == pytest.approx((1 + r["contradiction"]) / (1 + r["factalign"] + r["tightbounds"]))


# ---------------------------------------------------------------- gradients


def analytic_and_numeric(text, cfg):
    g = compile(parse_kb(text))
    select_parameters(g, cfg.train)
    terms, _ = evaluate(g, cfg)
    slots = [(n, p) for n, p in parameter_slots(g) if p.requires_grad]
    for _, p in slots:
        p.grad = None
    tape.backward(terms.total)
    grads = {n: np.atleast_1d(np.zeros(p.value.shape) if p.grad is None else p.grad).copy() for n, p in slots}
    loss = lambda gg: evaluate(gg, cfg)[1].loss  # noqa: E731
    pairs = []
    for n, p in slots:
        bounded = not n.startswith("n")
        for i in range(np.atleast_1d(p.value).size):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fd = finite_diff_gradient(g, loss, p, i if p.value.ndim else (), 1e-6,
                                          (0.0, 1.0) if bounded else (-np.inf, np.inf))
            pairs.append((n, grads[n][i], fd))
    return pairs


@pytest.mark.parametrize("scale", [1.0, 0.0])
def test_gradients_match_finite_differences(scale):
    cfg = TrainConfig(grad_scale=scale, train=("weights", "bias", "axioms", "facts"))
    pairs = analytic_and_numeric(SMOOTH, cfg)
    assert any(abs(a) > 1e-3 for _, a, _ in pairs)
    for name, a, fd in pairs:
        if name.endswith(".U") and name.startswith("axiom"):
            continue  # U = 1 sits on the domain edge; one-sided difference is not the analytic partial
        assert a == pytest.approx(fd, rel=1e-4, abs=1e-8), name


def test_saturated_clamp_gradient_is_transparent():
    # p true saturates the disjunction at 1, so the value ignores q's weight,
    # yet the transparent clamp still passes a gradient
    text = "pred p/0\npred q/0\nfact p : [1,1]\nfact q : [0.6,1]\nquery o : p | q\n"
    cfg = TrainConfig(grad_scale=1.0, train=("weights",))
    pairs = dict((n + str(i), (a, fd)) for i, (n, a, fd) in enumerate(analytic_and_numeric(text, cfg)))
    a, fd = pairs["n2.w1"]
    assert fd == pytest.approx(0.0, abs=1e-9)
    assert abs(a) > 1e-3
    cfg0 = TrainConfig(grad_scale=0.0, train=("weights",))
    pairs0 = dict((n + str(i), (a, fd)) for i, (n, a, fd) in enumerate(analytic_and_numeric(text, cfg0)))
    assert pairs0["n2.w1"][0] == pytest.approx(0.0, abs=1e-12)


def test_finite_difference_edges_warn():
    g = compile(parse_kb(SMOOTH))
    select_parameters(g, ("axioms",))
    loss = lambda gg: evaluate(gg)[1].loss  # noqa: E731
    axiom = next(a for a in g.assertions if a.kind == "axiom")
    with pytest.warns(UserWarning):
        finite_diff_gradient(g, loss, axiom.U, (), 1e-6, (0.0, 1.0))
    with pytest.raises(ValueError):
        finite_diff_gradient(g, loss, axiom.U, (), 0.0)


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path):
    g = compile(parse_kb(SMOOTH))
    rep = train(g, TrainConfig(epochs=5))
    path = tmp_path / "ck.json"
    save_checkpoint(g, path)
    data = json.loads(path.read_text())
    assert list(data)[:3] == ["version", "family", "alpha"] and data["version"] == CHECKPOINT_VERSION
    fresh = compile(parse_kb(SMOOTH))
    load_checkpoint(fresh, path)
    select_parameters(fresh, TrainConfig().train)
    assert abs(evaluate(fresh)[1].loss - rep.end_loss) <= 1e-9


def test_checkpoint_version_checked(tmp_path):
    path = tmp_path / "ck.json"
    path.write_text(json.dumps({"version": 99}))
    with pytest.raises(ValueError):
        load_checkpoint(compile(parse_kb(SMOOTH)), path)


# ---------------------------------------------------------------- faulty axioms

FAULTY = """pred A/1
pred B/1
const a b
axiom ab : A(x) -> B(x)
axiom bad : A(x) -> ~B(x)
fact A(a) : [1,1]
query qb : B(x)
"""


def test_axiom_blame_ranks_the_faulty_axiom_with_the_other_one():
    g = compile(parse_kb(FAULTY))
    blame = axiom_blame(g)
    # either axiom alone is consistent, so both rank at zero
    assert blame == {"ab": 0, "bad": 0}
    assert g.contradictions() == []  # graph was reset


def test_down_weight_restores_answers():
    g = compile(parse_kb(FAULTY))
    from boundlogic import infer

    infer(g)
    assert g.contradictions()
    down_weight(g, "bad")  # resets the graph
    infer(g)
    assert g.contradictions() == []
    assert g.answer("qb")[("a",)] == Bounds(1, 1)


def test_down_weight_unknown_axiom():
    with pytest.raises(KeyError):
        down_weight(compile(parse_kb(FAULTY)), "missing")


def test_inference_config_forwarded():
    cfg = TrainConfig(epsilon=1e-6, max_iters=7, contain_contradictions=True, grad_scale=0.5)
    ic = cfg.inference()
    assert isinstance(ic, InferenceConfig)
    assert (ic.epsilon, ic.max_iters, ic.contain_contradictions, ic.grad_scale) == (1e-6, 7, True, 0.5)
