import itertools
import math

import pytest
from hypothesis import assume, given, strategies as st

from boundlogic.semantics import (
    Bounds, ConnectiveParams, DualValue, alpha_floor, godel_and, godel_implies, godel_or, logistic_coefficients,
    logistic_connective, logistic_eval, logistic_inverse, luk_and, luk_or, luk_residuum, negation,
    tailored_connective, tailored_eval, tailored_inverse, tailored_points, transparent_clamp,
)

P = ConnectiveParams
approx = lambda v: pytest.approx(v, abs=1e-12)  # noqa: E731


# --------------------------------------------------------------------------
# worked values
# --------------------------------------------------------------------------

@pytest.mark.parametrize("w, x, out", [([1, 1], [1, 1], 1.0), ([1, 1], [0.6, 0.7], 0.3), ([2, 1], [0.9, 0.4], 0.2)])
def test_luk_and_values(w, x, out):
    assert luk_and(P(tuple(w), 1.0), x).value == approx(out)


@pytest.mark.parametrize("w, x, out", [([1, 1], [0, 0], 0.0), ([1, 1], [0.6, 0.7], 1.0), ([0.5, 1], [0.4, 0.3], 0.5)])
def test_luk_or_values(w, x, out):
    assert luk_or(P(tuple(w), 1.0), x).value == approx(out)


@pytest.mark.parametrize("x, y, out", [(1, 0, 0.0), (0.8, 0.6, 0.8), (0.3, 0.1, 0.8)])
def test_luk_residuum_values(x, y, out):
    assert luk_residuum(P(), x, y).value == approx(out)


def test_godel_values():
    assert godel_and(P((1, 1), 1.0, family="godel"), [0.6, 0.7]).value == approx(0.6)
    assert godel_and(P((2, 1), 1.0, family="godel"), [0.9, 0.4]).value == approx(0.4)
    assert godel_or(P((1, 1), 1.0, family="godel"), [0.2, 0.5]).value == approx(0.5)


def test_godel_tie_routes_to_lowest_index():
    d = godel_and(P((1, 1), family="godel"), [0.5, 0.5])
    assert d.partials["x0"] == 1.0 and d.partials["x1"] == 0.0


def test_godel_implies_classical_and_residuum():
    p = P(family="godel")
    for x, y in itertools.product((0.0, 1.0), repeat=2):
        assert godel_implies(p, x, y).value == float((not x) or y)
    assert godel_implies(p, 0.7, 0.4).value == approx(0.4)
    assert godel_implies(p, 0.3, 0.4).value == 1.0


def test_tailored_values():
    p = P((1, 1), 1.0, 0.8, "tailored")
    assert tailored_eval(p, 0.4).value == approx(0.2)
    assert tailored_eval(p, 0.6).value == approx(0.5)
    assert tailored_inverse(p, 0.5) == approx(0.6)
    assert tailored_inverse(p, 0.0) == 0.0
    assert tailored_inverse(p, 1.0) == approx(2.0)


def test_tailored_zero_weight_identity():
    p = P((0.0, 1.0), 1.0, 1.0, "tailored")
    for x2 in [i / 20 for i in range(21)]:
        assert tailored_connective(p, [0.3, x2]).value == approx(x2)


def test_logistic_values():
    p = P((1, 1), 1.0, 0.8, "logistic")
    A, B = logistic_coefficients(p)
    assert A == pytest.approx(6.9315, abs=1e-4)
    assert B == pytest.approx(4.1589, abs=1e-4)
    assert logistic_eval(p, 0.4).value == pytest.approx(0.2, abs=1e-12)
    assert logistic_eval(p, 0.8).value == pytest.approx(0.8, abs=1e-12)
    assert logistic_eval(p, 0.6).value == pytest.approx(0.5, abs=1e-12)
    assert logistic_inverse(p, 0.5) == pytest.approx(0.6, abs=1e-12)


def test_logistic_rejects_alpha_one():
    with pytest.raises(ValueError):
        logistic_coefficients(P((1, 1), 1.0, 1.0, "logistic"))


def test_transparent_clamp_values():
    d = transparent_clamp(DualValue(1.5, {"x": 1.0}), 0, 1, 1.0)
    assert (d.value, d.partials["x"]) == (1.0, 1.0)
    for a in (0.0, 0.3, 1.0):
        d = transparent_clamp(DualValue(0.5, {"x": 1.0}), 0, 1, a)
        assert (d.value, d.partials["x"]) == (0.5, 1.0)
    d = transparent_clamp(DualValue(-0.3, {"x": 1.0}), 0, 1, 0.2)
    assert (d.value, d.partials["x"]) == (0.0, 0.2)
    with pytest.raises(ValueError):
        transparent_clamp(0.5, 1, 0)


def test_negation():
    assert negation(0.3).value == approx(0.7) and negation(0.3).partials == {"x": -1.0}


# --------------------------------------------------------------------------
# parameter validation
# --------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(weights=(-1, 1)), dict(bias=-0.1), dict(alpha=0.5), dict(alpha=1.1),
                                dict(family="product"), dict(weights=(math.inf, 1)), dict(biases=(1,))])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        P(**kw)


def test_tailored_alpha_floor():
    assert alpha_floor((1, 1)) == pytest.approx(2 / 3)
    P((1, 1), alpha=0.7, family="tailored")
    with pytest.raises(ValueError):
        P((1, 1), alpha=0.6, family="tailored")


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------

def test_classical_closure():
    for n in (2, 3):
        p = P((1.0,) * n, 1.0)
        pg = P((1.0,) * n, 1.0, family="godel")
        for x in itertools.product((0.0, 1.0), repeat=n):
            assert luk_and(p, x).value == float(all(x))
            assert luk_or(p, x).value == float(any(x))
            assert godel_and(pg, x).value == float(all(x))
            assert godel_or(pg, x).value == float(any(x))
    for x, y in itertools.product((0.0, 1.0), repeat=2):
        assert luk_residuum(P(), x, y).value == float((not x) or y)


unit = st.floats(0, 1, allow_nan=False)
wt = st.floats(0, 2, allow_nan=False)


@given(st.lists(st.tuples(wt, unit), min_size=2, max_size=4), st.floats(0, 2), unit, st.integers(0, 3))
def test_monotone_in_each_operand(pairs, beta, bump, k):
    w = tuple(p[0] for p in pairs)
    x = [p[1] for p in pairs]
    k %= len(x)
    y = list(x)
    y[k] = max(x[k], bump)
    for fn, fam in ((luk_and, "lukasiewicz"), (luk_or, "lukasiewicz"), (godel_and, "godel"), (godel_or, "godel")):
        p = P(w, beta, family=fam)
        assert fn(p, y).value >= fn(p, x).value - 1e-12


@given(unit, unit, unit, wt, wt, st.floats(0, 2))
def test_residuum_antitone_monotone(x, x2, y, wx, wy, beta):
    p = P((wx, wy), beta)
    lo, hi = sorted((x, x2))
    assert luk_residuum(p, hi, y).value <= luk_residuum(p, lo, y).value + 1e-12
    assert luk_residuum(p, x, min(1, y + 0.1)).value >= luk_residuum(p, x, y).value - 1e-12


@given(st.lists(st.tuples(wt, unit), min_size=1, max_size=4), st.floats(0, 2))
def test_de_morgan(pairs, beta):
    p = P(tuple(q[0] for q in pairs), beta)
    x = [q[1] for q in pairs]
    assert luk_and(p, x).value == pytest.approx(1 - luk_or(p, [1 - v for v in x]).value, abs=1e-12)


@given(unit, unit, wt, wt, st.floats(0, 2))
def test_residuum_is_disjunction_of_negated_antecedent(x, y, wx, wy, beta):
    p = P((wx, wy), beta)
    assert luk_residuum(p, x, y).value == pytest.approx(luk_or(p, [1 - x, y]).value, abs=1e-12)


alphas = st.floats(0.75, 1.0)


@given(st.lists(st.floats(0.1, 1.0), min_size=2, max_size=3), alphas, st.sampled_from(["or", "and"]))
def test_tailored_critical_points(w, alpha, form):
    assume(alpha >= alpha_floor(w) + 1e-9)
    p = P(tuple(w), 1.0, alpha, "tailored")
    xf, xt, xm = tailored_points(w, alpha, form)
    assert tailored_eval(p, 0.0, form).value == approx(0.0)
    assert tailored_eval(p, xm, form).value == approx(1.0)
    if xf > 0:
        assert tailored_eval(p, xf, form).value == approx(1 - alpha)
    if xt < xm:
        assert tailored_eval(p, xt, form).value == approx(alpha)


@given(st.lists(st.floats(0.1, 1.0), min_size=2, max_size=3), st.floats(0.75, 0.99), unit,
       st.sampled_from(["or", "and"]))
def test_tailored_inverse_round_trip(w, alpha, frac, form):
    assume(alpha >= alpha_floor(w) + 1e-6)
    p = P(tuple(w), 1.0, alpha, "tailored")
    s = frac * sum(w)
    assert tailored_inverse(p, tailored_eval(p, s, form).value, form) == pytest.approx(s, abs=1e-9)


@given(st.lists(st.floats(0.1, 1.0), min_size=2, max_size=3), st.floats(0.75, 0.99))
def test_tailored_classical_behaviour(w, alpha):
    assume(alpha >= alpha_floor(w) + 1e-9)
    p = P(tuple(w), 1.0, alpha, "tailored")
    # a true heaviest operand decides a disjunction, a false one a conjunction
    k = max(range(len(w)), key=lambda i: w[i])
    for x in itertools.product((0.0, 1.0), repeat=len(w)):
        y_or = tailored_connective(p, x, "or").value
        y_and = tailored_connective(p, x, "and").value
        if x[k] == 1.0:
            assert y_or >= alpha - 1e-12
        if not any(x):
            assert y_or <= 1 - alpha + 1e-12
        if x[k] == 0.0:
            assert y_and <= 1 - alpha + 1e-12
        if all(x):
            assert y_and >= alpha - 1e-12


def test_zero_weight_conjunction_identity_grid():
    p = P((0.0, 1.0), 1.0, 1.0, "tailored")
    for i in range(101):
        x2 = i / 100
        assert tailored_connective(p, [0.37, x2], "and").value == x2


# --------------------------------------------------------------------------
# gradients against central differences
# --------------------------------------------------------------------------

H = 1e-6


def fd_check(fn, point: dict, partials: dict, tol=1e-4):
    for name, analytic in partials.items():
        up, dn = dict(point), dict(point)
        up[name] += H
        dn[name] -= H
        numeric = (fn(up) - fn(dn)) / (2 * H)
        assert abs(analytic - numeric) <= tol * max(1.0, abs(numeric)), (name, analytic, numeric)


def luk_point(d, n, kind):
    w = tuple(d[f"w{i}"] for i in range(n))
    x = [d[f"x{i}"] for i in range(n)]
    fn = luk_and if kind == "and" else luk_or
    return fn(P(w, d["beta"]), x)


@given(st.integers(2, 3), st.sampled_from(["and", "or"]), st.data())
def test_luk_gradients(n, kind, data):
    d = {f"x{i}": data.draw(st.floats(0.05, 0.95)) for i in range(n)}
    d.update({f"w{i}": data.draw(st.floats(0.1, 1.0)) for i in range(n)})
    d["beta"] = data.draw(st.floats(0.5, 1.5))
    out = luk_point(d, n, kind)
    raw = luk_point(d, n, kind).value
    assume(0.01 < raw < 0.99)
    fd_check(lambda q: luk_point(q, n, kind).value, d, out.partials)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 1), st.floats(0.1, 1), st.floats(0.5, 1.5))
def test_residuum_gradients(x, y, wx, wy, beta):
    f = lambda q: luk_residuum(P((q["w_x"], q["w_y"]), q["beta"]), q["x"], q["y"])  # noqa: E731
    d = {"x": x, "y": y, "w_x": wx, "w_y": wy, "beta": beta}
    out = f(d)
    assume(0.01 < out.value < 0.99)
    fd_check(lambda q: f(q).value, d, out.partials)


@given(st.integers(2, 3), st.sampled_from(["and", "or"]), st.data())
def test_godel_gradients(n, kind, data):
    d = {f"x{i}": data.draw(st.floats(0.05, 0.95)) for i in range(n)}
    d.update({f"w{i}": data.draw(st.floats(0.1, 1.0)) for i in range(n)})
    d.update({f"beta{i}": data.draw(st.floats(0.5, 1.5)) for i in range(n)})

    def f(q):
        p = P(tuple(q[f"w{i}"] for i in range(n)), 1.0, family="godel",
              biases=tuple(q[f"beta{i}"] for i in range(n)))
        return (godel_and if kind == "and" else godel_or)(p, [q[f"x{i}"] for i in range(n)])

    out = f(d)
    terms = sorted(
        (d[f"beta{i}"] - d[f"w{i}"] * (1 - d[f"x{i}"])) if kind == "and" else (1 - d[f"beta{i}"] + d[f"w{i}"] * d[f"x{i}"])
        for i in range(n)
    )
    assume(terms[1] - terms[0] > 1e-3 and terms[-1] - terms[-2] > 1e-3)
    assume(0.01 < out.value < 0.99)
    fd_check(lambda q: f(q).value, d, out.partials)


@given(st.integers(2, 3), st.sampled_from(["and", "or"]), st.floats(0.8, 0.97), st.data())
def test_tailored_gradients(n, form, alpha, data):
    d = {f"x{i}": data.draw(st.floats(0.0, 1.0)) for i in range(n)}
    d.update({f"w{i}": data.draw(st.floats(0.3, 1.0)) for i in range(n)})
    d["alpha"] = alpha
    w = [d[f"w{i}"] for i in range(n)]
    assume(alpha > alpha_floor(w) + 1e-3)
    ws = sorted(w)
    assume(ws[-1] - ws[-2] > 1e-3)  # unique w_max
    s = sum(d[f"x{i}"] * d[f"w{i}"] for i in range(n))
    assume(all(abs(s - c) > 1e-3 for c in (0.0, *tailored_points(w, alpha, form))))

    def f(q):
        p = P(tuple(q[f"w{i}"] for i in range(n)), 1.0, q["alpha"], "tailored")
        return tailored_connective(p, [q[f"x{i}"] for i in range(n)], form)

    fd_check(lambda q: f(q).value, d, f(d).partials)


@given(st.integers(2, 3), st.sampled_from(["and", "or"]), st.floats(0.8, 0.97), st.data())
def test_logistic_gradients(n, form, alpha, data):
    d = {f"x{i}": data.draw(st.floats(0.0, 1.0)) for i in range(n)}
    d.update({f"w{i}": data.draw(st.floats(0.3, 1.0)) for i in range(n)})
    d["alpha"] = alpha
    w = [d[f"w{i}"] for i in range(n)]
    assume(alpha > alpha_floor(w) + 1e-3)
    ws = sorted(w)
    assume(ws[-1] - ws[-2] > 1e-3)

    def f(q):
        p = P(tuple(q[f"w{i}"] for i in range(n)), 1.0, q["alpha"], "logistic")
        return logistic_connective(p, [q[f"x{i}"] for i in range(n)], form)

    fd_check(lambda q: f(q).value, d, f(d).partials)


def test_bounds_helpers():
    b = Bounds(0.2, 0.9)
    assert tuple(b) == (0.2, 0.9) and b[0] == 0.2 and b[1] == 0.9
    assert b.tighten(Bounds(0.5, 1.0)) == Bounds(0.5, 0.9)
    assert Bounds(0.8, 0.3).contradictory and not b.contradictory
