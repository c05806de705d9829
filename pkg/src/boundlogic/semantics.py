"""Activation families for weighted real-valued connectives.

Every evaluation returns a :class:`DualValue` holding the value together with
analytic partial derivatives keyed by input/parameter name:

* ``x0, x1, ...`` operand truth values (``x``/``y`` for implication),
* ``w0, w1, ...`` operand weights (``w_x``/``w_y`` for implication),
* ``beta`` the connective bias (``beta0, beta1, ...`` for per-operand Gödel biases),
* ``alpha`` the threshold of truth, ``s`` a weighted pre-activation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

FAMILIES = ("lukasiewicz", "godel", "tailored", "logistic", "probability")


@dataclass(frozen=True)
class Bounds:
    """Lower/upper truth-value bounds; ``lower > upper`` is a contradiction."""

    lower: float = 0.0
    upper: float = 1.0

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __getitem__(self, i: int) -> float:
        return (self.lower, self.upper)[i]

    @property
    def contradictory(self) -> bool:
        return self.lower > self.upper

    def tighten(self, other: "Bounds") -> "Bounds":
        return Bounds(max(self.lower, other.lower), min(self.upper, other.upper))


UNKNOWN = Bounds(0.0, 1.0)


@dataclass(frozen=True)
class ConnectiveParams:
    weights: tuple[float, ...] = (1.0, 1.0)
    bias: float = 1.0
    alpha: float = 1.0
    family: str = "lukasiewicz"
    # per-operand biases, used by the Gödel family; defaults to ``bias`` everywhere
    biases: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (0.5 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (1/2, 1], got {self.alpha}")
        for w in (*self.weights, self.bias, *(self.biases or ())):
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weights and biases must be finite and nonnegative, got {w}")
        if self.biases is not None and len(self.biases) != len(self.weights):
            raise ValueError("one bias per operand required")
        if self.family in ("tailored", "logistic"):
            total, wmax = sum(self.weights), max(self.weights, default=0.0)
            if wmax <= 0:
                raise ValueError("tailored activation needs a positive weight")
            if self.alpha < alpha_floor(self.weights) - 1e-12:
                raise ValueError(
                    f"alpha={self.alpha} below the classical-behaviour floor {alpha_floor(self.weights):.6g}"
                )

    def operand_biases(self) -> tuple[float, ...]:
        return self.biases if self.biases is not None else (self.bias,) * len(self.weights)


def alpha_floor(weights: Sequence[float]) -> float:
    """Smallest α for which the tailored activation is well formed."""
    total, wmax = float(sum(weights)), float(max(weights))
    return total / (total + wmax)


@dataclass
class DualValue:
    value: float
    partials: dict[str, float] = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value


def _scaled(p: Mapping[str, float], c: float) -> dict[str, float]:
    return {k: c * v for k, v in p.items()}


# --------------------------------------------------------------------------
# Clamping
# --------------------------------------------------------------------------


def transparent_clamp(x: DualValue | float, lo: float = 0.0, hi: float = 1.0, a: float = 1.0) -> DualValue:
    """Clamp the value to [lo, hi]; outside the range partials are scaled by ``a``."""
    if not isinstance(x, DualValue):
        x = DualValue(float(x), {})
    if lo > hi or a < 0:
        raise ValueError("need lo <= hi and a >= 0")
    v = float(min(hi, max(lo, x.value)))
    scale = 1.0 if lo <= x.value <= hi else a
    return DualValue(v, _scaled(x.partials, scale))


# --------------------------------------------------------------------------
# Weighted Łukasiewicz
# --------------------------------------------------------------------------


def luk_and(params: ConnectiveParams, x: Sequence[float], a: float = 1.0) -> DualValue:
    """clamp(β − Σ w_i (1 − x_i))."""
    w, b = params.weights, params.bias
    _arity(w, x)
    raw = b - sum(wi * (1.0 - xi) for wi, xi in zip(w, x))
    p = {"beta": 1.0}
    for i, (wi, xi) in enumerate(zip(w, x)):
        p[f"w{i}"] = -(1.0 - xi)
        p[f"x{i}"] = wi
    return transparent_clamp(DualValue(raw, p), 0.0, 1.0, a)


def luk_or(params: ConnectiveParams, x: Sequence[float], a: float = 1.0) -> DualValue:
    """clamp(1 − β + Σ w_i x_i)."""
    w, b = params.weights, params.bias
    _arity(w, x)
    raw = 1.0 - b + sum(wi * xi for wi, xi in zip(w, x))
    p = {"beta": -1.0}
    for i, (wi, xi) in enumerate(zip(w, x)):
        p[f"w{i}"] = xi
        p[f"x{i}"] = wi
    return transparent_clamp(DualValue(raw, p), 0.0, 1.0, a)


def luk_residuum(params: ConnectiveParams, x: float, y: float, a: float = 1.0) -> DualValue:
    """clamp(1 − β + w_x (1 − x) + w_y y)."""
    wx, wy = _pair(params.weights)
    raw = 1.0 - params.bias + wx * (1.0 - x) + wy * y
    p = {"beta": -1.0, "w_x": 1.0 - x, "w_y": y, "x": -wx, "y": wy}
    return transparent_clamp(DualValue(raw, p), 0.0, 1.0, a)


def negation(x: float) -> DualValue:
    return DualValue(1.0 - x, {"x": -1.0})


# --------------------------------------------------------------------------
# Weighted Gödel
# --------------------------------------------------------------------------


def godel_and(params: ConnectiveParams, x: Sequence[float], a: float = 1.0) -> DualValue:
    """clamp(min_i (β_i − w_i (1 − x_i))); gradient goes to the first argmin."""
    w, bs = params.weights, params.operand_biases()
    _arity(w, x)
    terms = [bi - wi * (1.0 - xi) for bi, wi, xi in zip(bs, w, x)]
    k = min(range(len(terms)), key=lambda i: (terms[i], i))
    return transparent_clamp(_routed(terms[k], k, len(w), {"beta": 1.0, "w": -(1.0 - x[k]), "x": w[k]}), 0, 1, a)


def godel_or(params: ConnectiveParams, x: Sequence[float], a: float = 1.0) -> DualValue:
    """clamp(max_i (1 − β_i + w_i x_i)); gradient goes to the first argmax."""
    w, bs = params.weights, params.operand_biases()
    _arity(w, x)
    terms = [1.0 - bi + wi * xi for bi, wi, xi in zip(bs, w, x)]
    k = max(range(len(terms)), key=lambda i: (terms[i], -i))
    return transparent_clamp(_routed(terms[k], k, len(w), {"beta": -1.0, "w": x[k], "x": w[k]}), 0, 1, a)


def godel_implies(params: ConnectiveParams, x: float, y: float, a: float = 1.0) -> DualValue:
    """Gödel residuum on weighted terms x' = clamp(1−β_x+w_x x), y' likewise: 1 if x' ≤ y' else y'."""
    wx, wy = _pair(params.weights)
    bx, by = _pair(params.operand_biases())
    xt = transparent_clamp(DualValue(1.0 - bx + wx * x, {"beta0": -1.0, "w_x": x, "x": wx}), 0, 1, a)
    yt = transparent_clamp(DualValue(1.0 - by + wy * y, {"beta1": -1.0, "w_y": y, "y": wy}), 0, 1, a)
    zero = {k: 0.0 for k in ("beta0", "beta1", "w_x", "w_y", "x", "y")}
    if xt.value <= yt.value:
        return DualValue(1.0, zero)
    return DualValue(yt.value, {**zero, **yt.partials})


def _routed(value: float, k: int, n: int, local: dict[str, float]) -> DualValue:
    p: dict[str, float] = {}
    for i in range(n):
        for name in ("beta", "w", "x"):
            p[f"{name}{i}"] = local[name] if i == k else 0.0
    return DualValue(value, p)


# --------------------------------------------------------------------------
# Tailored piecewise-linear activation
# --------------------------------------------------------------------------


def tailored_points(weights: Sequence[float], alpha: float, form: str = "or") -> tuple[float, float, float]:
    """Critical abscissae (x_F, x_T, x_max) of the tailored activation.

    The disjunction form maps s = Σ w_i x_i; the conjunction form is its
    De Morgan image, with the same s.
    """
    total, wmax = float(sum(weights)), float(max(weights))
    if form == "or":
        return total * (1.0 - alpha), wmax * alpha, total
    if form == "and":
        return total - alpha * wmax, alpha * total, total
    raise ValueError(f"form must be 'or' or 'and', got {form!r}")


def _point_partials(weights: Sequence[float], alpha: float, form: str) -> dict[str, dict[str, float]]:
    """d(x_F, x_T, x_max)/d(w_i, alpha)."""
    n = len(weights)
    total, wmax = float(sum(weights)), float(max(weights))
    k = max(range(n), key=lambda i: (weights[i], -i))
    xf: dict[str, float] = {}
    xt: dict[str, float] = {}
    xm: dict[str, float] = {f"w{i}": 1.0 for i in range(n)}
    xm["alpha"] = 0.0
    for i in range(n):
        top = 1.0 if i == k else 0.0
        if form == "or":
            xf[f"w{i}"], xt[f"w{i}"] = 1.0 - alpha, alpha * top
        else:
            xf[f"w{i}"], xt[f"w{i}"] = 1.0 - alpha * top, alpha
    if form == "or":
        xf["alpha"], xt["alpha"] = -total, wmax
    else:
        xf["alpha"], xt["alpha"] = -wmax, total
    return {"xf": xf, "xt": xt, "xm": xm}


def _segments(xf: float, xt: float, xm: float, alpha: float):
    """Non-empty pieces as (x0, x1, y0, y1, m, c, left label, right label), y = m s + c."""
    segs = []
    pieces = ((0.0, xf, 0.0, 1.0 - alpha, None, "xf"), (xf, xt, 1.0 - alpha, alpha, "xf", "xt"),
              (xt, xm, alpha, 1.0, "xt", "xm"))
    for x0, x1, y0, y1, l0, l1 in pieces:
        if x1 > x0:
            m = (y1 - y0) / (x1 - x0)
            segs.append((x0, x1, y0, y1, m, y0 - m * x0, l0, l1))
    return segs


# d y / d alpha at each critical point
_Y_ALPHA = {None: 0.0, "xf": -1.0, "xt": 1.0, "xm": 0.0}


def tailored_eval(params: ConnectiveParams, s: float, form: str = "or") -> DualValue:
    """Piecewise-linear interpolation through (0,0), (x_F,1−α), (x_T,α), (x_max,1).

    Kinks take the right-hand slope.  Partials cover ``s``, ``alpha`` and
    every weight (through the critical points).
    """
    alpha, w = params.alpha, params.weights
    xf, xt, xm = tailored_points(w, alpha, form)
    segs = _segments(xf, xt, xm, alpha)
    seg = segs[-1]
    for cand in segs:
        if s < cand[1]:
            seg = cand
            break
    x0, x1, y0, y1, m, c, l0, l1 = seg
    value = y0 if s == x0 else y1 if s == x1 else m * s + c
    # y = y0 + (y1 - y0)(s - x0)/(x1 - x0), differentiated in each end point
    width = x1 - x0
    d_x0 = -m + (y1 - y0) * (s - x0) / width**2
    d_x1 = -(y1 - y0) * (s - x0) / width**2
    frac = (s - x0) / width
    ends = ((l0, 1.0 - frac, d_x0), (l1, frac, d_x1))
    pp = _point_partials(w, alpha, form)
    partials = {"s": m, "alpha": sum(dy * _Y_ALPHA[label] for label, dy, _ in ends)}
    for i in range(len(w)):
        partials[f"w{i}"] = 0.0
    for label, _, dx in ends:
        if label is None:
            continue
        for name, v in pp[label].items():
            partials[name] += dx * v
    return DualValue(value, partials)


def tailored_inverse(params: ConnectiveParams, y: float, form: str = "or", side: str = "auto") -> float:
    """Pre-activation s with f(s) = y.

    On flat pieces (α = 1) ``side='lower'`` returns inf{s: f(s) ≥ y} and
    ``side='upper'`` returns sup{s: f(s) ≤ y}; ``'auto'`` picks the upper
    end for y ≥ α and the lower end otherwise.  A degenerate step in the
    middle maps every y in (1−α, α) to x_F.
    """
    alpha = params.alpha
    xf, xt, xm = tailored_points(params.weights, alpha, form)
    y = min(1.0, max(0.0, y))
    if side == "auto":
        side = "upper" if y >= alpha else "lower"
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be lower/upper/auto, got {side!r}")
    if xt <= xf and 1.0 - alpha < y < alpha:
        return xf
    segs = _segments(xf, xt, xm, alpha)
    hits = [seg for seg in segs if seg[2] <= y <= seg[3]]
    if not hits:
        return 0.0 if y <= 0.0 else xm
    if side == "lower":
        x0, x1, y0, y1, m, c, _, _ = hits[0]
        return x0 if m == 0.0 else min(x1, max(x0, (y - c) / m))
    x0, x1, y0, y1, m, c, _, _ = hits[-1]
    return x1 if m == 0.0 else min(x1, max(x0, (y - c) / m))


def tailored_connective(params: ConnectiveParams, x: Sequence[float], form: str = "or") -> DualValue:
    """f(Σ w_i x_i) with partials chained to operands and weights."""
    _arity(params.weights, x)
    s = sum(wi * xi for wi, xi in zip(params.weights, x))
    out = tailored_eval(params, s, form)
    ds = out.partials.pop("s")
    for i, (wi, xi) in enumerate(zip(params.weights, x)):
        out.partials[f"x{i}"] = ds * wi
        out.partials[f"w{i}"] = out.partials.get(f"w{i}", 0.0) + ds * xi
    return out


# --------------------------------------------------------------------------
# Logistic activation
# --------------------------------------------------------------------------


def logistic_coefficients(params: ConnectiveParams, form: str = "or") -> tuple[float, float]:
    """(A, B) so that 1/(1+exp(−A s + B)) passes through (x_F, 1−α) and (x_T, α)."""
    alpha = params.alpha
    if alpha >= 1.0:
        raise ValueError("logistic activation needs alpha < 1: the end points cannot be matched")
    xf, xt, _ = tailored_points(params.weights, alpha, form)
    if xf == xt:
        raise ValueError("logistic activation needs x_F != x_T")
    A = 2.0 * math.log((1.0 - alpha) / alpha) / (xf - xt)
    B = math.log(alpha / (1.0 - alpha)) + A * xf
    return A, B


def logistic_eval(params: ConnectiveParams, s: float, form: str = "or") -> DualValue:
    alpha, w = params.alpha, params.weights
    A, B = logistic_coefficients(params, form)
    z = A * s - B
    f = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    g = f * (1.0 - f)
    xf, xt, _ = tailored_points(w, alpha, form)
    ell = math.log((1.0 - alpha) / alpha)
    d_ell = -1.0 / (1.0 - alpha) - 1.0 / alpha
    D = xf - xt
    # direct partials of A and B with respect to alpha, x_F, x_T
    dA = {"alpha": 2.0 * d_ell / D, "xf": -2.0 * ell / D**2, "xt": 2.0 * ell / D**2}
    dB = {"alpha": -d_ell + xf * dA["alpha"], "xf": A + xf * dA["xf"], "xt": xf * dA["xt"]}
    df = {k: g * (s * dA[k] - dB[k]) for k in dA}
    pp = _point_partials(w, alpha, form)
    partials = {"s": g * A, "alpha": df["alpha"]}
    for i in range(len(w)):
        name = f"w{i}"
        partials[name] = df["xf"] * pp["xf"][name] + df["xt"] * pp["xt"][name]
    partials["alpha"] += df["xf"] * pp["xf"]["alpha"] + df["xt"] * pp["xt"]["alpha"]
    return DualValue(f, partials)


def logistic_inverse(params: ConnectiveParams, y: float, form: str = "or") -> float:
    """s with logistic f(s) = y; ±inf at y ∈ {0, 1}."""
    A, B = logistic_coefficients(params, form)
    if y <= 0.0:
        return -math.inf
    if y >= 1.0:
        return math.inf
    return (B + math.log(y / (1.0 - y))) / A


def logistic_connective(params: ConnectiveParams, x: Sequence[float], form: str = "or") -> DualValue:
    _arity(params.weights, x)
    s = sum(wi * xi for wi, xi in zip(params.weights, x))
    out = logistic_eval(params, s, form)
    ds = out.partials.pop("s")
    for i, (wi, xi) in enumerate(zip(params.weights, x)):
        out.partials[f"x{i}"] = ds * wi
        out.partials[f"w{i}"] = out.partials.get(f"w{i}", 0.0) + ds * xi
    return out


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _arity(w: Sequence[float], x: Sequence[float]) -> None:
    if len(w) != len(x):
        raise ValueError(f"{len(x)} operands for {len(w)} weights")


def _pair(v: Sequence[float]) -> tuple[float, float]:
    if len(v) != 2:
        raise ValueError("implication takes exactly two operands")
    return float(v[0]), float(v[1])
