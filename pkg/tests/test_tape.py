import numpy as np
import pytest
from hypothesis import given, strategies as st

from boundlogic import tape

H = 1e-6


def grad_of(fn, *values):
    leaves = [tape.param(v) for v in values]
    out = tape.total(fn(*leaves))
    tape.backward(out)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]


def numeric(fn, *values):
    out = []
    for k, v in enumerate(values):
        v = np.asarray(v, dtype=float)
        g = np.zeros_like(v)
        for i in np.ndindex(v.shape):
            up, dn = [np.array(x, dtype=float) for x in values], [np.array(x, dtype=float) for x in values]
            up[k][i] += H
            dn[k][i] -= H
            f = lambda vs: float(np.sum(fn(*[tape.Tensor(x) for x in vs]).value))  # noqa: E731
            g[i] = (f(up) - f(dn)) / (2 * H)
        out.append(g)
    return out


def check(fn, *values, tol=1e-5):
    for a, n in zip(grad_of(fn, *values), numeric(fn, *values)):
        np.testing.assert_allclose(a, n, rtol=tol, atol=tol)


vec = st.lists(st.floats(0.1, 0.9), min_size=3, max_size=3).map(np.array)


@given(vec, vec)
def test_arithmetic(a, b):
    check(lambda x, y: x * y + x / (y + 1.0) - 2.0 * y, a, b)
    check(lambda x, y: tape.exp(x - y) + tape.log(x + y), a, b)
    off = lambda v: v + 1e-2 * (np.abs(v - 0.5) < 1e-2)  # keep away from the kinks  # noqa: E731
    check(lambda x, y: tape.absolute(x - 0.5) * tape.relu(y - 0.5), off(a), off(b))


@given(vec, vec)
def test_min_max_where(a, b):
    b = b + 1e-2 * (np.abs(a - b) < 1e-2)
    check(lambda x, y: tape.maximum(x, y) + 2 * tape.minimum(x, y), a, b)
    check(lambda x, y: tape.where(a > 0.5, x, y * y), a, b)


def test_broadcasting():
    check(lambda x, y: x * y, np.array([0.2, 0.4, 0.6]), np.array(0.7))
    check(lambda x: tape.expand(x, 4) * np.arange(4.0), np.array(0.3))


def test_reductions_and_indexing():
    a = np.array([0.1, 0.5, 0.9, 0.3])
    check(lambda x: tape.mean(x * x), a)
    check(lambda x: tape.gather(x, [0, 2, 2, 3]) * np.array([1.0, 2.0, 3.0, 4.0]), a)
    check(lambda x, y: tape.concat([x, y * 2.0]), a, np.array([0.4, 0.2]))


def test_clamp_scales():
    x = tape.param([-0.5, 0.5, 1.5])
    tape.backward(tape.total(tape.clamp(x, 0.0, 1.0, scale=0.2)))
    assert np.allclose(x.grad, [0.2, 1.0, 0.2])
    x = tape.param([-0.5, 0.5, 1.5])
    tape.backward(tape.total(tape.clamp(x, 0.0, 1.0, scale=1.0, side="hi")))
    assert np.allclose(x.grad, [0.0, 1.0, 1.0])
    x = tape.param([-0.5, 0.5, 1.5])
    tape.backward(tape.total(tape.clamp(x, 0.0, 1.0, scale=0.0)))
    assert np.allclose(x.grad, [0.0, 1.0, 0.0])


def test_scatter_ties_go_to_base():
    base = tape.param([0.5, 0.2])
    src = tape.param([0.5, 0.7, 0.7])
    out = tape.scatter_max(base, [0, 1, 1], src)
    assert np.allclose(out.value, [0.5, 0.7])
    tape.backward(tape.total(out))
    assert np.allclose(base.grad, [1.0, 0.0])
    assert np.allclose(src.grad, [0.0, 1.0, 0.0])


def test_scatter_min_values_and_gradient():
    check(lambda b, s: tape.scatter_min(b, [0, 0, 2], s), np.array([0.9, 0.4, 0.8]), np.array([0.3, 0.5, 0.1]))


def test_segment_reduce():
    src = tape.param([0.2, 0.6, 0.4])
    out = tape.segment_reduce(src, [0, 0, 2], 3, "min", empty=1.0)
    assert np.allclose(out.value, [0.2, 1.0, 0.4])
    tape.backward(tape.total(out))
    assert np.allclose(src.grad, [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        tape.segment_reduce(src, [0, 0, 2], 3, "sum", 0.0)


def test_constants_record_nothing():
    t = tape.Tensor([1.0]) + tape.Tensor([2.0])
    assert not t.requires_grad and t.parents == ()


def test_shared_subexpression_accumulates():
    x = tape.param(0.3)
    y = x * x
    tape.backward(y + y)
    assert x.grad == pytest.approx(4 * 0.3)


def test_division_by_zero_is_silent_where_unused():
    out = tape.where(np.array([True, False]), tape.Tensor([1.0, 1.0]), tape.div(tape.Tensor([1.0, 1.0]), np.array([1.0, 0.0])))
    assert out.value[0] == 1.0
