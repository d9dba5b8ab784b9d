import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowupdyn import expr as ex
from blowupdyn.hamsys import DOUBLE_PENDULUM_H, SIMPLE_PENDULUM_H

NAMES = ["x", "y", "q", "p1"]

leaves = st.one_of(
    st.sampled_from(NAMES).map(ex.var),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(ex.const),
    st.just(ex.const(math.pi)),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(ex.FUNCTIONS), children).map(lambda t: ex.func(*t)),
        st.tuples(st.sampled_from(ex.BINARY_OPS), children, children).map(lambda t: ex.binop(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_print_then_parse_is_identity(e):
    assert ex.parse(ex.to_string(e)) is e


def test_precedence():
    assert ex.evaluate(ex.parse("2^3^2"), {}) == 64.0  # left-associative
    assert ex.evaluate(ex.parse("-2^2"), {}) == -4.0
    assert ex.evaluate(ex.parse("2*-3"), {}) == -6.0
    assert ex.evaluate(ex.parse("8/4/2"), {}) == 1.0
    assert ex.evaluate(ex.parse("1 - 2 - 3"), {}) == -4.0
    assert ex.evaluate(ex.parse("2 + 3*4^2"), {}) == 50.0
    assert ex.evaluate(ex.parse(" pi "), {}) == math.pi
    assert ex.evaluate(ex.parse("2^-1"), {}) == 0.5


def test_single_pendulum_energy():
    e = ex.parse(SIMPLE_PENDULUM_H)
    b = dict(phi=math.pi / 2, p=0.0, m=1.0, g=1.0, L=1.0, T=1.0)
    assert ex.evaluate(e, b) == pytest.approx(-math.pi / 2, abs=1e-15)


def test_double_pendulum_energy():
    e = ex.parse(DOUBLE_PENDULUM_H)
    b = dict(phi1=-math.pi / 2, phi2=-math.pi / 2, p1=0.0, p2=0.0, m=1.0, g=1.0, L=1.0)
    assert ex.evaluate(e, b) == pytest.approx(-1.5 * math.pi, abs=1e-14)


def test_zero_and_constant():
    z = ex.parse("0")
    assert z.kind == "const" and z.value == 0.0
    assert ex.evaluate(ex.parse("7"), {}) == 7.0


@pytest.mark.parametrize(
    "text, offset",
    [("2*", 2), ("(1+2", 4), ("1 $ 2", 2), ("", 0), ("3 4", 2), ("sin", 0)],
)
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ex.ParseError) as info:
        ex.parse(text)
    assert info.value.position == offset
    assert f"offset {offset}" in str(info.value)


def test_unknown_function():
    with pytest.raises(ex.UnknownFunctionError):
        ex.parse("cosh(x)")


def test_unbound_and_domain_errors():
    with pytest.raises(ex.UnboundVariableError):
        ex.evaluate(ex.parse("x + 1"), {})
    for text, b in [("ln(x)", {"x": 0.0}), ("ln(x)", {"x": -1.0}), ("1/x", {"x": 0.0}), ("sqrt(x)", {"x": -1.0})]:
        with pytest.raises(ex.DomainError):
            ex.evaluate(ex.parse(text), b)


def test_derivative_examples():
    h = ex.parse(SIMPLE_PENDULUM_H)
    b = dict(phi=0.0, p=0.0, m=1.0, g=1.0, L=1.0, T=1.0)
    d = ex.evaluate(ex.differentiate(h, "phi"), b)

    def f(v):
        return ex.evaluate(h, {**b, "phi": v})

    fd = (f(1e-6) - f(-1e-6)) / 2e-6
    assert d == pytest.approx(-1.0, abs=1e-12)
    assert d == pytest.approx(fd, abs=1e-8)
    assert ex.differentiate(ex.const(3.0), "x") is ex.ZERO
    assert ex.evaluate(ex.differentiate(ex.parse("sin(x)"), "x"), {"x": 0.0}) == 1.0


def test_variable_exponent_uses_exp_ln_rule():
    e = ex.parse("x^y")
    b = {"x": 2.0, "y": 3.0}
    assert ex.evaluate(ex.differentiate(e, "y"), b) == pytest.approx(8 * math.log(2), rel=1e-14)
    assert ex.evaluate(ex.differentiate(e, "x"), b) == pytest.approx(12.0, rel=1e-14)


# -- derivative vs finite differences on random smooth expressions -----------------


def _random_smooth(rng, depth):
    """Random expression in x, y that is defined and smooth everywhere."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.4:
            return ex.var("x")
        if r < 0.8:
            return ex.var("y")
        return ex.const(round(float(rng.uniform(-2, 2)), 3))
    a = _random_smooth(rng, depth - 1)
    kind = rng.integers(0, 11)
    if kind == 0:
        return ex.sin(a)
    if kind == 1:
        return ex.cos(a)
    if kind == 2:
        return ex.arctan(a)
    if kind == 3:
        return ex.exp(ex.sin(a))
    if kind == 4:
        return ex.ln(1 + a * a)
    if kind == 5:
        return ex.sqrt(2 + ex.cos(a))
    b = _random_smooth(rng, depth - 1)
    if kind == 6:
        return a + b
    if kind == 7:
        return a - b
    if kind == 8:
        return a * b
    if kind == 9:
        return a / (1.5 + ex.sin(b))
    return ex.power(1 + a * a, ex.cos(b))


def test_derivative_matches_finite_differences_1000_cases():
    rng = np.random.default_rng(12345)
    cases = 0
    while cases < 1000:
        e = _random_smooth(rng, 4)
        name = "x" if rng.random() < 0.5 else "y"
        pt = {"x": float(rng.uniform(-1, 1)), "y": float(rng.uniform(-1, 1))}
        if abs(ex.evaluate(e, pt)) > 1e3:
            continue
        h = 1e-6

        def f(v):
            return ex.evaluate(e, {**pt, name: v})

        fd = (f(pt[name] + h) - f(pt[name] - h)) / (2 * h)
        d = ex.evaluate(ex.differentiate(e, name), pt)
        assert abs(d - fd) <= 1e-6 * (1 + abs(fd)), (ex.to_string(e), name, pt, d, fd)
        cases += 1


def test_compiled_matches_evaluate_bitwise():
    rng = np.random.default_rng(7)
    exprs = [_random_smooth(rng, 4) for _ in range(40)]
    fn = ex.compile_expressions(exprs, ["x", "y"])
    for _ in range(20):
        pt = {"x": float(rng.uniform(-1, 1)), "y": float(rng.uniform(-1, 1))}
        got = fn([pt["x"], pt["y"]])
        want = [ex.evaluate(e, pt) for e in exprs]
        assert list(got) == want


def test_evaluate_is_pure_across_threads():
    e = ex.differentiate(ex.parse(DOUBLE_PENDULUM_H), "phi1")
    b = dict(phi1=0.3, phi2=-0.7, p1=0.2, p2=-0.1, m=1.0, g=9.81, L=0.5)
    ref = ex.evaluate(e, b)
    out = []

    def work():
        out.append(ex.evaluate(e, b))

    ts = [threading.Thread(target=work) for _ in range(8)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert all(v == ref for v in out)
    assert ex.evaluate(e, b) == ref


def test_free_variables_and_substitute():
    e = ex.parse("a*x + sin(y)")
    assert ex.free_variables(e) == {"a", "x", "y"}
    s = ex.substitute(e, {"a": 2.0})
    assert ex.free_variables(s) == {"x", "y"}
    assert ex.evaluate(s, {"x": 1.0, "y": 0.0}) == 2.0
