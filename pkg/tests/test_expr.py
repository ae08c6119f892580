import math

import numpy as np
import pytest

from smalldrift import EvalError, ParseError, estimate_lipschitz, parse
from smalldrift.expr import Bin, Call, Neg, Num, Pow, Var


def test_parse_variable():
    e = parse("x")
    assert isinstance(e.root, Var)
    assert e.eval(3.0) == 3.0


def test_parse_precedence_arithmetic():
    assert parse("1+2*x").eval(3.0) == 7.0
    assert parse("sin(x)+x^2").eval(0.0) == 0.0
    assert parse("1+2*3^2").eval(0.0) == 19.0
    assert parse("2*3+1").eval(0.0) == 7.0
    assert parse("2*(3+1)").eval(0.0) == 8.0


def test_left_associativity():
    assert parse("2-1-1").eval(0.0) == 0.0
    assert parse("8/4/2").eval(0.0) == 1.0


def test_unary_minus_binds_looser_than_power():
    # -x^2 is -(x^2), not (-x)^2
    assert parse("-x^2").eval(2.0) == -4.0
    assert parse("--x").eval(3.0) == 3.0


def test_eval_examples():
    assert abs(parse("exp(x)").eval(1.0) - math.e) < 1e-12
    assert parse("abs(x)").eval(-2.0) == 2.0
    with pytest.raises(EvalError):
        parse("1/x").eval(0.0)


def test_domain_errors_named_not_silent():
    with pytest.raises(EvalError):
        parse("sqrt(x)").eval(-1.0)
    with pytest.raises(EvalError):
        parse("exp(x)").eval(1000.0)  # overflows to inf
    # A clean point right next to a bad one still works
    assert parse("sqrt(x)").eval(0.0) == 0.0


def test_eval_many_vectorized_matches_scalar():
    e = parse("sin(x) + exp(x) * x^3 - 1/(x + 10)")
    xs = np.linspace(-2.0, 2.0, 101)
    vec = e.eval_many(xs)
    for i, x in enumerate(xs):
        assert vec[i] == e.eval(float(x))


def test_whitespace_insignificant():
    assert parse("  1 +  2*x ").eval(3.0) == parse("1+2*x").eval(3.0)


def test_number_formats():
    assert parse("1.5e2").eval(0.0) == 150.0
    assert parse(".5").eval(0.0) == 0.5
    assert parse("2.").eval(0.0) == 2.0
    assert parse("1e-3").eval(0.0) == 0.001


def test_power_exponent_range():
    assert parse("x^0").eval(5.0) == 1.0
    assert parse("x^6").eval(2.0) == 64.0
    with pytest.raises(ParseError):
        parse("x^7")
    with pytest.raises(ParseError):
        parse("x^-1")
    with pytest.raises(ParseError):
        parse("x^x")
    with pytest.raises(ParseError):
        parse("x^2^3")  # exponents are literal integers, chaining is an error


def test_syntax_error_positions_are_byte_offsets():
    with pytest.raises(ParseError) as exc:
        parse("1+*x")
    assert exc.value.position == 2

    with pytest.raises(ParseError) as exc:
        parse("(1+2")
    assert exc.value.position == 4

    # Multibyte whitespace before the failure: offset counts bytes
    src = "1+ 2*"
    with pytest.raises(ParseError) as exc:
        parse(src)
    assert exc.value.position == len(src.encode("utf-8"))


def test_unknown_identifier_error():
    with pytest.raises(ParseError) as exc:
        parse("sin(y)")
    assert "y" in str(exc.value)
    assert exc.value.position == 4
    with pytest.raises(ParseError):
        parse("log(x)")  # not in the whitelist


def test_function_call_requires_parens():
    with pytest.raises(ParseError):
        parse("sin x")
    with pytest.raises(ParseError):
        parse("sin(x")


def test_trailing_garbage_rejected():
    with pytest.raises(ParseError):
        parse("1+2 3")
    with pytest.raises(ParseError):
        parse("")


def test_print_parse_print_idempotent_on_examples():
    for src in ("x", "1+2*x", "sin(x)+x^2", "-(x+1)*2", "2-(1-1)",
                "-x^2", "abs(x)/(1+x^2)", "tanh(exp(-x))"):
        once = parse(src).to_source()
        assert parse(once).to_source() == once
        assert parse(once).root == parse(src).root


# --- randomized agreement with a direct tree-walk oracle ---------------

def _random_tree(rng, depth):
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Var()
        # Literals are nonnegative like the parser's own (negation is a
        # Neg node, never part of a number token)
        return Num(float(rng.integers(0, 5)) + round(float(rng.random()), 3))
    kind = rng.integers(0, 4)
    if kind == 0:
        return Neg(_random_tree(rng, depth - 1))
    if kind == 1:
        op = ("+", "-", "*", "/")[rng.integers(0, 4)]
        return Bin(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))
    if kind == 2:
        return Pow(_random_tree(rng, depth - 1), int(rng.integers(0, 7)))
    name = ("sin", "cos", "exp", "abs", "sqrt", "tanh")[rng.integers(0, 6)]
    return Call(name, _random_tree(rng, depth - 1))


def _walk(node, x):
    # Independent recursive oracle over numpy scalar functions; the same
    # float64 primitives the vectorized evaluator uses, applied one node
    # at a time.
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return np.float64(x)
    if isinstance(node, Neg):
        return -_walk(node.operand, x)
    if isinstance(node, Bin):
        a, b = _walk(node.left, x), _walk(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        a = _walk(node.base, x)
        r = np.float64(1.0)
        for _ in range(node.exponent):
            r = r * a
        return r
    a = _walk(node.arg, x)
    return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs,
            "sqrt": np.sqrt, "tanh": np.tanh}[node.name](a)


def test_random_expressions_match_tree_walk_oracle_exactly():
    rng = np.random.default_rng(2024)
    n_good = 0
    for _ in range(1000):
        tree = _random_tree(rng, 4)
        e = parse(_print_roundtrip(tree))
        x = float(rng.uniform(-3.0, 3.0))
        with np.errstate(all="ignore"):
            want = _walk(e.root, x)
        if np.isfinite(want) and not _has_domain_fault(e.root, x):
            got = e.eval(x)
            assert got == float(want), (e.to_source(), x)
            n_good += 1
        else:
            with pytest.raises(EvalError):
                e.eval(x)
    # The generator should mostly produce evaluable expressions
    assert n_good > 500


def _print_roundtrip(tree):
    from smalldrift.expr import _print
    src = _print(tree)
    # Also asserts the printer's parenthesization preserves structure
    reparsed = parse(src)
    assert reparsed.root == tree, src
    return src


def _has_domain_fault(node, x):
    # True when evaluating the tree touches a fault (div by 0, sqrt of
    # negative, non-finite intermediate) anywhere, even if the final
    # value happens to be finite.
    fault = False

    def go(n):
        nonlocal fault
        if isinstance(n, Num):
            return np.float64(n.value)
        if isinstance(n, Var):
            return np.float64(x)
        if isinstance(n, Neg):
            return -go(n.operand)
        if isinstance(n, Bin):
            a, b = go(n.left), go(n.right)
            if n.op == "/" and b == 0.0:
                fault = True
                return np.float64(np.nan)
            r = {"+": a + b, "-": a - b, "*": a * b,
                 "/": a / b if b != 0.0 else np.float64(np.nan)}[n.op]
            if not np.isfinite(r):
                fault = True
            return r
        if isinstance(n, Pow):
            a = go(n.base)
            r = np.float64(1.0)
            for _ in range(n.exponent):
                r = r * a
            if not np.isfinite(r):
                fault = True
            return r
        a = go(n.arg)
        if n.name == "sqrt" and a < 0:
            fault = True
            return np.float64(np.nan)
        r = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs,
             "sqrt": np.sqrt, "tanh": np.tanh}[n.name](a)
        if not np.isfinite(r):
            fault = True
        return r

    with np.errstate(all="ignore"):
        go(node)
    return fault


# --- Lipschitz estimation ----------------------------------------------

def test_lipschitz_linear_is_exact():
    assert abs(estimate_lipschitz(parse("2*x"), -3.0, 7.0, 100) - 2.0) < 1e-9
    assert abs(estimate_lipschitz(parse("2*x"), 0.0, 1.0, 2) - 2.0) < 1e-9


def test_lipschitz_sin_near_one():
    got = estimate_lipschitz(parse("sin(x)"), -10.0, 10.0, 100_000)
    assert abs(got - 1.0) < 1e-3


def test_lipschitz_square_near_two():
    got = estimate_lipschitz(parse("x^2"), 0.0, 1.0, 100_000)
    assert abs(got - 2.0) < 1e-3
    assert got <= 2.0  # adjacent slopes lower-bound the true constant


def test_lipschitz_monotone_in_samples():
    for src in ("x^2", "exp(x)"):
        e = parse(src)
        ests = [estimate_lipschitz(e, 0.0, 1.0, n) for n in (11, 101, 1001, 10_001)]
        assert all(b >= a for a, b in zip(ests, ests[1:])), (src, ests)


def test_lipschitz_argument_validation():
    with pytest.raises(ValueError):
        estimate_lipschitz(parse("x"), 1.0, 1.0, 100)
    with pytest.raises(ValueError):
        estimate_lipschitz(parse("x"), 0.0, 1.0, 1)
    with pytest.raises(EvalError):
        estimate_lipschitz(parse("sqrt(x)"), -1.0, 1.0, 100)
