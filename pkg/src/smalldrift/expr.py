"""One-variable real expressions used as drift and diffusion coefficients.

Grammar (full EBNF in docs/grammar.md):

    expression := term {("+" | "-") term}
    term       := unary {("*" | "/") unary}
    unary      := "-" unary | power
    power      := atom ["^" integer]
    atom       := number | "x" | name "(" expression ")" | "(" expression ")"

``name`` is one of sin, cos, exp, abs, sqrt, tanh; the exponent of ``^``
must be a literal integer in [0, 6].  Whitespace is insignificant.

An :class:`Expression` is immutable once parsed.  For evaluation it is
compiled to a small stack program (:class:`Program`) that both the
vectorized numpy evaluator here and the compiled simulation kernels
interpret, so every consumer runs exactly the same arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EvalError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "abs", "sqrt", "tanh")

# Stack-program opcodes, shared with the simulation kernels.
OP_CONST = 0   # push consts[arg]
OP_X = 1       # push the point of evaluation
OP_NEG = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7     # pop v, push v**arg via repeated multiplication
OP_SIN = 8
OP_COS = 9
OP_EXP = 10
OP_ABS = 11
OP_SQRT = 12
OP_TANH = 13

_FUNC_OPS = {
    "sin": OP_SIN,
    "cos": OP_COS,
    "exp": OP_EXP,
    "abs": OP_ABS,
    "sqrt": OP_SQRT,
    "tanh": OP_TANH,
}


# --- abstract syntax ---------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: object


# Printer precedence; larger binds tighter.
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node) -> int:
    if isinstance(node, Bin):
        return _PREC_ADD if node.op in "+-" else _PREC_MUL
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _print(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        inner = _print(node.operand)
        if isinstance(node.operand, Bin):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Bin):
        left = _print(node.left)
        if _prec(node.left) < _prec(node):
            left = f"({left})"
        right = _print(node.right)
        # Binary operators are left-associative: parenthesize a right
        # child of equal precedence so the tree survives re-parsing.
        if _prec(node.right) <= _prec(node):
            right = f"({right})"
        return f"{left}{node.op}{right}"
    if isinstance(node, Pow):
        base = _print(node.base)
        if _prec(node.base) < _PREC_ATOM:
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.name}({_print(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class Expression:
    """Parsed expression; ``source`` is the text it came from."""

    root: object
    source: str = field(compare=False)

    def to_source(self) -> str:
        """Canonical textual form; parsing it back gives an equal tree."""
        return _print(self.root)

    def __str__(self) -> str:
        return self.to_source()

    def eval(self, x: float) -> float:
        """Evaluate at a single point; raises EvalError on domain faults."""
        return float(self.eval_many(np.array([x], dtype=np.float64))[0])

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a float64 array."""
        return eval_program(compile_program(self), np.asarray(xs, dtype=np.float64))


# --- tokenizer / parser ------------------------------------------------

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_INT_RE = re.compile(r"\d+")


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Scanner:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.source):
            return ""
        return self.source[self.pos]

    def fail(self, expected: str) -> ParseError:
        self.skip_ws()
        found = self.source[self.pos] if self.pos < len(self.source) else "end of input"
        return ParseError(
            f"expected {expected}, found {found!r}",
            self.source,
            _byte_offset(self.source, self.pos),
        )


class _Parser:
    def __init__(self, source: str):
        self.s = _Scanner(source)

    def parse(self):
        node = self.expression()
        if self.s.peek() != "":
            raise self.s.fail("an operator or end of input")
        return node

    def expression(self):
        node = self.term()
        while self.s.peek() in ("+", "-"):
            op = self.s.source[self.s.pos]
            self.s.pos += 1
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.s.peek() in ("*", "/"):
            op = self.s.source[self.s.pos]
            self.s.pos += 1
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.s.peek() == "-":
            self.s.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.s.peek() == "^":
            self.s.pos += 1
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        self.s.skip_ws()
        m = _INT_RE.match(self.s.source, self.s.pos)
        if m is None or not (0 <= int(m.group()) <= 6):
            raise self.s.fail("an integer exponent in [0, 6]")
        self.s.pos = m.end()
        return int(m.group())

    def atom(self):
        ch = self.s.peek()
        if ch == "(":
            self.s.pos += 1
            node = self.expression()
            if self.s.peek() != ")":
                raise self.s.fail("')'")
            self.s.pos += 1
            return node
        m = _NUMBER_RE.match(self.s.source, self.s.pos)
        if m is not None:
            value = float(m.group())
            if not np.isfinite(value):
                raise self.s.fail("a representable number literal")
            self.s.pos = m.end()
            return Num(value)
        m = _NAME_RE.match(self.s.source, self.s.pos)
        if m is not None:
            name = m.group()
            if name == "x":
                self.s.pos = m.end()
                return Var()
            if name not in FUNCTIONS:
                raise ParseError(
                    f"unknown identifier {name!r} (variable is 'x'; "
                    f"functions are {', '.join(FUNCTIONS)})",
                    self.s.source,
                    _byte_offset(self.s.source, self.s.pos),
                )
            self.s.pos = m.end()
            if self.s.peek() != "(":
                raise self.s.fail(f"'(' after function name {name!r}")
            self.s.pos += 1
            node = self.expression()
            if self.s.peek() != ")":
                raise self.s.fail("')'")
            self.s.pos += 1
            return Call(name, node)
        raise self.s.fail("a number, 'x', a function call, or '('")


def parse(source: str) -> Expression:
    """Parse expression source text.

    Raises :class:`ParseError` with the byte offset of the failure for
    syntax errors and unknown identifiers.
    """
    return Expression(root=_Parser(source).parse(), source=source)


# --- compilation to a stack program ------------------------------------

@dataclass(frozen=True)
class Program:
    """Postorder stack program: ops/args drive the machine, consts is
    the literal pool.  ``stack_need`` is the exact stack depth required."""

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    stack_need: int


def _compile(node, ops, args, consts, const_index, depth, max_depth):
    if isinstance(node, Num):
        if node.value not in const_index:
            const_index[node.value] = len(consts)
            consts.append(node.value)
        ops.append(OP_CONST)
        args.append(const_index[node.value])
        return _bump(depth, max_depth)
    if isinstance(node, Var):
        ops.append(OP_X)
        args.append(0)
        return _bump(depth, max_depth)
    if isinstance(node, Neg):
        depth, max_depth = _compile(node.operand, ops, args, consts, const_index, depth, max_depth)
        ops.append(OP_NEG)
        args.append(0)
        return depth, max_depth
    if isinstance(node, Bin):
        depth, max_depth = _compile(node.left, ops, args, consts, const_index, depth, max_depth)
        depth, max_depth = _compile(node.right, ops, args, consts, const_index, depth, max_depth)
        ops.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op])
        args.append(0)
        return depth - 1, max_depth
    if isinstance(node, Pow):
        depth, max_depth = _compile(node.base, ops, args, consts, const_index, depth, max_depth)
        ops.append(OP_POW)
        args.append(node.exponent)
        return depth, max_depth
    if isinstance(node, Call):
        depth, max_depth = _compile(node.arg, ops, args, consts, const_index, depth, max_depth)
        ops.append(_FUNC_OPS[node.name])
        args.append(0)
        return depth, max_depth
    raise TypeError(f"not an expression node: {node!r}")


def _bump(depth, max_depth):
    depth += 1
    return depth, max(depth, max_depth)


@lru_cache(maxsize=256)
def compile_program(expr: Expression) -> Program:
    """Compile an Expression to its stack program (cached)."""
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []
    _, stack_need = _compile(expr.root, ops, args, consts, {}, 0, 0)
    return Program(
        ops=np.array(ops, dtype=np.int64),
        args=np.array(args, dtype=np.int64),
        consts=np.array(consts if consts else [0.0], dtype=np.float64),
        stack_need=stack_need,
    )


def eval_program(prog: Program, xs: np.ndarray) -> np.ndarray:
    """Run a stack program over an array of points (numpy evaluator).

    Domain faults (division by zero, sqrt of a negative) and non-finite
    results raise :class:`EvalError` naming a point where they occur;
    NaN never propagates silently.
    """
    stack = np.empty((prog.stack_need, xs.shape[0]), dtype=np.float64)
    top = -1
    with np.errstate(all="ignore"):
        for op, arg in zip(prog.ops, prog.args):
            if op == OP_CONST:
                top += 1
                stack[top] = prog.consts[arg]
                continue
            if op == OP_X:
                top += 1
                stack[top] = xs
                continue
            if op == OP_ADD or op == OP_SUB or op == OP_MUL or op == OP_DIV:
                b = stack[top]
                top -= 1
                a = stack[top]
                if op == OP_ADD:
                    res = a + b
                elif op == OP_SUB:
                    res = a - b
                elif op == OP_MUL:
                    res = a * b
                else:
                    bad = b == 0.0
                    if bad.any():
                        raise EvalError(f"division by zero at x = {xs[bad.argmax()]!r}")
                    res = a / b
            else:
                a = stack[top]
                if op == OP_NEG:
                    res = -a
                elif op == OP_POW:
                    res = np.ones_like(a)
                    for _ in range(arg):
                        res = res * a
                elif op == OP_SQRT:
                    bad = a < 0.0
                    if bad.any():
                        raise EvalError(f"sqrt of negative value at x = {xs[bad.argmax()]!r}")
                    res = np.sqrt(a)
                elif op == OP_SIN:
                    res = np.sin(a)
                elif op == OP_COS:
                    res = np.cos(a)
                elif op == OP_EXP:
                    res = np.exp(a)
                elif op == OP_ABS:
                    res = np.abs(a)
                else:
                    res = np.tanh(a)
            bad = ~np.isfinite(res)
            if bad.any():
                raise EvalError(f"non-finite result at x = {xs[bad.argmax()]!r}")
            stack[top] = res
    return stack[top].copy()


def estimate_lipschitz(expr: Expression, lo: float, hi: float, n_samples: int = 2001) -> float:
    """Largest adjacent-pair slope |f(x_{k+1})-f(x_k)|/(x_{k+1}-x_k) on a
    uniform grid over [lo, hi].

    A lower bound on the true Lipschitz constant over the interval; it
    converges to sup|f'| as n_samples grows for smooth f.
    """
    if not (lo < hi):
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if n_samples < 2:
        raise ValueError(f"need n_samples >= 2, got {n_samples}")
    grid = np.linspace(lo, hi, n_samples)
    values = expr.eval_many(grid)
    return float(np.max(np.abs(np.diff(values)) / np.diff(grid)))
