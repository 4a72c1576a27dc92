"""Tiny expression language for the scalar functions that define a network model.

Expressions are parsed once into an immutable tree, evaluated either through a
safe tree walk (`eval_expr`, reports the offending subtree on a non-finite
result) or through a compiled numpy-vectorized callable (`compile_expr`, the
fast path used by the integrator).  `estimate_bound` produces sampled,
non-certified Lipschitz/derivative/sup/inf estimates used to sanity-check
declared slope constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "ExprEvalError",
    "BoundEstimate",
    "parse_expr",
    "eval_expr",
    "compile_expr",
    "print_expr",
    "free_vars",
    "estimate_bound",
]


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprEvalError(ExprError):
    """Non-finite or undefined value; carries the subtree that produced it."""

    def __init__(self, message: str, subtree: "Expr"):
        super().__init__(f"{message} in subexpression '{print_expr(subtree)}'")
        self.subtree = subtree


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Const | Var | Neg | Call | BinOp

_FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "tan": (math.tan, np.tan),
    "tanh": (math.tanh, np.tanh),
    "exp": (math.exp, np.exp),
    "abs": (abs, np.abs),
}

_CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser

_OPS = set("+-*/^(),")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Return (kind, value, offset) tokens; kinds: num, ident, op."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    return tokens


class _Parser:
    def __init__(self, text: str, params: tuple[str, ...]):
        self.text = text
        self.params = params
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _offset(self) -> int:
        tok = self._peek()
        return tok[2] if tok is not None else len(self.text)

    def _expect_op(self, op: str):
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] != op:
            raise ExprSyntaxError(f"expected {op!r}", self._offset())
        self.pos += 1

    def parse(self) -> Expr:
        e = self._sum()
        if self.pos != len(self.tokens):
            raise ExprSyntaxError("unexpected trailing input", self._offset())
        return e

    def _sum(self) -> Expr:
        e = self._term()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "+-":
            self.pos += 1
            rhs = self._term()
            e = BinOp(tok[1], e, rhs)
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "*/":
            self.pos += 1
            rhs = self._unary()
            e = BinOp(tok[1], e, rhs)
        return e

    def _unary(self) -> Expr:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.pos += 1
            return Neg(self._unary())
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.pos += 1
            # right-associative; exponent may carry its own unary minus
            return BinOp("^", base, self._unary())
        return base

    def _atom(self) -> Expr:
        tok = self._peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input", self._offset())
        kind, value, offset = tok
        if kind == "num":
            self.pos += 1
            return Const(float(value))
        if kind == "op" and value == "(":
            self.pos += 1
            e = self._sum()
            self._expect_op(")")
            return e
        if kind == "ident":
            self.pos += 1
            nxt = self._peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if value not in _FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}", offset)
                self.pos += 1
                arg = self._sum()
                if (t := self._peek()) and t[0] == "op" and t[1] == ",":
                    raise ExprSyntaxError(
                        f"function {value!r} takes exactly one argument", t[2]
                    )
                self._expect_op(")")
                return Call(value, arg)
            if value in _CONSTANTS:
                return Const(_CONSTANTS[value])
            if value in self.params:
                return Var(value)
            if value in _FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} used without arguments", offset)
            raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
        raise ExprSyntaxError(f"unexpected token {value!r}", offset)


def parse_expr(text: str, params: Iterable[str]) -> Expr:
    """Parse `text` over the declared parameter names.

    Grammar: ^ binds tighter than unary minus, then * /, then + -; ^ is
    right-associative, everything else left-associative.  `pi` and `e` are
    predefined constants; function calls are `name(arg)`.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, tuple(params)).parse()


# ---------------------------------------------------------------------------
# Evaluation

def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Call):
        return free_vars(e.arg)
    return free_vars(e.left) | free_vars(e.right)


def eval_expr(e: Expr, bindings: dict[str, float]) -> float:
    """Tree-walk evaluation; raises ExprEvalError on any non-finite value."""
    val = _eval(e, bindings)
    if not math.isfinite(val):
        raise ExprEvalError("non-finite result", e)
    return val


def _eval(e: Expr, b: dict[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(b[e.name])
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}", e) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Call):
        try:
            return _FUNCTIONS[e.fn][0](_eval(e.arg, b))
        except (OverflowError, ValueError):
            raise ExprEvalError("domain error", e) from None
    left = _eval(e.left, b)
    right = _eval(e.right, b)
    if e.op == "/" and right == 0.0:
        raise ExprEvalError("division by zero", e)
    try:
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "/":
            return left / right
        if e.op == "^":
            val = left ** right
            if isinstance(val, complex):  # negative base, fractional exponent
                raise ExprEvalError("domain error", e)
            return val
    except ExprEvalError:
        raise
    except OverflowError:
        raise ExprEvalError("overflow", e) from None
    except ZeroDivisionError:
        raise ExprEvalError("division by zero", e) from None
    except ValueError:
        raise ExprEvalError("domain error", e) from None
    raise AssertionError(f"bad operator {e.op!r}")


def print_expr(e: Expr) -> str:
    """Render with just enough parentheses to reparse identically."""
    return _print(e, 0)


# precedence levels: + - (1), * / (2), unary - (3), ^ (4), atoms (5)
def _print(e: Expr, parent_level: int) -> str:
    if isinstance(e, Const):
        if e.value < 0:  # negative literal behaves like a unary minus
            return _wrap(repr(e.value), 3, parent_level)
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({_print(e.arg, 0)})"
    if isinstance(e, Neg):
        return _wrap(f"-{_print(e.arg, 3)}", 3, parent_level)
    level = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[e.op]
    if e.op == "^":
        body = f"{_print(e.left, 5)}^{_print(e.right, 3)}"
    else:
        # left-associative: right child needs a strictly higher level
        body = f"{_print(e.left, level)}{e.op}{_print(e.right, level + 1)}"
    return _wrap(body, level, parent_level)


def _wrap(s: str, level: int, parent_level: int) -> str:
    return f"({s})" if level < parent_level else s


# ---------------------------------------------------------------------------
# Compilation (numpy-vectorized fast path; must agree with eval_expr)

def compile_expr(e: Expr, params: Iterable[str], scalar: bool = False) -> Callable:
    """Compile to a positional-arg callable over the declared parameter order.

    The default numpy flavor accepts floats or arrays elementwise; the scalar
    flavor binds the math module instead, which is several times faster on
    plain floats (the integrator's per-component hot path).  Non-finite
    results are the caller's problem, unlike eval_expr which raises.
    """
    names = tuple(params)
    missing = free_vars(e) - set(names)
    if missing:
        raise ExprError(f"expression uses undeclared parameters {sorted(missing)}")
    src = f"lambda {', '.join(names)}: {_codegen(e, scalar)}"
    fn = eval(compile(src, "<expr>", "eval"), {"np": np, "math": math})
    fn.source = src  # handy when debugging a model config
    return fn


def _codegen(e: Expr, scalar: bool = False) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_codegen(e.arg, scalar)})"
    if isinstance(e, Call):
        if e.fn == "abs":
            prefix = "abs" if scalar else "np.abs"
        else:
            prefix = f"{'math' if scalar else 'np'}.{e.fn}"
        return f"{prefix}({_codegen(e.arg, scalar)})"
    op = "**" if e.op == "^" else e.op
    return f"({_codegen(e.left, scalar)}{op}{_codegen(e.right, scalar)})"


# ---------------------------------------------------------------------------
# Sampled bound estimation

_BOUND_KINDS = ("lipschitz", "derivative-min", "sup", "inf")


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    kind: str
    interval: tuple[float, float]
    samples: int
    certified: bool = False  # always sampled, never a rigorous bound


def estimate_bound(
    e: Expr,
    var: str,
    interval: tuple[float, float],
    kind: str,
    samples: int,
    fixed: dict[str, float] | None = None,
) -> BoundEstimate:
    """Estimate a one-variable bound of `e` by sampling a uniform grid.

    lipschitz: max adjacent divided difference |f(x_{k+1})-f(x_k)|/h, which is
    monotone non-decreasing under nested dyadic grid refinement.
    derivative-min: min interior central difference.
    sup/inf: grid extrema of the values themselves.
    """
    if kind not in _BOUND_KINDS:
        raise ValueError(f"kind must be one of {_BOUND_KINDS}, got {kind!r}")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    if samples < 2:
        raise ValueError("need at least 2 samples")

    names = sorted(free_vars(e) | {var} | set(fixed or {}))
    fn = compile_expr(e, names)
    xs = np.linspace(lo, hi, samples)
    args = [xs if name == var else float((fixed or {})[name]) for name in names]
    with np.errstate(all="ignore"):  # non-finite samples are rejected below
        vals = np.asarray(fn(*args), dtype=float)
    if vals.shape != xs.shape:  # expression free of `var`
        vals = np.full_like(xs, float(vals))
    if not np.all(np.isfinite(vals)):
        bad = xs[~np.isfinite(vals)][0]
        raise ExprEvalError(f"non-finite value at {var}={bad}", e)

    h = xs[1] - xs[0]
    if kind == "lipschitz":
        value = float(np.max(np.abs(np.diff(vals))) / h)
    elif kind == "derivative-min":
        value = float(np.min((vals[2:] - vals[:-2]) / (2.0 * h)))
    elif kind == "sup":
        value = float(np.max(vals))
    else:
        value = float(np.min(vals))
    return BoundEstimate(value=value, kind=kind, interval=(lo, hi), samples=samples)
