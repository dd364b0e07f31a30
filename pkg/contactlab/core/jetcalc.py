"""
jetcalc.py

Exact calculus of scalar fields on the chart R^3 (coordinates x, y, z).

Fields are immutable expression trees. Derivatives are symbolic and cached on
the node, so repeated differentiation of the same field shares subtrees and a
single evaluation pass can serve a whole jet. Finite differences live here
only as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

AXES = ("x", "y", "z")
DIVISION_GUARD = 1e-13
MAX_JET_ORDER = 3

Period = float | None


class ExpressionSyntaxError(ValueError):
    """Malformed expression text; `position` is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class DomainViolationError(ArithmeticError):
    """A guarded denominator fell below DIVISION_GUARD at some point."""

    def __init__(self, message: str, point: Sequence[float] | None = None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(c) for c in point)


# Expression nodes


@dataclass(frozen=True, eq=False)
class Expr:
    free: frozenset[int] = field(
        default=frozenset(), init=False, repr=False, compare=False
    )
    _derivatives: dict[int, Expr] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def children(self) -> tuple[Expr, ...]:
        return ()

    def __post_init__(self):
        free: frozenset[int] = frozenset()
        for child in self.children():
            free |= child.free
        object.__setattr__(self, "free", free)


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=False)
class Var(Expr):
    axis: int

    def __post_init__(self):
        object.__setattr__(self, "free", frozenset({self.axis}))


@dataclass(frozen=True, eq=False)
class Add(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Mul(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Div(Expr):
    num: Expr
    den: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.num, self.den)


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def children(self) -> tuple[Expr, ...]:
        return (self.base,)


@dataclass(frozen=True, eq=False)
class Sin(Expr):
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Cos(Expr):
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True, eq=False)
class Exp(Expr):
    arg: Expr

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors; folding only touches constant operands and the 0/1 rules.


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and abs(b.value) >= DIVISION_GUARD:
        return Const(a.value / b.value)
    return Div(a, b)


def power(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const) and (exponent > 0 or abs(base.value) >= DIVISION_GUARD):
        return Const(base.value**exponent)
    return Pow(base, exponent)


def sin_(a: Expr) -> Expr:
    return Const(math.sin(a.value)) if isinstance(a, Const) else Sin(a)


def cos_(a: Expr) -> Expr:
    return Const(math.cos(a.value)) if isinstance(a, Const) else Cos(a)


def exp_(a: Expr) -> Expr:
    return Const(math.exp(a.value)) if isinstance(a, Const) else Exp(a)


def derive(node: Expr, axis: int) -> Expr:
    """Exact partial derivative of `node` along coordinate `axis` (cached)."""
    if axis not in node.free:
        return ZERO
    cached = node._derivatives.get(axis)
    if cached is not None:
        return cached
    match node:
        case Var():
            out = ONE
        case Add(left=a, right=b):
            out = add(derive(a, axis), derive(b, axis))
        case Neg(arg=a):
            out = neg(derive(a, axis))
        case Mul(left=a, right=b):
            out = add(mul(derive(a, axis), b), mul(a, derive(b, axis)))
        case Div(num=a, den=b):
            top = sub(mul(derive(a, axis), b), mul(a, derive(b, axis)))
            out = div(top, power(b, 2))
        case Pow(base=b, exponent=n):
            out = mul(mul(Const(float(n)), power(b, n - 1)), derive(b, axis))
        case Sin(arg=a):
            out = mul(cos_(a), derive(a, axis))
        case Cos(arg=a):
            out = neg(mul(sin_(a), derive(a, axis)))
        case Exp(arg=a):
            out = mul(node, derive(a, axis))
        case _:
            raise TypeError(f"Cannot differentiate node {type(node).__name__}")
    node._derivatives[axis] = out
    return out


def _guard(values: np.ndarray, coords: Sequence[np.ndarray], what: str) -> None:
    bad = np.abs(values) < DIVISION_GUARD
    if np.any(bad):
        i = int(np.argmax(bad))
        point = [float(c[i]) for c in coords]
        raise DomainViolationError(
            f"{what} below guard {DIVISION_GUARD:g} at point {point}", point
        )


def _evaluate(
    node: Expr, coords: Sequence[np.ndarray], memo: dict[int, np.ndarray]
) -> np.ndarray:
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    match node:
        case Const(value=v):
            out = np.full(coords[0].shape, v)
        case Var(axis=i):
            out = coords[i]
        case Add(left=a, right=b):
            out = _evaluate(a, coords, memo) + _evaluate(b, coords, memo)
        case Mul(left=a, right=b):
            out = _evaluate(a, coords, memo) * _evaluate(b, coords, memo)
        case Div(num=a, den=b):
            den = _evaluate(b, coords, memo)
            _guard(den, coords, "denominator")
            out = _evaluate(a, coords, memo) / den
        case Neg(arg=a):
            out = -_evaluate(a, coords, memo)
        case Pow(base=b, exponent=n):
            base = _evaluate(b, coords, memo)
            if n < 0:
                _guard(base, coords, "base of negative power")
                out = 1.0 / base ** (-n)
            else:
                out = base**n
        case Sin(arg=a):
            out = np.sin(_evaluate(a, coords, memo))
        case Cos(arg=a):
            out = np.cos(_evaluate(a, coords, memo))
        case Exp(arg=a):
            out = np.exp(_evaluate(a, coords, memo))
        case _:
            raise TypeError(f"Cannot evaluate node {type(node).__name__}")
    memo[key] = out
    return out


# Fields


def as_points(points: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce one point (3,) or a batch (N, 3) to a float64 (N, 3) array."""
    arr = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"Points must have shape (N, 3), got {arr.shape}")
    return arr


def _merge_periods(*fields: ScalarField) -> tuple[Period, Period, Period]:
    merged: list[Period] = []
    for axis in range(3):
        declared = [f.periods[axis] for f in fields if axis in f.expr.free]
        if declared and all(p is not None and p == declared[0] for p in declared):
            merged.append(declared[0])
        else:
            merged.append(None)
    return (merged[0], merged[1], merged[2])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A smooth function on the chart with optional declared period per axis."""

    expr: Expr
    periods: tuple[Period, Period, Period] = (None, None, None)

    @classmethod
    def constant(cls, value: float) -> ScalarField:
        return cls(Const(float(value)))

    @classmethod
    def coordinate(cls, axis: int) -> ScalarField:
        return cls(Var(axis))

    @property
    def is_zero(self) -> bool:
        return _is_const(self.expr, 0.0)

    def depends_on(self, axis: int) -> bool:
        return axis in self.expr.free

    def with_periods(self, periods: Sequence[Period]) -> ScalarField:
        return ScalarField(self.expr, (periods[0], periods[1], periods[2]))

    def derivative(self, axis: int) -> ScalarField:
        return ScalarField(derive(self.expr, axis), self.periods)

    def evaluate(self, points: Sequence[float] | np.ndarray) -> np.ndarray:
        return evaluate_fields([self], points)[0]

    def _combine(self, other: ScalarField | float, op, swap: bool = False):
        rhs = lift(other)
        a, b = (rhs, self) if swap else (self, rhs)
        return ScalarField(op(a.expr, b.expr), _merge_periods(a, b))

    def __add__(self, other):
        return self._combine(other, add)

    def __radd__(self, other):
        return self._combine(other, add, swap=True)

    def __sub__(self, other):
        return self._combine(other, sub)

    def __rsub__(self, other):
        return self._combine(other, sub, swap=True)

    def __mul__(self, other):
        return self._combine(other, mul)

    def __rmul__(self, other):
        return self._combine(other, mul, swap=True)

    def __truediv__(self, other):
        return self._combine(other, div)

    def __rtruediv__(self, other):
        return self._combine(other, div, swap=True)

    def __neg__(self):
        return ScalarField(neg(self.expr), self.periods)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            raise TypeError("Only integer exponents are supported")
        return ScalarField(power(self.expr, exponent), self.periods)


def lift(value: ScalarField | float) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    return ScalarField.constant(float(value))


def constant(value: float) -> ScalarField:
    return ScalarField.constant(value)


def coordinate(axis: int) -> ScalarField:
    return ScalarField.coordinate(axis)


def sin(f: ScalarField | float) -> ScalarField:
    f = lift(f)
    return ScalarField(sin_(f.expr), f.periods)


def cos(f: ScalarField | float) -> ScalarField:
    f = lift(f)
    return ScalarField(cos_(f.expr), f.periods)


def exp(f: ScalarField | float) -> ScalarField:
    f = lift(f)
    return ScalarField(exp_(f.expr), f.periods)


def differentiate(f: ScalarField, axis: int) -> ScalarField:
    return f.derivative(axis)


def evaluate_fields(
    fields: Iterable[ScalarField], points: Sequence[float] | np.ndarray
) -> list[np.ndarray]:
    """Evaluate several fields at the same points sharing one memo table."""
    pts = as_points(points)
    coords = (pts[:, 0], pts[:, 1], pts[:, 2])
    memo: dict[int, np.ndarray] = {}
    return [_evaluate(f.expr, coords, memo) for f in fields]


# Jets


def multi_indices(order: int) -> list[tuple[int, ...]]:
    """Sorted multi-indices of length 1..order."""
    return [
        idx
        for k in range(1, order + 1)
        for idx in itertools.combinations_with_replacement(range(3), k)
    ]


def partial(f: ScalarField, index: Sequence[int]) -> ScalarField:
    out = f
    for axis in sorted(index):
        out = out.derivative(axis)
    return out


@dataclass(frozen=True)
class Jet:
    value: float
    partials: dict[tuple[int, ...], float]
    order: int

    def __getitem__(self, index: Sequence[int]) -> float:
        if len(index) == 0:
            return self.value
        if len(index) > self.order:
            raise KeyError(f"Jet of order {self.order} has no partial {tuple(index)}")
        return self.partials[tuple(sorted(index))]


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_JET_ORDER:
        raise ValueError(f"Jet order must be in 0..{MAX_JET_ORDER}, got {order}")


def jet_arrays(
    fields: Sequence[ScalarField], points: Sequence[float] | np.ndarray, order: int
) -> list[dict[tuple[int, ...], np.ndarray]]:
    """Value and partials to `order` for each field, batched over points.

    The empty tuple keys the value. All derivatives are evaluated in a single
    pass so shared subexpressions are computed once.
    """
    _check_order(order)
    indices = [(), *multi_indices(order)]
    flat = [partial(f, idx) for f in fields for idx in indices]
    values = evaluate_fields(flat, points)
    out = []
    for n in range(len(fields)):
        chunk = values[n * len(indices) : (n + 1) * len(indices)]
        out.append(dict(zip(indices, chunk, strict=True)))
    return out


def eval_jet(f: ScalarField, point: Sequence[float], order: int) -> Jet:
    jets = jet_arrays([f], point, order)[0]
    partials = {idx: float(v[0]) for idx, v in jets.items() if idx}
    return Jet(value=float(jets[()][0]), partials=partials, order=order)


def finite_difference_oracle(
    f: ScalarField, point: Sequence[float], axis: int, step: float
) -> float:
    """Central difference quotient of `f` along `axis`."""
    if step <= 0:
        raise ValueError("step must be positive")
    base = np.asarray(point, dtype=np.float64)
    shift = np.zeros(3)
    shift[axis] = step
    plus, minus = f.evaluate(np.stack([base + shift, base - shift]))
    return float((plus - minus) / (2.0 * step))


def periodicity_residual(f: ScalarField, points: Sequence[float] | np.ndarray) -> float:
    """Max relative change of `f` under a shift by each declared period."""
    pts = as_points(points)
    base = f.evaluate(pts)
    worst = 0.0
    for axis, period in enumerate(f.periods):
        if period is None:
            continue
        shifted = pts.copy()
        shifted[:, axis] += period
        moved = f.evaluate(shifted)
        scale = np.maximum(1.0, np.abs(base))
        worst = max(worst, float(np.max(np.abs(moved - base) / scale)))
    return worst


# Parsing

_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp}
_TOKEN = re.compile(
    r"(?P<number>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or "op"
        tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over: expr, term, unary, power, atom.

    `^` binds tighter than unary minus and takes an integer literal
    (optionally signed or parenthesized) as exponent.
    """

    def __init__(self, text: str, bindings: Mapping[str, ScalarField | float]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.bindings = bindings

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExpressionSyntaxError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.take()

    def parse(self) -> ScalarField:
        out = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return out

    def expr(self) -> ScalarField:
        out = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            out = out + rhs if op == "+" else out - rhs
        return out

    def term(self) -> ScalarField:
        out = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            out = out * rhs if op == "*" else out / rhs
        return out

    def unary(self) -> ScalarField:
        if self.tok.text == "-":
            self.take()
            return -self.unary()
        if self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> ScalarField:
        base = self.atom()
        if self.tok.text != "^":
            return base
        self.take()
        return base ** self.exponent()

    def exponent(self) -> int:
        if self.tok.text == "(":
            self.take()
            value = self.exponent()
            self.expect(")")
            return value
        sign = 1
        if self.tok.text in ("+", "-"):
            sign = -1 if self.take().text == "-" else 1
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            raise ExpressionSyntaxError("exponent must be an integer literal", t.pos)
        self.take()
        if self.tok.text == "^":
            raise ExpressionSyntaxError(
                "chained exponent needs parentheses around the base", self.tok.pos
            )
        return sign * int(t.text)

    def atom(self) -> ScalarField:
        t = self.tok
        if t.kind == "number":
            self.take()
            return ScalarField.constant(float(t.text))
        if t.text == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        if t.kind == "name":
            self.take()
            if t.text in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCTIONS[t.text](arg)
            if t.text in AXES:
                return ScalarField.coordinate(AXES.index(t.text))
            if t.text in self.bindings:
                return lift(self.bindings[t.text])
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.pos)
        found = t.text or "end of input"
        raise ExpressionSyntaxError(f"unexpected {found!r}", t.pos)


def parse_expression(
    text: str,
    bindings: Mapping[str, ScalarField | float] | None = None,
    periods: Sequence[Period] | None = None,
) -> ScalarField:
    """Parse `text` into a ScalarField.

    Args:
        text: expression over x, y, z, decimal literals, + - * / ^, sin/cos/exp.
        bindings: extra identifiers (e.g. `f`) substituted by value.
        periods: declared period per axis, overriding the merged default.

    Raises:
        ExpressionSyntaxError: malformed text, with the offending position.
        UnknownIdentifierError: identifier outside x, y, z, functions and bindings.
    """
    out = _Parser(text, bindings or {}).parse()
    if periods is not None:
        out = out.with_periods(periods)
    return out
