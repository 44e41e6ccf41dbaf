"""Coordinate expressions and truncated multivariate Taylor (jet) arithmetic.

An :class:`Expr` is a parsed scalar expression over four chart coordinates.
``eval_jet`` evaluates it together with all mixed partial derivatives up to a
requested order (0..4) at a point, by propagating truncated Taylor series
rather than by finite differencing or nested dual numbers.

Jets are stored as dense vectors of Taylor coefficients ``c_alpha =
d^alpha f / alpha!`` indexed by the multi-indices of degree <= order in four
variables (graded lexicographic order), so symmetry of mixed partials holds
by construction.  The module also exposes the coefficient-array helpers
(``jmul``, ``jderiv``, ...) used by the curvature pipeline to run whole
tensor fields through the same arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

NCOORDS = 4
MAX_ORDER = 4


class ExpressionError(Exception):
    """Base class for expression parsing/evaluation failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownSymbolError(ExpressionError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown symbol '{name}' (at offset {offset})")
        self.name = name
        self.offset = offset


class DomainError(ExpressionError):
    """Evaluation left the real domain (log/sqrt/division issues)."""


# ---------------------------------------------------------------------------
# Multi-index tables
# ---------------------------------------------------------------------------


class JetTables:
    """Index tables for jets of a fixed truncation order in 4 variables."""

    def __init__(self, order: int):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.order = order
        self.multis: list[tuple[int, ...]] = []
        for deg in range(order + 1):
            for alpha in itertools.product(range(deg + 1), repeat=NCOORDS):
                if sum(alpha) == deg:
                    self.multis.append(alpha)
        # product over range(deg+1) is not lexicographic per degree; sort within degree
        self.multis = sorted(self.multis, key=lambda a: (sum(a), a))
        self.ncoef = len(self.multis)
        self.pos = {a: i for i, a in enumerate(self.multis)}

        ia, ib, iout = [], [], []
        for i, a in enumerate(self.multis):
            for j, b in enumerate(self.multis):
                if sum(a) + sum(b) <= order:
                    ia.append(i)
                    ib.append(j)
                    iout.append(self.pos[tuple(x + y for x, y in zip(a, b))])
        self.mul_ia = np.asarray(ia, dtype=np.intp)
        self.mul_ib = np.asarray(ib, dtype=np.intp)
        scatter = np.zeros((len(iout), self.ncoef))
        scatter[np.arange(len(iout)), iout] = 1.0
        self.mul_scatter = scatter

        # d/dx_v: coefficient of beta in the derivative is (beta_v+1)*c[beta+e_v]
        self.diff_src: list[np.ndarray] = []
        self.diff_fac: list[np.ndarray] = []
        if order >= 1:
            lower = [a for a in self.multis if sum(a) <= order - 1]
            for v in range(NCOORDS):
                src, fac = [], []
                for beta in lower:
                    up = list(beta)
                    up[v] += 1
                    src.append(self.pos[tuple(up)])
                    fac.append(beta[v] + 1)
                self.diff_src.append(np.asarray(src, dtype=np.intp))
                self.diff_fac.append(np.asarray(fac, dtype=float))

        fact = [math.prod(math.factorial(k) for k in a) for a in self.multis]
        self.factorials = np.asarray(fact, dtype=float)


_TABLES: dict[int, JetTables] = {}


def tables(order: int) -> JetTables:
    if order not in _TABLES:
        _TABLES[order] = JetTables(order)
    return _TABLES[order]


# ---------------------------------------------------------------------------
# Coefficient-array arithmetic (trailing axis = Taylor coefficients)
# ---------------------------------------------------------------------------


def jmul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Truncated product of jet coefficient arrays, broadcasting leading axes."""
    t = tables(order)
    prod = a[..., t.mul_ia] * b[..., t.mul_ib]
    return prod @ t.mul_scatter


def jderiv(a: np.ndarray, v: int, order: int) -> np.ndarray:
    """Coordinate derivative d/dx_v; result is a jet of order ``order - 1``."""
    if order < 1:
        raise ValueError("cannot differentiate an order-0 jet")
    t = tables(order)
    return a[..., t.diff_src[v]] * t.diff_fac[v]


def jtruncate(a: np.ndarray, order_from: int, order_to: int) -> np.ndarray:
    if order_to > order_from:
        raise ValueError("cannot raise jet order by truncation")
    return a[..., : tables(order_to).ncoef]


def jconst(values: np.ndarray | float, order: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape + (tables(order).ncoef,))
    out[..., 0] = values
    return out


def jvalue(a: np.ndarray) -> np.ndarray:
    return a[..., 0]


def jmatmul(A: np.ndarray, B: np.ndarray, order: int) -> np.ndarray:
    """Matrix product of two (4,4,ncoef) jet matrices."""
    return jmul(A[:, :, None, :], B[None, :, :, :], order).sum(axis=1)


def jmatinv(G: np.ndarray, order: int) -> np.ndarray:
    """Inverse of a (4,4,ncoef) jet matrix via the truncated Neumann series."""
    g0 = G[..., 0]
    g0inv = np.linalg.inv(g0)
    delta = G.copy()
    delta[..., 0] = 0.0
    # E = -g0inv . delta has no constant term, so E^(order+1) == 0
    E = -np.einsum("ik,kjc->ijc", g0inv, delta)
    acc = jconst(np.eye(NCOORDS), order)
    term = acc
    for _ in range(order):
        term = jmatmul(E, term, order)
        acc = acc + term
    return np.einsum("ijc,jk->ikc", acc, g0inv)


def jdet4(G: np.ndarray, order: int) -> np.ndarray:
    """Determinant jet of a (4,4,ncoef) jet matrix (Leibniz expansion)."""
    out = np.zeros(tables(order).ncoef)
    for perm in itertools.permutations(range(4)):
        sign = _perm_sign(perm)
        term = G[0, perm[0]]
        for i in range(1, 4):
            term = jmul(term, G[i, perm[i]], order)
        out = out + sign * term
    return out


def _perm_sign(perm: Sequence[int]) -> float:
    sign = 1.0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Scalar jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet:
    """Value plus all partial derivatives up to ``order`` at a point.

    Coefficients are Taylor coefficients; use :meth:`partial` for actual
    derivative values.
    """

    coeffs: np.ndarray
    order: int

    @staticmethod
    def constant(value: float, order: int) -> "Jet":
        return Jet(jconst(float(value), order), order)

    @staticmethod
    def coordinate(value: float, index: int, order: int) -> "Jet":
        c = jconst(float(value), order)
        if order >= 1:
            e = [0] * NCOORDS
            e[index] = 1
            c[tables(order).pos[tuple(e)]] = 1.0
        return Jet(c, order)

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def partial(self, alpha: Sequence[int]) -> float:
        """Partial derivative d^alpha f for a multi-index ``alpha``."""
        t = tables(self.order)
        key = tuple(int(a) for a in alpha)
        if len(key) != NCOORDS or sum(key) > self.order:
            raise ValueError(f"multi-index {key} outside jet of order {self.order}")
        i = t.pos[key]
        return float(self.coeffs[i] * t.factorials[i])

    def gradient(self) -> np.ndarray:
        return np.array([self.partial(_unit(v)) for v in range(NCOORDS)])

    def hessian(self) -> np.ndarray:
        H = np.empty((NCOORDS, NCOORDS))
        for i in range(NCOORDS):
            for j in range(NCOORDS):
                a = [0] * NCOORDS
                a[i] += 1
                a[j] += 1
                H[i, j] = self.partial(a)
        return H

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet order mismatch")
            return other
        return Jet.constant(float(other), self.order)

    def __add__(self, other):
        o = self._coerce(other)
        return Jet(self.coeffs + o.coeffs, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.order)

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet(self.coeffs - o.coeffs, self.order)

    def __rsub__(self, other):
        o = self._coerce(other)
        return Jet(o.coeffs - self.coeffs, self.order)

    def __mul__(self, other):
        o = self._coerce(other)
        return Jet(jmul(self.coeffs, o.coeffs, self.order), self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o * self.reciprocal()

    def reciprocal(self) -> "Jet":
        a = self.value
        if a == 0.0:
            raise DomainError("division by a jet with zero value")
        derivs = [(-1.0) ** k * math.factorial(k) / a ** (k + 1) for k in range(self.order + 1)]
        return self._compose(derivs)

    def ipow(self, n: int) -> "Jet":
        if n == 0:
            return Jet.constant(1.0, self.order)
        base = self if n > 0 else self.reciprocal()
        n = abs(n)
        result = None
        acc = base
        while n:
            if n & 1:
                result = acc if result is None else result * acc
            n >>= 1
            if n:
                acc = acc * acc
        return result

    def _compose(self, derivs: Sequence[float]) -> "Jet":
        """Compose the univariate series with given derivatives at self.value."""
        h = self.coeffs.copy()
        h[0] = 0.0
        t = tables(self.order)
        out = np.zeros(t.ncoef)
        out[0] = derivs[self.order] / math.factorial(self.order)
        for k in range(self.order - 1, -1, -1):
            out = jmul(out, h, self.order)
            out[0] += derivs[k] / math.factorial(k)
        return Jet(out, self.order)


def _unit(v: int) -> tuple[int, ...]:
    e = [0] * NCOORDS
    e[v] = 1
    return tuple(e)


def _cyclic(fs: Sequence[Callable[[float], float]]) -> Callable[[float, int], list[float]]:
    def derivs(a: float, n: int) -> list[float]:
        return [fs[k % len(fs)](a) for k in range(n + 1)]

    return derivs


def _sin_derivs(a, n):
    return _cyclic([math.sin, math.cos, lambda x: -math.sin(x), lambda x: -math.cos(x)])(a, n)


def _cos_derivs(a, n):
    return _cyclic([math.cos, lambda x: -math.sin(x), lambda x: -math.cos(x), math.sin])(a, n)


def _exp_derivs(a, n):
    v = math.exp(a)
    return [v] * (n + 1)


def _log_derivs(a, n):
    if a <= 0.0:
        raise DomainError(f"log of non-positive value {a}")
    out = [math.log(a)]
    for k in range(1, n + 1):
        out.append((-1.0) ** (k - 1) * math.factorial(k - 1) / a**k)
    return out


def _sqrt_derivs(a, n):
    if a < 0.0 or (a == 0.0 and n >= 1):
        raise DomainError(f"sqrt domain error at {a}")
    out = [math.sqrt(a)]
    coef = 0.5
    for k in range(1, n + 1):
        out.append(coef * a ** (0.5 - k))
        coef *= 0.5 - k
    return out


def _sinh_derivs(a, n):
    return _cyclic([math.sinh, math.cosh])(a, n)


def _cosh_derivs(a, n):
    return _cyclic([math.cosh, math.sinh])(a, n)


def _tan_derivs(a, n):
    f = math.tan(a)
    u = 1.0 + f * f
    out = [f, u, 2 * f * u, u * (2 + 6 * f * f), u * (16 * f + 24 * f**3)]
    return out[: n + 1]


def _tanh_derivs(a, n):
    f = math.tanh(a)
    u = 1.0 - f * f
    out = [f, u, -2 * f * u, u * (6 * f * f - 2), u * (16 * f - 24 * f**3)]
    return out[: n + 1]


def _atan_derivs(a, n):
    d = 1.0 + a * a
    out = [math.atan(a), 1 / d, -2 * a / d**2, (6 * a * a - 2) / d**3, -24 * a * (a * a - 1) / d**4]
    return out[: n + 1]


FUNCTIONS: dict[str, tuple[Callable, Callable]] = {
    # name -> (float/ufunc evaluation, derivative table for jets)
    "sin": (np.sin, _sin_derivs),
    "cos": (np.cos, _cos_derivs),
    "tan": (np.tan, _tan_derivs),
    "exp": (np.exp, _exp_derivs),
    "log": (np.log, _log_derivs),
    "sqrt": (np.sqrt, _sqrt_derivs),
    "sinh": (np.sinh, _sinh_derivs),
    "cosh": (np.cosh, _cosh_derivs),
    "tanh": (np.tanh, _tanh_derivs),
    "atan": (np.arctan, _atan_derivs),
}


def jet_sqrt(j: Jet) -> Jet:
    return j._compose(_sqrt_derivs(j.value, j.order))


def jet_log(j: Jet) -> Jet:
    return j._compose(_log_derivs(j.value, j.order))


def jet_exp(j: Jet) -> Jet:
    return j._compose(_exp_derivs(j.value, j.order))


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

ADD_PREC, MUL_PREC, UNARY_PREC, POW_PREC, ATOM_PREC = 10, 20, 25, 30, 100


@dataclass(frozen=True)
class Expr:
    """Base expression node; immutable and shareable after parsing."""

    def precedence(self) -> int:
        return ATOM_PREC


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Sym(Expr):
    name: str
    index: int


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def precedence(self) -> int:
        return {"+": ADD_PREC, "-": ADD_PREC, "*": MUL_PREC, "/": MUL_PREC, "^": POW_PREC}[self.op]


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def precedence(self) -> int:
        return UNARY_PREC


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


def _fold_binop(op: str, a: Expr, b: Expr) -> Expr:
    # constant folding only; no other simplification
    if isinstance(a, Num) and isinstance(b, Num):
        x, y = a.value, b.value
        if op == "+":
            return Num(x + y)
        if op == "-":
            return Num(x - y)
        if op == "*":
            return Num(x * y)
        if op == "/" and y != 0.0:
            return Num(x / y)
        if op == "^":
            if y == int(y) or x > 0.0:
                return Num(float(x**y))
    return BinOp(op, a, b)


def _fold_neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


# ---------------------------------------------------------------------------
# Parser (Pratt, with byte offsets in errors)
# ---------------------------------------------------------------------------

_OPS = "+-*/^()"


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExpressionSyntaxError(f"bad number literal '{text[i:j]}'", i)
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ExpressionSyntaxError(f"unexpected character '{ch}'", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = list(coords)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ExpressionSyntaxError(f"expected '{kind}'", tok[2])
        return tok

    def parse(self) -> Expr:
        e = self.parse_expr(0)
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionSyntaxError("unexpected trailing input", tok[2])
        return e

    def parse_expr(self, min_bp: int) -> Expr:
        lhs = self.parse_primary()
        while True:
            kind, _, _ = self.peek()
            if kind in ("+", "-"):
                bp = ADD_PREC
            elif kind in ("*", "/"):
                bp = MUL_PREC
            elif kind == "^":
                bp = POW_PREC
            else:
                break
            if bp < min_bp:
                break
            self.next()
            # ^ is right-associative, the rest left-associative
            rhs = self.parse_expr(bp if kind == "^" else bp + 1)
            lhs = _fold_binop(kind, lhs, rhs)
        return lhs

    def parse_primary(self) -> Expr:
        kind, value, offset = self.next()
        if kind == "num":
            return Num(value)
        if kind == "-":
            return _fold_neg(self.parse_expr(UNARY_PREC))
        if kind == "+":
            return self.parse_expr(UNARY_PREC)
        if kind == "(":
            e = self.parse_expr(0)
            self.expect(")")
            return e
        if kind == "ident":
            if value in FUNCTIONS:
                tok = self.next()
                if tok[0] != "(":
                    raise ExpressionSyntaxError(f"expected '(' after function '{value}'", tok[2])
                arg = self.parse_expr(0)
                self.expect(")")
                return Call(value, arg)
            if value in self.coords:
                return Sym(value, self.coords.index(value))
            raise UnknownSymbolError(value, offset)
        raise ExpressionSyntaxError("expected a value", offset)


def parse_expression(text: str, coords: Sequence[str]) -> Expr:
    """Parse ``text`` over the four declared coordinate names."""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    if len(coords) != NCOORDS:
        raise ValueError(f"expected {NCOORDS} coordinate names, got {len(coords)}")
    return _Parser(text, coords).parse()


def expr_to_string(e: Expr) -> str:
    """Print an expression; reparsing the output gives a structurally equal tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({expr_to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = expr_to_string(e.operand)
        if e.operand.precedence() < UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        lhs, rhs = expr_to_string(e.left), expr_to_string(e.right)
        p = e.precedence()
        if e.op == "^":
            if e.left.precedence() < ATOM_PREC:
                lhs = f"({lhs})"
            if e.right.precedence() < POW_PREC:
                rhs = f"({rhs})"
            return f"{lhs}^{rhs}"
        if e.left.precedence() < p:
            lhs = f"({lhs})"
        if e.right.precedence() <= p:
            rhs = f"({rhs})"
        return f"{lhs} {e.op} {rhs}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Number = Union[float, np.ndarray]


def eval_jet(expr: Expr, point: Sequence[float], order: int) -> Jet:
    """Evaluate ``expr`` and all partials up to ``order`` at ``point``.

    Derivatives are exact to machine rounding (jet propagation), not finite
    differences.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    if len(point) != NCOORDS:
        raise ValueError("point must have 4 coordinates")
    return _eval_jet(expr, [float(p) for p in point], order)


def _eval_jet(e: Expr, point: list[float], order: int) -> Jet:
    if isinstance(e, Num):
        return Jet.constant(e.value, order)
    if isinstance(e, Sym):
        return Jet.coordinate(point[e.index], e.index, order)
    if isinstance(e, Neg):
        return -_eval_jet(e.operand, point, order)
    if isinstance(e, Call):
        arg = _eval_jet(e.arg, point, order)
        return arg._compose(FUNCTIONS[e.func][1](arg.value, order))
    if isinstance(e, BinOp):
        a = _eval_jet(e.left, point, order)
        if e.op == "^":
            return _eval_pow(a, e.right, point, order)
        b = _eval_jet(e.right, point, order)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    raise TypeError(f"not an expression node: {e!r}")


def _eval_pow(base: Jet, exp_node: Expr, point: list[float], order: int) -> Jet:
    exp = _eval_jet(exp_node, point, order)
    if np.any(exp.coeffs[1:] != 0.0):
        raise DomainError("exponents must be constant expressions")
    p = exp.value
    if p == int(p):
        return base.ipow(int(p))
    if base.value <= 0.0:
        raise DomainError(f"real power of non-positive base {base.value}")
    return jet_exp(jet_log(base) * p)


def eval_values(expr: Expr, coords: Sequence[Number]) -> Number:
    """Plain (order-0) evaluation; accepts numpy arrays for vectorized use."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Sym):
        return coords[expr.index]
    if isinstance(expr, Neg):
        return -eval_values(expr.operand, coords)
    if isinstance(expr, Call):
        arg = eval_values(expr.arg, coords)
        if expr.func == "log" and np.any(np.asarray(arg) <= 0.0):
            raise DomainError("log of non-positive value")
        if expr.func == "sqrt" and np.any(np.asarray(arg) < 0.0):
            raise DomainError("sqrt of negative value")
        return FUNCTIONS[expr.func][0](arg)
    if isinstance(expr, BinOp):
        a = eval_values(expr.left, coords)
        b = eval_values(expr.right, coords)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            return a / b
        bf = float(np.asarray(b).reshape(-1)[0]) if np.ndim(b) else float(b)
        if bf == int(bf):
            return np.power(a, int(bf)) if np.ndim(a) else a ** int(bf)
        if np.any(np.asarray(a) <= 0.0):
            raise DomainError("real power of non-positive base")
        return np.power(a, b)
    raise TypeError(f"not an expression node: {expr!r}")


def expr_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_symbols(e.left) | expr_symbols(e.right)
    if isinstance(e, Neg):
        return expr_symbols(e.operand)
    if isinstance(e, Call):
        return expr_symbols(e.arg)
    return set()
