"""Scalar expression language with exact first (and second) derivatives.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Derivatives are forward-mode: variables are bound to :class:`Dual` numbers
and the ordinary evaluator runs unchanged.  Duals nest, which gives second
derivatives without any symbolic manipulation.

Hot paths (the integrator) use :func:`compile_exprs`, which turns a list of
trees into one Python function over plain floats.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    ArityError,
    DomainError,
    ExprSyntaxError,
    UnboundVariable,
    UndeclaredVariable,
    UnknownFunction,
)

FUNCTIONS = ("exp", "ln", "sin", "cos", "tanh", "sech", "sqrt", "abs")


# ---------------------------------------------------------------------------
# dual numbers

class Dual:
    """a + b·ε with ε² = 0.  Components may themselves be Duals."""

    __slots__ = ("re", "du")

    def __init__(self, re, du):
        self.re = re
        self.du = du

    def __repr__(self):
        return f"Dual({self.re!r}, {self.du!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.re + o.re, self.du + o.du)
        return Dual(self.re + o, self.du)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.re - o.re, self.du - o.du)
        return Dual(self.re - o, self.du)

    def __rsub__(self, o):
        return Dual(o - self.re, -self.du)

    def __neg__(self):
        return Dual(-self.re, -self.du)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.re * o.re, self.re * o.du + self.du * o.re)
        return Dual(self.re * o, self.du * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)


def primal(x):
    while isinstance(x, Dual):
        x = x.re
    return x


def _is_zero(x) -> bool:
    if isinstance(x, Dual):
        return _is_zero(x.re) and _is_zero(x.du)
    return x == 0


def _finite(x) -> bool:
    if isinstance(x, Dual):
        return _finite(x.re) and _finite(x.du)
    return math.isfinite(x)


# ---------------------------------------------------------------------------
# elementary functions: float versions (used by compiled code) ...

def _f_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        raise DomainError(f"exp overflow at {x!r}") from None


def _f_ln(x):
    if x <= 0:
        raise DomainError(f"ln of non-positive argument {x!r}")
    return math.log(x)


def _f_sech(x):
    # 2e^{-|x|}/(1+e^{-2|x|}); cosh would overflow long before this underflows
    e = math.exp(-abs(x))
    return 2.0 * e / (1.0 + e * e)


def _f_sqrt(x):
    if x < 0:
        raise DomainError(f"sqrt of negative argument {x!r}")
    return math.sqrt(x)


def _f_pow(a, b):
    if a < 0 and not float(b).is_integer():
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    if a == 0 and b < 0:
        raise DomainError("zero raised to a negative power")
    try:
        return math.pow(a, b)
    except (OverflowError, ValueError):
        raise DomainError(f"pow overflow for {a!r}^{b!r}") from None


def _f_div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


# ... and generic versions accepting Duals

def div(a, b):
    if isinstance(b, Dual):
        if primal(b) == 0:
            raise DomainError("division by zero")
        q = div(a.re if isinstance(a, Dual) else a, b.re)
        adu = a.du if isinstance(a, Dual) else 0.0
        return Dual(q, div(adu - q * b.du, b.re))
    if isinstance(a, Dual):
        if b == 0:
            raise DomainError("division by zero")
        return Dual(div(a.re, b), div(a.du, b))
    return _f_div(a, b)


def exp(x):
    if isinstance(x, Dual):
        v = exp(x.re)
        return Dual(v, v * x.du)
    return _f_exp(x)


def ln(x):
    if isinstance(x, Dual):
        if primal(x) <= 0:
            raise DomainError(f"ln of non-positive argument {primal(x)!r}")
        return Dual(ln(x.re), div(x.du, x.re))
    return _f_ln(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), cos(x.re) * x.du)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), -(sin(x.re) * x.du))
    return math.cos(x)


def sech(x):
    if isinstance(x, Dual):
        v = sech(x.re)
        return Dual(v, -(v * tanh(x.re)) * x.du)
    return _f_sech(x)


def tanh(x):
    if isinstance(x, Dual):
        c = sech(x.re)
        return Dual(tanh(x.re), c * c * x.du)
    return math.tanh(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = sqrt(x.re)
        return Dual(v, div(x.du, 2.0 * v))
    return _f_sqrt(x)


def fabs(x):
    if isinstance(x, Dual):
        p = primal(x)
        sgn = 1.0 if p > 0 else (-1.0 if p < 0 else 0.0)
        return Dual(fabs(x.re), x.du * sgn)
    return abs(x)


def power(a, b):
    while isinstance(b, Dual) and _is_zero(b.du):
        b = b.re
    if isinstance(b, Dual):
        if primal(a) <= 0:
            raise DomainError("variable exponent requires a positive base")
        return exp(b * ln(a))
    if not isinstance(a, Dual):
        return _f_pow(a, b)
    if b == 0:
        return Dual(power(a.re, 0.0), a.du * 0.0)
    if b == 1:
        return a
    return Dual(power(a.re, b), b * power(a.re, b - 1.0) * a.du)


_GENERIC = {
    "exp": exp, "ln": ln, "sin": sin, "cos": cos,
    "tanh": tanh, "sech": sech, "sqrt": sqrt, "abs": fabs,
}


# ---------------------------------------------------------------------------
# syntax tree

class Expr:
    """Base of the immutable syntax tree."""

    __slots__ = ()

    @property
    def free_vars(self) -> frozenset:
        out: set = set()
        self._collect(out)
        return frozenset(out)

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def _ev(self, env):
        return self.value

    def _collect(self, out):
        pass

    def _src(self, names):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _ev(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundVariable(f"variable {self.name!r} is not bound") from None

    def _collect(self, out):
        out.add(self.name)

    def _src(self, names):
        return names[self.name]


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _ev(self, env):
        return -self.arg._ev(env)

    def _collect(self, out):
        self.arg._collect(out)

    def _src(self, names):
        return f"(-{self.arg._src(names)})"


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def _ev(self, env):
        a = self.left._ev(env)
        b = self.right._ev(env)
        op = self.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return div(a, b)
        return power(a, b)

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def _src(self, names):
        a, b = self.left._src(names), self.right._src(names)
        if self.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {self.op} {b})"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def _ev(self, env):
        return _GENERIC[self.fn](self.arg._ev(env))

    def _collect(self, out):
        self.arg._collect(out)

    def _src(self, names):
        return f"_{self.fn}({self.arg._src(names)})"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\S))"
)


def _tokenize(src: str):
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        m = _TOKEN.match(src, pos)
        if m is None:  # trailing whitespace only
            break
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", None, len(src)))
    return toks


class _Parser:
    def __init__(self, src):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok, msg=None):
        kind, text, pos = tok
        if msg is None:
            msg = "unexpected end of input" if kind == "end" else f"unexpected {text!r}"
        raise ExprSyntaxError(msg, pos, self.src)

    def is_op(self, *ops):
        kind, text, _ = self.peek()
        return kind == "op" and text in ops

    def expr(self):
        node = self.term()
        while self.is_op("+", "-"):
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.is_op("*", "/"):
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.is_op("-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.is_op("^"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.is_op("("):
                if text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {text!r}", pos, self.src)
                self.take()
                args = [self.expr()]
                while self.is_op(","):
                    self.take()
                    args.append(self.expr())
                if not self.is_op(")"):
                    self.fail(self.peek())
                self.take()
                if len(args) != 1:
                    raise ArityError(
                        f"{text} takes 1 argument, got {len(args)}", pos, self.src)
                return Call(text, args[0])
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            if not self.is_op(")"):
                self.fail(self.peek(), "expected ')'")
            self.take()
            return node
        self.fail(tok)


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with ``offset``), :class:`UnknownFunction`
    or :class:`ArityError`.
    """
    p = _Parser(src)
    node = p.expr()
    if p.peek()[0] != "end":
        p.fail(p.peek())
    return node


def render(e: Expr) -> str:
    """Fully parenthesised source text that parses back to an equivalent tree."""
    if isinstance(e, Num):
        v = float(e.value)
        return repr(v) if v >= 0 else f"(-{repr(-v)})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{render(e.arg)})"
    if isinstance(e, Bin):
        return f"({render(e.left)} {e.op} {render(e.right)})"
    return f"{e.fn}({render(e.arg)})"


def check_vars(e: Expr, allowed: Iterable[str], what: str = "expression") -> None:
    extra = e.free_vars - set(allowed)
    if extra:
        raise UndeclaredVariable(f"{what} uses undeclared variables {sorted(extra)}")


# ---------------------------------------------------------------------------
# evaluation

def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    v = e._ev(env)
    if not _finite(v):
        raise DomainError(f"non-finite value for {render(e)}")
    return v


def deriv(e: Expr, var: str, env: Mapping[str, float]) -> float:
    """Exact ∂e/∂var at ``env`` (forward mode)."""
    return value_and_deriv(e, var, env)[1]


def value_and_deriv(e: Expr, var: str, env: Mapping[str, float]):
    if var not in env:
        raise UnboundVariable(f"variable {var!r} is not bound")
    local = dict(env)
    local[var] = Dual(float(env[var]), 1.0)
    r = e._ev(local)
    if not isinstance(r, Dual):
        r = Dual(r, 0.0)
    if not (_finite(r.re) and _finite(r.du)):
        raise DomainError(f"non-finite derivative of {render(e)}")
    return r.re, r.du


def second_deriv(e: Expr, var: str, env: Mapping[str, float]):
    """(value, first, second) derivative along ``var`` via nested duals."""
    if var not in env:
        raise UnboundVariable(f"variable {var!r} is not bound")
    x = float(env[var])
    local = dict(env)
    local[var] = Dual(Dual(x, 1.0), Dual(1.0, 0.0))
    r = e._ev(local)
    if not isinstance(r, Dual):
        return r, 0.0, 0.0
    f = primal(r)
    d = r.du
    if isinstance(d, Dual):
        d1, d2 = d.re, d.du
    else:
        d1, d2 = d, 0.0
    out = (f, primal(d1), primal(d2))
    if not all(math.isfinite(v) for v in out):
        raise DomainError(f"non-finite second derivative of {render(e)}")
    return out


# ---------------------------------------------------------------------------
# compilation to plain Python

_NAMESPACE = {
    "_exp": _f_exp, "_ln": _f_ln, "_sin": math.sin, "_cos": math.cos,
    "_tanh": math.tanh, "_sech": _f_sech, "_sqrt": _f_sqrt, "_abs": abs,
    "_pow": _f_pow,
}


def compile_exprs(exprs: Sequence[Expr], args: Sequence[str],
                  consts: Mapping[str, float] | None = None) -> Callable[..., tuple]:
    """Compile ``exprs`` into ``fn(*args) -> tuple`` of floats.

    Names in ``consts`` are inlined as literals.  Any other free variable
    must appear in ``args``.  Domain violations and non-finite results raise
    :class:`DomainError`, same as :func:`evaluate`.
    """
    consts = dict(consts or {})
    names = {}
    for i, a in enumerate(args):
        names[a] = f"a{i}"
    for k, v in consts.items():
        if k not in names:
            names[k] = f"({float(v)!r})"
    for e in exprs:
        check_vars(e, names)
    body = ", ".join(e._src(names) for e in exprs)
    src = f"def _fn({', '.join(f'a{i}' for i in range(len(args)))}):\n    return ({body},)\n"
    ns = dict(_NAMESPACE)
    exec(compile(src, "<compactode-expr>", "exec"), ns)
    raw = ns["_fn"]
    isfinite = math.isfinite

    def fn(*vals):
        try:
            # plain floats, so division by zero raises instead of warning as numpy scalars do
            out = raw(*[float(v) for v in vals])
        except ZeroDivisionError:
            raise DomainError("division by zero") from None
        except (OverflowError, ValueError) as exc:
            raise DomainError(str(exc)) from None
        for v in out:
            if not isfinite(v):
                raise DomainError("non-finite value")
        return out

    fn.source = src
    return fn
