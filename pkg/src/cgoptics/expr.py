"""Small arithmetic expression language for coefficients given in config files.

Grammar (usual precedence, ``^`` takes an integer exponent)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' ['-'] INT)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names are ``i``, ``t``, ``x`` and ``u1 .. uN``; functions are
sin, cos, exp, re, im and conj.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprSyntaxError
from .system import Poly

FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "re": np.real, "im": np.imag,
         "conj": np.conj}
_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\S))")
_UVAR = re.compile(r"u([1-9]\d*)$")


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


class Expr:
    """Parsed expression: AST plus source text."""

    def __init__(self, tree, text=""):
        self.tree = tree
        self.text = text

    def __eq__(self, other):
        return isinstance(other, Expr) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"Expr({pretty(self.tree)!r})"

    def __str__(self):
        return pretty(self.tree)

    def variables(self):
        return _vars(self.tree)

    def __call__(self, **env):
        return evaluate(self.tree, env)

    def fd(self, name, h=1e-5, **env):
        """Centred difference with respect to the variable ``name``."""
        lo, hi = dict(env), dict(env)
        lo[name] = np.asarray(env[name]) - h
        hi[name] = np.asarray(env[name]) + h
        return (evaluate(self.tree, hi) - evaluate(self.tree, lo)) / (2 * h)


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        if m.group(1):
            toks.append(("num", m.group(1), m.start(1)))
        elif m.group(2):
            toks.append(("name", m.group(2), m.start(2)))
        elif m.group(3):
            if m.group(3) not in "+-*/^(),":
                raise ExprSyntaxError(f"unexpected character {m.group(3)!r}", m.start(3), 1,
                                      m.start(3) + 1)
            toks.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, line=1, col0=0):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0
        self.line = line
        self.col0 = col0

    def error(self, msg, tok=None):
        tok = tok or self.toks[self.k]
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ExprSyntaxError(f"{msg} at {what}", tok[2], self.line, self.col0 + tok[2] + 1)

    def peek(self):
        return self.toks[self.k]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] not in ("op",):
            self.error(f"expected {value!r}")
        return self.take()

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.error("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-" and self.peek()[0] == "op":
                self.take()
                sign = -1
            tok = self.peek()
            if tok[0] != "num" or not tok[1].isdigit():
                self.error("expected an integer exponent")
            self.take()
            return Pow(base, sign * int(tok[1]))
        return base

    def atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return Num(complex(float(tok[1])))
        if tok[0] == "name":
            self.take()
            name = tok[1]
            if name in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in ("i", "t", "x") or _UVAR.match(name):
                return Var(name)
            self.error("unknown name", tok)
        if tok[0] == "op" and tok[1] == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.error("unexpected token")


def parse_expr(text, line=1, col0=0):
    """Parse ``text``; raises ExprSyntaxError with the offending position."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, line, col0 + 1)
    return Expr(_Parser(text, line, col0).parse(), text)


# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _num_str(v):
    v = complex(v)
    if v.imag == 0:
        r = repr(float(v.real))
        return r[:-2] if r.endswith(".0") else r
    return f"({_num_str(v.real)} + {_num_str(v.imag)}*i)"


def pretty(node, prec=0):
    if isinstance(node, Num):
        return _num_str(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        s = "-" + pretty(node.arg, 3)
        return f"({s})" if prec > 1 else s
    if isinstance(node, Pow):
        s = f"{pretty(node.base, 5)}^{node.exp}" if node.exp >= 0 \
            else f"{pretty(node.base, 5)}^-{-node.exp}"
        return f"({s})" if prec > 4 else s
    p = _PREC[node.op]
    right = pretty(node.right, p + 1)
    s = f"{pretty(node.left, p)} {node.op} {right}"
    return f"({s})" if prec > p else s


def _vars(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return _vars(node.arg)
    if isinstance(node, Pow):
        return _vars(node.base)
    return _vars(node.left) | _vars(node.right)


# evaluation

def evaluate(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "i":
            return 1j
        if node.name not in env:
            raise KeyError(f"no value for variable {node.name!r}")
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return FUNCS[node.func](np.asarray(evaluate(node.arg, env), complex))
    if isinstance(node, Pow):
        return np.asarray(evaluate(node.base, env), complex) ** node.exp
    a, b = evaluate(node.left, env), evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    # IEEE semantics so evaluation is total: x/0 gives inf or nan, never raises
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.divide(np.asarray(a, complex), b)


def as_function(expr, real=False):
    """``f(t, x)`` (or ``f(x)`` when t is unused) evaluating a u-free expression."""
    if any(_UVAR.match(v) for v in expr.variables()):
        raise ExprSyntaxError(f"expression {expr} must not depend on u")

    def f(t, x):
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        out = np.broadcast_to(np.asarray(evaluate(expr.tree, {"t": t, "x": x}), complex),
                              np.broadcast(t, x).shape)
        return out.real.copy() if real else out.copy()

    return f


# conversion to polynomials in (u, conj u)

def _pzero():
    return {}


def _padd(P, Q, sign=1):
    out = dict(P)
    for k, c in Q.items():
        c = c if sign == 1 else Neg(c)
        out[k] = Bin("+", out[k], c) if k in out else c
    return out


def _pmul(P, Q, nv):
    out = {}
    for (a1, b1), c1 in P.items():
        for (a2, b2), c2 in Q.items():
            key = (tuple(i + j for i, j in zip(a1, a2)), tuple(i + j for i, j in zip(b1, b2)))
            c = Bin("*", c1, c2)
            out[key] = Bin("+", out[key], c) if key in out else c
    return out


def _pconj(P):
    return {(b, a): Call("conj", c) for (a, b), c in P.items()}


def _is_const(P, nv):
    z = (0,) * nv
    return all(k == (z, z) for k in P)


def _to_poly(node, nv):
    z = (0,) * nv
    if isinstance(node, Num):
        return {(z, z): node}
    if isinstance(node, Var):
        m = _UVAR.match(node.name)
        if m:
            k = int(m.group(1)) - 1
            if k >= nv:
                raise ExprSyntaxError(f"variable {node.name} exceeds N = {nv}")
            e = [0] * nv
            e[k] = 1
            return {(tuple(e), z): Num(1.0)}
        return {(z, z): node}
    if isinstance(node, Neg):
        return {k: Neg(c) for k, c in _to_poly(node.arg, nv).items()}
    if isinstance(node, Call):
        P = _to_poly(node.arg, nv)
        if node.func == "conj":
            return _pconj(P)
        if node.func in ("re", "im"):
            Q = _pconj(P)
            S = _padd(P, Q, 1 if node.func == "re" else -1)
            scale = Num(0.5) if node.func == "re" else Num(-0.5j)
            return {k: Bin("*", scale, c) for k, c in S.items()}
        if not _is_const(P, nv):
            raise ExprSyntaxError(f"{node.func}() of a u-dependent argument is not polynomial")
        return {(z, z): node}
    if isinstance(node, Pow):
        P = _to_poly(node.base, nv)
        if node.exp < 0:
            if not _is_const(P, nv):
                raise ExprSyntaxError("negative power of a u-dependent expression")
            return {(z, z): node}
        out = {(z, z): Num(1.0)}
        for _ in range(node.exp):
            out = _pmul(out, P, nv)
        return out
    L, R = _to_poly(node.left, nv), _to_poly(node.right, nv)
    if node.op == "+":
        return _padd(L, R)
    if node.op == "-":
        return _padd(L, R, -1)
    if node.op == "*":
        return _pmul(L, R, nv)
    if not _is_const(R, nv):
        raise ExprSyntaxError("division by a u-dependent expression")
    return {k: Bin("/", c, R[(z, z)]) for k, c in L.items()}


def poly_terms(expr, nvars):
    """``{(a, b): Expr}``: the expression as a polynomial in ``(u, conj u)``."""
    return {k: Expr(c) for k, c in _to_poly(expr.tree, nvars).items()}


def to_poly(exprs, shape, nvars):
    """Build a Poly from an array (nested lists) of expressions of the given shape."""
    flat = np.empty(int(np.prod(shape)), object)
    flat[:] = [e for e in np.asarray(exprs, object).ravel()]
    keys = {}
    for j, e in enumerate(flat):
        for k, c in poly_terms(e, nvars).items():
            keys.setdefault(k, {})[j] = c
    terms = {}
    for k, entries in keys.items():
        def coef(t, x, entries=entries):
            n = np.shape(t)[0]
            out = np.zeros((n, flat.size), complex)
            for j, c in entries.items():
                out[:, j] = evaluate(c.tree, {"t": t, "x": x})
            return out.reshape((n,) + tuple(shape))
        terms[k] = coef
    return Poly(terms, shape, nvars)
