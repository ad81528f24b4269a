"""Symbolic model expressions: parsing, evaluation, differentiation, codegen.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := power (('*' | '/') power)*
    power  := unary ('^' power)?          # right-associative
    unary  := '-' unary | atom
    atom   := NUMBER | IDENT | '(' expr ')'

Unary minus binds tighter than '^', so ``-x^2`` is ``(-x)^2``.  Powers follow
IEEE/numpy conventions: a negative base with an exact-integer exponent is
sign-preserving, a negative base with a fractional exponent yields NaN (the
domain-error value), and division by zero yields +/-inf.  Evaluation never
raises on domain problems; non-finite values propagate so callers can treat
them as rejections.
"""

from __future__ import annotations

import linecache
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Sym",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Neg",
    "ExprSyntaxError",
    "parse_expr",
    "print_expr",
    "eval_expr",
    "grad_expr",
    "expr_names",
    "compile_expr",
    "CompiledExpr",
]


class ExprSyntaxError(ValueError):
    """Raised on malformed expression source; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip leading whitespace before reporting
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            at = len(source) - len(stripped)
            raise ExprSyntaxError(f"unknown character {stripped[0]!r}", at)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(source)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)
        return self.next()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.parse_term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def parse_term(self):
        node = self.parse_power()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.parse_power()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def parse_power(self):
        base = self.parse_unary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Pow(base, self.parse_power())
        return base

    def parse_unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "ident":
            return Sym(val)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError("expected a number, name, or '('", pos)


def parse_expr(source):
    """Parse an expression string into its unique tree.

    Raises ExprSyntaxError (with position) on malformed input.
    """
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {val!r}", pos)
    return node


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _fmt_const(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def print_expr(e):
    """Canonical fully-parenthesized form; parse_expr(print_expr(e)) == e."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        return f"(-{print_expr(e.operand)})"
    ops = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}
    op = ops[type(e)]
    left, right = (e.base, e.exponent) if isinstance(e, Pow) else (e.left, e.right)
    return f"({print_expr(left)} {op} {print_expr(right)})"


def expr_names(e):
    """Frozenset of all symbol names referenced by the tree."""
    if isinstance(e, Sym):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return expr_names(e.operand)
    left, right = (e.base, e.exponent) if isinstance(e, Pow) else (e.left, e.right)
    return expr_names(left) | expr_names(right)


# ---------------------------------------------------------------------------
# Evaluation and forward-mode differentiation
# ---------------------------------------------------------------------------


def eval_expr(e, bindings):
    """Evaluate the tree at the given name -> value bindings.

    Values may be scalars or broadcastable numpy arrays.  Domain errors
    (negative base to a fractional power) evaluate to NaN; division by zero
    to +/-inf.  Raises KeyError for names missing from the bindings.
    """
    with np.errstate(all="ignore"):
        return _eval(e, bindings)


def _eval(e, b):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        try:
            return b[e.name]
        except KeyError:
            raise KeyError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, b)
    if isinstance(e, Add):
        return _eval(e.left, b) + _eval(e.right, b)
    if isinstance(e, Sub):
        return _eval(e.left, b) - _eval(e.right, b)
    if isinstance(e, Mul):
        return _eval(e.left, b) * _eval(e.right, b)
    if isinstance(e, Div):
        return np.divide(_eval(e.left, b), _eval(e.right, b))
    return np.power(_eval(e.base, b), _eval(e.exponent, b))


def grad_expr(e, bindings, wrt):
    """Partial derivatives of the tree at ``bindings`` w.r.t. ``wrt`` names.

    Forward accumulation over the tree; returns an array of shape
    ``(len(wrt),) + shape(value)``.  Derivatives at domain boundaries are
    flagged non-finite rather than raised.
    """
    wrt = list(wrt)
    with np.errstate(all="ignore"):
        _, g = _fwd(e, bindings, wrt)
    return g


def _fwd(e, b, wrt):
    k = len(wrt)
    if isinstance(e, Const):
        return e.value, np.zeros(k)
    if isinstance(e, Sym):
        v = np.asarray(b[e.name], dtype=float)
        g = np.zeros((k,) + v.shape)
        for i, name in enumerate(wrt):
            if name == e.name:
                g[i] = 1.0
        return v, g
    if isinstance(e, Neg):
        v, g = _fwd(e.operand, b, wrt)
        return -v, -g
    if isinstance(e, Add):
        va, ga = _fwd(e.left, b, wrt)
        vb, gb = _fwd(e.right, b, wrt)
        return va + vb, ga + gb
    if isinstance(e, Sub):
        va, ga = _fwd(e.left, b, wrt)
        vb, gb = _fwd(e.right, b, wrt)
        return va - vb, ga - gb
    if isinstance(e, Mul):
        va, ga = _fwd(e.left, b, wrt)
        vb, gb = _fwd(e.right, b, wrt)
        return va * vb, ga * vb + gb * va
    if isinstance(e, Div):
        va, ga = _fwd(e.left, b, wrt)
        vb, gb = _fwd(e.right, b, wrt)
        v = np.divide(va, vb)
        return v, np.divide(ga - v * gb, vb)
    # Pow: when the exponent is structurally constant w.r.t. wrt, use the
    # sign-preserving monomial rule so integer powers of negative bases stay
    # differentiable; otherwise the general rule needs log(base).
    vu, gu = _fwd(e.base, b, wrt)
    vv, gv = _fwd(e.exponent, b, wrt)
    v = np.power(vu, vv)
    if not (expr_names(e.exponent) & set(wrt)):
        return v, vv * np.power(vu, vv - 1.0) * gu
    return v, v * (np.log(vu) * gv + np.divide(vv * gu, vu))


# ---------------------------------------------------------------------------
# Code generation
# ---------------------------------------------------------------------------
#
# Hot paths (HMC log-posterior gradients, predictive mixtures over thousands
# of parameter samples) evaluate the same small tree millions of times; the
# tree walk above is the reference implementation, and SourceEmitter turns a
# tree into straight-line numpy source that vectorizes or JITs cleanly.  Both
# routes share the differentiation rules and are cross-checked in tests.


def _mangle(name):
    return "v_" + name


class SourceEmitter:
    """Emits straight-line assignments for a tree's value and derivatives.

    Symbol names are mangled to ``v_<name>``; callers bind those local
    variables before the emitted lines run.  Derivative sources follow the
    same rules as grad_expr, with structural zeros dropped.
    """

    def __init__(self, prefix="t"):
        self.lines = []
        self.prefix = prefix
        self._n = 0
        self._values = {}
        self._derivs = {}
        self._by_src = {}

    def _temp(self, src):
        if src in self._by_src:
            return self._by_src[src]
        name = f"{self.prefix}{self._n}"
        self._n += 1
        self.lines.append(f"{name} = {src}")
        self._by_src[src] = name
        return name

    def value(self, e):
        if e in self._values:
            return self._values[e]
        out = self._value(e)
        self._values[e] = out
        return out

    def _value(self, e):
        if isinstance(e, Const):
            return repr(float(e.value))
        if isinstance(e, Sym):
            return _mangle(e.name)
        if isinstance(e, Neg):
            return self._temp(f"-{self.value(e.operand)}")
        if isinstance(e, Pow):
            return self._temp(f"np.power({self.value(e.base)}, {self.value(e.exponent)})")
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        return self._temp(f"{self.value(e.left)} {op} {self.value(e.right)}")

    def deriv(self, e, name):
        """Source for d(e)/d(name), or None when structurally zero."""
        key = (e, name)
        if key in self._derivs:
            return self._derivs[key]
        out = self._deriv(e, name)
        if out is not None and out not in ("1.0", "-1.0") and not out.startswith(self.prefix):
            out = self._temp(out)
        self._derivs[key] = out
        return out

    def _deriv(self, e, name):
        if isinstance(e, Const):
            return None
        if isinstance(e, Sym):
            return "1.0" if e.name == name else None
        if isinstance(e, Neg):
            d = self.deriv(e.operand, name)
            return None if d is None else f"-{d}"
        if isinstance(e, Add):
            da, db = self.deriv(e.left, name), self.deriv(e.right, name)
            if da is None:
                return db
            if db is None:
                return da
            return f"{da} + {db}"
        if isinstance(e, Sub):
            da, db = self.deriv(e.left, name), self.deriv(e.right, name)
            if da is None:
                return None if db is None else f"-{db}"
            if db is None:
                return da
            return f"{da} - {db}"
        if isinstance(e, Mul):
            da, db = self.deriv(e.left, name), self.deriv(e.right, name)
            va, vb = self.value(e.left), self.value(e.right)
            terms = []
            if da is not None:
                terms.append(vb if da == "1.0" else f"{da} * {vb}")
            if db is not None:
                terms.append(va if db == "1.0" else f"{db} * {va}")
            return " + ".join(terms) if terms else None
        if isinstance(e, Div):
            da, db = self.deriv(e.left, name), self.deriv(e.right, name)
            vb, w = self.value(e.right), self.value(e)
            if da is None and db is None:
                return None
            if db is None:
                return f"{da} / {vb}"
            if da is None:
                return f"-{w} * {db} / {vb}"
            return f"({da} - {w} * {db}) / {vb}"
        # Pow
        du = self.deriv(e.base, name)
        dv = self.deriv(e.exponent, name)
        if du is None and dv is None:
            return None
        tu, tv, tw = self.value(e.base), self.value(e.exponent), self.value(e)
        if dv is None:
            if isinstance(e.exponent, Const):
                lowered = repr(float(e.exponent.value) - 1.0)
            else:
                lowered = f"{tv} - 1.0"
            mono = f"{tv} * np.power({tu}, {lowered})"
            return mono if du == "1.0" else f"{mono} * {du}"
        if du is None:
            return f"{tw} * np.log({tu}) * {dv}"
        return f"{tw} * (np.log({tu}) * {dv} + {tv} * {du} / {tu})"


_SOURCE_SEQ = [0]


def exec_source(source, filename_hint):
    """Exec generated source in a numpy namespace; registers it in linecache
    so tracebacks through generated code stay readable."""
    _SOURCE_SEQ[0] += 1
    filename = f"<symdisc:{filename_hint}:{_SOURCE_SEQ[0]}>"
    linecache.cache[filename] = (len(source), None, source.splitlines(True), filename)
    namespace = {"np": np}
    exec(compile(source, filename, "exec"), namespace)
    return namespace


def _emit_function(expr, fn_name, arg_names, wrt):
    em = SourceEmitter()
    val = em.value(expr)
    derivs = [em.deriv(expr, n) for n in wrt]
    body = "\n".join("    " + ln for ln in em.lines) or "    pass"
    rets = [val] + ["0.0" if d is None else d for d in derivs]
    args = ", ".join(_mangle(a) for a in arg_names)
    return f"def {fn_name}({args}):\n{body}\n    return {', '.join(rets)}\n"


class CompiledExpr:
    """Vectorized evaluators for one expression over named inputs/parameters.

    value/value_dtheta/value_dx take the input coordinates and the parameter
    coordinates as two sequences (scalars or broadcastable arrays, one entry
    per name, in declaration order).  Gradients come back stacked on axis 0.
    """

    def __init__(self, expr, input_names, param_names):
        self.expr = expr
        self.input_names = tuple(input_names)
        self.param_names = tuple(param_names)
        args = self.input_names + self.param_names
        src = (
            _emit_function(expr, "_value", args, ())
            + _emit_function(expr, "_vdtheta", args, self.param_names)
            + _emit_function(expr, "_vdx", args, self.input_names)
        )
        ns = exec_source(src, f"expr:{print_expr(expr)[:40]}")
        self._value = ns["_value"]
        self._vdtheta = ns["_vdtheta"]
        self._vdx = ns["_vdx"]

    def value(self, x, theta):
        with np.errstate(all="ignore"):
            return self._value(*x, *theta)

    def value_dtheta(self, x, theta):
        with np.errstate(all="ignore"):
            out = self._vdtheta(*x, *theta)
        return _stack_val_grads(out)

    def value_dx(self, x, theta):
        with np.errstate(all="ignore"):
            out = self._vdx(*x, *theta)
        return _stack_val_grads(out)


def _stack_val_grads(out):
    if not isinstance(out, tuple):
        return np.asarray(out, dtype=float), np.zeros((0,))
    arrs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in out])
    return arrs[0], np.stack(arrs[1:])


_COMPILED_CACHE = {}


def compile_expr(e, input_names, param_names):
    """CompiledExpr for the tree, cached by structure (safe across pickling)."""
    key = (print_expr(e), tuple(input_names), tuple(param_names))
    fns = _COMPILED_CACHE.get(key)
    if fns is None:
        fns = CompiledExpr(e, input_names, param_names)
        _COMPILED_CACHE[key] = fns
    return fns
