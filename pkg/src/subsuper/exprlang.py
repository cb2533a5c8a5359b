"""Tiny arithmetic language for kernels k(t, s) and nonlinearities f(u).

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are either declared variables, the constants ``pi`` and ``e``, or one
of the functions in ``FUNCTIONS``.  Evaluation works on floats and on numpy
arrays alike; domain violations raise instead of producing NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SubSuperError

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "min": 2, "max": 2, "pow": 2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprSyntaxError(ConfigError):
    """Parse failure; ``offset`` is the byte offset into the source."""

    def __init__(self, message, offset, src=""):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
        self.src = src


class ExprEvalError(SubSuperError):
    """Domain error during evaluation (log/sqrt of a negative, x/0, ...)."""

    def __init__(self, message, subexpr):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Expr:
    root: object
    variables: frozenset

    def __str__(self):
        return to_source(self.root)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.lastgroup is None:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", _byte(src, bad), src)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


def _byte(src, char_offset):
    return len(src[:char_offset].encode("utf-8"))


class _Parser:
    def __init__(self, src, variables):
        self.src = src
        self.variables = variables
        self.tokens = _tokenize(src)
        self.i = 0

    def error(self, message, tok=None):
        tok = tok or self.tokens[self.i]
        raise ExprSyntaxError(message, _byte(self.src, tok[2]), self.src)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {text!r}, found {what}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            is_call = self.peek()[:2] == ("op", "(")
            if text in self.variables and not is_call:
                return Var(text)
            if text in CONSTANTS and not is_call:
                return Const(text)
            if text in FUNCTIONS:
                if not is_call:
                    self.error(f"function {text!r} needs arguments", tok)
                return self.call(tok)
            self.error(f"unknown identifier {text!r}", tok)
        if tok[:2] == ("op", "("):
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.error("unexpected end of input" if kind == "end" else f"unexpected {text!r}")

    def call(self, name_tok):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.take()
            args.append(self.expr())
        self.expect(")")
        name = name_tok[1]
        if len(args) != FUNCTIONS[name]:
            self.error(f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", name_tok)
        return Call(name, tuple(args))


def parse(src, variables):
    """Parse ``src`` with the given variable names into an :class:`Expr`."""
    variables = frozenset(variables)
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src)
    return Expr(_Parser(src, variables).parse(), variables)


# precedence used by the printer: higher binds tighter
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1, node.value) < 0):
        return _PREC["neg"]
    return _ATOM


def to_source(node, full=False):
    """Print ``node`` back to source.

    With ``full=True`` every compound subexpression is parenthesized;
    otherwise only the parentheses needed to preserve the tree are kept.
    """
    if isinstance(node, Expr):
        node = node.root

    def wrap(child, min_prec):
        s = to_source(child, full)
        if (full and _prec(child) < _ATOM) or _prec(child) < min_prec:
            return f"({s})"
        return s

    if isinstance(node, Num):
        if not math.isfinite(node.value):
            raise ValueError("non-finite literal cannot be printed")
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a, full) for a in node.args)})"
    if isinstance(node, Neg):
        return "-" + wrap(node.operand, _PREC["neg"])
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        if node.op == "^":
            left, right = wrap(node.left, _ATOM), wrap(node.right, _PREC["neg"])
        else:
            left, right = wrap(node.left, p), wrap(node.right, p + 1)
        return f"{left}{node.op}{right}" if node.op in "*/^" else f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def _fail(message, node):
    raise ExprEvalError(message, to_source(node))


def _eval(node, env):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Const):
        return np.float64(CONSTANTS[node.name])
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, env), _eval(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(b == 0):
                _fail("division by zero", node)
            return a / b
        return _pow(a, b, node)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        name = node.name
        if name == "log":
            if np.any(args[0] <= 0):
                _fail("log of a nonpositive number", node)
            return np.log(args[0])
        if name == "sqrt":
            if np.any(args[0] < 0):
                _fail("sqrt of a negative number", node)
            return np.sqrt(args[0])
        if name == "pow":
            return _pow(args[0], args[1], node)
        if name == "min":
            return np.minimum(args[0], args[1])
        if name == "max":
            return np.maximum(args[0], args[1])
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name](args[0])
    raise TypeError(f"not an expression node: {node!r}")


def _pow(a, b, node):
    # 0^0 = 1 (numpy convention); 0^negative and negative^fractional rejected
    if np.any((a == 0) & (b < 0)):
        _fail("division by zero", node)
    if np.any((a < 0) & (b != np.floor(b))):
        _fail("fractional power of a negative number", node)
    return np.power(a, b)


def free_variables(e):
    """Names of the variables actually referenced in ``e``."""
    found = set()
    stack = [e.root if isinstance(e, Expr) else e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return found


def evaluate(e, bindings):
    """Evaluate ``e``; bindings may be floats or same-shaped numpy arrays."""
    missing = free_variables(e) - set(bindings)
    if missing:
        raise KeyError(f"unbound variable(s): {sorted(missing)}")
    env = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    with np.errstate(over="ignore", invalid="ignore"):
        out = _eval(e.root, env)
    shape = np.broadcast_shapes(np.shape(out), *(np.shape(v) for v in env.values()))
    if shape == ():
        return float(out)
    return np.broadcast_to(out, shape).astype(float)
