"""Model definition: parsing and evaluation of sd-DDE systems.

A model is ``n`` coupled equations with ``m`` delay slots. Slot 1 always
carries delay 0; the delay of slot j may depend on parameters and on state
values at slots k < j only, so delays evaluate left to right. Right-hand
sides and delays are arithmetic expressions over parameters and state
references ``x<i>@<j>`` (component i at slot j, both 1-based).

Model file format (UTF-8, line oriented, ``key = value``)::

    name = "scalar_nested"
    dim = 1
    parameters = ["p"]
    tau_max = 10            # optional
    delays = ["0", "-x1@1"]
    rhs = ["p - x1@2"]
"""

import ast
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DelayRangeError, ModelError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tan", "atan")

_TAU_MAX_MARGIN = 1.25  # auto tau_max = margin * max frozen delay


# ---------------------------------------------------------------------------
# expression AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    name: str
    index: int


@dataclass(frozen=True)
class State:
    comp: int  # 1-based component
    slot: int  # 1-based delay slot


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Pow:
    base: object
    power: int


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()@]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ModelError(f"unexpected character {text[pos:].strip()[0]!r}", col=pos + 1)
            break
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


_STATE_IDENT_RE = re.compile(r"^x(\d+)$")
_INT_RE = re.compile(r"^\d+$")


class _Parser:
    """Recursive descent over the published grammar."""

    def __init__(self, text, param_index):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.param_index = param_index

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, col = self.next()
        if kind != "op" or val != op:
            raise ModelError(f"expected {op!r}, found {val or 'end of input'!r}", col=col)

    def parse(self):
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ModelError(f"unexpected trailing input {val!r}", col=col)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = Bin(val, node, self.factor())
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        negate = False
        if kind == "op" and val == "-":
            self.next()
            negate = True
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            node = Pow(node, self.integer())
        if negate:
            node = Neg(node)
        return node

    def integer(self):
        sign = 1
        kind, val, col = self.next()
        if kind == "op" and val == "-":
            sign = -1
            kind, val, col = self.next()
        if kind != "num" or not _INT_RE.match(val):
            raise ModelError(f"exponent must be an integer literal, found {val!r}", col=col)
        return sign * int(val)

    def base(self):
        kind, val, col = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "@":
                m = _STATE_IDENT_RE.match(val)
                if not m:
                    raise ModelError(
                        f"state reference must look like x<i>@<j>, found {val!r}@", col=col
                    )
                self.next()
                sk, sv, scol = self.next()
                if sk != "num" or not _INT_RE.match(sv):
                    raise ModelError("delay slot index must be an integer", col=scol)
                return State(int(m.group(1)), int(sv))
            if val in FUNCTIONS:
                self.expect_op("(")
                node = self.expr()
                self.expect_op(")")
                return Call(val, node)
            if val in self.param_index:
                return Param(val, self.param_index[val])
            raise ModelError(f"unknown identifier {val!r}", col=col)
        raise ModelError(f"unexpected token {val or 'end of input'!r}", col=col)


def parse_expr(text, param_names, n, m, max_slot=None, where=""):
    """Parse one expression and validate its state references.

    max_slot limits the highest slot a state reference may use (delay
    expressions see only earlier slots).
    """
    param_index = {name: k for k, name in enumerate(param_names)}
    try:
        node = _Parser(text, param_index).parse()
    except ModelError as err:
        raise ModelError(f"{where}{err}") from None
    limit = m if max_slot is None else max_slot
    for ref in _walk(node):
        if isinstance(ref, State):
            if not (1 <= ref.comp <= n):
                raise ModelError(f"{where}unknown component x{ref.comp} (dim is {n})")
            if ref.slot < 1 or ref.slot > m:
                raise ModelError(f"{where}unknown delay slot in x{ref.comp}@{ref.slot} (m is {m})")
            if ref.slot > limit:
                raise ModelError(
                    f"{where}forward delay reference x{ref.comp}@{ref.slot}: "
                    f"only slots 1..{limit} are available here"
                )
    return node


def _walk(node):
    yield node
    for field in getattr(node, "__dataclass_fields__", ()):
        child = getattr(node, field)
        if hasattr(child, "__dataclass_fields__"):
            yield from _walk(child)


# ---------------------------------------------------------------------------
# pretty printer (round-trip: parse(to_text(e)) == e)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(node):
    return _render(node, 0)


def _render(node, parent_prec):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Param):
        return node.name
    if isinstance(node, State):
        return f"x{node.comp}@{node.slot}"
    if isinstance(node, Call):
        return f"{node.func}({_render(node.arg, 0)})"
    if isinstance(node, Neg):
        inner = _render(node.arg, 4)
        text = f"-{inner}"
        return f"({text})" if parent_prec >= 3 else text
    if isinstance(node, Pow):
        # grammar: the base of ^ must be atomic or parenthesized
        if isinstance(node.base, (Num, Param, State, Call)):
            base = _render(node.base, 0)
        else:
            base = f"({_render(node.base, 0)})"
        return f"{base}^{node.power}"
    if isinstance(node, Bin):
        prec = _PREC[node.op]
        left = _render(node.left, prec - 1)
        right = _render(node.right, prec)  # reparse is left-associative
        text = f"{left} {node.op} {right}"
        return f"({text})" if parent_prec >= prec else text
    raise ModelError(f"cannot render node {node!r}")


# ---------------------------------------------------------------------------
# compilation to python callables

_FUNC_SRC = {name: f"math.{name}" for name in FUNCTIONS}


def _emit(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Param):
        return f"P[{node.index}]"
    if isinstance(node, State):
        return f"X[{node.comp - 1}][{node.slot - 1}]"
    if isinstance(node, Neg):
        return f"(-{_emit(node.arg)})"
    if isinstance(node, Pow):
        return f"({_emit(node.base)})**({node.power})"
    if isinstance(node, Bin):
        return f"({_emit(node.left)} {node.op} {_emit(node.right)})"
    if isinstance(node, Call):
        return f"{_FUNC_SRC[node.func]}({_emit(node.arg)})"
    raise ModelError(f"cannot compile node {node!r}")


def compile_expr(node):
    src = f"lambda X, P: {_emit(node)}"
    return eval(src, {"math": math})  # generated from the validated AST only


# ---------------------------------------------------------------------------
# model


def as_history(u, dim):
    """Normalize a history argument to a callable theta -> float vector."""
    if callable(u) and not hasattr(u, "eval_real"):
        return u
    if hasattr(u, "eval_real"):
        return u.eval_real
    const = np.atleast_1d(np.asarray(u, dtype=float))
    if const.shape != (dim,):
        raise ModelError(f"constant history has shape {const.shape}, expected ({dim},)")
    return lambda theta: const


class Model:
    """Parsed, validated sd-DDE definition with compiled evaluators."""

    def __init__(self, name, n, param_names, delay_exprs, rhs_exprs, tau_max=None):
        self.name = name
        self.n = n
        self.m = len(delay_exprs)
        self.param_names = tuple(param_names)
        self.n_p = len(self.param_names)
        self.delay_exprs = tuple(delay_exprs)
        self.rhs_exprs = tuple(rhs_exprs)
        self.declared_tau_max = tau_max
        if len(rhs_exprs) != n:
            raise ModelError(f"dim is {n} but rhs has {len(rhs_exprs)} expressions")
        if self.m < 1:
            raise ModelError("at least one delay slot (the literal 0) is required")
        first = delay_exprs[0]
        if not (isinstance(first, Num) and first.value == 0.0):
            raise ModelError("delay slot 1 must be the literal 0")
        if tau_max is not None and tau_max <= 0:
            raise ModelError("tau_max must be positive")
        self._delay_fns = tuple(compile_expr(e) for e in delay_exprs)
        self._rhs_fns = tuple(compile_expr(e) for e in rhs_exprs)

    # -- raw coefficient evaluation ------------------------------------

    def eval_rhs(self, xmat, params):
        """f(x^1..x^m, p) for an (n, m) slot matrix."""
        return np.array([fn(xmat, params) for fn in self._rhs_fns], dtype=float)

    def eval_delay(self, j, xmat, params):
        """Delay of slot j (1-based)."""
        return float(self._delay_fns[j - 1](xmat, params))

    # -- functional ------------------------------------------------------

    def eval_functional(self, params, u, tau_max=None):
        """F(u) = f(u^1, ..., u^m, p) with u^j = u(-tau^j(u^1..u^{j-1}, p)).

        Delays are evaluated left to right and checked against
        [0, tau_max]; tau_max=None resolves via :meth:`resolve_tau_max`
        at the base point u(0).
        """
        params = np.asarray(params, dtype=float)
        hist = as_history(u, self.n)
        x0 = np.asarray(hist(0.0), dtype=float)
        if tau_max is None:
            tau_max = self.resolve_tau_max(params, x0)
        X = np.full((self.n, self.m), np.nan)
        X[:, 0] = x0
        for j in range(2, self.m + 1):
            tau = self._checked_delay(j, X, params, tau_max)
            X[:, j - 1] = hist(-tau)
        return self.eval_rhs(X, params)

    def _checked_delay(self, j, xmat, params, tau_max):
        tau = self.eval_delay(j, xmat, params)
        if tau < -1e-12 or tau > tau_max + 1e-12:
            raise DelayRangeError(j, tau, tau_max)
        return min(max(tau, 0.0), tau_max)

    # -- equilibrium helpers ----------------------------------------------

    def equilibrium_residual(self, params, x):
        """f(x, ..., x, p): zero exactly at equilibria."""
        params = np.asarray(params, dtype=float)
        x = np.asarray(x, dtype=float)
        X = np.tile(x[:, None], (1, self.m))
        return self.eval_rhs(X, params)

    def frozen_delays(self, params, x, tau_max=None):
        """All delays evaluated with every slot frozen at x."""
        params = np.asarray(params, dtype=float)
        x = np.asarray(x, dtype=float)
        X = np.tile(x[:, None], (1, self.m))
        if tau_max is None:
            tau_max = self.resolve_tau_max(params, x)
        return np.array(
            [0.0] + [self._checked_delay(j, X, params, tau_max) for j in range(2, self.m + 1)]
        )

    def resolve_tau_max(self, params, x):
        """Declared tau_max, else a margin over the max frozen delay at x."""
        if self.declared_tau_max is not None:
            return self.declared_tau_max
        params = np.asarray(params, dtype=float)
        x = np.asarray(x, dtype=float)
        X = np.tile(x[:, None], (1, self.m))
        taus = [self.eval_delay(j, X, params) for j in range(2, self.m + 1)]
        for j, tau in enumerate(taus, start=2):
            if tau < -1e-12:
                raise DelayRangeError(j, tau, float("inf"))
        top = max(taus, default=0.0)
        return _TAU_MAX_MARGIN * top if top > 0 else 1.0

    def params_from(self, assignments):
        """Build the parameter vector from a {name: value} mapping."""
        missing = [p for p in self.param_names if p not in assignments]
        if missing:
            raise ModelError(f"parameter(s) not assigned: {', '.join(missing)}")
        unknown = [k for k in assignments if k not in self.param_names]
        if unknown:
            raise ModelError(f"unknown parameter(s): {', '.join(unknown)}")
        return np.array([float(assignments[p]) for p in self.param_names])

    def __repr__(self):
        return f"Model({self.name!r}, n={self.n}, m={self.m}, params={self.param_names})"


# ---------------------------------------------------------------------------
# model file parsing

_KEYS = {"name", "dim", "parameters", "tau_max", "delays", "rhs"}


def parse_model(text):
    """Parse a model file (string) into a validated :class:`Model`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        if "=" not in line:
            raise ModelError("expected key = value", line=lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ModelError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ModelError(f"duplicate key {key!r}", line=lineno)
        try:
            values[key] = (ast.literal_eval(rhs.strip()), lineno)
        except (ValueError, SyntaxError):
            raise ModelError(f"cannot parse value for {key!r}", line=lineno) from None

    def take(key, required=True, default=None):
        if key not in values:
            if required:
                raise ModelError(f"missing required key {key!r}")
            return default, None
        return values[key]

    name, _ = take("name", required=False, default="model")
    dim, dline = take("dim")
    params, _ = take("parameters", required=False, default=[])
    tau_max, tline = take("tau_max", required=False)
    delays, delline = take("delays")
    rhs, rline = take("rhs")

    if not isinstance(dim, int) or dim < 1:
        raise ModelError("dim must be a positive integer", line=dline)
    if not isinstance(params, list) or not all(isinstance(p, str) for p in params):
        raise ModelError("parameters must be a list of identifiers")
    if len(set(params)) != len(params):
        raise ModelError("duplicate parameter names")
    for p in params:
        if p in FUNCTIONS or _STATE_IDENT_RE.match(p):
            raise ModelError(f"parameter name {p!r} collides with reserved syntax")
    if tau_max is not None and not isinstance(tau_max, (int, float)):
        raise ModelError("tau_max must be a number", line=tline)
    if not isinstance(delays, list) or not all(isinstance(d, str) for d in delays):
        raise ModelError("delays must be a list of expression strings", line=delline)
    if not isinstance(rhs, list) or not all(isinstance(r, str) for r in rhs):
        raise ModelError("rhs must be a list of expression strings", line=rline)
    if len(rhs) != dim:
        raise ModelError(f"dim is {dim} but rhs has {len(rhs)} expressions", line=rline)

    m = len(delays)
    delay_exprs = [
        parse_expr(src, params, dim, m, max_slot=j - 1, where=f"delays[{j}]: ")
        for j, src in enumerate(delays, start=1)
    ]
    rhs_exprs = [
        parse_expr(src, params, dim, m, where=f"rhs[{i}]: ")
        for i, src in enumerate(rhs, start=1)
    ]
    return Model(
        name,
        dim,
        params,
        delay_exprs,
        rhs_exprs,
        tau_max=None if tau_max is None else float(tau_max),
    )


def load_model(path):
    """Read and parse a model file from disk."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ModelError(f"cannot open model file {path}: {err.strerror}") from None
    return parse_model(text)


def _strip_comment(line):
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)
