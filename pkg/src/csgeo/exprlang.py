"""A small expression language for parametric immersions z(u, v) in C^3.

Components are closed-form complex expressions in the real variables ``u``
and ``v``.  Evaluation returns exact second-order jets through forward-mode
jet arithmetic, so downstream geometry sees derivatives that are accurate
to roundoff.

Grammar (whitespace-insensitive)::

    tuple  := '(' expr ',' expr ',' expr ')'
    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``i`` is the imaginary unit and ``pi`` the constant; every other name must be
``u``, ``v`` or a declared parameter.
"""

from __future__ import annotations

import cmath
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Union

import numpy as np

from .errors import DomainError, ParseError, SpecError, UnknownIdentifier

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt", "conj", "re", "im")
RESERVED = frozenset({"u", "v", "i", "pi", *FUNCTIONS})
SPEC_KEYS = frozenset({"components", "params"})

# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Sym, Neg, Bin, Call]


@dataclass(frozen=True)
class SurfaceAST:
    """Three component expressions plus named real parameters."""

    components: tuple[Node, Node, Node]
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if len(self.components) != 3:
            raise SpecError(f"a surface needs 3 components, got {len(self.components)}")
        names = [n for n, _ in self.params]
        _check_param_names(names)
        declared = set(names)
        for comp in self.components:
            for name in free_symbols(comp):
                if name not in {"u", "v", "i", "pi"} and name not in declared:
                    raise UnknownIdentifier(name, 0)

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    def to_source(self) -> str:
        return "(" + ", ".join(to_source(c) for c in self.components) + ")"

    def to_json(self) -> dict[str, Any]:
        return {
            "components": [to_source(c) for c in self.components],
            "params": {k: float(x) for k, x in self.params},
        }

    def jet(self, u, v) -> "Jet2":
        return eval_jet2(self, u, v)


def free_symbols(node: Node) -> set[str]:
    if isinstance(node, Sym):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_symbols(node.operand)
    if isinstance(node, Call):
        return free_symbols(node.arg)
    return free_symbols(node.left) | free_symbols(node.right)


def _check_param_names(names: Iterable[str]) -> None:
    seen = set()
    for name in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise SpecError(f"invalid parameter name {name!r}")
        if name in RESERVED:
            raise SpecError(f"parameter name {name!r} is reserved")
        if name in seen:
            raise SpecError(f"duplicate parameter {name!r}")
        seen.add(name)


# --------------------------------------------------------------------------
# Lexer and parser
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, eof
    text: str
    pos: int  # character index


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            tokens.append(_Token(kind, "^" if tok == "**" else tok, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


_CONTINUATION = frozenset({"+", "-", "*", "/", "^"})
_ATOM_START = frozenset({"number", "identifier", "(", "-", "+"})


class _Parser:
    def __init__(self, text: str, params: Iterable[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0
        self.params = frozenset(params)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.k]

    def error(self, expected: Iterable[str], message: str | None = None):
        tok = self.tok
        if message is None:
            message = "unexpected end of input" if tok.kind == "eof" else f"unexpected token {tok.text!r}"
        raise ParseError(message, _byte_offset(self.text, tok.pos), frozenset(expected))

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.k += 1
            return True
        return False

    def expect(self, op: str, also: Iterable[str] = ()):
        if not self.accept(op):
            self.error({op, *also})

    def end(self, also: Iterable[str] = ()):
        if self.tok.kind != "eof":
            self.error({"end of input", *also})

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.k += 1
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.k += 1
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.k += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.k += 1
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")", _CONTINUATION)
                return Call(tok.text, arg)
            if tok.text in {"u", "v", "i", "pi"} or tok.text in self.params:
                return Sym(tok.text)
            raise UnknownIdentifier(tok.text, _byte_offset(self.text, tok.pos))
        if self.accept("("):
            node = self.expr()
            self.expect(")", _CONTINUATION)
            return node
        self.error(_ATOM_START)


def parse_expression(text: str, params: Iterable[str] = ()) -> Node:
    """Parse a single component expression."""
    p = _Parser(text, params)
    node = p.expr()
    p.end(_CONTINUATION)
    return node


def parse_surface_spec(text: str, params: Mapping[str, float] | None = None) -> SurfaceAST:
    """Parse a parenthesised triple ``(z1, z2, z3)`` into a :class:`SurfaceAST`."""
    params = dict(params or {})
    _check_param_names(params)
    p = _Parser(text, params)
    p.expect("(")
    comps = [p.expr()]
    for _ in range(2):
        p.expect(",", _CONTINUATION)
        comps.append(p.expr())
    p.expect(")", _CONTINUATION)
    p.end()
    return SurfaceAST(tuple(comps), tuple((k, float(x)) for k, x in params.items()))


def surface_from_components(components: Iterable[str], params: Mapping[str, float] | None = None) -> SurfaceAST:
    params = dict(params or {})
    _check_param_names(params)
    comps = tuple(parse_expression(c, params) for c in components)
    if len(comps) != 3:
        raise SpecError(f"a surface needs 3 components, got {len(comps)}")
    return SurfaceAST(comps, tuple((k, float(x)) for k, x in params.items()))


def load_surface_spec(source: str | Path | Mapping[str, Any]) -> SurfaceAST:
    """Load the JSON surface document ``{"components": [...], "params": {...}}``.

    ``source`` may be a path, a JSON string or an already decoded mapping.
    """
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source) if not isinstance(source, str) or not source.lstrip().startswith("{") else None
        raw = path.read_text(encoding="utf-8") if path is not None else source
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise SpecError("surface spec must be a JSON object")
    extra = set(doc) - SPEC_KEYS
    if extra:
        raise SpecError(f"unknown keys in surface spec: {sorted(extra)}")
    comps = doc.get("components")
    if not isinstance(comps, list) or len(comps) != 3 or not all(isinstance(c, str) for c in comps):
        raise SpecError("'components' must be a list of 3 strings")
    params = doc.get("params", {})
    if not isinstance(params, Mapping):
        raise SpecError("'params' must be an object")
    for k, x in params.items():
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise SpecError(f"parameter {k!r} must be a finite number")
    return surface_from_components(comps, params)


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt_num(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def to_source(node: Node) -> str:
    """Serialise with the minimum parentheses that preserve the tree shape."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (f"({inner})" if _prec(node.operand) < 3 else inner)
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


# --------------------------------------------------------------------------
# Jet evaluation
# --------------------------------------------------------------------------


class _Jet:
    """Value and partials up to order two in (u, v); entries broadcast."""

    __slots__ = ("f", "fu", "fv", "fuu", "fuv", "fvv")

    def __init__(self, f, fu=0.0, fv=0.0, fuu=0.0, fuv=0.0, fvv=0.0):
        self.f, self.fu, self.fv = f, fu, fv
        self.fuu, self.fuv, self.fvv = fuu, fuv, fvv

    def __add__(self, o: "_Jet") -> "_Jet":
        return _Jet(self.f + o.f, self.fu + o.fu, self.fv + o.fv,
                    self.fuu + o.fuu, self.fuv + o.fuv, self.fvv + o.fvv)

    def __sub__(self, o: "_Jet") -> "_Jet":
        return _Jet(self.f - o.f, self.fu - o.fu, self.fv - o.fv,
                    self.fuu - o.fuu, self.fuv - o.fuv, self.fvv - o.fvv)

    def __neg__(self) -> "_Jet":
        return _Jet(-self.f, -self.fu, -self.fv, -self.fuu, -self.fuv, -self.fvv)

    def __mul__(self, o: "_Jet") -> "_Jet":
        a, b = self, o
        return _Jet(
            a.f * b.f,
            a.fu * b.f + a.f * b.fu,
            a.fv * b.f + a.f * b.fv,
            a.fuu * b.f + 2 * a.fu * b.fu + a.f * b.fuu,
            a.fuv * b.f + a.fu * b.fv + a.fv * b.fu + a.f * b.fuv,
            a.fvv * b.f + 2 * a.fv * b.fv + a.f * b.fvv,
        )

    def chain(self, d0, d1, d2) -> "_Jet":
        """Compose with a scalar function g given g, g', g'' at self.f."""
        return _Jet(
            d0,
            d1 * self.fu,
            d1 * self.fv,
            d2 * self.fu * self.fu + d1 * self.fuu,
            d2 * self.fu * self.fv + d1 * self.fuv,
            d2 * self.fv * self.fv + d1 * self.fvv,
        )

    def linear(self, fn) -> "_Jet":
        return _Jet(*(fn(x) for x in (self.f, self.fu, self.fv, self.fuu, self.fuv, self.fvv)))


def _real_nonpositive(x) -> bool:
    x = np.asarray(x)
    bad = (np.abs(x.imag) <= 1e-14 * np.maximum(np.abs(x), 1.0)) & (x.real <= 0)
    return bool(np.any(bad))


def _reciprocal(g: _Jet) -> _Jet:
    if np.any(np.asarray(g.f) == 0):
        raise DomainError("division by zero at the evaluation point")
    r = 1.0 / g.f
    return g.chain(r, -r * r, 2 * r * r * r)


def _call(func: str, x: _Jet) -> _Jet:
    f = x.f
    if func == "exp":
        e = np.exp(f)
        return x.chain(e, e, e)
    if func == "sin":
        s, c = np.sin(f), np.cos(f)
        return x.chain(s, c, -s)
    if func == "cos":
        s, c = np.sin(f), np.cos(f)
        return x.chain(c, -s, -c)
    if func == "tan":
        t = np.tan(f)
        sec2 = 1 + t * t
        return x.chain(t, sec2, 2 * t * sec2)
    if func == "sinh":
        s, c = np.sinh(f), np.cosh(f)
        return x.chain(s, c, s)
    if func == "cosh":
        s, c = np.sinh(f), np.cosh(f)
        return x.chain(c, s, c)
    if func == "sqrt":
        if _real_nonpositive(f):
            raise DomainError("sqrt of a non-positive real subexpression")
        s = np.sqrt(f + 0j)
        return x.chain(s, 0.5 / s, -0.25 / (s * s * s))
    if func == "log":
        if _real_nonpositive(f):
            raise DomainError("log of a non-positive real subexpression")
        r = 1.0 / f
        return x.chain(np.log(f + 0j), r, -r * r)
    if func == "conj":
        return x.linear(np.conj)
    if func == "re":
        return x.linear(np.real)
    if func == "im":
        return x.linear(np.imag)
    raise SpecError(f"unknown function {func!r}")


def _is_constant(node: Node) -> bool:
    return not (free_symbols(node) & {"u", "v"})


def _power(base: _Jet, expo_node: Node, expo: _Jet) -> _Jet:
    if _is_constant(expo_node):
        p = complex(np.asarray(expo.f).ravel()[0]) if np.ndim(expo.f) else complex(expo.f)
        f = base.f
        if p.imag == 0 and float(p.real).is_integer():
            n = int(p.real)
            if n == 0:
                return _Jet(np.ones_like(f) if np.ndim(f) else 1.0 + 0j)
            if n < 0 and np.any(np.asarray(f) == 0):
                raise DomainError("negative power of zero")
            return base.chain(f ** n, n * f ** (n - 1), n * (n - 1) * f ** (n - 2) if n != 1 else 0.0)
        if _real_nonpositive(f):
            raise DomainError("fractional power of a non-positive real subexpression")
        f = f + 0j
        return base.chain(f ** p, p * f ** (p - 1), p * (p - 1) * f ** (p - 2))
    return _call("exp", expo * _call("log", base))


def _jet_eval(node: Node, env: Mapping[str, _Jet]) -> _Jet:
    if isinstance(node, Num):
        return _Jet(node.value)
    if isinstance(node, Sym):
        return env[node.name]
    if isinstance(node, Neg):
        return -_jet_eval(node.operand, env)
    if isinstance(node, Call):
        return _call(node.func, _jet_eval(node.arg, env))
    left = _jet_eval(node.left, env)
    right = _jet_eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        return left * _reciprocal(right)
    return _power(left, node.right, right)


@dataclass(frozen=True)
class Jet2:
    """Exact 2-jet of a C^3-valued map; every field has shape ``(..., 3)``."""

    z: np.ndarray
    z_u: np.ndarray
    z_v: np.ndarray
    z_uu: np.ndarray
    z_uv: np.ndarray
    z_vv: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.z.shape[:-1]

    def take(self, index) -> "Jet2":
        return Jet2(*(getattr(self, k)[index] for k in _JET_FIELDS))


_JET_FIELDS = ("z", "z_u", "z_v", "z_uu", "z_uv", "z_vv")


def eval_jet2(ast: SurfaceAST, u, v) -> Jet2:
    """Evaluate the exact 2-jet of ``ast`` at (u, v); arrays broadcast."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(u.shape, v.shape)
    env: dict[str, _Jet] = {
        "u": _Jet(u + 0j, 1.0),
        "v": _Jet(v + 0j, 0.0, 1.0),
        "i": _Jet(1j),
        "pi": _Jet(math.pi),
    }
    for name, value in ast.params:
        env[name] = _Jet(value)
    jets = [_jet_eval(c, env) for c in ast.components]
    fields = []
    for attr in ("f", "fu", "fv", "fuu", "fuv", "fvv"):
        cols = [np.broadcast_to(np.asarray(getattr(j, attr), dtype=complex), shape) for j in jets]
        fields.append(np.stack(cols, axis=-1))
    for arr in fields:
        if not np.all(np.isfinite(arr)):
            raise DomainError("non-finite value in surface jet")
    return Jet2(*fields)


# --------------------------------------------------------------------------
# Scalar evaluation (independent oracle path; supports mpmath)
# --------------------------------------------------------------------------


def _backend_ops(backend: str) -> tuple[dict[str, Callable], Callable, Any]:
    if backend == "cmath":
        ops = {
            "exp": cmath.exp, "log": cmath.log, "sin": cmath.sin, "cos": cmath.cos,
            "tan": cmath.tan, "sinh": cmath.sinh, "cosh": cmath.cosh, "sqrt": cmath.sqrt,
            "conj": lambda x: complex(x).conjugate(), "re": lambda x: complex(complex(x).real),
            "im": lambda x: complex(complex(x).imag),
        }
        return ops, complex, math.pi
    if backend == "mpmath":
        import mpmath

        ops = {
            "exp": mpmath.exp, "log": mpmath.log, "sin": mpmath.sin, "cos": mpmath.cos,
            "tan": mpmath.tan, "sinh": mpmath.sinh, "cosh": mpmath.cosh, "sqrt": mpmath.sqrt,
            "conj": mpmath.conj, "re": lambda x: mpmath.mpc(mpmath.re(x)),
            "im": lambda x: mpmath.mpc(mpmath.im(x)),
        }
        return ops, mpmath.mpc, mpmath.pi
    raise ValueError(f"unknown backend {backend!r}")


def eval_value(ast: SurfaceAST, u, v, backend: str = "cmath") -> tuple:
    """Plain (jet-free) evaluation of the three components at one point."""
    ops, num, pi = _backend_ops(backend)
    env = {"u": num(u), "v": num(v), "i": num(0, 1) if backend == "mpmath" else 1j, "pi": num(pi)}
    for name, value in ast.params:
        env[name] = num(value)

    def ev(node: Node):
        if isinstance(node, Num):
            return num(node.value)
        if isinstance(node, Sym):
            return env[node.name]
        if isinstance(node, Neg):
            return -ev(node.operand)
        if isinstance(node, Call):
            return ops[node.func](ev(node.arg))
        a, b = ev(node.left), ev(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0:
                raise DomainError("division by zero at the evaluation point")
            return a / b
        return a ** b

    return tuple(ev(c) for c in ast.components)
