"""Scalar expression trees: parsing, printing, evaluation and symbolic derivatives.

Grammar (whitespace insignificant)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom ('^' exponent)*          # left-associative
    exponent := ('-' | '+') exponent | atom
    atom     := NUMBER | 'pi' | NAME '(' expr ')' | NAME | '(' expr ')'

A minus sign directly in front of a numeric literal that is not itself raised
to a power folds into a negative constant, so that the fully parenthesized
printer output re-parses to the identical tree.
"""

from __future__ import annotations

import math
import re
import threading
import weakref
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "Expression",
    "ExpressionError",
    "ParseError",
    "UnknownFunctionError",
    "UnboundVariableError",
    "DomainError",
    "FUNCTIONS",
    "BINARY_OPS",
    "const",
    "var",
    "func",
    "parse",
    "evaluate",
    "differentiate",
    "substitute",
    "free_variables",
    "to_string",
    "compile_expressions",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "arctan")
BINARY_OPS = ("+", "-", "*", "/", "^")


class ExpressionError(Exception):
    pass


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownFunctionError(ParseError):
    pass


class UnboundVariableError(ExpressionError, KeyError):
    def __str__(self):
        return f"unbound variable {self.args[0]!r}"


class DomainError(ExpressionError, ArithmeticError):
    pass


class Expression:
    """Immutable expression node.

    ``kind`` is one of ``"const"``, ``"var"``, ``"func"`` (unary: the names in
    FUNCTIONS plus ``"neg"`` for unary minus) or ``"binop"``.
    Nodes are hash-consed: structurally equal trees are the same object, so
    equality is identity and memoized passes see a compact DAG.
    """

    __slots__ = ("kind", "op", "children", "name", "value", "_hash", "__weakref__")
    _table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()
    _lock = threading.Lock()

    def __new__(cls, kind, op=None, children=(), name=None, value=None):
        children = tuple(children)
        vkey = None if value is None else (value, math.copysign(1.0, value))
        key = (kind, op, name, vkey, tuple(id(c) for c in children))
        with cls._lock:
            node = cls._table.get(key)
            if node is not None:
                return node
            node = object.__new__(cls)
            object.__setattr__(node, "kind", kind)
            object.__setattr__(node, "op", op)
            object.__setattr__(node, "children", children)
            object.__setattr__(node, "name", name)
            object.__setattr__(node, "value", value)
            object.__setattr__(
                node, "_hash", hash((kind, op, name, vkey, tuple(c._hash for c in children)))
            )
            cls._table[key] = node
            return node

    def __reduce__(self):
        return (Expression, (self.kind, self.op, self.children, self.name, self.value))

    def __setattr__(self, key, value):
        raise AttributeError("Expression is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __repr__(self):
        return f"Expression({to_string(self)!r})"

    def __str__(self):
        return to_string(self)

    # arithmetic sugar; routes through the folding constructors
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)

    @property
    def is_const(self):
        return self.kind == "const"


def _lift(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float)):
        return const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def const(value: float) -> Expression:
    return Expression("const", value=float(value))


def var(name: str) -> Expression:
    if not name:
        raise ValueError("variable name must be nonempty")
    return Expression("var", name=name)


def func(name: str, arg: Expression) -> Expression:
    """Raw unary node (no folding). ``name`` may also be ``"neg"``."""
    if name not in FUNCTIONS and name != "neg":
        raise ValueError(f"unknown function {name!r}")
    return Expression("func", op=name, children=(arg,))


def binop(op: str, a: Expression, b: Expression) -> Expression:
    if op not in BINARY_OPS:
        raise ValueError(f"unknown operator {op!r}")
    return Expression("binop", op=op, children=(a, b))


ZERO = const(0.0)
ONE = const(1.0)


# ---------------------------------------------------------------- arithmetic


def _checked(x: float) -> float:
    if not math.isfinite(x):
        raise DomainError("non-finite result")
    return x


def _div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return _checked(a / b)


def _pow(a, b):
    try:
        return _checked(math.pow(a, b))
    except (ValueError, OverflowError) as exc:
        raise DomainError(f"invalid power {a!r}^{b!r}") from exc


def _ln(x):
    if x <= 0.0:
        raise DomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x):
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError(f"exp overflow at {x!r}") from exc


def _tan(x):
    return _checked(math.tan(x))


_UNARY_IMPL: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": _tan,
    "exp": _exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "arctan": math.atan,
    "neg": lambda x: -x,
}

_BINARY_IMPL: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: _checked(a + b),
    "-": lambda a, b: _checked(a - b),
    "*": lambda a, b: _checked(a * b),
    "/": _div,
    "^": _pow,
}


# ------------------------------------------------------ folding constructors


def neg(a: Expression) -> Expression:
    a = _lift(a)
    if a.is_const:
        return const(-a.value)
    if a.kind == "func" and a.op == "neg":
        return a.children[0]
    return func("neg", a)


def add(a: Expression, b: Expression) -> Expression:
    a, b = _lift(a), _lift(b)
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if a.is_const and a.value == 0.0:
        return b
    if b.is_const and b.value == 0.0:
        return a
    if b.kind == "func" and b.op == "neg":
        return sub(a, b.children[0])
    return binop("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    a, b = _lift(a), _lift(b)
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if b.is_const and b.value == 0.0:
        return a
    if a.is_const and a.value == 0.0:
        return neg(b)
    if a is b:
        return ZERO
    if b.kind == "func" and b.op == "neg":
        return add(a, b.children[0])
    return binop("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    a, b = _lift(a), _lift(b)
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    for x, y in ((a, b), (b, a)):
        if x.is_const:
            if x.value == 0.0:
                return ZERO
            if x.value == 1.0:
                return y
            if x.value == -1.0:
                return neg(y)
            if y.kind == "binop" and y.op == "*" and y.children[0].is_const:
                return mul(const(x.value * y.children[0].value), y.children[1])
            if y.kind == "func" and y.op == "neg":
                return mul(const(-x.value), y.children[0])
    if a.kind == "func" and a.op == "neg":
        return neg(mul(a.children[0], b))
    if b.kind == "func" and b.op == "neg":
        return neg(mul(a, b.children[0]))
    if b.is_const:
        return mul(b, a)
    return binop("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    a, b = _lift(a), _lift(b)
    if b.is_const and b.value == 0.0:
        return binop("/", a, b)
    if a.is_const and a.value == 0.0:
        return ZERO
    if b.is_const and b.value == 1.0:
        return a
    if a.is_const and b.is_const:
        return const(a.value / b.value)
    return binop("/", a, b)


def power(a: Expression, b: Expression) -> Expression:
    a, b = _lift(a), _lift(b)
    if b.is_const:
        if b.value == 0.0:
            return ONE
        if b.value == 1.0:
            return a
        if a.is_const:
            try:
                return const(_pow(a.value, b.value))
            except DomainError:
                pass
    return binop("^", a, b)


def apply(name: str, a: Expression) -> Expression:
    """Folding unary constructor."""
    a = _lift(a)
    if name == "neg":
        return neg(a)
    if a.is_const:
        try:
            return const(_UNARY_IMPL[name](a.value))
        except DomainError:
            pass
    return func(name, a)


def sin(a):
    return apply("sin", _lift(a))


def cos(a):
    return apply("cos", _lift(a))


def tan(a):
    return apply("tan", _lift(a))


def exp(a):
    return apply("exp", _lift(a))


def ln(a):
    return apply("ln", _lift(a))


def sqrt(a):
    return apply("sqrt", _lift(a))


def arctan(a):
    return apply("arctan", _lift(a))


# ------------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.peek()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos)
        return self.take()

    def parse(self) -> Expression:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = binop(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = binop(op, left, self.unary())
        return left

    def _signed(self, operand):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            nxt, nxt2 = self.peek(), self.peek(1)
            if text == "-" and nxt[0] == "num" and nxt2[1] != "^":
                self.take()
                return const(-float(nxt[1]))
            inner = self._signed(operand)
            return func("neg", inner) if text == "-" else inner
        return operand()

    def unary(self):
        return self._signed(self.power)

    def power(self):
        left = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            left = binop("^", left, self._signed(self.atom))
        return left

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.take()
            return const(float(text))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            if text in FUNCTIONS:
                raise ParseError(f"function {text!r} used without argument", pos)
            if text == "pi":
                return const(math.pi)
            return var(text)
        if kind == "op" and text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", pos)


def parse(text: str) -> Expression:
    """Parse infix text into an Expression; raises ParseError with an offset."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text).parse()


# ------------------------------------------------------------------ printing


def to_string(e: Expression) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    memo: dict[int, str] = {}

    def rec(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if node.kind == "const":
            s = repr(node.value)
            if node.value < 0 or s.startswith("-"):
                s = f"({s})"
        elif node.kind == "var":
            s = node.name
        elif node.kind == "func":
            arg = rec(node.children[0])
            if node.op == "neg":
                if node.children[0].kind == "const" and not arg.startswith("("):
                    arg = f"({arg})"
                s = f"(-{arg})"
            else:
                s = f"{node.op}({arg})"
        else:
            a, b = (rec(c) for c in node.children)
            s = f"({a} {node.op} {b})"
        memo[key] = s
        return s

    return rec(e)


# ---------------------------------------------------------------- evaluation


def evaluate(e: Expression, bindings: Mapping[str, float] | None = None) -> float:
    bindings = bindings or {}
    memo: dict[int, float] = {}

    def rec(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if node.kind == "const":
            v = node.value
        elif node.kind == "var":
            try:
                v = float(bindings[node.name])
            except KeyError:
                raise UnboundVariableError(node.name) from None
        elif node.kind == "func":
            v = _UNARY_IMPL[node.op](rec(node.children[0]))
        else:
            v = _BINARY_IMPL[node.op](rec(node.children[0]), rec(node.children[1]))
        memo[key] = v
        return v

    return rec(e)


def free_variables(e: Expression) -> set[str]:
    seen: set[int] = set()
    names: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.kind == "var":
            names.add(node.name)
        stack.extend(node.children)
    return names


def substitute(e: Expression, mapping: Mapping[str, Expression | float]) -> Expression:
    """Replace variables by expressions (or numbers), folding constants."""
    repl = {k: _lift(v) for k, v in mapping.items()}
    memo: dict[int, Expression] = {}

    def rec(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if node.kind == "const":
            out = node
        elif node.kind == "var":
            out = repl.get(node.name, node)
        elif node.kind == "func":
            out = apply(node.op, rec(node.children[0]))
        else:
            a, b = (rec(c) for c in node.children)
            out = _FOLD[node.op](a, b)
        memo[key] = out
        return out

    return rec(e)


_FOLD = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


# ----------------------------------------------------------- differentiation


def differentiate(e: Expression, name: str) -> Expression:
    """Exact symbolic derivative of ``e`` with respect to variable ``name``."""
    memo: dict[int, Expression] = {}

    def d(node):
        key = id(node)
        if key in memo:
            return memo[key]
        kind = node.kind
        if kind == "const":
            out = ZERO
        elif kind == "var":
            out = ONE if node.name == name else ZERO
        elif kind == "func":
            u = node.children[0]
            du = d(u)
            if du.is_const and du.value == 0.0:
                out = ZERO
            else:
                out = mul(_outer_derivative(node.op, u, node), du)
        else:
            u, v = node.children
            du, dv = d(u), d(v)
            op = node.op
            if op == "+":
                out = add(du, dv)
            elif op == "-":
                out = sub(du, dv)
            elif op == "*":
                out = add(mul(du, v), mul(u, dv))
            elif op == "/":
                out = div(sub(mul(du, v), mul(u, dv)), power(v, const(2.0)))
            elif dv.is_const and dv.value == 0.0:
                # constant exponent: v * u^(v-1) * u'
                out = mul(mul(v, power(u, sub(v, ONE))), du)
            else:
                out = mul(node, add(mul(dv, apply("ln", u)), div(mul(v, du), u)))
        memo[key] = out
        return out

    return d(e)


def _outer_derivative(op: str, u: Expression, node: Expression) -> Expression:
    if op == "neg":
        return const(-1.0)
    if op == "sin":
        return apply("cos", u)
    if op == "cos":
        return neg(apply("sin", u))
    if op == "tan":
        return div(ONE, power(apply("cos", u), const(2.0)))
    if op == "exp":
        return node
    if op == "ln":
        return div(ONE, u)
    if op == "sqrt":
        return div(ONE, mul(const(2.0), node))
    if op == "arctan":
        return div(ONE, add(ONE, power(u, const(2.0))))
    raise ValueError(op)


# --------------------------------------------------------------- compilation


def compile_expressions(
    exprs: Sequence[Expression], variables: Sequence[str]
) -> Callable[[Sequence[float]], tuple]:
    """Compile several expressions into one function of ``variables``.

    Identical subtrees are computed once. Arithmetic goes through the same
    helpers as :func:`evaluate`, so results agree bit for bit.
    """
    variables = list(variables)
    index = {n: i for i, n in enumerate(variables)}
    names: dict[Expression, str] = {}
    consts: dict[str, float] = {}
    lines: list[str] = []
    counter = 0

    def emit(node):
        nonlocal counter
        if node in names:
            return names[node]
        # iterative post-order to survive deep trees
        stack = [(node, False)]
        while stack:
            cur, ready = stack.pop()
            if cur in names:
                continue
            if not ready:
                stack.append((cur, True))
                for c in cur.children:
                    if c not in names:
                        stack.append((c, False))
                continue
            if cur.kind == "const":
                ref = f"c{len(consts)}"
                consts[ref] = cur.value
                names[cur] = ref
                continue
            if cur.kind == "var":
                if cur.name not in index:
                    raise UnboundVariableError(cur.name)
                names[cur] = f"x[{index[cur.name]}]"
                continue
            t = f"t{counter}"
            counter += 1
            args = ", ".join(names[c] for c in cur.children)
            fn = f"U_{cur.op}" if cur.kind == "func" else f"B{BINARY_OPS.index(cur.op)}"
            lines.append(f"    {t} = {fn}({args})")
            names[cur] = t
        return names[node]

    outs = [emit(e) for e in exprs]
    src = "def _f(x):\n" + "\n".join(lines) + ("\n" if lines else "")
    src += f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})\n"
    env: dict = dict(consts)
    for k, fn in _UNARY_IMPL.items():
        env[f"U_{k}"] = fn
    for i, op in enumerate(BINARY_OPS):
        env[f"B{i}"] = _BINARY_IMPL[op]
    exec(compile(src, "<blowupdyn-expr>", "exec"), env)
    raw = env["_f"]
    nvars = len(variables)

    def fn(values: Sequence[float]) -> tuple:
        vals = [float(v) for v in values]
        if len(vals) != nvars:
            raise ValueError(f"expected {nvars} values, got {len(vals)}")
        return raw(vals)

    fn.source = src
    return fn


def bind(e: Expression, bindings: Mapping[str, float]) -> Expression:
    """Substitute numeric values for the named parameters."""
    return substitute(e, {k: const(v) for k, v in bindings.items()})


def variables_in(exprs: Iterable[Expression]) -> set[str]:
    out: set[str] = set()
    for e in exprs:
        out |= free_variables(e)
    return out
