"""Guard and update expressions over bounded-integer variables.

Expressions are immutable trees.  Variable references carry fully-qualified
names; array references also carry the index base of the declaration so they
can be evaluated without a symbol table.

Evaluation environments map a variable name to an ``int`` (scalars) or a
``tuple`` of ints (arrays, stored from the lowest index upward).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

Value = Union[int, bool, tuple]


class EvalError(Exception):
    """Division by zero, index out of bounds, out-of-domain assignment, ..."""


@dataclass(frozen=True)
class Expr:
    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: Value

    # True == 1 in Python; keep boolean and integer literals apart
    def __eq__(self, other):
        return (type(other) is Const and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash((Const, type(self.value), self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Index(Expr):
    name: str
    index: Expr
    base: int = 0


@dataclass(frozen=True)
class LitIndex(Expr):
    """Dynamic index into a constant array (left behind by substitution)."""
    values: tuple
    index: Expr
    base: int = 0


@dataclass(frozen=True)
class ArrayLit(Expr):
    items: tuple


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '-' or '!'
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str  # only 'sum'
    args: tuple


@dataclass(frozen=True)
class TableApply(Expr):
    """Lookup of a finite function table ``fn(args...)``.

    ``table`` is a sorted tuple of ``(input_tuple, output)`` pairs so the node
    stays hashable.
    """
    name: str
    table: tuple
    args: tuple


@dataclass(frozen=True)
class LocRef(Expr):
    """Location proposition: agent ``agent`` currently sits at ``loc``."""
    agent: int
    loc: str
    label: str = ""


TRUE = Const(True)
FALSE = Const(False)

ARITH = {"+", "-", "*", "/", "%"}
COMPARE = {"==", "!=", "<", "<=", ">", ">="}
LOGIC = {"&&", "||", "imply"}


def tdiv(a: int, b: int) -> int:
    # truncates toward zero
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def tmod(a: int, b: int) -> int:
    # result has the sign of the dividend
    if b == 0:
        raise EvalError("modulo by zero")
    return a - b * tdiv(a, b)


def _lookup(env: Mapping, name: str):
    try:
        return env[name]
    except KeyError:
        raise EvalError(f"unbound variable {name!r}") from None


def _at(arr: tuple, idx, base: int, name: str) -> int:
    if isinstance(idx, bool) or not isinstance(idx, int):
        raise EvalError(f"non-integer index into {name}")
    k = idx - base
    if not 0 <= k < len(arr):
        raise EvalError(f"index {idx} out of bounds for {name}")
    return arr[k]


def _int(v, what="operand") -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"integer {what} expected, got {v!r}")
    return v


def _bool(v) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"boolean expected, got {v!r}")
    return v


def eval_expr(e: Expr, env: Mapping, loc: tuple | None = None) -> Value:
    """Evaluate ``e`` in ``env``; raises :class:`EvalError` on runtime faults.

    ``loc`` is the current location tuple, only needed for :class:`LocRef`.
    ``&&``, ``||`` and ``imply`` short-circuit.
    """
    t = type(e)
    if t is Const:
        return e.value
    if t is Var:
        return _lookup(env, e.name)
    if t is Index:
        arr = _lookup(env, e.name)
        return _at(arr, eval_expr(e.index, env, loc), e.base, e.name)
    if t is LitIndex:
        return _at(e.values, eval_expr(e.index, env, loc), e.base, "<const>")
    if t is ArrayLit:
        return tuple(_int(eval_expr(i, env, loc)) for i in e.items)
    if t is Unary:
        v = eval_expr(e.arg, env, loc)
        if e.op == "-":
            return -_int(v)
        return not _bool(v)
    if t is Binary:
        op = e.op
        if op in LOGIC:
            a = _bool(eval_expr(e.left, env, loc))
            if op == "&&":
                return a and _bool(eval_expr(e.right, env, loc))
            if op == "||":
                return a or _bool(eval_expr(e.right, env, loc))
            return (not a) or _bool(eval_expr(e.right, env, loc))
        a = eval_expr(e.left, env, loc)
        b = eval_expr(e.right, env, loc)
        if op in ARITH:
            a, b = _int(a), _int(b)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return tdiv(a, b)
            return tmod(a, b)
        if op in ("==", "!="):
            if isinstance(a, tuple) != isinstance(b, tuple) or isinstance(a, bool) != isinstance(b, bool):
                raise EvalError(f"ill-typed comparison {a!r} {op} {b!r}")
            return (a == b) if op == "==" else (a != b)
        a, b = _int(a), _int(b)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise ValueError(f"unknown operator {op}")
    if t is Call:
        (arg,) = e.args
        v = eval_expr(arg, env, loc)
        if not isinstance(v, tuple):
            raise EvalError("sum() expects an array")
        return sum(v)
    if t is TableApply:
        key = tuple(_int(eval_expr(a, env, loc)) for a in e.args)
        for k, out in e.table:
            if k == key:
                return out
        raise EvalError(f"{e.name} undefined on {key}")
    if t is LocRef:
        if loc is None:
            raise EvalError("location proposition evaluated without a location")
        return loc[e.agent] == e.loc
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# free variables


def vars_of(e) -> frozenset:
    """Names of the variables occurring in an expression or update."""
    from .lang import Assign  # local import: lang depends on this module

    out: set = set()

    def walk(x):
        t = type(x)
        if t is Var:
            out.add(x.name)
        elif t is Index:
            out.add(x.name)
            walk(x.index)
        elif t in (LitIndex,):
            walk(x.index)
        elif t is Unary:
            walk(x.arg)
        elif t is Binary:
            walk(x.left)
            walk(x.right)
        elif t in (ArrayLit,):
            for i in x.items:
                walk(i)
        elif t in (Call, TableApply):
            for a in x.args:
                walk(a)
        elif t is Assign:
            walk(x.target)
            walk(x.rhs)
        elif isinstance(x, (tuple, list)):
            for a in x:
                walk(a)

    walk(e)
    return frozenset(out)


def locrefs_of(e: Expr) -> bool:
    found = False

    def walk(x):
        nonlocal found
        if isinstance(x, LocRef):
            found = True
        for child in _children(x):
            walk(child)

    walk(e)
    return found


def _children(x):
    t = type(x)
    if t in (Index, LitIndex):
        return (x.index,)
    if t is Unary:
        return (x.arg,)
    if t is Binary:
        return (x.left, x.right)
    if t is ArrayLit:
        return x.items
    if t in (Call, TableApply):
        return x.args
    return ()


# ---------------------------------------------------------------------------
# substitution and constant folding


def is_const(e: Expr) -> bool:
    return type(e) is Const


def substitute(r, values: Mapping[str, Value]):
    """Replace free occurrences of the variables in ``values`` by literals.

    Works on expressions, single assignments and update tuples.  The result is
    constant-folded; a guard that folds to false becomes :data:`FALSE`.
    Assignment targets naming a substituted variable are left in place (only
    their index expressions are rewritten); dropping such writes is the
    caller's decision.
    """
    from .lang import Assign

    if isinstance(r, tuple):
        return tuple(substitute(a, values) for a in r)
    if isinstance(r, Assign):
        tgt = r.target
        if isinstance(tgt, Index):
            tgt = Index(tgt.name, substitute(tgt.index, values), tgt.base)
        return Assign(tgt, substitute(r.rhs, values))
    return fold(_subst(r, values))


def _subst(e: Expr, values: Mapping) -> Expr:
    t = type(e)
    if t is Var:
        if e.name in values:
            return Const(values[e.name])
        return e
    if t is Index:
        idx = _subst(e.index, values)
        if e.name in values:
            return LitIndex(tuple(values[e.name]), idx, e.base)
        return Index(e.name, idx, e.base)
    if t is LitIndex:
        return LitIndex(e.values, _subst(e.index, values), e.base)
    if t is Unary:
        return Unary(e.op, _subst(e.arg, values))
    if t is Binary:
        return Binary(e.op, _subst(e.left, values), _subst(e.right, values))
    if t is ArrayLit:
        return ArrayLit(tuple(_subst(i, values) for i in e.items))
    if t is Call:
        return Call(e.fn, tuple(_subst(a, values) for a in e.args))
    if t is TableApply:
        return TableApply(e.name, e.table, tuple(_subst(a, values) for a in e.args))
    return e


def fold(e: Expr) -> Expr:
    """Bottom-up constant folding with boolean short-circuit simplification.

    Sub-terms whose evaluation would fault are left unfolded, so folding never
    changes where an :class:`EvalError` can occur.
    """
    t = type(e)
    if t in (Const, Var, LocRef):
        return e
    if t is Index:
        return Index(e.name, fold(e.index), e.base)
    if t is LitIndex:
        idx = fold(e.index)
        node = LitIndex(e.values, idx, e.base)
        return _try_const(node) if is_const(idx) else node
    if t is ArrayLit:
        items = tuple(fold(i) for i in e.items)
        node = ArrayLit(items)
        return _try_const(node) if all(map(is_const, items)) else node
    if t is Unary:
        a = fold(e.arg)
        if e.op == "!" and type(a) is Unary and a.op == "!":
            return a.arg
        node = Unary(e.op, a)
        return _try_const(node) if is_const(a) else node
    if t is Binary:
        a, b = fold(e.left), fold(e.right)
        op = e.op
        if op == "&&":
            if a == FALSE or b == FALSE and _total(a):
                return FALSE
            if a == TRUE:
                return b
            if b == TRUE:
                return a
        elif op == "||":
            if a == TRUE or b == TRUE and _total(a):
                return TRUE
            if a == FALSE:
                return b
            if b == FALSE:
                return a
        elif op == "imply":
            if a == FALSE:
                return TRUE
            if a == TRUE:
                return b
        node = Binary(op, a, b)
        return _try_const(node) if is_const(a) and is_const(b) else node
    if t in (Call, TableApply):
        args = tuple(fold(x) for x in e.args)
        node = Call(e.fn, args) if t is Call else TableApply(e.name, e.table, args)
        return _try_const(node) if all(map(is_const, args)) else node
    return e


def _try_const(node: Expr) -> Expr:
    try:
        return Const(eval_expr(node, {}))
    except EvalError:
        return node


def _total(e: Expr) -> bool:
    """Conservative check that evaluating ``e`` can never fault."""
    t = type(e)
    if t in (Const, Var, LocRef):
        return True
    if t in (Index, LitIndex, TableApply):
        return False
    if t is Binary and e.op in ("/", "%"):
        return False
    return all(_total(c) for c in _children(e))


def conj(*parts: Expr) -> Expr:
    out = TRUE
    for p in parts:
        out = p if out == TRUE else Binary("&&", out, p)
    return fold(out)


def disj(*parts: Expr) -> Expr:
    out = FALSE
    for p in parts:
        out = p if out == FALSE else Binary("||", out, p)
    return fold(out)


def neg(e: Expr) -> Expr:
    return fold(Unary("!", e))


# ---------------------------------------------------------------------------
# pretty printing (round-trips through the parser)

_PREC = {"imply": 1, "||": 2, "&&": 3, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def render(e: Expr, prec: int = 0) -> str:
    t = type(e)
    if t is Const:
        v = e.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return "[" + ", ".join(map(str, v)) + "]"
        return str(v) if v >= 0 or prec == 0 else f"({v})"
    if t is Var:
        return e.name
    if t is Index:
        return f"{e.name}[{render(e.index)}]"
    if t is LitIndex:
        arr = "[" + ", ".join(map(str, e.values)) + "]"
        idx = render(e.index) if e.base == 0 else f"{render(e.index, 5)} - {e.base}"
        return f"{arr}[{idx}]"
    if t is ArrayLit:
        return "[" + ", ".join(render(i) for i in e.items) + "]"
    if t is Unary:
        s = e.op + render(e.arg, 7)
        return s
    if t is Binary:
        p = _PREC[e.op]
        op = f" {e.op} "
        s = render(e.left, p) + op + render(e.right, p + 1)
        return f"({s})" if p < prec else s
    if t is Call:
        return f"{e.fn}(" + ", ".join(render(a) for a in e.args) + ")"
    if t is TableApply:
        return f"{e.name}(" + ", ".join(render(a) for a in e.args) + ")"
    if t is LocRef:
        return e.label or f"@{e.agent}.{e.loc}"
    return repr(e)
