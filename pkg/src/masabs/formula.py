"""ACTL formulas: AST and parser.

Grammar (state formulas)::

    f ::= f imply f | f || f | f && f | !f | (f) | expr
        | A[] f | A<> f | AX f | A(path)
    path ::= path || path | path && path | X f | G f | F f | [] f | <> f | f U f | f

``expr`` is any boolean expression over variables and locations.  Maximal
temporal-free subformulas become single atoms.  Negation is pushed down to
atoms; negating a temporal subformula is rejected, as is a disjunction of two
temporal path formulas under ``A``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .expr import TRUE, Expr, LocRef, conj, disj, neg, render, vars_of
from .lang import MASGraph
from .parser import ParseError, Scope, TokenStream, _cmp, tokenize


class FormulaError(ParseError):
    pass


@dataclass(frozen=True)
class Formula:
    def __str__(self):
        return show(self)


@dataclass(frozen=True)
class Atom(Formula):
    expr: Expr


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class AX(Formula):
    arg: Formula


@dataclass(frozen=True)
class AU(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class AG(Formula):
    arg: Formula


TOP = Atom(TRUE)


def AF(f: Formula) -> AU:
    return AU(TOP, f)


def f_and(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Atom) and isinstance(b, Atom):
        return Atom(conj(a.expr, b.expr))
    return And(a, b)


def f_or(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Atom) and isinstance(b, Atom):
        return Atom(disj(a.expr, b.expr))
    return Or(a, b)


def f_not(a: Formula) -> Formula:
    if isinstance(a, Atom):
        return Atom(neg(a.expr))
    raise FormulaError(f"negation of temporal formula {show(a)} is outside ACTL")


def atoms(f: Formula) -> list:
    """Atom expressions of ``f`` in first-occurrence order."""
    out: dict = {}

    def walk(g):
        if isinstance(g, Atom):
            out.setdefault(g.expr, None)
        elif isinstance(g, (And, Or, AU)):
            walk(g.left)
            walk(g.right)
        else:
            walk(g.arg)

    walk(f)
    return list(out)


def formula_vars(f: Formula) -> frozenset:
    return frozenset().union(*(vars_of(a) for a in atoms(f))) if atoms(f) else frozenset()


def depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    if isinstance(f, (And, Or)):
        return max(depth(f.left), depth(f.right))
    if isinstance(f, AU):
        return 1 + max(depth(f.left), depth(f.right))
    return 1 + depth(f.arg)


def show(f: Formula) -> str:
    if isinstance(f, Atom):
        return render(f.expr) if f.expr != TRUE else "true"
    if isinstance(f, And):
        return f"({show(f.left)} && {show(f.right)})"
    if isinstance(f, Or):
        return f"({show(f.left)} || {show(f.right)})"
    if isinstance(f, AX):
        return f"AX ({show(f.arg)})"
    if isinstance(f, AG):
        return f"A[] ({show(f.arg)})"
    if f.left == TOP:
        return f"A<> ({show(f.right)})"
    return f"A({show(f.left)} U {show(f.right)})"


# ---------------------------------------------------------------------------
# parsing


def formula_scope(S: MASGraph) -> Scope:
    """Variables by qualified or unique short name; locations likewise."""
    locs, counts = {}, {}
    for i, a in enumerate(S.agents):
        for l in a.locations:
            locs[f"{a.name}.{l}"] = LocRef(i, l, f"{a.name}.{l}")
            counts.setdefault(l, []).append((i, a.name))
    for l, owners in counts.items():
        if len(owners) == 1:
            locs.setdefault(l, LocRef(owners[0][0], l, l))
    shared = {l for l, owners in counts.items() if len(owners) > 1}
    return Scope(S.decls(), locations=locs, ambiguous=shared)


def parse_formula(text: str, S: MASGraph) -> Formula:
    ts = TokenStream([t for t in tokenize(text) if t.kind != "nl"])
    sc = formula_scope(S)
    f = _imply(ts, sc)
    if ts.cur.kind != "eof":
        ts.error(f"unexpected {ts.cur.text!r} after formula")
    return f


def _is(ts, text, k=0):
    t = ts.peek(k) if k else ts.cur
    return t.text == text and t.kind in ("op", "name")


def _imply(ts, sc):
    left = _or(ts, sc)
    if ts.at("imply"):
        ts.next()
        return f_or(f_not(left), _imply(ts, sc))
    return left


def _or(ts, sc):
    f = _and(ts, sc)
    while ts.at("||", "or"):
        ts.next()
        f = f_or(f, _and(ts, sc))
    return f


def _and(ts, sc):
    f = _not(ts, sc)
    while ts.at("&&", "and"):
        ts.next()
        f = f_and(f, _not(ts, sc))
    return f


def _not(ts, sc):
    if ts.at("!", "not"):
        tok = ts.next()
        try:
            return f_not(_not(ts, sc))
        except FormulaError as exc:
            raise FormulaError(str(exc), tok.line, tok.col) from None
    return _leaf(ts, sc)


def _leaf(ts, sc):
    t = ts.cur
    if t.kind == "name" and t.text == "AX" and "AX" not in sc.decls:
        ts.next()
        return AX(_not(ts, sc))
    if t.kind == "name" and t.text == "A" and "A" not in sc.decls:
        if _is(ts, "[", 1) and _is(ts, "]", 2):
            ts.next(), ts.next(), ts.next()
            return AG(_not(ts, sc))
        if _is(ts, "<>", 1):
            ts.next(), ts.next()
            return AF(_not(ts, sc))
        if _is(ts, "(", 1):
            ts.next(), ts.next()
            p = _path_or(ts, sc)
            ts.expect(")")
            return _quantify(p, t)
    if ts.at("("):
        start = ts.i
        try:
            return Atom(_cmp(ts, sc))
        except ParseError:
            ts.i = start
        ts.next()
        f = _imply(ts, sc)
        ts.expect(")")
        return f
    return Atom(_cmp(ts, sc))


# path formulas are tuples: ("X", f) | ("G", f) | ("U", f1, f2) | ("state", f)
# | ("and", p, q) | ("or", p, q)


def _path_or(ts, sc):
    p = _path_and(ts, sc)
    while ts.at("||", "or"):
        ts.next()
        p = ("or", p, _path_and(ts, sc))
    return p


def _path_and(ts, sc):
    p = _path_prim(ts, sc)
    while ts.at("&&", "and"):
        ts.next()
        p = ("and", p, _path_prim(ts, sc))
    return p


def _path_prim(ts, sc):
    t = ts.cur
    if t.kind == "name" and t.text in ("X", "G", "F") and t.text not in sc.decls:
        ts.next()
        return (t.text, _not(ts, sc))
    if ts.at("[") and _is(ts, "]", 1):
        ts.next(), ts.next()
        return ("G", _not(ts, sc))
    if ts.at("<>"):
        ts.next()
        return ("F", _not(ts, sc))
    f = _imply_state_only(ts, sc)
    if t.kind != "eof" and ts.cur.kind == "name" and ts.cur.text == "U":
        ts.next()
        return ("U", f, _imply_state_only(ts, sc))
    return ("state", f)


def _imply_state_only(ts, sc):
    # operands of U and of path booleans bind tighter than && / || of paths
    return _not(ts, sc)


def _quantify(p, tok) -> Formula:
    kind = p[0]
    if kind == "state":
        return p[1]
    if kind == "X":
        return AX(p[1])
    if kind == "G":
        return AG(p[1])
    if kind == "F":
        return AF(p[1])
    if kind == "U":
        return AU(p[1], p[2])
    if kind == "and":
        return f_and(_quantify(p[1], tok), _quantify(p[2], tok))
    # or: allowed only when one side is a state formula
    a, b = p[1], p[2]
    if a[0] == "state":
        return f_or(a[1], _quantify(b, tok))
    if b[0] == "state":
        return f_or(_quantify(a, tok), b[1])
    raise FormulaError("disjunction of temporal path formulas under A is outside ACTL",
                       tok.line, tok.col)
