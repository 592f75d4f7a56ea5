"""A small text language for products of regularised distributions.

Grammar (whitespace-insensitive)::

    Sum    := ['+'|'-'] Prod (('+'|'-') Prod)*
    Prod   := Factor (('*'|'.') Factor)*
    Factor := [Coeff] (Atom | '(' Sum ')')
    Coeff  := (INT ['/' INT] | 'i' | 'pi')+
    Atom   := D[primes | '(' INT ')'] | H | Hc | LnP | LnM | LnAbs | LnSgn
            | Xp^E | Xm^E | X^-INT | Xsgn^-INT | Xi0p^-INT | Xi0m^-INT
    E      := ['-'] INT ['/' INT]

``Xp^a`` with ``a > -1`` is the convolved power ``x_+^a``; ``Xp^-n`` with
integer ``n >= 1`` is the finite-part model of ``x_+^(-n)``.  Coefficients
are exact products of a rational, ``i`` and powers of ``pi``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from . import reference as ref
from . import representatives as R
from .quadrature import complex_dtype, working_pi

__all__ = [
    "Atom",
    "Coeff",
    "ExprError",
    "Product",
    "Scale",
    "Sum",
    "compile",
    "compile_reference",
    "format_expr",
    "parse",
]

MAX_PRIMES = 4


class ExprError(ValueError):
    """Parse or compile error; ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


# -- AST ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coeff:
    """``rational * i**imag * pi**pi_power``."""

    rational: Fraction = Fraction(1)
    imag: int = 0        # 0 or 1
    pi_power: int = 0

    def __mul__(self, other: "Coeff") -> "Coeff":
        r = self.rational * other.rational
        im = self.imag + other.imag
        if im >= 2:
            r, im = -r, im - 2
        return Coeff(r, im, self.pi_power + other.pi_power)

    def __neg__(self) -> "Coeff":
        return Coeff(-self.rational, self.imag, self.pi_power)

    @property
    def is_one(self) -> bool:
        return self.rational == 1 and not self.imag and not self.pi_power

    def value(self, dtype=np.float64):
        dt = np.dtype(dtype).type
        v = dt(self.rational.numerator) / dt(self.rational.denominator)
        v = v * working_pi(dt) ** self.pi_power
        c = complex_dtype(dt)(v)
        return c * complex_dtype(dt)(1j) if self.imag else c

    def __complex__(self):
        return complex(self.value())

    def text(self) -> str:
        """Rendering of ``|self|`` (sign handled by the caller)."""
        parts = []
        r = abs(self.rational)
        if r != 1 or not (self.imag or self.pi_power):
            parts.append(str(r))
        if self.imag:
            parts.append("i")
        parts.extend(["pi"] * self.pi_power)
        return " ".join(parts)


@dataclass(frozen=True)
class Atom:
    symbol: str
    params: tuple = ()


@dataclass(frozen=True)
class Scale:
    coeff: Coeff
    child: "Node"


@dataclass(frozen=True)
class Product:
    children: tuple


@dataclass(frozen=True)
class Sum:
    children: tuple


Node = Union[Atom, Scale, Product, Sum]

_SIMPLE = ("H", "Hc", "LnP", "LnM", "LnAbs", "LnSgn")
_POWER = ("Xp", "Xm")
_NEG_ONLY = ("X", "Xsgn", "Xi0p", "Xi0m")
_SYMBOLS = ("D",) + _SIMPLE + _POWER + _NEG_ONLY


def scale(c: Coeff, child: Node) -> Node:
    """Canonical scaling: folds nested scales and drops unit coefficients."""
    if isinstance(child, Scale):
        c, child = c * child.coeff, child.child
    return child if c.is_one else Scale(c, child)


# -- lexer ----------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z][A-Za-z0-9]*)|(?P<op>[-+*./^()']))")


@dataclass(frozen=True)
class _Tok:
    kind: str   # int | name | op | end
    text: str
    offset: int  # byte offset


def _lex(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    # byte offsets of each character position
    boff = [0]
    for ch in src:
        boff.append(boff[-1] + len(ch.encode("utf-8")))
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprError(f"unexpected character {src[start]!r}", boff[start])
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), boff[m.start(kind)]))
        pos = m.end()
    toks.append(_Tok("end", "", boff[len(src)]))
    return toks


# -- parser ----------------------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind, text=None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind, text=None, what=None) -> _Tok:
        if not self.at(kind, text):
            t = self.tok
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ExprError(f"expected {what or text or kind}, found {found}", t.offset)
        return self.take()

    def parse(self) -> Node:
        node = self.sum()
        if not self.at("end"):
            raise ExprError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def sum(self) -> Node:
        sign = Coeff()
        if self.at("op", "-") or self.at("op", "+"):
            if self.take().text == "-":
                sign = -sign
        children = [scale(sign, self.prod())]
        while self.at("op", "+") or self.at("op", "-"):
            neg = self.take().text == "-"
            p = self.prod()
            children.append(scale(Coeff(Fraction(-1)), p) if neg else p)
        return children[0] if len(children) == 1 else Sum(tuple(children))

    def prod(self) -> Node:
        children = [self.factor()]
        while self.at("op", "*") or self.at("op", "."):
            self.take()
            children.append(self.factor())
        return children[0] if len(children) == 1 else Product(tuple(children))

    def coeff(self) -> Coeff | None:
        c = None
        while True:
            if self.at("int"):
                num = int(self.take().text)
                den = 1
                if self.at("op", "/"):
                    self.take()
                    t = self.expect("int", what="denominator")
                    den = int(t.text)
                    if den == 0:
                        raise ExprError("zero denominator", t.offset)
                item = Coeff(Fraction(num, den))
            elif self.at("name", "i"):
                self.take()
                item = Coeff(imag=1)
            elif self.at("name", "pi"):
                self.take()
                item = Coeff(pi_power=1)
            else:
                return c
            c = item if c is None else c * item

    def factor(self) -> Node:
        c = self.coeff()
        if self.at("op", "("):
            self.take()
            inner = self.sum()
            self.expect("op", ")", what="')'")
            node = inner
        elif self.at("name"):
            node = self.atom()
        else:
            t = self.tok
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ExprError(f"expected an atom or '(', found {found}", t.offset)
        return node if c is None else scale(c, node)

    def _exponent(self, allow_fraction=True):
        start = self.tok.offset
        self.expect("op", "^", what="'^'")
        neg = False
        if self.at("op", "-"):
            self.take()
            neg = True
        t = self.expect("int", what="integer exponent")
        val = Fraction(int(t.text))
        if self.at("op", "/") and allow_fraction:
            self.take()
            d = self.expect("int", what="exponent denominator")
            if int(d.text) == 0:
                raise ExprError("zero denominator", d.offset)
            val = val / int(d.text)
        return -val if neg else val, start

    def atom(self) -> Atom:
        t = self.take()
        name = t.text
        if name not in _SYMBOLS:
            raise ExprError(f"unknown atom {name!r}", t.offset)
        if name == "D":
            order = 0
            if self.at("op", "'"):
                while self.at("op", "'"):
                    self.take()
                    order += 1
            elif self.at("op", "(") and self.toks[self.i + 1].kind == "int":
                self.take()
                order = int(self.take().text)
                self.expect("op", ")", what="')'")
            return Atom("D", (order,))
        if name in _SIMPLE:
            return Atom(name)
        val, start = self._exponent(allow_fraction=name in _POWER)
        if name in _POWER:
            if val <= -1 and val.denominator != 1:
                raise ExprError("non-integer exponent must exceed -1", start)
            return Atom(name, (val,))
        if val >= 0 or val.denominator != 1:
            raise ExprError(f"{name} takes a negative integer exponent", start)
        return Atom(name, (int(-val),))


def parse(src: str) -> Node:
    """Parse ``src`` into an AST; raises :class:`ExprError` with a byte offset."""
    return _Parser(src).parse()


# -- printing ----------------------------------------------------------------------------

def _atom_text(a: Atom) -> str:
    if a.symbol == "D":
        k = a.params[0]
        return "D" + "'" * k if k <= MAX_PRIMES else f"D({k})"
    if a.symbol in _SIMPLE:
        return a.symbol
    if a.symbol in _POWER:
        v = a.params[0]
        return f"{a.symbol}^{v.numerator}" + (f"/{v.denominator}" if v.denominator != 1 else "")
    return f"{a.symbol}^-{a.params[0]}"


def _wrap(node: Node, ctx: str) -> str:
    """Text of ``node`` placed as a child in context ``ctx`` (prod/scale)."""
    text = format_expr(node)
    if isinstance(node, Atom):
        return text
    if ctx == "prod" and isinstance(node, Scale) and node.coeff.rational > 0 \
            and isinstance(node.child, Atom):
        return text
    return f"({text})"


def _scale_text(node: Scale, leading_sign: bool = True) -> str:
    c = node.coeff
    body = "" if abs(c.rational) == 1 and not (c.imag or c.pi_power) else c.text() + " "
    child = node.child
    if isinstance(child, Atom):
        inner = _atom_text(child)
    elif isinstance(child, Product) and not body:
        # "-A * B" parses as a negated product.
        inner = format_expr(child)
    else:
        inner = f"({format_expr(child)})"
    sign = "-" if c.rational < 0 and leading_sign else ""
    return f"{sign}{body}{inner}"


def format_expr(node: Node) -> str:
    """Canonical text; ``parse(format_expr(t)) == t`` for canonical ASTs."""
    if isinstance(node, Atom):
        return _atom_text(node)
    if isinstance(node, Scale):
        return _scale_text(node)
    if isinstance(node, Product):
        return " * ".join(_wrap(c, "prod") for c in node.children)
    if isinstance(node, Sum):
        out = []
        for k, c in enumerate(node.children):
            if isinstance(c, Sum):
                text, neg = f"({format_expr(c)})", False
            elif isinstance(c, Scale) and c.coeff.rational < 0:
                text, neg = _scale_text(c, leading_sign=False), True
            else:
                text, neg = format_expr(c), False
            if k == 0:
                out.append(("-" if neg else "") + text)
            else:
                out.append((" - " if neg else " + ") + text)
        return "".join(out)
    raise TypeError(f"not an expression node: {node!r}")


# -- compilation ------------------------------------------------------------------------

def _atom_rep(a: Atom, m) -> R.Representative:
    s = a.symbol
    try:
        if s == "D":
            return R.rep_delta(m, a.params[0])
        if s == "H":
            return R.rep_heaviside(m)
        if s == "Hc":
            return R.rep_heaviside(m, checked=True)
        if s in _POWER:
            sign = "+" if s == "Xp" else "-"
            v = a.params[0]
            if v < 0 and v.denominator == 1:
                return R.rep_x_neg_int(m, sign, int(-v) - 1)
            return R.rep_x_power(m, sign, float(v))
        if s == "X":
            return R.rep_derived(m, "x^-p", a.params[0])
        if s == "Xsgn":
            return R.rep_derived(m, "x^-p sgn", a.params[0])
        if s == "Xi0p":
            return R.rep_derived(m, "xplus_i0", a.params[0] - 1)
        if s == "Xi0m":
            return R.rep_derived(m, "xminus_i0", a.params[0] - 1)
        if s == "LnP":
            return R.rep_ln(m, "+")
        if s == "LnM":
            return R.rep_ln(m, "-")
        if s == "LnAbs":
            return R.rep_derived(m, "ln_abs")
        if s == "LnSgn":
            return R.rep_derived(m, "ln_sgn")
    except ValueError as exc:
        raise ExprError(f"cannot build {_atom_text(a)}: {exc}") from exc
    raise ExprError(f"unknown atom {s!r}")


def compile(node: Node, m) -> R.Representative:  # noqa: A001 - public name
    """Representative of the expression for mollifier ``m``."""
    if isinstance(node, Atom):
        return _atom_rep(node, m)
    if isinstance(node, Scale):
        return compile(node.child, m).scaled(node.coeff.value(m.dtype))
    if isinstance(node, Product):
        return R.product([compile(c, m) for c in node.children])
    if isinstance(node, Sum):
        return R.linear_combination([(1, compile(c, m)) for c in node.children])
    raise TypeError(f"not an expression node: {node!r}")


def _atom_reference(a: Atom) -> ref.ReferenceDistribution:
    s = a.symbol
    one = ref.reference
    if s == "D":
        return one([(1, ("delta", a.params[0]))])
    if s == "H":
        return one([(1, "theta")])
    if s == "Hc":
        return one([(1, "theta_check")])
    if s in _POWER:
        v = a.params[0]
        side = "xplus" if s == "Xp" else "xminus"
        if v < 0 and v.denominator == 1:
            return one([(1, (side + "_neg", int(-v)))])
        if v == 0:
            return one([(1, "theta" if s == "Xp" else "theta_check")])
        return one([(1, (side + "_pow", float(v)))])
    if s == "X":
        return one([(1, ("x_neg", a.params[0]))])
    if s == "Xsgn":
        return one([(1, ("x_neg_sgn", a.params[0]))])
    if s in ("Xi0p", "Xi0m"):
        return ref.x_i0("+" if s == "Xi0p" else "-", a.params[0])
    if s == "LnP":
        return one([(1, "lnplus")])
    if s == "LnM":
        return one([(1, "lnminus")])
    if s == "LnAbs":
        return one([(1, "lnabs")])
    if s == "LnSgn":
        return one([(1, "lnplus"), (-1, "lnminus")])
    raise ExprError(f"unknown atom {s!r}")


def compile_reference(node: Node) -> ref.ReferenceDistribution:
    """Distribution named by a linear expression (no products)."""
    if isinstance(node, Atom):
        return _atom_reference(node)
    if isinstance(node, Scale):
        return complex(node.coeff) * compile_reference(node.child)
    if isinstance(node, Sum):
        out = compile_reference(node.children[0])
        for c in node.children[1:]:
            out = out + compile_reference(c)
        return out
    if isinstance(node, Product):
        if len(node.children) == 1:
            return compile_reference(node.children[0])
        raise ExprError("a reference target must be linear (no products)")
    raise TypeError(f"not an expression node: {node!r}")
