"""Exact polynomial algebra over field-theory atoms.

Expressions are built as small trees (``Sum``, ``Product``, ``Pow``, ``Const``
and the atoms) and reduced by :func:`canonicalize` to a :class:`Poly`, a sorted
sum of monomials with :class:`fractions.Fraction` coefficients.  Two
expressions are equal as polynomials iff their ``Poly`` forms compare equal.

Atoms are ordered ConstSym < TimeCoord < SpaceCoord < FieldComp < DerivSym,
then by (name, component, derivative multi-index).  A monomial is a tuple of
``(atom, power)`` pairs in that order; monomials are ordered by total degree,
then lexicographically by their atom keys.

Derivative symbols carry a multi-index of orders over (t, x1, x2, x3), so
mixed partials commute by construction.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping

from .errors import MissingBinding, UnsupportedForm

COORD_NAMES = ("t", "x1", "x2", "x3")


def _as_fraction(value) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"symbolic coefficients must be exact, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, numbers.Rational):
        return Fraction(value)
    raise TypeError(f"cannot use {value!r} as an exact coefficient")


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(_as_fraction(value))


class Expr:
    """Base class. Arithmetic operators build unsimplified trees."""

    __slots__ = ()

    def __add__(self, other):
        return Sum((self, as_expr(other)))

    def __radd__(self, other):
        return Sum((as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, -as_expr(other)))

    def __rsub__(self, other):
        return Sum((as_expr(other), -self))

    def __neg__(self):
        return Product((Const(Fraction(-1)), self))

    def __mul__(self, other):
        return Product((self, as_expr(other)))

    def __rmul__(self, other):
        return Product((as_expr(other), self))

    def __truediv__(self, other):
        if isinstance(other, Expr):
            return Product((self, Pow(other, -1)))
        return Product((self, Const(1 / _as_fraction(other))))

    def __pow__(self, exponent):
        return Pow(self, exponent)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", _as_fraction(self.value))


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Any


class Atom(Expr):
    __slots__ = ()

    def sort_key(self) -> tuple:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstSym(Atom):
    name: str

    def sort_key(self):
        return (0, self.name)


@dataclass(frozen=True)
class TimeCoord(Atom):
    def sort_key(self):
        return (1,)


@dataclass(frozen=True)
class SpaceCoord(Atom):
    axis: int

    def __post_init__(self):
        if self.axis not in (1, 2, 3):
            raise ValueError(f"space axis must be 1..3, got {self.axis}")

    def sort_key(self):
        return (2, self.axis)


@dataclass(frozen=True)
class FieldComp(Atom):
    field: str
    comp: int = 1

    def __post_init__(self):
        if self.comp < 1:
            raise ValueError("component index starts at 1")

    def sort_key(self):
        return (3, self.field, self.comp)


@dataclass(frozen=True)
class DerivSym(Atom):
    field: str
    comp: int
    orders: tuple  # derivative order per coordinate (t, x1, x2, x3)

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        if len(orders) != 4 or min(orders) < 0 or sum(orders) < 1:
            raise ValueError(f"bad derivative multi-index {self.orders!r}")
        object.__setattr__(self, "orders", orders)

    @property
    def order(self) -> int:
        return sum(self.orders)

    def sort_key(self):
        return (4, self.field, self.comp, self.orders)


T = TimeCoord()
X1, X2, X3 = SpaceCoord(1), SpaceCoord(2), SpaceCoord(3)
COORDS = (T, X1, X2, X3)
SPACE = (X1, X2, X3)


def coord(name: str) -> TimeCoord | SpaceCoord:
    return COORDS[COORD_NAMES.index(name)]


def coord_index(c: Atom) -> int:
    if isinstance(c, TimeCoord):
        return 0
    if isinstance(c, SpaceCoord):
        return c.axis
    raise TypeError(f"{c!r} is not a coordinate")


def deriv(field: str, comp: int = 1, *coords: Atom) -> DerivSym:
    """``deriv("A", 2, T, X1)`` is the symbol for d^2 A_2 / dt dx1."""
    orders = [0, 0, 0, 0]
    for c in coords:
        orders[coord_index(c)] += 1
    return DerivSym(field, comp, tuple(orders))


# -- canonical polynomials ---------------------------------------------------

def _mono_key(mono):
    return (sum(p for _, p in mono), tuple((a.sort_key(), p) for a, p in mono))


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    powers = dict(m1)
    for a, p in m2:
        powers[a] = powers.get(a, 0) + p
    return tuple(sorted(powers.items(), key=lambda ap: ap[0].sort_key()))


class Poly(Expr):
    """Canonical form: immutable, hashable, and closed under + - * and integer powers."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        cleaned = [(m, c) for m, c in items if c != 0]
        cleaned.sort(key=lambda mc: _mono_key(mc[0]))
        self.terms = tuple(cleaned)
        self._hash = None

    @classmethod
    def const(cls, value) -> Poly:
        return cls({(): _as_fraction(value)})

    @classmethod
    def atom(cls, a: Atom) -> Poly:
        return cls({((a, 1),): Fraction(1)})

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __repr__(self):
        return f"Poly({render(self)!r})"

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not m for m, _ in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise UnsupportedForm(f"{render(self)} is not a rational constant")
        return self.terms[0][1] if self.terms else Fraction(0)

    def atoms(self) -> set:
        return {a for m, _ in self.terms for a, _ in m}

    def degree(self) -> int:
        return max((sum(p for _, p in m) for m, _ in self.terms), default=0)

    def as_dict(self) -> dict:
        return dict(self.terms)

    # arithmetic stays canonical
    def __add__(self, other):
        o = canonicalize(as_expr(other))
        acc = dict(self.terms)
        for m, c in o.terms:
            acc[m] = acc.get(m, 0) + c
        return Poly(acc)

    __radd__ = __add__

    def __neg__(self):
        return Poly([(m, -c) for m, c in self.terms])

    def __sub__(self, other):
        return self + (-canonicalize(as_expr(other)))

    def __rsub__(self, other):
        return canonicalize(as_expr(other)) - self

    def __mul__(self, other):
        o = canonicalize(as_expr(other))
        acc: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in o.terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return Poly(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Expr):
            d = canonicalize(other)
            if not d.is_constant() or d.is_zero():
                raise UnsupportedForm(f"division by {render(d)} leaves the polynomial class")
            other = d.constant_value()
        return self * Poly.const(1 / _as_fraction(other))

    def __pow__(self, exponent):
        return _poly_pow(self, exponent)


ZERO = Poly()
ONE = Poly.const(1)


def _poly_pow(base: Poly, exponent) -> Poly:
    if isinstance(exponent, Fraction) and exponent.denominator == 1:
        exponent = int(exponent)
    if isinstance(exponent, bool) or not isinstance(exponent, numbers.Integral):
        raise UnsupportedForm(f"non-integer exponent {exponent!r}")
    n = int(exponent)
    if n < 0:
        if not base.is_constant() or base.is_zero():
            raise UnsupportedForm(f"negative power of {render(base)}")
        return Poly.const(base.constant_value() ** n)
    result, sq = ONE, base
    while n:
        if n & 1:
            result = result * sq
        n >>= 1
        if n:
            sq = sq * sq
    return result


def canonicalize(e: Expr) -> Poly:
    """Reduce any expression tree to its unique canonical polynomial."""
    if isinstance(e, Poly):
        return e
    if isinstance(e, Atom):
        return Poly.atom(e)
    if isinstance(e, Const):
        return Poly.const(e.value)
    if isinstance(e, Sum):
        acc: dict = {}
        for term in e.terms:
            for m, c in canonicalize(term).terms:
                acc[m] = acc.get(m, 0) + c
        return Poly(acc)
    if isinstance(e, Product):
        result = ONE
        for f in e.factors:
            result = result * canonicalize(f)
        return result
    if isinstance(e, Pow):
        return _poly_pow(canonicalize(e.base), e.exponent)
    if isinstance(e, numbers.Rational) and not isinstance(e, bool):
        return Poly.const(e)
    raise TypeError(f"not an expression: {e!r}")


def struct_equal(a: Expr, b: Expr) -> bool:
    return (canonicalize(as_expr(a)) - canonicalize(as_expr(b))).is_zero()


# -- differentiation ---------------------------------------------------------

def partial_wrt_atom(e: Expr, a: Atom) -> Poly:
    """Derivative treating every atom (fields and their derivatives included) as independent."""
    acc: dict = {}
    for mono, c in canonicalize(e).terms:
        for i, (atom, p) in enumerate(mono):
            if atom == a:
                rest = mono[:i] + (((atom, p - 1),) if p > 1 else ()) + mono[i + 1:]
                acc[rest] = acc.get(rest, 0) + c * p
                break
    return Poly(acc)


def _bump(atom: Atom, idx: int) -> Atom | None:
    if isinstance(atom, FieldComp):
        orders = [0, 0, 0, 0]
        orders[idx] = 1
        return DerivSym(atom.field, atom.comp, tuple(orders))
    if isinstance(atom, DerivSym):
        orders = list(atom.orders)
        orders[idx] += 1
        return DerivSym(atom.field, atom.comp, tuple(orders))
    return None


def total_derivative(e: Expr, wrt: TimeCoord | SpaceCoord) -> Poly:
    """d/dt or d/dx_i, propagating through field atoms by the chain rule."""
    idx = coord_index(wrt)
    acc: dict = {}
    for mono, c in canonicalize(e).terms:
        for i, (atom, p) in enumerate(mono):
            if isinstance(atom, (TimeCoord, SpaceCoord)):
                if atom != wrt:
                    continue
                rest = mono[:i] + (((atom, p - 1),) if p > 1 else ()) + mono[i + 1:]
            else:
                bumped = _bump(atom, idx)
                if bumped is None:
                    continue
                rest = mono[:i] + (((atom, p - 1),) if p > 1 else ()) + mono[i + 1:]
                rest = _mono_mul(rest, ((bumped, 1),))
            acc[rest] = acc.get(rest, 0) + c * p
    return Poly(acc)


# -- substitution and evaluation -------------------------------------------

def substitute(e: Expr, bindings: Mapping[Atom, Expr]) -> Poly:
    """Simultaneous substitution of atoms, followed by canonicalization."""
    repl = {a: canonicalize(as_expr(v)) for a, v in bindings.items()}
    powers: dict = {}

    def power(atom, p):
        key = (atom, p)
        if key not in powers:
            powers[key] = repl[atom] ** p
        return powers[key]

    acc: dict = {}
    for mono, c in canonicalize(e).terms:
        kept = tuple((a, p) for a, p in mono if a not in repl)
        term = Poly({kept: c})
        for a, p in mono:
            if a in repl:
                term = term * power(a, p)
        for m, cc in term.terms:
            acc[m] = acc.get(m, 0) + cc
    return Poly(acc)


def evaluate(e: Expr, val: Mapping[Atom, Any], constants=None):
    """Evaluate at a point (or on numpy arrays, elementwise).

    Each monomial's coefficient is reduced exactly, then converted to float.
    ``ConstSym`` atoms missing from ``val`` are looked up in ``constants``.
    """
    total = 0.0
    for mono, c in canonicalize(e).terms:
        term = float(c)
        for atom, p in mono:
            if atom in val:
                v = val[atom]
            elif isinstance(atom, ConstSym) and constants is not None:
                v = float(constants.value(atom.name))
            else:
                raise MissingBinding(atom)
            term = term * (v if p == 1 else v ** p)
        total = total + term
    return total


# -- rendering --------------------------------------------------------------

def _atom_text(a: Atom, scalars) -> str:
    if isinstance(a, ConstSym):
        return a.name
    if isinstance(a, TimeCoord):
        return "t"
    if isinstance(a, SpaceCoord):
        return f"x{a.axis}"
    base = a.field if (scalars is not None and a.field in scalars) else f"{a.field}[{a.comp}]"
    if isinstance(a, FieldComp):
        return base
    coords = ", ".join(name for name, k in zip(COORD_NAMES, a.orders) for _ in range(k))
    return f"d({base}, {coords})"


def _coef_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def render(e: Expr, scalars=None) -> str:
    """Deterministic text of the canonical form; parses back in the DSL.

    ``scalars`` names the one-component fields, rendered without an index.
    """
    p = canonicalize(e)
    if p.is_zero():
        return "0"
    pieces = []
    for mono, c in p.terms:
        factors = [_atom_text(a, scalars) + (f"^{k}" if k > 1 else "") for a, k in mono]
        if not factors:
            text = _coef_text(c)
        elif c == 1:
            text = "*".join(factors)
        elif c == -1:
            text = "-" + "*".join(factors)
        else:
            text = _coef_text(c) + "*" + "*".join(factors)
        pieces.append(text)
    out = pieces[0]
    for text in pieces[1:]:
        out += " - " + text[1:] if text.startswith("-") else " + " + text
    return out


def atom_to_json(a: Atom) -> dict:
    if isinstance(a, ConstSym):
        return {"type": "const_sym", "name": a.name}
    if isinstance(a, TimeCoord):
        return {"type": "coord", "name": "t"}
    if isinstance(a, SpaceCoord):
        return {"type": "coord", "name": f"x{a.axis}"}
    if isinstance(a, FieldComp):
        return {"type": "field", "field": a.field, "comp": a.comp}
    return {"type": "deriv", "field": a.field, "comp": a.comp,
            "orders": dict(zip(COORD_NAMES, a.orders))}


def to_json(e: Expr) -> dict:
    """JSON tree ``{type, children...}``; a ``Poly`` is written as its sum of products."""
    if isinstance(e, Poly):
        children = []
        for mono, c in e.terms:
            factors = [{"type": "rational", "value": _coef_text(c)}]
            factors += [{"type": "pow", "exponent": k, "children": [atom_to_json(a)]}
                        for a, k in mono]
            children.append({"type": "product", "children": factors})
        return {"type": "sum", "children": children}
    if isinstance(e, Atom):
        return atom_to_json(e)
    if isinstance(e, Const):
        return {"type": "rational", "value": _coef_text(e.value)}
    if isinstance(e, Sum):
        return {"type": "sum", "children": [to_json(t) for t in e.terms]}
    if isinstance(e, Product):
        return {"type": "product", "children": [to_json(f) for f in e.factors]}
    if isinstance(e, Pow):
        return {"type": "pow", "exponent": e.exponent, "children": [to_json(e.base)]}
    raise TypeError(f"not an expression: {e!r}")


def from_json(node: dict) -> Expr:
    kind = node["type"]
    if kind == "rational":
        return Const(Fraction(node["value"]))
    if kind == "const_sym":
        return ConstSym(node["name"])
    if kind == "coord":
        return coord(node["name"])
    if kind == "field":
        return FieldComp(node["field"], node["comp"])
    if kind == "deriv":
        return DerivSym(node["field"], node["comp"],
                        tuple(node["orders"][n] for n in COORD_NAMES))
    children = [from_json(c) for c in node["children"]]
    if kind == "sum":
        return Sum(tuple(children))
    if kind == "product":
        return Product(tuple(children))
    if kind == "pow":
        return Pow(children[0], node["exponent"])
    raise ValueError(f"unknown node type {kind!r}")


# -- constants ----------------------------------------------------------------

DERIVED_CONSTANTS = {"mu0": "1/(eps0*c^2)"}


class ConstantTable:
    """Named constants with optional exact values.

    ``mu0`` is never stored: its value is always 1/(eps0*c^2).
    """

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, Any] | None = None):
        vals = {}
        for name, v in (values or {}).items():
            if name in DERIVED_CONSTANTS and v is not None:
                raise ValueError(f"{name} is derived as {DERIVED_CONSTANTS[name]} and cannot be set")
            vals[name] = None if v is None else _as_fraction(v)
        self._values = vals

    @classmethod
    def builtin(cls) -> ConstantTable:
        return cls({"eps0": None, "c": None, "mu0": None})

    @property
    def names(self) -> tuple:
        return tuple(self._values)

    def __contains__(self, name):
        return name in self._values

    def declared_value(self, name):
        return self._values.get(name)

    def value(self, name: str) -> Fraction:
        if name == "mu0":
            return 1 / (self.value("eps0") * self.value("c") ** 2)
        v = self._values.get(name)
        if v is None:
            raise MissingBinding(ConstSym(name), f"constant {name!r} has no value")
        return v

    def bind(self, **values) -> ConstantTable:
        merged = dict(self._values)
        merged.update(values)
        return ConstantTable(merged)

    def __eq__(self, other):
        return isinstance(other, ConstantTable) and self._values == other._values

    def __repr__(self):
        return f"ConstantTable({self._values!r})"
