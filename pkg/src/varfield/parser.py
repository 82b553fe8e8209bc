"""Front end for ``.lag`` (Lagrangian) and ``.map`` (transformation) sources.

Lagrangian grammar (statements separated by newlines or ``;``, ``#`` comments)::

    field NAME[1|3]          varied field
    source NAME[1|3]         prescribed background field, never varied
    const NAME [= number]    named constant; mu0 may not be given a value
    NAME = expr              macro, usable in later statements
    L = expr                 the density (exactly once)

Expressions use ``+ - * / ^`` with ``^`` binding tighter than unary minus,
which binds tighter than ``* /``, then ``+ -``.  Division is only by nonzero
rational constants; exponents are integer constants.  ``v[k]`` selects a
component.  Calls: ``grad(s) div(v) curl(v) dot(u, v) cross(u, v) lap(s)
dt(e) d(e, c1, c2, ...)`` where the ``c`` are coordinates ``t x1 x2 x3``.
``v^2`` on a vector means ``dot(v, v)``.

Map grammar::

    x1 = expr in xb1..xb3          (all three required)
    psi = expr in psib             (scalar field)
    A[k] = expr in Ab[1..3]        (vector field, all three components)
    inverse { xb1 = ...; psib = ...; Ab[k] = ... }   optional

Fields without a line transform as scalar fields (identity map).
Standalone expressions (``parse_expression``) also know ``eps0``, ``c`` and
``mu0``, so targets can be written in mu0 form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable

from . import vector
from .errors import (FirstOrderViolation, MissingComponent, MixedMap, NonConstantDivisor,
                     ParseError, ShapeError, UnknownIdentifier, UnsupportedForm)
from .symbolic import (COORD_NAMES, ConstantTable, ConstSym, DerivSym, FieldComp, Poly,
                       SPACE, SpaceCoord, TimeCoord, canonicalize, coord, render,
                       total_derivative, DERIVED_CONSTANTS)

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<comment>\#[^\n]*) | (?P<nl>\n)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],=;{}])
""", re.VERBOSE)

FUNCTIONS = ("grad", "div", "curl", "dot", "cross", "lap", "dt", "d")
KEYWORDS = ("field", "source", "const", "inverse")
RESERVED = set(COORD_NAMES) | set(FUNCTIONS) | set(KEYWORDS) | {"L"}


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, nl, eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(Token("nl", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _err(cls, msg, tok: Token):
    return cls(msg, tok.line, tok.col)


def _is_vec(v) -> bool:
    return isinstance(v, tuple)


class _ExprParser:
    """Precedence-climbing parser producing ``Poly`` scalars or 3-tuples of them."""

    def __init__(self, tokens: list[Token], resolve: Callable, allow_calls: bool = True):
        self.toks = tokens
        self.i = 0
        self.resolve = resolve
        self.allow_calls = allow_calls
        self.depth = 0

    # newlines are insignificant inside brackets
    def peek(self) -> Token:
        while self.depth and self.toks[self.i].kind == "nl":
            self.i += 1
        return self.toks[self.i]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at_op(self, *ops) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    def expect_op(self, op: str) -> Token:
        tok = self.next()
        if tok.kind != "op" or tok.text != op:
            raise _err(ParseError, f"expected {op!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def expect_name(self) -> Token:
        tok = self.next()
        if tok.kind != "name":
            raise _err(ParseError, f"expected a name, found {tok.text or 'end of input'!r}", tok)
        return tok

    def expect_int(self) -> int:
        tok = self.next()
        if tok.kind != "num" or not tok.text.isdigit():
            raise _err(ParseError, f"expected an integer, found {tok.text!r}", tok)
        return int(tok.text)

    def expression(self):
        left = self.term()
        while self.at_op("+", "-"):
            op = self.next()
            right = self.term()
            left = self._addsub(left, right, op)
        return left

    def term(self):
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.next()
            right = self.unary()
            left = self._mul(left, right, op) if op.text == "*" else self._div(left, right, op)
        return left

    def unary(self):
        if self.at_op("-"):
            self.next()
            v = self.unary()
            return tuple(-c for c in v) if _is_vec(v) else -v
        if self.at_op("+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.postfix()
        if not self.at_op("^"):
            return base
        op = self.next()
        exp = self.unary()
        if _is_vec(exp) or not exp.is_constant():
            raise _err(UnsupportedForm, "exponent must be a constant", op)
        k = exp.constant_value()
        if k.denominator != 1:
            raise _err(UnsupportedForm, f"non-integer exponent {k}", op)
        if _is_vec(base):
            if k != 2:
                raise _err(ShapeError, "only v^2 (= dot(v, v)) is defined for vectors", op)
            return vector.dot(base, base)
        if k < 0 and not base.is_constant():
            raise _err(UnsupportedForm, "negative power of a non-constant", op)
        return base ** int(k)

    def postfix(self):
        v = self.primary()
        while self.at_op("["):
            open_tok = self.next()
            k = self.expect_int()
            self.expect_op("]")
            if not _is_vec(v):
                raise _err(ShapeError, "cannot index a scalar", open_tok)
            if not 1 <= k <= 3:
                raise _err(ShapeError, f"component index {k} out of range 1..3", open_tok)
            v = v[k - 1]
        return v

    def primary(self):
        tok = self.next()
        if tok.kind == "num":
            return Poly.const(Fraction(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.depth += 1
            v = self.expression()
            self.expect_op(")")
            self.depth -= 1
            return v
        if tok.kind == "name":
            if self.at_op("(") and tok.text in FUNCTIONS:
                if not self.allow_calls:
                    raise _err(ParseError, f"{tok.text}() is not allowed here", tok)
                return self.call(tok)
            return self.resolve(tok.text, tok)
        raise _err(ParseError, f"unexpected {tok.text or 'end of input'!r}", tok)

    def call(self, name: Token):
        self.expect_op("(")
        self.depth += 1
        args = []
        if name.text == "d":
            args.append(self.expression())
            coords = []
            while self.at_op(","):
                self.next()
                ctok = self.expect_name()
                if ctok.text not in COORD_NAMES:
                    raise _err(ParseError, f"{ctok.text!r} is not a coordinate", ctok)
                coords.append(coord(ctok.text))
            if not coords:
                raise _err(ShapeError, "d() needs at least one coordinate", name)
        elif not self.at_op(")"):
            args.append(self.expression())
            while self.at_op(","):
                self.next()
                args.append(self.expression())
        self.expect_op(")")
        self.depth -= 1
        fn = name.text

        def need(n, *shapes):
            if len(args) != n:
                raise _err(ShapeError, f"{fn}() takes {n} argument(s), got {len(args)}", name)
            for a, s in zip(args, shapes):
                if s == "vec" and not _is_vec(a):
                    raise _err(ShapeError, f"{fn}() needs a 3-component argument", name)
                if s == "scalar" and _is_vec(a):
                    raise _err(ShapeError, f"{fn}() needs a scalar argument", name)

        if fn == "d":
            v = args[0]
            for c in coords:
                v = tuple(total_derivative(x, c) for x in v) if _is_vec(v) else total_derivative(v, c)
            return v
        if fn == "dt":
            need(1, "any")
            return vector.dt(args[0])
        if fn == "grad":
            need(1, "scalar")
            return vector.grad(args[0])
        if fn == "lap":
            need(1, "scalar")
            return vector.laplacian(args[0])
        if fn == "div":
            need(1, "vec")
            return vector.div(args[0])
        if fn == "curl":
            need(1, "vec")
            return vector.curl(args[0])
        if fn == "dot":
            need(2, "vec", "vec")
            return vector.dot(*args)
        need(2, "vec", "vec")
        return vector.cross(*args)

    def _addsub(self, a, b, op):
        if _is_vec(a) != _is_vec(b):
            raise _err(ShapeError, f"cannot {'add' if op.text == '+' else 'subtract'} scalar and vector", op)
        if _is_vec(a):
            return vector.add(a, b) if op.text == "+" else vector.sub(a, b)
        return a + b if op.text == "+" else a - b

    def _mul(self, a, b, op):
        if _is_vec(a) and _is_vec(b):
            raise _err(ShapeError, "vector * vector is ambiguous; use dot() or cross()", op)
        if _is_vec(a):
            return vector.scale(b, a)
        if _is_vec(b):
            return vector.scale(a, b)
        return a * b

    def _div(self, a, b, op):
        if _is_vec(b) or not b.is_constant() or b.is_zero():
            raise _err(NonConstantDivisor, "division is only by nonzero rational constants", op)
        k = 1 / b.constant_value()
        return vector.scale(Poly.const(k), a) if _is_vec(a) else a * k


# -- Lagrangian sources --------------------------------------------------------

@dataclass(frozen=True)
class FieldDecl:
    name: str
    ncomp: int = 1
    source: bool = False


@dataclass(frozen=True)
class LagrangianDef:
    fields: tuple
    constants: ConstantTable
    density: Poly

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "density", canonicalize(self.density))
        decl = {f.name: f for f in self.fields}
        for a in self.density.atoms():
            if isinstance(a, (FieldComp, DerivSym)):
                f = decl.get(a.field)
                if f is None or a.comp > f.ncomp:
                    raise UnknownIdentifier(f"undeclared field component {a.field}[{a.comp}]")
            if isinstance(a, ConstSym) and a.name not in self.constants:
                raise UnknownIdentifier(f"undeclared constant {a.name!r}")
            if isinstance(a, DerivSym) and a.order > 1:
                raise FirstOrderViolation(
                    f"density contains {render(Poly.atom(a), self.scalars)} of order {a.order}; "
                    "Lagrangians depend on first derivatives only")

    @property
    def scalars(self) -> frozenset:
        return frozenset(f.name for f in self.fields if f.ncomp == 1)

    @property
    def varied(self) -> tuple:
        return tuple(f for f in self.fields if not f.source)

    def decl(self, name: str) -> FieldDecl:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def with_density(self, density) -> LagrangianDef:
        return LagrangianDef(self.fields, self.constants, density)

    def render(self) -> str:
        lines = []
        for f in self.fields:
            lines.append(f"{'source' if f.source else 'field'} {f.name}[{f.ncomp}]")
        for name in self.constants.names:
            v = self.constants.declared_value(name)
            lines.append(f"const {name}" + ("" if v is None else f" = {v}"))
        lines.append(f"L = {render(self.density, self.scalars)}")
        return "\n".join(lines) + "\n"


def _scope_resolver(scope: dict):
    def resolve(name, tok):
        if name in COORD_NAMES:
            return Poly.atom(coord(name))
        if name in scope:
            return scope[name]
        raise _err(UnknownIdentifier, f"unknown identifier {name!r}", tok)
    return resolve


def _field_value(name: str, ncomp: int):
    if ncomp == 1:
        return Poly.atom(FieldComp(name, 1))
    return vector.field_vec(name)


def _end_statement(p: _ExprParser):
    tok = p.peek()
    if tok.kind == "eof":
        return
    if tok.kind == "nl" or (tok.kind == "op" and tok.text == ";"):
        p.next()
        return
    raise _err(ParseError, f"unexpected {tok.text!r} after statement", tok)


def parse_lagrangian(src: str) -> LagrangianDef:
    tokens = tokenize(src)
    scope: dict = {}
    fields: list[FieldDecl] = []
    consts: dict = {}
    density = None
    density_tok = None
    p = _ExprParser(tokens, _scope_resolver(scope))

    def declare(tok: Token):
        if tok.text in RESERVED:
            raise _err(ParseError, f"{tok.text!r} is reserved", tok)
        if tok.text in scope:
            raise _err(ParseError, f"{tok.text!r} is already defined", tok)

    while True:
        tok = p.peek()
        if tok.kind == "eof":
            break
        if tok.kind == "nl" or (tok.kind == "op" and tok.text == ";"):
            p.next()
            continue
        head = p.expect_name()
        if head.text in ("field", "source"):
            name = p.expect_name()
            declare(name)
            ncomp = 1
            if p.at_op("["):
                p.next()
                ncomp = p.expect_int()
                p.expect_op("]")
            if ncomp not in (1, 3):
                raise _err(ShapeError, f"fields have 1 or 3 components, not {ncomp}", name)
            fields.append(FieldDecl(name.text, ncomp, head.text == "source"))
            scope[name.text] = _field_value(name.text, ncomp)
        elif head.text == "const":
            name = p.expect_name()
            declare(name)
            value = None
            if p.at_op("="):
                eq = p.next()
                v = p.expression()
                if _is_vec(v) or not v.is_constant():
                    raise _err(ParseError, "constant values must be rational numbers", eq)
                if name.text in DERIVED_CONSTANTS:
                    raise _err(ParseError, f"{name.text} is derived as "
                               f"{DERIVED_CONSTANTS[name.text]}", eq)
                value = v.constant_value()
            consts[name.text] = value
            scope[name.text] = Poly.atom(ConstSym(name.text))
        else:
            p.expect_op("=")
            value = p.expression()
            if head.text == "L":
                if density is not None:
                    raise _err(ParseError, "L is defined twice", head)
                if _is_vec(value):
                    raise _err(ShapeError, "the density must be a scalar", head)
                density, density_tok = value, head
            else:
                if head.text in RESERVED or head.text in scope:
                    declare(head)
                scope[head.text] = value
        _end_statement(p)

    if density is None:
        last = tokens[-1]
        raise ParseError("no density: expected a statement 'L = ...'", last.line, last.col)
    try:
        return LagrangianDef(tuple(fields), ConstantTable(consts), density)
    except ParseError as exc:
        raise type(exc)(exc.message, density_tok.line, density_tok.col) from None


def parse_expression(src: str, lagrangian: LagrangianDef | None = None):
    """Parse one expression (any derivative order) in the scope of ``lagrangian``."""
    scope = {name: Poly.atom(ConstSym(name)) for name in ConstantTable.builtin().names}
    if lagrangian is not None:
        for f in lagrangian.fields:
            scope[f.name] = _field_value(f.name, f.ncomp)
        for name in lagrangian.constants.names:
            scope[name] = Poly.atom(ConstSym(name))
    p = _ExprParser(tokenize(src), _scope_resolver(scope))
    while p.peek().kind == "nl":
        p.next()
    v = p.expression()
    while p.peek().kind == "nl":
        p.next()
    tok = p.peek()
    if tok.kind != "eof":
        raise _err(ParseError, f"unexpected {tok.text!r}", tok)
    return v


# -- transformation sources ------------------------------------------------

@dataclass(frozen=True)
class TransformDef:
    """``x = f(xbar)`` and ``psi = F(psibar)``.

    ``coord_map[i]`` is a polynomial in ``SpaceCoord`` atoms, read as the barred
    coordinates.  ``field_map[name]`` holds one polynomial per component in
    ``FieldComp`` atoms that carry the *same* field names, read as the barred
    fields.  ``inverse``, if given, has the same layout with the roles swapped.
    """

    coord_map: tuple
    field_map: dict = dc_field(default_factory=dict)
    inverse: TransformDef | None = None

    @classmethod
    def identity(cls) -> TransformDef:
        return cls(tuple(Poly.atom(x) for x in SPACE), {})

    def field_components(self, name: str, ncomp: int) -> tuple:
        comps = self.field_map.get(name)
        if comps is None:
            return tuple(Poly.atom(FieldComp(name, k)) for k in range(1, ncomp + 1))
        if len(comps) != ncomp:
            raise ShapeError(f"map for {name!r} has {len(comps)} components, field has {ncomp}")
        return comps


def _split_map_statements(tokens):
    """Yield (block, lhs_name_tok, index_or_None, rhs_tokens)."""
    i, block = 0, "forward"
    n = len(tokens)

    def skip_seps(i):
        while tokens[i].kind == "nl" or (tokens[i].kind == "op" and tokens[i].text == ";"):
            i += 1
        return i

    while True:
        i = skip_seps(i)
        tok = tokens[i]
        if tok.kind == "eof":
            if block == "inverse":
                raise _err(ParseError, "unterminated inverse block", tok)
            return
        if tok.kind == "op" and tok.text == "}" and block == "inverse":
            block = "done"
            i += 1
            continue
        if tok.kind == "name" and tok.text == "inverse":
            if block != "forward":
                raise _err(ParseError, "only one inverse block is allowed", tok)
            i += 1
            while tokens[i].kind == "nl":
                i += 1
            if not (tokens[i].kind == "op" and tokens[i].text == "{"):
                raise _err(ParseError, "expected '{' after inverse", tokens[i])
            block = "inverse"
            i += 1
            continue
        if block == "done":
            raise _err(ParseError, "statements after the inverse block", tok)
        if tok.kind != "name":
            raise _err(ParseError, f"expected a map target, found {tok.text!r}", tok)
        index = None
        i += 1
        if tokens[i].kind == "op" and tokens[i].text == "[":
            if not (tokens[i + 1].kind == "num" and tokens[i + 1].text.isdigit()):
                raise _err(ParseError, "expected a component index", tokens[i + 1])
            index = int(tokens[i + 1].text)
            if not (tokens[i + 2].kind == "op" and tokens[i + 2].text == "]"):
                raise _err(ParseError, "expected ']'", tokens[i + 2])
            i += 3
        if not (tokens[i].kind == "op" and tokens[i].text == "="):
            raise _err(ParseError, "expected '='", tokens[i])
        i += 1
        start, depth = i, 0
        while i < n:
            t = tokens[i]
            if t.kind == "eof":
                break
            if t.kind == "op" and t.text in "([":
                depth += 1
            elif t.kind == "op" and t.text in ")]":
                depth -= 1
            elif depth == 0 and (t.kind == "nl" or (t.kind == "op" and t.text in ";}")):
                break
            i += 1
        rhs = tokens[start:i] + [Token("eof", "", tokens[i].line, tokens[i].col)]
        if len(rhs) == 1:
            raise _err(ParseError, "missing right-hand side", tokens[i])
        yield block, tok, index, rhs


def _collect_map(stmts, coord_names, field_suffix, rhs_coord_names, rhs_suffix):
    """Evaluate one block of map statements into (coord_map, field_map)."""
    shapes: dict = {}
    for _, tok, index, _ in stmts:
        if tok.text in coord_names:
            continue
        stem = tok.text[: len(tok.text) - len(field_suffix)] if field_suffix else tok.text
        if field_suffix and not tok.text.endswith(field_suffix):
            raise _err(UnknownIdentifier, f"unknown map target {tok.text!r}", tok)
        shapes[stem] = 3 if index is not None else max(shapes.get(stem, 1), 1)

    def resolve(name, tok):
        if name in rhs_coord_names:
            return Poly.atom(SpaceCoord(rhs_coord_names.index(name) + 1))
        if name in COORD_NAMES or name.startswith("xb") and name[2:] in ("1", "2", "3"):
            raise _err(UnknownIdentifier, f"{name!r} cannot appear on this side of the map", tok)
        if rhs_suffix:
            if not name.endswith(rhs_suffix) or len(name) == len(rhs_suffix):
                raise _err(UnknownIdentifier, f"unknown identifier {name!r} "
                           f"(barred fields are written {name}{rhs_suffix})", tok)
            stem = name[: -len(rhs_suffix)]
        else:
            stem = name
        return _field_value(stem, shapes.get(stem, 1))

    coords: dict = {}
    fields: dict = {}
    for _, tok, index, rhs in stmts:
        value = _ExprParser(rhs, resolve, allow_calls=False).expression()
        if isinstance(value, tuple):
            raise _err(ShapeError, "map right-hand sides must be scalars", tok)
        atoms = value.atoms()
        if tok.text in coord_names:
            if index is not None:
                raise _err(ParseError, "coordinates take no index", tok)
            if any(isinstance(a, FieldComp) for a in atoms):
                raise _err(MixedMap, f"coordinate map {tok.text} references field values", tok)
            axis = coord_names.index(tok.text) + 1
            if axis in coords:
                raise _err(ParseError, f"{tok.text} is mapped twice", tok)
            coords[axis] = value
        else:
            if any(isinstance(a, (SpaceCoord, TimeCoord)) for a in atoms):
                raise _err(MixedMap, f"field map {tok.text} references coordinates", tok)
            stem = tok.text[: len(tok.text) - len(field_suffix)] if field_suffix else tok.text
            comps = fields.setdefault(stem, {})
            k = index or 1
            if not 1 <= k <= shapes[stem]:
                raise _err(ShapeError, f"component {k} out of range", tok)
            if k in comps:
                raise _err(ParseError, f"{tok.text}[{k}] is mapped twice", tok)
            comps[k] = value
    return coords, fields, shapes


def parse_transform(src: str) -> TransformDef:
    tokens = tokenize(src)
    stmts = list(_split_map_statements(tokens))
    last = tokens[-1]
    fwd = [s for s in stmts if s[0] == "forward"]
    inv = [s for s in stmts if s[0] != "forward"]

    def build(block, coord_names, field_suffix, rhs_coords, rhs_suffix):
        coords, fields, shapes = _collect_map(block, coord_names, field_suffix, rhs_coords, rhs_suffix)
        for axis in (1, 2, 3):
            if axis not in coords:
                raise MissingComponent(f"no map given for {coord_names[axis - 1]}", last.line, last.col)
        field_map = {}
        for stem, comps in fields.items():
            n = shapes[stem]
            missing = [k for k in range(1, n + 1) if k not in comps]
            if missing:
                raise MissingComponent(f"{stem}{field_suffix}: components {missing} are not mapped",
                                       last.line, last.col)
            field_map[stem] = tuple(comps[k] for k in range(1, n + 1))
        return tuple(coords[a] for a in (1, 2, 3)), field_map

    coords, field_map = build(fwd, ("x1", "x2", "x3"), "", ("xb1", "xb2", "xb3"), "b")
    inverse = None
    if inv:
        icoords, ifields = build(inv, ("xb1", "xb2", "xb3"), "b", ("x1", "x2", "x3"), "")
        inverse = TransformDef(icoords, ifields)
    return TransformDef(coords, field_map, inverse)
