"""Electrodynamics in potential form as an executable check.

The Lagrangian ships as ``data/electrodynamics.lag`` and the target equations
as ``data/em_targets.json``.  Targets keep their printed normalization (the
A equations in mu0 form), so each derived equation matches its target only up
to one constant factor, which :func:`match_up_to_constant` recovers and reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from . import vector
from .euler_lagrange import Equation, derive_all
from .parser import LagrangianDef, parse_expression, parse_lagrangian
from .symbolic import (SPACE, ConstSym, DerivSym, FieldComp, Poly, T, ZERO, canonicalize, deriv,
                       partial_wrt_atom, render, struct_equal)

EPS0 = ConstSym("eps0")
C = ConstSym("c")
MU0 = ConstSym("mu0")


def data_text(name: str) -> str:
    return resources.files("varfield").joinpath("data", name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class EmSystem:
    lagrangian: LagrangianDef
    target_equations: tuple
    printed: tuple = ()


def load_targets(doc: dict, L: LagrangianDef) -> tuple[tuple, tuple]:
    eqs, printed = [], []
    for entry in doc["equations"]:
        lhs = parse_expression(entry["lhs"], L)
        eqs.append(Equation(entry["field"], int(entry.get("comp", 1)), canonicalize(lhs)))
        printed.append(entry.get("printed", entry["lhs"]))
    return tuple(eqs), tuple(printed)


def build_em_system(targets: dict | None = None) -> EmSystem:
    L = parse_lagrangian(data_text("electrodynamics.lag"))
    doc = targets if targets is not None else json.loads(data_text("em_targets.json"))
    eqs, printed = load_targets(doc, L)
    return EmSystem(L, eqs, printed)


def reference_density() -> Poly:
    """The EM density built directly from vector operations, bypassing the parser."""
    phi = Poly.atom(FieldComp("phi"))
    A = vector.field_vec("A")
    E, B = potentials_to_fields(phi, A)
    eps0, c = Poly.atom(EPS0), Poly.atom(C)
    rho = Poly.atom(FieldComp("rho"))
    j = vector.field_vec("j")
    return (eps0 * (vector.dot(E, E) - c ** 2 * vector.dot(B, B)) / 2
            - rho * phi + vector.dot(j, A))


def potentials_to_fields(phi, A) -> tuple:
    """E = -grad(phi) - dA/dt and B = curl(A)."""
    E = vector.sub(vector.scale(-1, vector.grad(phi)), vector.dt(A))
    return E, vector.curl(A)


def verify_curl_curl_identity(A=None) -> bool:
    A = vector.field_vec("A") if A is None else tuple(map(canonicalize, A))
    lhs = vector.curl(vector.curl(A))
    rhs = vector.sub(vector.grad(vector.div(A)), tuple(vector.laplacian(a) for a in A))
    return all(struct_equal(a, b) for a, b in zip(lhs, rhs))


def homogeneous_identities() -> dict:
    """Identities of the potential representation, for generic phi and A."""
    phi = Poly.atom(FieldComp("phi"))
    A = vector.field_vec("A")
    E, B = potentials_to_fields(phi, A)
    faraday = vector.add(vector.curl(E), vector.dt(B))
    return {
        "div_B": vector.div(B).is_zero(),
        "curl_E_plus_dt_B": all(c.is_zero() for c in faraday),
        "div_curl": vector.div(vector.curl(A)).is_zero(),
        "curl_grad": all(c.is_zero() for c in vector.curl(vector.grad(phi))),
        "curl_curl": verify_curl_curl_identity(A),
    }


def phi_intermediates(L: LagrangianDef) -> dict:
    """The separate pieces of the phi equation: dL/dphi, dL/dphi_t and dL/dphi_x."""
    dens = L.density
    return {
        "dL/dphi": partial_wrt_atom(dens, FieldComp("phi")),
        "dL/dphi_t": partial_wrt_atom(dens, deriv("phi", 1, T)),
        "dL/dphi_x": tuple(partial_wrt_atom(dens, deriv("phi", 1, x)) for x in SPACE),
    }


# -- matching up to a constant -------------------------------------------------

def _split(mono) -> tuple[dict, tuple]:
    consts = {a.name: p for a, p in mono if isinstance(a, ConstSym)}
    rest = tuple((a, p) for a, p in mono if not isinstance(a, ConstSym))
    return consts, rest


def _monomial(powers: dict) -> Poly:
    out = Poly.const(1)
    for name, p in powers.items():
        if p > 0:
            out = out * Poly.atom(ConstSym(name)) ** p
    return out


def eliminate_mu0(e: Poly) -> tuple[Poly, int]:
    """Return ``(q, m)`` with ``q = e * (eps0*c^2)^m`` free of mu0."""
    m = max((p for mono, _ in e.terms for a, p in mono if a == MU0), default=0)
    out = ZERO
    for mono, coef in e.terms:
        k = sum(p for a, p in mono if a == MU0)
        rest = Poly({tuple((a, p) for a, p in mono if a != MU0): coef})
        out = out + rest * (Poly.atom(EPS0) * Poly.atom(C) ** 2) ** (m - k)
    return out, m


@dataclass(frozen=True)
class ConstantFactor:
    """``coefficient * prod(name^power)``, powers possibly negative."""

    coefficient: Fraction
    powers: dict = field(default_factory=dict)

    def render(self) -> str:
        def power(n, p):
            return n if p == 1 else f"{n}^{p}"
        q = self.coefficient
        num = [power(n, p) for n, p in sorted(self.powers.items()) if p > 0]
        den = [power(n, -p) for n, p in sorted(self.powers.items()) if p < 0]
        if q.denominator != 1:
            den.insert(0, str(q.denominator))
        if abs(q.numerator) != 1 or not num:
            num.insert(0, str(abs(q.numerator)))
        text = ("-" if q < 0 else "") + "*".join(num)
        if den:
            text += "/" + (den[0] if len(den) == 1 else "(" + "*".join(den) + ")")
        return text

    @property
    def positive(self) -> bool:
        return self.coefficient > 0


def match_up_to_constant(derived, target) -> ConstantFactor | None:
    """Find kappa with ``derived == kappa * target`` exactly, or None.

    ``target`` may use mu0; it is cleared by multiplying through by
    ``(eps0*c^2)^m``.  kappa is a signed rational times a product of constant
    symbols, so a positive kappa means the equations agree in sign.
    """
    derived, target = canonicalize(derived), canonicalize(target)
    if derived.is_zero() or target.is_zero():
        return ConstantFactor(Fraction(1)) if derived.is_zero() and target.is_zero() else None
    q, m = eliminate_mu0(target)
    t_mono, t_coef = q.terms[0]
    t_consts, t_rest = _split(t_mono)
    for d_mono, d_coef in derived.terms:
        d_consts, d_rest = _split(d_mono)
        if d_rest == t_rest:
            break
    else:
        return None
    ratio = d_coef / t_coef
    powers = {n: d_consts.get(n, 0) - t_consts.get(n, 0) for n in set(d_consts) | set(t_consts)}
    num = _monomial(powers)
    den = _monomial({n: -p for n, p in powers.items()})
    if derived * den != q * num * ratio:
        return None
    # undo the mu0 clearing: derived = kappa' * q = kappa' * (eps0 c^2)^m * target
    powers["eps0"] = powers.get("eps0", 0) + m
    powers["c"] = powers.get("c", 0) + 2 * m
    return ConstantFactor(ratio, {n: p for n, p in powers.items() if p})


# -- report ----------------------------------------------------------------------

@dataclass(frozen=True)
class EmComparison:
    field: str
    comp: int
    derived: Poly
    target: Poly
    factor: ConstantFactor | None

    @property
    def matched(self) -> bool:
        return self.factor is not None and self.factor.positive

    def label(self, scalars=frozenset()) -> str:
        return self.field if self.field in scalars else f"{self.field}[{self.comp}]"


@dataclass
class EmReport:
    comparisons: list
    identities: dict
    sources_algebraic: bool
    scalars: frozenset = frozenset()

    @property
    def all_matched(self) -> bool:
        return len(self.comparisons) == 4 and all(c.matched for c in self.comparisons)

    @property
    def ok(self) -> bool:
        return self.all_matched and all(self.identities.values()) and self.sources_algebraic

    def to_json(self) -> dict:
        return {
            "equations": [{
                "field": c.field, "comp": c.comp, "matched": c.matched,
                "factor": None if c.factor is None else c.factor.render(),
                "derived": render(c.derived, self.scalars),
                "target": render(c.target, self.scalars),
            } for c in self.comparisons],
            "identities": dict(self.identities),
            "sources_algebraic": self.sources_algebraic,
            "all_matched": self.all_matched,
        }

    def to_text(self, color: bool = False) -> str:
        def mark(ok):
            word = "match" if ok else "MISMATCH"
            if color:
                return f"\033[32m{word}\033[0m" if ok else f"\033[31m{word}\033[0m"
            return word
        rows = [("equation", "status", "derived = factor * target")]
        for c in self.comparisons:
            rows.append((c.label(self.scalars), c.matched, "-" if c.factor is None else c.factor.render()))
        w0 = max(len(r[0]) for r in rows)
        lines = [f"{rows[0][0]:<{w0}}  {rows[0][1]:<8}  {rows[0][2]}"]
        for label, ok, fac in rows[1:]:
            lines.append(f"{label:<{w0}}  {mark(ok):<8}  {fac}")
        lines.append("")
        for name, ok in self.identities.items():
            lines.append(f"identity {name}: {'holds' if ok else 'FAILS'}")
        lines.append(f"sources enter algebraically: {'yes' if self.sources_algebraic else 'NO'}")
        return "\n".join(lines)


def _sources_algebraic(L: LagrangianDef, equations) -> bool:
    sources = {f.name for f in L.fields if f.source}
    return not any(isinstance(a, DerivSym) and a.field in sources
                   for eq in equations for a in eq.lhs.atoms())


def verify_em(system: EmSystem | None = None) -> EmReport:
    system = system or build_em_system()
    L = system.lagrangian
    derived = derive_all(L)
    targets = {(t.field, t.comp): t for t in system.target_equations}
    comparisons = []
    for eq in derived:
        tgt = targets.get((eq.field, eq.comp))
        factor = None if tgt is None else match_up_to_constant(eq.lhs, tgt.lhs)
        comparisons.append(EmComparison(eq.field, eq.comp, eq.lhs,
                                        ZERO if tgt is None else tgt.lhs, factor))
    return EmReport(comparisons, homogeneous_identities(), _sources_algebraic(L, derived),
                    L.scalars)
