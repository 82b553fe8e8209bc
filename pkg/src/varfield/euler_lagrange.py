"""Euler-Lagrange operator for first-order field Lagrangians."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownField
from .parser import LagrangianDef
from .symbolic import (SPACE, T, FieldComp, Poly, canonicalize, deriv, partial_wrt_atom,
                       render, to_json, total_derivative)


@dataclass(frozen=True)
class Equation:
    """The field equation ``lhs = 0`` governing component ``comp`` of ``field``."""

    field: str
    comp: int
    lhs: Poly

    def render(self, scalars=None) -> str:
        return render(self.lhs, scalars)

    def to_json(self, scalars=None) -> dict:
        return {"field": self.field, "comp": self.comp,
                "lhs": self.render(scalars), "lhs_tree": to_json(self.lhs)}


def el_operator(density, field: str, comp: int = 1) -> Poly:
    """dL/dpsi - d/dt dL/d(psi_t) - sum_i d/dx_i dL/d(psi_xi), in that order."""
    density = canonicalize(density)
    lhs = partial_wrt_atom(density, FieldComp(field, comp))
    lhs = lhs - total_derivative(partial_wrt_atom(density, deriv(field, comp, T)), T)
    for x in SPACE:
        lhs = lhs - total_derivative(partial_wrt_atom(density, deriv(field, comp, x)), x)
    return lhs


def derive(L: LagrangianDef, field: str, comp: int = 1) -> Equation:
    try:
        decl = L.decl(field)
    except KeyError:
        raise UnknownField(f"no field {field!r} in the Lagrangian") from None
    if not 1 <= comp <= decl.ncomp:
        raise UnknownField(f"field {field!r} has no component {comp}")
    return Equation(field, comp, el_operator(L.density, field, comp))


def derive_all(L: LagrangianDef) -> list[Equation]:
    """One equation per varied field component, in declaration order."""
    return [derive(L, f.name, k) for f in L.varied for k in range(1, f.ncomp + 1)]
