"""Transformed Lagrangians under x = f(xbar), psi = F(psibar).

The new density is the old one with fields replaced by F(psibar), time
derivatives by d/dt F(psibar), spatial derivatives by the chain rule through
the inverse Jacobian, all multiplied by |det df/dxbar|.  The absolute value is
represented as ``det * det_sign`` with the sign fixed at construction and
checked numerically wherever the density is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import OrientationFlip, SingularMap, UnsupportedForm
from .parser import LagrangianDef, TransformDef
from .symbolic import (SPACE, T, ConstSym, DerivSym, FieldComp, Poly, canonicalize,
                       evaluate, partial_wrt_atom, substitute, total_derivative)

# placeholder for 1/det while a non-constant determinant is being cleared
_INVDET = ConstSym("__invdet__")


@dataclass(frozen=True)
class JacobianMatrix:
    entries: tuple  # entries[i][k] = d f_i / d xbar_k
    det: Poly
    adjugate: tuple  # adjugate . entries == det * I

    @property
    def is_constant(self) -> bool:
        return all(e.is_constant() for row in self.entries for e in row)

    def inverse_entries(self) -> tuple:
        """(J^-1)[k][i] as exact polynomials; requires a constant determinant."""
        if not self.det.is_constant():
            raise UnsupportedForm("inverse Jacobian of a non-constant determinant is not polynomial")
        inv = 1 / self.det.constant_value()
        return tuple(tuple(a * inv for a in row) for row in self.adjugate)


def _det3(m) -> Poly:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _adjugate(m) -> tuple:
    def minor(r, c):
        rows = [i for i in range(3) if i != r]
        cols = [k for k in range(3) if k != c]
        return m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]]
    # adj[k][i] = (-1)^(i+k) * minor(i, k)
    return tuple(tuple(minor(i, k) * (-1) ** (i + k) for i in range(3)) for k in range(3))


def jacobian(T_: TransformDef) -> JacobianMatrix:
    entries = tuple(tuple(total_derivative(f, xb) for xb in SPACE) for f in T_.coord_map)
    det = _det3(entries)
    if det.is_zero():
        raise SingularMap("the Jacobian determinant of the coordinate map is identically zero")
    return JacobianMatrix(entries, det, _adjugate(entries))


def matmul(a, b) -> tuple:
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(3)), Poly())
                       for j in range(3)) for i in range(3))


@dataclass(frozen=True)
class TransformedLagrangian:
    base: LagrangianDef  # density in barred fields and coordinates
    det_sign: int
    jacobian: JacobianMatrix
    transform: TransformDef = dc_field(repr=False)

    @property
    def det_sign_assumption(self) -> str:
        return "positive" if self.det_sign > 0 else "negative"


def _check_polynomial_field_map(L: LagrangianDef, T_: TransformDef):
    for f in L.fields:
        for e in T_.field_components(f.name, f.ncomp):
            for a in e.atoms():
                if not isinstance(a, FieldComp):
                    raise UnsupportedForm(f"field map for {f.name!r} depends on {a!r}")


def transform_lagrangian(L: LagrangianDef, T_: TransformDef, det_sign: int | None = None
                         ) -> TransformedLagrangian:
    J = jacobian(T_)
    _check_polynomial_field_map(L, T_)
    if J.det.is_constant():
        actual = 1 if J.det.constant_value() > 0 else -1
        if det_sign is not None and det_sign != actual:
            raise OrientationFlip(f"determinant is {J.det.constant_value()}, sign {actual} != {det_sign}")
        det_sign = actual
        inv = J.inverse_entries()
    else:
        det_sign = 1 if det_sign is None else det_sign
        inv = tuple(tuple(a * Poly.atom(_INVDET) for a in row) for row in J.adjugate)

    bindings = {}
    for x, f in zip(SPACE, T_.coord_map):
        bindings[x] = f
    for decl in L.fields:
        F = T_.field_components(decl.name, decl.ncomp)
        for j, Fj in enumerate(F, 1):
            bindings[FieldComp(decl.name, j)] = Fj
            bindings[DerivSym(decl.name, j, (1, 0, 0, 0))] = total_derivative(Fj, T)
            dF = [total_derivative(Fj, xb) for xb in SPACE]
            for i in range(3):
                orders = [0, 0, 0, 0]
                orders[i + 1] = 1
                bindings[DerivSym(decl.name, j, tuple(orders))] = sum(
                    (inv[k][i] * dF[k] for k in range(3)), Poly())
    pulled = substitute(L.density, bindings)
    density = _clear_determinant(pulled, J.det) * det_sign
    return TransformedLagrangian(L.with_density(density), det_sign, J, T_)


def _clear_determinant(p: Poly, det: Poly) -> Poly:
    """Multiply by det, cancelling one power of the 1/det placeholder per monomial."""
    if _INVDET not in p.atoms():
        return p * det
    by_power: dict = {}
    for mono, c in p.terms:
        k = dict(mono).get(_INVDET, 0)
        rest = tuple((a, e) for a, e in mono if a != _INVDET)
        by_power.setdefault(k, {})[rest] = c
    if max(by_power) > 1:
        raise UnsupportedForm("the transformed density keeps a negative power of a non-constant "
                              "Jacobian determinant")
    return Poly(by_power.get(0, {})) * det + Poly(by_power.get(1, {}))


def compose(outer: TransformDef, inner: TransformDef) -> TransformDef:
    """``outer`` maps xbar -> x, ``inner`` maps xbarbar -> xbar; result maps xbarbar -> x."""
    coord_bind = {x: f for x, f in zip(SPACE, inner.coord_map)}
    coords = tuple(substitute(f, coord_bind) for f in outer.coord_map)
    names = set(outer.field_map) | set(inner.field_map)
    fields = {}
    for name in sorted(names):
        ncomp = len(outer.field_map.get(name) or inner.field_map[name])
        inner_F = inner.field_components(name, ncomp)
        bind = {FieldComp(name, k): e for k, e in enumerate(inner_F, 1)}
        fields[name] = tuple(substitute(e, bind) for e in outer.field_components(name, ncomp))
    return TransformDef(coords, fields)


# -- inverses and pulled-back solutions ----------------------------------------

def _invert_linear(comps: tuple, name: str) -> tuple:
    """Exact inverse of a linear (no constant term) or affine field map, else None."""
    n = len(comps)
    atoms = [FieldComp(name, k) for k in range(1, n + 1)]
    for e in comps:
        if e.degree() > 1 or any(a not in atoms for a in e.atoms()):
            return None
    M = [[partial_wrt_atom(e, a).constant_value() for a in atoms] for e in comps]
    offset = [substitute(e, {a: 0 for a in atoms}).constant_value() for e in comps]
    inv = _fraction_inverse(M)
    if inv is None:
        return None
    # psibar = M^-1 (psi - offset)
    return tuple(sum((Poly.atom(atoms[k]) * inv[m][k] - inv[m][k] * offset[k] for k in range(n)),
                     Poly()) for m in range(n))


def _fraction_inverse(M):
    n = len(M)
    A = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            return None
        A[col], A[pivot] = A[pivot], A[col]
        pv = A[col][col]
        A[col] = [v / pv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                fac = A[r][col]
                A[r] = [a - fac * b for a, b in zip(A[r], A[col])]
    return [row[n:] for row in A]


def inverse_field_map(T_: TransformDef, name: str, ncomp: int) -> tuple:
    """psibar_m as polynomials in psi, from an exact linear inverse or the declared inverse."""
    comps = T_.field_components(name, ncomp)
    inv = _invert_linear(comps, name)
    if inv is not None:
        return inv
    if T_.inverse is not None and name in T_.inverse.field_map:
        return T_.inverse.field_map[name]
    raise UnsupportedForm(f"field map for {name!r} is not linear and no inverse was declared")


def pull_back(solution: dict, T_: TransformDef) -> dict:
    """Barred field psibar = F^-1(psi o f) for a field given as polynomials in (t, x)."""
    coord_bind = {x: f for x, f in zip(SPACE, T_.coord_map)}
    out = {}
    for name, comps in solution.items():
        composed = [substitute(canonicalize(e), coord_bind) for e in comps]
        finv = inverse_field_map(T_, name, len(comps))
        bind = {FieldComp(name, k): e for k, e in enumerate(composed, 1)}
        out[name] = tuple(substitute(e, bind) for e in finv)
    return out


def axis_aligned_image(T_: TransformDef, box) -> tuple | None:
    """f(box) for maps that send boxes to boxes (affine, one nonzero per Jacobian row)."""
    J = jacobian(T_)
    if not J.is_constant:
        return None
    for row in J.entries:
        if sum(not e.is_zero() for e in row) != 1:
            return None
    image = []
    for f in T_.coord_map:
        ends = []
        for corner in ((lo for lo, _ in box), (hi for _, hi in box)):
            ends.append(float(evaluate(f, dict(zip(SPACE, corner)))))
        image.append((min(ends), max(ends)))
    return tuple(image)


def check_orientation(TL: TransformedLagrangian, pts) -> None:
    """Raise OrientationFlip unless det has the recorded sign at every point."""
    det = evaluate(TL.jacobian.det, dict(zip(SPACE, pts[1:])))
    det = np.asarray(det, dtype=float)
    if np.any(det * TL.det_sign <= 0):
        raise OrientationFlip("Jacobian determinant changes sign or vanishes on the grid; "
                              f"recorded sign is {TL.det_sign:+d}")


# -- numerical equivalence report -----------------------------------------------

@dataclass
class EquivalenceReport:
    """Action agreement and residual correspondence for one (L, T) pair.

    ``action_lhs``/``action_rhs`` are the trapezoidal actions of the transformed
    density over the barred box and of the original density over its image, on
    the finest grid with matching node counts.  ``action_errors_by_h`` compares
    the barred-side action against an independent Gauss-Legendre value over the
    image box.
    """

    det_sign: int
    hs: list
    residual_norms_by_h: list
    convergence_order_estimate: float
    action_lhs: float | None = None
    action_rhs: float | None = None
    rel_err: float | None = None
    action_reference: float | None = None
    action_errors_by_h: list = dc_field(default_factory=list)
    action_order_estimate: float | None = None
    untransformed_residual_norms_by_h: list = dc_field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "action_lhs": self.action_lhs,
            "action_rhs": self.action_rhs,
            "rel_err": self.rel_err,
            "residual_norms_by_h": [[h, r] for h, r in zip(self.hs, self.residual_norms_by_h)],
            "convergence_order_estimate": _finite_or_none(self.convergence_order_estimate),
            "det_sign": self.det_sign,
            "action_reference": self.action_reference,
            "action_errors_by_h": [[h, e] for h, e in zip(self.hs, self.action_errors_by_h)],
            "action_order_estimate": _finite_or_none(self.action_order_estimate),
        }


def _finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)


def el_equivalence_report(L: LagrangianDef, T_: TransformDef, solution: dict, grid,
                          trial: dict | None = None, levels: int = 3,
                          det_sign: int | None = None, constants=None,
                          reference_order: int = 8) -> EquivalenceReport:
    """Compare L over f(box) with the transformed density over the barred box.

    ``solution`` gives every field of ``L`` (sources included) as polynomials in
    the unbarred coordinates and should solve the field equations; its barred
    counterpart, from psi o f = F o psibar, feeds the residual check.  The
    action check uses ``trial`` (default: ``solution``).  ``grid`` spans the
    barred box.
    """
    from . import numeric
    from .euler_lagrange import derive_all

    constants = constants or L.constants
    TL = transform_lagrangian(L, T_, det_sign)
    grids = grid.refinements(levels)
    for g in grids:
        check_orientation(TL, g.points())
    hs = [g.h for g in grids]

    solved = numeric.AnalyticField.from_polys(solution)
    solved_bar = numeric.AnalyticField.from_polys(pull_back(solution, T_))
    trial = solution if trial is None else trial
    plain = numeric.AnalyticField.from_polys(trial)
    barred = numeric.AnalyticField.from_polys(pull_back(trial, T_))
    eqs_bar = derive_all(TL.base)
    residuals = [numeric.system_residual(eqs_bar, g, solved_bar, constants) for g in grids]
    report = EquivalenceReport(TL.det_sign, hs, residuals, numeric.convergence_order(hs, residuals))

    image = axis_aligned_image(T_, grid.box)
    if image is None:
        return report
    eqs = derive_all(L)
    lhs_vals, rhs_vals = [], []
    for g in grids:
        g_img = g.with_box(image)
        lhs_vals.append(numeric.action(TL.base, g, barred, constants))
        rhs_vals.append(numeric.action(L, g_img, plain, constants))
        report.untransformed_residual_norms_by_h.append(
            numeric.system_residual(eqs, g_img, solved, constants))

    def density_on(pts):
        vals = numeric._samples(L.density, plain, pts, None)
        return evaluate(L.density, vals, constants)

    ref = numeric.gauss_legendre_integrate(density_on, (grid.t_range,) + image, reference_order)
    scale = abs(ref) if ref != 0 else 1.0
    report.action_lhs, report.action_rhs = lhs_vals[-1], rhs_vals[-1]
    report.rel_err = abs(lhs_vals[-1] - rhs_vals[-1]) / max(abs(rhs_vals[-1]), 1e-300)
    report.action_reference = ref
    report.action_errors_by_h = [abs(v - ref) / scale for v in lhs_vals]
    report.action_order_estimate = numeric.convergence_order(hs, report.action_errors_by_h)
    return report
