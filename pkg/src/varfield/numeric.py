"""Grid checks of the variational calculus.

Everything is second order: tensor-product trapezoidal quadrature for the
action, and central differences of the exact first-derivative evaluators
wherever an equation needs a second derivative.  Refinement studies
therefore all reduce to one criterion, an observed order near 2.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import GridTooCoarse, MissingBinding, UnsupportedForm
from .euler_lagrange import Equation, derive_all
from .parser import LagrangianDef
from .symbolic import (COORDS, ConstSym, DerivSym, FieldComp, Poly, SpaceCoord, TimeCoord,
                       canonicalize, evaluate, total_derivative)

MIN_NODES = 5


@dataclass(frozen=True)
class GridSpec:
    t_range: tuple = (0.0, 1.0)
    box: tuple = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    n_t: int = 9
    n_x: int = 9

    def __post_init__(self):
        object.__setattr__(self, "t_range", tuple(map(float, self.t_range)))
        object.__setattr__(self, "box", tuple(tuple(map(float, r)) for r in self.box))
        if len(self.box) != 3:
            raise ValueError("box needs three (lo, hi) ranges")
        if self.n_t < MIN_NODES or self.n_x < MIN_NODES:
            raise GridTooCoarse(f"need at least {MIN_NODES} nodes per axis, "
                                f"got n_t={self.n_t}, n_x={self.n_x}")
        for lo, hi in self.ranges:
            if not hi > lo:
                raise ValueError(f"empty range [{lo}, {hi}]")

    @property
    def ranges(self) -> tuple:
        return (self.t_range,) + self.box

    @property
    def counts(self) -> tuple:
        return (self.n_t, self.n_x, self.n_x, self.n_x)

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.ranges, self.counts))

    @property
    def h(self) -> float:
        return max(self.spacing)

    def axes(self) -> list:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.ranges, self.counts)]

    def points(self) -> tuple:
        """Node coordinates as four mutually broadcastable arrays."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij", sparse=True))

    def weights(self) -> list:
        ws = []
        for ax, h in zip(self.axes(), self.spacing):
            w = np.full(ax.shape, h)
            w[0] = w[-1] = h / 2
            ws.append(w)
        return ws

    def refined(self, times: int = 1) -> GridSpec:
        k = 2 ** times
        return GridSpec(self.t_range, self.box, (self.n_t - 1) * k + 1, (self.n_x - 1) * k + 1)

    def refinements(self, levels: int) -> list:
        return [self.refined(k) for k in range(levels)]

    def with_box(self, box) -> GridSpec:
        return GridSpec(self.t_range, box, self.n_t, self.n_x)


def integrate(values, grid: GridSpec) -> float:
    """Trapezoidal rule, contracted axis by axis in a fixed order."""
    v = np.broadcast_to(np.asarray(values, dtype=float), grid.shape)
    for w in grid.weights():
        v = np.tensordot(w, v, axes=([0], [0]))
    return float(v)


def gauss_legendre_integrate(func: Callable, ranges, order: int = 8) -> float:
    """Tensor Gauss-Legendre rule, exact for polynomials of degree < 2*order per axis."""
    nodes, wts = np.polynomial.legendre.leggauss(order)
    axes, weights = [], []
    for lo, hi in ranges:
        axes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * wts)
    pts = tuple(np.meshgrid(*axes, indexing="ij", sparse=True))
    v = np.broadcast_to(np.asarray(func(pts), dtype=float), (order,) * len(ranges))
    for w in weights:
        v = np.tensordot(w, v, axes=([0], [0]))
    return float(v)


# -- fields ------------------------------------------------------------------

def _poly_fn(p: Poly) -> Callable:
    return lambda pts: evaluate(p, dict(zip(COORDS, pts)))


class AnalyticField:
    """Field components and their exact first derivatives as functions of (t, x1, x2, x3).

    ``values[(name, comp)]`` is a callable on the coordinate tuple;
    ``derivatives[(name, comp)][axis]`` is its derivative along axis 0..3.
    """

    def __init__(self, values: Mapping, derivatives: Mapping, polys: Mapping | None = None):
        self.values = dict(values)
        self.derivatives = {k: tuple(v) for k, v in derivatives.items()}
        self.polys = polys

    @classmethod
    def from_polys(cls, polys: Mapping[str, Sequence]) -> AnalyticField:
        values, derivs, clean = {}, {}, {}
        for name, comps in polys.items():
            clean[name] = tuple(canonicalize(e) for e in comps)
            for k, p in enumerate(clean[name], 1):
                bad = [a for a in p.atoms() if not isinstance(a, (TimeCoord, SpaceCoord))]
                if bad:
                    raise UnsupportedForm(f"analytic field {name}[{k}] depends on {bad[0]!r}")
                values[(name, k)] = _poly_fn(p)
                derivs[(name, k)] = [_poly_fn(total_derivative(p, c)) for c in COORDS]
        return cls(values, derivs, clean)

    def has(self, name: str, comp: int) -> bool:
        return (name, comp) in self.values

    def value(self, name, comp, pts):
        try:
            return self.values[(name, comp)](pts)
        except KeyError:
            raise MissingBinding(FieldComp(name, comp)) from None

    def derivative(self, name, comp, axis, pts):
        try:
            return self.derivatives[(name, comp)][axis](pts)
        except KeyError:
            raise MissingBinding(FieldComp(name, comp)) from None

    def max_abs(self, grid: GridSpec, names=None) -> float:
        pts = grid.points()
        m = 0.0
        for (name, comp), fn in self.values.items():
            if names is None or name in names:
                m = max(m, float(np.max(np.abs(np.broadcast_to(fn(pts), grid.shape)))))
        return m


class VariationField(AnalyticField):
    """bubble(t, x) * q(t, x), where the bubble vanishes on the time ends and box faces."""

    @classmethod
    def bump(cls, grid: GridSpec, polys: Mapping[str, Sequence]) -> VariationField:
        ranges = grid.ranges

        def bubble(pts):
            out = 1.0
            for s, (lo, hi) in zip(pts, ranges):
                out = out * ((s - lo) * (hi - s))
            return out

        def bubble_d(axis):
            def fn(pts):
                out = 1.0
                for a, (s, (lo, hi)) in enumerate(zip(pts, ranges)):
                    out = out * ((lo + hi - 2 * s) if a == axis else (s - lo) * (hi - s))
                return out
            return fn

        q = AnalyticField.from_polys(polys)
        values, derivs = {}, {}
        for key, qv in q.values.items():
            qd = q.derivatives[key]
            values[key] = lambda pts, qv=qv: bubble(pts) * qv(pts)
            derivs[key] = [
                (lambda pts, qv=qv, qda=qd[a], bd=bubble_d(a): bd(pts) * qv(pts) + bubble(pts) * qda(pts))
                for a in range(4)
            ]
        field = cls(values, derivs)
        field.grid = grid
        return field

    def boundary_max(self, grid: GridSpec) -> float:
        """Largest |value| over all boundary nodes (exactly 0 for a valid variation)."""
        pts = grid.points()
        worst = 0.0
        for fn in self.values.values():
            v = np.broadcast_to(fn(pts), grid.shape)
            for axis in range(4):
                for end in (0, -1):
                    worst = max(worst, float(np.max(np.abs(np.take(v, end, axis=axis)))))
        return worst


def random_polynomial(rng: np.random.Generator, degree: int, denominator: int = 4,
                      spread: int = 4) -> Poly:
    """Polynomial in (t, x1, x2, x3) with seeded rational coefficients k/denominator."""
    terms = {}
    for exps in itertools.product(range(degree + 1), repeat=4):
        if sum(exps) > degree:
            continue
        k = int(rng.integers(-spread, spread + 1))
        mono = tuple((c, e) for c, e in zip(COORDS, exps) if e)
        terms[mono] = Fraction(k, denominator)
    return Poly(terms)


def random_field(rng, L: LagrangianDef, degree: int, names=None) -> dict:
    out = {}
    for f in L.fields:
        if names is None or f.name in names:
            out[f.name] = tuple(random_polynomial(rng, degree) for _ in range(f.ncomp))
    return out


# -- sampling ----------------------------------------------------------------

def _shift(pts, axis, h):
    moved = list(pts)
    moved[axis] = pts[axis] + h
    return tuple(moved)


def sample_atom(atom, psi: AnalyticField, pts, steps):
    if isinstance(atom, TimeCoord):
        return pts[0]
    if isinstance(atom, SpaceCoord):
        return pts[atom.axis]
    if isinstance(atom, FieldComp):
        return psi.value(atom.field, atom.comp, pts)
    if isinstance(atom, DerivSym):
        axes = [a for a, k in enumerate(atom.orders) for _ in range(k)]
        if len(axes) == 1:
            return psi.derivative(atom.field, atom.comp, axes[0], pts)
        if len(axes) == 2:
            a, b = axes
            h = steps[b]
            fwd = psi.derivative(atom.field, atom.comp, a, _shift(pts, b, h))
            bwd = psi.derivative(atom.field, atom.comp, a, _shift(pts, b, -h))
            return (fwd - bwd) / (2 * h)
        raise UnsupportedForm(f"derivative order {atom.order} is not sampled")
    raise MissingBinding(atom)


def _samples(expr: Poly, psi: AnalyticField, pts, steps, *, fields_only=False, optional=False):
    out = {}
    for a in expr.atoms():
        if isinstance(a, ConstSym):
            continue
        if fields_only and not isinstance(a, (FieldComp, DerivSym)):
            continue
        if optional and isinstance(a, (FieldComp, DerivSym)) and not psi.has(a.field, a.comp):
            continue
        out[a] = sample_atom(a, psi, pts, steps)
    return out


def _combine(base: dict, delta: dict, eps: float) -> dict:
    return {a: (v + eps * delta[a]) if a in delta else v for a, v in base.items()}


# -- the checks ------------------------------------------------------------------

def action(L: LagrangianDef, g: GridSpec, psi: AnalyticField, constants=None) -> float:
    pts = g.points()
    vals = _samples(L.density, psi, pts, g.spacing)
    return integrate(evaluate(L.density, vals, constants or L.constants), g)


def default_eps(L: LagrangianDef, g: GridSpec, psi: AnalyticField) -> float:
    return 1e-5 * (1.0 + psi.max_abs(g, {f.name for f in L.varied}))


def delta_s_direct(L: LagrangianDef, g: GridSpec, psi: AnalyticField, dpsi: AnalyticField,
                   eps: float | None = None, constants=None) -> float:
    """Symmetric difference quotient of the action along dpsi."""
    eps = default_eps(L, g, psi) if eps is None else eps
    constants = constants or L.constants
    pts, steps = g.points(), g.spacing
    base = _samples(L.density, psi, pts, steps)
    delta = _samples(L.density, dpsi, pts, steps, fields_only=True, optional=True)
    plus = integrate(evaluate(L.density, _combine(base, delta, eps), constants), g)
    minus = integrate(evaluate(L.density, _combine(base, delta, -eps), constants), g)
    return (plus - minus) / (2 * eps)


def _el_integrand(equations, psi, dpsi, pts, steps, constants):
    total = 0.0
    for eq in equations:
        if not dpsi.has(eq.field, eq.comp):
            continue
        el = evaluate(eq.lhs, _samples(eq.lhs, psi, pts, steps), constants)
        total = total + el * dpsi.value(eq.field, eq.comp, pts)
    return total


def delta_s_by_parts(L: LagrangianDef, g: GridSpec, psi: AnalyticField, dpsi: AnalyticField,
                     equations: Sequence[Equation] | None = None, constants=None) -> float:
    """Quadrature of sum_j EL_j(psi) * dpsi_j."""
    equations = derive_all(L) if equations is None else equations
    pts = g.points()
    return integrate(_el_integrand(equations, psi, dpsi, pts, g.spacing, constants or L.constants), g)


def residual_values(eq: Equation, g: GridSpec, psi: AnalyticField, constants):
    pts = g.points()
    v = evaluate(eq.lhs, _samples(eq.lhs, psi, pts, g.spacing), constants)
    return np.broadcast_to(np.asarray(v, dtype=float), g.shape)


def residual_norm(eq: Equation, g: GridSpec, psi: AnalyticField, constants=None) -> float:
    """RMS of the equation's left-hand side over interior nodes."""
    v = residual_values(eq, g, psi, constants)
    interior = v[1:-1, 1:-1, 1:-1, 1:-1]
    return float(np.sqrt(np.mean(interior ** 2)))


def system_residual(equations, g: GridSpec, psi: AnalyticField, constants) -> float:
    """RMS over interior nodes and all equations together."""
    sq = [residual_norm(eq, g, psi, constants) ** 2 for eq in equations]
    return math.sqrt(sum(sq) / len(sq)) if sq else 0.0


# -- refinement studies -----------------------------------------------------------

def convergence_order(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h); nan if any error is 0."""
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    if len(hs) < 2 or np.any(errors <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def pairwise_orders(hs, errors) -> list:
    out = [None]
    for i in range(1, len(hs)):
        if errors[i] > 0 and errors[i - 1] > 0:
            out.append(math.log(errors[i - 1] / errors[i]) / math.log(hs[i - 1] / hs[i]))
        else:
            out.append(None)
    return out


@dataclass
class RefinementRow:
    study: str
    h: float
    value: float
    error: float
    estimated_order: float | None


@dataclass
class IbpStudy:
    """delta_s_direct against delta_s_by_parts over a sequence of grids."""

    hs: list
    direct: np.ndarray  # (variations, levels)
    by_parts: np.ndarray
    eps: list
    orders: list = dc_field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.direct - self.by_parts)

    @property
    def rms_errors(self) -> np.ndarray:
        return np.sqrt(np.mean(self.errors ** 2, axis=0))

    @property
    def order(self) -> float:
        return convergence_order(self.hs, self.rms_errors)

    def passed(self, lo=1.7, hi=2.3) -> bool:
        return all(lo <= o <= hi for o in self.orders) and lo <= self.order <= hi

    def rows(self) -> list:
        value = np.sqrt(np.mean(self.direct ** 2, axis=0))
        return [RefinementRow("ibp", h, float(v), float(e), o)
                for h, v, e, o in zip(self.hs, value, self.rms_errors,
                                      pairwise_orders(self.hs, self.rms_errors))]


def ibp_study(L: LagrangianDef, grid: GridSpec, psi: AnalyticField, variation_polys: Sequence,
              levels: int = 3, eps: float | None = None, constants=None) -> IbpStudy:
    """Refinement study of the integration-by-parts identity.

    ``variation_polys`` holds one ``{field: polys}`` mapping per variation; each
    becomes a boundary-vanishing :class:`VariationField` on every grid.
    """
    constants = constants or L.constants
    equations = derive_all(L)
    grids = grid.refinements(levels)
    direct = np.zeros((len(variation_polys), levels))
    by_parts = np.zeros_like(direct)
    eps_used = []
    for j, g in enumerate(grids):
        pts, steps = g.points(), g.spacing
        e = default_eps(L, g, psi) if eps is None else eps
        eps_used.append(e)
        base = _samples(L.density, psi, pts, steps)
        el = {eq: evaluate(eq.lhs, _samples(eq.lhs, psi, pts, steps), constants) for eq in equations}
        for i, polys in enumerate(variation_polys):
            dpsi = VariationField.bump(g, polys)
            delta = _samples(L.density, dpsi, pts, steps, fields_only=True, optional=True)
            plus = integrate(evaluate(L.density, _combine(base, delta, e), constants), g)
            minus = integrate(evaluate(L.density, _combine(base, delta, -e), constants), g)
            direct[i, j] = (plus - minus) / (2 * e)
            integrand = 0.0
            for eq, val in el.items():
                if dpsi.has(eq.field, eq.comp):
                    integrand = integrand + val * dpsi.value(eq.field, eq.comp, pts)
            by_parts[i, j] = integrate(integrand, g)
    hs = [g.h for g in grids]
    study = IbpStudy(hs, direct, by_parts, eps_used)
    study.orders = [convergence_order(hs, row) for row in study.errors]
    return study


def residual_study(equations: Sequence[Equation], grid: GridSpec, psi: AnalyticField,
                   levels: int = 3, constants=None) -> list:
    grids = grid.refinements(levels)
    hs = [g.h for g in grids]
    res = [system_residual(equations, g, psi, constants) for g in grids]
    return [RefinementRow("residual", h, r, r, o) for h, r, o in zip(hs, res, pairwise_orders(hs, res))]


def write_csv(rows: Sequence[RefinementRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["study", "h", "value", "error", "estimated_order"])
    for r in rows:
        w.writerow([r.study, repr(r.h), repr(r.value), repr(r.error),
                    "" if r.estimated_order is None else repr(r.estimated_order)])
