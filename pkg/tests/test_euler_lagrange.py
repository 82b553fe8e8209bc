import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import load_lag, small_fractions
from varfield.errors import UnknownField
from varfield.euler_lagrange import derive, derive_all, el_operator
from varfield.parser import FieldDecl, LagrangianDef, parse_expression, parse_lagrangian
from varfield.symbolic import (COORDS, SPACE, T, ConstantTable, ConstSym, DerivSym, FieldComp,
                               Poly, canonicalize, deriv, from_json, struct_equal, total_derivative)

FIELDS = ("u", "v")
first_atoms = ([FieldComp(f) for f in FIELDS]
               + [deriv(f, 1, x) for f in FIELDS for x in COORDS]
               + list(COORDS) + [ConstSym("k")])


@st.composite
def first_order_densities(draw):
    """Random polynomial in fields, first derivatives and coordinates."""
    n = draw(st.integers(1, 4))
    out = Poly()
    for _ in range(n):
        coef = draw(small_fractions)
        atoms = draw(st.lists(st.sampled_from(first_atoms), min_size=0, max_size=3))
        term = Poly.const(coef)
        for a in atoms:
            term = term * Poly.atom(a)
        out = out + term
    return out


def _lag(density):
    return LagrangianDef((FieldDecl("u"), FieldDecl("v")), ConstantTable({"k": None}), density)


SETTINGS = dict(deadline=None, suppress_health_check=[HealthCheck.too_slow])


def test_potential_only():
    L = parse_lagrangian("field psi[1]; L = psi^2/2")
    assert derive(L, "psi").lhs == Poly.atom(FieldComp("psi"))


def test_wave_equation(wave):
    (eq,) = derive_all(wave)
    c = Poly.atom(ConstSym("c"))
    want = -Poly.atom(deriv("psi", 1, T, T)) + c ** 2 * sum(
        (Poly.atom(deriv("psi", 1, x, x)) for x in SPACE), Poly())
    assert eq.lhs == want


def test_em_phi_equation(em_lag):
    eq = derive(em_lag, "phi")
    want = parse_expression("-rho - div(eps0*(grad(phi) + dt(A)))", em_lag)
    assert struct_equal(eq.lhs, want)


def test_em_gives_four_equations_in_order(em_lag):
    eqs = derive_all(em_lag)
    assert [(e.field, e.comp) for e in eqs] == [("phi", 1), ("A", 1), ("A", 2), ("A", 3)]


def test_sources_are_not_varied(em_lag):
    assert all(e.field not in ("rho", "j") for e in derive_all(em_lag))


def test_constant_density_gives_zero():
    L = parse_lagrangian("field psi[1]\nfield chi[3]\nconst k\nL = k^2 + 3")
    assert all(e.lhs.is_zero() for e in derive_all(L))


def test_unknown_field_and_component(wave):
    with pytest.raises(UnknownField):
        derive(wave, "chi")
    with pytest.raises(UnknownField):
        derive(wave, "psi", 2)
    with pytest.raises(KeyError):
        derive(wave, "chi")


def test_decoupled_fields_concatenate():
    L1 = "dt(psi)^2/2 - d(psi, x1)^2/2 + psi^3"
    L2 = "d(chi, x2)*d(chi, t) - chi^4"
    both = parse_lagrangian(f"field psi[1]\nfield chi[1]\nL = {L1} + {L2}")
    only1 = parse_lagrangian(f"field psi[1]\nfield chi[1]\nL = {L1}")
    only2 = parse_lagrangian(f"field psi[1]\nfield chi[1]\nL = {L2}")
    got = derive_all(both)
    want = [derive(only1, "psi").lhs, derive(only2, "chi").lhs]
    assert [e.lhs for e in got] == want


def test_equation_json_schema(wave):
    (eq,) = derive_all(wave)
    doc = json.loads(json.dumps(eq.to_json(wave.scalars)))
    assert set(doc) == {"field", "comp", "lhs", "lhs_tree"}
    assert doc["lhs"] == "-d(psi, t, t) + c^2*d(psi, x3, x3) + c^2*d(psi, x2, x2) + c^2*d(psi, x1, x1)"
    assert canonicalize(from_json(doc["lhs_tree"])) == eq.lhs


@settings(max_examples=150, **SETTINGS)
@given(first_order_densities(), first_order_densities(), small_fractions, small_fractions,
       st.sampled_from(FIELDS))
def test_el_operator_is_linear(L1, L2, alpha, beta, f):
    lhs = el_operator(alpha * L1 + beta * L2, f)
    rhs = alpha * el_operator(L1, f) + beta * el_operator(L2, f)
    assert lhs == rhs


@settings(max_examples=150, **SETTINGS)
@given(first_order_densities())
def test_el_output_has_order_at_most_two(density):
    for eq in derive_all(_lag(density)):
        assert all(a.order <= 2 for a in eq.lhs.atoms() if isinstance(a, DerivSym))


@st.composite
def field_polys(draw):
    """G polynomial in fields and coordinates only, no derivative atoms."""
    pool = [FieldComp(f) for f in FIELDS] + list(COORDS)
    n = draw(st.integers(1, 3))
    out = Poly()
    for _ in range(n):
        term = Poly.const(draw(small_fractions))
        for a in draw(st.lists(st.sampled_from(pool), max_size=3)):
            term = term * Poly.atom(a)
        out = out + term
    return out


@settings(max_examples=150, **SETTINGS)
@given(field_polys(), st.sampled_from(COORDS))
def test_null_lagrangian_is_annihilated(G, x):
    density = total_derivative(G, x)
    for eq in derive_all(_lag(density)):
        assert eq.lhs.is_zero()


@settings(max_examples=60, **SETTINGS)
@given(st.lists(field_polys(), min_size=4, max_size=4))
def test_total_divergence_is_annihilated(Gs):
    density = sum((total_derivative(G, x) for G, x in zip(Gs, COORDS)), Poly())
    for eq in derive_all(_lag(density)):
        assert eq.lhs.is_zero()


def test_coupled_corpus_example():
    L = load_lag("coupled.lag")
    eqs = {e.field: e.lhs for e in derive_all(L)}
    want_chi = parse_expression(
        "2*x1*psi*chi - chi^3 - d(chi, t, x2) - d(chi, x2, t)", L)
    assert struct_equal(eqs["chi"], want_chi)
