import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import CORPUS, load_lag, load_map
from varfield.errors import OrientationFlip, SingularMap, UnsupportedForm
from varfield.numeric import GridSpec
from varfield.parser import TransformDef, parse_expression, parse_lagrangian, parse_transform
from varfield.symbolic import (SPACE, T, X1, ConstSym, FieldComp, Poly, deriv, struct_equal)
from varfield.transform import (compose, el_equivalence_report, jacobian, matmul, pull_back,
                                transform_lagrangian)

SETTINGS = dict(deadline=None, suppress_health_check=[HealthCheck.too_slow])
psi = Poly.atom(FieldComp("psi"))


def P(a):
    return Poly.atom(a)


def test_identity_jacobian():
    J = jacobian(TransformDef.identity())
    assert J.det == Poly.const(1)
    assert all(J.entries[i][k] == Poly.const(int(i == k)) for i in range(3) for k in range(3))


def test_uniform_scaling_determinant():
    assert jacobian(load_map("scaling.map")).det == Poly.const(8)


def test_singular_map():
    with pytest.raises(SingularMap):
        jacobian(parse_transform("x1 = xb1; x2 = xb1; x3 = xb3"))


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def polynomial_maps(draw, affine=True):
    xs = [P(x) for x in SPACE]
    rows = []
    for _ in range(3):
        e = Poly.const(draw(rationals))
        for x in xs:
            e = e + draw(rationals) * x
        if not affine:
            i, j = draw(st.integers(0, 2)), draw(st.integers(0, 2))
            e = e + draw(rationals) * xs[i] * xs[j]
        rows.append(e)
    return TransformDef(tuple(rows))


def _det_nonzero(T_):
    try:
        jacobian(T_)
        return True
    except SingularMap:
        return False


@settings(max_examples=100, **SETTINGS)
@given(st.one_of(polynomial_maps(), polynomial_maps(affine=False)).filter(_det_nonzero))
def test_adjugate_identity(T_):
    J = jacobian(T_)
    prod = matmul(J.adjugate, J.entries)
    for i in range(3):
        for k in range(3):
            assert prod[i][k] == (J.det if i == k else Poly())


def test_scaling_example_from_hand_chain_rule():
    L = parse_lagrangian("field psi[1]; L = d(psi, x1)^2")
    T_ = parse_transform("x1 = 2*xb1; x2 = 2*xb2; x3 = 2*xb3; psi = psib")
    TL = transform_lagrangian(L, T_)
    assert TL.base.density == 2 * P(deriv("psi", 1, X1)) ** 2
    assert TL.det_sign == 1 and TL.det_sign_assumption == "positive"


def test_field_scaling_example():
    L = parse_lagrangian("field psi[1]; L = psi^2 + dt(psi)^2")
    T_ = parse_transform("x1 = xb1; x2 = xb2; x3 = xb3; psi = 3*psib")
    TL = transform_lagrangian(L, T_)
    assert TL.base.density == 9 * psi ** 2 + 9 * P(deriv("psi", 1, T)) ** 2


def test_wave_under_scaling_map(wave):
    TL = transform_lagrangian(wave, load_map("scaling.map"))
    c = P(ConstSym("c"))
    grads = sum((P(deriv("psi", 1, x)) ** 2 for x in SPACE), Poly())
    # 8 * (9/2 psi_t^2 - c^2 * 9/4 * |grad psi|^2 / 2)
    assert TL.base.density == 36 * P(deriv("psi", 1, T)) ** 2 - 9 * c ** 2 * grads


@pytest.mark.parametrize("name", CORPUS)
def test_identity_is_fixed_point(name):
    L = load_lag(name)
    for T_ in (TransformDef.identity(), load_map("identity.map")):
        TL = transform_lagrangian(L, T_)
        assert struct_equal(TL.base.density, L.density)
        assert TL.base.fields == L.fields


def test_affine_maps_leave_no_residue():
    L = load_lag("vector_wave.lag")
    T_ = parse_transform("x1 = xb1 + 2*xb2 + 1\nx2 = xb2 - xb3\nx3 = 3*xb3 + xb1\n"
                         "u[1] = ub[2]\nu[2] = -ub[1]\nu[3] = 2*ub[3]")
    TL = transform_lagrangian(L, T_)
    assert all(not isinstance(a, ConstSym) or not a.name.startswith("__")
               for a in TL.base.density.atoms())


def test_composition_of_affine_maps(wave):
    outer = parse_transform("x1 = 2*xb1 + xb2\nx2 = xb2 - xb3\nx3 = xb3 + 1\npsi = 3*psib")
    inner = parse_transform("x1 = xb1\nx2 = xb2 + xb1/2\nx3 = 2*xb3 - xb2\npsi = -psib/2")
    twice = transform_lagrangian(transform_lagrangian(wave, outer).base, inner)
    once = transform_lagrangian(wave, compose(outer, inner))
    assert struct_equal(twice.base.density, once.base.density)
    assert twice.det_sign * once.det_sign == 1


@settings(max_examples=25, **SETTINGS)
@given(polynomial_maps().filter(_det_nonzero), polynomial_maps().filter(_det_nonzero),
       rationals.filter(bool), rationals.filter(bool))
def test_composition_property(outer, inner, k1, k2):
    L = load_lag("coupled.lag")
    outer = TransformDef(outer.coord_map, {"psi": (k1 * psi,)})
    inner = TransformDef(inner.coord_map, {"chi": (k2 * P(FieldComp("chi")),), "psi": (k2 * psi,)})
    step1 = transform_lagrangian(L, outer)
    step2 = transform_lagrangian(step1.base, inner)
    direct = transform_lagrangian(L, compose(outer, inner))
    assert struct_equal(step2.base.density, direct.base.density)


def test_reflection_records_negative_sign(wave):
    T_ = parse_transform("x1 = -xb1; x2 = xb2; x3 = xb3")
    TL = transform_lagrangian(wave, T_)
    assert TL.det_sign == -1
    # |det| = 1 and the wave density is even in psi_x1
    assert struct_equal(TL.base.density, wave.density)
    with pytest.raises(OrientationFlip):
        transform_lagrangian(wave, T_, det_sign=1)


def test_non_constant_determinant_cleared_once():
    L = parse_lagrangian("field psi[1]; L = d(psi, x1) + dt(psi)^2")
    T_ = parse_transform("x1 = xb1 + xb1^3/3; x2 = xb2; x3 = xb3")
    TL = transform_lagrangian(L, T_)
    det = 1 + P(X1) ** 2
    assert TL.base.density == P(deriv("psi", 1, X1)) + det * P(deriv("psi", 1, T)) ** 2


def test_non_constant_determinant_squared_is_unsupported(wave):
    T_ = parse_transform("x1 = xb1 + xb1^3/3; x2 = xb2; x3 = xb3")
    with pytest.raises(UnsupportedForm):
        transform_lagrangian(wave, T_)


def test_non_polynomial_field_map_rejected(wave):
    T_ = TransformDef(TransformDef.identity().coord_map, {"psi": (P(X1) * psi,)})
    with pytest.raises(UnsupportedForm):
        transform_lagrangian(wave, T_)


def test_pull_back_under_scaling():
    T_ = load_map("scaling.map")
    sol = {"psi": (parse_expression("(3*x1 + 4*x2 - 5*t)^4"),)}
    bar = pull_back(sol, T_)
    assert bar["psi"][0] == parse_expression("(6*x1 + 8*x2 - 5*t)^4") / 3


def test_transformed_equation_solved_by_pulled_back_solution(wave):
    from varfield.euler_lagrange import derive_all
    from varfield.symbolic import substitute, total_derivative
    T_ = load_map("scaling.map")
    TL = transform_lagrangian(wave, T_)
    (eq,) = derive_all(TL.base)
    bar = pull_back({"psi": (parse_expression("(3*x1 + 4*x2 - 5*t)^4"),)}, T_)["psi"][0]
    # substitute the exact field and its derivatives into the barred equation
    binds = {FieldComp("psi"): bar}
    for a in eq.lhs.atoms():
        if hasattr(a, "orders"):
            e = bar
            for x, k in zip((T,) + SPACE, a.orders):
                for _ in range(k):
                    e = total_derivative(e, x)
            binds[a] = e
    binds[ConstSym("c")] = Poly.const(1)
    assert substitute(eq.lhs, binds).is_zero()


# -- numerical equivalence -------------------------------------------------------------

SOLUTION = {"psi": (parse_expression("(3*x1 + 4*x2 - 5*t)^4"),)}
TRIAL = {"psi": (parse_expression("(x1 - 2*x2 + t)^3 + x3^4 - t^2*x1"),)}


def test_identity_report_is_self_comparison(wave):
    r = el_equivalence_report(wave, TransformDef.identity(), SOLUTION, GridSpec(), trial=TRIAL)
    assert r.rel_err == 0.0
    assert r.residual_norms_by_h == r.untransformed_residual_norms_by_h


def test_scaling_report(wave):
    r = el_equivalence_report(wave, load_map("scaling.map"), SOLUTION, GridSpec(), trial=TRIAL)
    assert r.det_sign == 1
    assert r.rel_err < 1e-12
    assert 1.7 <= r.convergence_order_estimate <= 2.3
    assert 1.7 <= r.action_order_estimate <= 2.3
    doc = json.loads(json.dumps(r.to_json()))
    assert {"action_lhs", "action_rhs", "rel_err", "residual_norms_by_h",
            "convergence_order_estimate", "det_sign"} <= set(doc)
    assert all(len(pair) == 2 for pair in doc["residual_norms_by_h"])


def test_orientation_flip_on_grid():
    L = parse_lagrangian("field psi[1]; L = dt(psi)^2/2")
    T_ = parse_transform("x1 = xb1^3 - xb1; x2 = xb2; x3 = xb3")
    sol = {"psi": (parse_expression("x1 + t"),)}
    with pytest.raises(OrientationFlip):
        el_equivalence_report(L, T_, sol, GridSpec())


def test_check_orientation_accepts_constant_sign(wave):
    from varfield.transform import check_orientation
    TL = transform_lagrangian(wave, load_map("scaling.map"))
    check_orientation(TL, GridSpec().points())
