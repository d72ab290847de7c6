import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_phase_point
from reljacobi.brackets import (
    CurvedBracket,
    FlatEMBracket,
    Observable,
    PhasePoint,
    PolynomialBracket,
    VariableMassBracket,
    bracket_as_observable,
    build_bracket,
    coordinate_observable,
    eval_bracket,
)
from reljacobi.errors import CapabilityError, NumericError
from reljacobi.fields import ETA, preset_field, preset_mass, preset_metric

X = [coordinate_observable("X", i) for i in range(4)]
U = [coordinate_observable("U", i) for i in range(4)]


def _poly_field():
    return preset_field("from_potential", {"potential": {"preset": "polynomial", "params": {"seed": 9}}})


def _specs():
    sph = preset_metric("spherical_flat")
    return [
        FlatEMBracket(_poly_field(), 1.3),
        build_bracket("variable_mass", mass=preset_mass("gaussian_well", {})),
        build_bracket("monopole", field=preset_field("uniform_EB", {"E": [0.1, 0, 0], "B": [0, 0, 1]}),
                      q_e=1.0, q_m=0.5),
        CurvedBracket(preset_metric("minkowski"), _poly_field(), 0.7),
    ], sph


def _smooth_observable(seed):
    # a nonlinear analytic observable: c . z + (a . z)^2 + sin(b . z)
    r = np.random.default_rng(seed)
    a, b, c = r.normal(size=(3, 8))
    value = lambda z: c @ z + (a @ z) ** 2 + np.sin(b @ z)
    grad = lambda z: c + 2 * (a @ z) * a + np.cos(b @ z) * b
    hess = lambda z: 2 * np.outer(a, a) - np.sin(b @ z) * np.outer(b, b)
    return Observable(value, grad, hess, f"obs{seed}")


def test_free_particle_basis_brackets(rng):
    spec = build_bracket("flat_EM", field=None)
    z = random_phase_point(rng)
    np.testing.assert_array_equal(spec.B_UU(z), 0.0)
    np.testing.assert_array_equal(spec.B_XU(z), ETA)
    np.testing.assert_array_equal(spec.B_XX(z), 0.0)


def test_curved_constant_metric_has_no_uu_terms(rng):
    spec = CurvedBracket(preset_metric("minkowski"))
    z = random_phase_point(rng)
    np.testing.assert_array_equal(spec.B_UU(z), 0.0)


def test_variable_mass_constant_mass():
    spec = VariableMassBracket(preset_mass("constant", {"m": 2.0}))
    z = np.array([0, 0.1, 0.2, 0.3, 1.0, 0, 0, 0])
    np.testing.assert_allclose(spec.B_XU(z), ETA / 2)
    np.testing.assert_array_equal(spec.B_UU(z), 0.0)


def test_variable_mass_uu_formula(rng):
    mass = preset_mass("gaussian_well", {})
    spec = VariableMassBracket(mass)
    z = random_phase_point(rng)
    m, grad, _ = mass.jet(z[:4])
    w = ETA @ grad
    expected = (np.outer(w, z[4:]) - np.outer(z[4:], w)) / m**2
    np.testing.assert_allclose(spec.B_UU(z), expected, atol=1e-15)


def test_curved_uu_formula(rng):
    metric = preset_metric("schwarzschild", {"rs": 1.0})
    F = preset_field("from_potential", {"potential": {"preset": "plane_wave"}}, metric=metric)
    spec = CurvedBracket(metric, F, 0.4)
    x = np.array([0.3, 4.5, 1.2, 0.7])
    u = np.array([1.5, 0.1, 0.05, 0.02])
    g, G, dg, _, _ = metric.inverse_jet(x)
    C = np.einsum("ma,nb,bsa,s->mn", G, G, dg, u)
    expected = C - C.T + 0.4 * F.F(x)
    np.testing.assert_allclose(spec.B_UU(np.concatenate([x, u])), expected, atol=1e-13)
    np.testing.assert_allclose(spec.B_XU(np.concatenate([x, u])), G, atol=1e-15)


def test_built_in_kinds_have_zero_xx_and_antisymmetric_uu(rng):
    specs, _ = _specs()
    for spec in specs:
        for _ in range(5):
            z = random_phase_point(rng)
            assert not spec.B_XX(z).any()
            B = spec.B_UU(z)
            np.testing.assert_array_equal(B, -B.T)


def test_missing_field_errors():
    with pytest.raises(ValueError):
        build_bracket("curved")
    with pytest.raises(ValueError):
        build_bracket("variable_mass")
    with pytest.raises(ValueError):
        build_bracket("monopole")
    with pytest.raises(ValueError):
        build_bracket("multiparticle_block", charges=[[1.0]])
    with pytest.raises(ValueError):
        build_bracket("no_such_kind")
    with pytest.raises(ValueError):
        FlatEMBracket(None, 1.0, preset_metric("spherical_flat"))


def test_canonical_coordinate_brackets(rng):
    spec = FlatEMBracket(None)
    z = random_phase_point(rng)
    assert eval_bracket(X[0], U[0], spec, z) == 1.0
    assert eval_bracket(X[1], U[1], spec, z) == -1.0


def test_uu_lookup_uniform_bz():
    b, qm = 0.6, 2.5
    spec = FlatEMBracket(preset_field("uniform_EB", {"E": [0, 0, 0], "B": [0, 0, b]}), qm)
    z = np.array([0, 0, 0, 0, 1.0, 0, 0, 0])
    assert eval_bracket(U[1], U[2], spec, z) == pytest.approx(qm * -b, abs=1e-15)


def test_coordinate_observable_partials():
    z = np.array([1.0, 2, 3, 4, 1.2, 0.1, 0.2, 0.3])
    assert X[2](z) == 3.0
    np.testing.assert_array_equal(X[2].dU(z), 0.0)
    np.testing.assert_array_equal(U[2].dU(z), [0, 0, 1, 0])
    with pytest.raises(ValueError):
        coordinate_observable("Y", 0)
    with pytest.raises(ValueError):
        coordinate_observable("X", 4)


def test_bracket_properties_random(rng):
    specs, _ = _specs()
    f, g, h = (_smooth_observable(s) for s in (1, 2, 3))
    for spec in specs:
        for _ in range(5):
            z = random_phase_point(rng)
            assert eval_bracket(f, f, spec, z) == pytest.approx(0.0, abs=1e-12)
            assert eval_bracket(f, g, spec, z) == pytest.approx(-eval_bracket(g, f, spec, z), abs=1e-12)
            lin = eval_bracket(2.0 * f + (-3.0) * g, h, spec, z)
            assert lin == pytest.approx(2 * eval_bracket(f, h, spec, z) - 3 * eval_bracket(g, h, spec, z), abs=1e-10)
            leib = eval_bracket(f * g, h, spec, z)
            rhs = f(z) * eval_bracket(g, h, spec, z) + eval_bracket(f, h, spec, z) * g(z)
            assert leib == pytest.approx(rhs, abs=1e-8 * (1 + abs(rhs)))


def test_coordinate_brackets_reproduce_matrix(rng):
    specs, _ = _specs()
    for spec in specs:
        z = random_phase_point(rng)
        J = spec.matrix(z)
        coords = X + U
        for a in range(8):
            for b in range(8):
                assert eval_bracket(coords[a], coords[b], spec, z) == J[a, b]


def test_nested_observable_examples(rng):
    spec = FlatEMBracket(_poly_field(), 1.1)
    z = random_phase_point(rng)
    xx = bracket_as_observable(X[0], X[1], spec)
    assert xx(z) == 0.0 and not xx.grad(z).any()
    xu = bracket_as_observable(X[1], U[1], spec)
    assert xu(z) == -1.0 and not xu.grad(z).any()
    uu = bracket_as_observable(U[1], U[2], spec)
    fd = Observable.from_function(lambda zz: eval_bracket(U[1], U[2], spec, zz)).grad(z)
    np.testing.assert_allclose(uu.grad(z), fd, atol=1e-6)


def test_nesting_requires_second_partials():
    spec = FlatEMBracket(None)
    no_hess = Observable(lambda z: z[0], lambda z: np.eye(8)[0], None, "bare")
    with pytest.raises(CapabilityError):
        bracket_as_observable(no_hess, U[0], spec)
    with pytest.raises(CapabilityError):
        no_hess.hessian(np.zeros(8))


def test_non_finite_partials_raise():
    spec = FlatEMBracket(None)
    bad = Observable(lambda z: np.nan, lambda z: np.full(8, np.nan), None, "nan")
    with pytest.raises(NumericError):
        eval_bracket(bad, U[0], spec, np.zeros(8))


def test_product_observable_hessian_matches_fd(rng):
    f, g = _smooth_observable(4), _smooth_observable(5)
    z = random_phase_point(rng)
    prod = f * g + 3.0
    fd = Observable.from_function(lambda zz: prod(zz)).hessian(z)
    np.testing.assert_allclose(prod.hessian(z), fd, atol=1e-5)


def test_phase_point_shell():
    p = PhasePoint(np.zeros(4), np.array([1.0, 0, 0, 0]))
    assert p.is_on_shell()
    assert not PhasePoint(np.zeros(4), np.array([1.0, 0.5, 0, 0])).is_on_shell()
    np.testing.assert_array_equal(PhasePoint.from_z(p.z).U, p.U)
    with pytest.raises(ValueError):
        PhasePoint(np.zeros(3), np.zeros(4))


def test_polynomial_analytic_grad_matches_fd(rng):
    r = np.random.default_rng(0)
    spec = PolynomialBracket(r.normal(size=(4, 4)), r.normal(size=(4, 4, 4)), r.normal(size=(4, 4, 4, 4)))
    fd_spec = PolynomialBracket(spec.A, spec.L, spec.Q, analytic_grad=False)
    z = random_phase_point(rng)
    np.testing.assert_allclose(spec.grad(z), fd_spec.grad(z), atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_charge_scaling_is_linear(q1, q2):
    F = preset_field("uniform_EB", {"E": [0.2, 0.1, -0.3], "B": [0.4, -0.5, 1.0]})
    z = np.array([0, 0, 0, 0, 1.0, 0, 0, 0])
    a = FlatEMBracket(F, q1).B_UU(z)
    b = FlatEMBracket(F, q2).B_UU(z)
    c = FlatEMBracket(F, q1 + q2).B_UU(z)
    np.testing.assert_allclose(a + b, c, atol=1e-12)
