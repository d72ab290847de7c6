import numpy as np
import pytest

from reljacobi.errors import DomainError
from reljacobi.fields import (
    FIELD_PRESETS,
    MASS_PRESETS,
    METRIC_PRESETS,
    POTENTIAL_PRESETS,
    fd_derivative_oracle,
    preset_field,
    preset_mass,
    preset_metric,
    preset_potential,
)
from reljacobi.jacobi import maxwell_residual

FIELD_CASES = [
    ("uniform_EB", {"E": [0.1, -0.2, 0.3], "B": [0.5, 0.0, -1.0]}),
    ("coulomb", {"k": 1.5}),
    ("monopole_B", {"g": 0.8}),
    ("divergent_B", {"s": 1.0}),
    ("from_potential", {"potential": {"preset": "polynomial", "params": {"seed": 4}}}),
    ("custom_polynomial", {"seed": 2}),
]
POTENTIAL_CASES = [
    ("zero", {}),
    ("uniform_B", {"b": 0.7}),
    ("polynomial", {"seed": 5}),
    ("plane_wave", {}),
    ("coulomb", {"k": 2.0}),
    ("gaussian", {}),
]
MASS_CASES = [
    ("constant", {"m": 2.0}),
    ("linear_gradient", {"m0": 2.0, "k": [0, 0.1, 0.2, 0]}),
    ("gaussian_well", {}),
]


def _points(dom, rng, n):
    lo, hi = dom.box
    pts = []
    while len(pts) < n:
        x = rng.uniform(lo, hi)
        if dom.in_domain(x):
            pts.append(x)
    return pts


def _assert_fd_close(analytic, fd, value):
    tol = max(1e-6, 1e-4 * float(np.max(np.abs(value))))
    assert np.max(np.abs(analytic - fd)) <= tol


def test_preset_tables_cover_documented_names():
    assert set(METRIC_PRESETS) == {"minkowski", "spherical_flat", "schwarzschild", "polynomial_perturbation"}
    assert set(FIELD_PRESETS) == {"uniform_EB", "coulomb", "monopole_B", "divergent_B", "from_potential",
                                  "custom_polynomial"}
    assert set(MASS_PRESETS) == {"constant", "linear_gradient", "gaussian_well"}


def test_unknown_presets_rejected():
    for fn in (preset_metric, preset_field, preset_mass, preset_potential):
        with pytest.raises(ValueError):
            fn("no_such_preset", {})


def test_minkowski_values():
    m = preset_metric("minkowski")
    g, dg, d2g = m.jet(np.array([3.0, -1.0, 2.0, 0.5]))
    np.testing.assert_array_equal(g, np.diag([1.0, -1, -1, -1]))
    assert not dg.any() and not d2g.any()


def test_spherical_flat_against_cartesian_transform():
    m = preset_metric("spherical_flat")
    x = np.array([0.0, 2.0, np.pi / 2, 0.0])
    np.testing.assert_allclose(m.g(x), np.diag([1.0, -1, -4, -4]), atol=1e-14)
    # oracle: pull back the Minkowski metric through (t,r,th,ph) -> (t,x,y,z)
    rng = np.random.default_rng(1)
    for x in _points(m, rng, 5):

        def cart(y):
            t, r, th, ph = y
            return np.array([t, r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th)])

        Jac = fd_derivative_oracle(cart, x)
        np.testing.assert_allclose(Jac.T @ np.diag([1.0, -1, -1, -1]) @ Jac, m.g(x), atol=1e-8)


def test_schwarzschild_gtt_and_horizon():
    m = preset_metric("schwarzschild", {"rs": 1.0})
    x = np.array([0.0, 4.0, np.pi / 2, 0.0])
    assert m.g(x)[0, 0] == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(DomainError):
        m.g(np.array([0.0, 0.5, 1.0, 0.0]))
    with pytest.raises(ValueError):
        preset_metric("schwarzschild", {"rs": -1.0})


def test_schwarzschild_fd_derivative_at_r4():
    m = preset_metric("schwarzschild", {"rs": 1.0})
    x = np.array([0.0, 4.0, 1.1, 0.3])
    np.testing.assert_allclose(m.dg(x), fd_derivative_oracle(m, x, h=1e-4), atol=1e-6)


@pytest.mark.parametrize("name", sorted(METRIC_PRESETS))
def test_metric_derivatives_match_fd(name, rng):
    m = preset_metric(name, {})
    for x in _points(m, rng, 50):
        g, dg, d2g = m.jet(x)
        np.testing.assert_array_equal(dg, dg.transpose(1, 0, 2))
        _assert_fd_close(dg, fd_derivative_oracle(m, x), g)
        _assert_fd_close(d2g, fd_derivative_oracle(m.dg, x), dg)


@pytest.mark.parametrize("name,params", FIELD_CASES)
def test_field_derivatives_match_fd(name, params, rng):
    F = preset_field(name, params)
    for x in _points(F, rng, 50):
        val, dF = F.jet(x)
        assert np.array_equal(val, -val.T)
        _assert_fd_close(dF, fd_derivative_oracle(F, x), val)


@pytest.mark.parametrize("name,params", POTENTIAL_CASES)
def test_potential_derivatives_match_fd(name, params, rng):
    A = preset_potential(name, params)
    for x in _points(A, rng, 50):
        a, dA, d2A = A.jet(x)
        _assert_fd_close(dA, fd_derivative_oracle(A, x), a)
        _assert_fd_close(d2A, fd_derivative_oracle(lambda y: A.jet(y)[1], x), dA)


@pytest.mark.parametrize("name,params", MASS_CASES)
def test_mass_derivatives_match_fd(name, params, rng):
    m = preset_mass(name, params)
    for x in _points(m, rng, 50):
        val, grad, hess = m.jet(x)
        assert val > 0
        _assert_fd_close(grad, fd_derivative_oracle(m, x), val)
        _assert_fd_close(hess, fd_derivative_oracle(m.grad, x), grad)


def test_uniform_B_sign_reproduces_lorentz_force():
    b = 0.9
    F = preset_field("uniform_EB", {"E": [0, 0, 0], "B": [0, 0, b]})
    val, dF = F.jet(np.zeros(4))
    assert val[1, 2] == -b
    assert not dF.any()
    # nonrelativistic limit: F^{i nu} U_nu = (E + v x B)^i with U ~ (1, v)
    E, B, v = np.array([0.3, -0.1, 0.2]), np.array([0.5, 1.0, -0.4]), np.array([1e-4, -2e-4, 3e-4])
    F = preset_field("uniform_EB", {"E": E.tolist(), "B": B.tolist()}).F(np.zeros(4))
    U_low = np.diag([1.0, -1, -1, -1]) @ np.concatenate([[1.0], v])
    np.testing.assert_allclose((F @ U_low)[1:], E + np.cross(v, B), atol=1e-15)


def test_from_zero_potential_is_zero(rng):
    F = preset_field("from_potential", {"potential": {"preset": "zero"}})
    for x in _points(F, rng, 5):
        val, dF = F.jet(x)
        assert not val.any() and not dF.any()


@pytest.mark.parametrize("name,params", POTENTIAL_CASES)
def test_potential_fields_satisfy_homogeneous_maxwell(name, params, rng):
    F = preset_field("from_potential", {"potential": {"preset": name, "params": params}})
    for x in _points(F, rng, 20):
        assert np.max(np.abs(maxwell_residual(F, x))) <= 1e-8


def test_monopole_is_solenoidal_off_origin(rng):
    F = preset_field("monopole_B", {"g": 1.0})
    assert np.max(np.abs(maxwell_residual(F, np.array([0.0, 1.0, 1.0, 1.0])))) <= 1e-8
    for x in _points(F, rng, 20):
        assert np.max(np.abs(maxwell_residual(F, x))) <= 1e-8
    with pytest.raises(DomainError):
        F.F(np.zeros(4))


def test_coulomb_origin_is_domain_error():
    with pytest.raises(DomainError):
        preset_field("coulomb", {}).F(np.array([0.0, 0.0, 0.0, 0.0]))


def test_divergent_B_single_independent_component(rng):
    s = 1.0
    F = preset_field("divergent_B", {"s": s})
    for x in _points(F, rng, 20):
        T = maxwell_residual(F, x)
        assert np.max(np.abs(T)) >= 1e-3
        # totally antisymmetric in its three lowered indices: only T_{123} (and permutations) survive
        nz = {tuple(sorted(i)) for i in zip(*np.nonzero(np.abs(T) > 1e-12))}
        assert nz == {(1, 2, 3)}
        assert abs(T[1, 2, 3]) == pytest.approx(3 * s, abs=1e-12)


def test_mass_examples():
    m = preset_mass("constant", {"m": 1.0})
    assert not m.grad(np.array([0.1, 0.2, 0.3, 0.4])).any()
    lin = preset_mass("linear_gradient", {"m0": 2.0, "k": [0, 0.1, 0, 0]})
    val, grad, _ = lin.jet(np.array([0.0, 1.0, 0.0, 0.0]))
    assert val == pytest.approx(2.1)
    np.testing.assert_array_equal(grad, [0, 0.1, 0, 0])
    with pytest.raises(ValueError):
        preset_mass("linear_gradient", {"m0": 0.1, "k": [0, 1.0, 0, 0]})
    with pytest.raises(ValueError):
        preset_mass("constant", {"m": -1.0})


def test_fd_oracle_exactness():
    x = np.array([0.3, -0.2, 0.5, 1.0])
    np.testing.assert_allclose(fd_derivative_oracle(lambda y: 4.2, x), 0.0, atol=1e-12)
    k = np.array([0.5, -1.0, 2.0, 0.25])
    np.testing.assert_allclose(fd_derivative_oracle(lambda y: k @ y + 1.0, x), k, atol=1e-10)
    with pytest.raises(ValueError):
        fd_derivative_oracle(lambda y: 0.0, x, h=-1.0)


def test_fd_oracle_refuses_singular_stencil():
    F = preset_field("coulomb", {})
    with pytest.raises(DomainError):
        fd_derivative_oracle(F, np.array([0.0, 1e-6, 0.0, 0.0]), h=1e-3)
