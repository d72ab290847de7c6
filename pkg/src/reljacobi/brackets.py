"""Noncanonical Poisson brackets on the (X, U) phase space of one or more particles.

A phase point is a flat array ``z`` of length ``8 * n``; particle ``i`` occupies
``z[8i:8i+4]`` (position X^mu) and ``z[8i+4:8i+8]`` (4-velocity U^mu). A bracket
is represented by its Poisson matrix ``J(z)``, with ``J[a, b] = [z_a, z_b]``, so
that ``[f, g] = J[a, b] d_a f d_b g``. Each kind also supplies the analytic
gradient ``dJ[a, b, c] = d_c J[a, b]``, which is what nested brackets need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CapabilityError, NumericError
from .fields import (
    CombinedField,
    DualField,
    FieldTensorField,
    MassField,
    MetricField,
    Minkowski,
    default_step,
)
from .tensor_core import ETA, MetricValue

BRACKET_KINDS = ("flat_EM", "curved", "variable_mass", "monopole", "multiparticle_block", "custom_polynomial")


def x_slice(i: int = 0) -> slice:
    return slice(8 * i, 8 * i + 4)


def u_slice(i: int = 0) -> slice:
    return slice(8 * i + 4, 8 * i + 8)


@dataclass(frozen=True)
class PhasePoint:
    X: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        U = np.array(self.U, dtype=float)
        if X.shape != (4,) or U.shape != (4,):
            raise ValueError("PhasePoint needs 4-component X and U")
        X.flags.writeable = False
        U.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.X, self.U])

    @classmethod
    def from_z(cls, z, particle: int = 0) -> "PhasePoint":
        z = np.asarray(z, float)
        return cls(z[x_slice(particle)], z[u_slice(particle)])

    def norm(self, metric: MetricField | None = None) -> float:
        g = ETA if metric is None else metric.g(self.X)
        return float(self.U @ g @ self.U)

    def is_on_shell(self, metric: MetricField | None = None, tol: float = 1e-10) -> bool:
        return abs(self.norm(metric) - 1.0) <= tol


def _as_z(p) -> np.ndarray:
    if isinstance(p, PhasePoint):
        return p.z
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# bracket specs


class BracketSpec:
    """Basis brackets of one scenario.

    Subclasses implement ``matrix(z)`` and (optionally) ``matrix_grad(z)``.
    Without an analytic gradient, ``grad`` falls back to central differences.
    """

    kind: str = "custom"
    n_particles: int = 1
    metric: MetricField | None = None
    antisymmetric = True

    @property
    def dim(self) -> int:
        return 8 * self.n_particles

    def matrix(self, z) -> np.ndarray:
        raise NotImplementedError

    def matrix_grad(self, z) -> np.ndarray | None:
        return None

    def grad(self, z) -> np.ndarray:
        z = _as_z(z)
        dJ = self.matrix_grad(z)
        if dJ is None:
            dJ = fd_matrix_grad(self.matrix, z)
        return dJ

    @property
    def has_analytic_grad(self) -> bool:
        return type(self).matrix_grad is not BracketSpec.matrix_grad

    def check(self, z) -> None:
        """Raise DomainError if any particle's position is outside the scenario fields' domain."""

    def B_XX(self, p, i: int = 0, j: int = 0) -> np.ndarray:
        return self.matrix(_as_z(p))[x_slice(i), x_slice(j)]

    def B_XU(self, p, i: int = 0, j: int = 0) -> np.ndarray:
        return self.matrix(_as_z(p))[x_slice(i), u_slice(j)]

    def B_UU(self, p, i: int = 0, j: int = 0) -> np.ndarray:
        return self.matrix(_as_z(p))[u_slice(i), u_slice(j)]


def fd_matrix_grad(matrix: Callable, z, h=None) -> np.ndarray:
    z = np.asarray(z, float)
    h = default_step(z) if h is None else np.broadcast_to(h, z.shape)
    cols = []
    for c in range(z.size):
        e = np.zeros_like(z)
        e[c] = h[c]
        cols.append((matrix(z + e) - matrix(z - e)) / (2 * h[c]))
    return np.stack(cols, axis=-1)


def _eta_metric(metric):
    if metric is None:
        return Minkowski("minkowski", {})
    return metric


class FlatEMBracket(BracketSpec):
    """[X,X] = 0, [X,U] = g (constant), [U,U] = (q/m) F(X)."""

    kind = "flat_EM"

    def __init__(self, field: FieldTensorField | None, q_over_m: float = 1.0,
                 metric: MetricField | None = None, kind: str = "flat_EM"):
        self.metric = _eta_metric(metric)
        if not self.metric.is_constant:
            raise ValueError(f"{kind} bracket requires a constant metric; use kind='curved'")
        self.field = field
        self.q_over_m = float(q_over_m)
        self.kind = kind
        self._G = np.linalg.inv(self.metric._jet(np.zeros(4))[0])

    def check(self, z):
        if self.field is not None:
            self.field.check(z[:4])

    def matrix(self, z):
        z = _as_z(z)
        J = np.zeros((8, 8))
        J[:4, 4:] = self._G
        J[4:, :4] = -self._G.T
        if self.field is not None:
            J[4:, 4:] = self.q_over_m * self.field.F(z[:4])
        return J

    def matrix_grad(self, z):
        z = _as_z(z)
        dJ = np.zeros((8, 8, 8))
        if self.field is not None:
            dJ[4:, 4:, :4] = self.q_over_m * self.field.dF(z[:4])
        return dJ


class CurvedBracket(BracketSpec):
    """[X,U] = g^{mn}(X) and the metric-repaired [U,U] that keeps the Jacobi identity.

    ``[U^m, U^n] = g^{ma} g^{nb} g_{bs,a} U^s - (m <-> n) + (q/m) F^{mn}``.
    Setting ``include_metric_terms=False`` drops the repair terms (diagnostic only).
    """

    kind = "curved"

    def __init__(self, metric: MetricField, field: FieldTensorField | None = None,
                 q_over_m: float = 1.0, include_metric_terms: bool = True):
        if metric is None:
            raise ValueError("curved bracket requires a metric field")
        self.metric = metric
        self.field = field
        self.q_over_m = float(q_over_m)
        self.include_metric_terms = include_metric_terms

    def check(self, z):
        self.metric.check(z[:4])
        if self.field is not None:
            self.field.check(z[:4])

    def _coefficient(self, x):
        g, G, dg, dG, d2g = self.metric.inverse_jet(x)
        C = np.einsum("ma,nb,bsa->mns", G, G, dg)
        return G, dG, dg, d2g, C

    def uu_velocity_coefficient(self, x) -> np.ndarray:
        """``D[m, n, s] = d[U^m, U^n] / dU^s`` from the metric terms."""
        _, _, _, _, C = self._coefficient(x)
        return C - C.transpose(1, 0, 2)

    def matrix(self, z):
        z = _as_z(z)
        x, u = z[:4], z[4:]
        J = np.zeros((8, 8))
        if self.include_metric_terms:
            G, _, _, _, C = self._coefficient(x)
            J[4:, 4:] = (C - C.transpose(1, 0, 2)) @ u
        else:
            G = np.linalg.inv(self.metric.g(x))
        J[:4, 4:] = G
        J[4:, :4] = -G.T
        if self.field is not None:
            J[4:, 4:] += self.q_over_m * self.field.F(x)
        return J

    def matrix_grad(self, z):
        z = _as_z(z)
        x, u = z[:4], z[4:]
        G, dG, dg, d2g, C = self._coefficient(x)
        dJ = np.zeros((8, 8, 8))
        dJ[:4, 4:, :4] = dG
        dJ[4:, :4, :4] = -dG.transpose(1, 0, 2)
        if self.include_metric_terms:
            dC = (
                np.einsum("mac,nb,bsa->mnsc", dG, G, dg)
                + np.einsum("ma,nbc,bsa->mnsc", G, dG, dg)
                + np.einsum("ma,nb,bsac->mnsc", G, G, d2g)
            )
            D = C - C.transpose(1, 0, 2)
            dD = dC - dC.transpose(1, 0, 2, 3)
            dJ[4:, 4:, :4] = np.einsum("mnsc,s->mnc", dD, u)
            dJ[4:, 4:, 4:] = D
        if self.field is not None:
            dJ[4:, 4:, :4] += self.q_over_m * self.field.dF(x)
        return dJ


class VariableMassBracket(BracketSpec):
    """[X,U] = g/m(X), [U,U] = (g^{ma} m_{,a} U^n - g^{na} m_{,a} U^m) / m^2, constant metric."""

    kind = "variable_mass"

    def __init__(self, mass: MassField, metric: MetricField | None = None):
        if mass is None:
            raise ValueError("variable_mass bracket requires a mass field")
        self.metric = _eta_metric(metric)
        if not self.metric.is_constant:
            raise ValueError("variable_mass bracket is defined on a constant metric")
        self.mass = mass
        self._G = np.linalg.inv(self.metric._jet(np.zeros(4))[0])

    def check(self, z):
        self.mass.check(z[:4])

    def matrix(self, z):
        z = _as_z(z)
        m, grad, _ = self.mass.jet(z[:4])
        u = z[4:]
        w = self._G @ grad
        J = np.zeros((8, 8))
        J[:4, 4:] = self._G / m
        J[4:, :4] = -self._G.T / m
        J[4:, 4:] = (np.outer(w, u) - np.outer(u, w)) / m**2
        return J

    def matrix_grad(self, z):
        z = _as_z(z)
        m, grad, hess = self.mass.jet(z[:4])
        u = z[4:]
        G = self._G
        w = G @ grad
        dw = G @ hess  # dw[m, c] = d_c w^m
        dJ = np.zeros((8, 8, 8))
        dXU = -np.einsum("mn,c->mnc", G, grad) / m**2
        dJ[:4, 4:, :4] = dXU
        dJ[4:, :4, :4] = -dXU.transpose(1, 0, 2)
        wu = np.outer(w, u) - np.outer(u, w)
        dwu = np.einsum("mc,n->mnc", dw, u) - np.einsum("m,nc->mnc", u, dw)
        dJ[4:, 4:, :4] = dwu / m**2 - 2.0 * np.einsum("mn,c->mnc", wu, grad) / m**3
        eye = np.eye(4)
        dJ[4:, 4:, 4:] = (np.einsum("m,ns->mns", w, eye) - np.einsum("ms,n->mns", eye, w)) / m**2
        return dJ


class MultiparticleBracket(BracketSpec):
    """Block-diagonal bracket: particle i sees ``(1/m_i) sum_I q_iI F_I``; cross brackets vanish."""

    kind = "multiparticle_block"

    def __init__(self, charges: np.ndarray, masses: np.ndarray, fields: list[FieldTensorField],
                 metric: MetricField | None = None):
        charges = np.atleast_2d(np.asarray(charges, float))
        masses = np.asarray(masses, float).reshape(-1)
        if charges.shape[0] != masses.size:
            raise ValueError("one mass per charge-matrix row is required")
        if charges.shape[1] != len(fields):
            raise ValueError(
                f"charge matrix has {charges.shape[1]} species columns but {len(fields)} fields were given"
            )
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        self.metric = _eta_metric(metric)
        if not self.metric.is_constant:
            raise ValueError("multiparticle bracket is defined on a constant metric")
        self.charges, self.masses, self.fields = charges, masses, list(fields)
        self.n_particles = masses.size
        self._G = np.linalg.inv(self.metric._jet(np.zeros(4))[0])
        self.particle_fields = [
            CombinedField([(q / mi, f) for q, f in zip(row, self.fields)], label=f"particle{i}")
            for i, (row, mi) in enumerate(zip(charges, masses))
        ]

    def check(self, z):
        for i, f in enumerate(self.particle_fields):
            f.check(z[x_slice(i)])

    def matrix(self, z):
        z = _as_z(z)
        J = np.zeros((self.dim, self.dim))
        for i, f in enumerate(self.particle_fields):
            xs, us = x_slice(i), u_slice(i)
            J[xs, us] = self._G
            J[us, xs] = -self._G.T
            J[us, us] = f.F(z[xs])
        return J

    def matrix_grad(self, z):
        z = _as_z(z)
        dJ = np.zeros((self.dim, self.dim, self.dim))
        for i, f in enumerate(self.particle_fields):
            xs, us = x_slice(i), u_slice(i)
            dJ[us, us, xs] = f.dF(z[xs])
        return dJ


class PolynomialBracket(BracketSpec):
    """Constant-metric bracket with ``[U^m,U^n] = A^mn + L^{mna} U_a + Q^{mnab} U_a U_b``.

    This kind exists to show how velocity-dependent brackets break the Jacobi
    identity; coefficients are not required to make [U,U] antisymmetric.
    """

    kind = "custom_polynomial"
    antisymmetric = False

    def __init__(self, A=None, L=None, Q=None, metric: MetricField | None = None, analytic_grad: bool = True):
        self.metric = _eta_metric(metric)
        if not self.metric.is_constant:
            raise ValueError("custom_polynomial bracket is defined on a constant metric")
        self._g = self.metric._jet(np.zeros(4))[0]
        self._G = np.linalg.inv(self._g)
        self.A = np.zeros((4, 4)) if A is None else np.asarray(A, float)
        self.L = np.zeros((4, 4, 4)) if L is None else np.asarray(L, float)
        Q = np.zeros((4, 4, 4, 4)) if Q is None else np.asarray(Q, float)
        self.Q = 0.5 * (Q + Q.transpose(0, 1, 3, 2))
        self.analytic_grad = analytic_grad

    def uu(self, u) -> np.ndarray:
        ul = self._g @ u
        return self.A + self.L @ ul + np.einsum("mnab,a,b->mn", self.Q, ul, ul)

    def uu_velocity_derivative(self, u) -> np.ndarray:
        """``d[U^m,U^n]/dU^s`` as an array ``[m, n, s]``."""
        ul = self._g @ u
        return np.einsum("mna,as->mns", self.L + 2.0 * np.einsum("mnab,b->mna", self.Q, ul), self._g)

    def matrix(self, z):
        z = _as_z(z)
        J = np.zeros((8, 8))
        J[:4, 4:] = self._G
        J[4:, :4] = -self._G.T
        J[4:, 4:] = self.uu(z[4:])
        return J

    def matrix_grad(self, z):
        if not self.analytic_grad:
            return None
        z = _as_z(z)
        dJ = np.zeros((8, 8, 8))
        dJ[4:, 4:, 4:] = self.uu_velocity_derivative(z[4:])
        return dJ

    @property
    def has_analytic_grad(self):
        return self.analytic_grad


def build_bracket(kind: str, *, metric: MetricField | None = None, field: FieldTensorField | None = None,
                  q_over_m: float = 1.0, mass: MassField | None = None, charges=None, masses=None,
                  fields: list[FieldTensorField] | None = None, q_e: float = 1.0, q_m: float = 0.0,
                  particle_mass: float = 1.0, A=None, L=None, Q=None) -> BracketSpec:
    """Assemble the basis brackets for a scenario kind.

    ``monopole`` uses ``(q_e F + q_m dual(F)) / particle_mass`` on a constant metric.
    """
    if kind == "flat_EM":
        return FlatEMBracket(field, q_over_m, metric)
    if kind == "curved":
        if metric is None:
            raise ValueError("kind 'curved' requires a metric field")
        return CurvedBracket(metric, field, q_over_m)
    if kind == "variable_mass":
        if mass is None:
            raise ValueError("kind 'variable_mass' requires a mass field")
        return VariableMassBracket(mass, metric)
    if kind == "monopole":
        if field is None:
            raise ValueError("kind 'monopole' requires a field tensor")
        met = _eta_metric(metric)
        mv = MetricValue(met._jet(np.zeros(4))[0])
        combined = CombinedField([(q_e, field), (q_m, DualField(field, mv))], label="monopole")
        return FlatEMBracket(combined, 1.0 / particle_mass, met, kind="monopole")
    if kind == "multiparticle_block":
        if charges is None or masses is None or fields is None:
            raise ValueError("kind 'multiparticle_block' requires charges, masses and fields")
        return MultiparticleBracket(charges, masses, fields, metric)
    if kind == "custom_polynomial":
        return PolynomialBracket(A, L, Q, metric)
    raise ValueError(f"unknown bracket kind {kind!r}; choose from {BRACKET_KINDS}")


# ---------------------------------------------------------------------------
# observables


class Observable:
    """Scalar function on phase space with gradient and (optionally) Hessian.

    ``hess=None`` means no second partials: ``hessian`` raises CapabilityError
    unless ``fd_hessian`` is set, in which case it differences the gradient.
    """

    def __init__(self, value: Callable, grad: Callable, hess: Callable | None = None,
                 name: str = "", fd_hessian: bool = False):
        self._value, self._grad, self._hess = value, grad, hess
        self.name = name
        self.fd_hessian = fd_hessian

    @classmethod
    def from_function(cls, f: Callable, name: str = "") -> "Observable":
        """Wrap a bare function; all partials come from central differences."""

        def grad(z):
            z = np.asarray(z, float)
            h = default_step(z)
            out = np.empty_like(z)
            for c in range(z.size):
                e = np.zeros_like(z)
                e[c] = h[c]
                out[c] = (f(z + e) - f(z - e)) / (2 * h[c])
            return out

        return cls(f, grad, None, name or getattr(f, "__name__", "f"), fd_hessian=True)

    def __call__(self, p) -> float:
        return float(self._value(_as_z(p)))

    def value(self, p) -> float:
        return self(p)

    def grad(self, p) -> np.ndarray:
        return np.asarray(self._grad(_as_z(p)), float)

    def dX(self, p, particle: int = 0) -> np.ndarray:
        return self.grad(p)[x_slice(particle)]

    def dU(self, p, particle: int = 0) -> np.ndarray:
        return self.grad(p)[u_slice(particle)]

    @property
    def has_hessian(self) -> bool:
        return self._hess is not None or self.fd_hessian

    def hessian(self, p) -> np.ndarray:
        z = _as_z(p)
        if self._hess is not None:
            return np.asarray(self._hess(z), float)
        if not self.fd_hessian:
            raise CapabilityError(f"observable {self.name!r} has no second partials")
        return fd_matrix_grad(self._grad, z)

    # arithmetic composition keeps analytic partials where both sides have them

    def _hess_or_none(self):
        if self._hess is not None:
            return self._hess
        if self.fd_hessian:
            return self.hessian
        return None

    def __add__(self, other):
        other = as_observable(other)
        ha, hb = self._hess_or_none(), other._hess_or_none()
        hess = None if ha is None or hb is None else (lambda z: ha(z) + hb(z))
        return Observable(lambda z: self._value(z) + other._value(z),
                          lambda z: self._grad(z) + other._grad(z), hess, f"({self.name}+{other.name})")

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_observable(other))

    def __rsub__(self, other):
        return as_observable(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            h = self._hess_or_none()
            return Observable(lambda z: c * self._value(z), lambda z: c * self._grad(z),
                              None if h is None else (lambda z: c * h(z)), f"{c}*{self.name}")
        other = as_observable(other)
        ha, hb = self._hess_or_none(), other._hess_or_none()

        def hess(z):
            ga, gb = self._grad(z), other._grad(z)
            return (self._value(z) * hb(z) + other._value(z) * ha(z)
                    + np.outer(ga, gb) + np.outer(gb, ga))

        return Observable(
            lambda z: self._value(z) * other._value(z),
            lambda z: self._value(z) * other._grad(z) + other._value(z) * self._grad(z),
            None if ha is None or hb is None else hess,
            f"({self.name}*{other.name})",
        )

    __rmul__ = __mul__


def constant_observable(c: float) -> Observable:
    c = float(c)
    return Observable(lambda z: c, lambda z: np.zeros(np.shape(z)), lambda z: np.zeros((len(z), len(z))), repr(c))


def as_observable(obj) -> Observable:
    if isinstance(obj, Observable):
        return obj
    if np.isscalar(obj):
        return constant_observable(obj)
    raise TypeError(f"cannot use {type(obj).__name__} as an observable")


def coordinate_observable(which: str, index: int, particle: int = 0) -> Observable:
    """Projection onto X^index or U^index of one particle, with exact one-hot partials."""
    if which not in ("X", "U"):
        raise ValueError("which must be 'X' or 'U'")
    if index not in range(4):
        raise ValueError("index must be in 0..3")
    k = 8 * particle + (0 if which == "X" else 4) + index

    def grad(z):
        e = np.zeros(len(z))
        e[k] = 1.0
        return e

    return Observable(lambda z: z[k], grad, lambda z: np.zeros((len(z), len(z))), f"{which}^{index}")


def eval_bracket(f: Observable, g: Observable, spec: BracketSpec, p) -> float:
    """``[f, g] = J[a, b] d_a f d_b g``."""
    z = _as_z(p)
    gf, gg = f.grad(z), g.grad(z)
    if not (np.all(np.isfinite(gf)) and np.all(np.isfinite(gg))):
        raise NumericError("non-finite partials in bracket evaluation")
    val = float(gf @ spec.matrix(z) @ gg)
    if not np.isfinite(val):
        raise NumericError("bracket evaluated to a non-finite value")
    return val


def bracket_as_observable(f: Observable, g: Observable, spec: BracketSpec) -> Observable:
    """``[f, g]`` as an observable; its gradient differentiates through ``J`` and both Hessians."""
    if not (f.has_hessian and g.has_hessian):
        missing = f.name if not f.has_hessian else g.name
        raise CapabilityError(f"observable {missing!r} has no second partials; cannot nest brackets")

    def value(z):
        return f.grad(z) @ spec.matrix(z) @ g.grad(z)

    def grad(z):
        gf, gg = f.grad(z), g.grad(z)
        J, dJ = spec.matrix(z), spec.grad(z)
        return (np.einsum("abc,a,b->c", dJ, gf, gg)
                + f.hessian(z) @ (J @ gg) + g.hessian(z) @ (J.T @ gf))

    return Observable(value, grad, None, f"[{f.name},{g.name}]", fd_hessian=True)


def jacobi_residual(f: Observable, g: Observable, h: Observable, spec: BracketSpec, p) -> float:
    """``[f,[g,h]] + [g,[h,f]] + [h,[f,g]]`` at ``p``.

    This is minus the ``[[a,b],c] + cyclic`` ordering used by ``basis_jacobi_residual``.
    """
    return (eval_bracket(f, bracket_as_observable(g, h, spec), spec, p)
            + eval_bracket(g, bracket_as_observable(h, f, spec), spec, p)
            + eval_bracket(h, bracket_as_observable(f, g, spec), spec, p))
