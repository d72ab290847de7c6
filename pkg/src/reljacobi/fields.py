"""Spacetime-dependent inputs with analytic derivatives.

Derivative arrays always put the differentiation index last:

* metric ``dg[b, s, a] = d_a g_bs`` and ``d2g[b, s, a, c] = d_c d_a g_bs``
* field tensor ``dF[m, n, l] = d_l F^mn``
* potential ``dA[m, n] = d_n A^m`` and ``d2A[m, n, c] = d_c d_n A^m``
* mass ``grad[a] = d_a m`` and ``hess[a, c] = d_c d_a m``

Field tensors use the convention ``F^{i0} = E^i`` and ``F^{ij} = -eps_ijk B^k``,
which is what ``F^{mu nu} = d^mu A^nu - d^nu A^mu`` gives for ``A = (phi, A_vec)``
and which makes ``dU/dtau = (q/m) F U`` reduce to ``q(E + v x B)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError
from .tensor_core import DOWN, ETA, UP, MetricValue, Tensor, hodge_dual

EPS3 = np.zeros((3, 3, 3))
EPS3[0, 1, 2] = EPS3[1, 2, 0] = EPS3[2, 0, 1] = 1.0
EPS3[0, 2, 1] = EPS3[2, 1, 0] = EPS3[1, 0, 2] = -1.0

DEFAULT_EXCLUSION = 1e-3
_CART_BOX = (np.full(4, -2.0), np.full(4, 2.0))


def _point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValueError(f"spacetime point must have 4 components, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("spacetime point is not finite")
    return x


def _box(box, default):
    if box is None:
        lo, hi = default
    else:
        lo, hi = box
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if lo.shape != (4,) or hi.shape != (4,) or np.any(hi <= lo):
        raise ValueError("domain box must be a nonempty (lower[4], upper[4]) pair")
    return lo, hi


class _Domain:
    """Mixin: declared sampling box plus a singular set checked on every evaluation."""

    box: tuple
    exclusion: float = DEFAULT_EXCLUSION

    def singular_reason(self, x) -> str | None:
        return None

    def check(self, x) -> np.ndarray:
        x = _point(x)
        reason = self.singular_reason(x)
        if reason is not None:
            raise DomainError(f"{self.name}: {reason} at X={x.tolist()}")
        return x

    def in_domain(self, x) -> bool:
        try:
            self.check(x)
        except DomainError:
            return False
        return True


# ---------------------------------------------------------------------------
# metrics


class MetricField(_Domain):
    """Metric g_{mu nu}(X) with analytic first and second derivatives."""

    is_constant = False

    def __init__(self, name: str, params: dict, box=None, exclusion=DEFAULT_EXCLUSION):
        self.name = name
        self.params = dict(params)
        self.box = _box(box, self.default_box)
        self.exclusion = float(exclusion)

    default_box = _CART_BOX

    def _jet(self, x):
        raise NotImplementedError

    def jet(self, x):
        """Return ``(g, dg, d2g)`` at ``x``."""
        return self._jet(self.check(x))

    def g(self, x):
        return self.jet(x)[0]

    def dg(self, x):
        return self.jet(x)[1]

    def d2g(self, x):
        return self.jet(x)[2]

    def inverse_jet(self, x):
        """Return ``(g, g_inv, dg, dg_inv, d2g)``; ``dg_inv[m, n, c] = d_c g^mn``."""
        g, dg, d2g = self.jet(x)
        G = np.linalg.inv(g)
        dG = -np.einsum("ma,abc,bn->mnc", G, dg, G)
        return g, G, dg, dG, d2g

    def value(self, x) -> MetricValue:
        g = self.g(x)
        try:
            return MetricValue(g)
        except ValueError as exc:
            raise DomainError(f"{self.name}: {exc}") from exc

    def deriv(self, x) -> Tensor:
        return Tensor(self.dg(x), (DOWN, DOWN, DOWN))


class Minkowski(MetricField):
    is_constant = True

    def _jet(self, x):
        return ETA.copy(), np.zeros((4, 4, 4)), np.zeros((4, 4, 4, 4))


class _SphericalBase(MetricField):
    # coordinates (t, r, theta, phi)
    def singular_reason(self, x):
        if abs(np.sin(x[2])) < self.exclusion:
            return "coordinate singularity on the polar axis"
        return None


class SphericalFlat(_SphericalBase):
    default_box = (np.array([0.0, 1.0, 0.4, 0.0]), np.array([1.0, 5.0, np.pi - 0.4, 2 * np.pi]))

    def singular_reason(self, x):
        if x[1] <= self.exclusion:
            return "coordinate singularity at r = 0"
        return super().singular_reason(x)

    def _jet(self, x):
        r, th = x[1], x[2]
        s, c = np.sin(th), np.cos(th)
        g = np.diag([1.0, -1.0, -r * r, -r * r * s * s])
        dg = np.zeros((4, 4, 4))
        dg[2, 2, 1] = -2 * r
        dg[3, 3, 1] = -2 * r * s * s
        dg[3, 3, 2] = -2 * r * r * s * c
        d2g = np.zeros((4, 4, 4, 4))
        d2g[2, 2, 1, 1] = -2.0
        d2g[3, 3, 1, 1] = -2 * s * s
        d2g[3, 3, 1, 2] = d2g[3, 3, 2, 1] = -4 * r * s * c
        d2g[3, 3, 2, 2] = -2 * r * r * (c * c - s * s)
        return g, dg, d2g


class Schwarzschild(_SphericalBase):
    def __init__(self, name, params, box=None, exclusion=DEFAULT_EXCLUSION):
        rs = float(params.get("rs", 1.0))
        if not rs > 0:
            raise ValueError("schwarzschild radius rs must be > 0")
        self.rs = rs
        self.default_box = (
            np.array([0.0, 3.0 * rs, 0.4, 0.0]),
            np.array([1.0, 10.0 * rs, np.pi - 0.4, 2 * np.pi]),
        )
        super().__init__(name, {"rs": rs}, box, exclusion)

    def singular_reason(self, x):
        if x[1] <= self.rs * (1.0 + self.exclusion):
            return f"inside or on the horizon r <= rs={self.rs}"
        return super().singular_reason(x)

    def _jet(self, x):
        rs, r, th = self.rs, x[1], x[2]
        s, c = np.sin(th), np.cos(th)
        f = 1.0 - rs / r
        f1 = rs / r**2
        f2 = -2.0 * rs / r**3
        g = np.diag([f, -1.0 / f, -r * r, -r * r * s * s])
        dg = np.zeros((4, 4, 4))
        dg[0, 0, 1] = f1
        dg[1, 1, 1] = f1 / f**2
        dg[2, 2, 1] = -2 * r
        dg[3, 3, 1] = -2 * r * s * s
        dg[3, 3, 2] = -2 * r * r * s * c
        d2g = np.zeros((4, 4, 4, 4))
        d2g[0, 0, 1, 1] = f2
        d2g[1, 1, 1, 1] = f2 / f**2 - 2 * f1**2 / f**3
        d2g[2, 2, 1, 1] = -2.0
        d2g[3, 3, 1, 1] = -2 * s * s
        d2g[3, 3, 1, 2] = d2g[3, 3, 2, 1] = -4 * r * s * c
        d2g[3, 3, 2, 2] = -2 * r * r * (c * c - s * s)
        return g, dg, d2g


class PolynomialPerturbation(MetricField):
    """``g = eta + eps * (b_{mn a} x^a + a_{mn ab} x^a x^b)`` with seeded random coefficients."""

    default_box = (np.full(4, -1.0), np.full(4, 1.0))

    def __init__(self, name, params, box=None, exclusion=DEFAULT_EXCLUSION):
        eps = float(params.get("eps", 0.05))
        seed = int(params.get("seed", 0))
        rng = np.random.default_rng(seed)
        lin = np.asarray(params["linear"], float) if "linear" in params else rng.normal(size=(4, 4, 4))
        quad = np.asarray(params["quadratic"], float) if "quadratic" in params else rng.normal(size=(4, 4, 4, 4))
        lin = 0.5 * (lin + lin.transpose(1, 0, 2))
        quad = 0.5 * (quad + quad.transpose(1, 0, 2, 3))
        quad = 0.5 * (quad + quad.transpose(0, 1, 3, 2))
        self.eps, self.lin, self.quad = eps, lin, quad
        super().__init__(name, {"eps": eps, "seed": seed}, box, exclusion)

    def _jet(self, x):
        e = self.eps
        g = ETA + e * (self.lin @ x + np.einsum("mnab,a,b->mn", self.quad, x, x))
        dg = e * (self.lin + 2.0 * np.einsum("mnab,b->mna", self.quad, x))
        d2g = 2.0 * e * self.quad
        return g, dg, d2g


METRIC_PRESETS = {
    "minkowski": Minkowski,
    "spherical_flat": SphericalFlat,
    "schwarzschild": Schwarzschild,
    "polynomial_perturbation": PolynomialPerturbation,
}


def preset_metric(name: str, params: dict | None = None, box=None, exclusion=DEFAULT_EXCLUSION) -> MetricField:
    if name not in METRIC_PRESETS:
        raise ValueError(f"unknown metric preset {name!r}; choose from {sorted(METRIC_PRESETS)}")
    return METRIC_PRESETS[name](name, params or {}, box, exclusion)


# ---------------------------------------------------------------------------
# field tensors


def eb_to_tensor(E, B) -> np.ndarray:
    E, B = np.asarray(E, float), np.asarray(B, float)
    F = np.zeros((4, 4))
    F[1:, 0] = E
    F[0, 1:] = -E
    F[1:, 1:] = -np.einsum("ijk,k->ij", EPS3, B)
    return F


def eb_jacobian_to_dtensor(dE, dB) -> np.ndarray:
    """Spatial Jacobians ``dE[i, j] = d_j E^i`` (same for B) to ``dF[m, n, l]``."""
    dF = np.zeros((4, 4, 4))
    dF[1:, 0, 1:] = dE
    dF[0, 1:, 1:] = -dE
    dF[1:, 1:, 1:] = -np.einsum("ijk,kl->ijl", EPS3, dB)
    return dF


class FieldTensorField(_Domain):
    """Antisymmetric F^{mu nu}(X) with analytic first derivatives."""

    is_uniform = False
    default_box = _CART_BOX

    def __init__(self, name: str, params: dict, label: str = "em", box=None, exclusion=DEFAULT_EXCLUSION):
        self.name = name
        self.params = dict(params)
        self.label = label
        self.box = _box(box, self.default_box)
        self.exclusion = float(exclusion)

    def _jet(self, x):
        raise NotImplementedError

    def jet(self, x):
        """Return ``(F, dF)`` at ``x``."""
        return self._jet(self.check(x))

    def F(self, x):
        return self.jet(x)[0]

    def dF(self, x):
        return self.jet(x)[1]

    def value(self, x) -> Tensor:
        return Tensor(self.F(x), (UP, UP), "antisymmetric")

    def deriv(self, x) -> Tensor:
        return Tensor(self.dF(x), (UP, UP, DOWN))


class UniformEB(FieldTensorField):
    is_uniform = True

    def __init__(self, name, params, label="em", box=None, exclusion=DEFAULT_EXCLUSION):
        super().__init__(name, params, label, box, exclusion)
        self._F = eb_to_tensor(params.get("E", (0, 0, 0)), params.get("B", (0, 0, 0)))

    def _jet(self, x):
        return self._F.copy(), np.zeros((4, 4, 4))


def _inverse_square(x, center, k):
    # k * r_vec / r^3 and its spatial Jacobian
    d = x[1:] - center
    r2 = d @ d
    r = np.sqrt(r2)
    V = k * d / (r2 * r)
    dV = k * (np.eye(3) / (r2 * r) - 3.0 * np.outer(d, d) / (r2 * r2 * r))
    return V, dV


class _PointSource(FieldTensorField):
    default_box = (np.array([-1.0, 0.25, 0.25, 0.25]), np.array([1.0, 2.0, 2.0, 2.0]))

    def __init__(self, name, params, label="em", box=None, exclusion=DEFAULT_EXCLUSION):
        super().__init__(name, params, label, box, exclusion)
        self.center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), float)

    def singular_reason(self, x):
        if np.linalg.norm(x[1:] - self.center) <= self.exclusion:
            return "point source singularity"
        return None


class Coulomb(_PointSource):
    def _jet(self, x):
        E, dE = _inverse_square(x, self.center, float(self.params.get("k", 1.0)))
        return eb_to_tensor(E, np.zeros(3)), eb_jacobian_to_dtensor(dE, np.zeros((3, 3)))


class MonopoleB(_PointSource):
    """Radial magnetic field ``B = g r_hat / r^2`` with no electric part."""

    def _jet(self, x):
        B, dB = _inverse_square(x, self.center, float(self.params.get("g", 1.0)))
        return eb_to_tensor(np.zeros(3), B), eb_jacobian_to_dtensor(np.zeros((3, 3)), dB)


class DivergentB(FieldTensorField):
    """``B = s * (x, y, z)``; has nonzero divergence 3s, so it violates the homogeneous equations."""

    def _jet(self, x):
        s = float(self.params.get("s", 1.0))
        return (
            eb_to_tensor(np.zeros(3), s * x[1:]),
            eb_jacobian_to_dtensor(np.zeros((3, 3)), s * np.eye(3)),
        )


class PolynomialF(FieldTensorField):
    """``F^{mn} = C^{mn} + D^{mn}_a x^a`` antisymmetrized; generically violates the homogeneous equations."""

    def __init__(self, name, params, label="em", box=None, exclusion=DEFAULT_EXCLUSION):
        super().__init__(name, params, label, box, exclusion)
        rng = np.random.default_rng(int(params.get("seed", 0)))
        C = np.asarray(params["C"], float) if "C" in params else rng.normal(size=(4, 4))
        D = np.asarray(params["D"], float) if "D" in params else rng.normal(size=(4, 4, 4))
        self.C = 0.5 * (C - C.T)
        self.D = 0.5 * (D - D.transpose(1, 0, 2))

    def _jet(self, x):
        return self.C + self.D @ x, self.D.copy()


class PotentialDerivedField(FieldTensorField):
    """``F_{ab} = d_a A_b - d_b A_a`` raised with ``metric`` (Minkowski by default)."""

    def __init__(self, name, params, label="em", box=None, exclusion=DEFAULT_EXCLUSION,
                 potential: "PotentialField" = None, metric: MetricField | None = None):
        if potential is None:
            spec = params.get("potential", {"preset": "zero"})
            potential = preset_potential(spec["preset"], spec.get("params", {}))
        self.potential = potential
        self.metric = metric if metric is not None else Minkowski("minkowski", {})
        if box is None:
            box = self.potential.box if self.metric.is_constant else self.metric.box
        super().__init__(name, params, label, box, exclusion)

    def singular_reason(self, x):
        for dom in (self.potential, self.metric):
            reason = dom.singular_reason(x)
            if reason is not None:
                return reason
        return None

    @property
    def is_uniform(self):
        return self.metric.is_constant and self.potential.is_affine

    def lowered_potential_jet(self, x):
        """Covariant ``A_a`` with ``dA[a, b] = d_b A_a`` and ``d2A[a, b, c] = d_c d_b A_a``."""
        A, dA, d2A = self.potential._jet(x)
        if self.potential.variance == DOWN:
            return A, dA, d2A
        g, dg, d2g = self.metric._jet(x)
        A_low = g @ A
        dA_low = np.einsum("mna,n->ma", dg, A) + g @ dA
        d2A_low = (
            np.einsum("mnab,n->mab", d2g, A)
            + np.einsum("mna,nb->mab", dg, dA)
            + np.einsum("mnb,na->mab", dg, dA)
            + np.einsum("mn,nab->mab", g, d2A)
        )
        return A_low, dA_low, d2A_low

    def _jet(self, x):
        _, dA, d2A = self.lowered_potential_jet(x)
        F_low = dA.T - dA
        dF_low = d2A.transpose(1, 0, 2) - d2A
        if self.metric.is_constant:
            G = np.linalg.inv(self.metric._jet(x)[0])
            return G @ F_low @ G.T, np.einsum("ma,nb,abc->mnc", G, G, dF_low)
        _, G, _, dG, _ = self.metric.inverse_jet(x)
        F = G @ F_low @ G.T
        dF = (
            np.einsum("mac,nb,ab->mnc", dG, G, F_low)
            + np.einsum("ma,nbc,ab->mnc", G, dG, F_low)
            + np.einsum("ma,nb,abc->mnc", G, G, dF_low)
        )
        return F, dF


class CombinedField(FieldTensorField):
    """Fixed linear combination ``sum_k c_k F_k``."""

    def __init__(self, terms, label="combined"):
        self.terms = [(float(c), f) for c, f in terms]
        if not self.terms:
            raise ValueError("combined field needs at least one term")
        first = self.terms[0][1]
        super().__init__("combined", {}, label, first.box, first.exclusion)

    @property
    def is_uniform(self):
        return all(f.is_uniform for _, f in self.terms)

    def singular_reason(self, x):
        for _, f in self.terms:
            reason = f.singular_reason(x)
            if reason is not None:
                return reason
        return None

    def _jet(self, x):
        F = np.zeros((4, 4))
        dF = np.zeros((4, 4, 4))
        for c, f in self.terms:
            Fk, dFk = f._jet(x)
            F += c * Fk
            dF += c * dFk
        return F, dF


class DualField(FieldTensorField):
    """Hodge dual ``(1/2) eps^{mn rs} F_{rs}`` of a field on a constant background metric."""

    def __init__(self, base: FieldTensorField, metric: MetricValue | None = None, label=None):
        self.base = base
        self.metric_value = metric if metric is not None else MetricValue(ETA, ETA)
        super().__init__("dual", {}, label or f"dual({base.label})", base.box, base.exclusion)

    @property
    def is_uniform(self):
        return self.base.is_uniform

    def singular_reason(self, x):
        return self.base.singular_reason(x)

    def _jet(self, x):
        F, dF = self.base._jet(x)
        mv = self.metric_value
        dual = hodge_dual(F, mv.g, mv.g_inv)
        ddual = np.stack([hodge_dual(dF[:, :, c], mv.g, mv.g_inv) for c in range(4)], axis=-1)
        return dual, ddual


FIELD_PRESETS = {
    "uniform_EB": UniformEB,
    "coulomb": Coulomb,
    "monopole_B": MonopoleB,
    "divergent_B": DivergentB,
    "from_potential": PotentialDerivedField,
    "custom_polynomial": PolynomialF,
}


def preset_field(name: str, params: dict | None = None, label: str = "em", box=None,
                 exclusion=DEFAULT_EXCLUSION, metric: MetricField | None = None) -> FieldTensorField:
    if name not in FIELD_PRESETS:
        raise ValueError(f"unknown field preset {name!r}; choose from {sorted(FIELD_PRESETS)}")
    if name == "from_potential":
        return PotentialDerivedField(name, params or {}, label, box, exclusion, metric=metric)
    return FIELD_PRESETS[name](name, params or {}, label, box, exclusion)


# ---------------------------------------------------------------------------
# potentials


class PotentialField(_Domain):
    """4-potential components (contravariant unless ``variance == "down"``) with two derivatives."""

    is_affine = False
    default_box = _CART_BOX

    def __init__(self, name: str, params: dict, box=None, exclusion=DEFAULT_EXCLUSION):
        self.name = name
        self.params = dict(params)
        self.variance = params.get("variance", UP)
        if self.variance not in (UP, DOWN):
            raise ValueError("potential variance must be 'up' or 'down'")
        self.box = _box(box, self.default_box)
        self.exclusion = float(exclusion)

    def _jet(self, x):
        raise NotImplementedError

    def jet(self, x):
        """Return ``(A, dA, d2A)`` at ``x``."""
        return self._jet(self.check(x))

    def A(self, x):
        return self.jet(x)[0]

    def value(self, x) -> Tensor:
        return Tensor(self.A(x), (self.variance,))

    def deriv(self, x) -> Tensor:
        return Tensor(self.jet(x)[1], (self.variance, DOWN))


class ZeroPotential(PotentialField):
    is_affine = True

    def _jet(self, x):
        return np.zeros(4), np.zeros((4, 4)), np.zeros((4, 4, 4))


class UniformBPotential(PotentialField):
    """``A = (0, 0, b x^1, 0)``: uniform magnetic field ``B_z = b``."""

    is_affine = True

    def _jet(self, x):
        b = float(self.params.get("b", 1.0))
        A = np.array([0.0, 0.0, b * x[1], 0.0])
        dA = np.zeros((4, 4))
        dA[2, 1] = b
        return A, dA, np.zeros((4, 4, 4))


class PolynomialPotential(PotentialField):
    """Cubic polynomial potential with seeded random symmetric coefficients."""

    default_box = (np.full(4, -1.0), np.full(4, 1.0))

    def __init__(self, name, params, box=None, exclusion=DEFAULT_EXCLUSION):
        super().__init__(name, params, box, exclusion)
        rng = np.random.default_rng(int(params.get("seed", 0)))
        scale = float(params.get("scale", 1.0))
        degree = int(params.get("degree", 3))
        self.c0 = scale * rng.normal(size=4)
        self.c1 = scale * rng.normal(size=(4, 4))
        c2 = scale * rng.normal(size=(4, 4, 4)) if degree >= 2 else np.zeros((4, 4, 4))
        c3 = scale * rng.normal(size=(4, 4, 4, 4)) if degree >= 3 else np.zeros((4, 4, 4, 4))
        self.c2 = 0.5 * (c2 + c2.transpose(0, 2, 1))
        perms = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 1, 3), (0, 2, 3, 1), (0, 3, 1, 2), (0, 3, 2, 1)]
        self.c3 = sum(c3.transpose(p) for p in perms) / 6.0
        self.is_affine = degree <= 1

    def _jet(self, x):
        A = self.c0 + self.c1 @ x + 0.5 * np.einsum("mab,a,b->m", self.c2, x, x) \
            + np.einsum("mabc,a,b,c->m", self.c3, x, x, x) / 6.0
        dA = self.c1 + self.c2 @ x + 0.5 * np.einsum("mnbc,b,c->mn", self.c3, x, x)
        d2A = self.c2 + self.c3 @ x
        return A, dA, d2A


class PlaneWavePotential(PotentialField):
    """``A^m = eps^m cos(k . x)`` with Minkowski dot product."""

    def _jet(self, x):
        amp = np.asarray(self.params.get("amplitude", (0.0, 1.0, 0.0, 0.0)), float)
        k = np.asarray(self.params.get("k", (1.0, 0.0, 0.0, 1.0)), float)
        kl = ETA @ k
        ph = kl @ x
        cs, sn = np.cos(ph), np.sin(ph)
        return amp * cs, -sn * np.outer(amp, kl), -cs * np.einsum("m,n,c->mnc", amp, kl, kl)


class CoulombPotential(PotentialField):
    """Scalar potential ``A^0 = k / r``; its field matches the ``coulomb`` preset."""

    default_box = _PointSource.default_box

    def __init__(self, name, params, box=None, exclusion=DEFAULT_EXCLUSION):
        super().__init__(name, params, box, exclusion)
        self.center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), float)

    def singular_reason(self, x):
        if np.linalg.norm(x[1:] - self.center) <= self.exclusion:
            return "point source singularity"
        return None

    def _jet(self, x):
        k = float(self.params.get("k", 1.0))
        d = x[1:] - self.center
        r = np.linalg.norm(d)
        A = np.zeros(4)
        dA = np.zeros((4, 4))
        d2A = np.zeros((4, 4, 4))
        A[0] = k / r
        dA[0, 1:] = -k * d / r**3
        d2A[0, 1:, 1:] = k * (3.0 * np.outer(d, d) / r**5 - np.eye(3) / r**3)
        return A, dA, d2A


class GaussianPotential(PotentialField):
    """``A^m = a^m exp(-|x - c|^2 / (2 w^2))`` with a Euclidean 4-distance."""

    def _jet(self, x):
        a = np.asarray(self.params.get("amplitude", (0.3, 1.0, -0.5, 0.7)), float)
        c = np.asarray(self.params.get("center", (0.0, 0.0, 0.0, 0.0)), float)
        w = float(self.params.get("width", 1.0))
        d = x - c
        A = a * np.exp(-(d @ d) / (2 * w * w))
        dA = -np.outer(A, d) / w**2
        d2A = np.einsum("m,nc->mnc", A, np.outer(d, d) / w**4 - np.eye(4) / w**2)
        return A, dA, d2A


POTENTIAL_PRESETS = {
    "zero": ZeroPotential,
    "uniform_B": UniformBPotential,
    "polynomial": PolynomialPotential,
    "plane_wave": PlaneWavePotential,
    "coulomb": CoulombPotential,
    "gaussian": GaussianPotential,
}


def preset_potential(name: str, params: dict | None = None, box=None, exclusion=DEFAULT_EXCLUSION) -> PotentialField:
    if name not in POTENTIAL_PRESETS:
        raise ValueError(f"unknown potential preset {name!r}; choose from {sorted(POTENTIAL_PRESETS)}")
    return POTENTIAL_PRESETS[name](name, params or {}, box, exclusion)


# ---------------------------------------------------------------------------
# mass


class MassField(_Domain):
    """Positive scalar mass m(X) with gradient and Hessian."""

    is_constant = False
    default_box = _CART_BOX

    def __init__(self, name: str, params: dict, box=None, exclusion=DEFAULT_EXCLUSION):
        self.name = name
        self.params = dict(params)
        self.box = _box(box, self.default_box)
        self.exclusion = float(exclusion)
        lowest = self._lower_bound()
        if not lowest > 0:
            raise ValueError(f"mass preset {name!r} is not positive over its domain box (min {lowest})")

    def _lower_bound(self) -> float:
        raise NotImplementedError

    def _jet(self, x):
        raise NotImplementedError

    def jet(self, x):
        """Return ``(m, grad, hess)`` at ``x``."""
        m, grad, hess = self._jet(self.check(x))
        if not m > 0:
            raise DomainError(f"{self.name}: mass {m} is not positive at X={x}")
        return m, grad, hess

    def mass(self, x) -> float:
        return self.jet(x)[0]

    def grad(self, x) -> np.ndarray:
        return self.jet(x)[1]

    def value(self, x) -> float:
        return self.mass(x)


class ConstantMass(MassField):
    is_constant = True

    def _lower_bound(self):
        return float(self.params.get("m", 1.0))

    def _jet(self, x):
        return float(self.params.get("m", 1.0)), np.zeros(4), np.zeros((4, 4))


class LinearGradientMass(MassField):
    def _lower_bound(self):
        m0 = float(self.params.get("m0", 1.0))
        k = np.asarray(self.params.get("k", (0, 0, 0, 0)), float)
        lo, hi = self.box
        return m0 + np.sum(np.minimum(k * lo, k * hi))

    def _jet(self, x):
        m0 = float(self.params.get("m0", 1.0))
        k = np.asarray(self.params.get("k", (0, 0, 0, 0)), float)
        return m0 + k @ x, k.copy(), np.zeros((4, 4))


class GaussianWellMass(MassField):
    """``m = m0 - depth * exp(-|x_vec - c|^2 / (2 w^2))`` (spatial distance only)."""

    def _lower_bound(self):
        m0 = float(self.params.get("m0", 1.0))
        depth = float(self.params.get("depth", 0.5))
        return m0 - max(depth, 0.0)

    def _jet(self, x):
        m0 = float(self.params.get("m0", 1.0))
        depth = float(self.params.get("depth", 0.5))
        c = np.asarray(self.params.get("center", (0.0, 0.0, 0.0)), float)
        w = float(self.params.get("width", 1.0))
        d = np.zeros(4)
        d[1:] = x[1:] - c
        P = np.diag([0.0, 1.0, 1.0, 1.0])
        e = np.exp(-(d @ d) / (2 * w * w))
        m = m0 - depth * e
        grad = depth * e * d / w**2
        hess = depth * e * (P / w**2 - np.outer(d, d) / w**4)
        return m, grad, hess


MASS_PRESETS = {
    "constant": ConstantMass,
    "linear_gradient": LinearGradientMass,
    "gaussian_well": GaussianWellMass,
}


def preset_mass(name: str, params: dict | None = None, box=None, exclusion=DEFAULT_EXCLUSION) -> MassField:
    if name not in MASS_PRESETS:
        raise ValueError(f"unknown mass preset {name!r}; choose from {sorted(MASS_PRESETS)}")
    return MASS_PRESETS[name](name, params or {}, box, exclusion)


# ---------------------------------------------------------------------------
# finite-difference oracle


def default_step(x) -> np.ndarray:
    return 1e-5 * np.maximum(1.0, np.abs(np.asarray(x, float)))


def _primary_callable(field) -> tuple[Callable, Callable | None]:
    if isinstance(field, MetricField):
        return field.g, field.check
    if isinstance(field, FieldTensorField):
        return field.F, field.check
    if isinstance(field, PotentialField):
        return field.A, field.check
    if isinstance(field, MassField):
        return field.mass, field.check
    if callable(field):
        return field, None
    raise TypeError(f"cannot differentiate object of type {type(field).__name__}")


def fd_derivative_oracle(field, x, h=None) -> np.ndarray:
    """Central-difference derivative with the differentiation index appended last.

    ``field`` is a preset (its primary value is differentiated) or any callable
    of a 4-point. Raises DomainError if a stencil point is singular.
    """
    f, check = _primary_callable(field)
    x = _point(x)
    h = default_step(x) if h is None else np.broadcast_to(np.asarray(h, float), (4,))
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    cols = []
    for a in range(4):
        e = np.zeros(4)
        e[a] = h[a]
        if check is not None:
            check(x + e)
            check(x - e)
        cols.append((np.asarray(f(x + e), float) - np.asarray(f(x - e), float)) / (2 * h[a]))
    return np.stack(cols, axis=-1)
