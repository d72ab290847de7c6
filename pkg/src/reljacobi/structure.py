"""Darboux canonization, monopole charge rotation, multi-species brackets, and counting."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

import numpy as np

from .brackets import (
    CurvedBracket,
    FlatEMBracket,
    MultiparticleBracket,
    Observable,
    PhasePoint,
    _as_z,
    coordinate_observable,
    eval_bracket,
)
from .fields import (
    CombinedField,
    DualField,
    FieldTensorField,
    MetricField,
    Minkowski,
    PotentialDerivedField,
    PotentialField,
)
from .tensor_core import DOWN, UP, MetricValue, Tensor, hodge_dual

SIGN_LABELS = {+1: "plus", -1: "minus"}


@dataclass
class CanonicalPair:
    X: np.ndarray
    P: np.ndarray
    variance: str
    passing_sign: int | None
    residuals: dict = field(default_factory=dict)  # label -> {"XP": float, "PP": float}
    tolerance: float = 1e-8

    @property
    def passing_labels(self) -> list[str]:
        return [k for k, r in self.residuals.items() if r["XP"] <= self.tolerance and r["PP"] <= self.tolerance]

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "P": self.P.tolist(),
            "P_variance": self.variance,
            "passing_sign": None if self.passing_sign is None else SIGN_LABELS[self.passing_sign],
            "tolerance": self.tolerance,
            "residuals": self.residuals,
            "exactly_one_convention_passes": len(self.passing_labels) == 1,
        }


def _momentum_observable(mu: int, sign: int, q_over_m: float, potential_jet, metric_jet=None) -> Observable:
    """Flat: ``P^mu = U^mu + s (q/m) A^mu``. Curved: ``P_mu = g_{mn} U^n + s (q/m) A_mu``."""
    c = sign * q_over_m

    def value(z):
        A = potential_jet(z[:4])[0]
        if metric_jet is None:
            return z[4 + mu] + c * A[mu]
        g = metric_jet(z[:4])[0]
        return g[mu] @ z[4:8] + c * A[mu]

    def grad(z):
        _, dA, _ = potential_jet(z[:4])
        out = np.zeros(len(z))
        out[:4] = c * dA[mu]
        if metric_jet is None:
            out[4 + mu] = 1.0
        else:
            g, dg, _ = metric_jet(z[:4])
            out[:4] += dg[mu] .T @ z[4:8]
            out[4:8] = g[mu]
        return out

    return Observable(value, grad, None, f"P{mu}")


def _canonical_residuals(spec, z, P_obs, target_XP):
    X = [coordinate_observable("X", m) for m in range(4)]
    XP = np.array([[eval_bracket(X[m], P_obs[n], spec, z) for n in range(4)] for m in range(4)])
    PP = np.array([[eval_bracket(P_obs[m], P_obs[n], spec, z) for n in range(4)] for m in range(4)])
    return float(np.max(np.abs(XP - target_XP))), float(np.max(np.abs(PP)))


def _canonize(spec, z, potential_jet, metric_jet, q_over_m, target_XP, variance, tol):
    residuals, values = {}, {}
    for sign in (+1, -1):
        P_obs = [_momentum_observable(m, sign, q_over_m, potential_jet, metric_jet) for m in range(4)]
        xp, pp = _canonical_residuals(spec, z, P_obs, target_XP)
        residuals[SIGN_LABELS[sign]] = {"XP": xp, "PP": pp}
        values[sign] = np.array([P(z) for P in P_obs])
    passing = [s for s in (+1, -1) if residuals[SIGN_LABELS[s]]["XP"] <= tol and residuals[SIGN_LABELS[s]]["PP"] <= tol]
    chosen = passing[0] if len(passing) == 1 else None
    P = values[chosen if chosen is not None else -1]
    return CanonicalPair(z[:4].copy(), P, variance, chosen, residuals, tol)


def canonize_flat(p, A: PotentialField, q_over_m: float, tol: float = 1e-8) -> CanonicalPair:
    """Shift ``P^mu = U^mu +/- (q/m) A^mu`` on Minkowski space; both signs are evaluated.

    With ``F^{mn} = d^m A^n - d^n A^m`` only the ``+`` shift makes ``[P, P]`` vanish.
    """
    z = _as_z(p)
    metric = Minkowski("minkowski", {})
    F = PotentialDerivedField("from_potential", {}, potential=A, metric=metric)
    spec = FlatEMBracket(F, q_over_m, metric)
    if A.variance != UP:
        raise ValueError("canonize_flat expects contravariant potential components")
    G = np.linalg.inv(metric.g(z[:4]))
    return _canonize(spec, z, A._jet, None, q_over_m, G, UP, tol)


def canonize_curved(p, A: PotentialField, metric: MetricField, q_over_m: float, tol: float = 1e-6) -> CanonicalPair:
    """Covariant ``P_mu = g_{mn} U^n +/- (q/m) A_mu`` under the curved bracket; targets ``[X^m, P_n] = delta``."""
    z = _as_z(p)
    metric.check(z[:4])
    F = PotentialDerivedField("from_potential", {}, potential=A, metric=metric)
    spec = CurvedBracket(metric, F, q_over_m)
    return _canonize(spec, z, F.lowered_potential_jet, metric._jet, q_over_m, np.eye(4), DOWN, tol)


# ---------------------------------------------------------------------------
# duality and monopoles


def dual_tensor(F, metric: MetricValue | None = None) -> Tensor:
    """``(1/2) eps^{mn rs} F_{rs}`` for a contravariant antisymmetric F."""
    metric = MetricValue(np.diag([1.0, -1.0, -1.0, -1.0])) if metric is None else metric
    comps = np.asarray(F.components if isinstance(F, Tensor) else F, float)
    if not np.allclose(comps, -comps.T, rtol=0, atol=1e-14):
        raise ValueError("dual_tensor needs an antisymmetric field tensor")
    return Tensor(hodge_dual(comps, metric.g, metric.g_inv), (UP, UP), "antisymmetric")


def total_field(F: FieldTensorField, alpha: float, beta: float, q_e: float = 1.0,
                metric: MetricValue | None = None) -> tuple[FieldTensorField, float]:
    """Rotate out the magnetic charge under ``alpha q_e + beta q_m = 0``.

    Returns ``(H, q)`` with ``H = (F - (alpha/beta) dual F) / k`` and ``q = q_e k``,
    where ``k = sqrt(1 + alpha^2/beta^2)``.
    """
    if beta == 0:
        raise ValueError("beta must be nonzero")
    ratio = alpha / beta
    k = np.sqrt(1.0 + ratio * ratio)
    H = CombinedField([(1.0 / k, F), (-ratio / k, DualField(F, metric))], label="total")
    return H, q_e * k


@dataclass(frozen=True)
class MonopoleConfig:
    q_e: float
    q_m: float
    alpha: float
    beta: float
    field: FieldTensorField | None = None
    relation: bool = True

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        if self.relation and abs(self.alpha * self.q_e + self.beta * self.q_m) > 1e-12:
            raise ValueError("charges violate alpha q_e + beta q_m = 0")

    def total(self):
        return total_field(self.field, self.alpha, self.beta, self.q_e)


# ---------------------------------------------------------------------------
# multiple particles and species


@dataclass(frozen=True)
class ChargeMatrix:
    q: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, float))
        m = np.asarray(self.masses, float).reshape(-1)
        if q.shape[0] < 1 or q.shape[1] < 1:
            raise ValueError("charge matrix needs at least one particle and one species")
        if m.size != q.shape[0]:
            raise ValueError("one mass per particle row is required")
        if np.any(m <= 0):
            raise ValueError("masses must be positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "masses", m)

    @property
    def n_particles(self) -> int:
        return self.q.shape[0]

    @property
    def n_species(self) -> int:
        return self.q.shape[1]

    @property
    def charge_to_mass(self) -> np.ndarray:
        return self.q / self.masses[:, None]


def assemble_multiparticle(charges: ChargeMatrix, fields: list[FieldTensorField],
                           metric: MetricField | None = None) -> MultiparticleBracket:
    if charges.n_species != len(fields):
        raise ValueError(f"{charges.n_species} species columns but {len(fields)} fields")
    return MultiparticleBracket(charges.q, charges.masses, fields, metric)


def constrained_field_combinations(charges: ChargeMatrix, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of the row space of ``q_(i,I) / m_i``.

    Each row ``c`` means ``sum_I c_I F_I`` must satisfy the homogeneous equations.
    """
    M = charges.charge_to_mass
    _, s, Vt = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, charges.n_species))
    basis = Vt[: int(np.sum(s > rtol * s[0]))]
    # fix the sign so the largest component of each row is positive
    pivots = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(len(basis)), pivots])
    return basis * signs[:, None]


# ---------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class CountReport:
    components: dict
    conditions: dict

    @property
    def total_components(self) -> int:
        return sum(self.components.values())

    @property
    def total_conditions(self) -> int:
        return sum(self.conditions.values())

    @property
    def overdetermined(self) -> bool:
        return self.total_conditions > self.total_components

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "conditions": {str(k): v for k, v in self.conditions.items()},
            "total_components": self.total_components,
            "total_conditions": self.total_conditions,
            "overdetermined": self.overdetermined,
        }


def _symmetrized_elementary(shape_rank: int, antisym_pair: bool, sym_slots: tuple, idx: tuple) -> np.ndarray:
    # elementary tensor at idx, antisymmetrized in slots (0, 1) and symmetrized over sym_slots
    T = np.zeros((4,) * shape_rank)
    T[idx] = 1.0
    if antisym_pair:
        T = 0.5 * (T - np.swapaxes(T, 0, 1))
    if len(sym_slots) > 1:
        from itertools import permutations

        acc = np.zeros_like(T)
        perms = list(permutations(sym_slots))
        for perm in perms:
            axes = list(range(shape_rank))
            for src, dst in zip(sym_slots, perm):
                axes[src] = dst
            acc += np.transpose(T, axes)
        T = acc / len(perms)
    return T


def _component_rank(rank: int, sym_slots: tuple, labels) -> int:
    from itertools import product

    cols = [
        _symmetrized_elementary(rank, True, sym_slots, tuple(labels[i] for i in idx)).ravel()
        for idx in product(range(4), repeat=rank)
    ]
    return int(np.linalg.matrix_rank(np.array(cols)))


def _condition_rank(order: int, labels) -> int:
    # Domain: K[m, n, l, a1..ak] antisymmetric in (m, n), symmetric in the a's.
    # Map: cyclic sum over (m, n, l). Rank = number of independent conditions.
    rank = 3 + order
    sym_slots = tuple(range(3, rank))
    cols = []
    for (m, n) in combinations(range(4), 2):
        for l in range(4):
            for alphas in combinations_with_replacement(range(4), order):
                idx = tuple(labels[i] for i in (m, n, l, *alphas))
                K = _symmetrized_elementary(rank, True, sym_slots, idx)
                axes_b = [1, 2, 0] + list(sym_slots)
                axes_c = [2, 0, 1] + list(sym_slots)
                S = K + np.transpose(K, axes_b) + np.transpose(K, axes_c)
                cols.append(S.ravel())
    return int(np.linalg.matrix_rank(np.array(cols).T))


def count_components_and_conditions(relabel=None) -> CountReport:
    """Independent coefficients of ``[U,U] = A + L U + Q U U`` and Jacobi conditions per U-order.

    ``relabel`` permutes index values 0..3 before enumeration; the counts must not change.
    """
    labels = list(range(4)) if relabel is None else list(relabel)
    if sorted(labels) != [0, 1, 2, 3]:
        raise ValueError("relabel must be a permutation of 0..3")
    components = {
        "A": _component_rank(2, (), labels),
        "L": _component_rank(3, (), labels),
        "Q": _component_rank(4, (2, 3), labels),
    }
    conditions = {k: _condition_rank(k, labels) for k in range(4)}
    return CountReport(components, conditions)
