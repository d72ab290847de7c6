"""Jacobi-identity residuals: nested-bracket evaluation and the closed forms it must match.

The four basis identities are the cyclic sums over coordinate triples
(X,X,X), (X,X,U), (X,U,U) and (U,U,U). For coordinate functions the nested
bracket is ``[[z_a, z_b], z_c] = d_d J[a, b] J[d, c]``, evaluated from the
bracket's Poisson matrix and its gradient. Closed forms are built directly
from field derivatives (homogeneous Maxwell residual, Christoffel symbols,
Riemann tensor) and never go through the bracket matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .brackets import (
    BracketSpec,
    CurvedBracket,
    FlatEMBracket,
    MultiparticleBracket,
    PhasePoint,
    PolynomialBracket,
    VariableMassBracket,
    _as_z,
)
from .errors import DomainError
from .fields import FieldTensorField, MetricField, Minkowski
from .tensor_core import ETA

IDENTITIES = {1: "XXX", 2: "XXU", 3: "XUU", 4: "UUU"}


def _triple_indices(which: int, particle: int = 0):
    if which not in IDENTITIES:
        raise ValueError(f"identity must be one of 1..4, got {which!r}")
    base = 8 * particle
    xs = np.arange(base, base + 4)
    us = np.arange(base + 4, base + 8)
    return tuple(xs if c == "X" else us for c in IDENTITIES[which])


def basis_jacobi_residual(spec: BracketSpec, p, which: int, particle: int = 0) -> np.ndarray:
    """Cyclic sum ``[[A^m,B^n],C^l] + [[B^n,C^l],A^m] + [[C^l,A^m],B^n]`` as a (4,4,4) array."""
    z = _as_z(p)
    ia, ib, ic = _triple_indices(which, particle)
    J = np.ascontiguousarray(spec.matrix(z))
    dJ = np.ascontiguousarray(spec.grad(z))
    return _kernels.nested_cyclic(J, dJ, ia, ib, ic)


def _lower_jet(F: FieldTensorField, metric: MetricField, x):
    Fu, dFu = F.jet(x)
    g, dg, _ = metric.jet(x)
    F_low = g @ Fu @ g.T
    if metric.is_constant:
        return F_low, np.einsum("ma,nb,abc->mnc", g, g, dFu)
    dF_low = (np.einsum("mac,nb,ab->mnc", dg, g, Fu)
              + np.einsum("ma,nbc,ab->mnc", g, dg, Fu)
              + np.einsum("ma,nb,abc->mnc", g, g, dFu))
    return F_low, dF_low


def maxwell_residual(F: FieldTensorField, x, metric: MetricField | None = None) -> np.ndarray:
    """``T[m,n,l] = F_{mn,l} + F_{nl,m} + F_{lm,n}`` with indices lowered before differentiating."""
    metric = Minkowski("minkowski", {}) if metric is None else metric
    _, dF = _lower_jet(F, metric, np.asarray(x, float))
    return dF + dF.transpose(1, 2, 0) + dF.transpose(2, 0, 1)


def raised_cyclic(T_low: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    return np.einsum("ma,nb,lc,abc->mnl", g_inv, g_inv, g_inv, T_low)


def christoffel(metric: MetricField, x) -> np.ndarray:
    """``Gamma[m, s, l] = Gamma^m_{sl}``."""
    g, dg, _ = metric.jet(x)
    return _kernels.christoffel(np.linalg.inv(g), np.ascontiguousarray(dg))


def christoffel_grad(metric: MetricField, x) -> np.ndarray:
    """``dGamma[m, s, l, c] = d_c Gamma^m_{sl}``."""
    _, G, dg, dG, d2g = metric.inverse_jet(x)
    return _kernels.christoffel_grad(G, np.ascontiguousarray(dG), np.ascontiguousarray(dg),
                                     np.ascontiguousarray(d2g))


def riemann(metric: MetricField, x):
    """Return ``(R_up, R_down)`` with ``R_up[r,s,m,n] = R^r_{smn}`` and ``R_down = g_{ra} R^a_{smn}``."""
    g, G, dg, dG, d2g = metric.inverse_jet(x)
    gamma = _kernels.christoffel(G, np.ascontiguousarray(dg))
    dgamma = _kernels.christoffel_grad(G, np.ascontiguousarray(dG), np.ascontiguousarray(dg),
                                       np.ascontiguousarray(d2g))
    R_up = _kernels.riemann(gamma, dgamma)
    return R_up, np.einsum("ra,asmn->rsmn", g, R_up)


def riemann_cyclic(R_down: np.ndarray) -> np.ndarray:
    """``R_{abcd} + R_{acdb} + R_{adbc}`` as an array ``[a, b, c, d]``."""
    return R_down + R_down.transpose(0, 3, 1, 2) + R_down.transpose(0, 2, 3, 1)


def covariant_derivative_F(F: FieldTensorField, metric: MetricField, x) -> np.ndarray:
    """``F^{mn}_{;a}`` as ``[m, n, a]``, using Christoffel symbols of ``metric``."""
    Fu, dF = F.jet(x)
    gam = christoffel(metric, x)
    return dF + np.einsum("mar,rn->mna", gam, Fu) + np.einsum("nar,mr->mna", gam, Fu)


@dataclass(frozen=True)
class CurvedSplit:
    maxwell_part: np.ndarray
    riemann_part: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.maxwell_part + self.riemann_part


def curved_fourth_identity_split(spec: CurvedBracket, p) -> CurvedSplit:
    """Closed-form pieces of identity 4 for the curved bracket.

    maxwell part: ``(q/m)(g^{la} F^{mn}_{;a} + g^{ma} F^{nl}_{;a} + g^{na} F^{lm}_{;a})``;
    riemann part: ``g^{mb} g^{nc} g^{ld} U^a (R_abcd + R_acdb + R_adbc)``.
    """
    if not isinstance(spec, CurvedBracket):
        raise ValueError("curved_fourth_identity_split needs a curved bracket")
    z = _as_z(p)
    x, u = z[:4], z[4:]
    G = np.linalg.inv(spec.metric.g(x))
    if spec.field is None:
        maxwell = np.zeros((4, 4, 4))
    else:
        cov = covariant_derivative_F(spec.field, spec.metric, x)
        t = np.einsum("la,mna->mnl", G, cov)
        maxwell = spec.q_over_m * (t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1))
    _, R_down = riemann(spec.metric, x)
    cyc = riemann_cyclic(R_down)
    riem = np.einsum("mb,nc,ld,a,abcd->mnl", G, G, G, u, cyc)
    return CurvedSplit(maxwell, riem)


def permuted_L(L: np.ndarray) -> np.ndarray:
    """``P[m, n, l] = L^{n l m}``, the index order in which L shows up in identity 3."""
    return np.asarray(L, float).transpose(2, 0, 1)


def quadratic_force_exclusion(L, p=None) -> np.ndarray:
    """Identity-3 residual for the bracket ``[U^m, U^n] = L^{mnl} U_l`` on Minkowski space.

    Returned in the ``[f,[g,h]] + cyclic`` ordering, where it equals ``L^{nlm}``
    at every phase point (the ``[[f,g],h]`` ordering of ``basis_jacobi_residual``
    gives ``-L^{nlm}``). Either way identity 3 fails unless ``L = 0``.
    """
    L = np.asarray(L, float)
    if L.shape != (4, 4, 4):
        raise ValueError("L must have shape (4, 4, 4)")
    spec = PolynomialBracket(L=L)
    if p is None:
        p = PhasePoint(np.zeros(4), np.array([1.0, 0.0, 0.0, 0.0]))
    return -basis_jacobi_residual(spec, p, 3)


def closed_form_residual(spec: BracketSpec, p, which: int, particle: int = 0) -> np.ndarray:
    """Identity residual predicted from field data alone, per bracket kind."""
    if which not in IDENTITIES:
        raise ValueError(f"identity must be one of 1..4, got {which!r}")
    z = _as_z(p)
    zero = np.zeros((4, 4, 4))
    if which in (1, 2):
        return zero
    if isinstance(spec, VariableMassBracket):
        return zero
    if isinstance(spec, CurvedBracket):
        if which == 3:
            return zero
        return curved_fourth_identity_split(spec, z).total
    if isinstance(spec, PolynomialBracket):
        u = z[4:]
        D = spec.uu_velocity_derivative(u)  # D[n, l, s] = d[U^n,U^l]/dU^s
        if which == 3:
            # -g^{ms} D[n, l, s]
            return -np.einsum("ms,nls->mnl", spec._G, D)
        B = spec.uu(u)
        t = np.einsum("mns,sl->mnl", D, B)
        return t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1)
    if isinstance(spec, (FlatEMBracket, MultiparticleBracket)):
        if which == 3:
            return zero
        if isinstance(spec, MultiparticleBracket):
            F = spec.particle_fields[particle]
            scale = 1.0
        else:
            F, scale = spec.field, spec.q_over_m
        if F is None:
            return zero
        xs = z[8 * particle: 8 * particle + 4]
        T = maxwell_residual(F, xs, spec.metric)
        G = np.linalg.inv(spec.metric.g(xs))
        return scale * raised_cyclic(T, G)
    raise ValueError(f"no closed form for bracket kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# sampling


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Gram-Schmidt tetrad from the coordinate basis; rows are e_0..e_3 with e_0 timelike."""
    E = np.eye(4)
    frame = []
    for a in range(4):
        v = E[a].copy()
        for e, s in frame:
            v -= s * (e @ g @ v) * e
        n = v @ g @ v
        if a == 0 and not n > 0:
            raise DomainError("coordinate time direction is not timelike here")
        if a > 0 and not n < 0:
            raise DomainError("coordinate basis cannot be orthonormalized with (+,-,-,-) signature")
        s = 1.0 if n > 0 else -1.0
        frame.append((v / np.sqrt(abs(n)), s))
    return np.array([e for e, _ in frame])


def boost_velocity(v3, g: np.ndarray | None = None) -> np.ndarray:
    """On-shell 4-velocity for a local-frame 3-velocity ``v3`` (|v| < 1)."""
    v3 = np.asarray(v3, float)
    speed2 = v3 @ v3
    if not speed2 < 1.0:
        raise ValueError(f"3-velocity must have |v| < 1, got {np.sqrt(speed2)}")
    g = ETA if g is None else np.asarray(g, float)
    frame = orthonormal_frame(g)
    gamma = 1.0 / np.sqrt(1.0 - speed2)
    return gamma * (frame[0] + v3 @ frame[1:])


def sample_phase_points(box, count: int, seed: int, metric: MetricField | None = None,
                        max_speed: float = 0.9, n_particles: int = 1, domain=None,
                        max_tries: int = 100) -> list[np.ndarray]:
    """Uniform positions in ``box``, on-shell velocities from random 3-velocities with |v| <= max_speed.

    ``domain`` is a callable raising DomainError for rejected positions.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, float) for b in box)
    metric = Minkowski("minkowski", {}) if metric is None else metric
    out = []
    for _ in range(count):
        z = np.empty(8 * n_particles)
        for i in range(n_particles):
            for _attempt in range(max_tries):
                x = rng.uniform(lo, hi)
                try:
                    if domain is not None:
                        domain(x)
                    g = metric.g(x)
                    direction = rng.normal(size=3)
                    direction /= np.linalg.norm(direction)
                    v3 = direction * rng.uniform(0.0, max_speed)
                    u = boost_velocity(v3, g)
                except DomainError:
                    continue
                break
            else:
                raise DomainError(f"no admissible sample found in {max_tries} tries inside box")
            z[8 * i: 8 * i + 4] = x
            z[8 * i + 4: 8 * i + 8] = u
        out.append(z)
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class JacobiReport:
    residuals: dict
    closed_form_discrepancy: dict
    worst_residual: dict
    worst_point: dict
    sample_count: int
    seed: int
    tolerance: float
    cross_tolerance: float
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "cross_validation_tolerance": self.cross_tolerance,
            "identities": {
                str(k): {
                    "name": IDENTITIES[int(str(k).split(":")[0])],
                    "max_abs_residual": self.residuals[k],
                    "closed_form_max_discrepancy": self.closed_form_discrepancy[k],
                    "worst_point": self.worst_point[k],
                    "residual_at_worst_point": self.worst_residual[k],
                }
                for k in self.residuals
            },
            "verdicts": self.verdicts,
            "passed": self.passed,
        }


def verify_jacobi(spec: BracketSpec, points, seed: int, tol: float = 1e-8, cross_tol: float = 1e-5) -> JacobiReport:
    """Max-abs nested residual per identity (per particle) and its discrepancy from the closed form."""
    residuals, disc, worst_res, worst_pt, verdicts = {}, {}, {}, {}, {}
    for i in range(spec.n_particles):
        for which in IDENTITIES:
            key = which if spec.n_particles == 1 else f"{which}:particle{i}"
            best, best_d, worst_R, worst_z = 0.0, 0.0, np.zeros((4, 4, 4)), points[0]
            for z in points:
                R = basis_jacobi_residual(spec, z, which, i)
                C = closed_form_residual(spec, z, which, i)
                r = float(np.max(np.abs(R)))
                best_d = max(best_d, float(np.max(np.abs(R - C))))
                if r > best or worst_z is None:
                    best, worst_R, worst_z = r, R, z
            residuals[key] = best
            disc[key] = best_d
            worst_res[key] = worst_R.tolist()
            worst_pt[key] = np.asarray(worst_z).tolist()
            verdicts[f"identity_{key}"] = best <= tol
            verdicts[f"cross_validation_{key}"] = best_d <= cross_tol
    return JacobiReport(residuals, disc, worst_res, worst_pt, len(points), seed, tol, cross_tol, verdicts)
