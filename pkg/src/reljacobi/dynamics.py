"""Equations of motion from ``df/dtau = [f, H]`` and fixed-step proper-time integration."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .brackets import (
    BracketSpec,
    CurvedBracket,
    FlatEMBracket,
    MultiparticleBracket,
    Observable,
    PhasePoint,
    VariableMassBracket,
    _as_z,
    coordinate_observable,
    eval_bracket,
    u_slice,
    x_slice,
)
from .errors import DomainError, NumericError
from .fields import FieldTensorField, MassField, MetricField, Minkowski
from .jacobi import christoffel

CSV_HEADER = ["tau", "x0", "x1", "x2", "x3", "u0", "u1", "u2", "u3", "H", "udotu"]


def _metric_jet(metric: MetricField | None, x):
    if metric is None:
        metric = Minkowski("minkowski", {})
    return metric._jet(x)


def quadratic_hamiltonian(metric: MetricField | None = None, n_particles: int = 1) -> Observable:
    """``H = sum_i (1/2) g_{mn}(X_i) U_i^m U_i^n``."""
    metric = Minkowski("minkowski", {}) if metric is None else metric

    def parts(z):
        for i in range(n_particles):
            x, u = z[x_slice(i)], z[u_slice(i)]
            g, dg, d2g = metric._jet(x)
            yield i, x, u, g, dg, d2g

    def value(z):
        return sum(0.5 * u @ g @ u for _, _, u, g, _, _ in parts(z))

    def grad(z):
        out = np.zeros(len(z))
        for i, _, u, g, dg, _ in parts(z):
            out[x_slice(i)] = 0.5 * np.einsum("mna,m,n->a", dg, u, u)
            out[u_slice(i)] = g @ u
        return out

    def hess(z):
        out = np.zeros((len(z), len(z)))
        for i, _, u, g, dg, d2g in parts(z):
            xs, us = x_slice(i), u_slice(i)
            out[xs, xs] = 0.5 * np.einsum("mnab,m,n->ab", d2g, u, u)
            xu = np.einsum("mna,n->am", dg, u)
            out[xs, us] = xu
            out[us, xs] = xu.T
            out[us, us] = g
        return out

    return Observable(value, grad, hess, "H")


def variable_mass_hamiltonian(mass: MassField, metric: MetricField | None = None) -> Observable:
    """``H = (1/2) m(X) g_{mn} U^m U^n - (1/2) m(X)`` on a constant metric."""
    metric = Minkowski("minkowski", {}) if metric is None else metric

    def value(z):
        x, u = z[:4], z[4:]
        m = mass.jet(x)[0]
        g = metric._jet(x)[0]
        return 0.5 * m * (u @ g @ u - 1.0)

    def grad(z):
        x, u = z[:4], z[4:]
        m, dm, _ = mass.jet(x)
        g = metric._jet(x)[0]
        out = np.zeros(len(z))
        out[:4] = 0.5 * dm * (u @ g @ u - 1.0)
        out[4:8] = m * (g @ u)
        return out

    def hess(z):
        x, u = z[:4], z[4:]
        m, dm, d2m = mass.jet(x)
        g = metric._jet(x)[0]
        out = np.zeros((len(z), len(z)))
        out[:4, :4] = 0.5 * d2m * (u @ g @ u - 1.0)
        out[:4, 4:8] = np.outer(dm, g @ u)
        out[4:8, :4] = out[:4, 4:8].T
        out[4:8, 4:8] = m * g
        return out

    return Observable(value, grad, hess, "H_mass")


@dataclass
class EquationOfMotion:
    """Phase-space flow. ``rhs(z)`` returns ``dz/dtau`` for all particles."""

    rhs: Callable
    source: str
    spec: BracketSpec | None = None
    hamiltonian: Observable | None = None
    linear_matrix: np.ndarray | None = None

    def xdot(self, p, particle: int = 0) -> np.ndarray:
        return self.rhs(_as_z(p))[x_slice(particle)]

    def udot(self, p, particle: int = 0) -> np.ndarray:
        return self.rhs(_as_z(p))[u_slice(particle)]


def derive_eom(spec: BracketSpec, hamiltonian: str = "quadratic") -> EquationOfMotion:
    """``dz^a/dtau = [z^a, H] = J[a, b] dH/dz^b`` for the scenario's Hamiltonian.

    ``quadratic`` pairs with every kind except ``variable_mass``, which needs
    the ``variable_mass`` Hamiltonian.
    """
    if hamiltonian == "variable_mass":
        if not isinstance(spec, VariableMassBracket):
            raise ValueError("the variable_mass Hamiltonian requires a variable_mass bracket")
        H = variable_mass_hamiltonian(spec.mass, spec.metric)
    elif hamiltonian == "quadratic":
        if isinstance(spec, VariableMassBracket):
            raise ValueError("a variable_mass bracket needs hamiltonian='variable_mass'")
        H = quadratic_hamiltonian(spec.metric, spec.n_particles)
    else:
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")

    def rhs(z):
        z = np.asarray(z, float)
        return spec.matrix(z) @ H.grad(z)

    linear = None
    if isinstance(spec, FlatEMBracket) and (spec.field is None or spec.field.is_uniform):
        J = spec.matrix(np.zeros(8) if spec.field is None else _any_point(spec.field))
        g = spec.metric._jet(np.zeros(4))[0]
        Hgrad = np.zeros((8, 8))
        Hgrad[4:, 4:] = g
        linear = J @ Hgrad
    return EquationOfMotion(rhs, "bracket_derived", spec, H, linear)


def _any_point(field: FieldTensorField) -> np.ndarray:
    lo, hi = field.box
    z = np.zeros(8)
    z[:4] = 0.5 * (lo + hi)
    return z


def bracket_udot(spec: BracketSpec, H: Observable, p, particle: int = 0) -> np.ndarray:
    """``[U^m, H]`` evaluated one component at a time with ``eval_bracket``."""
    return np.array([eval_bracket(coordinate_observable("U", m, particle), H, spec, p) for m in range(4)])


def closed_form_accel(kind: str, p, *, metric: MetricField | None = None, field: FieldTensorField | None = None,
                      q_over_m: float = 1.0, mass: MassField | None = None) -> np.ndarray:
    """Printed force laws.

    * ``flat_EM``/``monopole``/``curved``: ``-Gamma^m_{sl} U^s U^l + (q/m) F^{mn} U_n``
    * ``variable_mass``: ``(1/m)(g^{ma} m_{,a} U.U - m_{,n} U^n U^m)``
    """
    z = _as_z(p)
    x, u = z[:4], z[4:8]
    metric = Minkowski("minkowski", {}) if metric is None else metric
    g = metric.g(x)
    if kind == "variable_mass":
        if mass is None:
            raise ValueError("variable_mass closed form needs a mass field")
        m, dm, _ = mass.jet(x)
        G = np.linalg.inv(g)
        return ((G @ dm) * (u @ g @ u) - (dm @ u) * u) / m
    if kind not in ("flat_EM", "curved", "monopole", "multiparticle_block"):
        raise ValueError(f"no closed-form acceleration for kind {kind!r}")
    acc = np.zeros(4)
    if not metric.is_constant:
        acc -= np.einsum("msl,s,l->m", christoffel(metric, x), u, u)
    if field is not None:
        acc += q_over_m * field.F(x) @ (g @ u)
    return acc


def closed_form_for_spec(spec: BracketSpec, p, particle: int = 0) -> np.ndarray:
    z = _as_z(p)
    if isinstance(spec, VariableMassBracket):
        return closed_form_accel("variable_mass", z, metric=spec.metric, mass=spec.mass)
    if isinstance(spec, MultiparticleBracket):
        zi = np.concatenate([z[x_slice(particle)], z[u_slice(particle)]])
        return closed_form_accel("flat_EM", zi, metric=spec.metric, field=spec.particle_fields[particle], q_over_m=1.0)
    if isinstance(spec, (FlatEMBracket, CurvedBracket)):
        return closed_form_accel(spec.kind, z, metric=spec.metric, field=spec.field, q_over_m=spec.q_over_m)
    raise ValueError(f"no closed-form acceleration for kind {spec.kind!r}")


def covariant_acceleration(eom: EquationOfMotion, p, particle: int = 0) -> np.ndarray:
    """``udot^m + Gamma^m_{sl} U^s U^l``; equals udot on a constant metric."""
    z = _as_z(p)
    a = eom.udot(z, particle)
    metric = eom.spec.metric if eom.spec is not None else None
    if metric is not None and not metric.is_constant:
        u = z[u_slice(particle)]
        a = a + np.einsum("msl,s,l->m", christoffel(metric, z[x_slice(particle)]), u, u)
    return a


def orthogonality_residual(eom: EquationOfMotion, p, particle: int = 0) -> float:
    """``g_{mn} U^m a^n`` with ``a`` the covariant acceleration."""
    z = _as_z(p)
    x, u = z[x_slice(particle)], z[u_slice(particle)]
    metric = eom.spec.metric if eom.spec is not None else Minkowski("minkowski", {})
    return float(u @ metric.g(x) @ covariant_acceleration(eom, z, particle))


# ---------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    tau: np.ndarray
    states: np.ndarray
    H: np.ndarray
    udotu: np.ndarray
    completed: bool = True
    message: str = ""

    def __len__(self):
        return len(self.tau)

    def point(self, k: int, particle: int = 0) -> PhasePoint:
        return PhasePoint.from_z(self.states[k], particle)

    def to_csv(self, path, particle: int = 0) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh, particle)

    def write_csv(self, fh, particle: int = 0) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        xs, us = x_slice(particle), u_slice(particle)
        for t, z, h, n in zip(self.tau, self.states, self.H, self.udotu):
            w.writerow([repr(float(v)) for v in (t, *z[xs], *z[us], h, n)])


class DomainExit(DomainError):
    """Integration left the domain; ``trajectory`` holds the steps completed so far."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _invariants(eom: EquationOfMotion, z):
    spec = eom.spec
    metric = spec.metric if spec is not None and spec.metric is not None else Minkowski("minkowski", {})
    H = eom.hamiltonian(z) if eom.hamiltonian is not None else np.nan
    n = sum(z[u_slice(i)] @ metric.g(z[x_slice(i)]) @ z[u_slice(i)]
            for i in range(len(z) // 8)) / (len(z) // 8)
    return H, n


def _rk4_step(f, z, dt):
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _midpoint_step(f, z, dt, tol=1e-12, max_iter=100):
    # implicit midpoint: z1 = z + dt f((z + z1)/2), solved by fixed-point iteration
    z1 = z + dt * f(z)
    for _ in range(max_iter):
        z_new = z + dt * f(0.5 * (z + z1))
        if np.max(np.abs(z_new - z1)) <= tol * max(1.0, np.max(np.abs(z_new))):
            return z_new
        z1 = z_new
    raise NumericError(f"implicit midpoint iteration did not converge to {tol} in {max_iter} iterations")


def integrate(eom: EquationOfMotion, p0, tau_end: float, dt: float, method: str = "rk4",
              shell_tol: float = 1e-8, use_kernel: bool = True) -> Trajectory:
    """Fixed-step integration in proper time; invariants are logged each step, never enforced.

    Constant-coefficient flat-space flows take the compiled ``rk4_linear`` path
    when ``use_kernel`` is set.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if method not in ("rk4", "symmetric_midpoint"):
        raise ValueError(f"unknown integration method {method!r}")
    z = np.array(_as_z(p0), dtype=float)
    spec = eom.spec
    n = len(z) // 8
    metric = spec.metric if spec is not None and spec.metric is not None else Minkowski("minkowski", {})
    for i in range(n):
        norm = z[u_slice(i)] @ metric.g(z[x_slice(i)]) @ z[u_slice(i)]
        if abs(norm - 1.0) > shell_tol:
            raise ValueError(f"initial state of particle {i} is off-shell: U.U = {norm}")
    nsteps = int(round(tau_end / dt))
    if nsteps < 0:
        raise ValueError("tau_end must be non-negative")

    if method == "rk4" and use_kernel and eom.linear_matrix is not None:
        states = _kernels.rk4_linear(np.ascontiguousarray(eom.linear_matrix), z, float(dt), nsteps)
        if not np.all(np.isfinite(states)):
            raise NumericError("non-finite state during integration")
        taus = dt * np.arange(nsteps + 1)
        inv = np.array([_invariants(eom, s) for s in states])
        return Trajectory(taus, states, inv[:, 0], inv[:, 1])

    step = _rk4_step if method == "rk4" else _midpoint_step

    def f(zz):
        if spec is not None:
            spec.check(zz)
        return eom.rhs(zz)

    taus = [0.0]
    states = [z.copy()]
    H0, n0 = _invariants(eom, z)
    Hs, ns = [H0], [n0]
    for k in range(nsteps):
        try:
            z = step(f, z, dt)
            if spec is not None:
                spec.check(z)
        except DomainError as exc:
            traj = Trajectory(np.array(taus), np.array(states), np.array(Hs), np.array(ns), False, str(exc))
            raise DomainExit(f"left the domain at tau={taus[-1] + dt}: {exc}", traj) from exc
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite state at tau={(k + 1) * dt}")
        taus.append((k + 1) * dt)
        states.append(z.copy())
        H, nn = _invariants(eom, z)
        Hs.append(H)
        ns.append(nn)
    return Trajectory(np.array(taus), np.array(states), np.array(Hs), np.array(ns))


def invariant_drift(traj: Trajectory) -> tuple[float, float]:
    """``(max |H - H_0|, max |U.U - (U.U)_0|)`` over the trajectory."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    dH = float(np.max(np.abs(traj.H - traj.H[0])))
    dN = float(np.max(np.abs(traj.udotu - traj.udotu[0])))
    return dH, dN
