"""Scenario files: JSON schema, validation with field/line diagnostics, and assembly into runtime objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .brackets import BRACKET_KINDS, BracketSpec, PhasePoint, build_bracket
from .errors import DomainError
from .fields import (
    DEFAULT_EXCLUSION,
    FIELD_PRESETS,
    MASS_PRESETS,
    METRIC_PRESETS,
    POTENTIAL_PRESETS,
    FieldTensorField,
    MassField,
    MetricField,
    PotentialField,
    preset_field,
    preset_mass,
    preset_metric,
    preset_potential,
)
from .jacobi import boost_velocity
from .structure import ChargeMatrix, MonopoleConfig, assemble_multiparticle


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PresetSpec(_Strict):
    preset: str
    params: dict = Field(default_factory=dict)


class MetricSpec(PresetSpec):
    preset: str = "minkowski"

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in METRIC_PRESETS:
            raise ValueError(f"unknown metric preset {v!r}; choose from {sorted(METRIC_PRESETS)}")
        return v


class FieldSpec(PresetSpec):
    label: str = "em"

    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in FIELD_PRESETS:
            raise ValueError(f"unknown field preset {v!r}; choose from {sorted(FIELD_PRESETS)}")
        return v


class MassSpec(PresetSpec):
    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in MASS_PRESETS:
            raise ValueError(f"unknown mass preset {v!r}; choose from {sorted(MASS_PRESETS)}")
        return v


class PotentialSpec(PresetSpec):
    @field_validator("preset")
    @classmethod
    def _known(cls, v):
        if v not in POTENTIAL_PRESETS:
            raise ValueError(f"unknown potential preset {v!r}; choose from {sorted(POTENTIAL_PRESETS)}")
        return v


class ParticleSpec(_Strict):
    x0: list[float] = Field(min_length=4, max_length=4)
    velocity: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0], min_length=3, max_length=3)
    mass: float = Field(default=1.0, gt=0)
    charges: list[float] = Field(default_factory=lambda: [1.0], min_length=1)

    @field_validator("velocity")
    @classmethod
    def _subluminal(cls, v):
        if not sum(c * c for c in v) < 1.0:
            raise ValueError("3-velocity must satisfy |v| < 1")
        return v


class DomainSpec(_Strict):
    box: list[list[float]] | None = None
    exclusion: float = Field(default=DEFAULT_EXCLUSION, gt=0)

    @field_validator("box")
    @classmethod
    def _nonempty(cls, v):
        if v is None:
            return v
        if len(v) != 2 or any(len(row) != 4 for row in v):
            raise ValueError("box must be [[lo0..lo3], [hi0..hi3]]")
        if any(lo >= hi for lo, hi in zip(*v)):
            raise ValueError("box is empty: every lo must be < hi")
        return v


class Tolerances(_Strict):
    analytic: float = Field(default=1e-8, gt=0)
    finite_difference: float = Field(default=1e-5, gt=0)
    shell_tol: float = Field(default=1e-8, gt=0)
    canonical: float | None = Field(default=None, gt=0)


class Sampling(_Strict):
    count: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    max_speed: float = Field(default=0.9, ge=0, lt=1)


class Integration(_Strict):
    dt: float = Field(gt=0)
    tau_end: float = Field(ge=0)
    method: Literal["rk4", "symmetric_midpoint"] = "rk4"


class MonopoleSpec(_Strict):
    q_e: float = 1.0
    q_m: float = 0.0
    alpha: float = 0.0
    beta: float = 1.0
    relation: bool = True


class PolynomialSpec(_Strict):
    seed: int = 0
    A_scale: float = 0.0
    L_scale: float = 0.0
    Q_scale: float = 0.0
    A: list | None = None
    L: list | None = None
    Q: list | None = None


class CanonizeSpec(_Strict):
    potential: PotentialSpec | None = None


class Scenario(_Strict):
    name: str = "scenario"
    kind: Literal[BRACKET_KINDS]  # type: ignore[valid-type]
    metric: MetricSpec = Field(default_factory=MetricSpec)
    fields: list[FieldSpec] = Field(default_factory=list)
    mass: MassSpec | None = None
    particles: list[ParticleSpec] = Field(min_length=1)
    domain: DomainSpec = Field(default_factory=DomainSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    sampling: Sampling = Field(default_factory=Sampling)
    integration: Integration | None = None
    monopole: MonopoleSpec | None = None
    polynomial: PolynomialSpec | None = None
    canonize: CanonizeSpec | None = None

    @model_validator(mode="after")
    def _consistent(self):
        k = self.kind
        if k in ("flat_EM", "curved", "monopole") and len(self.fields) > 1:
            raise ValueError(f"kind {k!r} takes at most one field; use multiparticle_block for several species")
        if k == "monopole" and not self.fields:
            raise ValueError("kind 'monopole' needs one field")
        if k == "variable_mass" and self.mass is None:
            raise ValueError("kind 'variable_mass' needs a mass block")
        if k == "multiparticle_block":
            if not self.fields:
                raise ValueError("kind 'multiparticle_block' needs at least one field")
            for i, p in enumerate(self.particles):
                if len(p.charges) != len(self.fields):
                    raise ValueError(
                        f"particles[{i}].charges has {len(p.charges)} entries but {len(self.fields)} fields are given"
                    )
        elif len(self.particles) != 1:
            raise ValueError(f"kind {k!r} takes exactly one particle")
        if k in ("flat_EM", "monopole", "multiparticle_block", "custom_polynomial") and self.metric.preset != "minkowski":
            raise ValueError(f"kind {k!r} requires the minkowski metric")
        return self


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"field {loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(f"{source}: {_format_validation(exc)}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario file ({exc.strerror})") from exc
    return parse_scenario(text, str(path))


def with_override(scenario: Scenario, dotted: str, value) -> Scenario:
    """Copy of ``scenario`` with one dotted path (``particles.0.velocity.0``) replaced, revalidated."""
    data = scenario.model_dump()
    node = data
    keys = dotted.split(".")
    try:
        for key in keys[:-1]:
            node = node[int(key)] if isinstance(node, list) else node[key]
        last = keys[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            if last not in node:
                raise KeyError(last)
            node[last] = value
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ScenarioError(f"parameter path {dotted!r} does not exist in the scenario") from exc
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(f"{dotted}={value!r}: {_format_validation(exc)}") from exc


# ---------------------------------------------------------------------------
# runtime assembly


@dataclass
class Runtime:
    scenario: Scenario
    spec: BracketSpec
    metric: MetricField
    fields: list[FieldTensorField]
    mass: MassField | None
    box: tuple
    p0: np.ndarray
    hamiltonian: str

    @property
    def q_over_m(self) -> float:
        p = self.scenario.particles[0]
        return p.charges[0] / p.mass

    def check_position(self, x) -> None:
        for dom in [self.metric, *self.fields, *([self.mass] if self.mass is not None else [])]:
            dom.check(x)
        lo, hi = self.box
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"X={np.asarray(x).tolist()} lies outside the scenario box")

    def check_state(self, z) -> None:
        for i in range(len(z) // 8):
            self.check_position(z[8 * i: 8 * i + 4])

    def canonize_potential(self) -> PotentialField:
        c = self.scenario.canonize
        if c is not None and c.potential is not None:
            return preset_potential(c.potential.preset, c.potential.params, exclusion=self.scenario.domain.exclusion)
        if len(self.fields) == 1 and hasattr(self.fields[0], "potential"):
            return self.fields[0].potential
        if not self.fields:
            return preset_potential("zero", {})
        raise ScenarioError("canonize needs a from_potential field or a canonize.potential block")


def _intersect_boxes(boxes):
    lo = np.max([np.asarray(b[0], float) for b in boxes], axis=0)
    hi = np.min([np.asarray(b[1], float) for b in boxes], axis=0)
    if np.any(lo >= hi):
        raise ScenarioError("the presets' default domains do not overlap; give domain.box explicitly")
    return lo, hi


def _polynomial_coefficients(spec: PolynomialSpec):
    rng = np.random.default_rng(spec.seed)

    def antisym(shape, scale):
        T = rng.normal(size=shape) * scale
        return 0.5 * (T - np.swapaxes(T, 0, 1))

    A = np.asarray(spec.A, float) if spec.A is not None else antisym((4, 4), spec.A_scale)
    L = np.asarray(spec.L, float) if spec.L is not None else antisym((4, 4, 4), spec.L_scale)
    Q = np.asarray(spec.Q, float) if spec.Q is not None else antisym((4, 4, 4, 4), spec.Q_scale)
    for name, arr, shape in (("A", A, (4, 4)), ("L", L, (4, 4, 4)), ("Q", Q, (4, 4, 4, 4))):
        if arr.shape != shape:
            raise ScenarioError(f"field polynomial.{name}: expected shape {shape}, got {arr.shape}")
    return A, L, Q


def build_runtime(scenario: Scenario) -> Runtime:
    """Instantiate presets, the bracket spec, the domain box and the on-shell initial state."""
    s = scenario
    excl = s.domain.exclusion
    box = None if s.domain.box is None else (np.array(s.domain.box[0], float), np.array(s.domain.box[1], float))
    try:
        metric = preset_metric(s.metric.preset, s.metric.params, exclusion=excl)
        fields = [preset_field(f.preset, f.params, f.label, exclusion=excl, metric=metric) for f in s.fields]
        mass = preset_mass(s.mass.preset, s.mass.params, exclusion=excl) if s.mass is not None else None
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(f"preset construction failed: {exc}") from exc
    if box is None:
        boxes = [metric.box, *(f.box for f in fields), *([mass.box] if mass is not None else [])]
        box = _intersect_boxes(boxes)

    p = s.particles[0]
    hamiltonian = "variable_mass" if s.kind == "variable_mass" else "quadratic"
    try:
        if s.kind == "multiparticle_block":
            charges = ChargeMatrix(np.array([q.charges for q in s.particles]), [q.mass for q in s.particles])
            spec = assemble_multiparticle(charges, fields, metric)
        elif s.kind == "monopole":
            m = s.monopole or MonopoleSpec()
            MonopoleConfig(m.q_e, m.q_m, m.alpha, m.beta, fields[0], m.relation)
            spec = build_bracket("monopole", metric=metric, field=fields[0], q_e=m.q_e, q_m=m.q_m,
                                 particle_mass=p.mass)
        elif s.kind == "custom_polynomial":
            A, L, Q = _polynomial_coefficients(s.polynomial or PolynomialSpec())
            spec = build_bracket("custom_polynomial", metric=metric, A=A, L=L, Q=Q)
        else:
            spec = build_bracket(s.kind, metric=metric, field=fields[0] if fields else None,
                                 q_over_m=p.charges[0] / p.mass, mass=mass)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    rt = Runtime(s, spec, metric, fields, mass, box, np.zeros(8 * len(s.particles)), hamiltonian)
    for i, q in enumerate(s.particles):
        x = np.array(q.x0, float)
        try:
            metric.check(x)
            u = boost_velocity(q.velocity, metric.g(x))
        except (DomainError, ValueError) as exc:
            raise ScenarioError(f"field particles.{i}.x0: {exc}") from exc
        rt.p0[8 * i: 8 * i + 4] = x
        rt.p0[8 * i + 4: 8 * i + 8] = u
        norm = PhasePoint(x, u).norm(metric)
        if abs(norm - 1.0) > s.tolerances.shell_tol:
            raise ScenarioError(f"field particles.{i}: initial state off-shell (U.U = {norm})")
    return rt
