"""Dense tensors over four spacetime indices with explicit variance labels.

Components are plain numpy arrays of shape ``(4,) * rank``. Each index carries a
variance tag, ``"up"`` (contravariant) or ``"down"`` (covariant). Contraction
refuses to sum two indices of the same variance, which catches a forgotten
metric factor at the point where it would otherwise silently corrupt a result.

The metric signature is fixed to (+, -, -, -) so that on-shell 4-velocities
satisfy ``U_mu U^mu = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

SIGNATURE = (1.0, -1.0, -1.0, -1.0)
ETA = np.diag(SIGNATURE)
ETA.flags.writeable = False

UP = "up"
DOWN = "down"
_SYMMETRIES = ("none", "symmetric", "antisymmetric")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Tensor:
    """Rank-k tensor with one variance tag per index.

    ``symmetry`` applies to rank-2 tensors only; a symmetric or antisymmetric
    flag (anti)symmetrizes the stored components on construction so the flag
    always holds exactly.
    """

    components: np.ndarray
    variance: tuple[str, ...]
    symmetry: str = "none"

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        rank = comps.ndim
        if comps.shape != (4,) * rank:
            raise ValueError(f"tensor components must have shape (4,)*k, got {comps.shape}")
        variance = tuple(self.variance)
        if len(variance) != rank or any(v not in (UP, DOWN) for v in variance):
            raise ValueError(f"variance {variance!r} does not match rank {rank}")
        if not np.all(np.isfinite(comps)):
            raise ValueError("tensor components must be finite")
        if self.symmetry not in _SYMMETRIES:
            raise ValueError(f"unknown symmetry flag {self.symmetry!r}")
        if self.symmetry != "none":
            if rank != 2:
                raise ValueError("symmetry flags are only defined for rank-2 tensors")
            sign = 1.0 if self.symmetry == "symmetric" else -1.0
            comps = 0.5 * (comps + sign * comps.T)
        object.__setattr__(self, "components", _frozen(comps))
        object.__setattr__(self, "variance", variance)

    @property
    def rank(self) -> int:
        return self.components.ndim

    def __getitem__(self, idx):
        return self.components[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)

    def with_components(self, comps, variance=None) -> "Tensor":
        return Tensor(comps, self.variance if variance is None else variance)


def vec4(components, variance: str = UP) -> Tensor:
    comps = np.asarray(components, dtype=float)
    if comps.shape != (4,):
        raise ValueError("a 4-vector needs exactly 4 components")
    return Tensor(comps, (variance,))


def tensor2(components, variance=(UP, UP), symmetry: str = "none") -> Tensor:
    return Tensor(components, tuple(variance), symmetry)


@dataclass(frozen=True)
class MetricValue:
    """Metric at one point: covariant ``g`` and contravariant ``g_inv``."""

    g: np.ndarray
    g_inv: np.ndarray = field(default=None)

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.shape != (4, 4) or not np.all(np.isfinite(g)):
            raise ValueError("metric must be a finite 4x4 array")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-14):
            raise ValueError("metric must be symmetric")
        g = 0.5 * (g + g.T)
        g_inv = np.linalg.inv(g) if self.g_inv is None else np.array(self.g_inv, dtype=float)
        g_inv = 0.5 * (g_inv + g_inv.T)
        if np.max(np.abs(g @ g_inv - np.eye(4))) > 1e-12:
            raise ValueError("g_inv is not the inverse of g to within 1e-12")
        eig = np.linalg.eigvalsh(g)
        if not (np.sum(eig > 0) == 1 and np.sum(eig < 0) == 3):
            raise ValueError(f"metric signature must be (+,-,-,-); eigenvalues {eig}")
        object.__setattr__(self, "g", _frozen(g))
        object.__setattr__(self, "g_inv", _frozen(g_inv))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.g))


def minkowski() -> MetricValue:
    return MetricValue(ETA, ETA)


def _check_slot(t: Tensor, slot: int) -> int:
    if not isinstance(slot, (int, np.integer)) or not -t.rank <= slot < t.rank:
        raise ValueError(f"invalid slot {slot!r} for rank-{t.rank} tensor")
    return int(slot) % t.rank


def _apply_on_slot(mat: np.ndarray, comps: np.ndarray, slot: int) -> np.ndarray:
    out = np.tensordot(mat, comps, axes=([1], [slot]))
    return np.moveaxis(out, 0, slot)


def raise_index(t: Tensor, slot: int, metric: MetricValue) -> Tensor:
    slot = _check_slot(t, slot)
    if t.variance[slot] != DOWN:
        raise ValueError(f"slot {slot} is already contravariant")
    variance = list(t.variance)
    variance[slot] = UP
    return Tensor(_apply_on_slot(metric.g_inv, t.components, slot), tuple(variance))


def lower_index(t: Tensor, slot: int, metric: MetricValue) -> Tensor:
    slot = _check_slot(t, slot)
    if t.variance[slot] != UP:
        raise ValueError(f"slot {slot} is already covariant")
    variance = list(t.variance)
    variance[slot] = DOWN
    return Tensor(_apply_on_slot(metric.g, t.components, slot), tuple(variance))


def contract(a: Tensor, b: Tensor, slot_a: int = -1, slot_b: int = 0):
    """Sum over ``a[slot_a]`` and ``b[slot_b]``; the two slots must differ in variance.

    Returns a float when both operands are vectors, otherwise a Tensor whose
    indices are the remaining indices of ``a`` followed by those of ``b``.
    """
    slot_a = _check_slot(a, slot_a)
    slot_b = _check_slot(b, slot_b)
    if a.variance[slot_a] == b.variance[slot_b]:
        raise ValueError(
            f"cannot contract two {a.variance[slot_a]} indices without a metric"
        )
    comps = np.tensordot(a.components, b.components, axes=([slot_a], [slot_b]))
    variance = a.variance[:slot_a] + a.variance[slot_a + 1:] + b.variance[:slot_b] + b.variance[slot_b + 1:]
    if not variance:
        return float(comps)
    return Tensor(comps, variance)


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def levi_civita_symbol() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for p in permutations(range(4)):
        eps[p] = _perm_sign(p)
    return eps


_EPS = levi_civita_symbol()
_EPS.flags.writeable = False


def levi_civita() -> Tensor:
    """Totally antisymmetric symbol with ``eps_{0123} = +1`` (all indices down)."""
    return Tensor(_EPS, (DOWN,) * 4)


def hodge_dual(F_up: np.ndarray, g: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """Contravariant dual ``(1/2) eps^{mn rs} F_{rs}`` of a contravariant 2-form.

    The Levi-Civita tensor carries the ``sqrt|det g|`` weight, so after raising all
    four indices ``eps^{0123} = -1/sqrt|det g|`` for Lorentzian signature.
    """
    det = np.linalg.det(g)
    eps_up = _EPS * (np.sqrt(abs(det)) / det)
    F_low = g @ F_up @ g.T
    return 0.5 * np.einsum("mnrs,rs->mn", eps_up, F_low)
