"""Lagrangian energy of a reconstruction triple and its single-site changes."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from .empirical_stats import (
    build_counts,
    build_joint_counts,
    diff_nh,
    substitution_diff,
)
from .exceptions import InvalidInputError
from .validation import check_orders, check_same_length, check_sequence

__all__ = [
    "DistortionMeasure",
    "EnergyBreakdown",
    "LagrangianWeights",
    "average_distortion",
    "compute_energy",
    "delta_bound",
    "energy_delta",
]


@dataclass(frozen=True)
class LagrangianWeights:
    """Coefficients of the three rate surrogates and the three distortions."""

    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma0: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha0: float = 1.0

    def __post_init__(self):
        for name, value in zip(self.names(), astuple(self)):
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidInputError(f"weight {name} must be a number, got {value!r}") from None
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidInputError(f"weight {name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, name, value)

    @staticmethod
    def names() -> tuple[str, ...]:
        return ("gamma1", "gamma2", "gamma0", "alpha1", "alpha2", "alpha0")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def scaled(self, factor: float) -> "LagrangianWeights":
        return LagrangianWeights(*(factor * v for v in astuple(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "LagrangianWeights":
        unknown = set(d) - set(cls.names())
        if unknown:
            raise InvalidInputError(f"unknown weight names: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return dict(zip(self.names(), astuple(self)))


class DistortionMeasure:
    """Single-letter distortion given as an ``A x A`` matrix ``d[source, reproduction]``."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise InvalidInputError(f"distortion matrix must be square with size >= 2, got {m.shape}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise InvalidInputError("distortion entries must be finite and non-negative")
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def hamming(cls, alphabet_size: int = 2) -> "DistortionMeasure":
        return cls(1.0 - np.eye(alphabet_size))

    @property
    def alphabet_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def d_max(self) -> float:
        return float(self.matrix.max())

    def __call__(self, a: int, b: int) -> float:
        return float(self.matrix[a, b])

    def __eq__(self, other):
        return isinstance(other, DistortionMeasure) and np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"DistortionMeasure({self.matrix.tolist()!r})"


@dataclass(frozen=True)
class EnergyBreakdown:
    hk_y: float
    hk_z: float
    hkk1_w: float
    d_y: float
    d_z: float
    d_w: float
    total: float

    @classmethod
    def combine(cls, components, wts: LagrangianWeights) -> "EnergyBreakdown":
        comps = tuple(float(c) for c in components)
        total = float(np.dot(wts.as_array(), comps))
        return cls(*comps, total)

    def components(self) -> tuple[float, ...]:
        return (self.hk_y, self.hk_z, self.hkk1_w, self.d_y, self.d_z, self.d_w)

    def to_dict(self) -> dict:
        return {
            "hk_y": self.hk_y, "hk_z": self.hk_z, "hkk1_w": self.hkk1_w,
            "d_y": self.d_y, "d_z": self.d_z, "d_w": self.d_w, "total": self.total,
        }


def average_distortion(x, y, d: DistortionMeasure | None = None) -> float:
    """Per-symbol distortion ``(1/n) sum_i d(x_i, y_i)``; Hamming by default."""
    x = check_sequence(x, name="x")
    y = check_sequence(y, name="y")
    check_same_length(x, y)
    if d is None:
        return float(np.mean(x != y))
    if max(x.max(), y.max()) >= d.alphabet_size:
        raise InvalidInputError("symbols exceed the distortion matrix size")
    return float(d.matrix[x, y].mean())


def compute_energy(x, y, z, w, wts: LagrangianWeights, d: DistortionMeasure, k: int, k1: int) -> EnergyBreakdown:
    """Evaluate the six-term energy of ``(y, z, w)`` against source ``x`` from scratch."""
    A = d.alphabet_size
    x, y, z, w = (check_sequence(s, A, name=nm) for s, nm in zip((x, y, z, w), "xyzw"))
    n = check_same_length(x, y, z, w)
    check_orders(n, k, k1)
    comps = (
        build_counts(y, k, A).entropy(),
        build_counts(z, k, A).entropy(),
        build_joint_counts(w, y, z, k, k1, A).entropy(),
        average_distortion(x, y, d),
        average_distortion(x, z, d),
        average_distortion(x, w, d),
    )
    return EnergyBreakdown.combine(comps, wts)


def energy_delta(state, which: str, i: int, a: int) -> float:
    """Energy change if ``state.<which>[i]`` were set to ``a``; ``state`` is untouched.

    Only the columns of the count tables touched by the substitution are read.
    """
    seq = {"y": state.y, "z": state.z, "w": state.w}.get(which)
    if seq is None:
        raise InvalidInputError(f"which must be 'y', 'z' or 'w', got {which!r}")
    old = int(seq[i])
    if a == old:
        return 0.0
    wts, n, xi = state.weights, state.n, int(state.x[i])
    dd = state.distortion.matrix[xi, a] - state.distortion.matrix[xi, old]
    triple = (state.w, state.y, state.z)
    joint = state.joint_counts
    if which == "w":
        dj = diff_nh(joint, substitution_diff(joint, triple, i, a, "w"))
        return (wts.gamma0 * dj + wts.alpha0 * dd) / n
    own = state.counts_y if which == "y" else state.counts_z
    dh = diff_nh(own, substitution_diff(own, seq, i, a, "y"))
    dj = diff_nh(joint, substitution_diff(joint, triple, i, a, which))
    if which == "y":
        return (wts.gamma1 * dh + wts.gamma0 * dj + wts.alpha1 * dd) / n
    return (wts.gamma2 * dh + wts.gamma0 * dj + wts.alpha2 * dd) / n


def per_move_entropy_bound(n: int) -> float:
    """Bound on ``|change of n*H|`` when one position's (context, symbol) cell moves.

    Removing or adding one count in a column of mass ``s`` changes
    ``s * H(column)`` by at most ``log2(s) + log2(e)``; a move is one removal
    plus one addition and ``s <= n``.
    """
    return 2.0 * (math.log2(max(n, 1)) + math.log2(math.e))


def delta_bound(wts: LagrangianWeights, d: DistortionMeasure, k: int, k1: int, n: int, A: int | None = None):
    """Upper bounds ``(delta1, delta2, delta0)`` on the energy change of one substitution.

    A ``y`` (or ``z``) substitution moves the cells of ``k + 1`` positions in its
    own table and ``2*k1 + 1`` positions of the joint table; a ``w`` substitution
    moves ``k + 1`` joint positions.  ``A`` is accepted for signature symmetry;
    the bound depends on it only through ``d``.
    """
    c = per_move_entropy_bound(n) / n
    dmax = d.d_max / n
    side = 2 * k1 + 1
    delta1 = wts.gamma1 * (k + 1) * c + wts.gamma0 * side * c + wts.alpha1 * dmax
    delta2 = wts.gamma2 * (k + 1) * c + wts.gamma0 * side * c + wts.alpha2 * dmax
    delta0 = wts.gamma0 * (k + 1) * c + wts.alpha0 * dmax
    return delta1, delta2, delta0
