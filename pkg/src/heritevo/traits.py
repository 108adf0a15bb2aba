"""The six phenotypic traits measured on every robot."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from heritevo.morphology import BodyGraph, GridEmbedding, count_leaves, count_modules, max_leaves

TRAIT_NAMES = ("proportion", "size", "limbs", "coverage", "speed", "balance")


@dataclass(frozen=True)
class TraitVector:
    proportion: float
    size: int
    limbs: float
    coverage: float
    speed: float
    balance: float

    def as_tuple(self) -> tuple:
        return astuple(self)

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)

    @classmethod
    def from_values(cls, values) -> TraitVector:
        kw = {}
        for f, v in zip(fields(cls), values):
            kw[f.name] = int(float(v)) if f.name == "size" else float(v)
        return cls(**kw)


@dataclass(frozen=True)
class Trajectory:
    """Core pose sampled at a fixed period.

    ``positions`` is ``(n, 3)`` in cm, ``orientations`` is ``(n, 3)`` holding
    roll, pitch and yaw in degrees.
    """

    sample_period: float
    positions: np.ndarray
    orientations: np.ndarray

    def __post_init__(self):
        if len(self.positions) < 2 or len(self.positions) != len(self.orientations):
            raise ValueError("trajectory needs >= 2 samples with matching orientations")

    @property
    def duration(self) -> float:
        return (len(self.positions) - 1) * self.sample_period

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.positions)) * self.sample_period

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.sample_period == other.sample_period
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.orientations, other.orientations)
        )

    @classmethod
    def stationary(cls, n_samples: int, sample_period: float) -> Trajectory:
        return cls(sample_period, np.zeros((n_samples, 3)), np.zeros((n_samples, 3)))


def _xy_extent(e: GridEmbedding) -> tuple[int, int]:
    c = e.coords()
    span = c.max(axis=0) - c.min(axis=0) + 1
    return int(span[0]), int(span[1])


def proportion(e: GridEmbedding) -> float:
    """Short side over long side of the top-down bounding rectangle."""
    w, h = _xy_extent(e)
    return min(w, h) / max(w, h)


def limbs(body: BodyGraph) -> float:
    n = count_modules(body)
    best = max_leaves(n)
    if best == 0:
        return 0.0
    return count_leaves(body) / best


def coverage(e: GridEmbedding) -> float:
    """Occupied cells over the cells of the 3D bounding box."""
    c = e.coords()
    span = c.max(axis=0) - c.min(axis=0) + 1
    return len(c) / int(np.prod(span))


def speed(t: Trajectory) -> float:
    """Straight-line planar displacement over the evaluation time, in cm/s."""
    d = t.positions[-1, :2] - t.positions[0, :2]
    return float(np.hypot(d[0], d[1]) / t.duration)


def fold_angle(deg: np.ndarray) -> np.ndarray:
    """Magnitude of an angle wrapped to [-180, 180], i.e. a value in [0, 180]."""
    wrapped = (np.asarray(deg, dtype=float) + 180.0) % 360.0 - 180.0
    return np.abs(wrapped)


def balance(t: Trajectory) -> float:
    roll = fold_angle(t.orientations[:, 0])
    pitch = fold_angle(t.orientations[:, 1])
    n = len(roll)
    return float(1.0 - np.sum(roll + pitch) / (180.0 * 2.0 * n))


def trait_vector(body: BodyGraph, e: GridEmbedding, t: Trajectory) -> TraitVector:
    return TraitVector(
        proportion=proportion(e),
        size=count_modules(body),
        limbs=limbs(body),
        coverage=coverage(e),
        speed=speed(t),
        balance=balance(t),
    )
