"""Seeded synthetic source/target pairs in the plane.

Families
--------
checkerboard
    Source: uniform square noise around one of five centres
    ``{(0,0), (+-1,+-1)}``; target: around one of ``{(0,+-1), (+-1,0)}``.
maf_moons_rings
    Source: ``X ~ N(0, I_2)`` mapped to ``(0.5 (X1 + X2^2) - 5, X2)``;
    target: four noisy concentric rings of radii ``3 * {0.25, 0.55, 0.9, 1.2}``.
halfmoon_scurve
    Source: two interleaved half circles; target: an S-curve seen along its
    flat axis.  Both may be rotated, scaled and shifted.

All sampling goes through a counter-based Philox generator keyed by ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset
from .errors import SpecError

FAMILIES = ("checkerboard", "maf_moons_rings", "halfmoon_scurve")

SOURCE_CENTERS = np.array([(0, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)], dtype=float)
TARGET_CENTERS = np.array([(0, 1), (0, -1), (1, 0), (-1, 0)], dtype=float)
RING_RADII = 3.0 * np.array([0.25, 0.55, 0.9, 1.2])
RING_NOISE = 0.08
SHAPE_NOISE = 0.05


@dataclass(frozen=True)
class Transform:
    """``y -> R(angle) (scale * y) + shift``."""

    angle: float = 0.0
    scale: float = 1.0
    shift: tuple = (0.0, 0.0)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        return (self.scale * pts) @ rot.T + np.asarray(self.shift, dtype=float)


@dataclass(frozen=True)
class SyntheticSpec:
    family: str
    n: int
    seed: int = 0
    transform: Transform | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise SpecError(f"n must be a positive integer, got {self.n!r}")


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate(spec: SyntheticSpec) -> tuple[Dataset, Dataset]:
    """Draw ``spec.n`` source and ``spec.n`` target points."""
    rng = rng_for(spec.seed)
    n = int(spec.n)
    if spec.family == "checkerboard":
        src, tgt = _checkerboard(rng, n)
    elif spec.family == "maf_moons_rings":
        src, tgt = _maf_moons(rng, n), _rings(rng, n)
    else:
        src, tgt = _half_moons(rng, n), _s_curve(rng, n)
    if spec.transform is not None:
        src = spec.transform.apply(src)
        tgt = spec.transform.apply(tgt)
    return Dataset(src), Dataset(tgt)


def _checkerboard(rng, n):
    src = SOURCE_CENTERS[rng.integers(len(SOURCE_CENTERS), size=n)]
    src = src + rng.uniform(-0.5, 0.5, size=(n, 2))
    tgt = TARGET_CENTERS[rng.integers(len(TARGET_CENTERS), size=n)]
    tgt = tgt + rng.uniform(-0.5, 0.5, size=(n, 2))
    return src, tgt


def _maf_moons(rng, n):
    x = rng.standard_normal((n, 2))
    return np.column_stack([0.5 * (x[:, 0] + x[:, 1] ** 2) - 5.0, x[:, 1]])


def _rings(rng, n):
    radius = RING_RADII[rng.integers(len(RING_RADII), size=n)]
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return pts + RING_NOISE * rng.standard_normal((n, 2))


def _half_moons(rng, n):
    outer = n // 2
    t = rng.uniform(0.0, np.pi, size=n)
    pts = np.column_stack([np.cos(t), np.sin(t)])
    inner = slice(outer, n)
    pts[inner] = np.column_stack([1.0 - np.cos(t[inner]), 0.5 - np.sin(t[inner])])
    return pts + SHAPE_NOISE * rng.standard_normal((n, 2))


def _s_curve(rng, n):
    t = 3.0 * np.pi * (rng.uniform(size=n) - 0.5)
    pts = np.column_stack([np.sin(t), np.sign(t) * (np.cos(t) - 1.0)])
    return pts + SHAPE_NOISE * rng.standard_normal((n, 2))
