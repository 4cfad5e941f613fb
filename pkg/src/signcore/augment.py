"""Seeded image augmentation: rotation, horizontal shear and horizontal flip.

Geometry: pixel (row y, col x) has centred coordinates relative to
``((H-1)/2, (W-1)/2)``.  Transforms are applied by inverse mapping with
bilinear sampling; source points outside the image read 0.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import LabeledSample, TrainSplit, default_workers
from .tensor import Rng

_AUGMENT_KEY = 0x4147


@dataclass
class AugmentConfig:
    rotation_range_deg: tuple[float, float] = (0.0, 360.0)
    shear_range: float = 0.2
    hflip_probability: float = 0.5
    copies_per_image: int = 1

    def __post_init__(self):
        lo, hi = self.rotation_range_deg
        if lo > hi:
            raise ValueError(f"rotation range [{lo}, {hi}] is empty")
        if not 0.0 <= self.shear_range <= 1.0:
            raise ValueError(f"shear range must be in [0, 1], got {self.shear_range}")
        if not 0.0 <= self.hflip_probability <= 1.0:
            raise ValueError(f"flip probability must be in [0, 1], got {self.hflip_probability}")
        if int(self.copies_per_image) != self.copies_per_image or self.copies_per_image < 1:
            raise ValueError(f"copies_per_image must be a positive integer, got {self.copies_per_image}")
        self.rotation_range_deg = (float(lo), float(hi))


def _warp(image, coeffs):
    image = np.ascontiguousarray(image, dtype=np.float64)
    h, w, _ = image.shape
    return kernels.warp_bilinear(image, h, w, np.asarray(coeffs, dtype=np.float64), False)


def rotate(image, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise (as displayed) about the image centre."""
    image = np.asarray(image, dtype=np.float64)
    deg = math.fmod(degrees, 360.0)
    if deg < 0:
        deg += 360.0
    if deg == 0.0:
        return image.copy()
    h, w, _ = image.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    t = math.radians(deg)
    cos, sin = math.cos(t), math.sin(t)
    # src = R(t) @ (x - cx, y - cy) + (cx, cy), with y pointing down
    return _warp(image, (cos, -sin, cx - cos * cx + sin * cy, sin, cos, cy - sin * cx - cos * cy))


def shear(image, factor: float) -> np.ndarray:
    """Horizontal shear ``x' = x + factor * (y - cy)``."""
    if abs(factor) > 1.0:
        raise ValueError(f"|shear factor| must be <= 1, got {factor}")
    image = np.asarray(image, dtype=np.float64)
    if factor == 0.0:
        return image.copy()
    h = image.shape[0]
    cy = (h - 1) / 2
    return _warp(image, (1.0, -factor, factor * cy, 0.0, 1.0, 0.0))


def hflip(image) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(image)[:, ::-1, :])


def augment_one(image, config: AugmentConfig, rng: Rng) -> np.ndarray:
    lo, hi = config.rotation_range_deg
    angle = rng.uniform(lo, hi)
    factor = rng.uniform(-config.shear_range, config.shear_range)
    flip = rng.bernoulli(config.hflip_probability)
    out = rotate(image, angle)
    out = shear(out, factor)
    return hflip(out) if flip else out


def augment_batch(samples, config: AugmentConfig, seed: int, workers: int | None = None):
    """Return ``copies_per_image`` augmented copies of every sample.

    Copy ``k`` of sample ``i`` draws its rotation, shear and flip from its own
    stream keyed by ``(seed, i, k)``, so the output does not depend on
    ``workers``.  Output order is sample-major.
    """
    if isinstance(seed, Rng):
        seed = seed.seed
    samples = list(samples)
    jobs = [(i, k) for i in range(len(samples)) for k in range(config.copies_per_image)]

    def run(job):
        i, k = job
        s = samples[i]
        img = augment_one(s.image, config, Rng.derived(seed, _AUGMENT_KEY, i, k))
        return LabeledSample(img, s.class_index, s.source)

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) < 2:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))


def augment_training_set(train: TrainSplit, config: AugmentConfig, seed: int,
                         keep_originals: bool = True, workers: int | None = None) -> TrainSplit:
    """Augment a training partition; test partitions are rejected."""
    if not isinstance(train, TrainSplit):
        raise TypeError("augmentation only accepts a TrainSplit (the training partition)")
    extra = augment_batch(train.samples, config, seed, workers)
    samples = (list(train.samples) if keep_originals else []) + extra
    return TrainSplit(samples, list(train.class_names))
