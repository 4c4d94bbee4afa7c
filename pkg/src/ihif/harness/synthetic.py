"""Seeded synthetic datasets of oriented textures, for tests and demos.

Each subject owns a grating orientation; every image of that subject is
the grating with a random phase, a small orientation jitter, random
contrast and additive noise.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..dataset import Image, LabeledImage, SplitSpec, save_pgm
from .config import ExperimentConfig, IcaSettings

# few training images per class: a handful of components generalizes best
SYNTHETIC_N_ICS = 5


def grating(size: int, angle: float, period: float, phase: float, contrast: float,
            noise: float, rng: np.random.Generator) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    u = x * math.cos(angle) + y * math.sin(angle)
    img = 0.5 + contrast * np.sin(2.0 * math.pi * u / period + phase)
    img += noise * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def texture_dataset(n_subjects: int = 4, images_per_subject: int = 6, n_impostors: int = 4,
                    impostor_images: int = 1, size: int = 20, period: float = 5.0,
                    impostor_period: float | None = None, noise: float = 0.03,
                    jitter_deg: float = 3.0, seed: int = 0) -> list[LabeledImage]:
    """Enrolled subjects ``s00, s01, ...`` and impostors ``x00, x01, ...``.

    Enrolled orientations are spread evenly over 180 degrees.  Impostors use
    the orientations halfway between them and ``impostor_period`` (default:
    half of ``period``).
    """
    rng = np.random.default_rng(seed)
    data = []
    step = math.pi / n_subjects

    def images(subject, angle, per, count):
        for k in range(count):
            a = angle + math.radians(jitter_deg) * rng.uniform(-1, 1)
            phase = rng.uniform(0, 2 * math.pi)
            contrast = rng.uniform(0.3, 0.4)
            px = grating(size, a, per, phase, contrast, noise, rng)
            data.append(LabeledImage(Image(px), subject, f"img{k:02d}.pgm"))

    for s in range(n_subjects):
        images(f"s{s:02d}", s * step, period, images_per_subject)
    imp_period = period / 2.0 if impostor_period is None else impostor_period
    for j in range(n_impostors):
        images(f"x{j:02d}", (j + 0.5) * step, imp_period, impostor_images)
    return data


def impostor_ids(data) -> tuple[str, ...]:
    return tuple(sorted({it.subject_id for it in data if it.subject_id.startswith("x")}))


def synthetic_config(data, seed: int = 0, metric: str = "cosine",
                     n_ics: int | None = SYNTHETIC_N_ICS, dataset_root=None) -> ExperimentConfig:
    """Experiment settings matching a :func:`texture_dataset` output."""
    h, w = data[0].image.pixels.shape
    return ExperimentConfig(
        dataset_root=dataset_root,
        width=w,
        height=h,
        ica=IcaSettings(n_ics=n_ics, seed=seed),
        metric=metric,
        split=SplitSpec(seed, 5, impostor_ids(data)),
    )


def write_dataset(data, root) -> Path:
    """Write ``data`` as ``<root>/<subject>/<source>`` PGM files."""
    root = Path(root)
    for it in data:
        d = root / it.subject_id
        d.mkdir(parents=True, exist_ok=True)
        save_pgm(it.image, d / it.source)
    return root
