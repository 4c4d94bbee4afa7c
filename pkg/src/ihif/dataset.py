"""Grayscale image loading, bilinear resizing and seeded dataset splits.

Images are held as float64 arrays of shape ``(height, width)`` with
intensities in ``[0, 1]``.  A dataset lives on disk as
``<root>/<subject_id>/<image files>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import DataError

log = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_WIDTH = 92
DEFAULT_HEIGHT = 112
IMAGE_SUFFIXES = (".pgm", ".png")
SPLIT_TAGS = ("train", "pos", "neg")


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable grayscale image; ``pixels`` is row-major ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"image must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise DataError("image contains non-finite intensities")
        if px.min() < 0.0 or px.max() > 1.0:
            raise DataError("image intensities must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class LabeledImage:
    image: Image
    subject_id: str
    # file name inside the subject directory; used for split manifests
    source: str = ""

    def __post_init__(self):
        if not self.subject_id:
            raise DataError("subject_id must be non-empty")


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    train_per_subject: int = 5
    impostor_subjects: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DataError("split seed must be a 64-bit unsigned integer")
        if self.train_per_subject < 1:
            raise DataError("train_per_subject must be >= 1")
        object.__setattr__(self, "impostor_subjects", tuple(self.impostor_subjects))


def load_image(path) -> Image:
    """Read an 8-bit grayscale PGM (P5) or a grayscale/RGB PNG.

    Color input is reduced to luma with weights 0.299/0.587/0.114 before
    scaling by 1/255.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            fmt = im.format
            mode = im.mode
            if fmt not in ("PPM", "PNG"):
                raise DataError(f"{path}: unsupported image format {fmt!r}")
            if fmt == "PPM" and mode != "L":
                # PPM (P6) and 16-bit PGM are rejected
                raise DataError(f"{path}: only 8-bit grayscale PGM is supported (mode {mode})")
            if mode in ("L", "1"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
            elif mode == "LA":
                arr = np.asarray(im.getchannel("L"), dtype=np.float64)
            elif mode in ("RGB", "RGBA", "P"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = rgb @ np.array(LUMA_WEIGHTS)
            else:
                raise DataError(f"{path}: unsupported pixel mode {mode!r}")
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such file") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from exc
    if arr.size == 0:
        raise DataError(f"{path}: zero-dimension image")
    return Image(np.clip(arr / 255.0, 0.0, 1.0))


def save_pgm(img: Image, path) -> None:
    """Write ``img`` as binary 8-bit PGM, rounding intensities to k/255."""
    data = np.rint(img.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def _interp_axis(n_in: int, n_out: int):
    # corner-aligned sampling: output ends map onto input ends
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize(img: Image, out_w: int, out_h: int) -> Image:
    """Bilinear resize to ``(out_w, out_h)`` with corner-aligned sampling."""
    if out_w < 1 or out_h < 1:
        raise DataError(f"output size must be positive, got {out_w}x{out_h}")
    if (out_w, out_h) == (img.width, img.height):
        return img
    px = img.pixels
    x0, x1, fx = _interp_axis(img.width, out_w)
    y0, y1, fy = _interp_axis(img.height, out_h)
    rows = px[:, x0] * (1.0 - fx) + px[:, x1] * fx
    out = rows[y0, :] * (1.0 - fy)[:, None] + rows[y1, :] * fy[:, None]
    return Image(np.clip(out, 0.0, 1.0))


def load_dataset(root, size: tuple[int, int] | None = None) -> list[LabeledImage]:
    """Load ``<root>/<subject_id>/*.{pgm,png}`` in lexicographic order.

    If ``size`` is given as ``(width, height)`` every image is resized to it.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: dataset root is not a directory")
    data = []
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if subject_dir.name.startswith("."):
            continue
        for path in sorted(subject_dir.iterdir()):
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            img = load_image(path)
            if size is not None:
                img = resize(img, *size)
            data.append(LabeledImage(img, subject_dir.name, path.name))
    if not data:
        raise DataError(f"{root}: no images found")
    log.debug("loaded %d images from %s", len(data), root)
    return data


def _group_by_subject(data: Sequence[LabeledImage]) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, item in enumerate(data):
        groups.setdefault(item.subject_id, []).append(i)
    return groups


def split_indices(data: Sequence[LabeledImage], spec: SplitSpec):
    """Index form of :func:`split_dataset`: three ascending index lists."""
    if not data:
        raise DataError("cannot split an empty dataset")
    groups = _group_by_subject(data)
    unknown = sorted(set(spec.impostor_subjects) - set(groups))
    if unknown:
        raise DataError(f"impostor subjects not present in dataset: {unknown}")
    impostors = set(spec.impostor_subjects)
    enrolled = sorted(s for s in groups if s not in impostors)
    if not enrolled:
        raise DataError("no enrolled subjects left after removing impostors")

    rng = np.random.default_rng(int(spec.seed))
    chosen: set[int] = set()
    for subject in enrolled:
        idx = groups[subject]
        if len(idx) < spec.train_per_subject + 1:
            raise DataError(
                f"subject {subject!r} has {len(idx)} images, needs at least "
                f"{spec.train_per_subject + 1}"
            )
        picks = rng.choice(len(idx), size=spec.train_per_subject, replace=False)
        chosen.update(idx[p] for p in picks)

    train, positive, negative = [], [], []
    for i, item in enumerate(data):
        if item.subject_id in impostors:
            negative.append(i)
        elif i in chosen:
            train.append(i)
        else:
            positive.append(i)
    return train, positive, negative


def split_dataset(data: Sequence[LabeledImage], spec: SplitSpec):
    """Partition ``data`` into ``(train, positive_test, negative_test)``.

    For every enrolled subject ``spec.train_per_subject`` images are drawn
    without replacement by a generator seeded with ``spec.seed``; the rest of
    that subject's images are positive tests.  All images of impostor subjects
    become negative tests.  Within each list, input order is preserved.
    """
    return tuple([data[i] for i in part] for part in split_indices(data, spec))


def write_manifest(path, train, positive, negative) -> None:
    """Write ``subject_id<TAB>filename<TAB>{train|pos|neg}`` lines."""
    lines = []
    for tag, items in zip(SPLIT_TAGS, (train, positive, negative)):
        lines.extend(f"{it.subject_id}\t{it.source}\t{tag}" for it in items)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_manifest(path) -> list[tuple[str, str, str]]:
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[2] not in SPLIT_TAGS:
            raise DataError(f"{path}:{lineno}: malformed manifest line {line!r}")
        entries.append((parts[0], parts[1], parts[2]))
    return entries


def apply_manifest(data: Sequence[LabeledImage], entries):
    """Rebuild a split from manifest entries, matching on (subject, filename)."""
    index = {(it.subject_id, it.source): it for it in data}
    out: dict[str, list[LabeledImage]] = {tag: [] for tag in SPLIT_TAGS}
    for subject, name, tag in entries:
        try:
            out[tag].append(index[(subject, name)])
        except KeyError:
            raise DataError(f"manifest refers to missing image {subject}/{name}") from None
    return out["train"], out["pos"], out["neg"]
