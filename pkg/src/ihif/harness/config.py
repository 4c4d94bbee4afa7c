"""Experiment configuration and its flat ``key = value`` file format.

Keys are dotted, e.g. ``gabor.sigma = 6.283185307179586``.  Blank lines
and lines starting with ``#`` are ignored.  ``auto`` selects the computed
default of an optional key.

=========================  ==========  ===========================================
key                        default     meaning
=========================  ==========  ===========================================
dataset.root               (none)      ``<root>/<subject>/<images>``; relative to the file
dataset.width              92          image width after resizing
dataset.height             112         image height after resizing
split.seed                 0           seed of the train/test draw
split.train_per_subject    5           training images per enrolled subject
split.impostors            (empty)     comma-separated subjects used only as impostors
gabor.sigma                2*pi        envelope width
gabor.k_max                pi/2        wave number of the finest scale
gabor.f                    sqrt(2)     spacing factor between scales
gabor.n_scales             5
gabor.n_orientations       8
gabor.kernel_size          auto        odd support; auto covers the coarsest envelope
features.block_size        4           block side W in pixels
features.threshold         3.0         band around the block mean
ica.n_ics                  auto        min(500, whitened dimension)
ica.tol                    1e-10       convergence tolerance on |<w_new, w_old>|
ica.max_iter               1000        sweep limit
ica.eigen_floor            auto        1e-10 times the largest eigenvalue
ica.seed                   0           seed of the random initial unmixing matrix
ica.strict                 false       non-convergence is an error when true
classifier.metric          cosine      ``cosine`` or ``l2``
=========================  ==========  ===========================================
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from ..dataset import DEFAULT_HEIGHT, DEFAULT_WIDTH, SplitSpec
from ..errors import DataError
from ..features import ExtractionParams
from ..gabor import GaborParams, auto_kernel_size


@dataclass(frozen=True)
class IcaSettings:
    n_ics: int | None = None
    tol: float = 1e-10
    max_iter: int = 1000
    eigen_floor: float | None = None
    seed: int = 0
    strict: bool = False

    def __post_init__(self):
        if self.n_ics is not None and self.n_ics < 1:
            raise ValueError("ica.n_ics must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("ica.tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("ica.max_iter must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: Path | None = None
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    gabor: GaborParams = field(default_factory=GaborParams)
    extraction: ExtractionParams = field(default_factory=ExtractionParams)
    ica: IcaSettings = field(default_factory=IcaSettings)
    metric: str = "cosine"
    split: SplitSpec = field(default_factory=lambda: SplitSpec(seed=0))

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image geometry must be positive")
        if self.metric not in ("cosine", "l2"):
            raise ValueError(f"classifier.metric must be 'cosine' or 'l2', got {self.metric!r}")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(kind):
    def parse(text):
        return None if text.lower() in ("auto", "none", "") else kind(text)
    return parse


def _names(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# key -> (section, attribute, parser)
_KEYS = {
    "dataset.root": ("top", "dataset_root", Path),
    "dataset.width": ("top", "width", int),
    "dataset.height": ("top", "height", int),
    "split.seed": ("split", "seed", int),
    "split.train_per_subject": ("split", "train_per_subject", int),
    "split.impostors": ("split", "impostor_subjects", _names),
    "gabor.sigma": ("gabor", "sigma", float),
    "gabor.k_max": ("gabor", "k_max", float),
    "gabor.f": ("gabor", "f", float),
    "gabor.n_scales": ("gabor", "n_scales", int),
    "gabor.n_orientations": ("gabor", "n_orientations", int),
    "gabor.kernel_size": ("gabor", "kernel_size", _optional(int)),
    "features.block_size": ("extraction", "block_size", int),
    "features.threshold": ("extraction", "threshold", float),
    "ica.n_ics": ("ica", "n_ics", _optional(int)),
    "ica.tol": ("ica", "tol", float),
    "ica.max_iter": ("ica", "max_iter", int),
    "ica.eigen_floor": ("ica", "eigen_floor", _optional(float)),
    "ica.seed": ("ica", "seed", int),
    "ica.strict": ("ica", "strict", _parse_bool),
    "classifier.metric": ("top", "metric", str),
}
KNOWN_KEYS = tuple(_KEYS)


def parse_assignments(lines, source="<config>") -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise DataError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in _KEYS:
            raise DataError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(values: dict[str, str], base: ExperimentConfig | None = None,
                 relative_to: Path | None = None) -> ExperimentConfig:
    """Apply raw ``key -> text`` assignments on top of ``base``."""
    base = base or ExperimentConfig()
    sections = {
        "top": {},
        "split": {},
        "gabor": {},
        "extraction": {},
        "ica": {},
    }
    for key, text in values.items():
        section, attr, parse = _KEYS[key]
        try:
            sections[section][attr] = parse(text)
        except ValueError as exc:
            raise DataError(f"bad value for {key}: {exc}") from None
    top = sections["top"]
    root = top.get("dataset_root")
    if root is not None and relative_to is not None and not root.is_absolute():
        top["dataset_root"] = relative_to / root
    gabor_changes = sections["gabor"]
    if "kernel_size" not in gabor_changes and base.gabor.kernel_size == auto_kernel_size(base.gabor):
        # an automatic support follows the other gabor parameters
        gabor_changes["kernel_size"] = None
    try:
        return replace(
            base,
            gabor=replace(base.gabor, **gabor_changes),
            extraction=replace(base.extraction, **sections["extraction"]),
            ica=replace(base.ica, **sections["ica"]),
            split=replace(base.split, **sections["split"]),
            **top,
        )
    except ValueError as exc:
        raise DataError(f"invalid configuration: {exc}") from None


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read config ({exc})") from None
    values = parse_assignments(text.splitlines(), str(path))
    values.update(overrides or {})
    return build_config(values, relative_to=path.parent)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` in the file format; ``load_config`` reads it back."""
    objs = {
        "top": cfg,
        "split": cfg.split,
        "gabor": cfg.gabor,
        "extraction": cfg.extraction,
        "ica": cfg.ica,
    }
    lines = []
    for key, (section, attr, _) in _KEYS.items():
        value = getattr(objs[section], attr)
        if key == "dataset.root" and value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"

