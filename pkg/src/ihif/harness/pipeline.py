"""End-to-end training and evaluation of the IHIF recognizer."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import classifier as clf
from ..dataset import Image, LabeledImage, load_dataset, resize, split_dataset, split_indices
from ..errors import DataError, IhifError, StageError
from ..features import (
    ExtractionParams,
    GlobalLengths,
    RaggedFeature,
    build_vector,
    fit_global_lengths,
    localize,
)
from ..gabor import GaborBank, GaborParams, make_bank, magnitude_responses
from ..ica import IcaModel, fit_ica, project
from .config import ExperimentConfig
from .metrics import ConfusionCounts, Metrics, metrics

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything needed to turn an image into a decision."""

    width: int
    height: int
    gabor: GaborParams
    extraction: ExtractionParams
    lengths: GlobalLengths
    ica: IcaModel
    classes: clf.ClassModel
    version: int = FORMAT_VERSION

    def __post_init__(self):
        check_consistency(self)

    @property
    def whitening(self):
        return self.ica.whitening

    def bank(self) -> GaborBank:
        # banks are large; build once per bundle
        cached = self.__dict__.get("_bank")
        if cached is None:
            cached = make_bank(self.gabor)
            object.__setattr__(self, "_bank", cached)
        return cached

    def features(self, image: Image) -> np.ndarray:
        if (image.width, image.height) != (self.width, self.height):
            raise DataError(
                f"image is {image.width}x{image.height}, model expects {self.width}x{self.height}"
            )
        rf = localize(magnitude_responses(image, self.bank()), self.extraction)
        return build_vector(rf, self.lengths)

    def embed(self, image: Image) -> np.ndarray:
        return project(self.features(image), self.ica)

    def classify(self, image: Image) -> clf.Decision:
        return clf.classify(self.embed(image), self.classes)


def check_consistency(b: ModelBundle) -> None:
    wm = b.ica.whitening
    problems = []
    if b.lengths.vector_length != wm.n_features:
        problems.append(f"feature length {b.lengths.vector_length} != whitening input {wm.n_features}")
    if wm.eigvecs.shape != (wm.n_features, wm.dim):
        problems.append(f"eigenvector matrix {wm.eigvecs.shape} != ({wm.n_features}, {wm.dim})")
    if b.ica.unmixing.shape[1] != wm.dim:
        problems.append(f"unmixing columns {b.ica.unmixing.shape[1]} != whitened dimension {wm.dim}")
    if b.classes.means.shape[1] != b.ica.n_ics:
        problems.append(f"class mean length {b.classes.means.shape[1]} != n_ics {b.ica.n_ics}")
    n_blocks = (b.height // b.extraction.block_size) * (b.width // b.extraction.block_size)
    if b.lengths.n_blocks != n_blocks:
        problems.append(f"block count {b.lengths.n_blocks} != {n_blocks} for the image geometry")
    if b.lengths.lengths.size != b.gabor.n_scales * b.gabor.n_orientations:
        problems.append("retained lengths do not cover every response")
    if problems:
        raise DataError("inconsistent model bundle: " + "; ".join(problems))


@contextmanager
def _stage(name, item=None):
    """Re-raise package errors from one stage as :class:`StageError`."""
    try:
        yield
    except StageError:
        raise
    except (IhifError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, str(exc), item=item, cause=exc) from exc


def ragged_features(images: Sequence[LabeledImage], bank: GaborBank, params: ExtractionParams,
                    jobs: int = 1) -> list[RaggedFeature]:
    """Localize high-intensity values for every image, in input order."""

    def one(item: LabeledImage) -> RaggedFeature:
        with _stage("features", item=f"{item.subject_id}/{item.source}"):
            return localize(magnitude_responses(item.image, bank), params)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, images))
    return [one(item) for item in images]


def load_images(config: ExperimentConfig) -> list[LabeledImage]:
    if config.dataset_root is None:
        raise StageError("load", "dataset.root is not set")
    with _stage("load", item=str(config.dataset_root)):
        return load_dataset(config.dataset_root, size=(config.width, config.height))


def conform(data: Sequence[LabeledImage], width: int, height: int) -> list[LabeledImage]:
    return [
        it if (it.image.width, it.image.height) == (width, height)
        else LabeledImage(resize(it.image, width, height), it.subject_id, it.source)
        for it in data
    ]


def prepare_split(config: ExperimentConfig, data: Sequence[LabeledImage] | None = None):
    """Load (unless given), resize and split the dataset named by ``config``."""
    if data is None:
        data = load_images(config)
    with _stage("load"):
        data = conform(data, config.width, config.height)
    with _stage("split"):
        return split_dataset(data, config.split)


def train_on(train: Sequence[LabeledImage], config: ExperimentConfig, jobs: int = 1) -> ModelBundle:
    """Fit every stage on an explicit training list."""
    if not train:
        raise StageError("split", "training set is empty")
    with _stage("gabor"):
        bank = make_bank(config.gabor)
    train = conform(train, config.width, config.height)
    rfs = ragged_features(train, bank, config.extraction, jobs=jobs)
    with _stage("features"):
        lengths = fit_global_lengths(rfs)
        X = np.stack([build_vector(rf, lengths) for rf in rfs], axis=1)
    log.info("feature matrix %s", X.shape)
    s = config.ica
    with _stage("ica"):
        ica_model, S = fit_ica(X, n_ics=s.n_ics, seed=s.seed, tol=s.tol, max_iter=s.max_iter,
                               eigen_floor=s.eigen_floor, strict=s.strict)
    labels = [it.subject_id for it in train]
    with _stage("classifier"):
        order, means = clf.class_means(S.T, labels)
        cal = calibration_scores(X, labels, config)
        tau = clf.calibrate_threshold(cal)
        classes = clf.ClassModel(tuple(order), means, tau, config.metric)
    bundle = ModelBundle(config.width, config.height, config.gabor, config.extraction,
                         lengths, ica_model, classes)
    object.__setattr__(bundle, "_bank", bank)
    return bundle


MAX_SUBJECT_FOLDS = 5


def _fold_scores(X, labels, fit_mask, config: ExperimentConfig):
    """Fit centering, whitening, ICA and class means on ``fit_mask`` columns.

    Returns ``(class_labels, means, embedded held-out columns)``.
    """
    s = config.ica
    fit_X = X[:, fit_mask]
    n_ics = s.n_ics
    if n_ics is not None:
        n_ics = min(n_ics, fit_X.shape[1] - 1)
    model, S = fit_ica(fit_X, n_ics=n_ics, seed=s.seed, tol=s.tol, max_iter=s.max_iter,
                       eigen_floor=s.eigen_floor)
    fit_labels = [lab for lab, keep in zip(labels, fit_mask) if keep]
    order, means = clf.class_means(S.T, fit_labels)
    held = project(X[:, ~fit_mask], model)
    return order, means, held


def calibration_scores(X, labels, config: ExperimentConfig):
    """Cross-validated ``(score, is_genuine)`` pairs for the acceptance threshold.

    Genuine scores come from stratified folds that hold out one training
    image per subject and score it against its own class mean.  Impostor
    scores come from folds that hold out whole subjects (round-robin over at
    most ``MAX_SUBJECT_FOLDS`` groups) and take the best score over the
    remaining classes, i.e. how an unenrolled face looks to the model.
    Subjects with a single training image fall back to resubstitution.
    """
    labels = list(labels)
    n = len(labels)
    subjects = sorted(set(labels))
    rank = {}
    counts = {lab: 0 for lab in subjects}
    for i, lab in enumerate(labels):
        rank[i] = counts[lab]
        counts[lab] += 1
    out = []

    n_image_folds = max(counts.values())
    single = {lab for lab, c in counts.items() if c < 2}
    for fold in range(n_image_folds):
        held = np.array([rank[i] == fold and labels[i] not in single for i in range(n)])
        if not held.any() or (~held).sum() < 2:
            continue
        order, means, Z = _fold_scores(X, labels, ~held, config)
        for col, i in enumerate(np.flatnonzero(held)):
            own = order.index(labels[i])
            out.append((float(clf.scores(Z[:, col], means, config.metric)[own]), True))
    if single:
        s = config.ica
        _, S = fit_ica(X, n_ics=s.n_ics, seed=s.seed, tol=s.tol, max_iter=s.max_iter,
                       eigen_floor=s.eigen_floor)
        order, means = clf.class_means(S.T, labels)
        for i, lab in enumerate(labels):
            if lab in single:
                own = order.index(lab)
                out.append((float(clf.scores(S[:, i], means, config.metric)[own]), True))

    if len(subjects) > 1:
        n_groups = min(len(subjects), MAX_SUBJECT_FOLDS)
        for g in range(n_groups):
            group = {lab for k, lab in enumerate(subjects) if k % n_groups == g}
            held = np.array([lab in group for lab in labels])
            if (~held).sum() < 2:
                continue
            order, means, Z = _fold_scores(X, labels, ~held, config)
            for col in range(Z.shape[1]):
                out.append((float(np.min(clf.scores(Z[:, col], means, config.metric))), False))
    return out


def run_training(config: ExperimentConfig, data: Sequence[LabeledImage] | None = None,
                 jobs: int = 1) -> ModelBundle:
    """Load, split and fit; ``data`` replaces loading from ``config.dataset_root``."""
    train, _, _ = prepare_split(config, data)
    return train_on(train, config, jobs=jobs)


@dataclass(frozen=True)
class ImageResult:
    subject_id: str
    source: str
    kind: str  # "pos" or "neg"
    predicted: str
    score: float
    accepted: bool
    outcome: str  # TP, FN, FP or TN


@dataclass(frozen=True)
class Evaluation:
    counts: ConfusionCounts
    metrics: Metrics
    rows: tuple[ImageResult, ...]


def _outcome(kind: str, truth: str, decision: clf.Decision) -> str:
    if kind == "pos":
        return "TP" if decision.accepted and decision.label == truth else "FN"
    return "FP" if decision.accepted else "TN"


def run_evaluation(bundle: ModelBundle, positive_test: Sequence[LabeledImage],
                   negative_test: Sequence[LabeledImage], jobs: int = 1) -> Evaluation:
    """Score positive (enrolled) and negative (impostor) test images.

    A positive counts as TP only when accepted with its own label; any
    accepted negative is a FP.
    """
    if not positive_test and not negative_test:
        raise StageError("evaluate", "no test images")
    bundle.bank()
    tasks = [("pos", it) for it in positive_test] + [("neg", it) for it in negative_test]

    def one(task) -> ImageResult:
        kind, it = task
        with _stage("evaluate", item=f"{it.subject_id}/{it.source}"):
            d = bundle.classify(it.image)
        return ImageResult(it.subject_id, it.source, kind, d.label, d.score, d.accepted,
                           _outcome(kind, it.subject_id, d))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, tasks))
    else:
        rows = [one(t) for t in tasks]
    rows.sort(key=lambda r: (r.kind != "pos", r.subject_id, r.source))
    tally = {k: 0 for k in ("TP", "FP", "TN", "FN")}
    for r in rows:
        tally[r.outcome] += 1
    counts = ConfusionCounts(tally["TP"], tally["FP"], tally["TN"], tally["FN"])
    return Evaluation(counts, metrics(counts), tuple(rows))


def extract_matrix(config: ExperimentConfig, data: Sequence[LabeledImage] | None = None,
                   jobs: int = 1):
    """Feature vectors of every image, with lengths fitted on the training split.

    Returns ``(items, vectors)`` where ``vectors`` is ``(n_images, dim)``.
    """
    if data is None:
        data = load_images(config)
    data = conform(data, config.width, config.height)
    with _stage("split"):
        train_idx, _, _ = split_indices(data, config.split)
    with _stage("gabor"):
        bank = make_bank(config.gabor)
    rfs = ragged_features(data, bank, config.extraction, jobs=jobs)
    with _stage("features"):
        lengths = fit_global_lengths([rfs[i] for i in train_idx])
        vectors = np.stack([build_vector(rf, lengths) for rf in rfs])
    return data, vectors


__all__ = [
    "Evaluation",
    "ImageResult",
    "ModelBundle",
    "extract_matrix",
    "prepare_split",
    "run_evaluation",
    "run_training",
    "train_on",
]
