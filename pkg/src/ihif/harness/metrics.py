"""Confusion counts and the rates derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    """Rates in [0, 1]; ``None`` where the denominator is zero."""

    sensitivity: float | None
    specificity: float | None
    false_positive_rate: float | None
    false_negative_rate: float | None
    accuracy: float | None

    def as_dict(self):
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "false_positive_rate": self.false_positive_rate,
            "false_negative_rate": self.false_negative_rate,
            "accuracy": self.accuracy,
        }


def _ratio(num: int, den: int):
    return Fraction(num, den) if den > 0 else None


def exact_rates(c: ConfusionCounts) -> dict[str, Fraction | None]:
    """The rates as exact fractions, keyed like ``Metrics.as_dict``."""
    positives = c.tp + c.fn
    negatives = c.fp + c.tn
    return {
        "sensitivity": _ratio(c.tp, positives),
        "specificity": _ratio(c.tn, negatives),
        "false_positive_rate": _ratio(c.fp, negatives),
        "false_negative_rate": _ratio(c.fn, positives),
        "accuracy": _ratio(c.tp + c.tn, c.total),
    }


def metrics(c: ConfusionCounts) -> Metrics:
    # each rate is rounded once from its exact value
    return Metrics(**{k: None if v is None else float(v) for k, v in exact_rates(c).items()})
