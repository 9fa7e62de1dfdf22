"""Lexical features of a registrable domain name and per-class summaries."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .normalizer import NormalizedDomain

FEATURE_NAMES = ("length", "hyphens", "digits", "entropy")


def shannon_entropy(s: str) -> float:
    """Shannon entropy of the character distribution of ``s``, in bits."""
    if not s:
        raise ValueError("entropy of an empty string is undefined")
    n = float(len(s))
    h = -sum(c / n * math.log2(c / n) for c in Counter(s).values())
    # a single-symbol string sums to -0.0
    return h if h > 0.0 else 0.0


@dataclass(frozen=True)
class FeatureSetConfig:
    include_entropy: bool = True

    @property
    def dimension(self) -> int:
        return 4 if self.include_entropy else 3

    @property
    def names(self) -> tuple[str, ...]:
        return FEATURE_NAMES[: self.dimension]


WITH_ENTROPY = FeatureSetConfig(True)
WITHOUT_ENTROPY = FeatureSetConfig(False)


@dataclass(frozen=True)
class FeatureVector:
    length: int
    hyphens: int
    digits: int
    entropy: float
    label: int | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if not (0 <= self.hyphens <= self.length and 0 <= self.digits <= self.length):
            raise ValueError(f"counts out of range: {self}")
        if not (0.0 <= self.entropy <= math.log2(self.length) + 1e-9):
            raise ValueError(f"entropy {self.entropy} outside [0, log2({self.length})]")
        if self.label not in (None, 0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    def values(self, fs: FeatureSetConfig = WITH_ENTROPY) -> tuple[float, ...]:
        row = (float(self.length), float(self.hyphens), float(self.digits), self.entropy)
        return row[: fs.dimension]

    def with_label(self, label: int | None) -> FeatureVector:
        return FeatureVector(self.length, self.hyphens, self.digits, self.entropy, label)


def extract_features(domain: NormalizedDomain | str, label: int | None = None) -> FeatureVector:
    """Length, hyphen count, digit count and entropy of the registrable name.

    TLD and SLD never contribute. A bare string is taken to be the name itself.
    """
    name = domain.name if isinstance(domain, NormalizedDomain) else domain
    return FeatureVector(
        length=len(name),
        hyphens=name.count("-"),
        digits=sum(c in "0123456789" for c in name),
        entropy=shannon_entropy(name),
        label=label,
    )


def feature_matrix(vectors: Sequence[FeatureVector], fs: FeatureSetConfig = WITH_ENTROPY) -> np.ndarray:
    if not vectors:
        return np.empty((0, fs.dimension))
    return np.array([v.values(fs) for v in vectors], dtype=np.float64)


@dataclass(frozen=True)
class ClassStats:
    """Arithmetic feature means per class, indexed by label (0 benign, 1 malicious)."""

    means: dict[int, tuple[float, float, float, float]]
    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


STATS_ROWS = ("Host length", "Hyphens", "Numeric Characters", "Entropy")
CLASS_NAMES = {0: "benign", 1: "malicious"}


def dataset_stats(ds) -> ClassStats:
    """Per-class means of the four numeric features.

    ``ds`` is a LabeledDataset or any iterable of labelled FeatureVectors.
    """
    vectors: Iterable[FeatureVector] = getattr(ds, "vectors", ds)
    groups: dict[int, list[tuple[float, ...]]] = {0: [], 1: []}
    for v in vectors:
        if v.label is None:
            raise ValueError("dataset_stats needs labelled rows")
        groups[v.label].append(v.values())
    if not groups[0] and not groups[1]:
        raise ValueError("empty dataset")
    for label, rows in groups.items():
        if not rows:
            raise ValueError(f"no rows of class {label} ({CLASS_NAMES[label]})")
    means = {
        label: tuple(math.fsum(col) / len(rows) for col in zip(*rows))
        for label, rows in groups.items()
    }
    return ClassStats(means=means, counts={k: len(v) for k, v in groups.items()})


def render_stats(stats: ClassStats) -> str:
    header = ("Feature", "Legitimate links", "Malicious links")
    body = [
        (name, f"{stats.means[0][i]:.3f}", f"{stats.means[1][i]:.3f}")
        for i, name in enumerate(STATS_ROWS)
    ]
    body.append(("Rows", str(stats.counts[0]), str(stats.counts[1])))
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(3)]

    def fmt(row):
        return " | ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))).rstrip()

    lines = [" | ".join(header), "-+-".join("-" * w for w in widths)]
    lines += [fmt(r) for r in body]
    return "\n".join(lines) + "\n"
