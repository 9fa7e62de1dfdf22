"""Feed and threat-list readers, labelling, class balancing and dataset files."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._rng import substream
from .featurizer import FeatureVector, extract_features, feature_matrix
from .normalizer import KeywordSet, NormalizationError, match_keywords, normalize

DATASET_VERSION = 1
DATASET_COLUMNS = "domain,length,hyphens,digits,entropy,label"
FEED_FORMATS = ("plain", "delimited")
DEFAULT_THREAT_THRESHOLD = 70


class DatasetFormatError(ValueError):
    pass


def _digest(lines: Iterable[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True)
class Reject:
    line: int
    text: str
    reason: str


@dataclass(frozen=True)
class DomainFeedRecord:
    domain: str
    observed_date: date | None = None
    line: int = 0

    def __post_init__(self):
        if not self.domain.strip():
            raise ValueError("feed record with empty domain")


@dataclass(frozen=True)
class FeedRead:
    records: tuple[DomainFeedRecord, ...]
    rejects: tuple[Reject, ...] = ()

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _numbered_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for no, line in enumerate(fh, 1):
                text = line.strip()
                if text and not text.startswith("#"):
                    yield no, text
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_feed(path: str | Path, fmt: str = "plain") -> FeedRead:
    """One record per data line; malformed lines go to ``rejects``.

    ``plain`` is one hostname per line; ``delimited`` is ``domain,observed_date``
    with an ISO date that may be left empty.
    """
    if fmt not in FEED_FORMATS:
        raise ValueError(f"unknown feed format {fmt!r}; expected one of {FEED_FORMATS}")
    records, rejects = [], []
    for no, text in _numbered_lines(path):
        if fmt == "plain":
            if any(c.isspace() for c in text) or "," in text:
                rejects.append(Reject(no, text, "expected a single hostname"))
                continue
            records.append(DomainFeedRecord(text, None, no))
            continue
        fields = [f.strip() for f in text.split(",")]
        if no == 1 and fields[0].lower() == "domain":
            continue
        if len(fields) > 2 or not fields[0]:
            rejects.append(Reject(no, text, "expected domain,observed_date"))
            continue
        observed = None
        if len(fields) == 2 and fields[1]:
            try:
                observed = date.fromisoformat(fields[1])
            except ValueError:
                rejects.append(Reject(no, text, f"bad date {fields[1]!r}"))
                continue
        records.append(DomainFeedRecord(fields[0], observed, no))
    return FeedRead(tuple(records), tuple(rejects))


@dataclass(frozen=True)
class ThreatListEntry:
    domain: str
    risk_rating: int

    def __post_init__(self):
        if not 0 <= self.risk_rating <= 100:
            raise ValueError(f"risk rating {self.risk_rating} outside [0, 100]")


@dataclass(frozen=True)
class ThreatList:
    threshold: int
    positives: tuple[ThreatListEntry, ...]
    below_threshold: tuple[ThreatListEntry, ...] = ()
    rejects: tuple[Reject, ...] = ()

    def fingerprint(self) -> str:
        entries = sorted(self.positives + self.below_threshold, key=lambda e: (e.domain, e.risk_rating))
        return _digest(f"{e.domain},{e.risk_rating}" for e in entries)[:16]

    def summary(self) -> str:
        return (
            f"threat list: {len(self.positives)} at or above rating {self.threshold}, "
            f"{len(self.below_threshold)} below, {len(self.rejects)} rejected"
        )


def read_threat_list(path: str | Path, threshold: int = DEFAULT_THREAT_THRESHOLD) -> ThreatList:
    if not 0 <= threshold <= 100:
        raise ValueError(f"threshold {threshold} outside [0, 100]")
    positives, below, rejects = [], [], []
    first = True
    for no, text in _numbered_lines(path):
        fields = [f.strip() for f in text.split(",")]
        is_first, first = first, False
        if len(fields) != 2 or not fields[0]:
            rejects.append(Reject(no, text, "expected domain,risk_rating"))
            continue
        try:
            rating = int(fields[1])
        except ValueError:
            if is_first and "." not in fields[0]:
                continue  # header row
            rejects.append(Reject(no, text, f"non-integer rating {fields[1]!r}"))
            continue
        if not 0 <= rating <= 100:
            rejects.append(Reject(no, text, f"rating {rating} outside [0, 100]"))
            continue
        entry = ThreatListEntry(fields[0], rating)
        (positives if rating >= threshold else below).append(entry)
    return ThreatList(threshold, tuple(positives), tuple(below), tuple(rejects))


@dataclass(frozen=True)
class FilterResult:
    kept: tuple[DomainFeedRecord, ...]
    total: int
    unparseable: tuple[Reject, ...] = ()

    def __iter__(self):
        return iter(self.kept)

    def __len__(self):
        return len(self.kept)

    def summary(self) -> str:
        return f"{len(self.kept):,} of {self.total:,} domain names contain campaign keywords"


def filter_campaign(records: Iterable[DomainFeedRecord], ks: KeywordSet, strict: bool = False) -> FilterResult:
    kept, bad = [], []
    total = 0
    for rec in records:
        total += 1
        try:
            nd = normalize(rec.domain, strict=strict)
        except NormalizationError as exc:
            bad.append(Reject(rec.line, rec.domain, str(exc)))
            continue
        if match_keywords(nd, ks):
            kept.append(rec)
    return FilterResult(tuple(kept), total, tuple(bad))


# --- datasets -------------------------------------------------------------

@dataclass(frozen=True)
class DatasetRow:
    domain: str  # registrable domain, name[.sld].tld
    features: FeatureVector
    source: str = "feed"

    @property
    def label(self) -> int:
        return self.features.label


@dataclass(frozen=True)
class Provenance:
    feed: str = "none"
    threats: str = "none"
    keywords: str = "none"
    seed: int = 0
    notes: tuple[tuple[str, str], ...] = ()

    def with_note(self, key: str, value: str) -> Provenance:
        notes = tuple((k, v) for k, v in self.notes if k != key) + ((key, value),)
        return replace(self, notes=notes)

    def note(self, key: str) -> str | None:
        return dict(self.notes).get(key)


@dataclass(frozen=True)
class LabeledDataset:
    rows: tuple[DatasetRow, ...]
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.label not in (0, 1):
                raise ValueError(f"row {row.domain!r} is unlabelled")
            if row.domain in seen:
                raise ValueError(f"duplicate domain {row.domain!r}")
            seen.add(row.domain)

    def __len__(self):
        return len(self.rows)

    @property
    def vectors(self) -> list[FeatureVector]:
        return [r.features for r in self.rows]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Full four-column feature matrix and label vector."""
        return feature_matrix(self.vectors), self.labels

    def class_counts(self) -> dict[int, int]:
        labels = self.labels
        return {0: int((labels == 0).sum()), 1: int((labels == 1).sum())}

    def fingerprint(self) -> str:
        return _digest(_body_lines(self))


def make_row(domain, label: int, source: str = "feed") -> DatasetRow:
    nd = normalize(domain) if isinstance(domain, str) else domain
    return DatasetRow(nd.registrable, extract_features(nd, label), source)


def label_by_matching(
    feed: Iterable[DomainFeedRecord],
    threats: ThreatList,
    ks: KeywordSet | None = None,
    augment: bool = False,
    strict: bool = False,
) -> LabeledDataset:
    """Label feed domains 1 when they appear on the threat list, else 0.

    Matching compares normalised (name, tld, sld) keys. With ``augment``,
    threat-positive domains missing from the feed (and matching ``ks``, when
    given) are appended as malicious rows. First occurrence wins on duplicates.
    """
    threat_keys = set()
    for entry in threats.positives:
        try:
            threat_keys.add(normalize(entry.domain).key)
        except NormalizationError:
            pass

    rows, seen = [], set()
    feed = list(feed)
    for rec in feed:
        try:
            nd = normalize(rec.domain, strict=strict)
        except NormalizationError:
            continue
        if nd.key in seen:
            continue
        seen.add(nd.key)
        rows.append(make_row(nd, int(nd.key in threat_keys), "feed"))
    if augment:
        for entry in threats.positives:
            try:
                nd = normalize(entry.domain, strict=strict)
            except NormalizationError:
                continue
            if nd.key in seen or (ks is not None and not match_keywords(nd, ks)):
                continue
            seen.add(nd.key)
            rows.append(make_row(nd, 1, "threat"))

    prov = Provenance(
        feed=_digest(r.domain for r in feed)[:16],
        threats=threats.fingerprint(),
        keywords=ks.fingerprint() if ks is not None else "none",
    ).with_note("benign-rule", "feed domains absent from the threat list are assumed benign")
    return LabeledDataset(tuple(rows), prov)


def balance(ds: LabeledDataset, benign_fraction: float = 0.2, seed: int = 0) -> LabeledDataset:
    """Subsample one class so benign:malicious matches the requested ratio.

    The class with the smaller target share is kept whole and the other is
    sampled without replacement down to ``round(kept * other / kept_share)``,
    rounding half up. Row order is preserved.
    """
    if not 0 < benign_fraction < 1:
        raise ValueError("benign_fraction must lie strictly between 0 and 1")
    counts = ds.class_counts()
    if not counts[0] or not counts[1]:
        raise ValueError("balancing needs both classes present")
    f = Fraction(str(benign_fraction))
    share = {0: f, 1: 1 - f}
    keep = 0 if f <= Fraction(1, 2) else 1
    other = 1 - keep
    target = math.floor(counts[keep] * share[other] / share[keep] + Fraction(1, 2))
    if target > counts[other]:
        raise ValueError(
            f"cannot reach {f}:{1 - f} benign:malicious: need {target} "
            f"{'malicious' if other else 'benign'} rows, have {counts[other]} "
            f"(short by {target - counts[other]})"
        )
    labels = ds.labels
    pool = np.flatnonzero(labels == other)
    rng = substream(seed, "sampling")
    chosen = set(pool[rng.choice(len(pool), size=target, replace=False)].tolist())
    rows = tuple(r for i, r in enumerate(ds.rows) if r.label == keep or i in chosen)
    n_benign = counts[0] if keep == 0 else target
    n_mal = counts[1] if keep == 1 else target
    prov = replace(ds.provenance, seed=seed).with_note(
        "balance", f"benign={n_benign} malicious={n_mal} benign_fraction={benign_fraction} rounding=exact-half-up"
    )
    return LabeledDataset(rows, prov)


# --- dataset files --------------------------------------------------------

def _fmt_entropy(x: float) -> str:
    return repr(float(x))


def _body_lines(ds: LabeledDataset):
    yield DATASET_COLUMNS
    for r in ds.rows:
        fv = r.features
        yield f"{r.domain},{fv.length},{fv.hyphens},{fv.digits},{_fmt_entropy(fv.entropy)},{fv.label}"


def _source_runs(rows: Sequence[DatasetRow]) -> str:
    runs: list[list] = []
    for r in rows:
        if runs and runs[-1][0] == r.source:
            runs[-1][1] += 1
        else:
            runs.append([r.source, 1])
    return ";".join(f"{s}:{n}" for s, n in runs) or "-"


def _header_lines(ds: LabeledDataset) -> list[str]:
    p = ds.provenance
    lines = [
        f"# lexdomain-dataset version={DATASET_VERSION}",
        f"# feed={p.feed}",
        f"# threats={p.threats}",
        f"# keywords={p.keywords}",
        f"# seed={p.seed}",
    ]
    lines += [f"# note.{k}={v}" for k, v in p.notes]
    lines.append(f"# sources={_source_runs(ds.rows)}")
    return lines


def dumps_dataset(ds: LabeledDataset) -> str:
    header = _header_lines(ds)
    body = list(_body_lines(ds))
    checksum = _digest(header + body)
    return "\n".join(header + [f"# checksum=sha256:{checksum}"] + body) + "\n"


def write_dataset(ds: LabeledDataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(ds), encoding="utf-8")


def loads_dataset(text: str) -> LabeledDataset:
    lines = text.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not header or not header[0].startswith("# lexdomain-dataset "):
        raise DatasetFormatError("not a lexdomain dataset file")
    if header[0] != f"# lexdomain-dataset version={DATASET_VERSION}":
        raise DatasetFormatError(f"unsupported dataset version in {header[0]!r}")
    meta: dict[str, str] = {}
    notes = []
    for ln in header[1:]:
        key, sep, value = ln[2:].partition("=")
        if key.startswith("note."):
            notes.append((key[5:], value))
        elif sep:
            meta[key] = value
    stated = meta.get("checksum", "")
    unsigned = [ln for ln in header if not ln.startswith("# checksum=")]
    if stated != f"sha256:{_digest(unsigned + body)}":
        raise DatasetFormatError("dataset checksum mismatch")
    if not body or body[0] != DATASET_COLUMNS:
        raise DatasetFormatError(f"expected column header {DATASET_COLUMNS!r}")

    sources: list[str] = []
    for run in filter(None, meta.get("sources", "").split(";")):
        if run == "-":
            continue
        name, _, count = run.rpartition(":")
        sources += [name] * int(count)
    if len(sources) != len(body) - 1:
        raise DatasetFormatError("source runs do not cover the data rows")

    rows = []
    for i, ln in enumerate(body[1:]):
        parts = ln.split(",")
        if len(parts) != 6:
            raise DatasetFormatError(f"data row {i + 1}: expected 6 columns, got {len(parts)}")
        domain, length, hyphens, digits, entropy, label = parts
        try:
            fv = FeatureVector(int(length), int(hyphens), int(digits), float(entropy), int(label))
        except ValueError as exc:
            raise DatasetFormatError(f"data row {i + 1}: {exc}") from None
        rows.append(DatasetRow(domain, fv, sources[i]))
    prov = Provenance(
        feed=meta.get("feed", "none"),
        threats=meta.get("threats", "none"),
        keywords=meta.get("keywords", "none"),
        seed=int(meta.get("seed", "0")),
        notes=tuple(notes),
    )
    return LabeledDataset(tuple(rows), prov)


def read_dataset(path: str | Path) -> LabeledDataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))
