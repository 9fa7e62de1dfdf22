"""Reduce URLs to their registration-time parts and find campaign keywords.

A URL such as ``https://www.example-website.com:443/path/file.php?userId=01``
is cut down to the registrable label (``example-website``), the TLD and, for
two-level public suffixes like ``co.uk``, the SLD. Everything else (scheme,
port, path, query, fragment, subdomains) is discarded.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping
from urllib.parse import urlsplit

# Two-level public suffixes recognised when splitting a hostname. Anything not
# listed here is treated as a single-label TLD.
TWO_LEVEL_SUFFIXES = frozenset(
    f"{sld}.{tld}"
    for tld, slds in {
        "uk": ("co", "ac", "gov", "org", "net", "ltd", "plc", "me", "nhs", "police", "sch"),
        "au": ("com", "net", "org", "edu", "gov", "asn", "id", "csiro"),
        "nz": ("co", "net", "org", "ac", "govt", "geek", "gen", "kiwi", "maori", "school"),
        "jp": ("co", "ne", "or", "ac", "go", "ad", "ed", "gr", "lg"),
        "za": ("co", "org", "net", "gov", "ac", "web"),
        "in": ("co", "net", "org", "firm", "gen", "ind", "ac", "edu", "res", "gov"),
        "br": ("com", "net", "org", "gov", "edu"),
        "cn": ("com", "net", "org", "gov", "edu", "ac"),
        "kr": ("co", "ne", "or", "re", "pe", "go", "ac"),
        "sg": ("com", "net", "org", "edu", "gov", "per"),
        "my": ("com", "net", "org", "edu", "gov", "name"),
        "hk": ("com", "net", "org", "edu", "gov", "idv"),
        "tw": ("com", "net", "org", "edu", "gov", "idv"),
        "il": ("co", "org", "net", "ac", "gov", "muni"),
        "mx": ("com", "net", "org", "edu", "gob"),
        "ar": ("com", "net", "org", "edu", "gob"),
        "tr": ("com", "net", "org", "edu", "gov", "gen", "biz"),
        "ng": ("com", "net", "org", "edu", "gov"),
        "pk": ("com", "net", "org", "edu", "gov"),
        "ph": ("com", "net", "org", "edu", "gov"),
        "id": ("co", "or", "ac", "go", "web", "my"),
        "th": ("co", "in", "or", "ac", "go"),
        "ke": ("co", "or", "ac", "go", "ne"),
        "ua": ("com", "net", "org", "edu", "gov"),
    }.items()
    for sld in slds
)

DEFAULT_SUBSTITUTIONS: dict[str, frozenset[str]] = {
    "o": frozenset("0"),
    "i": frozenset("1"),
    "l": frozenset("1"),
    "e": frozenset("3"),
    "a": frozenset("4"),
    "s": frozenset("5"),
}

DEFAULT_KEYWORDS = ("covid", "cov-19", "corona", "coronavirus", "carronavirus")

_LABEL_RE = re.compile(r"^[a-z0-9-]+$")


class NormalizationError(ValueError):
    """Raised when a raw string cannot be reduced to name + TLD."""


@dataclass(frozen=True)
class NormalizedDomain:
    original: str
    name: str
    tld: str
    sld: str | None = None
    dropped_subdomains: tuple[str, ...] = ()
    # Rule violations tolerated in permissive mode, e.g. "leading-hyphen".
    flags: tuple[str, ...] = ()

    @property
    def suffix(self) -> str:
        return f"{self.sld}.{self.tld}" if self.sld else self.tld

    @property
    def registrable(self) -> str:
        """``name.suffix``, the string a registrant actually bought."""
        return f"{self.name}.{self.suffix}"

    @property
    def key(self) -> tuple[str, str, str | None]:
        return (self.name, self.tld, self.sld)


def _hostname(raw: str) -> str:
    text = raw if "://" in raw else "//" + raw
    try:
        parts = urlsplit(text)
    except ValueError as exc:
        raise NormalizationError(f"unparseable URL {raw!r}: {exc}") from None
    host = parts.netloc.rpartition("@")[2]
    if host.startswith("["):
        raise NormalizationError(f"IP literal has no registrable name: {raw!r}")
    host = host.split(":", 1)[0]
    return host.lower().rstrip(".")


def _check_label(label: str, what: str, raw: str, strict: bool, flags: list[str]) -> None:
    if _LABEL_RE.match(label):
        pass
    elif not strict and all(c == "-" or c.isalnum() for c in label) and not label.isascii():
        # non-ASCII (unencoded IDN) names pass through permissive mode flagged
        flags.append("non-ascii")
    else:
        raise NormalizationError(f"illegal character in {what} {label!r} of {raw!r}")
    if label.startswith("-") or label.endswith("-"):
        if strict:
            raise NormalizationError(f"{what} {label!r} starts or ends with a hyphen")
        flags.append("edge-hyphen")


def normalize(raw: str, strict: bool = False) -> NormalizedDomain:
    """Strip a URL or hostname down to its registrable name, SLD and TLD.

    In strict mode any violation of the registration alphabet (letters,
    digits, inner hyphens) raises; in permissive mode hyphen-edge and
    non-ASCII names are accepted and recorded in ``flags``.
    """
    text = raw.strip() if raw is not None else ""
    if not text:
        raise NormalizationError("empty input")
    host = _hostname(text)
    labels = host.split(".") if host else []
    if len(labels) < 2 or not all(labels):
        raise NormalizationError(f"no TLD derivable from {raw!r}")

    if len(labels) >= 3 and ".".join(labels[-2:]) in TWO_LEVEL_SUFFIXES:
        name, sld, tld = labels[-3], labels[-2], labels[-1]
        dropped = labels[:-3]
    else:
        name, sld, tld = labels[-2], None, labels[-1]
        dropped = labels[:-2]

    if not _LABEL_RE.match(tld) or (sld is not None and not _LABEL_RE.match(sld)):
        raise NormalizationError(f"illegal suffix in {raw!r}")
    flags: list[str] = []
    _check_label(name, "name", raw, strict, flags)
    return NormalizedDomain(
        original=raw,
        name=name,
        tld=tld,
        sld=sld,
        dropped_subdomains=tuple(dropped),
        flags=tuple(flags),
    )


def expand_obfuscations(keyword: str, substitutions: Mapping[str, Iterable[str]]) -> set[str]:
    """All variants of ``keyword`` with any subset of positions swapped for stand-ins."""
    options = []
    for ch in keyword:
        stand_ins = sorted(set(substitutions.get(ch, ())) - {ch})
        options.append([ch, *stand_ins])
    return {"".join(combo) for combo in itertools.product(*options)}


@dataclass(frozen=True)
class KeywordSet:
    base_keywords: tuple[str, ...]
    substitutions: Mapping[str, frozenset[str]] = field(default_factory=dict)
    expanded: frozenset[str] = frozenset()

    @classmethod
    def build(
        cls,
        keywords: Iterable[str],
        substitutions: Mapping[str, Iterable[str]] | None = None,
    ) -> KeywordSet:
        subs = DEFAULT_SUBSTITUTIONS if substitutions is None else substitutions
        subs = {k.lower(): frozenset(v) for k, v in subs.items()}
        base: list[str] = []
        for kw in keywords:
            kw = kw.strip().lower()
            if kw and kw not in base:
                base.append(kw)
        expanded: set[str] = set()
        for kw in base:
            expanded |= expand_obfuscations(kw, subs)
        return cls(tuple(base), subs, frozenset(expanded))

    def fingerprint(self) -> str:
        import hashlib

        lines = list(self.base_keywords)
        lines += [f"{k}={''.join(sorted(v))}" for k, v in sorted(self.substitutions.items())]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def match_keywords(domain: NormalizedDomain | str, ks: KeywordSet) -> list[str]:
    """Return the keyword variants occurring in the registrable name, sorted."""
    name = domain.name if isinstance(domain, NormalizedDomain) else domain
    name = name.lower()
    return sorted(v for v in ks.expanded if v in name)


def _data_lines(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def load_keywords(path: str | Path) -> list[str]:
    return [line.lower() for line in _data_lines(path)]


def load_substitutions(path: str | Path) -> dict[str, frozenset[str]]:
    """Parse ``o=0`` style lines; repeated letters accumulate stand-ins."""
    subs: dict[str, set[str]] = {}
    for line in _data_lines(path):
        letter, sep, stand_ins = line.partition("=")
        letter, stand_ins = letter.strip().lower(), stand_ins.strip()
        if not sep or len(letter) != 1 or not stand_ins:
            raise ValueError(f"{path}: bad substitution line {line!r}")
        subs.setdefault(letter, set()).update(stand_ins.replace(",", ""))
    return {k: frozenset(v) for k, v in subs.items()}


def load_keyword_set(keyword_path=None, substitution_path=None) -> KeywordSet:
    keywords = load_keywords(keyword_path) if keyword_path else DEFAULT_KEYWORDS
    subs = load_substitutions(substitution_path) if substitution_path else None
    return KeywordSet.build(keywords, subs)
