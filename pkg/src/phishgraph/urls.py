"""URL anatomy, substring tokens, elbow-pruned vocabulary and lexical features."""

from __future__ import annotations

import csv
import hashlib
import ipaddress
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import urlsplit

import numpy as np


class UrlParseError(ValueError):
    def __init__(self, url: str, reason: str = "no host"):
        super().__init__(f"cannot parse URL {url!r}: {reason}")
        self.url = url


_TOKEN_SPLIT = re.compile(r"[\W_]+")
# "%2F" is a delimiter followed by the two hex digits as a token of their own
_PERCENT_ESCAPE = re.compile(r"%([0-9A-Fa-f]{2})")
_SCHEME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.\-]*://")
_HOST_RE = re.compile(r"^[\w\-.]+$")


class PublicSuffixList:
    """Public-suffix rules (plain, wildcard and exception) from a PSL-format file."""

    def __init__(self, lines: Iterable[str]):
        self.rules: set[str] = set()
        self.wildcards: set[str] = set()
        self.exceptions: set[str] = set()
        for line in lines:
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            rule = line.split()[0].lower()
            if rule.startswith("!"):
                self.exceptions.add(rule[1:])
            elif rule.startswith("*."):
                self.wildcards.add(rule[2:])
            else:
                self.rules.add(rule)

    @classmethod
    def from_file(cls, path: str | Path) -> "PublicSuffixList":
        with open(path, encoding="utf-8") as fh:
            return cls(fh)

    def suffix_length(self, labels: Sequence[str]) -> int:
        """Number of trailing labels forming the public suffix of ``labels``."""
        best = 1  # implicit "*" rule
        for i in range(len(labels)):
            cand = ".".join(labels[i:])
            n = len(labels) - i
            if cand in self.exceptions:
                return n - 1
            if cand in self.rules:
                best = max(best, n)
            if i > 0 and cand in self.wildcards:
                best = max(best, n + 1)
        return best


@lru_cache(maxsize=1)
def default_suffix_list() -> PublicSuffixList:
    ref = resources.files("phishgraph") / "data" / "public_suffix_list.dat"
    with ref.open(encoding="utf-8") as fh:
        return PublicSuffixList(fh)


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class UrlAnatomy:
    scheme: str
    subdomain: str
    sld: str
    tld: str
    path_segments: tuple[str, ...]
    query_tokens: tuple[str, ...]
    fragment: str
    # raw pieces, kept so the input can be reassembled
    host: str = ""
    netloc: str = ""
    path: str = ""
    query: str = ""
    implicit_scheme: bool = False
    is_ip: bool = False

    @property
    def registered_domain(self) -> str:
        if self.is_ip:
            return self.host
        return f"{self.sld}.{self.tld}" if self.tld else self.sld

    def unparse(self) -> str:
        out = "" if self.implicit_scheme else f"{self.scheme}://"
        out += self.netloc + self.path
        if self.query:
            out += "?" + self.query
        if self.fragment:
            out += "#" + self.fragment
        return out


def _split_tokens(text: str) -> list[str]:
    text = _PERCENT_ESCAPE.sub(r" \1 ", text)
    return [t for t in _TOKEN_SPLIT.split(text) if t]


def parse_url(url: str, psl: PublicSuffixList | None = None) -> UrlAnatomy:
    """Split ``url`` into scheme, subdomain/SLD/TLD, path, query and fragment.

    Inputs without a scheme are accepted when they start with something that
    looks like a hostname (``example.com/x``) and are read as http.
    """
    if not url or not url.strip():
        raise UrlParseError(url, "empty")
    raw = url.strip()
    implicit = _SCHEME_RE.match(raw) is None
    try:
        parts = urlsplit(("http://" + raw) if implicit else raw)
        host = (parts.hostname or "").rstrip(".")
    except ValueError as exc:
        raise UrlParseError(url, str(exc)) from None
    if not host or not _HOST_RE.match(host.replace(":", "")) or " " in parts.netloc:
        raise UrlParseError(url)
    if implicit and "." not in host:
        raise UrlParseError(url)

    query = parts.query
    query_tokens = tuple(_split_tokens(query))
    path_segments = tuple(s for s in parts.path.split("/") if s)
    scheme = parts.scheme.lower()
    netloc = parts.netloc
    # lowercase the host part only
    at = netloc.rfind("@")
    netloc = netloc[: at + 1] + netloc[at + 1 :].lower()

    if _is_ip(host):
        return UrlAnatomy(
            scheme=scheme, subdomain="", sld=host, tld="",
            path_segments=path_segments, query_tokens=query_tokens,
            fragment=parts.fragment, host=host, netloc=netloc, path=parts.path,
            query=query, implicit_scheme=implicit, is_ip=True,
        )

    labels = [l for l in host.split(".") if l]
    if not labels:
        raise UrlParseError(url)
    psl = psl or default_suffix_list()
    n_suffix = psl.suffix_length(labels)
    if n_suffix >= len(labels):
        # host is itself a public suffix; treat the first label as the SLD
        n_suffix = len(labels) - 1
    tld = ".".join(labels[len(labels) - n_suffix :]) if n_suffix else ""
    sld = labels[len(labels) - n_suffix - 1]
    subdomain = ".".join(labels[: len(labels) - n_suffix - 1])
    return UrlAnatomy(
        scheme=scheme, subdomain=subdomain, sld=sld, tld=tld,
        path_segments=path_segments, query_tokens=query_tokens,
        fragment=parts.fragment, host=host, netloc=netloc, path=parts.path,
        query=query, implicit_scheme=implicit, is_ip=False,
    )


def tokenize(anatomy: UrlAnatomy) -> list[str]:
    """Ordered substring tokens: host labels, SLD, TLD, then path/query/fragment runs."""
    tokens: list[str] = []
    if anatomy.subdomain:
        tokens.extend(anatomy.subdomain.split("."))
    if anatomy.is_ip:
        tokens.extend(anatomy.host.split("."))
    else:
        tokens.append(anatomy.sld)
        if anatomy.tld:
            tokens.append(anatomy.tld)
    for seg in anatomy.path_segments:
        tokens.extend(_split_tokens(seg))
    tokens.extend(anatomy.query_tokens)
    tokens.extend(_split_tokens(anatomy.fragment))
    return [t.lower() for t in tokens if t]


def elbow_cutoff(sorted_frequencies: Sequence[int]) -> int:
    """Index of the point farthest from the chord joining the curve's endpoints.

    Works in exact integer arithmetic. Rescaling either axis multiplies every
    distance by the same factor, so min-max normalisation does not move the
    argmax; ties go to the smallest index.
    """
    f = np.asarray(sorted_frequencies, dtype=np.int64)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("elbow_cutoff needs at least two frequencies")
    if np.any(f < 0) or np.any(np.diff(f) > 0):
        raise ValueError("frequencies must be nonnegative and nonincreasing")
    n1 = len(f) - 1
    i = np.arange(len(f), dtype=np.int64)
    cross = (f - f[0]) * n1 - (f[-1] - f[0]) * i
    return int(np.argmax(np.abs(cross)))


@dataclass
class TokenVocabulary:
    counts: dict[str, int]
    cutoff_frequency: int
    kept: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]]) -> "TokenVocabulary":
        counts: Counter[str] = Counter()
        for tokens in token_lists:
            counts.update(tokens)
        if not counts:
            return cls({}, 0, frozenset())
        freqs = sorted(counts.values(), reverse=True)
        cutoff = freqs[elbow_cutoff(freqs)] if len(freqs) >= 2 else freqs[0]
        return cls.with_cutoff(dict(counts), cutoff)

    @classmethod
    def with_cutoff(cls, counts: dict[str, int], cutoff: int) -> "TokenVocabulary":
        kept = frozenset(t for t, c in counts.items() if c <= cutoff)
        return cls(dict(counts), cutoff, kept)

    def __contains__(self, token: str) -> bool:
        return token in self.kept

    def ordered(self) -> list[tuple[str, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# cutoff_frequency={self.cutoff_frequency}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["token", "frequency", "kept"])
            for tok, c in self.ordered():
                w.writerow([tok, c, int(tok in self.kept)])

    @classmethod
    def load(cls, path: str | Path) -> "TokenVocabulary":
        counts: dict[str, int] = {}
        kept: set[str] = set()
        cutoff = None
        with open(path, newline="", encoding="utf-8") as fh:
            first = fh.readline()
            if first.startswith("# cutoff_frequency="):
                cutoff = int(first.split("=", 1)[1])
            else:
                fh.seek(0)
            for row in csv.DictReader(fh):
                counts[row["token"]] = int(row["frequency"])
                if row["kept"] == "1":
                    kept.add(row["token"])
        if cutoff is None:
            # older files: the largest kept frequency is the tightest cutoff consistent with them
            cutoff = max((counts[t] for t in kept), default=0)
        return cls(counts, cutoff, frozenset(kept))


_COUNTED_CHARS = (
    ("n_dot", "."), ("n_hyphen", "-"), ("n_underscore", "_"), ("n_slash", "/"),
    ("n_question", "?"), ("n_equals", "="), ("n_at", "@"), ("n_ampersand", "&"),
)

BASE_FEATURE_NAMES: tuple[str, ...] = (
    "url_length", "host_length", "path_length",
    *(name for name, _ in _COUNTED_CHARS),
    "n_digits", "digit_ratio", "n_subdomain_labels", "n_tokens",
    "host_is_ip", "is_https", "tld_length", "longest_token_length",
)


def feature_names(include_domain_contains_address: bool = False) -> tuple[str, ...]:
    if include_domain_contains_address:
        return BASE_FEATURE_NAMES + ("domain_contains_address",)
    return BASE_FEATURE_NAMES


def manifest_hash(names: Sequence[str], scaling: str = "") -> str:
    h = hashlib.sha256(("|".join(names) + "#" + scaling).encode("utf-8"))
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class LexicalFeatures:
    values: np.ndarray
    names: tuple[str, ...]

    @property
    def manifest_hash(self) -> str:
        return manifest_hash(self.names)


def lexical_features(
    url: str,
    anatomy: UrlAnatomy | None = None,
    include_domain_contains_address: bool = False,
) -> LexicalFeatures:
    anatomy = anatomy or parse_url(url)
    tokens = tokenize(anatomy)
    n_digits = sum(ch.isdigit() for ch in url)
    vals = [
        len(url), len(anatomy.host), len(anatomy.path),
        *(url.count(ch) for _, ch in _COUNTED_CHARS),
        n_digits, n_digits / len(url) if url else 0.0,
        len(anatomy.subdomain.split(".")) if anatomy.subdomain else 0,
        len(tokens),
        int(anatomy.is_ip), int(anatomy.scheme == "https"),
        len(anatomy.tld), max((len(t) for t in tokens), default=0),
    ]
    if include_domain_contains_address:
        vals.append(int(anatomy.is_ip))
    names = feature_names(include_domain_contains_address)
    return LexicalFeatures(np.asarray(vals, dtype=np.float64), names)


def feature_matrix(urls: Sequence[str], include_domain_contains_address: bool = False) -> np.ndarray:
    names = feature_names(include_domain_contains_address)
    out = np.zeros((len(urls), len(names)))
    for i, u in enumerate(urls):
        out[i] = lexical_features(u, None, include_domain_contains_address).values
    return out
