"""Labeled URL datasets and stratified cross-validation folds."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

BENIGN = 0
PHISHING = 1


class DatasetError(ValueError):
    """Raised for malformed or unusable dataset input."""


@dataclass(frozen=True)
class UrlRecord:
    url: str
    label: int

    def __post_init__(self) -> None:
        if not self.url:
            raise DatasetError("url must be nonempty")
        if self.label not in (BENIGN, PHISHING):
            raise DatasetError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class LoadSummary:
    n_records: int = 0
    per_class: dict[int, int] = field(default_factory=dict)
    duplicates: int = 0
    duplicate_urls: list[str] = field(default_factory=list)


def load_dataset(path: str | Path, summary: LoadSummary | None = None) -> list[UrlRecord]:
    """Read a ``url,label`` CSV file.

    Duplicate URLs are kept; they are counted in ``summary`` and logged.
    """
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n")
    # decode row by row so a bad byte sequence can be pinned to a line
    for lineno, chunk in enumerate(lines, start=1):
        try:
            chunk.decode("utf-8")
        except UnicodeDecodeError:
            raise DatasetError(f"invalid UTF-8 at line {lineno}") from None
    text = raw.decode("utf-8").lstrip("\ufeff")

    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty dataset") from None
    if [h.strip().lower() for h in header] != ["url", "label"]:
        raise DatasetError(f"expected header 'url,label' at line 1, got {','.join(header)!r}")

    records: list[UrlRecord] = []
    for row in reader:
        lineno = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise DatasetError(f"wrong column count ({len(row)}) at line {lineno}")
        url, label = row[0].strip(), row[1].strip()
        if not url:
            raise DatasetError(f"empty url at line {lineno}")
        if label not in ("0", "1"):
            raise DatasetError(f"invalid label at line {lineno}: {label!r}")
        records.append(UrlRecord(url, int(label)))

    if not records:
        raise DatasetError("empty dataset")

    counts = Counter(r.url for r in records)
    dups = sorted(u for u, c in counts.items() if c > 1)
    n_dup = sum(counts[u] - 1 for u in dups)
    if n_dup:
        logger.warning("%d duplicate URL rows (%d distinct URLs) retained", n_dup, len(dups))
    if summary is not None:
        summary.n_records = len(records)
        summary.per_class = dict(sorted(Counter(r.label for r in records).items()))
        summary.duplicates = n_dup
        summary.duplicate_urls = dups
    return records


def write_dataset(records: list[UrlRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["url", "label"])
        for r in records:
            writer.writerow([r.url, r.label])


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    assignments: dict[int, int]
    seed: int

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in self.assignments.items() if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in self.assignments.items() if f != fold]


def make_folds(records: list[UrlRecord], n_folds: int, seed: int) -> FoldPlan:
    """Stratified fold assignment: per-class shuffle, then round-robin.

    The round-robin pointer carries over from one class to the next so that
    total fold sizes stay balanced as well.
    """
    if n_folds < 2:
        raise DatasetError("n_folds must be >= 2")
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        by_class.setdefault(r.label, []).append(i)
    for label in (BENIGN, PHISHING):
        n = len(by_class.get(label, []))
        if n < n_folds:
            raise DatasetError(f"class {label} has {n} members, fewer than n_folds={n_folds}")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed & (2**64 - 1))))
    assignments: dict[int, int] = {}
    pointer = 0
    for label in sorted(by_class):
        idx = np.asarray(by_class[label])
        for i in idx[rng.permutation(len(idx))]:
            assignments[int(i)] = pointer % n_folds
            pointer += 1
    return FoldPlan(n_folds=n_folds, assignments=dict(sorted(assignments.items())), seed=seed)
