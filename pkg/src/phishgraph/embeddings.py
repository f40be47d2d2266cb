"""Entity vectors: skip-gram token embeddings, URL means, neighbour propagation."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .graph import HetGraph

logger = logging.getLogger(__name__)

COSINE = "cosine"
RBF = "rbf"


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    normalized: bool = False
    zero_flagged: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise EmbeddingError("dimension must be positive")

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __getitem__(self, key: str) -> np.ndarray:
        return self.vectors[key]

    def get(self, key: str) -> np.ndarray | None:
        return self.vectors.get(key)

    def __len__(self) -> int:
        return len(self.vectors)

    def set(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise EmbeddingError(f"vector for {key!r} has shape {vec.shape}, expected ({self.dimension},)")
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"non-finite vector for {key!r}")
        self.vectors[key] = vec
        if not vec.any():
            self.zero_flagged.add(key)
        else:
            self.zero_flagged.discard(key)

    def l2_normalized(self) -> "EmbeddingTable":
        out = EmbeddingTable(self.dimension, normalized=True)
        for k, v in self.vectors.items():
            n = np.linalg.norm(v)
            out.set(k, v / n if n > 0 else v)
        return out

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["entity_id", "dim", *(f"v{i}" for i in range(self.dimension))])
            for key in sorted(self.vectors):
                w.writerow([key, self.dimension, *(repr(float(x)) for x in self.vectors[key])])

    @classmethod
    def load(cls, path: str | Path, normalized: bool = False) -> "EmbeddingTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            table = cls(len(header) - 2, normalized=normalized)
            for row in reader:
                if int(row[1]) != table.dimension:
                    raise EmbeddingError(f"dimension mismatch for {row[0]!r}")
                table.set(row[0], np.array([float(x) for x in row[2:]]))
        return table


def _skipgram_pairs(sequences: Sequence[Sequence[int]], window: int) -> np.ndarray:
    pairs = []
    for seq in sequences:
        n = len(seq)
        for i, c in enumerate(seq):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    pairs.append((c, seq[j]))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def train_token_embeddings(
    corpus: Iterable[Sequence[str]],
    dimension: int = 32,
    window: int = 5,
    epochs: int = 5,
    negatives: int = 5,
    seed: int = 0,
    learning_rate: float = 0.025,
    batch_size: int = 128,
    vocabulary: Iterable[str] | None = None,
    losses: list[float] | None = None,
) -> EmbeddingTable:
    """Skip-gram with negative sampling, trained in deterministic mini-batches.

    Tokens outside ``vocabulary`` (when given) are dropped from the sequences
    before context windows are formed. Mean per-pair loss of every epoch is
    appended to ``losses`` if a list is passed.
    """
    if dimension <= 0:
        raise EmbeddingError("dimension must be positive")
    if window <= 0 or epochs <= 0 or negatives <= 0:
        raise EmbeddingError("window, epochs and negatives must be positive")
    keep = set(vocabulary) if vocabulary is not None else None
    seqs_tok = [[t for t in s if keep is None or t in keep] for s in corpus]
    counts = Counter(t for s in seqs_tok for t in s)
    if not counts:
        raise EmbeddingError("empty vocabulary")
    vocab = sorted(counts)
    index = {t: i for i, t in enumerate(vocab)}
    seqs = [[index[t] for t in s] for s in seqs_tok]
    V = len(vocab)

    rng = np.random.default_rng(seed)
    w_in = (rng.random((V, dimension)) - 0.5) / dimension
    w_out = np.zeros((V, dimension))
    pairs = _skipgram_pairs(seqs, window)

    if len(pairs):
        freq = np.array([counts[t] for t in vocab], dtype=np.float64) ** 0.75
        noise = np.cumsum(freq / freq.sum())
        n_batches = math.ceil(len(pairs) / batch_size)
        total = epochs * n_batches
        step = 0
        for _ in range(epochs):
            order = rng.permutation(len(pairs))
            epoch_loss = 0.0
            for b in range(n_batches):
                lr = learning_rate * max(1e-4, 1.0 - step / total)
                step += 1
                batch = pairs[order[b * batch_size : (b + 1) * batch_size]]
                c, o = batch[:, 0], batch[:, 1]
                neg = np.searchsorted(noise, rng.random((len(batch), negatives)), side="right")
                neg = np.minimum(neg, V - 1)

                v = w_in[c]
                u_pos = w_out[o]
                u_neg = w_out[neg]
                s_pos = 1.0 / (1.0 + np.exp(-np.einsum("bd,bd->b", v, u_pos)))
                s_neg = 1.0 / (1.0 + np.exp(-np.einsum("bd,bkd->bk", v, u_neg)))
                epoch_loss -= np.sum(np.log(s_pos + 1e-12)) + np.sum(np.log(1.0 - s_neg + 1e-12))

                g_pos = (s_pos - 1.0)[:, None]
                g_neg = s_neg[:, :, None]
                grad_v = g_pos * u_pos + np.sum(g_neg * u_neg, axis=1)
                np.add.at(w_out, o, -lr * g_pos * v)
                np.add.at(w_out, neg.ravel(), (-lr * g_neg * v[:, None, :]).reshape(-1, dimension))
                np.add.at(w_in, c, -lr * grad_v)
            if not math.isfinite(epoch_loss):
                raise EmbeddingError("embedding loss diverged")
            if losses is not None:
                losses.append(epoch_loss / len(pairs))

    table = EmbeddingTable(dimension)
    for t, i in index.items():
        table.set(t, w_in[i])
    return table


def url_vector(tokens: Sequence[str], table: EmbeddingTable) -> tuple[np.ndarray, bool]:
    """Mean of the in-vocabulary token vectors; ``(zeros, True)`` when none are known."""
    vecs = [table.vectors[t] for t in tokens if t in table.vectors]
    if not vecs:
        return np.zeros(table.dimension), True
    return np.mean(vecs, axis=0), False


def _neighbor_mean(graph: "HetGraph", node_id: str, kind: str, table: EmbeddingTable) -> np.ndarray | None:
    vecs = [
        table.vectors[n]
        for n in sorted(graph.adj[node_id])
        if graph.nodes[n].kind == kind and n in table.vectors and n not in table.zero_flagged
    ]
    return np.mean(vecs, axis=0) if vecs else None


def propagate_entity_vectors(graph: "HetGraph", table: EmbeddingTable) -> EmbeddingTable:
    """Fill in domain, then IP, then nameserver vectors from their neighbours.

    ``table`` must hold the URL node vectors (keyed by node id). Domains take
    the uniform mean of their URL neighbours; IPs and nameservers the mean of
    their domain neighbours. Entities without a vectored neighbour get a
    flagged zero vector.
    """
    out = EmbeddingTable(table.dimension, dict(table.vectors), table.normalized, set(table.zero_flagged))
    for kind, source in (("domain", "url"), ("ip", "domain"), ("nameserver", "domain")):
        for node_id in graph.ids_of_kind(kind):
            vec = _neighbor_mean(graph, node_id, source, out)
            out.set(node_id, vec if vec is not None else np.zeros(out.dimension))
    return out


def entity_embeddings(graph: "HetGraph", token_table: EmbeddingTable) -> EmbeddingTable:
    """Vectors for every graph node, keyed by node id."""
    from .urls import parse_url, tokenize

    table = EmbeddingTable(token_table.dimension)
    for node_id in graph.ids_of_kind("substring"):
        tok = graph.nodes[node_id].name
        table.set(node_id, token_table.vectors.get(tok, np.zeros(token_table.dimension)))
    for node_id in graph.ids_of_kind("url"):
        vec, _ = url_vector(tokenize(parse_url(graph.nodes[node_id].name)), token_table)
        table.set(node_id, vec)
    return propagate_entity_vectors(graph, table)


@dataclass(frozen=True)
class SimilaritySpec:
    kernel: str = COSINE
    sigma: float = 1.0
    rbf_positive_exponent: bool = False

    def __post_init__(self) -> None:
        if self.kernel not in (COSINE, RBF):
            raise EmbeddingError(f"unknown kernel {self.kernel!r}")
        if not self.sigma > 0:
            raise EmbeddingError("sigma must be positive")


def similarity(x: np.ndarray, y: np.ndarray, spec: SimilaritySpec = SimilaritySpec()) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise EmbeddingError(f"dimension mismatch: {x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if spec.kernel == COSINE:
        if nx == 0 or ny == 0:
            return 0.0
        return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))
    xn = x / nx if nx > 0 else x
    yn = y / ny if ny > 0 else y
    d2 = float(np.sum((xn - yn) ** 2))
    sign = 1.0 if spec.rbf_positive_exponent else -1.0
    return math.exp(sign * d2 / (2.0 * spec.sigma**2))
