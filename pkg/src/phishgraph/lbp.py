"""Min-sum loopy belief propagation over a :class:`HetGraph`.

Messages and costs live on the two-label axis ``(benign, phishing)``. Node
priors are probabilities; the unary cost of label ``l`` at node ``x`` is
``1 - prior_x[l]``. Observed nodes (training URLs, and nodes frozen by the
cycle-deletion strategy) send messages but never receive them.

The node-level functions (:func:`compute_message`, :func:`cost`) read and
write the ``msg_nbr`` stores on graph nodes and are the reference semantics.
The runners work on a compiled, array-backed copy of the graph and write the
final message stores back when they finish.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .embeddings import EmbeddingTable, SimilaritySpec, similarity
from .graph import UNPREDICTED, HetGraph, Node, edge_key

logger = logging.getLogger(__name__)

BENIGN, PHISHING = 0, 1
EPSILON = "epsilon"
SIMILARITY = "similarity"
FIXED_K = "fixed_k"
DELETE_CYCLES = "delete_cycles"


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class EdgePotentialSpec:
    mode: str = EPSILON
    epsilon: float = 0.1
    ths_plus: float = 0.6
    ths_minus: float = 1.0
    similarity: SimilaritySpec = field(default_factory=SimilaritySpec)

    def __post_init__(self) -> None:
        if self.mode not in (EPSILON, SIMILARITY):
            raise InferenceError(f"unknown edge potential mode {self.mode!r}")
        if not 0.0 < self.epsilon < 0.5:
            raise InferenceError("epsilon must lie in (0, 0.5)")
        if not (0.0 <= self.ths_plus <= 1.0 and 0.0 <= self.ths_minus <= 1.0):
            raise InferenceError("ths_plus and ths_minus must lie in [0, 1]")

    def epsilon_pair(self) -> tuple[float, float]:
        return 0.5 - self.epsilon, 0.5 + self.epsilon

    def similarity_pair(self, sim: float) -> tuple[float, float]:
        sim = min(max(sim, 0.0), 1.0)
        return min(self.ths_plus, 1.0 - sim), max(self.ths_minus, sim)


@dataclass(frozen=True)
class InferenceConfig:
    strategy: str = DELETE_CYCLES
    k: int = 6
    tolerance: float = 1e-6
    max_sweeps: int = 100
    threshold: float = 0.5
    seed: int = 0
    tie_to_phishing: bool = True
    normalize: bool = True

    def __post_init__(self) -> None:
        if self.strategy not in (FIXED_K, DELETE_CYCLES):
            raise InferenceError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise InferenceError("k must be >= 1")
        if not self.tolerance > 0 or self.max_sweeps < 1:
            raise InferenceError("tolerance and max_sweeps must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise InferenceError("threshold must lie in [0, 1]")


@dataclass
class InferenceResult:
    costs: dict[str, tuple[float, float]] = field(default_factory=dict)
    phish_score: dict[str, float] = field(default_factory=dict)
    predict_label: dict[str, int] = field(default_factory=dict)
    cvg: float = 1.0
    rounds: int = 0
    sweeps: int = 0
    edges_deleted: int = 0
    edges_restored: int = 0
    forced_restores: int = 0
    fallback_edges: int = 0
    round_log: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "cvg": self.cvg, "rounds": self.rounds, "sweeps": self.sweeps,
            "edges_deleted": self.edges_deleted, "edges_restored": self.edges_restored,
            "forced_restores": self.forced_restores, "fallback_edges": self.fallback_edges,
            "n_labeled": len(self.predict_label),
        }

    def save(self, csv_path: str | Path, summary_path: str | Path | None = None) -> None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id", "cost_benign", "cost_phish", "phish_score", "predict_label"])
            for nid in sorted(self.costs):
                cb, cp = self.costs[nid]
                w.writerow([nid, repr(cb), repr(cp), repr(self.phish_score[nid]), self.predict_label[nid]])
        if summary_path is not None:
            Path(summary_path).write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")


# --- potentials -----------------------------------------------------------


def _edge_similarity(a: str, b: str, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None) -> float | None:
    if embeddings is None:
        return None
    va, vb = embeddings.get(a), embeddings.get(b)
    if va is None or vb is None or a in embeddings.zero_flagged or b in embeddings.zero_flagged:
        return None
    return similarity(va, vb, spec.similarity)


def potential_pair(
    a: str, b: str, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None
) -> tuple[tuple[float, float], bool]:
    """``((same_label, different_label), fell_back)`` for the edge ``a -- b``."""
    if spec.mode == EPSILON:
        return spec.epsilon_pair(), False
    sim = _edge_similarity(a, b, spec, embeddings)
    if sim is None:
        return spec.epsilon_pair(), True
    return spec.similarity_pair(sim), False


def edge_potential(
    x: Node | str, y: Node | str, l: int, l_prime: int,
    spec: EdgePotentialSpec, embeddings: EmbeddingTable | None = None,
) -> float:
    xid = getattr(x, "id", x)
    yid = getattr(y, "id", y)
    (same, diff), fell_back = potential_pair(xid, yid, spec, embeddings)
    if fell_back:
        logger.debug("edge %s -- %s lacks vectors; using epsilon potential", xid, yid)
    return same if l == l_prime else diff


# --- node-level reference semantics ---------------------------------------


def _unary(node: Node) -> np.ndarray:
    return 1.0 - np.asarray(node.prior, dtype=np.float64)


def compute_message(
    x: str, y: str, graph: HetGraph, spec: EdgePotentialSpec,
    embeddings: EmbeddingTable | None = None, normalize: bool = True,
) -> np.ndarray:
    if edge_key(x, y) not in graph.edges:
        raise InferenceError(f"no edge {x} -- {y}")
    xn = graph.nodes[x]
    h = _unary(xn)
    for k, m in xn.msg_nbr.items():
        if k != y:
            h = h + np.asarray(m)
    (same, diff), _ = potential_pair(x, y, spec, embeddings)
    out = np.array([min(h[0] + same, h[1] + diff), min(h[0] + diff, h[1] + same)])
    if normalize:
        out -= out.min()
    return out


def cost(node: Node) -> np.ndarray:
    if not node.hidden:
        raise InferenceError(f"cost requested for observed node {node.id}")
    total = _unary(node)
    for m in node.msg_nbr.values():
        total = total + np.asarray(m)
    return total


def classify(costs, threshold: float = 0.5, tie_to_phishing: bool = True) -> tuple[int, float]:
    """``(label, phish_score)``; lower phishing cost pushes the score up."""
    cb, cp = float(costs[0]), float(costs[1])
    total = cb + cp
    score = 0.5 if total == 0 else cb / total
    return label_from_score(score, threshold, tie_to_phishing), score


def label_from_score(score: float, threshold: float = 0.5, tie_to_phishing: bool = True) -> int:
    if tie_to_phishing:
        return PHISHING if score >= threshold else BENIGN
    return PHISHING if score > threshold else BENIGN


# --- compiled engine ------------------------------------------------------


class _Engine:
    """Array form of a graph: directed edge ``e`` and ``e + m`` are reverses."""

    def __init__(self, graph: HetGraph, spec: EdgePotentialSpec,
                 embeddings: EmbeddingTable | None, normalize: bool = True):
        self.graph = graph
        self.normalize = normalize
        self.ids = sorted(graph.nodes)
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        n = len(self.ids)
        keys = sorted(graph.edges)
        self.keys = keys
        m = len(keys)
        self.m = m
        ea = np.fromiter((self.index[a] for a, _ in keys), dtype=np.int64, count=m)
        eb = np.fromiter((self.index[b] for _, b in keys), dtype=np.int64, count=m)
        self.src = np.concatenate([ea, eb])
        self.dst = np.concatenate([eb, ea])
        self.rev = np.concatenate([np.arange(m, 2 * m), np.arange(m)])

        same = np.empty(m)
        diff = np.empty(m)
        self.fallback_edges = 0
        for j, (a, b) in enumerate(keys):
            (same[j], diff[j]), fell_back = potential_pair(a, b, spec, embeddings)
            self.fallback_edges += fell_back
        if self.fallback_edges:
            logger.info("%d edges lack vectors and use the epsilon potential", self.fallback_edges)
        self.same = np.concatenate([same, same])
        self.diff = np.concatenate([diff, diff])

        self.prior = np.array([graph.nodes[i].prior for i in self.ids], dtype=np.float64).reshape(n, 2)
        self.hidden = np.array([graph.nodes[i].hidden for i in self.ids], dtype=bool)
        self.initially_hidden = self.hidden.copy()
        self.active = np.ones(2 * m, dtype=bool)
        self.msgs = np.zeros((2 * m, 2))
        directed = {(int(s), int(d)): e for e, (s, d) in enumerate(zip(self.src, self.dst))}
        for nid, node in graph.nodes.items():
            for sender, stored in node.msg_nbr.items():
                self.msgs[directed[(self.index[sender], self.index[nid])]] = stored
        self.last_change = np.full(2 * m, np.nan)
        self.snapshots: dict[int, dict[int, np.ndarray]] = {}

    @property
    def n(self) -> int:
        return len(self.ids)

    def receiving(self) -> np.ndarray:
        return self.active & self.hidden[self.dst]

    def incoming_sum(self) -> np.ndarray:
        S = np.zeros((self.n, 2))
        recv = self.receiving()
        for l in (0, 1):
            S[:, l] = np.bincount(self.dst[recv], weights=self.msgs[recv, l], minlength=self.n)
        return S

    def sweep(self) -> float:
        recv = self.receiving()
        if not recv.any():
            return 0.0
        S = self.incoming_sum()
        e = np.flatnonzero(recv)
        s = self.src[e]
        # messages into an observed sender are zero, so subtracting the reverse is safe
        h = (1.0 - self.prior[s]) + S[s] - self.msgs[self.rev[e]]
        same, diff = self.same[e], self.diff[e]
        new = np.column_stack([
            np.minimum(h[:, 0] + same, h[:, 1] + diff),
            np.minimum(h[:, 0] + diff, h[:, 1] + same),
        ])
        if self.normalize:
            new -= new.min(axis=1, keepdims=True)
        change = np.abs(new - self.msgs[e]).max(axis=1)
        self.msgs[e] = new
        self.last_change[e] = change
        return float(change.max())

    def costs(self) -> np.ndarray:
        return (1.0 - self.prior) + self.incoming_sum()

    def freeze(self, nodes: np.ndarray, labels: np.ndarray) -> None:
        """Turn hidden nodes into observed ones with hard priors."""
        into = np.isin(self.dst, nodes) & self.active
        for e in np.flatnonzero(into):
            self.snapshots.setdefault(int(self.dst[e]), {})[int(self.src[e])] = self.msgs[e].copy()
        for v in nodes:
            self.snapshots.setdefault(int(v), {})
        self.msgs[into] = 0.0
        self.hidden[nodes] = False
        self.prior[nodes] = np.where(labels[:, None] == PHISHING, [0.0, 1.0], [1.0, 0.0])

    def set_active(self, undirected: np.ndarray, value: bool) -> None:
        both = np.concatenate([undirected, undirected + self.m])
        self.active[both] = value
        self.msgs[both] = 0.0

    def cvg(self, tolerance: float) -> float:
        """Fraction of computed messages whose latest update moved less than ``tolerance``."""
        seen = ~np.isnan(self.last_change)
        if not seen.any():
            return 1.0
        return float(np.mean(self.last_change[seen] < tolerance))

    def write_back(self, predicted: dict[str, int]) -> None:
        g = self.graph
        for i, nid in enumerate(self.ids):
            node = g.nodes[nid]
            if not self.initially_hidden[i]:
                continue
            if i in self.snapshots:
                incoming = {self.ids[s]: v for s, v in self.snapshots[i].items()}
            else:
                into = np.flatnonzero((self.dst == i) & self.active)
                incoming = {self.ids[self.src[e]]: self.msgs[e] for e in into}
            node.msg_nbr = {k: [float(v[0]), float(v[1])] for k, v in sorted(incoming.items())}
            total = np.zeros(2)
            for v in node.msg_nbr.values():
                total += v
            node.msg_sum = [float(total[0]), float(total[1])]
            if nid in predicted and not self.hidden[i]:
                node.prior = (float(self.prior[i, 0]), float(self.prior[i, 1]))
            if nid in predicted:
                node.predict_label = predicted[nid]


def _record(result: InferenceResult, engine: _Engine, nodes: np.ndarray, costs: np.ndarray,
            config: InferenceConfig) -> np.ndarray:
    labels = np.empty(len(nodes), dtype=np.int64)
    for j, v in enumerate(nodes):
        cb, cp = float(costs[v, 0]), float(costs[v, 1])
        label, score = classify((cb, cp), config.threshold, config.tie_to_phishing)
        nid = engine.ids[v]
        result.costs[nid] = (cb, cp)
        result.phish_score[nid] = score
        result.predict_label[nid] = label
        labels[j] = label
    return labels


def sweep(graph: HetGraph, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None = None,
          normalize: bool = True) -> float:
    """One synchronous sweep; new messages are committed to the graph's stores."""
    engine = _Engine(graph, spec, embeddings, normalize)
    change = engine.sweep()
    for i, nid in enumerate(engine.ids):
        if not engine.hidden[i]:
            continue
        into = np.flatnonzero((engine.dst == i) & engine.active)
        node = graph.nodes[nid]
        node.msg_nbr = {engine.ids[engine.src[e]]: [float(engine.msgs[e, 0]), float(engine.msgs[e, 1])]
                        for e in into}
        node.msg_sum = [float(engine.msgs[into, 0].sum()), float(engine.msgs[into, 1].sum())]
    return change


def run_fixed_k(graph: HetGraph, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None,
                config: InferenceConfig) -> InferenceResult:
    """Exactly ``k`` synchronous sweeps, then label every hidden node.

    Writes the final messages and predicted labels back into ``graph``.
    """
    engine = _Engine(graph, spec, embeddings, config.normalize)
    result = InferenceResult(fallback_edges=engine.fallback_edges)
    for _ in range(config.k):
        engine.sweep()
    result.sweeps = config.k
    result.rounds = 1
    hidden = np.flatnonzero(engine.hidden)
    _record(result, engine, hidden, engine.costs(), config)
    result.cvg = engine.cvg(config.tolerance)
    engine.write_back(result.predict_label)
    return result


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict[int, int] = {}

    def find(self, a: int) -> int:
        p = self.parent.setdefault(a, a)
        root = a
        while p != root:
            root = p
            p = self.parent.setdefault(root, root)
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _hidden_edges(engine: _Engine) -> np.ndarray:
    """Active undirected edges with both endpoints hidden."""
    m = engine.m
    a, b = engine.src[:m], engine.dst[:m]
    return np.flatnonzero(engine.active[:m] & engine.hidden[a] & engine.hidden[b])


def hidden_subgraph_is_acyclic(engine: _Engine) -> bool:
    uf = _UnionFind()
    for j in _hidden_edges(engine):
        if not uf.union(int(engine.src[j]), int(engine.dst[j])):
            return False
    return True


def _spanning_forest_complement(engine: _Engine) -> np.ndarray:
    """Non-forest edges of a BFS spanning forest of the hidden-induced subgraph.

    BFS roots are taken in ascending node-id order and neighbours are visited
    in ascending id order, so the forest is fully determined by the graph.
    """
    edges = _hidden_edges(engine)
    if len(edges) == 0:
        return edges
    adj: dict[int, list[tuple[int, int]]] = {}
    for j in edges:
        a, b = int(engine.src[j]), int(engine.dst[j])
        adj.setdefault(a, []).append((b, int(j)))
        adj.setdefault(b, []).append((a, int(j)))
    for lst in adj.values():
        lst.sort()
    visited: set[int] = set()
    tree: set[int] = set()
    for root in sorted(adj):
        if root in visited:
            continue
        visited.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, j in adj[u]:
                if v not in visited:
                    visited.add(v)
                    tree.add(j)
                    queue.append(v)
    return np.array(sorted(set(edges.tolist()) - tree), dtype=np.int64)


def run_delete_cycles(
    graph: HetGraph, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None,
    config: InferenceConfig, observer: Callable[[str, _Engine, np.ndarray], None] | None = None,
) -> InferenceResult:
    """Cycle-deletion schedule.

    Each round: cut the hidden-only cycles down to a spanning forest, sweep to
    convergence, freeze every hidden node that touches an observed node at its
    predicted label, then restore deleted edges that no longer close a
    hidden-only cycle. Rounds repeat while anything was labeled or restored;
    leftovers are labeled from their current costs.

    ``observer(stage, engine, deleted)`` is called after the deletion step and
    at the end of each round (used by the invariant tests).
    """
    engine = _Engine(graph, spec, embeddings, config.normalize)
    result = InferenceResult(fallback_edges=engine.fallback_edges)
    m = engine.m
    deleted = np.zeros(0, dtype=np.int64)
    max_rounds = engine.n + m + 1

    while result.rounds < max_rounds and engine.hidden.any():
        result.rounds += 1
        # (a) break hidden-only cycles
        cut = _spanning_forest_complement(engine)
        if len(cut):
            engine.set_active(cut, False)
            deleted = np.union1d(deleted, cut)
            result.edges_deleted += len(cut)
        if observer is not None:
            observer("deleted", engine, deleted)

        # (b) message passing to convergence
        sweeps = 0
        while sweeps < config.max_sweeps:
            sweeps += 1
            if engine.sweep() < config.tolerance:
                break
        result.sweeps += sweeps

        # (c) label hidden nodes that touch an observed node
        touch = engine.active & ~engine.hidden[engine.src] & engine.hidden[engine.dst]
        frontier = np.unique(engine.dst[touch])
        if len(frontier):
            labels = _record(result, engine, frontier, engine.costs(), config)
            engine.freeze(frontier, labels)

        # (d) restore deleted edges that close no hidden-only cycle
        restored = []
        if len(deleted):
            uf = _UnionFind()
            for j in _hidden_edges(engine):
                uf.union(int(engine.src[j]), int(engine.dst[j]))
            for j in deleted:
                a, b = int(engine.src[j]), int(engine.dst[j])
                if not (engine.hidden[a] and engine.hidden[b]) or uf.union(a, b):
                    restored.append(int(j))
        if restored:
            r = np.array(restored, dtype=np.int64)
            engine.set_active(r, True)
            deleted = np.setdiff1d(deleted, r)
            result.edges_restored += len(r)

        result.round_log.append({
            "round": result.rounds, "sweeps": sweeps, "cut": int(len(cut)),
            "labeled": int(len(frontier)), "restored": len(restored),
            "hidden": int(engine.hidden.sum()), "deleted": int(len(deleted)),
            "active": int(engine.active[:m].sum()),
        })
        if observer is not None:
            observer("round_end", engine, deleted)
        if not len(frontier) and not restored:
            break

    if len(deleted):
        logger.info("no further progress; restoring %d deleted edges before final labeling", len(deleted))
        engine.set_active(deleted, True)
        result.edges_restored += len(deleted)
        result.forced_restores = int(len(deleted))
        deleted = np.zeros(0, dtype=np.int64)

    rest = np.flatnonzero(engine.hidden)
    if len(rest):
        _record(result, engine, rest, engine.costs(), config)
    result.cvg = engine.cvg(config.tolerance)
    engine.write_back(result.predict_label)
    return result


def run_inference(graph: HetGraph, spec: EdgePotentialSpec, embeddings: EmbeddingTable | None,
                  config: InferenceConfig) -> InferenceResult:
    if config.strategy == FIXED_K:
        return run_fixed_k(graph, spec, embeddings, config)
    return run_delete_cycles(graph, spec, embeddings, config)


def config_dict(config: InferenceConfig) -> dict:
    return asdict(config)


__all__ = [
    "EdgePotentialSpec", "InferenceConfig", "InferenceResult", "classify", "compute_message", "cost",
    "edge_potential", "potential_pair", "run_delete_cycles", "run_fixed_k", "run_inference", "sweep",
    "hidden_subgraph_is_acyclic", "UNPREDICTED",
]
