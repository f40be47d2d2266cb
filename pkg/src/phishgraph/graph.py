"""Heterogeneous URL / substring / domain / IP / nameserver graph."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import UrlRecord
from .enrichment import EnrichmentStore, Resolver, enrich
from .urls import PublicSuffixList, TokenVocabulary, UrlParseError, parse_url, tokenize

logger = logging.getLogger(__name__)

GRAPH_FORMAT_VERSION = 1

URL, SUBSTRING, DOMAIN, IP, NAMESERVER = "url", "substring", "domain", "ip", "nameserver"
KINDS = (URL, SUBSTRING, DOMAIN, IP, NAMESERVER)

FAMILIES = {
    "url-domain": (URL, DOMAIN),
    "domain-ip": (DOMAIN, IP),
    "domain-ns": (DOMAIN, NAMESERVER),
    "url-substring": (URL, SUBSTRING),
}

UNKNOWN = 0.5
UNPREDICTED = -1
UNIFORM = (0.5, 0.5)

TRAIN = "train"
TEST = "test"


class GraphError(ValueError):
    pass


def node_id(kind: str, name: str) -> str:
    return f"{kind}:{name}"


@dataclass
class Node:
    id: str
    kind: str
    name: str
    label: float = UNKNOWN
    predict_label: int = UNPREDICTED
    prior: tuple[float, float] = UNIFORM
    msg_sum: list[float] = field(default_factory=lambda: [0.0, 0.0])
    msg_nbr: dict[str, list[float]] = field(default_factory=dict)

    @property
    def hidden(self) -> bool:
        return self.label == UNKNOWN and self.predict_label == UNPREDICTED

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "name": self.name, "label": self.label,
            "predict_label": self.predict_label, "prior_probability": list(self.prior),
            "msg_sum": list(self.msg_sum),
            "msg_nbr": {k: list(v) for k, v in sorted(self.msg_nbr.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Node":
        return cls(
            id=d["id"], kind=d["kind"], name=d["name"], label=d["label"],
            predict_label=int(d["predict_label"]), prior=tuple(d["prior_probability"]),
            msg_sum=list(d["msg_sum"]), msg_nbr={k: list(v) for k, v in d["msg_nbr"].items()},
        )


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class HetGraph:
    nodes: dict[str, Node] = field(default_factory=dict)
    adj: dict[str, set[str]] = field(default_factory=dict)
    edges: dict[tuple[str, str], str] = field(default_factory=dict)
    stats: dict[str, int] = field(default_factory=dict)

    def add_node(self, node: Node) -> Node:
        existing = self.nodes.get(node.id)
        if existing is not None:
            return existing
        if node.kind not in KINDS:
            raise GraphError(f"unknown node kind {node.kind!r}")
        self.nodes[node.id] = node
        self.adj[node.id] = set()
        return node

    def add_edge(self, a: str, b: str, family: str) -> None:
        if a == b:
            raise GraphError(f"self-loop on {a}")
        kinds = FAMILIES.get(family)
        if kinds is None:
            raise GraphError(f"unknown edge family {family!r}")
        if {self.nodes[a].kind, self.nodes[b].kind} != set(kinds):
            raise GraphError(f"edge {a} -- {b} does not match family {family}")
        key = edge_key(a, b)
        if key in self.edges:
            return
        self.edges[key] = family
        self.adj[a].add(b)
        self.adj[b].add(a)

    def ids_of_kind(self, kind: str) -> list[str]:
        return sorted(i for i, n in self.nodes.items() if n.kind == kind)

    def neighbors(self, node: str) -> list[str]:
        return sorted(self.adj[node])

    def copy(self) -> "HetGraph":
        return copy.deepcopy(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HetGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def check_invariants(self) -> None:
        for (a, b), family in self.edges.items():
            if a == b or {self.nodes[a].kind, self.nodes[b].kind} != set(FAMILIES[family]):
                raise GraphError(f"edge {a} -- {b} violates family {family}")
            if b not in self.adj[a] or a not in self.adj[b]:
                raise GraphError(f"adjacency not symmetric for {a} -- {b}")
        n_adj = sum(len(v) for v in self.adj.values())
        if n_adj != 2 * len(self.edges):
            raise GraphError("adjacency and edge set disagree")


def hidden_nodes(graph: HetGraph) -> set[str]:
    return {i for i, n in graph.nodes.items() if n.hidden}


def build_graph(
    records: Sequence[UrlRecord],
    roles: Sequence[str],
    vocabulary: TokenVocabulary | None,
    store: EnrichmentStore | None,
    priors: Mapping[str, tuple[float, float]] | None = None,
    *,
    resolver: Resolver | None = None,
    psl: PublicSuffixList | None = None,
) -> HetGraph:
    """Build the graph for one fold.

    ``roles[i]`` is ``"train"`` (observed, hard prior) or ``"test"`` (hidden,
    prior from ``priors`` or uniform). A URL listed under both roles is
    treated as training data.
    """
    if len(records) != len(roles):
        raise GraphError("records and roles differ in length")
    url_role: dict[str, tuple[str, int]] = {}
    conflicts = 0
    for rec, role in zip(records, roles):
        if role not in (TRAIN, TEST):
            raise GraphError(f"unknown fold role {role!r}")
        prev = url_role.get(rec.url)
        if prev is None:
            url_role[rec.url] = (role, rec.label)
        elif prev[0] != role:
            conflicts += 1
            if role == TRAIN:
                url_role[rec.url] = (role, rec.label)
    if conflicts:
        logger.warning("%d URLs appear in both train and test; treated as train", conflicts)

    g = HetGraph()
    skipped = 0
    for url, (role, label) in url_role.items():
        try:
            anatomy = parse_url(url, psl)
        except UrlParseError as exc:
            logger.warning("skipping %s", exc)
            skipped += 1
            continue
        uid = node_id(URL, url)
        if role == TRAIN:
            prior = (1.0, 0.0) if label == 0 else (0.0, 1.0)
            g.add_node(Node(uid, URL, url, label=label, prior=prior))
        else:
            p = priors.get(url) if priors else None
            prior = (float(p[0]), float(p[1])) if p is not None else UNIFORM
            g.add_node(Node(uid, URL, url, prior=prior))

        domain = anatomy.registered_domain
        did = node_id(DOMAIN, domain)
        if did not in g.nodes:
            g.add_node(Node(did, DOMAIN, domain))
            rec = enrich(domain, store, resolver) if store is not None else None
            if rec is not None:
                for ip in rec.ips:
                    iid = g.add_node(Node(node_id(IP, ip), IP, ip)).id
                    g.add_edge(did, iid, "domain-ip")
                for ns in rec.nameservers:
                    nid = g.add_node(Node(node_id(NAMESERVER, ns), NAMESERVER, ns)).id
                    g.add_edge(did, nid, "domain-ns")
        g.add_edge(uid, did, "url-domain")

        for tok in tokenize(anatomy):
            if vocabulary is not None and tok not in vocabulary:
                continue
            sid = g.add_node(Node(node_id(SUBSTRING, tok), SUBSTRING, tok)).id
            g.add_edge(uid, sid, "url-substring")

    g.stats = {"skipped_urls": skipped, "train_test_conflicts": conflicts}
    return g


def save_graph(graph: HetGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"version": GRAPH_FORMAT_VERSION, "n_nodes": len(graph.nodes), "n_edges": len(graph.edges)}
        fh.write(json.dumps(header) + "\n")
        for nid in sorted(graph.nodes):
            fh.write(json.dumps({"node": graph.nodes[nid].to_dict()}) + "\n")
        for (a, b) in sorted(graph.edges):
            fh.write(json.dumps({"edge": [a, b, graph.edges[(a, b)]]}) + "\n")


def load_graph(path: str | Path) -> HetGraph:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GraphError("empty graph file")
    try:
        header = json.loads(lines[0])
        version = header["version"]
    except (json.JSONDecodeError, KeyError, TypeError):
        raise GraphError("graph file lacks a version header") from None
    if version != GRAPH_FORMAT_VERSION:
        raise GraphError(f"unsupported graph format version {version!r}")

    g = HetGraph()
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise GraphError(f"truncated or corrupt graph file at line {lineno}") from None
        if "node" in obj:
            g.add_node(Node.from_dict(obj["node"]))
        elif "edge" in obj:
            a, b, family = obj["edge"]
            g.add_edge(a, b, family)
        else:
            raise GraphError(f"unrecognised record at line {lineno}")
    if len(g.nodes) != header.get("n_nodes") or len(g.edges) != header.get("n_edges"):
        raise GraphError(
            f"truncated graph file: expected {header.get('n_nodes')} nodes / {header.get('n_edges')} edges, "
            f"read {len(g.nodes)} / {len(g.edges)}"
        )
    return g
