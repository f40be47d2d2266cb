"""Independent reference implementations used by the test suite.

Nothing here calls the code under test: potentials, similarities,
min-marginals and elbow points are recomputed from their definitions.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import numpy as np

from phishgraph.embeddings import EmbeddingTable
from phishgraph.graph import HetGraph, Node, edge_key

# kind -> [(neighbour kind, family)] for edges a random tree may grow
GROWTH = {
    "url": [("domain", "url-domain"), ("substring", "url-substring")],
    "domain": [("url", "url-domain"), ("ip", "domain-ip"), ("nameserver", "domain-ns")],
    "substring": [("url", "url-substring")],
    "ip": [("domain", "domain-ip")],
    "nameserver": [("domain", "domain-ns")],
}


def raw_graph(nodes, edges):
    """Graph without edge-family checks, for abstract topologies such as triangles."""
    g = HetGraph()
    for node in nodes:
        g.nodes[node.id] = node
        g.adj[node.id] = set()
    for a, b in edges:
        g.edges[edge_key(a, b)] = "test"
        g.adj[a].add(b)
        g.adj[b].add(a)
    return g


def random_tree(rng: random.Random, n_nodes: int, p_observed: float = 0.3):
    """Random typed tree with random hidden priors and random node vectors."""
    g = HetGraph()
    root = Node("url:0", "url", "0")
    g.add_node(root)
    order = [root.id]
    for i in range(1, n_nodes):
        parent = g.nodes[rng.choice(order)]
        kind, family = rng.choice(GROWTH[parent.kind])
        nid = f"{kind}:{i}"
        g.add_node(Node(nid, kind, str(i)))
        g.add_edge(parent.id, nid, family)
        order.append(nid)
    for nid in order:
        node = g.nodes[nid]
        if node.kind == "url" and rng.random() < p_observed:
            label = rng.randint(0, 1)
            node.label = label
            node.prior = (1.0, 0.0) if label == 0 else (0.0, 1.0)
        else:
            p = rng.random()
            node.prior = (p, 1.0 - p)
    emb = EmbeddingTable(4)
    for nid in order:
        if rng.random() < 0.9:
            emb.set(nid, [rng.gauss(0, 1) for _ in range(4)])
    return g, emb


def random_loopy_graph(rng: random.Random, n_urls: int, n_domains: int, n_ips: int, p_observed: float = 0.4,
                       entity_priors: bool = False):
    """Loopy typed graph; ``entity_priors`` gives non-URL nodes random priors so exact cost ties vanish."""
    g = HetGraph()
    urls = [g.add_node(Node(f"url:{i}", "url", str(i))).id for i in range(n_urls)]
    doms = [g.add_node(Node(f"domain:{i}", "domain", str(i))).id for i in range(n_domains)]
    ips = [g.add_node(Node(f"ip:{i}", "ip", str(i))).id for i in range(n_ips)]
    subs = [g.add_node(Node(f"substring:{i}", "substring", str(i))).id for i in range(n_domains)]
    for u in urls:
        g.add_edge(u, rng.choice(doms), "url-domain")
        for s in rng.sample(subs, rng.randint(0, 2)):
            g.add_edge(u, s, "url-substring")
        if rng.random() < p_observed:
            label = rng.randint(0, 1)
            g.nodes[u].label = label
            g.nodes[u].prior = (1.0, 0.0) if label == 0 else (0.0, 1.0)
        else:
            p = rng.random()
            g.nodes[u].prior = (p, 1 - p)
    for d in doms:
        for ip in rng.sample(ips, rng.randint(1, 2)):
            g.add_edge(d, ip, "domain-ip")
    if entity_priors:
        for nid in doms + ips + subs:
            p = rng.random()
            g.nodes[nid].prior = (p, 1 - p)
    emb = EmbeddingTable(4)
    for nid in g.nodes:
        emb.set(nid, [rng.gauss(0, 1) for _ in range(4)])
    return g, emb


def cosine(x, y) -> float:
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    if nx == 0 or ny == 0:
        return 0.0
    return sum(a * b for a, b in zip(x, y)) / (nx * ny)


def psi(a, b, la, lb, mode, emb, eps=0.1, ths_plus=0.6, ths_minus=1.0):
    va = emb.get(a) if emb is not None else None
    vb = emb.get(b) if emb is not None else None
    usable = va is not None and vb is not None and a not in emb.zero_flagged and b not in emb.zero_flagged
    if mode == "epsilon" or not usable:
        return 0.5 - eps if la == lb else 0.5 + eps
    s = min(max(cosine(va, vb), 0.0), 1.0)
    return min(ths_plus, 1 - s) if la == lb else max(ths_minus, s)


def min_marginals(graph: HetGraph, mode: str, emb, **pot):
    """Exhaustive per-node min-marginals over the hidden nodes' labelings."""
    hidden = sorted(n for n, node in graph.nodes.items() if node.hidden)
    col = {n: i for i, n in enumerate(hidden)}
    fixed = {n: int(node.label) for n, node in graph.nodes.items() if not node.hidden}
    # one row per joint labeling of the hidden nodes
    assign = np.array(list(itertools.product((0, 1), repeat=len(hidden))), dtype=np.int64).reshape(-1, len(hidden))
    energy = np.zeros(len(assign))
    for n, i in col.items():
        prior = graph.nodes[n].prior
        energy += np.where(assign[:, i] == 1, 1.0 - prior[1], 1.0 - prior[0])
    for a, b in graph.edges:
        table = np.array([[psi(a, b, la, lb, mode, emb, **pot) for lb in (0, 1)] for la in (0, 1)])
        la = assign[:, col[a]] if a in col else np.full(len(assign), fixed[a])
        lb = assign[:, col[b]] if b in col else np.full(len(assign), fixed[b])
        energy += table[la, lb]
    return {n: [float(energy[assign[:, i] == l].min()) for l in (0, 1)] for n, i in col.items()}


def labels_from_marginals(marginals):
    # lower phishing cost -> phishing; equality -> phishing
    return {n: int(m[1] <= m[0]) for n, m in marginals.items()}


def recursive_message(graph: HetGraph, x: str, y: str, mode: str, emb, **pot):
    """Tree message x -> y by direct recursion; observed senders ignore their own inputs."""
    node = graph.nodes[x]
    h = [1.0 - node.prior[0], 1.0 - node.prior[1]]
    if node.hidden:
        for k in graph.adj[x]:
            if k != y:
                m = recursive_message(graph, k, x, mode, emb, **pot)
                h = [h[0] + m[0], h[1] + m[1]]
    out = [min(h[lp] + psi(x, y, lp, l, mode, emb, **pot) for lp in (0, 1)) for l in (0, 1)]
    low = min(out)
    return [out[0] - low, out[1] - low]


def elbow_oracle(freqs):
    """Max perpendicular distance to the endpoint chord, on min-max scaled axes, in exact rationals."""
    n = len(freqs)
    lo, hi = min(freqs), max(freqs)
    span = Fraction(hi - lo) if hi != lo else Fraction(1)
    pts = [(Fraction(i, n - 1), Fraction(f - lo) / span) for i, f in enumerate(freqs)]
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    dx, dy = x1 - x0, y1 - y0
    norm2 = dx * dx + dy * dy
    best, best_i = Fraction(-1), 0
    for i, (x, y) in enumerate(pts):
        t = ((x - x0) * dx + (y - y0) * dy) / norm2
        px, py = x0 + t * dx, y0 + t * dy
        d2 = (x - px) ** 2 + (y - py) ** 2
        if d2 > best:
            best, best_i = d2, i
    return best_i
