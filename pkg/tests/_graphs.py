"""Random AMR graphs and a brute-force isomorphism check for tests."""

import itertools
import random
from collections import Counter

from swan.amr import AmrGraph, Constant, Edge

CONCEPTS = ["want-01", "believe-01", "boy", "girl", "cat", "go-02", "city", "N", "NE"]
ROLES = [":ARG0", ":ARG1", ":mod", ":location"]
CONSTANTS = [Constant("5"), Constant("-"), Constant("Alice", quoted=True), Constant("2.5")]


def random_graph(rng: random.Random, max_nodes: int = 6, min_nodes: int = 1,
                 concepts=CONCEPTS, reentrancy: float = 0.3, attributes: float = 0.2) -> AmrGraph:
    n = rng.randint(min_nodes, max_nodes)
    names = rng.sample([c + (str(k) if k else "") for c in "abcdefghijkmnpqrstuwyz" for k in range(3)], n)
    nodes = {names[i]: rng.choice(concepts) for i in range(n)}
    edges = []
    seen = set()
    for i in range(1, n):
        e = (names[rng.randrange(i)], rng.choice(ROLES), names[i])
        edges.append(e)
        seen.add(e)
    for _ in range(n):
        if rng.random() < reentrancy:
            e = (rng.choice(names), rng.choice(ROLES), rng.choice(names))
            if e not in seen:
                edges.append(e)
                seen.add(e)
        if rng.random() < attributes:
            edges.append((rng.choice(names), rng.choice([":quant", ":polarity", ":op1"]), rng.choice(CONSTANTS)))
    rng.shuffle(edges)
    return AmrGraph(names[0], nodes, tuple(Edge(*e) for e in edges))


def renamed(g: AmrGraph, rng: random.Random, shuffle_edges: bool = True) -> AmrGraph:
    pool = [c + str(k) for c in "abcdefghijkmnpqrstuwyz" for k in range(1, 4)]
    new = dict(zip(g.nodes, rng.sample(pool, len(g.nodes))))
    edges = [Edge(new[s], r, t if isinstance(t, Constant) else new[t]) for s, r, t in g.edges]
    if shuffle_edges:
        rng.shuffle(edges)
    return AmrGraph(new[g.root], {new[v]: c for v, c in g.nodes.items()}, tuple(edges))


def brute_isomorphic(g: AmrGraph, h: AmrGraph) -> bool:
    if len(g.nodes) != len(h.nodes) or len(g.edges) != len(h.edges):
        return False
    if Counter(g.nodes.values()) != Counter(h.nodes.values()):
        return False
    gv, hv = list(g.nodes), list(h.nodes)
    target = Counter((s, r, t.penman() if isinstance(t, Constant) else ("v", t)) for s, r, t in h.edges)
    for perm in itertools.permutations(hv):
        m = dict(zip(gv, perm))
        if m[g.root] != h.root or any(g.nodes[v] != h.nodes[m[v]] for v in gv):
            continue
        image = Counter(
            (m[s], r, t.penman() if isinstance(t, Constant) else ("v", m[t])) for s, r, t in g.edges
        )
        if image == target:
            return True
    return False


def naive_best_matched(a: AmrGraph, b: AmrGraph, credit) -> float:
    """Exhaustive over every partial injective map, counting triples directly."""
    va, vb = list(a.nodes), list(b.nodes)
    best = 0.0
    for k in range(0, min(len(va), len(vb)) + 1):
        for dom in itertools.combinations(va, k):
            for img in itertools.permutations(vb, k):
                m = dict(zip(dom, img))
                s = sum(credit(a.nodes[v], b.nodes[m[v]]) for v in dom)
                s += float(m.get(a.root) == b.root)
                bt = Counter((s_, r, t.value if isinstance(t, Constant) else ("v", t)) for s_, r, t in b.edges)
                at = Counter()
                for s_, r, t in a.edges:
                    if s_ not in m:
                        continue
                    if isinstance(t, Constant):
                        at[(m[s_], r, t.value)] += 1
                    elif t in m:
                        at[(m[s_], r, ("v", m[t]))] += 1
                s += sum((at & bt).values())
                best = max(best, s)
    return best
