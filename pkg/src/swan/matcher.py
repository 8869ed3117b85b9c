"""S2match / Smatch similarity between AMR graphs.

The score of a variable alignment is the number of triples of one graph that
reappear in the other under the alignment. Instance triples earn graded
credit from a concept similarity (exact match by default, or a table of soft
scores); the placeholder concepts ``NE``, ``N`` and ``X`` match anything.

Two search modes are offered. ``hillclimb`` is the usual Smatch search: a
greedy seed, relabel and swap moves, random restarts. ``exact_oracle``
enumerates every injective alignment and is limited to small graphs.
"""

from __future__ import annotations

import functools
import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amr import AmrGraph, Constant, color_rounds
from .errors import EmptyBank, FormatError, OracleTooLarge

__all__ = [
    "PLACEHOLDERS",
    "SimilarityTable",
    "load_similarity_table",
    "MatchConfig",
    "Alignment",
    "MatchScore",
    "s2match",
    "best_bank_score",
]

PLACEHOLDERS = frozenset({"NE", "N", "X"})


@dataclass(frozen=True)
class SimilarityTable:
    """Symmetric soft concept similarity. Identical concepts score 1, unknown pairs 0."""

    scores: dict = field(default_factory=dict)

    def __call__(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        s = self.scores.get((a, b))
        if s is None:
            s = self.scores.get((b, a), 0.0)
        return min(1.0, max(0.0, s))


def load_similarity_table(path: "str | Path") -> SimilarityTable:
    """Read ``conceptA<TAB>conceptB<TAB>score`` lines."""
    scores = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(lineno, "expected three tab-separated fields")
        try:
            value = float(parts[2])
        except ValueError:
            raise FormatError(lineno, f"bad score {parts[2]!r}") from None
        if not 0.0 <= value <= 1.0:
            raise FormatError(lineno, f"score {value} outside [0, 1]")
        scores[(parts[0], parts[1])] = value
    return SimilarityTable(scores)


@dataclass(frozen=True)
class MatchConfig:
    """Search and scoring options.

    Args:
        concept_similarity: ``"exact"`` or a :class:`SimilarityTable`.
        restarts: hill-climbing runs; the first starts from a greedy seed.
        mode: ``"hillclimb"`` or ``"exact_oracle"``.
        var_cap: largest graph (in variables) the oracle accepts.
        seed: RNG seed for tie-breaking and random restarts.
        wildcards: let placeholder concepts match any concept.
    """

    concept_similarity: "str | SimilarityTable" = "exact"
    restarts: int = 8
    mode: str = "hillclimb"
    var_cap: int = 8
    seed: int = 0
    wildcards: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.mode not in ("hillclimb", "exact_oracle"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.concept_similarity != "exact" and not isinstance(self.concept_similarity, SimilarityTable):
            raise ValueError("concept_similarity must be 'exact' or a SimilarityTable")

    def concept_credit(self, a: str, b: str) -> float:
        if self.wildcards and (a in PLACEHOLDERS or b in PLACEHOLDERS):
            return 1.0
        if self.concept_similarity == "exact":
            return float(a == b)
        return self.concept_similarity(a, b)


@dataclass(frozen=True)
class Alignment:
    mapping: dict
    matched_score: float


@dataclass(frozen=True)
class MatchScore:
    """Joint-triple precision/recall/F1 plus a node/edge breakdown.

    ``node_f1`` covers instance and top triples, ``edge_f1`` relation and
    attribute triples; ``mean_f1`` is their plain average.
    """

    precision: float
    recall: float
    f1: float
    alignment: Alignment
    node_f1: float = 0.0
    edge_f1: float = 0.0

    @property
    def mean_f1(self) -> float:
        return (self.node_f1 + self.edge_f1) / 2


class _Problem:
    """Credit tables for aligning the variables of ``a`` onto those of ``b``."""

    def __init__(self, a: AmrGraph, b: AmrGraph, cfg: MatchConfig):
        self.a, self.b, self.cfg = a, b, cfg
        self.va, self.vb = list(a.nodes), list(b.nodes)
        ia = {v: i for i, v in enumerate(self.va)}
        ib = {v: k for k, v in enumerate(self.vb)}
        na, nb = len(self.va), len(self.vb)

        attrs_a = [Counter() for _ in range(na)]
        attrs_b = [Counter() for _ in range(nb)]
        rels_a, rels_b = Counter(), Counter()
        for src, role, tgt in a.edges:
            if isinstance(tgt, Constant):
                attrs_a[ia[src]][(role, tgt.value)] += 1
            else:
                rels_a[(ia[src], role, ia[tgt])] += 1
        for src, role, tgt in b.edges:
            if isinstance(tgt, Constant):
                attrs_b[ib[src]][(role, tgt.value)] += 1
            else:
                rels_b[(ib[src], role, ib[tgt])] += 1

        # node credit: concept similarity plus the top triple
        self.node_w = [[cfg.concept_credit(a.nodes[u], b.nodes[w]) for w in self.vb] for u in self.va]
        self.node_w[ia[a.root]][ib[b.root]] += 1.0
        # attribute credit
        self.attr_w = [[float(sum((attrs_a[i] & attrs_b[k]).values())) for k in range(nb)] for i in range(na)]
        self.w1 = [[self.node_w[i][k] + self.attr_w[i][k] for k in range(nb)] for i in range(na)]

        self.rels = [(i, r, j, c) for (i, r, j), c in rels_a.items()]
        self.rels_b = rels_b
        self.incident = [set() for _ in range(na)]
        for t, (i, _, j, _) in enumerate(self.rels):
            self.incident[i].add(t)
            self.incident[j].add(t)

        self.n_node_a, self.n_node_b = na + 1, nb + 1
        self.n_edge_a, self.n_edge_b = len(a.edges), len(b.edges)
        self.bound = float(min(self.n_node_a + self.n_edge_a, self.n_node_b + self.n_edge_b))

    def rel_credit(self, t: int, m: list[int]) -> float:
        i, r, j, c = self.rels[t]
        k, l = m[i], m[j]
        if k < 0 or l < 0:
            return 0.0
        return float(min(c, self.rels_b.get((k, r, l), 0)))

    def score(self, m: list[int]) -> float:
        s = sum(self.w1[i][k] for i, k in enumerate(m) if k >= 0)
        return s + sum(self.rel_credit(t, m) for t in range(len(self.rels)))

    def local(self, m: list[int], touched: tuple[int, ...]) -> float:
        s = sum(self.w1[i][m[i]] for i in touched if m[i] >= 0)
        ts = set().union(*(self.incident[i] for i in touched))
        return s + sum(self.rel_credit(t, m) for t in ts)

    def breakdown(self, m: list[int]) -> tuple[float, float]:
        node = sum(self.node_w[i][k] for i, k in enumerate(m) if k >= 0)
        edge = sum(self.attr_w[i][k] for i, k in enumerate(m) if k >= 0)
        edge += sum(self.rel_credit(t, m) for t in range(len(self.rels)))
        return node, edge


def _greedy_seed(p: _Problem, rng: random.Random) -> list[int]:
    na, nb = len(p.va), len(p.vb)
    rounds = color_rounds([p.a, p.b])
    agree = [[-1] * nb for _ in range(na)]
    for depth, (ca, cb) in enumerate(rounds):
        for i, u in enumerate(p.va):
            for k, w in enumerate(p.vb):
                if ca[u] == cb[w]:
                    agree[i][k] = depth
    pairs = [(i, k) for i in range(na) for k in range(nb) if p.w1[i][k] > 0 or agree[i][k] >= 0]
    rng.shuffle(pairs)
    pairs.sort(key=lambda ik: (agree[ik[0]][ik[1]], p.w1[ik[0]][ik[1]]), reverse=True)
    m = [-1] * na
    used = set()
    for i, k in pairs:
        if m[i] < 0 and k not in used:
            m[i] = k
            used.add(k)
    _fill_random(m, used, nb, rng)
    return m


def _random_seed(p: _Problem, rng: random.Random) -> list[int]:
    m = [-1] * len(p.va)
    _fill_random(m, set(), len(p.vb), rng)
    return m


def _fill_random(m: list[int], used: set, nb: int, rng: random.Random):
    free = [k for k in range(nb) if k not in used]
    rng.shuffle(free)
    todo = [i for i, k in enumerate(m) if k < 0]
    rng.shuffle(todo)
    for i, k in zip(todo, free):
        m[i] = k


def _climb(p: _Problem, m: list[int]) -> float:
    na, nb = len(p.va), len(p.vb)
    current = p.score(m)
    while current < p.bound - 1e-9:
        best_gain, best_move = 1e-9, None
        free = [k for k in range(nb) if k not in set(m)]
        for i in range(na):
            old = m[i]
            before = p.local(m, (i,))
            for k in free:
                m[i] = k
                gain = p.local(m, (i,)) - before
                if gain > best_gain:
                    best_gain, best_move = gain, ("move", i, k)
            m[i] = old
            for j in range(i + 1, na):
                if m[i] < 0 and m[j] < 0:
                    continue
                before2 = p.local(m, (i, j))
                m[i], m[j] = m[j], m[i]
                gain = p.local(m, (i, j)) - before2
                m[i], m[j] = m[j], m[i]
                if gain > best_gain:
                    best_gain, best_move = gain, ("swap", i, j)
        if best_move is None:
            break
        kind, x, y = best_move
        if kind == "move":
            m[x] = y
        else:
            m[x], m[y] = m[y], m[x]
        current += best_gain
    return p.score(m)


def _hillclimb(p: _Problem, cfg: MatchConfig) -> tuple[list[int], float]:
    rng = random.Random(cfg.seed)
    best_m, best = None, -1.0
    for restart in range(cfg.restarts):
        m = _greedy_seed(p, rng) if restart == 0 else _random_seed(p, rng)
        s = _climb(p, m)
        if s > best + 1e-12:
            best_m, best = list(m), s
        if best >= p.bound - 1e-9:
            break
    return best_m, best


@functools.lru_cache(maxsize=64)
def _injections(n_from: int, n_to: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n_to), n_from)), dtype=np.intp).reshape(-1, n_from)


def _oracle(p: _Problem) -> tuple[list[int], float]:
    # Credits are non-negative, so some maximal injection is optimal.
    na, nb = len(p.va), len(p.vb)
    w1 = np.array(p.w1, dtype=float)
    if na <= nb:
        maps = _injections(na, nb)
        total = w1[np.arange(na), maps].sum(axis=1)
        for i, r, j, c in p.rels:
            credit = np.zeros((nb, nb))
            for (k, rb, l), cb in p.rels_b.items():
                if rb == r:
                    credit[k, l] = min(c, cb)
            total = total + credit[maps[:, i], maps[:, j]]
        best = int(np.argmax(total))
        return [int(k) for k in maps[best]], float(total[best])
    # more variables in a than in b: enumerate injections of b into a
    inv = _injections(nb, na)
    total = w1[inv, np.arange(nb)].sum(axis=1)
    where = np.full((inv.shape[0], na), -1, dtype=np.intp)
    np.put_along_axis(where, inv, np.arange(nb)[None, :].repeat(inv.shape[0], 0), axis=1)
    for i, r, j, c in p.rels:
        credit = np.zeros((nb + 1, nb + 1))
        for (k, rb, l), cb in p.rels_b.items():
            if rb == r:
                credit[k, l] = min(c, cb)
        # index -1 lands on the zero padding row/column
        total = total + credit[where[:, i], where[:, j]]
    best = int(np.argmax(total))
    return [int(k) for k in where[best]], float(total[best])


def _f1(matched: float, n_a: int, n_b: int) -> float:
    return 0.0 if n_a + n_b == 0 else 2.0 * matched / (n_a + n_b)


def s2match(a: AmrGraph, b: AmrGraph, cfg: MatchConfig | None = None) -> MatchScore:
    """Similarity of ``a`` (the candidate) against ``b`` (the reference).

    Precision is taken over the triples of ``a`` and recall over those of ``b``.

    Raises:
        OracleTooLarge: ``exact_oracle`` mode on a graph above ``cfg.var_cap``.
    """
    cfg = cfg or MatchConfig()
    p = _Problem(a, b, cfg)
    if cfg.mode == "exact_oracle":
        if max(len(p.va), len(p.vb)) > cfg.var_cap:
            raise OracleTooLarge(f"exact_oracle limited to {cfg.var_cap} variables per graph")
        m, matched = _oracle(p)
    else:
        m, matched = _hillclimb(p, cfg)
    matched = min(matched, p.bound)
    n_a = p.n_node_a + p.n_edge_a
    n_b = p.n_node_b + p.n_edge_b
    node, edge = p.breakdown(m)
    mapping = {p.va[i]: p.vb[k] for i, k in enumerate(m) if k >= 0}
    return MatchScore(
        precision=matched / n_a,
        recall=matched / n_b,
        f1=min(1.0, _f1(matched, n_a, n_b)),
        alignment=Alignment(mapping, matched),
        node_f1=min(1.0, _f1(node, p.n_node_a, p.n_node_b)),
        edge_f1=1.0 if p.n_edge_a + p.n_edge_b == 0 else min(1.0, _f1(edge, p.n_edge_a, p.n_edge_b)),
    )


def best_bank_score(g: AmrGraph, bank, cfg: MatchConfig | None = None) -> tuple[float, int]:
    """Best F1 of ``g`` against any template; ties go to the lowest template id.

    ``bank`` is a :class:`~swan.bank.TemplateBank` or any iterable of
    ``(template_id, graph)`` pairs.
    """
    templates = getattr(bank, "templates", bank)
    best, best_id = -1.0, None
    for entry in sorted(templates, key=lambda t: t[0]):
        tid, graph = entry[0], entry[1]
        f = s2match(g, graph, cfg).f1
        if f > best:
            best, best_id = f, tid
    if best_id is None:
        raise EmptyBank("template bank is empty")
    return best, best_id
