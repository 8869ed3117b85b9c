"""AMR graphs, Penman notation, Smatch triples and canonical forms.

A graph is identified by its variables: every concept node carries a unique
variable name, and that name is the node id. Edge targets are either another
variable or a :class:`Constant` (strings, numbers, polarity and mode values).

    >>> g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl) :ARG1 b))")
    >>> concept_node_count(g), g.edge_count
    (4, 4)
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import PenmanSyntaxError

__all__ = [
    "Constant",
    "Edge",
    "AmrGraph",
    "Triple",
    "parse_penman",
    "serialize_penman",
    "to_triples",
    "canonicalize",
    "concept_node_count",
    "rename_variables",
    "is_isomorphic",
    "color_rounds",
    "iter_penman_blocks",
    "read_corpus",
]

# A bare token of this shape is read as a variable reference, never a constant.
VARIABLE_RE = re.compile(r"[a-z]\d*\Z")
ROLE_RE = re.compile(r":[A-Za-z0-9-]+\Z")
_BARE_RE = re.compile(r"[^\s()\"/:#][^\s()\"/:]*\Z")

_TOKEN_RE = re.compile(
    r"""
     (?P<ws>\s+)
    |(?P<comment>\#[^\n]*)
    |(?P<lp>\()
    |(?P<rp>\))
    |(?P<slash>/)
    |(?P<role>:[^\s()"/:]*)
    |(?P<string>"(?:[^"\\]|\\.)*")
    |(?P<symbol>[^\s()"/:#][^\s()"/:]*)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Constant:
    """A literal edge target. ``quoted`` constants serialize inside double quotes."""

    value: str
    quoted: bool = False

    def __post_init__(self):
        if not isinstance(self.value, str):
            object.__setattr__(self, "value", _format_number(self.value))
        if not self.quoted and (not _BARE_RE.match(self.value) or VARIABLE_RE.match(self.value)):
            raise ValueError(f"constant {self.value!r} cannot be written bare; use quoted=True")

    def penman(self) -> str:
        if self.quoted:
            escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return self.value

    def __str__(self):
        return self.penman()


def _format_number(x) -> str:
    if isinstance(x, bool):
        raise ValueError("booleans are not AMR constants")
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


class Edge(NamedTuple):
    source: str
    role: str
    target: "str | Constant"


@dataclass(frozen=True)
class AmrGraph:
    """Rooted, labelled, directed graph.

    Args:
        root: variable of the root node.
        nodes: variable -> concept label, in definition order.
        edges: (source variable, role, target) in document order. A target is
            a variable (possibly re-entrant) or a :class:`Constant`.
    """

    root: str
    nodes: dict
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(self.nodes))
        object.__setattr__(self, "edges", tuple(Edge(*e) for e in self.edges))
        if self.root not in self.nodes:
            raise ValueError(f"root {self.root!r} is not a node")
        adjacency: dict[str, list[str]] = {v: [] for v in self.nodes}
        for src, role, tgt in self.edges:
            if not ROLE_RE.match(role):
                raise ValueError(f"bad role label {role!r}")
            if src not in self.nodes:
                raise ValueError(f"edge source {src!r} is not a node")
            if isinstance(tgt, Constant):
                continue
            if tgt not in self.nodes:
                raise ValueError(f"edge target {tgt!r} is not a node")
            adjacency[src].append(tgt)
        seen = {self.root}
        stack = [self.root]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise ValueError(f"nodes unreachable from root: {missing}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def out_edges(self, var: str) -> list[Edge]:
        return [e for e in self.edges if e.source == var]

    def __str__(self):
        return serialize_penman(self)


class Triple(NamedTuple):
    """One Smatch triple.

    ``kind`` is ``"instance"``, ``"top"``, ``"attribute"`` or ``"relation"``.
    Instance triples carry the concept as target; the top triple has no target.
    """

    kind: str
    source: str
    role: str
    target: "str | Constant | None"


# -- parsing -----------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] == '"':
                raise PenmanSyntaxError(pos, "unterminated string")
            raise PenmanSyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1], flags=re.DOTALL)


def parse_penman(text: str) -> AmrGraph:
    """Parse one Penman s-expression into an :class:`AmrGraph`.

    Raises:
        PenmanSyntaxError: unbalanced parentheses, duplicate variables, a
            missing concept, a bad role, or a reference to a variable that is
            not defined earlier in the text.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise PenmanSyntaxError(0, "empty input")
    end = len(text)
    i = 0

    def peek(k=0):
        return tokens[i + k] if i + k < len(tokens) else ("eof", "", end)

    nodes: dict[str, str] = {}
    edges: list[Edge] = []
    bare_constants: list[tuple[str, int]] = []

    def open_node() -> str:
        # consumes "( var / concept"
        nonlocal i
        kind, val, pos = peek()
        if kind != "lp":
            raise PenmanSyntaxError(pos, "expected '('")
        kind, var, pos = peek(1)
        if kind != "symbol":
            raise PenmanSyntaxError(pos, "expected a variable after '('")
        if var in nodes:
            raise PenmanSyntaxError(pos, f"duplicate variable {var!r}")
        kind, _, pos = peek(2)
        if kind != "slash":
            raise PenmanSyntaxError(pos, f"expected '/' after variable {var!r}")
        kind, concept, pos = peek(3)
        if kind != "symbol":
            raise PenmanSyntaxError(pos, f"missing concept after '/' for {var!r}")
        nodes[var] = concept
        i += 4
        return var

    root = open_node()
    stack = [root]
    while stack:
        kind, val, pos = peek()
        if kind == "rp":
            stack.pop()
            i += 1
        elif kind == "role":
            if not ROLE_RE.match(val):
                raise PenmanSyntaxError(pos, f"bad role label {val!r}")
            i += 1
            tkind, tval, tpos = peek()
            src = stack[-1]
            if tkind == "lp":
                child = open_node()
                edges.append(Edge(src, val, child))
                stack.append(child)
            elif tkind == "string":
                edges.append(Edge(src, val, Constant(_unquote(tval), quoted=True)))
                i += 1
            elif tkind == "symbol":
                if tval in nodes:
                    edges.append(Edge(src, val, tval))
                elif VARIABLE_RE.match(tval):
                    raise PenmanSyntaxError(tpos, f"reference to undefined variable {tval!r}")
                else:
                    edges.append(Edge(src, val, Constant(tval)))
                    bare_constants.append((tval, tpos))
                i += 1
            else:
                raise PenmanSyntaxError(tpos, f"missing value for role {val}")
        elif kind == "eof":
            raise PenmanSyntaxError(pos, "unbalanced parentheses: missing ')'")
        else:
            raise PenmanSyntaxError(pos, f"unexpected token {val!r}")
    if i < len(tokens):
        raise PenmanSyntaxError(tokens[i][2], "trailing content after graph")
    for val, pos in bare_constants:
        if val in nodes:
            raise PenmanSyntaxError(pos, f"forward reference to variable {val!r}")
    return AmrGraph(root, nodes, tuple(edges))


# -- serialization -----------------------------------------------------------


def _render(g: AmrGraph, out_edges: dict, namer, indent: int | None) -> str:
    parts: list[str] = []
    names: dict[str, str] = {}

    def visit(var: str, depth: int):
        names[var] = namer(var)
        parts.append(f"({names[var]} / {g.nodes[var]}")
        for e in out_edges[var]:
            if indent is None:
                parts.append(f" {e.role} ")
            else:
                parts.append("\n" + " " * (indent * (depth + 1)) + f"{e.role} ")
            t = e.target
            if isinstance(t, Constant):
                parts.append(t.penman())
            elif t in names:
                parts.append(names[t])
            else:
                visit(t, depth + 1)
        parts.append(")")

    visit(g.root, 0)
    return "".join(parts)


def _edges_by_source(g: AmrGraph) -> dict[str, list[Edge]]:
    out: dict[str, list[Edge]] = {v: [] for v in g.nodes}
    for e in g.edges:
        out[e.source].append(e)
    return out


def serialize_penman(g: AmrGraph, indent: int | None = None) -> str:
    """Write ``g`` in Penman notation.

    Edges keep their stored order; a node is defined where the depth-first
    walk from the root first reaches it and referenced by variable afterwards.
    ``indent=None`` gives a single line, an integer gives one role per line.
    """
    return _render(g, _edges_by_source(g), lambda v: v, indent)


# -- triples -----------------------------------------------------------------

_KIND_ORDER = {"attribute": 0, "instance": 1, "relation": 2, "top": 3}


def _target_key(t) -> str:
    if t is None:
        return ""
    if isinstance(t, Constant):
        return t.penman()
    return t


def to_triples(g: AmrGraph) -> list[Triple]:
    """Instance triples for every node, one top triple, one triple per edge."""
    triples = [Triple("instance", v, "instance", c) for v, c in g.nodes.items()]
    triples.append(Triple("top", g.root, "TOP", None))
    for src, role, tgt in g.edges:
        kind = "attribute" if isinstance(tgt, Constant) else "relation"
        triples.append(Triple(kind, src, role, tgt))
    triples.sort(key=lambda t: (_KIND_ORDER[t.kind], t.source, t.role, _target_key(t.target)))
    return triples


def concept_node_count(g: AmrGraph) -> int:
    return len(g.nodes)


def rename_variables(g: AmrGraph, mapping: dict[str, str]) -> AmrGraph:
    """Return ``g`` with variables renamed through the injective ``mapping``."""
    if set(mapping) != set(g.nodes) or len(set(mapping.values())) != len(mapping):
        raise ValueError("mapping must be a bijection over the graph's variables")

    def tgt(t):
        return t if isinstance(t, Constant) else mapping[t]

    return AmrGraph(
        mapping[g.root],
        {mapping[v]: c for v, c in g.nodes.items()},
        tuple(Edge(mapping[s], r, tgt(t)) for s, r, t in g.edges),
    )


# -- canonical form ----------------------------------------------------------


def color_rounds(graphs: list[AmrGraph]) -> list[list[dict[str, int]]]:
    """Colour refinement over the disjoint union of ``graphs``.

    Round 0 colours nodes by (is-root, concept); each later round adds the
    sorted multisets of outgoing and incoming (role, neighbour colour) pairs.
    Colours are ranks of sorted signatures, so they are invariant under
    variable renaming and comparable across the graphs passed together.
    Returns one list per round of ``{variable: colour}`` dicts, one per graph;
    the last round is the stable partition.
    """

    def rank(sigs: list[dict]) -> list[dict[str, int]]:
        distinct = sorted({s for d in sigs for s in d.values()})
        index = {s: k for k, s in enumerate(distinct)}
        return [{v: index[s] for v, s in d.items()} for d in sigs]

    current = rank([{v: (int(v == g.root), c) for v, c in g.nodes.items()} for g in graphs])
    rounds = [current]
    total = sum(len(g.nodes) for g in graphs)
    n_colors = len({c for d in current for c in d.values()})
    for _ in range(total):
        sigs = []
        for g, col in zip(graphs, current):
            out: dict[str, list] = {v: [] for v in g.nodes}
            inc: dict[str, list] = {v: [] for v in g.nodes}
            for s, r, t in g.edges:
                if isinstance(t, Constant):
                    out[s].append((r, 1, 0, t.penman()))
                else:
                    out[s].append((r, 0, col[t], ""))
                    inc[t].append((r, col[s]))
            sigs.append({v: (col[v], tuple(sorted(out[v])), tuple(sorted(inc[v]))) for v in g.nodes})
        nxt = rank(sigs)
        k = len({c for d in nxt for c in d.values()})
        if k == n_colors:
            break
        current, n_colors = nxt, k
        rounds.append(current)
    return rounds


# Cap on tie orderings explored; above it the first ordering is used.
_CANONICAL_ORDERING_CAP = 5040


def canonicalize(g: AmrGraph) -> str:
    """Rename-invariant Penman string for ``g``.

    Children are ordered by (role, refined colour of the target, constant
    text). Where siblings still tie, every ordering of the tied run is tried
    and the lexicographically smallest serialization wins, which keeps the
    form exact: two graphs get the same string iff they are isomorphic.
    Variables are renamed in visit order, AMR-style (first letter of the
    concept plus a counter).
    """
    colors = color_rounds([g])[-1][0]
    base = _edges_by_source(g)

    def key(e: Edge):
        if isinstance(e.target, Constant):
            return (e.role, 1, 0, e.target.penman())
        return (e.role, 0, colors[e.target], "")

    choices: list[tuple[str, list[list[list[Edge]]]]] = []
    for v, edges in base.items():
        edges = sorted(edges, key=key)
        runs = [list(grp) for _, grp in itertools.groupby(edges, key=key)]
        options = []
        for run in runs:
            if len(run) > 1 and not isinstance(run[0].target, Constant):
                options.append([list(p) for p in _distinct_permutations(run)])
            else:
                options.append([run])
        choices.append((v, options))

    n_orderings = math.prod(len(o) for _, opts in choices for o in opts)
    best = None
    flat = [(v, i, opts) for v, options in choices for i, opts in enumerate(options)]
    combos = itertools.product(*(opts for _, _, opts in flat))
    if n_orderings > _CANONICAL_ORDERING_CAP:
        combos = itertools.islice(combos, 1)
    for combo in combos:
        out = {v: [] for v in g.nodes}
        for (v, _, _), run in zip(flat, combo):
            out[v].extend(run)
        s = _render(g, out, _fresh_namer(g), None)
        if best is None or s < best:
            best = s
    return best


def _distinct_permutations(run: list[Edge]) -> list[tuple[Edge, ...]]:
    seen = []
    for p in itertools.permutations(run):
        if p not in seen:
            seen.append(p)
    return seen


def _fresh_namer(g: AmrGraph):
    used: dict[str, int] = {}

    def namer(var: str) -> str:
        first = g.nodes[var][:1].lower()
        letter = first if "a" <= first <= "z" else "x"
        used[letter] = used.get(letter, 0) + 1
        k = used[letter]
        return letter if k == 1 else f"{letter}{k}"

    return namer


def is_isomorphic(g: AmrGraph, h: AmrGraph) -> bool:
    return canonicalize(g) == canonicalize(h)


# -- corpus files ------------------------------------------------------------


def iter_penman_blocks(text: str, one_per_line: bool = False) -> Iterator[str]:
    """Split corpus text into Penman strings.

    Blocks are separated by blank lines (or one graph per line). Lines
    starting with ``#`` are metadata and dropped.
    """
    if one_per_line:
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                yield line
        return
    block: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            if block:
                yield "\n".join(block)
                block = []
        elif not stripped.startswith("#"):
            block.append(line)
    if block:
        yield "\n".join(block)


def read_corpus(source: "str | Path | Iterable[str]", one_per_line: bool = False) -> Iterator[AmrGraph]:
    """Yield graphs from a corpus file path or an iterable of Penman strings."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        blocks: Iterable[str] = iter_penman_blocks(text, one_per_line)
    else:
        blocks = source
    for block in blocks:
        yield parse_penman(block)
