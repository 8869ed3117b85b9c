"""The secret template bank: abstraction, corpus filtering, persistence.

A template is an AMR whose named entities, leaf nouns and underspecified
concepts have been replaced by the placeholders ``NE``, ``N`` and ``X``.
The bank keeps templates whose abstracted form occurs a moderate number of
times in the source corpus and has enough concept nodes to carry structure.
"""

from __future__ import annotations

import hashlib
import os
import random
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .amr import AmrGraph, Constant, canonicalize, concept_node_count, parse_penman, serialize_penman
from .errors import FormatError, InsufficientTemplates, PenmanSyntaxError

__all__ = [
    "NE_TYPES",
    "load_ne_types",
    "abstract_template",
    "BankParams",
    "Template",
    "TemplateBank",
    "build_bank",
    "save_bank",
    "load_bank",
    "dumps_bank",
    "loads_bank",
]

UNDERSPECIFIED = frozenset({"amr-unknown", "amr-choice", "amr-empty", "thing", "something", "anything"})

# Leaf concepts that are function words or fixed values, not nouns.
CLOSED_CLASS = frozenset(
    """
    i you he she it we they me him her us them this that these those
    one everyone someone anyone everything nothing everybody somebody
    all some any each every both much many few more most less least
    very too so also only even just still again now then here there
    - + imperative expressive interrogative
    """.split()
)

_SENSE_RE = re.compile(r"-\d+\Z")
_NUMBER_RE = re.compile(r"-?\d+(\.\d+)?\Z")


def load_ne_types(path: "str | Path | None" = None) -> frozenset:
    """Named-entity types, one per line; ``#`` starts a comment line."""
    if path is None:
        text = resources.files("swan").joinpath("data/ne_types.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#"))


NE_TYPES = load_ne_types()


def _is_noun(concept: str) -> bool:
    return not (
        concept in CLOSED_CLASS
        or concept in ("NE", "N", "X")
        or _SENSE_RE.search(concept)
        or _NUMBER_RE.match(concept)
    )


def abstract_template(g: AmrGraph, ne_types: frozenset | None = None) -> AmrGraph:
    """Replace lexical content with placeholders, keeping the graph's shape.

    * A node of a named-entity type that carries ``:name`` or ``:wiki``
      becomes ``NE``; its name and wiki attachments are dropped.
    * ``amr-unknown`` and other underspecified concepts become ``X``.
    * A leaf whose concept has no sense suffix and is not a function word
      becomes ``N``.

    Variable names are kept. The operation is idempotent.
    """
    ne_types = NE_TYPES if ne_types is None else ne_types
    named = {s for s, r, _ in g.edges if r in (":name", ":wiki")}
    ne_vars = {v for v in named if g.nodes[v] in ne_types}
    edges = [e for e in g.edges if not (e.source in ne_vars and e.role in (":name", ":wiki"))]

    # drop what only the removed name/wiki edges reached
    adjacency: dict[str, list[str]] = {}
    for s, _, t in edges:
        if not isinstance(t, Constant):
            adjacency.setdefault(s, []).append(t)
    keep = {g.root}
    stack = [g.root]
    while stack:
        for nxt in adjacency.get(stack.pop(), ()):
            if nxt not in keep:
                keep.add(nxt)
                stack.append(nxt)
    edges = [e for e in edges if e.source in keep]

    has_out = {e.source for e in edges}
    nodes = {}
    for v, concept in g.nodes.items():
        if v not in keep:
            continue
        if v in ne_vars:
            concept = "NE"
        elif concept in UNDERSPECIFIED:
            concept = "X"
        elif v not in has_out and _is_noun(concept):
            concept = "N"
        nodes[v] = concept
    return AmrGraph(g.root, nodes, tuple(edges))


@dataclass(frozen=True)
class BankParams:
    min_freq: int = 3
    max_freq: int = 20
    min_nodes: int = 3
    bank_size: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.min_freq <= self.max_freq:
            raise ValueError("need 1 <= min_freq <= max_freq")
        if self.min_nodes < 1:
            raise ValueError("min_nodes must be >= 1")
        if self.bank_size < 1:
            raise ValueError("bank_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


class Template(NamedTuple):
    id: int
    graph: AmrGraph
    frequency: int


@dataclass(frozen=True)
class TemplateBank:
    """Ordered templates with dense ids from 0, plus the build provenance."""

    templates: tuple
    created_from: str
    params: BankParams

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(Template(*t) for t in self.templates))
        for k, t in enumerate(self.templates):
            if t.id != k:
                raise ValueError(f"template ids must be dense from 0; got {t.id} at position {k}")
            problem = _filter_problem(t, self.params)
            if problem:
                raise ValueError(f"template {t.id}: {problem}")

    def __len__(self):
        return len(self.templates)

    def __getitem__(self, template_id: int) -> Template:
        return self.templates[template_id]


def _filter_problem(t: Template, p: BankParams) -> str | None:
    if not p.min_freq <= t.frequency <= p.max_freq:
        return f"frequency {t.frequency} outside [{p.min_freq}, {p.max_freq}]"
    if concept_node_count(t.graph) < p.min_nodes:
        return f"fewer than {p.min_nodes} concept nodes"
    return None


def build_bank(corpus: Iterable[AmrGraph], params: BankParams = BankParams(),
               ne_types: frozenset | None = None) -> TemplateBank:
    """Abstract every corpus graph, count the templates, filter and sample.

    Templates are counted by canonical form. Keys whose count lies in
    ``[min_freq, max_freq]`` and whose graph has at least ``min_nodes``
    concepts survive; ``bank_size`` of them are drawn uniformly without
    replacement with ``params.seed``. Banks built with the same seed but
    different sizes are nested.

    Raises:
        InsufficientTemplates: fewer survivors than ``bank_size``.
    """
    digest = hashlib.sha256()
    counts: Counter = Counter()
    order: list[str] = []
    n_graphs = 0
    for g in corpus:
        n_graphs += 1
        digest.update(serialize_penman(g).encode("utf-8") + b"\n")
        key = canonicalize(abstract_template(g, ne_types))
        if key not in counts:
            order.append(key)
        counts[key] += 1
    if n_graphs == 0:
        raise ValueError("corpus is empty")

    survivors = []
    for key in order:
        if params.min_freq <= counts[key] <= params.max_freq:
            graph = parse_penman(key)
            if concept_node_count(graph) >= params.min_nodes:
                survivors.append((graph, counts[key]))
    if len(survivors) < params.bank_size:
        raise InsufficientTemplates(len(survivors), params.bank_size)

    perm = list(range(len(survivors)))
    random.Random(params.seed).shuffle(perm)
    chosen = sorted(perm[: params.bank_size])
    templates = tuple(Template(i, *survivors[j]) for i, j in enumerate(chosen))
    return TemplateBank(templates, digest.hexdigest(), params)


_HEADER_RE = re.compile(
    r"SWANBANK v1 seed=(\d+) min_freq=(\d+) max_freq=(\d+) min_nodes=(\d+) size=(\d+) digest=([0-9a-f]*)\Z"
)


def _header(b: TemplateBank) -> str:
    p = b.params
    return (
        f"SWANBANK v1 seed={p.seed} min_freq={p.min_freq} max_freq={p.max_freq} "
        f"min_nodes={p.min_nodes} size={p.bank_size} digest={b.created_from}"
    )


def dumps_bank(b: TemplateBank) -> str:
    lines = [_header(b)]
    lines += [f"{t.id}\t{t.frequency}\t{serialize_penman(t.graph)}" for t in b.templates]
    return "\n".join(lines) + "\n"


def save_bank(b: TemplateBank, path: "str | Path", insecure: bool = False) -> None:
    """Write the bank file. It is the watermark key, so it is created 0600
    unless ``insecure`` is set."""
    mode = 0o644 if insecure else 0o600
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, mode)
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_bank(b))
    os.chmod(path, mode)


def loads_bank(text: str) -> TemplateBank:
    if not text.endswith("\n"):
        raise FormatError(text.count("\n") + 1, "file is truncated (no final newline)")
    lines = text[:-1].split("\n")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(1, "bad or missing SWANBANK v1 header")
    seed, min_freq, max_freq, min_nodes, size = (int(x) for x in m.groups()[:5])
    try:
        params = BankParams(min_freq, max_freq, min_nodes, size, seed)
    except ValueError as exc:
        raise FormatError(1, str(exc)) from None
    templates = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(lineno, "expected <id>\\t<frequency>\\t<penman>")
        try:
            tid, freq = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(lineno, "id and frequency must be integers") from None
        if tid != len(templates):
            raise FormatError(lineno, f"expected id {len(templates)}, found {tid}")
        try:
            graph = parse_penman(parts[2])
        except PenmanSyntaxError as exc:
            raise FormatError(lineno, f"bad template: {exc}") from None
        t = Template(tid, graph, freq)
        problem = _filter_problem(t, params)
        if problem:
            raise FormatError(lineno, problem)
        templates.append(t)
    if len(templates) != size:
        raise FormatError(len(lines) + 1, f"expected {size} templates, found {len(templates)}")
    return TemplateBank(tuple(templates), m.group(6), params)


def load_bank(path: "str | Path") -> TemplateBank:
    """Read a bank file, re-checking every template against the filters.

    Raises:
        FormatError: malformed, truncated or filter-violating content.
        OSError: the file cannot be read.
    """
    return loads_bank(Path(path).read_text(encoding="utf-8"))
