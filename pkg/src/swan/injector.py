"""Watermark injection by template-guided rejection sampling.

For each new sentence a template is drawn from the bank and the LLM is asked
to realise it in context. A candidate is accepted once its parsed AMR scores
at least ``theta_accept`` against the template. After ``max_attempts``
failures a different template is drawn, up to ``max_templates`` per
sentence; if every trial fails the last generated text is kept.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .amr import AmrGraph, parse_penman, serialize_penman
from .bank import TemplateBank
from .clients import AmrParser, LlmClient, LlmRequest
from .errors import EmptyBank, Unparseable
from .matcher import MatchConfig, s2match

__all__ = [
    "GENERATION_PROMPT",
    "InjectionConfig",
    "Trial",
    "AcceptedSentence",
    "InjectionSession",
    "load_exemplars",
    "render_generation_prompt",
    "sanitize_candidate",
    "inject",
]

GENERATION_PROMPT = """\
AMR (Abstract Meaning Representation) is a graph-based representation of a sentence's meaning. \
Each node is a concept and edges represent semantic roles or relationships. \
Below are some examples of template AMRs and corresponding sentences:
{example_text}

In the provided AMR, there are placeholders:
- "NE" for named entities (e.g., "Alice", "France", "Google").
- "N" for generic nouns (e.g., "a device", "an object").
- "X" for unspecified concepts (e.g., "something", "an idea").

Instructions:
- Do not write "NE", "N", or "X" literally. Instead, replace them with appropriate English words \
to form a natural, meaningful sentence.
- Ensure the generated sentence aligns with both the AMR structure and the given context.
- Do not produce multiple sentences or lists.
- Produce exactly one coherent sentence.

AMR:
{chosen_template}
Context: {context}
Please output only that one sentence."""


@dataclass(frozen=True)
class InjectionConfig:
    """Rejection-sampling budget and generation settings.

    The per-sentence trial cap is ``max_templates * max_attempts``.
    ``fallback_best`` keeps the best-scoring candidate instead of the last one
    when the budget runs out.
    """

    n_sentences: int = 5
    max_templates: int = 10
    max_attempts: int = 5
    theta_accept: float = 0.7
    rng_seed: int = 0
    fallback_best: bool = False
    temperature: float = 0.6
    top_p: float = 0.9
    max_tokens: int = 256

    def __post_init__(self):
        if self.n_sentences < 1:
            raise ValueError("n_sentences must be >= 1")
        if self.max_templates < 1 or self.max_attempts < 1:
            raise ValueError("max_templates and max_attempts must be >= 1")
        if not 0 < self.theta_accept <= 1:
            raise ValueError("theta_accept must be in (0, 1]")

    @property
    def trial_cap(self) -> int:
        return self.max_templates * self.max_attempts


@dataclass
class Trial:
    sentence_index: int
    template_id: int
    attempt: int
    score: float
    accepted: bool
    text: str


@dataclass
class AcceptedSentence:
    sentence: str
    template_id: int
    trials_used: int
    score: float
    fallback: bool


@dataclass
class InjectionSession:
    """Running state of one generated paragraph."""

    s0: str
    context: str
    accepted: list = field(default_factory=list)
    trial_log: list = field(default_factory=list)

    @property
    def sentences(self) -> list[str]:
        return [a.sentence for a in self.accepted]

    @property
    def mean_trials(self) -> float:
        return sum(a.trials_used for a in self.accepted) / len(self.accepted)

    def to_dict(self) -> dict:
        return {
            "s0": self.s0,
            "context": self.context,
            "accepted": [asdict(a) for a in self.accepted],
            "trial_log": [asdict(t) for t in self.trial_log],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "InjectionSession":
        return cls(
            d["s0"],
            d["context"],
            [AcceptedSentence(**a) for a in d["accepted"]],
            [Trial(**t) for t in d["trial_log"]],
        )


def load_exemplars(path: "str | Path | None" = None) -> list[tuple[AmrGraph, str]]:
    if path is None:
        text = resources.files("swan").joinpath("data/exemplars.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out = []
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            penman, sentence = line.split("\t")
            out.append((parse_penman(penman), sentence))
    return out


def render_generation_prompt(template: AmrGraph, context: str,
                             examples: Sequence[tuple[AmrGraph, str]] = ()) -> str:
    example_text = "\n".join(
        f"AMR:\n{serialize_penman(g, indent=4)}\nSentence: {s}\n" for g, s in examples
    )
    return GENERATION_PROMPT.format(
        example_text=example_text,
        chosen_template=serialize_penman(template, indent=4),
        context=context,
    )


_THINK_RE = re.compile(r"<think>.*?</think>", re.DOTALL | re.IGNORECASE)


def sanitize_candidate(text: str) -> str:
    """Strip reasoning markup and keep the final non-empty line."""
    text = _THINK_RE.sub("", text)
    if "</think>" in text:
        text = text.rsplit("</think>", 1)[1]
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    return lines[-1] if lines else ""


def _score(text: str, template: AmrGraph, parser: AmrParser, match_cfg: MatchConfig) -> float:
    if not text:
        return 0.0
    try:
        parsed = parser.parse_sentence(text)
    except Unparseable:
        return 0.0
    return s2match(parsed.graph, template, match_cfg).f1


def inject(s0: str, bank: TemplateBank, cfg: InjectionConfig, llm: LlmClient, parser: AmrParser,
           match_cfg: MatchConfig | None = None,
           examples: Sequence[tuple[AmrGraph, str]] | None = None) -> InjectionSession:
    """Generate ``cfg.n_sentences`` watermarked sentences continuing ``s0``.

    Templates are drawn uniformly with a seeded RNG; within one sentence a
    template is not drawn twice unless the bank has fewer than
    ``max_templates`` entries. Unparseable candidates count as failed
    attempts with score 0. Client transport errors propagate.
    """
    if len(bank.templates) == 0:
        raise EmptyBank("template bank is empty")
    match_cfg = match_cfg or MatchConfig()
    examples = load_exemplars() if examples is None else examples
    rng = random.Random(cfg.rng_seed)
    ids = [t.id for t in bank.templates]
    session = InjectionSession(s0=s0, context=s0)

    for index in range(cfg.n_sentences):
        used: set[int] = set()
        trials = 0
        chosen: AcceptedSentence | None = None
        last = best = None
        for _ in range(cfg.max_templates):
            pool = [t for t in ids if t not in used] or ids
            tid = rng.choice(pool)
            used.add(tid)
            template = bank[tid].graph
            prompt = render_generation_prompt(template, session.context, examples)
            request = LlmRequest(prompt, cfg.temperature, cfg.top_p, cfg.max_tokens)
            for attempt in range(1, cfg.max_attempts + 1):
                trials += 1
                text = sanitize_candidate(llm.generate(request))
                score = _score(text, template, parser, match_cfg)
                ok = score >= cfg.theta_accept
                session.trial_log.append(Trial(index, tid, attempt, score, ok, text))
                last = (text, tid, score)
                if best is None or score > best[2]:
                    best = last
                if ok:
                    chosen = AcceptedSentence(text, tid, trials, score, fallback=False)
                    break
            if chosen:
                break
        if chosen is None:
            text, tid, score = best if cfg.fallback_best else last
            chosen = AcceptedSentence(text, tid, trials, score, fallback=True)
        session.accepted.append(chosen)
        session.context = f"{session.context} {chosen.sentence}"
    return session
