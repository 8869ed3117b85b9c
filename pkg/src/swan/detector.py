"""Paragraph-level watermark detection.

Each sentence is parsed, optionally abstracted to template form, and scored
against every bank template. Sentences whose best score reaches
``theta_detect`` are green; the green count ``k`` out of ``n`` sentences goes
through a one-proportion z-test against the null hit rate ``lam``.
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

from .bank import TemplateBank, abstract_template
from .clients import AmrParser
from .errors import DomainError, EmptyBank, EmptyParagraph, Unparseable
from .matcher import MatchConfig, best_bank_score

__all__ = [
    "ABBREVIATIONS",
    "segment_sentences",
    "z_score",
    "DetectConfig",
    "SentenceScore",
    "DetectionReport",
    "score_document",
    "detect",
    "estimate_lambda",
]

WATERMARKED = "watermarked"
NOT_WATERMARKED = "not_watermarked"

ABBREVIATIONS = frozenset(
    """
    mr mrs ms dr prof sr jr st mt vs etc e.g i.e inc ltd co corp gen gov sen rep
    jan feb mar apr jun jul aug sep sept oct nov dec no fig approx dept est u.s u.k
    """.split()
)

_BOUNDARY_RE = re.compile(r"[.?!][\"')\]]*\s+(?=[\"'(\[]?[A-Z])")


def segment_sentences(text: str, abbreviations: frozenset = ABBREVIATIONS) -> list[str]:
    """Split at ``.``, ``?`` or ``!`` followed by whitespace and a capital.

    A period after a known abbreviation or a single-letter initial does not
    end a sentence.
    """
    sentences = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        if text[m.start()] == ".":
            words = text[start:m.start()].split()
            word = words[-1] if words else ""
            bare = word.lstrip("\"'([").lower()
            if bare in abbreviations or re.fullmatch(r"[A-Z]", word) or re.fullmatch(r"(?:[A-Za-z]\.)+[A-Za-z]", word):
                continue
        piece = text[start:m.end()].strip()
        if piece:
            sentences.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def z_score(k: int, n: int, lam: float) -> float:
    """One-proportion z statistic ``(k - lam*n) / sqrt(n*lam*(1-lam))``.

    ``lam*n`` is formed from the decimal literal of ``lam`` so that e.g.
    ``k=3, n=30, lam=0.1`` gives exactly 0.
    """
    if isinstance(k, bool) or isinstance(n, bool) or int(k) != k or int(n) != n:
        raise DomainError("k and n must be integers")
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 <= k <= n:
        raise DomainError("need 0 <= k <= n")
    if not 0 < lam < 1:
        raise DomainError("lam must lie strictly between 0 and 1")
    expected = float(Decimal(repr(float(lam))) * int(n))
    return (k - expected) / math.sqrt(n * lam * (1 - lam))


@dataclass(frozen=True)
class DetectConfig:
    theta_detect: float = 0.7
    lam: float = 0.05
    z_threshold: float = 1.645
    abstract_before_match: bool = True
    ne_types: frozenset | None = None

    def __post_init__(self):
        if not 0 < self.theta_detect <= 1:
            raise ValueError("theta_detect must be in (0, 1]")
        if not 0 < self.lam < 1:
            raise ValueError("lam must be in (0, 1)")


@dataclass(frozen=True)
class SentenceScore:
    sentence: str
    best_score: float
    best_template_id: int | None
    flagged: bool


@dataclass(frozen=True)
class DetectionReport:
    per_sentence: tuple
    k: int
    n: int
    green_frac: float
    z: float
    decision: str
    lam: float
    z_threshold: float

    @property
    def watermarked(self) -> bool:
        return self.decision == WATERMARKED

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_sentence"] = [asdict(s) for s in self.per_sentence]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def _score_sentence(sentence: str, bank: TemplateBank, cfg: DetectConfig, parser: AmrParser,
                    match_cfg: MatchConfig | None) -> SentenceScore:
    try:
        parsed = parser.parse_sentence(sentence)
    except Unparseable:
        return SentenceScore(sentence, 0.0, None, False)
    graph = abstract_template(parsed.graph, cfg.ne_types) if cfg.abstract_before_match else parsed.graph
    score, tid = best_bank_score(graph, bank, match_cfg)
    return SentenceScore(sentence, score, tid, score >= cfg.theta_detect)


def score_document(sentences: Sequence[str], bank: TemplateBank, cfg: DetectConfig, parser: AmrParser,
                   match_cfg: MatchConfig | None = None, workers: int = 4) -> DetectionReport:
    """Detection over already-segmented sentences.

    Unparseable sentences score 0 and still count toward ``n``. Results keep
    sentence order whatever the completion order of parallel work.
    """
    sentences = [s for s in sentences if s.strip()]
    if not sentences:
        raise EmptyParagraph("no sentences to score")
    if len(bank.templates) == 0:
        raise EmptyBank("template bank is empty")
    if workers > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda s: _score_sentence(s, bank, cfg, parser, match_cfg), sentences))
    else:
        scores = [_score_sentence(s, bank, cfg, parser, match_cfg) for s in sentences]
    k = sum(s.flagged for s in scores)
    n = len(scores)
    z = z_score(k, n, cfg.lam)
    decision = WATERMARKED if z >= cfg.z_threshold else NOT_WATERMARKED
    return DetectionReport(tuple(scores), k, n, k / n, z, decision, cfg.lam, cfg.z_threshold)


def detect(paragraph: str, bank: TemplateBank, cfg: DetectConfig, parser: AmrParser,
           match_cfg: MatchConfig | None = None, pre_segmented: bool = False,
           workers: int = 4) -> DetectionReport:
    """Segment ``paragraph`` (or split it on newlines when ``pre_segmented``) and score it."""
    if pre_segmented:
        sentences = [ln.strip() for ln in paragraph.splitlines() if ln.strip()]
    else:
        sentences = segment_sentences(paragraph)
    if not sentences:
        raise EmptyParagraph("paragraph contains no sentences")
    return score_document(sentences, bank, cfg, parser, match_cfg, workers)


def estimate_lambda(sentences: Iterable[str], bank: TemplateBank, cfg: DetectConfig, parser: AmrParser,
                    match_cfg: MatchConfig | None = None) -> tuple[float, int, int]:
    """Empirical flag rate of non-watermarked sentences against ``bank``.

    Returns ``(rate, flagged, total)``. A rate of exactly 0 or 1 cannot be used
    as ``lam`` directly; callers decide how to regularise it.
    """
    scores = [_score_sentence(s, bank, cfg, parser, match_cfg) for s in sentences if s.strip()]
    if not scores:
        raise EmptyParagraph("no sentences to score")
    flagged = sum(s.flagged for s in scores)
    return flagged / len(scores), flagged, len(scores)
