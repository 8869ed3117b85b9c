"""Evaluation at desk scale: ROC metrics, paraphrase attacks, sampling cost,
bank-size sweeps and LLM-judged text quality."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .amr import AmrGraph
from .bank import BankParams, build_bank
from .clients import AmrParser, LlmClient, LlmRequest, Paraphraser
from .detector import DetectConfig, DetectionReport, score_document, z_score
from .errors import EmptyInput, JudgeFormatError
from .injector import InjectionSession
from .matcher import MatchConfig

__all__ = [
    "FPR_TARGETS",
    "RocResult",
    "roc",
    "tpr_at_fpr",
    "binomial_auc",
    "simulate_detection",
    "attack_reports",
    "run_attack",
    "TrialStats",
    "trial_histogram",
    "QualityScore",
    "JUDGE_PROMPT",
    "render_judge_prompt",
    "parse_quality",
    "judge_quality",
    "bank_size_sweep",
]

FPR_TARGETS = (0.01, 0.05)


@dataclass(frozen=True)
class RocResult:
    auc: float
    tpr_at: dict
    scores_pos: tuple
    scores_neg: tuple

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "tpr_at": {str(k): v for k, v in self.tpr_at.items()},
            "scores_pos": list(self.scores_pos),
            "scores_neg": list(self.scores_neg),
        }


def tpr_at_fpr(pos: Sequence[float], neg: Sequence[float], fpr: float) -> float:
    """Largest TPR over thresholds whose empirical FPR stays within ``fpr``.

    A paragraph is called positive when its score is strictly above the
    threshold, so negatives tied with the threshold are never false positives.
    """
    pos = np.asarray(pos, dtype=float)
    neg = np.sort(np.asarray(neg, dtype=float))[::-1]
    allowed = int(math.floor(fpr * len(neg) + 1e-9))
    threshold = neg[allowed] if allowed < len(neg) else -np.inf
    return float(np.mean(pos > threshold))


def roc(pos: Sequence[float], neg: Sequence[float], fprs: Iterable[float] = FPR_TARGETS) -> RocResult:
    """AUC as the Mann-Whitney statistic (ties count one half) plus TPR@FPR.

    Raises:
        EmptyInput: either score list is empty.
    """
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise EmptyInput("roc needs at least one positive and one negative score")
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2
    auc = float(u / (pos.size * neg.size))
    return RocResult(
        auc=auc,
        tpr_at={f: tpr_at_fpr(pos, neg, f) for f in fprs},
        scores_pos=tuple(float(x) for x in pos),
        scores_neg=tuple(float(x) for x in neg),
    )


def binomial_auc(n: int, p_pos: float, p_neg: float) -> float:
    """Closed-form AUC between green counts ``Binomial(n, p_pos)`` and
    ``Binomial(n, p_neg)``: P(K+ > K-) + P(K+ = K-)/2."""
    k = np.arange(n + 1)
    fp = stats.binom.pmf(k, n, p_pos)
    fn = stats.binom.pmf(k, n, p_neg)
    joint = np.outer(fp, fn)
    return float(np.tril(joint, -1).sum() + 0.5 * np.trace(joint))


def simulate_detection(n_paragraphs: int, sentences_per_paragraph: int, p_hit_pos: float, p_hit_neg: float,
                       lam: float, seed: int) -> RocResult:
    """Draw Bernoulli sentence flags for ``n_paragraphs`` positive and as many
    negative paragraphs, z-score each paragraph and compute the ROC."""
    for p in (p_hit_pos, p_hit_neg):
        if not 0 <= p <= 1:
            raise ValueError("hit probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = sentences_per_paragraph
    table = np.array([z_score(k, n, lam) for k in range(n + 1)])
    k_pos = rng.binomial(n, p_hit_pos, size=n_paragraphs)
    k_neg = rng.binomial(n, p_hit_neg, size=n_paragraphs)
    return roc(table[k_pos], table[k_neg])


def attack_reports(sessions: Sequence[InjectionSession], attacker: Paraphraser, bank, parser: AmrParser,
                   negatives: Sequence[Sequence[str]], cfg: DetectConfig, match_cfg: MatchConfig | None = None
                   ) -> tuple[list[DetectionReport], list[DetectionReport], list[DetectionReport]]:
    """Detection reports for clean positives, attacked positives and negatives.

    Each watermarked sentence is paraphrased given ``s0`` and the original
    sentences before it.
    """
    if not sessions:
        raise EmptyInput("no watermarked sessions")
    if not negatives:
        raise EmptyInput("no negative paragraphs")
    clean, attacked = [], []
    for session in sessions:
        sentences = session.sentences
        rewritten = [
            attacker.paraphrase(s, [session.s0, *sentences[:i]]) for i, s in enumerate(sentences)
        ]
        clean.append(score_document(sentences, bank, cfg, parser, match_cfg))
        attacked.append(score_document(rewritten, bank, cfg, parser, match_cfg))
    neg = [score_document(list(p), bank, cfg, parser, match_cfg) for p in negatives]
    return clean, attacked, neg


def run_attack(sessions: Sequence[InjectionSession], attacker: Paraphraser, bank, parser: AmrParser,
               negatives: Sequence[Sequence[str]], cfg: DetectConfig,
               match_cfg: MatchConfig | None = None) -> tuple[RocResult, RocResult]:
    """ROC of clean and of paraphrased watermarked paragraphs against the negatives."""
    clean, attacked, neg = attack_reports(sessions, attacker, bank, parser, negatives, cfg, match_cfg)
    zneg = [r.z for r in neg]
    return roc([r.z for r in clean], zneg), roc([r.z for r in attacked], zneg)


@dataclass(frozen=True)
class TrialStats:
    buckets: dict
    mean: float
    n_sentences: int
    trials: tuple = field(repr=False, default=())

    def fraction_within(self, limit: int) -> float:
        return sum(t <= limit for t in self.trials) / len(self.trials)


def trial_histogram(sessions: Sequence[InjectionSession]) -> TrialStats:
    """Counts of trials-per-sentence in buckets 1-5, 6-10, ...; empty buckets omitted."""
    trials = [a.trials_used for s in sessions for a in s.accepted]
    if not trials:
        raise EmptyInput("no sentences in sessions")
    counts: dict[int, int] = {}
    for t in trials:
        lo = 5 * ((t - 1) // 5) + 1
        counts[lo] = counts.get(lo, 0) + 1
    buckets = {f"{lo}-{lo + 4}": counts[lo] for lo in sorted(counts)}
    return TrialStats(buckets, sum(trials) / len(trials), len(trials), tuple(trials))


@dataclass(frozen=True)
class QualityScore:
    coherence: float
    fluency: float
    diversity: float


JUDGE_PROMPT = """\
You are an expert writing quality evaluator.

You will assess a GENERATED PARAGRAPH using the following criteria. For each, assign a score from 1 to 5 \
(decimals allowed), using the descriptions below.

1. **Coherence**: Measures how logically and clearly the ideas are organized and connected.
   - 1: Incoherent; sentences are unrelated or confusing.
   - 2: Poor transitions or unclear relationships between ideas.
   - 3: Basic logical flow, but some awkward connections.
   - 4: Mostly logical and clear, with minor lapses.
   - 5: Highly logical and seamless flow of ideas.

2. **Fluency**: Assesses the grammatical correctness and naturalness of the language.
   - 1: Grammatically broken or unreadable.
   - 2: Understandable but awkward or error-prone.
   - 3: Generally readable, some minor grammatical errors or odd phrasing.
   - 4: Well-written with only occasional issues.
   - 5: Grammatically correct and naturally flowing throughout.

3. **Diversity**: Use of varied vocabulary and sentence structure, avoiding repetition.
   - 1: Extremely repetitive or formulaic.
   - 2: Some repetition with occasional variation.
   - 3: Moderate variety; not monotonous.
   - 4: Good diversity in language and structure.
   - 5: Highly expressive and varied without redundancy.

**Scoring Instructions**:
- Return a score for each of the three dimensions above.
- You may use decimal values (e.g., 2.5, 4.7).

**Output Format**:
Respond with a **valid JSON object only** in this exact format:

{
  "coherence_score":  float,
  "fluency_score":    float,
  "diversity_score":  float
}"""

_QUALITY_KEYS = ("coherence_score", "fluency_score", "diversity_score")


def render_judge_prompt(paragraph: str) -> str:
    return f"{JUDGE_PROMPT}\n\nGENERATED PARAGRAPH:\n{paragraph}"


def parse_quality(reply: str) -> QualityScore:
    """Strict parse of the judge's JSON object; values are clamped to [0, 5]."""
    try:
        obj = json.loads(reply.strip())
    except json.JSONDecodeError as exc:
        raise JudgeFormatError(f"judge reply is not JSON: {exc}") from None
    if not isinstance(obj, dict) or set(obj) != set(_QUALITY_KEYS):
        raise JudgeFormatError(f"judge reply must have exactly the keys {_QUALITY_KEYS}")
    values = []
    for key in _QUALITY_KEYS:
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v):
            raise JudgeFormatError(f"{key} is not a number")
        values.append(min(5.0, max(0.0, float(v))))
    return QualityScore(*values)


def judge_quality(paragraph: str, judge: LlmClient, temperature: float = 0.0) -> QualityScore:
    """Score a paragraph with an LLM judge, re-asking once on a malformed reply."""
    if not paragraph.strip():
        raise ValueError("paragraph must be non-empty")
    req = LlmRequest(render_judge_prompt(paragraph), temperature=temperature, top_p=1.0)
    try:
        return parse_quality(judge.generate(req))
    except JudgeFormatError:
        return parse_quality(judge.generate(req))


def bank_size_sweep(corpus: Iterable[AmrGraph], sizes: Sequence[int], params: BankParams,
                    positives: Sequence[Sequence[str]], negatives: Sequence[Sequence[str]], parser: AmrParser,
                    cfg: DetectConfig, match_cfg: MatchConfig | None = None) -> dict[int, RocResult]:
    """Rebuild the bank at each size (same seed) and score fixed paragraph sets."""
    if not sizes:
        raise EmptyInput("no bank sizes")
    corpus = list(corpus)
    out = {}
    for size in sizes:
        bank = build_bank(corpus, dataclasses.replace(params, bank_size=size))
        zpos = [score_document(list(p), bank, cfg, parser, match_cfg).z for p in positives]
        zneg = [score_document(list(p), bank, cfg, parser, match_cfg).z for p in negatives]
        out[size] = roc(zpos, zneg)
    return out
