import itertools
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swan.amr import parse_penman
from swan.bank import BankParams, build_bank
from swan.clients import CallbackLlm, IdentityParaphraser, StubParser, TableParaphraser, TemplateEchoLlm, embed_amr
from swan.detector import DetectConfig
from swan.errors import EmptyInput, JudgeFormatError
from swan.evalkit import (
    JUDGE_PROMPT,
    attack_reports,
    bank_size_sweep,
    binomial_auc,
    judge_quality,
    parse_quality,
    roc,
    run_attack,
    simulate_detection,
    tpr_at_fpr,
    trial_histogram,
)
from swan.injector import AcceptedSentence, InjectionConfig, InjectionSession, inject

from _graphs import renamed
from _stubs import distinct_corpus, verb_bank, verb_corpus


def brute_auc(pos, neg) -> float:
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_roc_examples():
    assert roc([2, 3], [0, 1]).auc == 1.0
    assert roc([1, 2, 3], [1, 2, 3]).auc == 0.5
    assert roc([1, 2, 3], [2]).auc == 0.5
    assert roc([0], [1]).auc == 0.0
    with pytest.raises(EmptyInput):
        roc([], [1])
    with pytest.raises(EmptyInput):
        roc([1], [])


def test_tpr_threshold_rule():
    neg = list(range(100))
    pos = [98.5, 99.5, 50, 200]
    # 1% of 100 negatives may exceed the threshold: threshold is 98
    assert tpr_at_fpr(pos, neg, 0.01) == 0.75
    # 5%: threshold is 94
    assert tpr_at_fpr(pos, neg, 0.05) == 0.75
    # fewer than 1/f negatives: no false positive allowed, strict threshold at the max negative
    assert tpr_at_fpr([5, 6], [1, 5], 0.01) == 0.5
    # tied negatives never count as false positives
    assert tpr_at_fpr([1.0], [1.0] * 10, 0.01) == 0.0


@settings(max_examples=200)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30), st.lists(st.integers(-5, 5), min_size=1, max_size=30),
       st.sampled_from([0.01, 0.05, 0.1, 0.3]))
def test_tpr_fpr_constraint(pos, neg, f):
    tpr = tpr_at_fpr(pos, neg, f)
    # some threshold achieves this tpr with empirical fpr <= f
    thresholds = sorted(set(neg) | {min(neg + pos) - 1})
    feasible = [t for t in thresholds if np.mean(np.asarray(neg) > t) <= f + 1e-12]
    assert tpr == max(np.mean(np.asarray(pos) > t) for t in feasible)


@settings(max_examples=200)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=25),
       st.lists(st.integers(-1000, 1000), min_size=1, max_size=25))
def test_auc_matches_pair_enumeration_and_monotone_transform(pos, neg):
    pos = [x / 100 for x in pos]
    neg = [x / 100 for x in neg]
    r = roc(pos, neg)
    assert r.auc == pytest.approx(brute_auc(pos, neg), abs=1e-12)
    t = roc([2 * x + 7 for x in pos], [2 * x + 7 for x in neg])
    assert t.auc == pytest.approx(r.auc, abs=1e-12)
    assert all(0 <= v <= 1 for v in r.tpr_at.values())


def test_binomial_auc_closed_form():
    assert binomial_auc(5, 0.9, 0.05) == pytest.approx(0.99979, abs=1e-5)
    assert binomial_auc(5, 0.3, 0.3) == pytest.approx(0.5)
    assert binomial_auc(3, 1.0, 0.0) == 1.0


def test_simulation_examples():
    assert simulate_detection(200, 5, 1.0, 0.0, 0.05, 0).auc == 1.0
    assert simulate_detection(1000, 5, 0.4, 0.4, 0.05, 1).auc == pytest.approx(0.5, abs=0.05)
    a = simulate_detection(250, 5, 0.9, 0.05, 0.05, 3)
    assert a == simulate_detection(250, 5, 0.9, 0.05, 0.05, 3)
    with pytest.raises(ValueError):
        simulate_detection(10, 5, 1.2, 0.0, 0.05, 0)


def test_simulation_converges_to_closed_form():
    exact = binomial_auc(5, 0.6, 0.2)
    for seed in range(10):
        assert simulate_detection(10_000, 5, 0.6, 0.2, 0.05, seed).auc == pytest.approx(exact, abs=0.01)


def session_with(trials):
    return InjectionSession("s0", "s0", [AcceptedSentence(f"S{i}.", 0, t, 1.0, t == 50) for i, t in enumerate(trials)])


def test_trial_histogram():
    stats = trial_histogram([session_with([1] * 5)])
    assert stats.buckets == {"1-5": 5} and stats.mean == 1.0
    stats = trial_histogram([session_with([1] * 10), session_with([50] * 10)])
    assert stats.mean == 25.5
    assert stats.buckets == {"1-5": 10, "46-50": 10}
    assert stats.fraction_within(10) == 0.5
    stats = trial_histogram([session_with([5, 6, 10, 11])])
    assert stats.buckets == {"1-5": 1, "6-10": 2, "11-15": 1}
    with pytest.raises(EmptyInput):
        trial_histogram([])


def test_quality_parsing():
    q = parse_quality('{"coherence_score":4.0,"fluency_score":4.0,"diversity_score":3.0}')
    assert (q.coherence, q.fluency, q.diversity) == (4, 4, 3)
    q = parse_quality('{"coherence_score": 7, "fluency_score": -1, "diversity_score": 2.5}')
    assert (q.coherence, q.fluency, q.diversity) == (5, 0, 2.5)
    for bad in ["not json", "[]", '{"coherence_score": 1, "fluency_score": 2}',
                '{"coherence_score": 1, "fluency_score": 2, "diversity_score": "3"}',
                '{"coherence_score": 1, "fluency_score": 2, "diversity_score": 3, "extra": 1}']:
        with pytest.raises(JudgeFormatError):
            parse_quality(bad)


def test_judge_quality_reasks_once():
    replies = iter(["oops", '{"coherence_score":3.5,"fluency_score":4,"diversity_score":3}'])
    judge = CallbackLlm(lambda p: next(replies))
    q = judge_quality("A paragraph.", judge)
    assert q.coherence == 3.5 and len(judge.prompts) == 2
    assert judge.prompts[0].startswith("You are an expert writing quality evaluator.")
    assert JUDGE_PROMPT in judge.prompts[0] and judge.prompts[0].endswith("A paragraph.")
    with pytest.raises(JudgeFormatError):
        judge_quality("A paragraph.", CallbackLlm(lambda p: "still not json"))
    with pytest.raises(ValueError):
        judge_quality("  ", judge)


def test_judge_prompt_schema_is_valid_json_shape():
    block = JUDGE_PROMPT[JUDGE_PROMPT.rindex("{"):]
    keys = [line.split(":")[0].strip().strip('"') for line in block.splitlines()[1:-1]]
    assert keys == ["coherence_score", "fluency_score", "diversity_score"]


def watermarked_sessions(bank, count=6):
    return [inject(f"Opening line {i}.", bank, InjectionConfig(n_sentences=4, rng_seed=i), TemplateEchoLlm(f"W{i}"),
                   StubParser()) for i in range(count)]


def negatives(count=6):
    return [[f"Human sentence {i}-{j}." for j in range(4)] for i in range(count)]


def test_identity_attack_changes_nothing():
    bank = verb_bank(8)
    sessions = watermarked_sessions(bank)
    parser = StubParser(strict=False)
    clean, attacked, neg = attack_reports(sessions, IdentityParaphraser(), bank, parser, negatives(), DetectConfig())
    assert clean == attacked
    c, a = run_attack(sessions, IdentityParaphraser(), bank, parser, negatives(), DetectConfig())
    assert c == a and c.auc == 1.0


def test_meaning_preserving_attack_keeps_auc():
    bank = verb_bank(8)
    sessions = watermarked_sessions(bank)
    # each rewrite carries an isomorphic graph under different variable names
    rng = random.Random(1)
    table = {}
    for s in sessions:
        for sent in s.sentences:
            g = StubParser().parse_sentence(sent).graph
            table[sent] = embed_amr("Rephrased " + sent[:6], renamed(g, rng))
    parser = StubParser(strict=False)
    attacker = TableParaphraser(table)
    clean, attacked, _ = attack_reports(sessions, attacker, bank, parser, negatives(), DetectConfig())
    for c, a in zip(clean, attacked):
        assert [s.flagged for s in c.per_sentence] == [s.flagged for s in a.per_sentence]
    c, a = run_attack(sessions, attacker, bank, parser, negatives(), DetectConfig())
    assert a.auc == c.auc == 1.0


def test_meaning_destroying_attack_collapses_scores():
    bank = verb_bank(8)
    sessions = watermarked_sessions(bank)
    table = {sent: embed_amr("Garbled", parse_penman("(z / zebra)")) for s in sessions for sent in s.sentences}
    c, a = run_attack(sessions, TableParaphraser(table), bank, StubParser(strict=False), negatives(), DetectConfig())
    assert c.auc == 1.0 and a.auc == 0.5
    assert max(a.scores_pos) < 0


def test_attack_context_is_s0_plus_previous_originals():
    bank = verb_bank(8)
    sessions = watermarked_sessions(bank, 1)
    seen = []

    class Spy:
        def paraphrase(self, text, context):
            seen.append((text, list(context)))
            return text

    attack_reports(sessions, Spy(), bank, StubParser(strict=False), negatives(1), DetectConfig())
    sents = sessions[0].sentences
    assert seen == [(s, [sessions[0].s0, *sents[:i]]) for i, s in enumerate(sents)]
    with pytest.raises(EmptyInput):
        attack_reports([], Spy(), bank, StubParser(), negatives(1), DetectConfig())


def test_bank_size_sweep():
    corpus = verb_corpus(10)
    params = BankParams(bank_size=1, seed=4)
    first = build_bank(corpus, params)[0].graph
    positives = [[embed_amr(f"P{i}{j}", first) for j in range(3)] for i in range(4)]
    neg = [[f"N{i}{j}." for j in range(3)] for i in range(4)]
    parser = StubParser(strict=False)
    out = bank_size_sweep(corpus, [1, 5, 10], params, positives, neg, parser, DetectConfig())
    assert list(out) == [1, 5, 10] and out[1].auc == 1.0
    assert json.dumps({k: v.to_dict() for k, v in out.items()})


def test_sweep_auc_non_increasing_when_negatives_gain_matches():
    corpus = distinct_corpus(12)
    params = BankParams(bank_size=1, seed=2)
    full = build_bank(corpus, BankParams(bank_size=12, seed=2))
    order = [build_bank(corpus, BankParams(bank_size=k, seed=2)) for k in (1, 4, 12)]
    first = order[0][0].graph
    positives = [[embed_amr(f"P{i}{j}", first) for j in range(4)] for i in range(5)]
    rng = random.Random(0)
    graphs = [t.graph for t in full.templates]
    neg = [[embed_amr(f"N{i}{j}", rng.choice(graphs)) for j in range(4)] for i in range(5)]
    out = bank_size_sweep(corpus, [1, 4, 12], params, positives, neg, StubParser(strict=False), DetectConfig())
    aucs = [out[k].auc for k in (1, 4, 12)]
    assert aucs == sorted(aucs, reverse=True)
    assert aucs[0] > aucs[-1]
