"""Run the rejection-sampling loop offline with scripted generators."""

from swan.amr import parse_penman
from swan.bank import BankParams, build_bank
from swan.clients import CallbackLlm, StubParser, TemplateEchoLlm, embed_amr
from swan.detector import DetectConfig, score_document
from swan.evalkit import trial_histogram
from swan.injector import InjectionConfig, inject

corpus = []
for i in range(12):
    corpus += [parse_penman(f"(a / verb{i}-01 :ARG0 (b / boy) :ARG1 (c / girl) :mod (d / very))")] * 3
bank = build_bank(corpus, BankParams(bank_size=12))
parser = StubParser()

# TemplateEchoLlm writes a sentence that carries the requested template, so every first try lands
good = inject("The storm arrived at dawn.", bank, InjectionConfig(n_sentences=5, rng_seed=7), TemplateEchoLlm(), parser)
print("perfect generator, trials per sentence:", [a.trials_used for a in good.accepted])
print(good.sentences[0][:80], "...")
print(score_document(good.sentences, bank, DetectConfig(), parser).decision)

# a generator that never fits burns the whole budget of 10 templates x 5 attempts
miss = CallbackLlm(lambda prompt: embed_amr("A zebra.", parse_penman("(z / zebra)")))
bad = inject("The storm arrived at dawn.", bank, InjectionConfig(n_sentences=3, rng_seed=7), miss, parser)
print("never-matching generator:", [(a.trials_used, a.fallback) for a in bad.accepted])

stats = trial_histogram([good, bad])
print("histogram:", stats.buckets, "mean", stats.mean)

# session logs are plain JSON and reproducible under a fixed seed
again = inject("The storm arrived at dawn.", bank, InjectionConfig(n_sentences=3, rng_seed=7), miss, parser)
print("byte-identical rerun:", again.to_json() == bad.to_json())
