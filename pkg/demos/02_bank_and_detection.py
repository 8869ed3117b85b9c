"""Build a template bank from a toy corpus and score a paragraph against it."""

import os
import tempfile

from swan.amr import parse_penman
from swan.bank import BankParams, abstract_template, build_bank, load_bank, save_bank
from swan.clients import StubParser
from swan.detector import DetectConfig, detect

corpus_text = [
    '(w / want-01 :ARG0 (p / person :name (n / name :op1 "Alice")) :ARG1 (v / visit-01 :ARG0 p :ARG1 (c / city)))',
    '(w / want-01 :ARG0 (p / person :name (n / name :op1 "Bob")) :ARG1 (v / visit-01 :ARG0 p :ARG1 (t / town)))',
    '(w / want-01 :ARG0 (c / company :name (n / name :op1 "Acme")) :ARG1 (v / visit-01 :ARG0 c :ARG1 (s / site)))',
    "(s / see-01 :ARG0 (c / cat) :ARG1 (d / dog))",
    "(s / see-01 :ARG0 (b / boy) :ARG1 (g / girl))",
    "(s / see-01 :ARG0 (m / man) :ARG1 (w / woman))",
    "(r / run-02 :ARG0 (h / horse))",
]
corpus = [parse_penman(t) for t in corpus_text]

# names collapse to NE and plain nouns to N, so the first three share one template
print(abstract_template(corpus[0]))

bank = build_bank(corpus, BankParams(min_freq=3, max_freq=20, min_nodes=3, bank_size=2, seed=0))
for t in bank.templates:
    print(t.id, t.frequency, t.graph)

path = os.path.join(tempfile.mkdtemp(), "bank.swan")
save_bank(bank, path)
print("file mode:", oct(os.stat(path).st_mode & 0o777))
assert load_bank(path) == bank

# a stub parser stands in for a neural one
parser = StubParser({
    "Carol hopes to tour Paris.": '(h / want-01 :ARG0 (p / person :name (n / name :op1 "Carol"))'
                                  ' :ARG1 (t / visit-01 :ARG0 p :ARG1 (c / city :name (m / name :op1 "Paris"))))',
    "The fox saw a hen.": "(s / see-01 :ARG0 (f / fox) :ARG1 (h / hen))",
    "It rained.": "(r / rain-01)",
})
report = detect("Carol hopes to tour Paris. The fox saw a hen. It rained.", bank, DetectConfig(lam=0.05), parser)
for s in report.per_sentence:
    print(f"{s.best_score:.3f} flagged={s.flagged}  {s.sentence}")
print(f"k={report.k} n={report.n} z={report.z:.3f} -> {report.decision}")
