import os
import random
import stat

import pytest
from hypothesis import given, settings, strategies as st

from swan.amr import Constant, canonicalize, concept_node_count, parse_penman
from swan.bank import (
    BankParams,
    Template,
    TemplateBank,
    abstract_template,
    build_bank,
    dumps_bank,
    load_bank,
    load_ne_types,
    loads_bank,
    save_bank,
)
from swan.errors import FormatError, InsufficientTemplates

from _graphs import random_graph

WANT = "(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl) :ARG1 b))"


def same(a, b) -> bool:
    return canonicalize(a) == canonicalize(b)


def test_named_entity_collapses():
    g = parse_penman('(v / visit-01 :ARG0 (p / person :name (n / name :op1 "Alice") :wiki -) :ARG1 (c / country '
                     ':name (n2 / name :op1 "France")))')
    t = abstract_template(g)
    assert same(t, parse_penman("(v / visit-01 :ARG0 (a / NE) :ARG1 (b / NE))"))


def test_leaf_nouns_and_underspecified():
    g = parse_penman("(w / want-01 :ARG0 (b / boy))")
    assert same(abstract_template(g), parse_penman("(w / want-01 :ARG0 (n / N))"))
    g = parse_penman("(k / know-01 :ARG0 (y / you) :ARG1 (a / amr-unknown) :polarity -)")
    t = abstract_template(g)
    assert t.nodes == {"k": "know-01", "y": "you", "a": "X"}
    assert any(isinstance(e.target, Constant) and e.target.value == "-" for e in t.edges)


def test_no_content_words_unchanged():
    g = parse_penman("(a / and :op1 (r / run-01) :op2 (j / jump-01))")
    assert abstract_template(g) == g


def test_running_example_abstraction():
    t = abstract_template(parse_penman(WANT))
    assert same(t, parse_penman("(w / want-01 :ARG0 (n / N) :ARG1 (b / believe-01 :ARG0 (n2 / N) :ARG1 n))"))


def test_custom_ne_types(tmp_path):
    p = tmp_path / "ne.txt"
    p.write_text("# custom\nrobot\n")
    types = load_ne_types(p)
    assert types == frozenset({"robot"})
    g = parse_penman('(r / robot :name (n / name :op1 "R2"))')
    assert abstract_template(g, types).nodes == {"r": "NE"}
    assert abstract_template(g).nodes["r"] == "robot"


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_abstraction_idempotent_and_shape_preserving(seed):
    rng = random.Random(seed)
    concepts = ["want-01", "boy", "person", "name", "amr-unknown", "and", "city", "go-02"]
    g = random_graph(rng, max_nodes=7, concepts=concepts)
    once = abstract_template(g)
    assert abstract_template(once) == once
    assert once.root == g.root
    assert set(once.nodes) <= set(g.nodes)
    kept = [(s, r) for s, r, _ in once.edges]
    assert all((s, r) in [(e.source, e.role) for e in g.edges] for s, r in kept)
    if not any(e.role in (":name", ":wiki") for e in g.edges):
        assert set(once.nodes) == set(g.nodes)
        assert sorted(e.role for e in once.edges) == sorted(e.role for e in g.edges)


def four_node(concept: str) -> str:
    return f"(a / {concept}-01 :ARG0 (b / boy) :ARG1 (c / girl) :mod (d / very))"


def test_build_single_template():
    corpus = [parse_penman(four_node("see"))] * 10
    bank = build_bank(corpus, BankParams(bank_size=1))
    assert len(bank) == 1
    t = bank[0]
    assert t.id == 0 and t.frequency == 10
    assert same(t.graph, abstract_template(corpus[0]))


def test_over_frequent_and_small_templates_excluded():
    corpus = [parse_penman(four_node("see"))] * 25
    corpus += [parse_penman("(a / run-01 :ARG0 (b / boy))")] * 5
    corpus += [parse_penman(four_node("hear"))] * 4
    bank = build_bank(corpus, BankParams(bank_size=1))
    assert [t.frequency for t in bank.templates] == [4]
    with pytest.raises(InsufficientTemplates) as err:
        build_bank(corpus, BankParams(bank_size=2))
    assert (err.value.found, err.value.needed) == (1, 2)


def test_frequency_keyed_by_canonical_form():
    # same template under different variable names and edge orders
    corpus = [
        parse_penman("(a / see-01 :ARG0 (b / boy) :ARG1 (c / girl))"),
        parse_penman("(x / see-01 :ARG1 (y / dog) :ARG0 (z / man))"),
        parse_penman("(s / see-01 :ARG0 (p / person :name (n / name :op1 \"Al\")) :ARG1 (q / cat))"),
    ]
    bank = build_bank(corpus, BankParams(min_freq=2, bank_size=1))
    assert bank[0].frequency == 2


def synthetic_corpus(n_templates: int):
    corpus = []
    for i in range(n_templates):
        corpus += [parse_penman(four_node(f"verb{i}"))] * 3
    return corpus


def test_sampling_deterministic_nested_and_seeded():
    corpus = synthetic_corpus(12)
    a = build_bank(corpus, BankParams(bank_size=5, seed=7))
    b = build_bank(corpus, BankParams(bank_size=5, seed=7))
    assert dumps_bank(a) == dumps_bank(b)
    bigger = build_bank(corpus, BankParams(bank_size=8, seed=7))
    small_keys = {canonicalize(t.graph) for t in a.templates}
    assert small_keys <= {canonicalize(t.graph) for t in bigger.templates}
    others = {dumps_bank(build_bank(corpus, BankParams(bank_size=5, seed=s))).split("\n", 1)[1] for s in range(6)}
    assert len(others) > 1


def test_params_validation():
    for kwargs in ({"min_freq": 0}, {"min_freq": 5, "max_freq": 4}, {"min_nodes": 0}, {"bank_size": 0}):
        with pytest.raises(ValueError):
            BankParams(**kwargs)


def test_bank_invariants_checked():
    g = abstract_template(parse_penman(four_node("see")))
    with pytest.raises(ValueError):
        TemplateBank((Template(1, g, 3),), "", BankParams(bank_size=1))
    with pytest.raises(ValueError):
        TemplateBank((Template(0, g, 30),), "", BankParams(bank_size=1))


def test_save_load_round_trip(tmp_path):
    bank = build_bank(synthetic_corpus(6), BankParams(bank_size=4, seed=3))
    path = tmp_path / "bank.swan"
    save_bank(bank, path)
    assert stat.S_IMODE(os.stat(path).st_mode) == 0o600
    loaded = load_bank(path)
    assert loaded == bank
    again = tmp_path / "again.swan"
    save_bank(loaded, again, insecure=True)
    assert again.read_bytes() == path.read_bytes()
    assert stat.S_IMODE(os.stat(again).st_mode) == 0o644
    header = path.read_text().splitlines()[0]
    assert header.startswith("SWANBANK v1 seed=3 min_freq=3 max_freq=20 min_nodes=3 size=4")


@pytest.mark.parametrize(
    "mutate, line",
    [
        (lambda s: s[:-1], 5),
        (lambda s: s[: s.rfind("\n", 0, len(s) - 1) + 1], 5),
        (lambda s: "SWANBANK v2" + s[11:], 1),
        (lambda s: s.replace("\n1\t", "\n7\t", 1), 3),
        (lambda s: s.replace("\n2\t3\t", "\n2\t99\t", 1), 4),
        (lambda s: s.replace("\n0\t3\t(", "\n0\t3\t((", 1), 2),
        (lambda s: s.replace("\n0\t3\t", "\n0\tthree\t", 1), 2),
    ],
)
def test_corrupt_files_raise_format_error(mutate, line):
    text = dumps_bank(build_bank(synthetic_corpus(6), BankParams(bank_size=4, seed=3)))
    assert loads_bank(text) is not None
    with pytest.raises(FormatError) as err:
        loads_bank(mutate(text))
    assert err.value.line == line


def test_filters_rechecked_on_load():
    bank = build_bank(synthetic_corpus(2), BankParams(bank_size=2))
    text = dumps_bank(bank).replace("min_nodes=3", "min_nodes=5")
    with pytest.raises(FormatError):
        loads_bank(text)
    assert all(concept_node_count(t.graph) >= 3 for t in bank.templates)
