"""Small banks and scripted generators shared by the pipeline tests."""

from swan.amr import parse_penman
from swan.bank import BankParams, build_bank
from swan.clients import CallbackLlm, embed_amr, template_from_prompt


def verb_corpus(n_templates: int, copies: int = 3):
    corpus = []
    for i in range(n_templates):
        g = parse_penman(f"(a / verb{i}-01 :ARG0 (b / boy) :ARG1 (c / girl) :mod (d / very))")
        corpus += [g] * copies
    return corpus


def verb_bank(n_templates: int, seed: int = 0):
    return build_bank(verb_corpus(n_templates), BankParams(bank_size=n_templates, seed=seed))


def never_matching_llm():
    """Every reply parses to a one-node graph that cannot reach 0.7 against any bank template."""
    counter = iter(range(10**9))
    return CallbackLlm(lambda prompt: embed_amr(f"Miss {next(counter)}", parse_penman("(z / zebra)")))


def late_matching_llm(template_rank: int, attempt: int):
    """Realises only the ``template_rank``-th distinct template drawn, on its ``attempt``-th request."""
    seen: list[str] = []
    requests: dict[str, int] = {}

    def reply(prompt: str) -> str:
        key = prompt[prompt.rfind("\nAMR:\n"):]
        key = key[: key.find("\nContext: ")]
        if key not in seen:
            seen.append(key)
        requests[key] = requests.get(key, 0) + 1
        if seen.index(key) + 1 == template_rank and requests[key] == attempt:
            return embed_amr("Hit", template_from_prompt(prompt))
        return "Nothing parseable here."

    return CallbackLlm(reply)


def distinct_corpus(n_templates: int, copies: int = 3):
    """Templates sharing one shape but no concepts; cross-template F1 is 0.5."""
    corpus = []
    for i in range(n_templates):
        g = parse_penman(f"(a / verb{i}-01 :ARG0 (b / act{i}-01) :ARG1 (c / do{i}-01) :mod (d / seem{i}-01))")
        corpus += [g] * copies
    return corpus
