"""``swan`` command-line entry point.

Configuration is layered: built-in defaults, then a flat ``key = value``
config file (``--config``), then environment variables, then flags.
JSON results go to stdout and logs to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .amr import parse_penman, read_corpus, serialize_penman
from .bank import BankParams, build_bank, load_bank, load_ne_types, save_bank
from .clients import HttpAmrParser, IdentityParaphraser, LlmParaphraser, OpenAIChatClient, StubParser, TemplateEchoLlm
from .detector import DetectConfig, detect, estimate_lambda, segment_sentences
from .errors import ServiceError, SwanError
from .evalkit import bank_size_sweep, judge_quality, roc, run_attack, simulate_detection, trial_histogram
from .injector import InjectionConfig, InjectionSession, inject, load_exemplars
from .matcher import MatchConfig, load_similarity_table, s2match


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_SERVICE = 3
EXIT_WATERMARKED = 10

# key: (type, default, description)
CONFIG_KEYS: dict[str, tuple[type, object, str]] = {
    "min_freq": (int, 3, "bank: minimum template frequency in the corpus"),
    "max_freq": (int, 20, "bank: maximum template frequency in the corpus"),
    "min_nodes": (int, 3, "bank: minimum concept nodes per template"),
    "bank_size": (int, 50, "bank: number of templates kept"),
    "seed": (int, 0, "RNG seed for bank sampling, template draws and hill-climbing"),
    "n_sentences": (int, 5, "inject: sentences generated per prompt"),
    "max_templates": (int, 10, "inject: templates tried per sentence"),
    "max_attempts": (int, 5, "inject: attempts per template"),
    "theta_accept": (float, 0.7, "inject: S2match acceptance threshold"),
    "fallback_best": (bool, False, "inject: keep the best rather than the last candidate on budget exhaustion"),
    "theta_detect": (float, 0.7, "detect: per-sentence green threshold"),
    "lambda": (float, 0.05, "detect: null hit rate of the z-test"),
    "z_threshold": (float, 1.645, "detect: z at or above which text is called watermarked"),
    "abstract_before_match": (bool, True, "detect: abstract parsed graphs to template form before matching"),
    "restarts": (int, 8, "match: hill-climbing restarts"),
    "match_mode": (str, "hillclimb", "match: hillclimb or exact_oracle"),
    "similarity_table": (str, "", "match: TSV of soft concept similarities (empty = exact)"),
    "temperature": (float, 0.6, "llm: sampling temperature"),
    "top_p": (float, 0.9, "llm: nucleus sampling mass"),
    "max_tokens": (int, 256, "llm: completion length cap"),
    "max_in_flight": (int, 4, "clients: concurrent requests per client"),
    "llm_endpoint": (str, "", "llm: OpenAI-compatible base URL [env SWAN_LLM_ENDPOINT]"),
    "llm_api_key": (str, "", "llm: bearer token [env SWAN_LLM_API_KEY]"),
    "llm_model": (str, "default", "llm: model name [env SWAN_LLM_MODEL]"),
    "parser_endpoint": (str, "", "parser: base URL of the /parse service [env SWAN_PARSER_ENDPOINT]"),
}

ENV_KEYS = {
    "llm_endpoint": "SWAN_LLM_ENDPOINT",
    "llm_api_key": "SWAN_LLM_API_KEY",
    "llm_model": "SWAN_LLM_MODEL",
    "parser_endpoint": "SWAN_PARSER_ENDPOINT",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def _convert(key: str, raw: str):
    typ = CONFIG_KEYS[key][0]
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw.strip())
    except ValueError:
        raise UsageError(f"config key {key}: expected {typ.__name__}, got {raw!r}") from None


def read_config_file(path: str) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except UsageError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def resolve_config(args: argparse.Namespace, environ=os.environ) -> dict:
    """Merge defaults < config file < environment < flags into one flat dict."""
    conf = {k: v[1] for k, v in CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        conf.update(read_config_file(args.config))
    for key, var in ENV_KEYS.items():
        if environ.get(var):
            conf[key] = environ[var]
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            conf[key] = value
    return conf


def _match_config(conf: dict) -> MatchConfig:
    table = load_similarity_table(conf["similarity_table"]) if conf["similarity_table"] else "exact"
    return MatchConfig(concept_similarity=table, restarts=conf["restarts"], mode=conf["match_mode"], seed=conf["seed"])


def _detect_config(conf: dict, args) -> DetectConfig:
    ne = load_ne_types(args.ne_types) if getattr(args, "ne_types", None) else None
    return DetectConfig(conf["theta_detect"], conf["lambda"], conf["z_threshold"], conf["abstract_before_match"], ne)


def _parser_client(conf: dict, args):
    if args.parser == "stub":
        table = {}
        if args.parser_table:
            for line in Path(args.parser_table).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    sentence, penman = line.split("\t", 1)
                    table[sentence] = penman
        return StubParser(table)
    if not conf["parser_endpoint"]:
        raise UsageError("no parser endpoint: set --parser-endpoint or SWAN_PARSER_ENDPOINT, or use --parser stub")
    return HttpAmrParser(conf["parser_endpoint"], max_in_flight=conf["max_in_flight"])


def _llm_client(conf: dict, args):
    if getattr(args, "llm", "http") == "echo":
        return TemplateEchoLlm()
    if not conf["llm_endpoint"]:
        raise UsageError("no LLM endpoint: set --llm-endpoint or SWAN_LLM_ENDPOINT")
    return OpenAIChatClient(conf["llm_endpoint"], conf["llm_model"], conf["llm_api_key"] or None,
                            max_in_flight=conf["max_in_flight"])


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n")


def _read_paragraphs(path: str) -> list[list[str]]:
    """Blank-line separated paragraphs, one sentence per line."""
    paragraphs, current = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            current.append(line.strip())
        elif current:
            paragraphs.append(current)
            current = []
    if current:
        paragraphs.append(current)
    return paragraphs


def _read_scores(path: str) -> list[float]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return [float(x) for x in json.loads(text)]
    return [float(x) for x in text.split()]


def _read_sessions(paths) -> list[InjectionSession]:
    sessions = []
    for p in paths:
        data = json.loads(Path(p).read_text(encoding="utf-8"))
        sessions += [InjectionSession.from_dict(d) for d in data["sessions"]]
    return sessions


# -- commands ----------------------------------------------------------------


def cmd_bank_build(args, conf) -> int:
    params = BankParams(conf["min_freq"], conf["max_freq"], conf["min_nodes"], conf["bank_size"], conf["seed"])
    ne = load_ne_types(args.ne_types) if args.ne_types else None
    bank = build_bank(read_corpus(args.corpus, one_per_line=args.one_per_line), params, ne)
    save_bank(bank, args.out, insecure=args.insecure)
    _emit({"out": args.out, "templates": len(bank), "corpus_digest": bank.created_from})
    return EXIT_OK


def cmd_bank_show(args, conf) -> int:
    bank = load_bank(args.bank)
    _emit({
        "params": vars(bank.params),
        "created_from": bank.created_from,
        "templates": [{"id": t.id, "frequency": t.frequency, "penman": serialize_penman(t.graph)}
                      for t in bank.templates],
    })
    return EXIT_OK


def cmd_inject(args, conf) -> int:
    bank = load_bank(args.bank)
    prompts = [ln.strip() for ln in Path(args.prompt_file).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not prompts:
        raise UsageError("prompt file has no prompts")
    llm, parser, match_cfg = _llm_client(conf, args), _parser_client(conf, args), _match_config(conf)
    examples = load_exemplars(args.exemplars) if args.exemplars else None
    sessions = []
    for i, s0 in enumerate(prompts):
        cfg = InjectionConfig(conf["n_sentences"], conf["max_templates"], conf["max_attempts"],
                              conf["theta_accept"], conf["seed"] + i, conf["fallback_best"],
                              conf["temperature"], conf["top_p"], conf["max_tokens"])
        sessions.append(inject(s0, bank, cfg, llm, parser, match_cfg, examples))
    payload = json.dumps({"sessions": [s.to_dict() for s in sessions]}, sort_keys=True, ensure_ascii=False, indent=1)
    Path(args.out).write_text(payload + "\n", encoding="utf-8")
    stats = trial_histogram(sessions)
    _emit({"out": args.out, "sessions": len(sessions), "mean_trials": stats.mean,
           "fallbacks": sum(a.fallback for s in sessions for a in s.accepted)})
    return EXIT_OK


def cmd_detect(args, conf) -> int:
    bank = load_bank(args.bank)
    text = Path(args.input).read_text(encoding="utf-8")
    report = detect(text, bank, _detect_config(conf, args), _parser_client(conf, args), _match_config(conf),
                    pre_segmented=args.pre_segmented)
    _emit(report.to_dict())
    return EXIT_WATERMARKED if report.watermarked else EXIT_OK


def cmd_estimate_lambda(args, conf) -> int:
    bank = load_bank(args.bank)
    text = Path(args.input).read_text(encoding="utf-8")
    if args.pre_segmented:
        sentences = [ln.strip() for ln in text.splitlines() if ln.strip()]
    else:
        sentences = segment_sentences(text)
    rate, flagged, total = estimate_lambda(sentences, bank, _detect_config(conf, args),
                                           _parser_client(conf, args), _match_config(conf))
    _emit({"lambda": rate, "flagged": flagged, "total": total})
    return EXIT_OK


def cmd_score(args, conf) -> int:
    a = parse_penman(Path(args.a).read_text(encoding="utf-8"))
    b = parse_penman(Path(args.b).read_text(encoding="utf-8"))
    s = s2match(a, b, _match_config(conf))
    _emit({"precision": s.precision, "recall": s.recall, "f1": s.f1, "node_f1": s.node_f1,
           "edge_f1": s.edge_f1, "mean_f1": s.mean_f1, "alignment": s.alignment.mapping})
    return EXIT_OK


def _write_csv(path: str, result) -> None:
    rows = ["label,score"]
    rows += [f"1,{x!r}" for x in result.scores_pos] + [f"0,{x!r}" for x in result.scores_neg]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_eval_roc(args, conf) -> int:
    result = roc(_read_scores(args.pos), _read_scores(args.neg))
    if args.csv:
        _write_csv(args.csv, result)
    _emit(result.to_dict())
    return EXIT_OK


def cmd_eval_simulate(args, conf) -> int:
    result = simulate_detection(args.paragraphs, args.sentences_per_paragraph, args.p_pos, args.p_neg,
                                conf["lambda"], conf["seed"])
    _emit({"auc": result.auc, "tpr_at": {str(k): v for k, v in result.tpr_at.items()}})
    return EXIT_OK


def cmd_eval_trials(args, conf) -> int:
    stats = trial_histogram(_read_sessions(args.sessions))
    _emit({"buckets": stats.buckets, "mean": stats.mean, "sentences": stats.n_sentences,
           "within_10": stats.fraction_within(10), "within_15": stats.fraction_within(15)})
    return EXIT_OK


def cmd_eval_attack(args, conf) -> int:
    bank = load_bank(args.bank)
    sessions = _read_sessions(args.sessions)
    if args.paraphraser == "identity":
        attacker = IdentityParaphraser()
    else:
        attacker = LlmParaphraser(_llm_client(conf, args), conf["temperature"], conf["top_p"], conf["max_tokens"])
    clean, attacked = run_attack(sessions, attacker, bank, _parser_client(conf, args),
                                 _read_paragraphs(args.negatives), _detect_config(conf, args), _match_config(conf))
    if args.csv:
        _write_csv(args.csv, attacked)
    _emit({"clean": clean.to_dict(), "attacked": attacked.to_dict()})
    return EXIT_OK


def cmd_eval_sweep(args, conf) -> int:
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
    params = BankParams(conf["min_freq"], conf["max_freq"], conf["min_nodes"], max(sizes), conf["seed"])
    corpus = list(read_corpus(args.corpus, one_per_line=args.one_per_line))
    results = bank_size_sweep(corpus, sizes, params, _read_paragraphs(args.pos), _read_paragraphs(args.neg),
                              _parser_client(conf, args), _detect_config(conf, args), _match_config(conf))
    _emit({str(size): r.to_dict() for size, r in results.items()})
    return EXIT_OK


def cmd_eval_quality(args, conf) -> int:
    judge = _llm_client(conf, args)
    out = []
    for paragraph in _read_paragraphs(args.input):
        q = judge_quality(" ".join(paragraph), judge)
        out.append(vars(q))
    _emit(out)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _config_epilog() -> str:
    lines = ["configuration keys (config file `key = value`; flags override env override file):"]
    for key, (typ, default, desc) in CONFIG_KEYS.items():
        lines.append(f"  {key:<22} {typ.__name__:<5} default={default!r:<12} {desc}")
    lines.append("")
    lines.append("exit codes: 0 ok / not watermarked, 10 watermarked, 2 usage error, 3 service error, 1 other error")
    return "\n".join(lines)


def _add_bank_flags(p):
    p.add_argument("--min-freq", dest="min_freq", type=int)
    p.add_argument("--max-freq", dest="max_freq", type=int)
    p.add_argument("--min-nodes", dest="min_nodes", type=int)
    p.add_argument("--size", dest="bank_size", type=int)


def _add_match_flags(p):
    p.add_argument("--restarts", type=int)
    p.add_argument("--match-mode", dest="match_mode", choices=["hillclimb", "exact_oracle"])
    p.add_argument("--similarity-table", dest="similarity_table")


def _add_detect_flags(p):
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--theta-detect", dest="theta_detect", type=float)
    p.add_argument("--z-threshold", dest="z_threshold", type=float)
    p.add_argument("--no-abstract", dest="abstract_before_match", action="store_const", const=False)
    p.add_argument("--ne-types", dest="ne_types", help="file of named-entity types, one per line")


def _add_parser_flags(p):
    p.add_argument("--parser", choices=["http", "stub"], default="http",
                   help="AMR parser backend; 'stub' reads <amr> payloads and --parser-table")
    p.add_argument("--parser-table", help="TSV sentence<TAB>penman for the stub parser")
    p.add_argument("--parser-endpoint", dest="parser_endpoint")


def _add_llm_flags(p, echo=False):
    if echo:
        p.add_argument("--llm", choices=["http", "echo"], default="http",
                       help="'echo' realises every template exactly (offline testing)")
    p.add_argument("--llm-endpoint", dest="llm_endpoint")
    p.add_argument("--llm-api-key", dest="llm_api_key")
    p.add_argument("--llm-model", dest="llm_model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-p", dest="top_p", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--max-in-flight", dest="max_in_flight", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="swan", description="AMR-anchored sentence watermarking.",
                     epilog=_config_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter,
                     )
    parser.add_argument("--version", action="version", version=f"swan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bank = sub.add_parser("bank", help="build or inspect a template bank")
    bank_sub = bank.add_subparsers(dest="bank_command", required=True, parser_class=_Parser)
    p = bank_sub.add_parser("build", parents=[common], help="build a bank from an AMR corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--one-per-line", action="store_true", help="one graph per line instead of blank-line blocks")
    p.add_argument("--ne-types")
    p.add_argument("--out", required=True)
    p.add_argument("--insecure", action="store_true", help="write the bank world-readable")
    _add_bank_flags(p)
    p.set_defaults(func=cmd_bank_build)
    p = bank_sub.add_parser("show", parents=[common], help="print a bank as JSON")
    p.add_argument("--bank", required=True)
    p.set_defaults(func=cmd_bank_show)

    p = sub.add_parser("inject", parents=[common], help="generate watermarked text")
    p.add_argument("--bank", required=True)
    p.add_argument("--prompt-file", required=True, help="one initial sentence per line")
    p.add_argument("--out", required=True)
    p.add_argument("--exemplars", help="TSV template<TAB>sentence few-shot file")
    p.add_argument("--sentences", dest="n_sentences", type=int)
    p.add_argument("--max-templates", dest="max_templates", type=int)
    p.add_argument("--max-attempts", dest="max_attempts", type=int)
    p.add_argument("--theta-accept", dest="theta_accept", type=float)
    p.add_argument("--fallback-best", dest="fallback_best", action="store_const", const=True)
    _add_llm_flags(p, echo=True)
    _add_parser_flags(p)
    _add_match_flags(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("detect", parents=[common], help="test a text for the watermark")
    p.add_argument("--bank", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pre-segmented", action="store_true", help="input has one sentence per line")
    _add_detect_flags(p)
    _add_parser_flags(p)
    _add_match_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("estimate-lambda", parents=[common], help="flag rate of non-watermarked text")
    p.add_argument("--bank", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pre-segmented", action="store_true")
    _add_detect_flags(p)
    _add_parser_flags(p)
    _add_match_flags(p)
    p.set_defaults(func=cmd_estimate_lambda)

    p = sub.add_parser("score", parents=[common], help="S2match between two Penman files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _add_match_flags(p)
    p.set_defaults(func=cmd_score)

    ev = sub.add_parser("eval", help="evaluation harness")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)
    p = ev_sub.add_parser("roc", parents=[common], help="AUC and TPR@1%%/5%% from score files")
    p.add_argument("--pos", required=True)
    p.add_argument("--neg", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval_roc)
    p = ev_sub.add_parser("simulate", parents=[common], help="ROC of Bernoulli-simulated paragraphs")
    p.add_argument("--paragraphs", type=int, default=250)
    p.add_argument("--sentences-per-paragraph", type=int, default=5)
    p.add_argument("--p-pos", type=float, required=True)
    p.add_argument("--p-neg", type=float, required=True)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.set_defaults(func=cmd_eval_simulate)
    p = ev_sub.add_parser("trials", parents=[common], help="trials-per-sentence histogram")
    p.add_argument("--sessions", nargs="+", required=True)
    p.set_defaults(func=cmd_eval_trials)
    p = ev_sub.add_parser("attack", parents=[common], help="detection before and after paraphrasing")
    p.add_argument("--bank", required=True)
    p.add_argument("--sessions", nargs="+", required=True)
    p.add_argument("--negatives", required=True, help="blank-line separated paragraphs, one sentence per line")
    p.add_argument("--paraphraser", choices=["identity", "llm"], default="llm")
    p.add_argument("--csv")
    _add_detect_flags(p)
    _add_parser_flags(p)
    _add_match_flags(p)
    _add_llm_flags(p)
    p.set_defaults(func=cmd_eval_attack)
    p = ev_sub.add_parser("sweep", parents=[common], help="bank-size ablation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--one-per-line", action="store_true")
    p.add_argument("--sizes", required=True, help="comma-separated bank sizes")
    p.add_argument("--pos", required=True)
    p.add_argument("--neg", required=True)
    _add_bank_flags(p)
    _add_detect_flags(p)
    _add_parser_flags(p)
    _add_match_flags(p)
    p.set_defaults(func=cmd_eval_sweep)
    p = ev_sub.add_parser("quality", parents=[common], help="LLM-judged coherence, fluency, diversity")
    p.add_argument("--in", dest="input", required=True)
    _add_llm_flags(p)
    p.set_defaults(func=cmd_eval_quality)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        conf = resolve_config(args)
        return args.func(args, conf)
    except UsageError as exc:
        print(f"swan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ServiceError as exc:
        print(f"swan: external service error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (SwanError, OSError, ValueError, KeyError) as exc:
        print(f"swan: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
