"""Command-line workflow orchestration.

Subcommands cover the full pipeline: stats, sample, pairs, train, finetune,
decode, eval, ensemble. Every produced file gets a sibling
`<name>.manifest.json` recording the command, resolved configuration and its
hash, input digests, and versions, so outputs are reproducible byte for byte
by re-running the recorded command. Precedence for settings: command-line
flags, then --config file entries, then built-in defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__
from .corpus import (
    corpus_stats,
    downsample_in_domain,
    format_stats,
    parse_conll,
    read_conll,
    sample_few_shot,
    spans_from_bio,
    to_conll,
    write_conll,
    Corpus,
    LabeledSentence,
    bio_from_spans,
)
from .decoder import DecodeConfig, decode_corpus, ensemble_decode
from .errors import TemplateNerError
from .evaluation import evaluate, evaluate_with_buckets, format_report, report_to_dict
from .external import ENDPOINT_ENV_VAR, ExternalScorer
from .pairs import build_training_pairs, read_pairs, write_pairs
from .scorer import TinySeq2Seq, TrainConfig, fine_tune, fit
from .templates import (
    LabelWordMap,
    builtin_templates,
    default_label_words,
    get_builtin_template,
    load_template_config,
)
from .corpus import EntitySpan

DEFAULT_SEED = 0


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(output: str, command: str, config: dict, inputs: list[str]) -> str:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": _config_hash(config),
        "inputs": {path: _sha256_file(path) for path in sorted(set(inputs))},
        "output": os.path.basename(output),
        "versions": {"template_ner": __version__},
    }
    path = f"{output}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def _namespace_config(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    for key, value in list(config.items()):
        if isinstance(value, tuple):
            config[key] = list(value)
    return config


def _resolve_template(args) -> tuple:
    """(TemplateSpec, overrides dict) from --template/--template-config."""
    overrides = {}
    if getattr(args, "template_config", None):
        specs, overrides = load_template_config(args.template_config)
        by_name = {s.name: s for s in specs}
        for builtin in builtin_templates():
            by_name.setdefault(builtin.name, builtin)
        name = args.template or (specs[0].name if specs else "is-a-entity")
        if name not in by_name:
            raise TemplateNerError(f"template {name!r} not found in config or built-ins")
        return by_name[name], overrides
    return get_builtin_template(args.template or "is-a-entity"), overrides


def _resolve_words(label_set, args, overrides) -> LabelWordMap:
    words = default_label_words(label_set)
    merged = dict(overrides)
    for item in getattr(args, "label_word", None) or []:
        label, _, word = item.partition("=")
        if not word:
            raise TemplateNerError(f"bad --label-word {item!r}, expected LABEL=word")
        merged[label] = word
    if merged:
        words = words.merged({k: v for k, v in merged.items() if k in label_set})
    return words


def _resolve_scorer(args):
    flag_endpoint = getattr(args, "scorer_endpoint", None)
    model = getattr(args, "model", None)
    if flag_endpoint and model:
        raise TemplateNerError("pass exactly one of --model and --scorer-endpoint")
    endpoint = os.environ.get(ENDPOINT_ENV_VAR) or flag_endpoint
    if endpoint:
        return ExternalScorer(endpoint)
    if model:
        return TinySeq2Seq.load(model)
    raise TemplateNerError("no scorer: pass --model CKPT or --scorer-endpoint")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        warmup_steps=args.warmup_steps,
        epochs=args.epochs,
        seed=args.seed,
    )


# -- subcommand handlers -------------------------------------------------------


def cmd_stats(args) -> int:
    corpus = read_conll(args.input)
    stats = corpus_stats(corpus)
    print(format_stats(stats))
    if args.json:
        doc = {
            "sentence_count": stats.sentence_count,
            "mention_count_per_label": stats.mention_count_per_label,
            "entity_type_count": stats.entity_type_count,
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_manifest(args.json, "stats", _namespace_config(args), [args.input])
    return 0


def cmd_sample(args) -> int:
    corpus = read_conll(args.input)
    if (args.k is None) == (not args.quota):
        raise TemplateNerError("pass exactly one of --k or --quota")
    if args.k is not None:
        sub = sample_few_shot(corpus, args.k, args.seed)
        achieved = corpus_stats(sub).mention_count_per_label
    else:
        quotas = {}
        for item in args.quota:
            label, _, value = item.partition("=")
            try:
                quotas[label] = int(value)
            except ValueError:
                raise TemplateNerError(f"bad --quota {item!r}, expected LABEL=N") from None
        result = downsample_in_domain(corpus, quotas, args.seed)
        sub = result.corpus
        achieved = result.achieved
        if result.overshoot:
            print(f"quota overshoot via co-occurrence: {result.overshoot}")
    write_conll(sub, args.out)
    write_manifest(args.out, "sample", _namespace_config(args), [args.input])
    print(f"kept {len(sub)} sentences; achieved mentions: "
          + json.dumps(achieved, sort_keys=True))
    return 0


def cmd_pairs(args) -> int:
    corpus = read_conll(args.input)
    template, overrides = _resolve_template(args)
    words = _resolve_words(corpus.label_set, args, overrides)
    result = build_training_pairs(
        corpus, template, words,
        neg_ratio=args.neg_ratio, max_span_len=args.max_span_len, seed=args.seed,
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    write_pairs(result.pairs, args.out)
    inputs = [args.input] + ([args.template_config] if args.template_config else [])
    write_manifest(args.out, "pairs", _namespace_config(args), inputs)
    print(
        f"wrote {len(result)} pairs ({result.positive_count} positive, "
        f"{result.negative_count} negative) to {args.out}"
    )
    return 0


def cmd_train(args) -> int:
    pairs = read_pairs(args.pairs)
    if not pairs:
        raise TemplateNerError(f"no pairs in {args.pairs}")
    model = TinySeq2Seq.from_pairs(
        pairs, embed_dim=args.embed_dim, hidden_dim=args.hidden_dim, seed=args.seed
    )
    stats = fit(model, pairs, _train_config(args))
    model.save(args.out)
    write_manifest(args.out, "train", _namespace_config(args), [args.pairs])
    for epoch, value in enumerate(stats.epoch_losses, start=1):
        print(f"epoch {epoch}: loss {value:.6f}")
    print(f"saved {args.out} ({stats.wall_time_s:.1f}s)")
    return 0


def cmd_finetune(args) -> int:
    pairs = read_pairs(args.pairs)
    if not pairs:
        raise TemplateNerError(f"no pairs in {args.pairs}")
    model = TinySeq2Seq.load(args.init)
    stats = fine_tune(
        model, pairs, _train_config(args), extend_vocab=not args.no_extend_vocab
    )
    model.save(args.out)
    write_manifest(args.out, "finetune", _namespace_config(args), [args.pairs, args.init])
    for epoch, value in enumerate(stats.epoch_losses, start=1):
        print(f"epoch {epoch}: loss {value:.6f}")
    print(f"saved {args.out}")
    return 0


def cmd_decode(args) -> int:
    corpus = read_conll(args.input)
    template, overrides = _resolve_template(args)
    if args.labels:
        label_set = tuple(args.labels.split(","))
    else:
        label_set = corpus.label_set
    if not label_set:
        raise TemplateNerError("no labels: input has none and --labels not given")
    words = _resolve_words(label_set, args, overrides)
    scorer = _resolve_scorer(args)
    config = DecodeConfig(
        template, words,
        max_span_len=args.max_span_len, length_normalize=args.length_normalize,
    )
    decoded = decode_corpus(
        scorer, [s.tokens for s in corpus], config, workers=args.workers
    )
    if hasattr(scorer, "close"):
        scorer.close()

    predicted = Corpus.build(
        (
            LabeledSentence(
                sent.tokens,
                tuple(bio_from_spans([c.to_span() for c in cands], len(sent))),
            )
            for sent, cands in zip(corpus, decoded)
        ),
        label_set=label_set,
    )
    write_conll(predicted, args.out)
    inputs = [args.input] + (
        [args.template_config] if args.template_config else []
    ) + ([args.model] if args.model else [])
    write_manifest(args.out, "decode", _namespace_config(args), inputs)

    entities_path = args.entities or f"{args.out}.entities.jsonl"
    with open(entities_path, "w", encoding="utf-8") as fh:
        for sent_idx, cands in enumerate(decoded):
            for cand in cands:
                fh.write(json.dumps(
                    {
                        "sentence": sent_idx,
                        "start": cand.start,
                        "end": cand.end,
                        "label": cand.label,
                        "score": cand.score,
                    },
                    sort_keys=True,
                ) + "\n")
    write_manifest(entities_path, "decode", _namespace_config(args), inputs)
    total = sum(len(c) for c in decoded)
    print(f"decoded {len(corpus)} sentences, {total} entities -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    pred = read_conll(args.pred)
    gold = read_conll(args.gold)
    if args.train:
        report = evaluate_with_buckets(
            [s.entity_spans() for s in pred],
            [s.entity_spans() for s in gold],
            read_conll(args.train),
            by=args.bucket_by,
        )
    else:
        report = evaluate(
            [s.entity_spans() for s in pred],
            [s.entity_spans() for s in gold],
        )
    print(format_report(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        inputs = [args.pred, args.gold] + ([args.train] if args.train else [])
        write_manifest(args.json, "eval", _namespace_config(args), inputs)
    return 0


def cmd_ensemble(args) -> int:
    corpus = read_conll(args.input)
    model_outputs = []
    for path in args.pred:
        per_sentence: dict[int, list[tuple[EntitySpan, float]]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                span = EntitySpan(record["start"], record["end"], record["label"])
                per_sentence.setdefault(record["sentence"], []).append(
                    (span, float(record["score"]))
                )
        model_outputs.append(per_sentence)

    sentences = []
    kept_total = 0
    for sent_idx, sent in enumerate(corpus):
        votes_input = [output.get(sent_idx, []) for output in model_outputs]
        kept = ensemble_decode(votes_input)
        kept_total += len(kept)
        sentences.append(
            LabeledSentence(sent.tokens, tuple(bio_from_spans(kept, len(sent))))
        )
    label_set = sorted(
        {span.label for output in model_outputs for sents in output.values() for span, _ in sents}
    )
    write_conll(Corpus.build(sentences, label_set=label_set), args.out)
    write_manifest(args.out, "ensemble", _namespace_config(args), [args.input] + list(args.pred))
    print(f"ensemble kept {kept_total} entities across {len(corpus)} sentences")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="template-ner",
        description="Template-based NER: score candidate spans with a "
        "generative seq2seq model and rank templates.",
    )
    parser.add_argument("--config", help="flat JSON file of flag defaults")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"RNG seed (default {DEFAULT_SEED})")

    def add_template_flags(p):
        p.add_argument("--template", default=None,
                       help="built-in template name (default is-a-entity)")
        p.add_argument("--template-config", default=None,
                       help="JSON file with custom templates and label words")
        p.add_argument("--label-word", action="append", default=None,
                       metavar="LABEL=word", help="override one label word")

    def add_train_flags(p):
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--learning-rate", type=float, default=1e-3)
        p.add_argument("--warmup-steps", type=int, default=100)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--json", default=None, help="also write machine-readable stats")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sample", help="few-shot or quota-based downsampling")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None, help="mentions per entity type")
    p.add_argument("--quota", action="append", default=None, metavar="LABEL=N")
    add_seed(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pairs", help="build training pairs from gold entities")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    add_template_flags(p)
    p.add_argument("--neg-ratio", type=float, default=1.5)
    p.add_argument("--max-span-len", type=int, default=8)
    add_seed(p)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", help="train the built-in scorer on pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=128)
    add_train_flags(p)
    add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="continue training from a checkpoint")
    p.add_argument("--init", required=True, help="starting checkpoint")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-extend-vocab", action="store_true")
    add_train_flags(p)
    add_seed(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("decode", help="predict entities for a corpus")
    p.add_argument("--input", required=True, help="CoNLL file (tags may be all O)")
    p.add_argument("--out", required=True, help="predictions as CoNLL")
    p.add_argument("--entities", default=None,
                   help="entity report path (default OUT.entities.jsonl)")
    p.add_argument("--model", default=None, help="built-in scorer checkpoint")
    p.add_argument("--scorer-endpoint", default=None,
                   help=f"external scorer (env {ENDPOINT_ENV_VAR} overrides)")
    p.add_argument("--labels", default=None, help="comma-separated label set")
    add_template_flags(p)
    p.add_argument("--max-span-len", type=int, default=8)
    p.add_argument("--length-normalize", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="entity-level P/R/F1 of predictions vs gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--train", default=None, help="train corpus for frequency buckets")
    p.add_argument("--bucket-by", choices=("types", "mentions"), default="types")
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="entity-level voting over decode outputs")
    p.add_argument("--input", required=True, help="corpus the models decoded")
    p.add_argument("--pred", nargs="+", required=True,
                   help="entity jsonl reports, one per model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    # --config may also follow the subcommand
    for sub_parser in sub.choices.values():
        sub_parser.add_argument("--config", help=argparse.SUPPRESS)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Install config-file values as parser defaults (flags still win)."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    with open(known.config, encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise TemplateNerError("--config file must hold a flat JSON object")
    sub_actions = [
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    ]
    valid: set[str] = set()
    for sub_action in sub_actions:
        for sub_parser in sub_action.choices.values():
            dests = {a.dest for a in sub_parser._actions}
            valid.update(dests)
            sub_parser.set_defaults(**{k: v for k, v in config.items() if k in dests})
    unknown = set(config) - valid
    if unknown:
        raise TemplateNerError(f"unknown config keys: {sorted(unknown)}")
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except TemplateNerError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
