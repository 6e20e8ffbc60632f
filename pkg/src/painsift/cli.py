"""Command-line interface: train, evaluate, predict, report, synth.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
Flags override config-file values, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .corpus import (
    Corpus,
    demo_synthetic_spec,
    generate_synthetic_corpus,
    load_corpus,
    load_notes,
    save_notes,
)
from .errors import ConfigError, DataError, PainsiftError
from .evaluation import format_report_table
from .pipeline import (
    REPORT_KINDS,
    SEED_OFFSETS,
    PipelineConfig,
    load_artifact,
    run_evaluate,
    run_predict,
    run_report,
    run_train,
    save_artifact,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="master seed (derives all stage seeds)")
    parser.add_argument("--task", choices=["relevance", "change"])
    parser.add_argument("--features", choices=["linguistic", "topical", "combined"])
    parser.add_argument("--model", choices=["lr", "dt", "rf", "ffnn"])
    parser.add_argument("--smote", choices=["on", "off"])
    parser.add_argument("--smote-k", type=int, dest="smote_k")
    parser.add_argument("--stopwords", dest="stopwords_path",
                        help="custom stopword list file")
    parser.add_argument("--stemmer-rules", dest="stemmer_rules_path",
                        help="custom stemmer rule table file")
    parser.add_argument("--out", help="output path (file or directory, per subcommand)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="painsift", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write artifact + report")
    _common_flags(p_train)
    p_train.add_argument("--corpus", help="labeled corpus path")
    p_train.add_argument("--format", choices=["jsonl", "csv"], dest="corpus_format")
    p_train.add_argument("--lda-on-full-corpus", action="store_true", default=None,
                         dest="lda_on_full_corpus",
                         help="train the topic model on the whole corpus "
                              "(leaks test text; off by default)")

    p_eval = sub.add_parser("evaluate", help="evaluate a stored model on a labeled corpus")
    _common_flags(p_eval)
    p_eval.add_argument("--model-artifact", required=True, help="path to a painsift model JSON")
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--format", choices=["jsonl", "csv"], dest="corpus_format", default="jsonl")

    p_pred = sub.add_parser("predict", help="score notes with a stored model")
    _common_flags(p_pred)
    p_pred.add_argument("--model-artifact", required=True)
    p_pred.add_argument("--input", required=True, help="notes file (labels optional)")
    p_pred.add_argument("--format", choices=["jsonl", "csv"], dest="corpus_format", default="jsonl")

    p_rep = sub.add_parser("report", help="emit ngram/topic/coherence tables (+ figures)")
    _common_flags(p_rep)
    p_rep.add_argument("--corpus", required=True)
    p_rep.add_argument("--format", choices=["jsonl", "csv"], dest="corpus_format")
    p_rep.add_argument("--kind", required=True, choices=list(REPORT_KINDS))
    p_rep.add_argument("--top", type=int, help="cap n-gram report rows (0 = all)")
    p_rep.add_argument("--no-fig", action="store_true",
                       help="skip the companion figure when writing to a file")

    p_synth = sub.add_parser("synth", help="generate a synthetic demo corpus")
    _common_flags(p_synth)
    p_synth.add_argument("--per-class", type=int, default=50)
    p_synth.add_argument("--noise-rate", type=float, default=0.3)
    p_synth.add_argument("--note-length", default="8,14", help="min,max tokens per note")
    p_synth.add_argument("--patients", type=int, default=10)
    p_synth.add_argument("--pools", help="JSON file with classes/noise keyword pools")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    overrides = {}
    for key in ("seed", "task", "features", "model", "smote_k",
                "stopwords_path", "stemmer_rules_path", "lda_on_full_corpus"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "smote", None) is not None:
        overrides["smote"] = args.smote
    if getattr(args, "corpus", None):
        overrides["corpus"] = args.corpus
    if getattr(args, "corpus_format", None):
        overrides["corpus_format"] = args.corpus_format
    if getattr(args, "top", None) is not None:
        overrides["report_top"] = args.top
    config.apply(overrides)
    return config


def _load_cli_corpus(config: PipelineConfig) -> Corpus:
    if not config.corpus:
        raise ConfigError("no corpus given (use --corpus or the 'corpus' config key)")
    return load_corpus(config.corpus, config.corpus_format, config.task_enum)


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    result = run_train(config)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    artifact_path = os.path.join(out_dir, "model.json")
    report_path = os.path.join(out_dir, "report.json")
    save_artifact(result.artifact, artifact_path)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(result.report.to_json())
    print(format_report_table([result.report]), end="")
    print(f"artifact: {artifact_path}")
    print(f"report:   {report_path}")
    return 0


def _cmd_evaluate(args) -> int:
    # evaluation settings come from the stored artifact, not from flags
    artifact = load_artifact(args.model_artifact)
    corpus = load_corpus(args.corpus, args.corpus_format, artifact.config.task_enum)
    report = run_evaluate(artifact, corpus)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"report: {args.out}")
    else:
        print(text, end="")
    print(format_report_table([report]), end="")
    return 0


def _cmd_predict(args) -> int:
    artifact = load_artifact(args.model_artifact)
    notes = load_notes(args.input, args.corpus_format)
    predictions = run_predict(artifact, notes)
    labels = artifact.model.label_map
    lines = ["\t".join(["id", "label"] + [f"p:{lab}" for lab in labels])]
    for pred in predictions:
        probs = "\t".join(f"{p:.6f}" for p in pred.probabilities)
        lines.append(f"{pred.note_id}\t{pred.label}\t{probs}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"predictions: {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_report(args) -> int:
    config = _config_from_args(args)
    corpus = _load_cli_corpus(config)
    tsv = run_report(corpus, args.kind, config, out_path=args.out,
                     figures=not args.no_fig)
    if args.out:
        print(f"report: {args.out}")
        if not args.no_fig:
            print(f"figure: {os.path.splitext(args.out)[0] + '.png'}")
    else:
        print(tsv, end="")
    return 0


def _cmd_synth(args) -> int:
    config = _config_from_args(args)
    task = config.task_enum
    try:
        lo, hi = (int(v) for v in args.note_length.split(","))
    except ValueError:
        raise ConfigError(f"--note-length must be 'min,max', got {args.note_length!r}") from None
    if args.pools:
        with open(args.pools, encoding="utf-8") as fh:
            pools = json.load(fh)
        from .corpus import SyntheticSpec

        spec = SyntheticSpec(
            task=task,
            counts={lab: args.per_class for lab in pools["classes"]},
            class_pools=pools["classes"],
            noise_pool=pools["noise"],
            noise_rate=args.noise_rate,
            note_length=(lo, hi),
            patients=args.patients,
        )
    else:
        spec = demo_synthetic_spec(
            task, per_class=args.per_class, noise_rate=args.noise_rate,
            note_length=(lo, hi), patients=args.patients,
        )
    corpus = generate_synthetic_corpus(spec, seed=config.seed + SEED_OFFSETS["synth"])
    out = args.out or f"synthetic-{task.value}.jsonl"
    save_notes(corpus.notes, out)
    print(f"wrote {len(corpus)} notes to {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"painsift: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"painsift: data error: {exc}", file=sys.stderr)
        return 2
    except PainsiftError as exc:
        print(f"painsift: error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # internal error surface with stage context
        print(f"painsift: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
