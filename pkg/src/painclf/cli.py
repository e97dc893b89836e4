"""Command-line entry point: ``painclf <subcommand> ...``.

Stages hand off through files so each one can be audited on its own.
Subcommands that consume randomness require an explicit ``--seed``.
Exit codes: 0 success, 1 data or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

from painclf import __version__
from painclf.annotation import (
    adjudicate_all,
    agreement_by_round,
    gate_check,
    load_annotations,
    load_gold,
    load_resolutions,
    write_gold,
)
from painclf.classifiers import DEFAULT_EPOCHS, DEFAULT_K, DEFAULT_LAMBDA, load_embeddings
from painclf.corpus_io import load_corpus, write_corpus
from painclf.errors import CorpusError, PainClfError
from painclf.evaluation import (
    dumps_report,
    error_report,
    holdout_evaluate,
    kfold_cv,
    load_predictions,
    metrics_report,
    write_predictions,
)
from painclf.features import PreprocessConfig, default_lemma_exceptions, default_stopwords, read_lemma_exceptions, read_stopwords
from painclf.lexicon import default_lexicon, load_lexicon
from painclf.model_io import load_model, persist_model
from painclf.pipeline import MODEL_KINDS, LabeledSpan, PipelineConfig, TextClassifier, fit_pipeline
from painclf.spans import extract_spans, load_spans, write_spans
from painclf.synth import SynthConfig, generate_corpus, write_synth

log = logging.getLogger("painclf")

MATCH_MODES = {"word": "word_boundary", "substring": "substring"}


def _match_mode(args) -> str:
    return MATCH_MODES[args.match_mode]


def _lexicon(args):
    return load_lexicon(args.lexicon) if args.lexicon else default_lexicon()


def _write_text(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> None:
    mix = tuple(float(x) for x in args.label_mix.split(","))
    noise = [float(x) for x in args.noise.split(",")]
    config = SynthConfig(
        n_docs=args.docs,
        n_patients=args.patients,
        n_spans=args.spans,
        label_mix=mix,  # type: ignore[arg-type]
        annotator_noise=noise[0] if len(noise) == 1 else tuple(noise),
        seed=args.seed,
        class_noise=tuple(float(x) for x in args.class_noise.split(",")) if args.class_noise else None,  # type: ignore[arg-type]
    )
    corpus = generate_corpus(config)
    write_synth(corpus, args.out)
    log.info("wrote %d documents, %d spans to %s", len(corpus.documents), len(corpus.spans), args.out)


def cmd_filter(args) -> None:
    lexicon = _lexicon(args)
    docs = load_corpus(args.corpus)
    counts = lexicon.scan_many([d.text for d in docs], _match_mode(args)).counts()
    kept = [d for d, n in zip(docs, counts.tolist()) if n]
    write_corpus(kept, args.out)
    log.info("kept %d of %d documents", len(kept), len(docs))


def cmd_extract(args) -> None:
    lexicon = _lexicon(args)
    docs = load_corpus(args.corpus)
    spans = []
    for doc, matches in zip(docs, lexicon.find_many([d.text for d in docs], _match_mode(args))):
        spans.extend(extract_spans(doc, matches, args.window))
    write_spans(spans, args.out)
    log.info("wrote %d spans from %d documents", len(spans), len(docs))


def cmd_agreement(args) -> None:
    records = load_annotations(args.annotations)
    if not records:
        raise PainClfError(f"{args.annotations}: no annotation records")
    rounds = []
    for rnd, report in agreement_by_round(records).items():
        gate = gate_check(report, args.threshold)
        rounds.append({"round": rnd, **report.to_dict(),
                       "gate": {"threshold": gate.threshold, "passed": gate.passed, "margin": gate.margin}})
    _write_text(args.out, dumps_report({"rounds": rounds}))


def cmd_adjudicate(args) -> None:
    records = load_annotations(args.annotations)
    resolutions = load_resolutions(args.resolutions) if args.resolutions else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gold = adjudicate_all(records, resolutions)
    for w in caught:
        log.warning("%s", w.message)
    write_gold(gold, args.out)
    unresolved = sum(not g.resolved for g in gold)
    log.info("adjudicated %d spans (%d unresolved)", len(gold), unresolved)


def _preprocess_config(args) -> PreprocessConfig:
    stopwords = read_stopwords(args.stopwords) if args.stopwords else default_stopwords()
    exceptions = read_lemma_exceptions(args.lemma_exceptions) if args.lemma_exceptions else default_lemma_exceptions()
    return PreprocessConfig(stopwords=stopwords, lemma_exceptions=exceptions)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(model=args.model, lam=args.lam, epochs=args.epochs, knn_k=args.knn_k,
                          preprocess=_preprocess_config(args))


def _examples(args) -> tuple[list[LabeledSpan], dict | None]:
    gold = [g for g in load_gold(args.gold) if g.resolved]
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None
    if args.model == "dense" and embeddings is None:
        raise PainClfError("--model dense requires --embeddings")
    if args.spans:
        texts = {s.span_id: s.text for s in load_spans(args.spans)}
    elif args.model in ("dense", "baseline"):
        texts = {}
    else:
        raise PainClfError(f"--model {args.model} requires --spans")
    missing = [g.span_id for g in gold if texts and g.span_id not in texts]
    if missing:
        raise CorpusError(f"{args.gold}: {len(missing)} gold span_ids are not in the span file, e.g. {missing[0]!r}")
    if not gold:
        raise PainClfError(f"{args.gold}: no resolved gold spans")
    return [LabeledSpan(g.span_id, texts.get(g.span_id, ""), g.label2) for g in gold], embeddings


def cmd_train(args) -> None:
    examples, embeddings = _examples(args)
    clf = fit_pipeline(_pipeline_config(args), examples, args.seed, embeddings)
    persist_model(clf, args.out)
    log.info("trained %s on %d spans -> %s", args.model, len(examples), args.out)


def cmd_cv(args) -> None:
    examples, embeddings = _examples(args)
    config = _pipeline_config(args)
    result = kfold_cv(config, examples, args.k, args.seed, embeddings)
    version = load_lexicon(args.lexicon).version if args.lexicon else None
    report = metrics_report(result, config, version)
    report["n_examples"] = len(examples)
    _write_text(args.out, dumps_report(report))


def cmd_evaluate(args) -> None:
    examples, embeddings = _examples(args)
    report = holdout_evaluate(_pipeline_config(args), examples, args.seed, embeddings=embeddings)
    _write_text(args.out, dumps_report(report))


def cmd_predict(args) -> None:
    clf = load_model(args.model_file)
    if not isinstance(clf, TextClassifier):
        raise PainClfError(f"{args.model_file}: holds a bare model without its feature pipeline")
    spans = load_spans(args.spans)
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None
    preds = clf.predict([s.span_id for s in spans], [s.text for s in spans], embeddings)
    write_predictions(preds, args.out)


def cmd_error_report(args) -> None:
    preds = load_predictions(args.predictions)
    gold = {g.span_id: g.label2 for g in load_gold(args.gold) if g.resolved}
    spans = {s.span_id: s for s in load_spans(args.spans)}
    report = error_report(preds, gold, spans)
    _write_text(args.out, dumps_report(report.to_dict()))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODEL_KINDS, default="svm")
    p.add_argument("--spans", help="span file with the texts to featurise")
    p.add_argument("--gold", required=True, help="adjudicated gold file")
    p.add_argument("--embeddings", help="embedding file for --model dense")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=DEFAULT_K)
    p.add_argument("--stopwords", help="stopword file (default: bundled English list)")
    p.add_argument("--lemma-exceptions", dest="lemma_exceptions", help="form<TAB>lemma file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="painclf", description="Pain-mention classification pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic annotated corpus")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--patients", type=int)
    p.add_argument("--spans", type=int, help="total planted mentions (default: patients x 8)")
    p.add_argument("--noise", default="0.05", help="annotator flip probability, or three comma-separated values")
    p.add_argument("--class-noise", dest="class_noise",
                   help="per-class flip probabilities relevant,not_relevant,negated (overrides --noise)")
    p.add_argument("--label-mix", dest="label_mix", default="0.72,0.15,0.13",
                   help="relevant,not_relevant,negated fractions")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (("filter", cmd_filter, "keep documents with at least one lexicon match"),
                                 ("extract-spans", cmd_extract, "write candidate spans around lexicon matches")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--lexicon", help="lexicon file (default: bundled lexicon)")
        p.add_argument("--corpus", required=True)
        p.add_argument("--match-mode", dest="match_mode", choices=sorted(MATCH_MODES), default="word")
        if name == "extract-spans":
            p.add_argument("--window", type=int, default=200)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("agreement", parents=[common], help="pairwise agreement and kappa gate per round")
    p.add_argument("--annotations", required=True)
    p.add_argument("--threshold", type=float, default=0.80)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("adjudicate", parents=[common], help="majority-vote gold labels")
    p.add_argument("--annotations", required=True)
    p.add_argument("--resolutions", help="{span_id, label} file for spans without a majority")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("train", parents=[common], help="fit a classifier on gold spans and save it")
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", parents=[common], help="stratified k-fold cross-validation report")
    _add_model_flags(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--lexicon", help="lexicon file, recorded by version in the report")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("evaluate", parents=[common], help="train/test/validation split evaluation (80/10/10)")
    _add_model_flags(p)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="apply a saved model to a span file")
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("error-report", parents=[common], help="list false positives and false negatives")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_error_report)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except CorpusError as exc:
        where = f"{exc.path}: " if exc.path else ""
        print(f"painclf: error: {where}{exc}", file=sys.stderr)
        return 1
    except (PainClfError, OSError, ValueError) as exc:
        print(f"painclf: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
