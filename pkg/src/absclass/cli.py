"""Command-line surface: ingest, vocab, schema, train, evaluate, classify,
merge, and gradcheck subcommands over one JSON config file."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, features, hierarchy, net, train as train_mod
from .embed import OovReport, featurize_documents, load_embedding_table, vocab_overlap

CONFIG_DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "stopwords": None,
    "lemma_map": None,
    "min_words": 10,
    "d": 80,
    "cell": "gru",
    "bidirectional": True,
    "layers": 2,
    "hidden": 128,
    "attention": True,
    "learning_rate": 1e-3,
    "batch_size": 128,
    "epochs": 10,
    "dropout": 0.2,
    "per_class_cap": 150_000,
    "train_fraction": 0.9,
    "threshold": None,
    "others": hierarchy.DEFAULT_OTHERS,
    "figures": True,
}


class CliError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CliError(f"config {path} must hold a JSON object")
    unknown = set(data) - set(CONFIG_DEFAULTS)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return data


def _effective_config(args: argparse.Namespace) -> dict:
    """Defaults, then env seed, then config file values, then explicit flags."""
    effective = dict(CONFIG_DEFAULTS)
    env_seed = os.environ.get("ABSCLASS_SEED")
    if env_seed is not None:
        try:
            effective["seed"] = int(env_seed)
        except ValueError:
            raise CliError(f"ABSCLASS_SEED must be an integer, got {env_seed!r}") from None
    effective.update(_load_config_file(getattr(args, "config", None)))
    for key in CONFIG_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            effective[key] = value
    return effective


class ArtifactSet:
    """Tracks files written by a command so failures leave no partial output."""

    def __init__(self):
        self.paths: list[str] = []

    def add(self, path: str) -> str:
        self.paths.append(path)
        return path

    def discard_all(self):
        for path in self.paths:
            try:
                os.remove(path)
            except OSError:
                pass


def _write_json(payload: dict, path: str, artifacts: ArtifactSet) -> None:
    artifacts.add(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def _write_effective_config(effective: dict, out_dir: str, artifacts: ArtifactSet) -> None:
    _write_json(effective, os.path.join(out_dir, "effective_config.json"), artifacts)


def _preprocess_config(effective: dict, min_words: int | None = None) -> corpus_mod.PreprocessConfig:
    stopwords = (
        corpus_mod.load_stopwords(effective["stopwords"])
        if effective["stopwords"]
        else corpus_mod.default_stopwords()
    )
    lemma_map = (
        corpus_mod.load_lemma_map(effective["lemma_map"]) if effective["lemma_map"] else {}
    )
    return corpus_mod.PreprocessConfig(
        stopword_set=stopwords,
        lemma_map=lemma_map,
        min_words=effective["min_words"] if min_words is None else min_words,
    )


def _train_config(effective: dict) -> train_mod.TrainConfig:
    return train_mod.TrainConfig(
        learning_rate=effective["learning_rate"],
        batch_size=effective["batch_size"],
        epochs=effective["epochs"],
        dropout_rate=effective["dropout"],
        per_class_cap=effective["per_class_cap"],
        train_fraction=effective["train_fraction"],
        seed=effective["seed"],
    )


def _model_spec(effective: dict) -> train_mod.ModelSpec:
    return train_mod.ModelSpec(
        cell_kind=effective["cell"],
        hidden_dim=effective["hidden"],
        num_layers=effective["layers"],
        bidirectional=effective["bidirectional"],
        attention=effective["attention"],
        d=effective["d"],
    )


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args, effective, artifacts) -> int:
    cfg = _preprocess_config(effective)
    docs, report = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=not args.unlabeled, workers=effective["workers"]
    )
    artifacts.add(args.out)
    corpus_mod.write_corpus(docs, args.out)
    payload = report.as_dict()
    payload["config"] = effective
    report_path = args.report or args.out + ".report.json"
    _write_json(payload, report_path, artifacts)
    if effective["figures"] and docs and docs[0].label is not None:
        from . import plots

        counts = corpus_mod.label_counts([d for d in docs if d.label is not None])
        artifacts.add(
            plots.save_label_distribution(
                counts, os.path.splitext(args.out)[0] + "_labels.png", "Ingested label counts"
            )
        )
    print(f"kept {report.kept}/{report.input_lines} records -> {args.out}")
    return 0


def cmd_vocab(args, effective, artifacts) -> int:
    cfg = _preprocess_config(effective)
    docs, _ = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=False, workers=effective["workers"]
    )
    if not docs:
        raise CliError(f"no usable documents in {args.corpus}")
    table = features.build_idf(docs)
    artifacts.add(args.out)
    features.save_idf(table, args.out)
    payload: dict = {
        "documents": table.doc_count,
        "vocabulary": len(table.idf),
        "config": effective,
    }
    if args.embeddings:
        emb = load_embedding_table(args.embeddings)
        vocab = set(table.idf)
        payload["embedding_source"] = args.embeddings
        payload["embedding_dim"] = emb.dim
        payload["embedding_duplicates"] = emb.duplicate_count
        payload["vocab_overlap"] = vocab_overlap(vocab, emb)
    report_path = args.report or args.out + ".report.json"
    _write_json(payload, report_path, artifacts)
    print(f"IDF table over {len(table.idf)} words from {table.doc_count} documents -> {args.out}")
    if "vocab_overlap" in payload:
        print(f"embedding vocabulary overlap: {payload['vocab_overlap']:.1%}")
    return 0


def cmd_schema(args, effective, artifacts) -> int:
    if effective["threshold"] is None:
        raise CliError("schema needs --threshold (or a config value)")
    cfg = _preprocess_config(effective)
    docs, _ = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=True, workers=effective["workers"]
    )
    counts = corpus_mod.label_counts(docs)
    schema = hierarchy.build_two_level_schema(
        counts, effective["threshold"], others_sentinel=effective["others"]
    )
    artifacts.add(args.out)
    hierarchy.save_schema(schema, args.out)
    _write_json(
        {"label_counts": counts, "majors": len(schema.majors), "minors": len(schema.minors),
         "imbalance_ratio": hierarchy.imbalance_ratio(counts) if len(counts) > 1 else 1.0,
         "config": effective},
        args.out + ".report.json",
        artifacts,
    )
    print(
        f"schema: {len(schema.majors)} majors, {len(schema.minors)} minors "
        f"(level-1 classes: {len(schema.level1_classes)}) -> {args.out}"
    )
    return 0


def _load_artifacts_for_model(args):
    idf = features.load_idf(args.idf)
    table = load_embedding_table(args.embeddings)
    return idf, table


def cmd_train(args, effective, artifacts) -> int:
    out_dir = _ensure_dir(args.out_dir)
    cfg = _preprocess_config(effective)
    docs, ingest_report = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=True, workers=effective["workers"]
    )
    if not docs:
        raise CliError(f"no trainable documents in {args.corpus}")
    idf, table = _load_artifacts_for_model(args)
    tcfg = _train_config(effective)
    spec = _model_spec(effective)
    idf_hash = train_mod.file_sha256(args.idf)
    _write_effective_config(effective, out_dir, artifacts)

    schema = hierarchy.load_schema(args.schema) if args.schema else None
    rng = np.random.default_rng(tcfg.seed)
    sampling: dict = {"ingest": ingest_report.as_dict()}

    def run_level(level_docs, label_names, tag):
        present = {d.label for d in level_docs}
        missing = [l for l in label_names if l not in present]
        if missing:
            raise CliError(f"{tag}: labels with zero documents: {missing}")
        train_set, test_set, report = train_mod.sample_training_set(level_docs, tcfg, rng)
        sampling[tag] = report
        result = train_mod.train_model(train_set, test_set, label_names, idf, table, tcfg, spec)
        ckpt = os.path.join(out_dir, f"{tag}.ckpt")
        artifacts.add(ckpt)
        train_mod.save_checkpoint(
            result.model, ckpt, d=spec.d, embedding_dim=table.dim,
            embedding_source=args.embeddings, idf_hash=idf_hash, config=effective,
        )
        log_path = os.path.join(out_dir, f"{tag}_log.jsonl")
        artifacts.add(log_path)
        train_mod.write_epoch_log(result.logs, log_path)
        if effective["figures"] and result.logs:
            from . import plots

            artifacts.add(
                plots.save_training_curves(result.logs, os.path.join(out_dir, f"{tag}_curves.png"))
            )
        last = result.logs[-1] if result.logs else None
        if last:
            print(
                f"{tag}: {len(train_set)} train / {len(test_set)} test docs, "
                f"{tcfg.epochs} epochs, final loss {last.mean_loss:.4f}, "
                f"test micro-F1 {last.test_micro_f1:.4f}"
            )
        print(f"{tag}: checkpoint -> {ckpt}")

    if schema is not None and schema.minors:
        known = set(schema.all_labels())
        bad = sorted({d.label for d in docs} - known)
        if bad:
            raise CliError(f"corpus labels missing from the schema: {bad}")
        run_level(hierarchy.relabel_for_level1(docs, schema), schema.level1_classes, "level1")
        run_level(hierarchy.minor_subset(docs, schema), schema.minors, "level2")
    else:
        label_names = sorted({d.label for d in docs})
        run_level(docs, label_names, "level1")
    _write_json(sampling, os.path.join(out_dir, "sampling_report.json"), artifacts)
    return 0


def _load_models(args):
    level1, header1 = train_mod.load_checkpoint(args.checkpoint)
    level2 = None
    if getattr(args, "level2", None):
        level2, header2 = train_mod.load_checkpoint(args.level2)
        if header2["embedding_dim"] != header1["embedding_dim"]:
            raise CliError("level-1 and level-2 checkpoints disagree on embedding dim")
    return level1, level2, header1


def _schema_for_predict(args, level1, level2):
    schema = hierarchy.load_schema(args.schema) if getattr(args, "schema", None) else None
    if level2 is not None and schema is None:
        raise CliError("--level2 needs --schema to define the routing")
    return schema


def _predict_labels(docs, idf, table, header, level1, level2, schema):
    X, mask, oov = featurize_documents(docs, idf, table, header["d"])
    if schema is not None and schema.minors:
        labels, probs = hierarchy.route_predict(X, mask, level1, level2, schema)
    else:
        preds, probs = train_mod.predict_indices(level1, X, mask)
        labels = [level1.label_names[k] for k in preds]
    return labels, probs, oov


def cmd_evaluate(args, effective, artifacts) -> int:
    out_dir = _ensure_dir(args.out_dir)
    cfg = _preprocess_config(effective)
    docs, _ = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=True, workers=effective["workers"]
    )
    if not docs:
        raise CliError(f"no evaluable documents in {args.corpus}")
    idf, table = _load_artifacts_for_model(args)
    level1, level2, header = _load_models(args)
    train_mod.validate_embedding(header, table)
    schema = _schema_for_predict(args, level1, level2)
    labels, _, oov = _predict_labels(docs, idf, table, header, level1, level2, schema)
    truths = [d.label for d in docs]
    classes = schema.all_labels() if schema is not None and schema.minors else level1.label_names
    report = evaluation.score_predictions(truths, labels, classes)
    _write_effective_config(effective, out_dir, artifacts)
    report_path = os.path.join(out_dir, "report.json")
    artifacts.add(report_path)
    evaluation.write_report_json(report, report_path, extra={"oov": oov.as_dict(), "config": effective})
    csv_path = os.path.join(out_dir, "confusion.csv")
    artifacts.add(csv_path)
    evaluation.write_confusion_csv(report, csv_path)
    if effective["figures"]:
        from . import plots

        artifacts.add(plots.save_confusion_heatmap(report, os.path.join(out_dir, "confusion_matrix.png")))
        artifacts.add(plots.save_f1_bars(report, os.path.join(out_dir, "f1_per_class.png")))
    print(
        f"evaluated {len(docs)} documents: micro-F1 {report.micro_f1:.4f}, "
        f"macro-F1 {report.macro_f1:.4f}, median F1 {report.median_f1:.4f}"
    )
    print(f"report -> {report_path}")
    return 0


def cmd_classify(args, effective, artifacts) -> int:
    cfg = _preprocess_config(effective, min_words=1)
    docs, ingest_report = corpus_mod.ingest_for_inference(
        args.corpus, cfg, workers=effective["workers"]
    )
    idf, table = _load_artifacts_for_model(args)
    level1, level2, header = _load_models(args)
    train_mod.validate_embedding(header, table)
    schema = _schema_for_predict(args, level1, level2)
    usable = [d for d in docs if d.tokens]
    empty = [d for d in docs if not d.tokens]
    started = time.perf_counter()
    if usable:
        labels, probs, oov = _predict_labels(usable, idf, table, header, level1, level2, schema)
    else:
        labels, probs, oov = [], np.zeros(0), OovReport()
    elapsed = time.perf_counter() - started
    results = iter(zip(labels, probs))
    artifacts.add(args.out)
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in docs:
            if doc.tokens:
                label, p = next(results)
                fh.write(json.dumps({"id": doc.id, "label": label,
                                     "probability": float(p)}) + "\n")
            else:
                fh.write(json.dumps({"id": doc.id, "label": None, "probability": 0.0,
                                     "error": "empty_abstract"}) + "\n")
    histogram: dict[str, int] = {}
    for label in labels:
        histogram[label] = histogram.get(label, 0) + 1
    throughput = len(usable) / elapsed if elapsed > 0 else float("inf")
    payload = {
        "inputs": ingest_report.input_lines,
        "classified": len(usable),
        "empty_abstracts": len(empty),
        "seconds": elapsed,
        "abstracts_per_second": throughput,
        "oov": oov.as_dict(),
        "label_histogram": histogram,
        "config": effective,
    }
    _write_json(payload, args.out + ".report.json", artifacts)
    if effective["figures"] and histogram:
        from . import plots

        artifacts.add(
            plots.save_label_distribution(
                histogram, os.path.splitext(args.out)[0] + "_labels.png", "Predicted label counts"
            )
        )
    print(f"classified {len(usable)} abstracts in {elapsed:.2f}s "
          f"({throughput:.0f} abstracts/s) -> {args.out}")
    return 0


def cmd_merge(args, effective, artifacts) -> int:
    cfg = _preprocess_config(effective)
    docs, _ = corpus_mod.ingest_corpus(
        args.corpus, cfg, require_label=True, workers=effective["workers"]
    )
    with open(args.merge_map, encoding="utf-8") as fh:
        merge_map = json.load(fh)
    if not isinstance(merge_map, dict):
        raise CliError(f"{args.merge_map} must hold a JSON object of old->new labels")
    merged = hierarchy.merge_categories(docs, merge_map, others_sentinel=effective["others"])
    artifacts.add(args.out)
    corpus_mod.write_corpus(merged, args.out)
    before = corpus_mod.label_counts(docs)
    after = corpus_mod.label_counts(merged)
    _write_json(
        {"labels_before": len(before), "labels_after": len(after),
         "counts_after": after, "config": effective},
        args.out + ".report.json",
        artifacts,
    )
    print(f"merged {len(before)} labels into {len(after)} -> {args.out}")
    return 0


def cmd_gradcheck(args, effective, artifacts) -> int:
    rng = np.random.default_rng(effective["seed"])
    cells = ["lstm", "gru"] if args.cell == "both" else [args.cell]
    tol = args.tolerance
    results = []
    all_pass = True
    for cell in cells:
        for bidirectional in (False, True):
            for attention in (False, True):
                model, fseq, true_class, grads = net.well_conditioned_case(
                    cell, bidirectional, attention, rng
                )
                report = net.gradient_check(model, fseq, true_class, tol=tol, grads=grads)
                results.append(
                    {"cell": cell, "bidirectional": bidirectional, "attention": attention,
                     "worst_tensor": report.worst_tensor, "worst_error": report.worst_error,
                     "passed": report.passed}
                )
                all_pass &= report.passed
                status = "ok" if report.passed else "FAIL"
                print(
                    f"[{status}] {cell} bidir={bidirectional} attn={attention} "
                    f"worst {report.worst_error:.2e} on {report.worst_tensor}"
                )
    if args.out:
        _write_json({"passed": all_pass, "tolerance": tol, "checks": results,
                     "config": effective}, args.out, artifacts)
    return 0 if all_pass else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--stopwords", default=None, help="stopword list, one word per line")
    parser.add_argument("--lemma-map", dest="lemma_map", default=None,
                        help="token->lemma dictionary, one pair per line")
    parser.add_argument("--min-words", dest="min_words", type=int, default=None)
    parser.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                        help="render companion PNG figures (default on)")


def _add_model_flags(parser):
    parser.add_argument("--d", type=int, default=None, help="word types kept per abstract")
    parser.add_argument("--cell", choices=["lstm", "gru"], default=None)
    parser.add_argument("--bidirectional", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--layers", type=int, default=None)
    parser.add_argument("--hidden", type=int, default=None)
    parser.add_argument("--attention", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="absclass",
        description="Classify scholarly abstracts into subject categories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="preprocess a JSONL corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--unlabeled", action="store_true", help="do not require the label field")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("vocab", help="build the IDF table")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None, help="also report vocabulary overlap")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("schema", help="build the two-level label schema")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--others", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("train", help="train the classifier (both levels if the schema has minors)")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--idf", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--per-class-cap", dest="per_class_cap", type=int, default=None)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score checkpoints against a labeled corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--idf", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True, help="level-1 (or flat) checkpoint")
    p.add_argument("--level2", default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="label an unlabeled JSONL corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--idf", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--level2", default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("merge", help="relabel a corpus through a merge map")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--merge-map", dest="merge_map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("gradcheck", help="finite-difference check of the hand-derived gradients")
    _add_common(p)
    p.add_argument("--cell", choices=["lstm", "gru", "both"], default="both")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    artifacts = ArtifactSet()
    try:
        effective = _effective_config(args)
        return args.func(args, effective, artifacts)
    except (CliError, ValueError, OSError) as exc:
        artifacts.discard_all()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        artifacts.discard_all()
        raise


if __name__ == "__main__":
    sys.exit(main())
