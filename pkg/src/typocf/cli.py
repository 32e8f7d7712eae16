"""Command-line interface for the full pipeline.

Every subcommand exits 0 on success; any failure prints one
machine-readable line to stderr of the form

    error<TAB>ExceptionType<TAB>message

and exits nonzero. Subcommands with many knobs (train, experiment,
embed-train) accept --config FILE holding plain `key = value` lines; keys
are the flag names with dashes as underscores, and explicit command-line
flags override the file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import analysis, baselines, charlm, embeddings, evaluation
from . import factorization as mf
from . import harness, kb as kb_mod, splits
from .binarize import binarize as binarize_kb, dump_matrix
from .errors import IntegrityError, ParseError, TypoCFError


def parse_config_file(path) -> dict[str, str]:
    """Read `key = value` lines; blank lines and #-comments are ignored."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(raw: str, like):
    """Convert a config-file string to the type of its default value."""
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        if not raw:
            return ()
        items = [item.strip() for item in raw.split(",")]
        if like and isinstance(like[0], float):
            return tuple(float(x) for x in items)
        return tuple(items)
    return raw


def merge_options(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags (argparse.SUPPRESS defaults)."""
    merged = dict(defaults)
    given = vars(args)
    config_path = given.get("config")
    if config_path:
        raw = parse_config_file(config_path)
        for key, value in raw.items():
            if key not in defaults:
                raise ParseError(f"{config_path}: unknown config key {key!r}")
            merged[key] = _coerce(value, defaults[key])
    for key in defaults:
        if key in given:
            merged[key] = given[key]
    return merged


def _load_kb(path):
    return kb_mod.load_long(path)


def _write_predictions(predictions: dict, path) -> None:
    lines = ["\t".join(("language_id", "feature_id", "value_id"))]
    for (lid, fid), vid in sorted(predictions.items()):
        lines.append(f"{lid}\t{fid}\t{vid}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_predictions(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].split("\t") != ["language_id", "feature_id", "value_id"]:
        raise ParseError(f"{path}: bad predictions header")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 fields")
        out[(parts[0], parts[1])] = int(parts[2])
    return out


_MF_DEFAULTS = {
    field.name: field.default
    for field in dataclass_fields(mf.TrainConfig)
}

_LM_DEFAULTS = {
    field.name: field.default
    for field in dataclass_fields(charlm.CharLMConfig)
}


def _add_mf_flags(parser):
    parser.add_argument("--config", help="key = value file with training options")
    parser.add_argument("--d", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--l2-weight", dest="l2_weight", type=float)
    parser.add_argument("--beta1", type=float)
    parser.add_argument("--beta2", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mode", choices=mf.MODES)
    parser.add_argument("--regularize", choices=(mf.REG_BOTH, mf.REG_LANGUAGES))
    parser.add_argument("--use-bias", dest="use_bias", action="store_true")
    parser.add_argument("--optimizer", choices=("adam", "sgd"))
    parser.add_argument("--init-scale", dest="init_scale", type=float)


def _mf_config(args) -> mf.TrainConfig:
    merged = merge_options(args, _MF_DEFAULTS)
    return mf.TrainConfig(**merged)


def cmd_ingest(args) -> int:
    if args.wide:
        kb = kb_mod.load_wals_wide(args.wide, args.areas)
    else:
        kb = kb_mod.load_long(args.long)
    problems = kb_mod.validate_kb(kb)
    if problems:
        raise TypoCFError(f"KB fails validation: {problems[0]} (+{len(problems) - 1} more)")
    kb_mod.save_long(kb, args.out)
    print(f"languages\t{len(kb.languages)}")
    print(f"features\t{len(kb.features)}")
    print(f"cells\t{kb.n_cells()}")
    return 0


def cmd_filter(args) -> int:
    kb = _load_kb(args.kb)
    filtered = kb_mod.filter_kb(
        kb,
        min_value_count=args.min_value_count,
        min_features_per_language=args.min_features_per_language,
        min_branch_size=args.min_branch_size,
    )
    kb_mod.save_long(filtered, args.out)
    print(f"languages\t{len(filtered.languages)}")
    print(f"features\t{len(filtered.features)}")
    print(f"cells\t{filtered.n_cells()}")
    return 0


def cmd_binarize(args) -> int:
    matrix = binarize_kb(_load_kb(args.kb))
    dump_matrix(matrix, args.out)
    print(f"languages\t{matrix.n_languages}")
    print(f"columns\t{matrix.n_columns}")
    return 0


def cmd_split(args) -> int:
    kb = _load_kb(args.kb)
    spec = splits.SplitSpec(
        held_out_branch=args.branch,
        eval_fraction=args.eval_fraction,
        in_branch_fraction=args.fraction,
        seed=args.seed,
    )
    split = splits.make_branch_split(kb, spec)
    splits.save_split(split, args.out)
    print(f"train_pairs\t{len(split.train_pairs)}")
    print(f"eval_pairs\t{len(split.eval_pairs)}")
    return 0


def cmd_train(args) -> int:
    kb = _load_kb(args.kb)
    matrix = binarize_kb(kb)
    split = splits.load_split(args.split)
    config = _mf_config(args)
    external = embeddings.import_table(args.embeddings) if args.embeddings else None
    params, trace = mf.train(matrix, split.train_pairs, config, external)
    mf.save_model(params, args.out)
    if args.trace:
        lines = ["epoch\tloss"] + [f"{i}\t{repr(x)}" for i, x in enumerate(trace)]
        Path(args.trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
    final = f"{trace[-1]:.6f}" if trace else "NA"
    print(f"epochs\t{len(trace)}")
    print(f"final_loss\t{final}")
    return 0


def cmd_predict(args) -> int:
    kb = _load_kb(args.kb)
    matrix = binarize_kb(kb)
    params = mf.load_model(args.model)
    if (tuple(params.language_ids) != matrix.language_ids
            or tuple(params.column_labels) != matrix.column_labels):
        raise IntegrityError("model was trained on a different KB layout")
    probs = mf.predict_matrix(params)
    if args.split:
        split = splits.load_split(args.split)
        predictions = {
            pair: evaluation.decode_argmax(probs, matrix, *pair)
            for pair in split.eval_pairs
        }
        _write_predictions(predictions, args.out)
        print(f"predictions\t{len(predictions)}")
    else:
        if not (args.language and args.feature):
            raise TypoCFError("give --split or both --language and --feature")
        value = evaluation.decode_argmax(probs, matrix, args.language, args.feature)
        print(f"{args.language}\t{args.feature}\t{value}")
    return 0


def cmd_evaluate(args) -> int:
    kb = _load_kb(args.kb)
    split = splits.load_split(args.split)
    predictions = _read_predictions(args.predictions)
    gold = {pair: kb.value_of(*pair) for pair in split.eval_pairs}
    report = evaluation.score(predictions, gold, kb)
    Path(args.out).write_text(evaluation.report_to_tsv(report), encoding="utf-8")
    print(f"micro_f1\t{report.micro_f1:.6f}")
    print(f"accuracy\t{report.accuracy:.6f}")
    return 0


def cmd_baseline(args) -> int:
    kb = _load_kb(args.kb)
    split = splits.load_split(args.split)
    if args.system == "freq":
        model = baselines.FrequencyBaseline().fit(kb, split.train_pairs)
    else:
        if not args.embeddings:
            raise TypoCFError("knn baseline needs --embeddings")
        table = embeddings.import_table(args.embeddings)
        model = baselines.NearestNeighborBaseline(k=args.k).fit(
            table, kb, split.train_pairs
        )
    predictions = harness._predict_cellwise(model, split.eval_pairs)
    _write_predictions(predictions, args.out)
    print(f"predictions\t{len(predictions)}")
    return 0


_PLAN_DEFAULTS = {
    "branches": (),
    "fractions": (0.0, 0.01, 0.05, 0.10, 0.20),
    "repeats": 5,
    "systems": harness.SYSTEMS,
    "eval_fraction": 0.8,
    "base_seed": 0,
    "workers": 1,
}


def cmd_experiment(args) -> int:
    kb = _load_kb(args.kb)
    plan_opts = merge_options(args, {**_PLAN_DEFAULTS, **_MF_DEFAULTS})
    plan = harness.ExperimentPlan(
        branches=tuple(plan_opts["branches"]),
        fractions=tuple(plan_opts["fractions"]),
        repeats=plan_opts["repeats"],
        systems=tuple(plan_opts["systems"]),
        eval_fraction=plan_opts["eval_fraction"],
        base_seed=plan_opts["base_seed"],
    )
    config = mf.TrainConfig(**{k: plan_opts[k] for k in _MF_DEFAULTS})
    table = embeddings.import_table(args.embeddings) if args.embeddings else None
    records = harness.run_plan(
        kb, plan, config, table, workers=plan_opts["workers"]
    )
    harness.write_records(records, args.out, include_timing=args.include_timing)
    n_err = sum(1 for r in records if r.status != "ok")
    print(f"runs\t{len(records)}")
    print(f"failed\t{n_err}")
    return 0


def cmd_summarize(args) -> int:
    records = harness.read_records(args.records)
    tables = harness.summarize(records)
    for name, text in tables.items():
        Path(f"{args.out_prefix}.{name}.tsv").write_text(text, encoding="utf-8")
        print(f"written\t{args.out_prefix}.{name}.tsv")
    return 0


def cmd_embed_train(args) -> int:
    corpus = charlm.load_corpus_dir(args.corpus)
    merged = merge_options(args, _LM_DEFAULTS)
    config = charlm.CharLMConfig(**merged)
    table, trace = charlm.train_char_lm(corpus, config)
    embeddings.export_table(table, args.out)
    if args.trace:
        lines = ["epoch\tdev_perplexity"] + [f"{i}\t{repr(x)}" for i, x in enumerate(trace)]
        Path(args.trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"languages\t{len(table.vectors)}")
    print(f"epochs\t{len(trace)}")
    print(f"best_dev_perplexity\t{min(trace):.4f}")
    return 0


def cmd_embed_import(args) -> int:
    table = embeddings.import_table(args.table)
    embeddings.export_table(table, args.out)
    print(f"languages\t{len(table.vectors)}")
    print(f"dim\t{table.dim}")
    return 0


def cmd_export_correlations(args) -> int:
    kb = _load_kb(args.kb)
    matrix = binarize_kb(kb)
    labels = []
    if args.columns:
        labels += [c.strip() for c in args.columns.split(",") if c.strip()]
    if args.features:
        for fid in (f.strip() for f in args.features.split(",")):
            if not fid:
                continue
            group = matrix.group(fid)
            labels += [matrix.column_labels[ci] for ci in group.columns]
    if not labels:
        raise TypoCFError("give --columns and/or --features")
    corr = analysis.correlations(matrix, labels)
    analysis.export_correlations(corr, args.out)
    print(f"columns\t{len(labels)}")
    return 0


def cmd_export_distributions(args) -> int:
    kb = _load_kb(args.kb)
    rows = analysis.value_distributions(kb, genus=args.genus, family=args.family)
    analysis.export_distributions(rows, args.out)
    print(f"rows\t{len(rows)}")
    return 0


def cmd_gradcheck(args) -> int:
    failed = False
    if args.which in ("mf", "all"):
        err = mf.mf_grad_check(trials=args.trials, seed=args.seed)
        ok = err < 1e-5
        failed |= not ok
        print(f"mf\t{err:.3e}\t{'ok' if ok else 'FAIL'}")
    if args.which in ("lm", "all"):
        err = charlm.lm_grad_check(seed=args.seed)
        ok = err < 1e-4
        failed |= not ok
        print(f"lm\t{err:.3e}\t{'ok' if ok else 'FAIL'}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typocf",
        description="Typological KB completion by logistic matrix factorization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parser.set_defaults(**{})

    p = sub.add_parser("ingest", help="read a wide CSV or long TSV, write canonical long TSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--wide", help="wide WALS-style CSV export")
    group.add_argument("--long", help="canonical long TSV")
    p.add_argument("--areas", help="feature_id<TAB>area mapping file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter", help="apply the sparsity filter")
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-value-count", type=int, default=10)
    p.add_argument("--min-features-per-language", type=int, default=10)
    p.add_argument("--min-branch-size", type=int, default=4)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("binarize", help="dump the binary matrix as auditable TSV")
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("split", help="make a branch-held-out split")
    p.add_argument("--kb", required=True)
    p.add_argument("--branch", required=True)
    p.add_argument("--eval-fraction", dest="eval_fraction", type=float, default=0.8)
    p.add_argument("--fraction", type=float, default=0.0,
                   help="in-branch fraction fed back to training")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the factorization model",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--kb", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None, help="external table for the external modes")
    p.add_argument("--trace", default=None, help="write per-epoch loss TSV here")
    _add_mf_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode values from a trained model")
    p.add_argument("--kb", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", help="predict every eval pair of this split")
    p.add_argument("--language")
    p.add_argument("--feature")
    p.add_argument("--out", help="predictions TSV (with --split)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against a split's eval pairs")
    p.add_argument("--kb", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="run the freq or knn baseline over a split")
    p.add_argument("--system", choices=("freq", "knn"), required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("experiment", help="run the full grid",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--kb", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--include-timing", dest="include_timing",
                   action="store_true", default=False)
    p.add_argument("--branches", type=lambda s: tuple(x for x in s.split(",") if x))
    p.add_argument("--fractions", type=lambda s: tuple(float(x) for x in s.split(",")))
    p.add_argument("--repeats", type=int)
    p.add_argument("--systems", type=lambda s: tuple(x for x in s.split(",") if x))
    p.add_argument("--eval-fraction", dest="eval_fraction", type=float)
    p.add_argument("--base-seed", dest="base_seed", type=int)
    p.add_argument("--workers", type=int)
    _add_mf_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("summarize", help="aggregate a records file into tables")
    p.add_argument("--records", required=True)
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("embed-train", help="train the character LM, export language embeddings",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--corpus", required=True, help="directory of <language_id>.txt streams")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--config")
    p.add_argument("--char-dim", dest="char_dim", type=int)
    p.add_argument("--lang-dim", dest="lang_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--bptt", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--dev-fraction", dest="dev_fraction", type=float)
    p.add_argument("--max-alphabet", dest="max_alphabet", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_embed_train)

    p = sub.add_parser("embed-import", help="validate and canonicalize an embedding table")
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_import)

    p = sub.add_parser("export-correlations", help="pairwise-complete correlations between columns")
    p.add_argument("--kb", required=True)
    p.add_argument("--columns", help="comma-separated column labels like 81A:2")
    p.add_argument("--features", help="comma-separated feature ids; expands to all their columns")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_correlations)

    p = sub.add_parser("export-distributions", help="value distribution inside a branch or family")
    p.add_argument("--kb", required=True)
    p.add_argument("--genus")
    p.add_argument("--family")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_distributions)

    p = sub.add_parser("gradcheck", help="finite-difference check of both gradient paths")
    p.add_argument("--which", choices=("mf", "lm", "all"), default="all")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error\t{type(exc).__name__}\t{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
