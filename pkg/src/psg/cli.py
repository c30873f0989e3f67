"""Command-line operator surface.

Subcommands: ingest, fetch, stats, split, train, eval, sweep, predict,
roc.  Every run can take --config <file> with key=value lines (CLI flags
win over file values), and every command that writes files also writes a
resolved-config snapshot sufficient to reproduce the run, seeds included.

Exit codes: 1 usage, 2 data, 3 network.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import corpus, fetch, metrics, model, text
from .errors import DataError, NetworkError, PsgError

REPORT_JSON = "report.json"
RUN_META_JSON = "run_meta.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """key=value lines; blank lines and '#' comments ignored."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path} line {line_no}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _config_to_argv(values: dict[str, str]) -> list[str]:
    argv: list[str] = []
    for key, value in values.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            argv.append(flag if value.lower() == "true" else "--no-" + flag[2:])
        else:
            argv.extend([flag, value])
    return argv


_DEST_TO_KEY = {"lam": "lambda"}  # dest names whose flag spelling differs


def write_snapshot(directory: Path, command: str, args: argparse.Namespace) -> None:
    """Reproduction recipe: <command>.resolved_config.txt in the output
    directory, in the same key=value format --config accepts, so feeding
    it back via --config replays the run."""
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"command={command}"]
    for key in sorted(vars(args)):
        if key in ("func", "config", "command"):
            continue
        value = getattr(args, key)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{_DEST_TO_KEY.get(key, key)}={value}")
    path = directory / f"{command}.resolved_config.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def file_fingerprint(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_duration(value: str) -> float:
    return float(value[:-1]) if value.endswith("s") else float(value)


def _load_vocab(args) -> corpus.TagVocabulary:
    if getattr(args, "vocab", None):
        return corpus.TagVocabulary.load(args.vocab)
    return corpus.amt_vocabulary()


def _load_dataset(data_path: str, vocab: corpus.TagVocabulary, top_k: int | None):
    records = corpus.load_jsonl(data_path)
    dataset = corpus.build_dataset(records, vocab)
    if top_k is not None:
        dataset = corpus.restrict_top_k(dataset, top_k)
    return dataset


# ---------------------------------------------------------------------------
# evaluation plumbing shared by train / eval / sweep / roc

def _checkpoint_outputs(ckpt: model.Checkpoint, dataset: corpus.Dataset):
    """Probabilities for every record: (tag_probs | None, diff_logits | None)."""
    vectors = [
        text.vectorize(ckpt.vectorizer, text.tokenize(r.statement, ckpt.tokenizer))
        for r in dataset.records
    ]
    x = text.stack_vectors(vectors)
    if ckpt.arch == "baseline":
        a_tag = x @ ckpt.params.w_tag + ckpt.params.b_tag if ckpt.params.w_tag is not None else None
        a_diff = x @ ckpt.params.w_diff + ckpt.params.b_diff if ckpt.params.w_diff is not None else None
    else:
        _, _, a_tag, a_diff = model._forward_batch(ckpt.params, x)
    return (expit(a_tag) if a_tag is not None else None), a_diff


def evaluate_checkpoint(
    ckpt: model.Checkpoint,
    dataset: corpus.Dataset,
    thetas: tuple[int, ...] = (3, 5),
    threshold: float = 0.5,
) -> metrics.EvalReport:
    if ckpt.vocab is not None and tuple(ckpt.vocab.labels) != tuple(dataset.vocab.labels):
        raise DataError("checkpoint and dataset vocabularies differ")
    if ckpt.scale.num_levels != dataset.scale.num_levels:
        raise DataError("checkpoint and dataset difficulty scales differ")
    tag_probs, diff_logits = _checkpoint_outputs(ckpt, dataset)
    report = metrics.EvalReport()
    if tag_probs is not None:
        report.tag = metrics.evaluate_tags(
            tag_probs, dataset.labels, dataset.vocab.labels, threshold
        )
        for k, name in enumerate(dataset.vocab.labels):
            column = dataset.labels[:, k]
            if 0 < column.sum() < len(column):
                report.roc[name] = metrics.roc_points(tag_probs[:, k], column)
    if diff_logits is not None:
        labeled = dataset.difficulty_indices >= 0
        if np.any(labeled):
            pred = np.argmax(diff_logits[labeled], axis=1)
            report.difficulty = metrics.evaluate_difficulty(
                pred, dataset.difficulty_indices[labeled], thetas
            )
    return report


@dataclass
class ExperimentReport:
    """One experiment row: fingerprints, config, metrics, parameter counts."""

    dataset_fingerprint: str
    split: dict
    arch: str
    train_config: dict
    param_counts: dict
    evaluation: dict
    wall_clock_seconds: float | None = None

    def to_json(self) -> str:
        # wall clock is reported in run_meta.json, never here, so two runs
        # of the same seeds produce byte-identical report files
        body = {
            "format_version": 1,
            "dataset_fingerprint": self.dataset_fingerprint,
            "split": self.split,
            "arch": self.arch,
            "train_config": self.train_config,
            "param_counts": self.param_counts,
            "evaluation": self.evaluation,
        }
        return json.dumps(body, indent=2, sort_keys=True)


def _param_counts(ckpt: model.Checkpoint) -> dict:
    if ckpt.arch == "baseline":
        total = sum(t.size for _, t in ckpt.params.tensors())
        return {"model": int(total)}
    dims = ckpt.params.dims
    counts = {"model": model.param_count(dims)}
    if dims.num_tags and dims.num_levels:
        tag_only = model.param_count(model.ModelDims(
            dims.num_features, dims.hidden, dims.num_tags, 0))
        diff_only = model.param_count(model.ModelDims(
            dims.num_features, dims.hidden, 0, dims.num_levels))
        counts["single_task_tag"] = tag_only
        counts["single_task_difficulty"] = diff_only
        counts["two_single_task_total"] = tag_only + diff_only
        counts["ratio_two_single_to_multi"] = round(
            (tag_only + diff_only) / counts["model"], 6
        )
    return counts


def _write_report(out_dir: Path, report: ExperimentReport) -> None:
    (out_dir / REPORT_JSON).write_text(report.to_json() + "\n", encoding="utf-8")
    meta = {"wall_clock_seconds": report.wall_clock_seconds}
    (out_dir / RUN_META_JSON).write_text(json.dumps(meta, indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args) -> int:
    src = Path(args.input)
    paths = sorted(src.glob("*.jsonl")) if src.is_dir() else [src]
    if not paths:
        raise DataError(f"no .jsonl files under {src}")
    records = []
    seen = set()
    for path in paths:
        for rec in corpus.load_jsonl(path):
            if rec.id in seen:
                raise DataError(f"{path}: duplicate id {rec.id!r} across inputs")
            seen.add(rec.id)
            records.append(rec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.save_jsonl(records, out)
    write_snapshot(out.parent, "ingest", args)
    print(f"ingested {len(records)} records from {len(paths)} file(s) -> {out}")
    return 0


def cmd_fetch(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = fetch.FetchConfig(
        out_path=out_dir / "problems.jsonl",
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        min_interval=_parse_duration(args.min_interval),
        max_retries=args.max_retries,
        resume=args.resume,
    )
    summary = fetch.run_fetch(config, limit=args.limit)
    write_snapshot(out_dir, "fetch", args)
    print(summary.line())
    return 0


def _stats_text(dataset: corpus.Dataset) -> str:
    lines = [f"records={len(dataset)}", "", "tag histogram:"]
    for label, count in corpus.tag_histogram(dataset).items():
        lines.append(f"  {label:<22}{count:>8}")
    lines += ["", "difficulty histogram:"]
    for rating, count in corpus.difficulty_histogram(dataset).items():
        lines.append(f"  {rating:<22}{count:>8}")
    lines += ["", f"missing ratings: {corpus.missing_rating_count(dataset)}"]
    return "\n".join(lines) + "\n"


def cmd_stats(args) -> int:
    dataset = _load_dataset(args.data, _load_vocab(args), args.top_k)
    rendered = _stats_text(dataset)
    sys.stdout.write(rendered)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(rendered, encoding="utf-8")
        write_snapshot(out.parent, "stats", args)
    return 0


def cmd_split(args) -> int:
    dataset = _load_dataset(args.data, _load_vocab(args), args.top_k)
    assignment = corpus.split(dataset, args.seed, args.test_frac)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(assignment.to_json() + "\n", encoding="utf-8")
    write_snapshot(out.parent, "split", args)
    print(f"split {len(dataset)} records: {len(assignment.train_ids)} train / "
          f"{len(assignment.test_ids)} test -> {out}")
    return 0


def _train_one(args, dataset, train_ds, test_ds, out_dir: Path) -> ExperimentReport:
    started = time.perf_counter()
    tokenizer = text.TokenizerConfig(max_tokens=args.max_tokens)
    token_lists = [text.tokenize(r.statement, tokenizer) for r in train_ds.records]
    vectorizer = text.fit(token_lists, mode=args.vectorizer, dimension=args.hash_dim)
    if args.arch == "baseline":
        config = model.BaselineConfig(
            learning_rate=args.lr, batch_size=args.batch_size,
            epochs=args.epochs, seed=args.seed,
        )
        ckpt = model.baseline_ovr_train(train_ds, vectorizer, config, tokenizer)
    else:
        config = model.TrainConfig(
            lam=args.lam, learning_rate=args.lr, batch_size=args.batch_size,
            epochs=args.epochs, seed=args.seed, hidden=args.hidden,
            patience=args.patience, single_task=args.single_task,
        )
        ckpt = model.train(train_ds, vectorizer, config, tokenizer)
    model.save_checkpoint(ckpt, out_dir)
    evaluation = evaluate_checkpoint(ckpt, test_ds, tuple(args.theta), args.threshold)
    report = ExperimentReport(
        dataset_fingerprint=file_fingerprint(args.data),
        split={
            "path": str(args.split),
            "n_train": len(train_ds),
            "n_test": len(test_ds),
        },
        arch=ckpt.arch,
        train_config=ckpt.config,
        param_counts=_param_counts(ckpt),
        evaluation=evaluation.to_dict(),
        wall_clock_seconds=time.perf_counter() - started,
    )
    _write_report(out_dir, report)
    return report


def _split_datasets(args, dataset):
    assignment = corpus.SplitAssignment.load(args.split)
    train_ds = dataset.subset(assignment.train_ids)
    test_ds = dataset.subset(assignment.test_ids)
    if len(train_ds) == 0 or len(test_ds) == 0:
        raise DataError("split does not match dataset (empty train or test side)")
    return train_ds, test_ds


def cmd_train(args) -> int:
    dataset = _load_dataset(args.data, _load_vocab(args), args.top_k)
    train_ds, test_ds = _split_datasets(args, dataset)
    out_dir = Path(args.out)
    report = _train_one(args, dataset, train_ds, test_ds, out_dir)
    write_snapshot(out_dir, "train", args)
    print(f"checkpoint -> {out_dir}")
    print(json.dumps(report.evaluation, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    ckpt = model.load_checkpoint(args.checkpoint)
    records = corpus.load_jsonl(args.data)
    vocab = ckpt.vocab if ckpt.vocab is not None else _load_vocab(args)
    dataset = corpus.build_dataset(records, vocab)
    assignment = corpus.SplitAssignment.load(args.split)
    test_ds = dataset.subset(assignment.test_ids)
    if len(test_ds) == 0:
        raise DataError("split test ids not present in dataset")
    evaluation = evaluate_checkpoint(ckpt, test_ds, tuple(args.theta), args.threshold)
    print(evaluation.format_table())
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = ExperimentReport(
            dataset_fingerprint=file_fingerprint(args.data),
            split={
                "path": str(args.split),
                "n_train": len(assignment.train_ids),
                "n_test": len(test_ds),
            },
            arch=ckpt.arch,
            train_config=ckpt.config,
            param_counts=_param_counts(ckpt),
            evaluation=evaluation.to_dict(),
            wall_clock_seconds=None,
        )
        _write_report(out_dir, report)
        write_snapshot(out_dir, "eval", args)
    return 0


_SWEEP_COLUMNS = ["Accuracy", "CS(3)", "CS(5)", "MAE", "AUROC", "F1-Macro"]


def _sweep_row(name: str, lam, evaluation: dict) -> list[str]:
    diff = evaluation.get("difficulty") or {}
    tag = evaluation.get("tag") or {}
    cs_map = diff.get("cs", {})

    def fmt(value, scale=1.0):
        return "N/A" if value is None else f"{value * scale:.2f}"

    return [
        name,
        "N/A" if lam is None else f"{lam:g}",
        fmt(diff.get("accuracy"), 100.0),
        fmt(cs_map.get("3")),
        fmt(cs_map.get("5")),
        "N/A" if diff.get("mae") is None else f"{diff['mae']:.2f}",
        fmt(tag.get("macro_auroc"), 100.0),
        fmt(tag.get("macro_f1"), 100.0),
    ]


def _render_table(rows: list[list[str]]) -> str:
    header = ["Architecture", "lambda", *_SWEEP_COLUMNS]
    table = [header] + rows
    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    dataset = _load_dataset(args.data, _load_vocab(args), args.top_k)
    train_ds, test_ds = _split_datasets(args, dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    results = []
    runs: list[tuple[str, str | None, float | None]] = []
    if args.include_single_task:
        runs.append(("single-task tag", "tag", None))
        runs.append(("single-task difficulty", "difficulty", None))
    for lam in args.lambdas:
        runs.append(("multi-task", None, lam))
    for name, single_task, lam in runs:
        sub = argparse.Namespace(**vars(args))
        sub.single_task = single_task
        sub.lam = lam
        sub.arch = "two-head"
        run_dir = out_dir / (
            f"lambda_{lam:g}" if single_task is None else f"single_{single_task}"
        )
        report = _train_one(sub, dataset, train_ds, test_ds, run_dir)
        rows.append(_sweep_row(name, lam, report.evaluation))
        results.append({
            "name": name, "lambda": lam, "single_task": single_task,
            "dir": run_dir.name, "evaluation": report.evaluation,
        })
    table = _render_table(rows)
    (out_dir / "sweep_table.txt").write_text(table, encoding="utf-8")
    (out_dir / "sweep.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_snapshot(out_dir, "sweep", args)
    sys.stdout.write(table)
    return 0


def cmd_predict(args) -> int:
    ckpt = model.load_checkpoint(args.checkpoint)
    if args.input:
        statement = Path(args.input).read_text(encoding="utf-8")
    else:
        statement = sys.stdin.read()
    if not statement.strip():
        raise DataError("empty input statement")
    prediction = model.predict(ckpt, statement, args.threshold)
    print(json.dumps(prediction.to_dict(), indent=2))
    return 0


def cmd_roc(args) -> int:
    ckpt = model.load_checkpoint(args.checkpoint)
    records = corpus.load_jsonl(args.data)
    vocab = ckpt.vocab
    if vocab is None:
        raise DataError("checkpoint has no tag head; ROC export needs tag probabilities")
    dataset = corpus.build_dataset(records, vocab)
    assignment = corpus.SplitAssignment.load(args.split)
    test_ds = dataset.subset(assignment.test_ids)
    if len(test_ds) == 0:
        raise DataError("split test ids not present in dataset")
    evaluation = evaluate_checkpoint(ckpt, test_ds, threshold=args.threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_roc_csv(evaluation.roc, out)
    write_snapshot(out.parent, "roc", args)
    print(f"wrote {len(evaluation.roc)} ROC curve(s) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring

def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="key=value config file; flags win")


def _add_vocab_opts(p: _Parser) -> None:
    p.add_argument("--vocab", help="tag vocabulary file (default: shipped 20-tag set)")
    p.add_argument("--top-k", type=int, default=None,
                   help="restrict to the k most frequent tags")


def _add_train_opts(p: _Parser) -> None:
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--hash-dim", type=int, default=32768)
    p.add_argument("--vectorizer", choices=["hashed", "vocabulary"], default="hashed")
    p.add_argument("--max-tokens", type=int, default=4096)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--theta", type=_int_list, default=[3, 5])
    p.add_argument("--out", required=True)


def _int_list(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v]


def _float_list(value: str) -> list[float]:
    return [float(v) for v in value.split(",") if v]


def build_parser() -> _Parser:
    parser = _Parser(prog="psg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and canonicalize JSONL datasets")
    p.add_argument("--input", required=True, help="JSONL file or directory of them")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fetch", help="reconstruct the dataset from the provider")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-interval", default="2s")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--limit", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("stats", help="tag and difficulty histograms")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    _add_vocab_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="deterministic train/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--out", required=True)
    _add_vocab_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model and report test metrics")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0)
    p.add_argument("--single-task", choices=["tag", "difficulty"], default=None)
    p.add_argument("--arch", choices=["two-head", "baseline"], default="two-head")
    _add_train_opts(p)
    _add_vocab_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--theta", type=_int_list, default=[3, 5])
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.add_argument("--vocab", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train one model per lambda, emit a comparison table")
    p.add_argument("--lambdas", type=_float_list, default=[1.0, 10.0, 100.0])
    p.add_argument("--include-single-task", action=argparse.BooleanOptionalAction,
                   default=False)
    _add_train_opts(p)
    _add_vocab_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="predict tags and difficulty for one statement")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", default=None, help="statement file (default: stdin)")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("roc", help="export per-label ROC curves as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_roc)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        injected = _config_to_argv(parse_config_file(args.config))
        args = parser.parse_args([argv[0], *injected, *argv[1:]])
    try:
        return args.func(args)
    except NetworkError as e:
        print(f"psg: network error: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"psg: data error: {e}", file=sys.stderr)
        return 2
    except PsgError as e:
        print(f"psg: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
