"""Command-line entry point: scan -> extract -> evaluate -> predict.

Exit codes are a stable contract for scripting:
    0  success
    1  partial failure (some files failed; work that succeeded is kept)
    2  configuration or usage error
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import cache as cache_mod
from .audio import read_wav
from .datasets import DATASETS, LABEL_SETS, read_manifest, scan_config_hash, scan_dataset, write_manifest
from .encoder import extract, load_archive
from .errors import SerkitError
from .evaluate import SPLIT_MODES, run_evaluation
from .head import TrainConfig, load_head, mean_pool, predict, save_head

CACHE_ENV = "SERKIT_CACHE_DIR"


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def cmd_scan(args) -> int:
    result = scan_dataset(args.root, args.kind)
    write_manifest(args.out, result, args.kind)
    print(f"scanned {len(result.records)} utterances -> {args.out}")
    print(f"labels: {', '.join(LABEL_SETS[args.kind])}")
    if result.excluded:
        print(f"excluded by protocol: {len(result.excluded)}")
    if result.unparsable:
        for path, reason in result.unparsable:
            print(f"unparsable: {path} ({reason})", file=sys.stderr)
        if args.strict:
            print(f"--strict: {len(result.unparsable)} unparsable file(s)", file=sys.stderr)
            return 1
    return 0


def cmd_extract(args) -> int:
    model = load_archive(args.checkpoint)
    _header, records = read_manifest(args.manifest)
    cache_dir = cache_mod.prepare_cache(args.cache_dir, model)

    todo = [r for r in records if not cache_mod.entry_path(cache_dir, r).exists()]
    print(f"{len(records) - len(todo)} cached, extracting {len(todo)}")

    failures = []

    def work(record):
        vec = mean_pool(extract(read_wav(record.path), model))
        cache_mod.store_embedding(cache_dir, record, vec)

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {pool.submit(work, r): r for r in todo}
        for fut in concurrent.futures.as_completed(futures):
            record = futures[fut]
            try:
                fut.result()
            except (SerkitError, OSError) as exc:
                failures.append((record.path, str(exc)))
    for path, reason in failures:
        print(f"failed: {path}: {reason}", file=sys.stderr)
    print(f"cache at {cache_dir}: {len(todo) - len(failures)} new embeddings, {len(failures)} failures")
    return 1 if failures else 0


def cmd_evaluate(args) -> int:
    model = load_archive(args.checkpoint)
    header, records = read_manifest(args.manifest)
    dataset = header.get("dataset", "unknown")
    label_names = tuple(header["labels"])
    embeddings = cache_mod.load_all(args.cache_dir, records, model)

    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        early_stop_patience=args.patience,
        seed=args.seed,
        weight_decay=args.weight_decay,
        hidden_size=args.hidden_size,
    )
    run_hash = _config_hash(
        {
            "checkpoint": model.checkpoint_hash,
            "scan": header.get("config_hash", scan_config_hash(dataset) if dataset in DATASETS else ""),
            "mode": args.mode,
            "folds": args.folds,
            "test_ratio": args.test_ratio,
            "repeats": args.repeats,
            "seed": args.seed,
            "speaker_disjoint": args.speaker_disjoint,
            "train": cfg.to_dict(),
        }
    )
    result = run_evaluation(
        records,
        embeddings,
        label_names,
        mode=args.mode,
        folds=args.folds,
        test_ratio=args.test_ratio,
        repeats=args.repeats,
        seed=args.seed,
        train_config=cfg,
        speaker_disjoint=args.speaker_disjoint,
        dataset=dataset,
        checkpoint_id=model.checkpoint_hash[:12],
        config_hash=run_hash,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{dataset}_{model.checkpoint_hash[:12]}_{args.mode}_seed{args.seed}"
    (out / f"{stem}.report.json").write_text(result.report.to_json() + "\n")
    (out / f"{stem}.report.txt").write_text(result.report.render() + "\n")
    for i, head in enumerate(result.heads):
        save_head(out / f"{stem}.head{i}.serta", head, config_hash=run_hash)
    print(result.report.summary_line())
    print(f"reports under {out}/{stem}.*")
    return 0


def cmd_predict(args) -> int:
    model = load_archive(args.checkpoint)
    head = load_head(args.head)
    failures = 0
    for path in args.paths:
        try:
            label, probs = predict(model, head, read_wav(path))
            print(
                json.dumps(
                    {
                        "path": str(path),
                        "label": label,
                        "probabilities": {name: round(float(p), 6) for name, p in zip(head.label_names, probs)},
                    },
                    sort_keys=True,
                )
            )
        except (SerkitError, OSError) as exc:
            failures += 1
            print(json.dumps({"path": str(path), "error": str(exc)}, sort_keys=True))
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serkit",
        description="Speech emotion recognition: frozen speech encoder + trainable classifier head.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="index a dataset directory into a manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--kind", required=True, choices=DATASETS)
    p.add_argument("--out", default="manifest.jsonl")
    p.add_argument("--strict", action="store_true", help="fail if any file does not parse")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("extract", help="cache mean-pooled encoder embeddings for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache-dir", default=os.environ.get(CACHE_ENV), required=CACHE_ENV not in os.environ)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="train/evaluate heads over cached embeddings")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache-dir", default=os.environ.get(CACHE_ENV), required=CACHE_ENV not in os.environ)
    p.add_argument("--mode", default="kfold", choices=SPLIT_MODES)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--test-ratio", type=float, default=0.2)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speaker-disjoint", action="store_true")
    p.add_argument("--out", default="reports")
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--hidden-size", type=int, default=256)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify wav files with a trained head")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except SerkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
