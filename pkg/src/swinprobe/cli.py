"""Operator entry point: param-count, extract-features, train-probe, evaluate, analyze.

Pipeline stages share one JSON config file (flags win on conflict) and a run
directory (``--out``) holding the stage artifacts under fixed names:

    features.swpt + features.jsonl   <- extract-features
    head.swpt + classes.json + metrics.csv  <- train-probe
    predictions.jsonl                <- evaluate
    reports/                         <- analyze

Config schema::

    {
      "seed": 7,                       # mandatory
      "model": {"variant": "swin-t"}   # or explicit fields:
               {"embed_dim", "depths", "heads", "window", "mlp_ratio",
                "num_classes"},
      "clip":  {"frames": 32, "stride": 2, "size": 224},
      "train": {"epochs", "batch_size", "warmup_epochs", "peak_lr",
                "weight_decay", "betas", "eps"}
    }

Every subcommand is idempotent for identical inputs and seed, never mutates
its inputs, and fails with a one-line JSON error on stderr and a nonzero
exit code.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, probe, reports, weights_io
from .backbone import ModelConfig, classify, count_parameters, variant_config
from .sampling import read_manifest
from .windows import WindowSpec

__all__ = ["main"]

FEATURES_SWPT = "features.swpt"
FEATURES_SIDECAR = "features.jsonl"
HEAD_SWPT = "head.swpt"
CLASSES_JSON = "classes.json"
METRICS_CSV = "metrics.csv"
PREDICTIONS_JSONL = "predictions.jsonl"
REPORTS_DIR = "reports"


class StageError(RuntimeError):
    """A prerequisite artifact or input is missing or inconsistent."""


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise StageError(f"config file not found: {p}")
    with open(p, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if "seed" not in cfg:
        raise StageError("config must declare a seed")
    return cfg


def _model_config(cfg: dict, variant_flag: str | None) -> ModelConfig:
    model = cfg.get("model", cfg)
    if variant_flag:
        return variant_config(variant_flag, num_classes=model.get("num_classes"))
    if "variant" in model:
        return variant_config(model["variant"], num_classes=model.get("num_classes"))
    try:
        window = model.get("window", [8, 7])
        return ModelConfig(
            embed_dim=int(model["embed_dim"]),
            depths=tuple(model["depths"]),
            heads=tuple(model["heads"]),
            window=WindowSpec(int(window[0]), int(window[1])),
            mlp_ratio=float(model.get("mlp_ratio", 4.0)),
            num_classes=int(model.get("num_classes", 400)),
        )
    except KeyError as exc:
        raise StageError(f"model config missing field {exc.args[0]!r}") from None


def _clip_params(cfg: dict) -> dict:
    clip = cfg.get("clip", {})
    return {
        "frames": int(clip.get("frames", 32)),
        "stride": int(clip.get("stride", 2)),
        "size": int(clip.get("size", 224)),
    }


def _train_config(cfg: dict, seed_flag: int | None) -> probe.TrainConfig:
    train = cfg.get("train", {})
    seed = seed_flag if seed_flag is not None else cfg["seed"]
    return probe.TrainConfig(
        seed=int(seed),
        epochs=int(train.get("epochs", 30)),
        batch_size=int(train.get("batch_size", 64)),
        warmup_epochs=float(train.get("warmup_epochs", 2.5)),
        peak_lr=float(train.get("peak_lr", 1e-3)),
        weight_decay=float(train.get("weight_decay", 0.05)),
        betas=tuple(train.get("betas", (0.9, 0.999))),
        eps=float(train.get("eps", 1e-8)),
    )


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(f"missing artifact {path.name}: run {produced_by} first")
    return path


def _require_input(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise StageError(f"{what} not found: {p}")
    return p


def cmd_param_count(args) -> int:
    if args.variant:
        cfg = variant_config(args.variant)
        name = args.variant.lower()
    elif args.config:
        cfg = _model_config(json.load(open(_require_input(args.config, "config"))), None)
        name = Path(args.config).stem
    else:
        raise StageError("param-count needs --variant or --config")
    count = count_parameters(cfg)
    print(f"{name}: {count:,} parameters ({count / 1e6:.1f}M)")
    return 0


def cmd_extract(args) -> int:
    cfg = _load_config(args.config)
    manifest = _require_input(args.manifest, "manifest")
    weights_path = _require_input(args.weights, "weights file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    assets = read_manifest(manifest)
    model = _model_config(cfg, args.variant)
    backbone_weights = weights_io.load_file(weights_path)
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    store = probe.extract_features(
        assets, backbone_weights, model, workers=workers, **_clip_params(cfg)
    )
    probe.save_store(store, out / FEATURES_SWPT, out / FEATURES_SIDECAR)
    print(json.dumps({"videos": len(store), "feature_dim": store.feature_dim}))
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    store = probe.load_store(
        _require(out / FEATURES_SWPT, "extract-features"),
        _require(out / FEATURES_SIDECAR, "extract-features"),
    )
    train_cfg = _train_config(cfg, args.seed)
    head, stats, classes = probe.train_probe(store, train_cfg)
    weights_io.save_file(probe.head_to_weights(head), out / HEAD_SWPT)
    with open(out / CLASSES_JSON, "w", encoding="utf-8") as fh:
        json.dump(classes, fh, indent=0)
    probe.write_metrics_csv(stats, out / METRICS_CSV)
    final = stats[-1]
    print(
        json.dumps(
            {
                "epochs": len(stats),
                "final_loss": final.loss,
                "final_train_acc": final.train_acc,
            }
        )
    )
    return 0


def cmd_evaluate(args) -> int:
    _load_config(args.config)  # path validation + seed presence
    manifest = _require_input(args.manifest, "manifest")
    out = Path(args.out)
    store = probe.load_store(
        _require(out / FEATURES_SWPT, "extract-features"),
        _require(out / FEATURES_SIDECAR, "extract-features"),
    )
    head_w, head_b = probe.head_from_weights(
        weights_io.load_file(_require(out / HEAD_SWPT, "train-probe"))
    )
    with open(_require(out / CLASSES_JSON, "train-probe"), encoding="utf-8") as fh:
        classes = json.load(fh)
    if head_w.shape[1] != len(classes):
        raise StageError(
            f"head K={head_w.shape[1]} does not match {len(classes)} trained classes"
        )
    assets = {a.id: a for a in read_manifest(manifest)}
    manifest_labels = {l for a in assets.values() for l in a.labels}
    uncovered = sorted(manifest_labels - set(classes))
    if uncovered:
        raise StageError(
            f"head K={len(classes)} does not cover manifest labels: "
            f"{uncovered} — retrain with a matching class set"
        )

    records = []
    for vid, feat, labels in zip(store.ids, store.features, store.labels):
        if vid not in assets:
            raise StageError(f"feature cache id {vid!r} missing from manifest")
        a = assets[vid]
        logits = classify(feat, head_w, head_b)
        records.append(
            analysis.PredictionRecord(
                video_id=vid,
                true_labels=labels,
                predicted=classes[int(np.argmax(logits))],
                duration_s=a.duration_s,
                width=a.native_width,
                height=a.native_height,
            )
        )
    analysis.write_predictions(records, out / PREDICTIONS_JSONL)
    print(
        json.dumps(
            {
                "records": len(records),
                "accuracy": analysis.overall_accuracy(records),
            }
        )
    )
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    records = analysis.read_predictions(_require(out / PREDICTIONS_JSONL, "evaluate"))
    if args.class_filter:
        prefix = args.class_filter
        records = analysis.class_filtered_view(records, lambda c: c.startswith(prefix))
    if not records:
        raise StageError("no prediction records to analyze (filter too strict?)")
    rep_dir = out / REPORTS_DIR
    rep_dir.mkdir(parents=True, exist_ok=True)

    per_class = analysis.per_class_accuracy(records)
    decay = analysis.accuracy_decay_curve(per_class)
    duration = analysis.bin_by_duration(records)
    resolution = analysis.bin_by_resolution(records)
    freq_corr = (
        analysis.class_frequency_correlation(per_class) if len(per_class) >= 2 else None
    )

    reports.write_per_class_csv(per_class, rep_dir / "per_class_accuracy.csv")
    reports.write_decay_csv(decay, rep_dir / "accuracy_decay.csv")
    reports.write_bin_csv(duration, rep_dir / "duration_bins.csv", "duration_s")
    reports.write_bin_csv(resolution, rep_dir / "resolution_bins.csv", "pixels")
    reports.decay_chart(decay, rep_dir / "accuracy_decay.svg")
    reports.bin_count_chart(
        duration, rep_dir / "duration_bin_counts.svg", "duration bin (15 s)"
    )
    reports.bin_accuracy_chart(
        duration, rep_dir / "duration_bin_accuracy.svg", "duration bin (15 s)"
    )
    reports.bin_count_chart(
        resolution, rep_dir / "resolution_bin_counts.svg", "pixel bin (10k px)",
        log_y=True,
    )
    reports.bin_accuracy_chart(
        resolution, rep_dir / "resolution_bin_accuracy.svg", "pixel bin (10k px)"
    )

    summary = {
        "records": len(records),
        "accuracy": analysis.overall_accuracy(records),
        "duration_spearman": duration.spearman,
        "resolution_spearman": resolution.spearman,
        "class_frequency_spearman": freq_corr,
    }

    if args.merge_groups:
        with open(_require_input(args.merge_groups, "merge groups file")) as fh:
            groups = [set(g) for g in json.load(fh)]
        merge = analysis.merge_whatif(records, groups)
        summary["merge_whatif"] = {
            "before": merge.before,
            "after": merge.after,
            "delta": merge.delta,
        }
        for i, group in enumerate(groups):
            members = sorted(group)
            matrix = analysis.confusion_submatrix(records, members)
            reports.write_confusion_csv(
                matrix, members, rep_dir / f"confusion_group{i}.csv"
            )

    with open(rep_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swinprobe",
        description="Frozen-backbone video classification pipeline and analyses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("param-count", help="print the parameter count of a model")
    p.add_argument("--variant", help="swin-t | swin-s | swin-b | swin-l")
    p.add_argument("--config", help="model config JSON")
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("extract-features", help="cache frozen-backbone features")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant")
    p.add_argument("--workers", type=int, default=0, help="0 = one per core")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-probe", help="train the classification head")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="write the prediction log")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="emit analysis reports and charts")
    p.add_argument("--out", required=True)
    p.add_argument("--merge-groups", help="JSON list of class groups to merge")
    p.add_argument("--class-filter", help="restrict analyses to classes with this prefix")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(
            json.dumps({"error": str(exc), "command": args.command}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
