"""Command-line entry point: ``vceclf <subcommand> ...``.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .augment import AugmentConfig, apply_pipeline
from .catalog import DEFAULT_CATALOG, ClassCatalog
from .config import build_train_config, check_keys, load_config, resolved
from .data_io import (
    Checkpoint,
    decode_image,
    encode_image,
    load_checkpoint,
    load_manifest,
    quantize_probs,
    read_predictions_csv,
    save_checkpoint,
    write_metrics_json,
    write_predictions_csv,
)
from .ensemble import ModelOutputs, align, ensemble_average
from .metrics import evaluate
from .sampling import SamplerSpec, chi_square_uniform, class_frequencies, draw_epoch_indices
from .trainloop import ImageCache, params_from_checkpoint, predict_probs, train

log = logging.getLogger("vceclf")


def _print_config(name: str, cfg: dict) -> None:
    print(f"[{name}] config: {json.dumps(cfg, sort_keys=True)}", file=sys.stderr)


def _catalog(classes) -> ClassCatalog:
    if not classes:
        return DEFAULT_CATALOG
    if isinstance(classes, str):
        classes = [c.strip() for c in classes.split(",")]
    return ClassCatalog(tuple(classes))


def _eval_augment(ckpt: Checkpoint) -> AugmentConfig:
    return AugmentConfig(**ckpt.extra.get("eval_transform", {}))


def cmd_train(args) -> int:
    data = load_config(args.config) if args.config else {}
    for key in ("train_manifest", "val_manifest", "out_dir", "arch", "seed", "classes"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    check_keys(data)
    for key in ("train_manifest", "val_manifest", "out_dir", "arch"):
        if data.get(key) is None:
            raise ValueError(f"--{key.replace('_', '-')} is required (flag or config key)")
    cfg = build_train_config(data)
    _print_config("train", resolved(data, cfg))

    catalog = _catalog(data.get("classes"))
    train_m = load_manifest(data["train_manifest"], catalog)
    val_m = load_manifest(data["val_manifest"], catalog)
    out_dir = Path(data["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    cache = ImageCache()
    with open(out_dir / "history.jsonl", "w", encoding="utf-8") as hist:
        def on_epoch(rec):
            hist.write(json.dumps(rec.to_dict(timings=args.timings)) + "\n")
            hist.flush()

        best, _ = train(train_m, val_m, data["arch"], cfg, on_epoch=on_epoch, cache=cache)

    aug = cfg.augment
    best = Checkpoint(
        params=best.params, layer_shapes=best.layer_shapes, epoch=best.epoch,
        best_combined_score=best.best_combined_score, rng_seed=best.rng_seed,
        class_catalog=best.class_catalog, arch=best.arch, feature_size=best.feature_size,
        extra={"eval_transform": {"target_size": list(aug.target_size),
                                  "norm_mean": list(aug.norm_mean),
                                  "norm_std": list(aug.norm_std)}},
    )
    save_checkpoint(out_dir / "best.ckpt", best)

    # final metrics go through the same 6-decimal quantisation as a written
    # predictions file, so `predict` + `eval` reproduces them exactly
    probs = predict_probs(params_from_checkpoint(best), val_m, aug, best.feature_size, cache)
    write_predictions_csv(out_dir / "val_predictions.csv", val_m.image_ids, probs, catalog)
    report = evaluate(quantize_probs(probs), val_m.labels, catalog)
    write_metrics_json(out_dir / "metrics.json", report, catalog)
    agg = report.aggregate
    print(f"best epoch {best.epoch}: balanced_accuracy={agg.balanced_accuracy:.4f} "
          f"mean_auc={agg.mean_auc:.4f} combined={agg.combined_score:.4f}")
    return 0


def cmd_predict(args) -> int:
    _print_config("predict", {"ckpt": args.ckpt, "manifest": args.manifest, "out": args.out})
    ckpt = load_checkpoint(args.ckpt)
    manifest = load_manifest(args.manifest, ckpt.class_catalog)
    probs = predict_probs(params_from_checkpoint(ckpt), manifest, _eval_augment(ckpt), ckpt.feature_size)
    write_predictions_csv(args.out, manifest.image_ids, probs, ckpt.class_catalog)
    print(f"wrote {len(manifest)} predictions to {args.out}")
    return 0


def cmd_ensemble(args) -> int:
    _print_config("ensemble", {"preds": args.preds, "out": args.out})
    members, catalog = [], None
    for path in args.preds:
        ids, probs, cat = read_predictions_csv(path)
        if catalog is None:
            catalog = cat
        elif cat != catalog:
            raise ValueError(f"{path}: class columns differ from {args.preds[0]}")
        members.append(ModelOutputs(str(Path(path).resolve()), ids, probs, is_probs=True))
    aligned = align(members)
    probs = ensemble_average(aligned)
    write_predictions_csv(args.out, list(aligned[0].image_ids), probs, catalog)
    print(f"ensembled {len(members)} members over {probs.shape[0]} images -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    _print_config("eval", {"preds": args.preds, "truth": args.truth, "out": args.out})
    ids, probs, catalog = read_predictions_csv(args.preds)
    truth = load_manifest(args.truth, catalog)
    by_name = {}
    for rec in truth.records:
        name = os.path.basename(rec.image_id)
        if name in by_name:
            raise ValueError(f"truth manifest has two images named {name!r}")
        by_name[name] = rec.label
    missing = [i for i in ids if i not in by_name]
    if missing:
        raise ValueError(f"no ground truth for image {missing[0]!r}")
    if len(ids) != len(by_name):
        raise ValueError(f"{len(by_name)} labelled images but {len(ids)} predictions")
    labels = np.array([by_name[i] for i in ids], dtype=np.int64)
    report = evaluate(probs, labels, catalog)
    if args.out:
        write_metrics_json(args.out, report, catalog)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_augment_preview(args) -> int:
    data = load_config(args.config) if args.config else {}
    cfg = AugmentConfig(**(data.get("augment") or {}))
    _print_config("augment-preview", {"in": args.input, "seed": args.seed, "index": args.index,
                                      "out": args.out, "augment": cfg.__dict__})
    img = decode_image(args.input)
    out, params = apply_pipeline(img, cfg, args.seed, args.index, return_params=True)
    encode_image(args.out, out)
    sidecar = Path(str(args.out) + ".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"seed": args.seed, "sample_index": args.index, "params": params.to_dict()}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} and {sidecar}")
    return 0


def cmd_sample_check(args) -> int:
    catalog = _catalog(args.classes)
    _print_config("sample-check", {"manifest": args.manifest, "draws": args.draws,
                                   "seed": args.seed, "classes": list(catalog.names)})
    manifest = load_manifest(args.manifest, catalog)
    if len(manifest) == 0:
        raise ValueError("manifest is empty")
    labels = manifest.labels
    spec = SamplerSpec.from_labels(labels, len(catalog), seed=args.seed)
    idx = draw_epoch_indices(spec, args.draws)
    freq = class_frequencies(labels, idx, len(catalog))
    counts = np.bincount(labels, minlength=len(catalog))
    for name, n, f in zip(catalog.names, counts, freq):
        if n:
            print(f"{name:>20s}  n={n:<6d} freq={f:.4f}")
    stat, dof = chi_square_uniform(labels, idx, len(catalog))
    print(f"chi_square={stat:.4f} dof={dof}")
    return 0


def cmd_make_synthetic(args) -> int:
    from .synthetic import make_dataset

    _print_config("make-synthetic", {"out_dir": args.out_dir, "seed": args.seed})
    train_m, val_m = make_dataset(args.out_dir, seed=args.seed)
    print(f"wrote {len(train_m)} training and {len(val_m)} validation images under {args.out_dir}")
    print(f"classes: {','.join(train_m.catalog.names)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vceclf", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap worker threads (results unaffected)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model with early stopping and checkpointing")
    t.add_argument("--train-manifest")
    t.add_argument("--val-manifest")
    t.add_argument("--arch", help="e.g. linear:192x10 or mlp:192x64x10")
    t.add_argument("--config", help="JSON or YAML run config")
    t.add_argument("--out-dir")
    t.add_argument("--seed", type=int)
    t.add_argument("--classes", help="comma-separated class names (default: the 10-class catalog)")
    t.add_argument("--timings", action="store_true", help="include wall_time in history.jsonl")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="write per-image class probabilities")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("ensemble", help="average several predictions files")
    e.add_argument("--preds", nargs="+", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_ensemble)

    ev = sub.add_parser("eval", help="metrics JSON from predictions and a labelled manifest")
    ev.add_argument("--preds", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", help="metrics JSON path (default: stdout)")
    ev.set_defaults(func=cmd_eval)

    a = sub.add_parser("augment-preview", help="augment one image and dump the sampled parameters")
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--index", type=int, default=0, help="sample index within the seed's stream")
    a.add_argument("--out", required=True)
    a.add_argument("--config")
    a.set_defaults(func=cmd_augment_preview)

    s = sub.add_parser("sample-check", help="empirical class frequencies of the weighted sampler")
    s.add_argument("--manifest", required=True)
    s.add_argument("--draws", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--classes")
    s.set_defaults(func=cmd_sample_check)

    m = sub.add_parser("make-synthetic", help="write a small solid-colour 3-class dataset")
    m.add_argument("--out-dir", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_make_synthetic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        if kernels.numba_impl is not None:
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
