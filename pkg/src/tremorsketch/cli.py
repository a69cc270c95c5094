"""Command-line entry point: ``tremorsketch <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .augment import augment_split, expansion_sources, write_augmented
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config
from .data import (CLASS_DIRS, DRAWING_TYPES, SPLITS, generate_synthetic_dataset, ingest_dataset,
                   load_split, write_split)
from .errors import DataError, TremorSketchError
from .metrics import ensemble_evaluate, write_pgm_heatmap, write_report
from .nn.model import ModelConfig, build_model
from .pipeline import evaluate_split, to_arrays, train_branch
from .plotting import bar_chart_svg, line_plot_svg, write_svg
from .train import write_history

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _types(value):
    if value not in DRAWING_TYPES:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(DRAWING_TYPES)}")
    return value


def _model_from_checkpoint(path):
    ckpt = load_checkpoint(path)
    model = build_model(ModelConfig.from_fingerprint(ckpt.fingerprint))
    ckpt.load_into(model)
    return model, ckpt


# -- commands ------------------------------------------------------------------------
def cmd_preprocess(args):
    for split, manifest in zip(SPLITS, ingest_dataset(args.root, args.type)):
        data = load_split(manifest, args.size)
        write_split(args.out, args.type, split, data.items)
        print(f"{args.type}/{split}: {len(data.items)} images -> {args.size}x{args.size}")
    return 0


def cmd_augment(args):
    cfg = load_config(args.config, args.type)
    copies = cfg.copies_per_image if args.copies is None else args.copies
    train_manifest, _ = ingest_dataset(cfg.dataset_root, cfg.drawing_type)
    split = load_split(train_manifest, cfg.image_size)
    items = augment_split(split, cfg.augment, copies, seed=cfg.seed, workers=args.workers)
    manifest = write_augmented(items, args.out, expansion_sources(len(split.items), copies))
    print(f"{len(split.items)} training images -> {len(items)} written; manifest {manifest}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config, args.type)
    if args.epochs is not None:
        cfg.train.epochs = args.epochs
        cfg.train.validate()
    out = args.out
    os.makedirs(out, exist_ok=True)
    train_manifest, _ = ingest_dataset(cfg.dataset_root, cfg.drawing_type)
    split = load_split(train_manifest, cfg.image_size)
    result = train_branch(cfg, split, workers=args.workers)
    ckpt_path = os.path.join(out, f"{cfg.drawing_type}.ckpt")
    save_checkpoint(result.checkpoint, ckpt_path)
    write_history(result.history, os.path.join(out, f"{cfg.drawing_type}_history.csv"))
    epochs = [r["epoch"] for r in result.history]
    for metric in ("loss", "acc"):
        series = {f"train_{metric}": [r[f"train_{metric}"] for r in result.history],
                  f"val_{metric}": [r[f"val_{metric}"] for r in result.history]}
        write_svg(line_plot_svg(series, title=f"{cfg.drawing_type} {metric} ({len(epochs)} epochs)"),
                  os.path.join(out, f"{cfg.drawing_type}_{metric}.svg"))
    counts = {CLASS_DIRS[k]: v for k, v in train_manifest.class_counts.items()}
    write_svg(bar_chart_svg(counts, title=f"{cfg.drawing_type} training images"),
              os.path.join(out, f"{cfg.drawing_type}_class_counts.svg"))
    print(f"best epoch {result.checkpoint.epoch} val_loss {result.checkpoint.best_val_loss:.4f}"
          f" -> {ckpt_path}")
    return 0


def cmd_evaluate(args):
    model, ckpt = _model_from_checkpoint(args.checkpoint)
    _, test_manifest = ingest_dataset(args.root, args.type)
    split = load_split(test_manifest, model.cfg.input_size)
    report = evaluate_split(model, split, name=f"{args.type} (epoch {ckpt.epoch})")
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, f"{args.type}_report")
    write_report(report, stem)
    write_pgm_heatmap(report.confusion, stem + "_confusion.pgm")
    print(report.to_text())
    return 0


def cmd_ensemble(args):
    tests = {}
    models = {}
    for kind, path in (("spiral", args.spiral_ckpt), ("wave", args.wave_ckpt)):
        models[kind], _ = _model_from_checkpoint(path)
        _, manifest = ingest_dataset(args.root, kind)
        tests[kind] = to_arrays(load_split(manifest, models[kind].cfg.input_size).items)
    res = ensemble_evaluate(models["spiral"], models["wave"], tests["spiral"], tests["wave"],
                            mode=args.mode)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, rep in (("ensemble", res.ensemble), ("spiral", res.spiral), ("wave", res.wave)):
            write_report(rep, os.path.join(args.out, f"{name}_report"))
        with open(os.path.join(args.out, "ensemble.json"), "w", encoding="utf-8") as fh:
            json.dump(res.to_dict(), fh, indent=2)
    for rep in (res.spiral, res.wave, res.ensemble):
        print(rep.to_text())
        print()
    return 0


def cmd_synth(args):
    if args.n < 1 or args.test_n < 0:
        raise DataError("--n must be >= 1 and --test-n >= 0")
    train = generate_synthetic_dataset(args.n, args.type, args.amplitude, args.seed)
    write_split(args.out, args.type, "training", train)
    msg = f"{args.type}: {len(train)} training"
    if args.test_n:
        test = generate_synthetic_dataset(args.test_n, args.type, args.amplitude, args.seed,
                                          offset=args.n)
        write_split(args.out, args.type, "testing", test)
        msg += f", {len(test)} testing"
    print(f"{msg} images under {args.out}")
    return 0


# -- parser -----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tremorsketch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="binarize and resize a dataset tree")
    s.add_argument("--root", required=True)
    s.add_argument("--type", required=True, type=_types)
    s.add_argument("--size", type=int, default=224)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("augment", help="write augmented copies of the training split")
    s.add_argument("--config", required=True)
    s.add_argument("--type", type=_types, help="drawing type when the config omits it")
    s.add_argument("--copies", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("train", help="train one branch")
    s.add_argument("--config", required=True)
    s.add_argument("--type", type=_types, help="drawing type when the config omits it")
    s.add_argument("--epochs", type=int, help="override the configured epoch count")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a checkpoint on the testing split")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--root", required=True)
    s.add_argument("--type", required=True, type=_types)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ensemble", help="hard-vote the spiral and wave branches")
    s.add_argument("--spiral-ckpt", required=True)
    s.add_argument("--wave-ckpt", required=True)
    s.add_argument("--root", required=True)
    s.add_argument("--mode", choices=("paired", "pooled"), default="paired")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ensemble)

    s = sub.add_parser("synth", help="render a synthetic dataset tree")
    s.add_argument("--type", required=True, type=_types)
    s.add_argument("--n", type=int, required=True, help="training images per class")
    s.add_argument("--test-n", type=int, default=0, help="testing images per class")
    s.add_argument("--amplitude", type=float, default=3.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TremorSketchError as exc:
        print(f"tremorsketch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tremorsketch: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
