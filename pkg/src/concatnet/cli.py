"""Command-line surface: one binary, one subcommand per pipeline stage.

Setting the environment variable CONCATNET_QUIET to a non-empty value
suppresses informational stdout (summaries, progress, report echoes);
artifacts on disk are unaffected.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .augment import build_concatenated, sample_key
from .config import DEFAULTS, RunConfig, load_run_config
from .errors import ConcatnetError, ConfigError, DataFormatError
from .model import Model, load_model, save_model
from .preprocess import preprocess_dataset
from .reports import (
    format_bench_report,
    format_metrics_table,
    render_training_curves,
    write_metrics,
    write_train_log_csv,
)
from .signal_io import (
    Dataset,
    load_csv_dataset,
    save_csv_dataset,
    generate_synthetic,
    stratified_split,
    summary,
)
from .training import bench, ensemble_predict, evaluate, train_ensemble


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _say(text: str) -> None:
    if not os.environ.get("CONCATNET_QUIET"):
        print(text, end="" if text.endswith("\n") else "\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    for key, default in DEFAULTS.items():
        if key == "schema_version":
            continue
        flag = "--" + key.replace("_", "-")
        if key == "layers":
            parser.add_argument(flag, type=json.loads, default=None,
                                help="residual stages as JSON, e.g. [[128,2,2],[256,2,2]]")
        elif isinstance(default, bool):
            parser.add_argument(flag, type=_parse_bool, default=None, metavar="BOOL")
        elif isinstance(default, int):
            parser.add_argument(flag, type=int, default=None)
        elif isinstance(default, float):
            parser.add_argument(flag, type=float, default=None)
        else:  # optional ints such as num_classes
            parser.add_argument(flag, type=int, default=None)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: getattr(args, key, None) for key in DEFAULTS if key != "schema_version"
    }
    return load_run_config(args.config, overrides)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_invocation(out: Path, command: str, **context) -> None:
    doc = {"command": command, "package_version": __version__}
    doc.update({k: str(v) if isinstance(v, Path) else v for k, v in context.items()})
    with open(out / "invocation.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_data(path: Path, has_labels: bool = True) -> Dataset:
    """A dataset CSV, or a directory holding dataset.csv."""
    if path.is_dir():
        candidate = path / "dataset.csv"
        if not candidate.exists():
            raise DataFormatError(f"{path} holds no dataset.csv")
        path = candidate
    return load_csv_dataset(path, has_labels=has_labels)


def _load_split_data(path: Path, run: RunConfig) -> Dataset:
    """A pre-split directory (train/val/test.csv) or a CSV split on the fly."""
    if path.is_dir() and (path / "train.csv").exists():
        parts = {}
        for name in ("train", "val", "test"):
            part_path = path / f"{name}.csv"
            if not part_path.exists():
                raise DataFormatError(f"{path} is missing {name}.csv")
            parts[name] = load_csv_dataset(part_path)
        signals, assignment = [], []
        for name, part in parts.items():
            signals.extend(part.signals)
            assignment.extend([name] * len(part))
        num_classes = max(p.num_classes for p in parts.values())
        return Dataset(
            signals=signals,
            num_classes=num_classes,
            class_names=[str(i) for i in range(num_classes)],
            split=assignment,
        )
    dataset = _load_data(path)
    return stratified_split(dataset, run.split_spec())


def _load_checkpoints(specs: Sequence[Path]) -> list[Model]:
    paths: list[Path] = []
    for spec in specs:
        if spec.is_dir():
            found = sorted(spec.glob("model_*.ckpt"))
            if not found:
                raise DataFormatError(f"{spec} holds no model_*.ckpt checkpoints")
            paths.extend(found)
        else:
            paths.append(spec)
    return [load_model(p)[0] for p in paths]


def _cmd_synth(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    if args.freqs:
        freqs = [float(v) for v in args.freqs.split(",")]
        if len(freqs) != args.classes:
            raise ConfigError(f"--freqs lists {len(freqs)} values for {args.classes} classes")
    else:
        freqs = [1.0 + 3.0 * k for k in range(args.classes)]
    dataset = generate_synthetic(args.per_class, args.length, freqs, args.noise_std, args.seed)
    save_csv_dataset(dataset, out / "dataset.csv")
    (out / "summary.txt").write_text(summary(dataset))
    _write_invocation(out, "synth", classes=args.classes, per_class=args.per_class,
                      length=args.length, noise_std=args.noise_std, freqs=freqs, seed=args.seed)
    _say(summary(dataset))
    return 0


def _cmd_preprocess(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    dataset = _load_data(Path(args.data), has_labels=not args.unlabeled)
    processed = preprocess_dataset(dataset, run.preprocess_config())
    save_csv_dataset(processed, out / "preprocessed.csv")
    run.echo(out / "config.json")
    _write_invocation(out, "preprocess", data=args.data)
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    dataset = _load_data(Path(args.data), has_labels=not args.unlabeled)
    cfg = run.augment_config()
    rows = []
    for i, sig in enumerate(dataset.signals):
        concatenated = build_concatenated(
            sig.samples, cfg, key=sample_key(sig.source_id, i)
        )
        rows.append((concatenated, sig.label))
    with open(out / "augmented.csv", "w") as fh:
        for samples, label in rows:
            cells = [repr(float(v)) for v in samples]
            if label is not None:
                cells.append(str(label))
            fh.write(",".join(cells) + "\n")
    run.echo(out / "config.json")
    _write_invocation(out, "augment", data=args.data)
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    dataset = _load_data(Path(args.data))
    assigned = stratified_split(dataset, run.split_spec())
    for name in ("train", "val", "test"):
        save_csv_dataset(assigned.subset(name), out / f"{name}.csv")
    (out / "summary.txt").write_text(summary(assigned))
    run.echo(out / "config.json")
    _write_invocation(out, "split", data=args.data)
    _say(summary(assigned))
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    dataset = _load_split_data(Path(args.data), run)
    model_cfg = run.model_config(num_classes=dataset.num_classes)
    models, logs = train_ensemble(
        dataset, model_cfg, run.train_config(), run.preprocess_config(), run.augment_config()
    )
    for k, (model, log) in enumerate(zip(models, logs)):
        save_model(out / f"model_{k}.ckpt", model, {"train": {"member": k, "seed": model.seed}})
        write_train_log_csv(log, out / f"training_log_{k}.csv")
        render_training_curves(log, out / f"training_curves_{k}.png")
        best = log.records[log.best_epoch - 1]
        _say(f"member {k}: best epoch {log.best_epoch} val_acc {best.val_acc:.4f} "
             f"({log.stop_reason} after {len(log.records)} epochs)")
    run.echo(out / "config.json")
    _write_invocation(out, "train", data=args.data, members=len(models))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    models = _load_checkpoints([Path(p) for p in args.checkpoint])
    data_path = Path(args.data)
    if data_path.is_dir() and (data_path / "test.csv").exists():
        dataset = load_csv_dataset(data_path / "test.csv")
    else:
        dataset = _load_data(data_path)
    report, cm = evaluate(
        models,
        dataset,
        run.preprocess_config(),
        run.augment_config(),
        batch_size=run["batch_size"],
        positive_class=args.positive_class,
        vote=args.vote,
    )
    write_metrics(report, cm, out, dataset.class_names)
    run.echo(out / "config.json")
    _write_invocation(out, "evaluate", data=args.data, checkpoints=len(models))
    _say(format_metrics_table(report))
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    out = _out_dir(args)
    models = _load_checkpoints([Path(p) for p in args.checkpoint])
    dataset = _load_data(Path(args.data), has_labels=not args.unlabeled)
    processed = preprocess_dataset(dataset, run.preprocess_config())
    cfg = run.augment_config()
    inputs = np.stack([
        build_concatenated(sig.samples, cfg, key=sample_key(sig.source_id, i))
        for i, sig in enumerate(processed.signals)
    ])
    probs = ensemble_predict(models, inputs, run["batch_size"], vote=args.vote)
    predictions = probs.argmax(axis=1)
    with open(out / "predictions.csv", "w") as fh:
        header = ["row", "prediction"] + [f"prob_{k}" for k in range(probs.shape[1])]
        fh.write(",".join(header) + "\n")
        for i, (pred, row) in enumerate(zip(predictions, probs)):
            fh.write(",".join([str(i), str(int(pred))] + [repr(float(p)) for p in row]) + "\n")
    run.echo(out / "config.json")
    _write_invocation(out, "predict", data=args.data, checkpoints=len(models))
    return 0


def _cmd_describe(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    num_classes = run["num_classes"] or 2
    model = Model(run.model_config(num_classes=num_classes), seed=run["seed"])
    table = model.describe(args.input_length)
    print(table, end="")
    if args.out:
        out = _out_dir(args)
        (out / "describe.txt").write_text(table)
        run.echo(out / "config.json")
        _write_invocation(out, "describe", input_length=args.input_length)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    run = _resolve_config(args)
    if args.checkpoint:
        model = _load_checkpoints([Path(args.checkpoint)])[0]
    else:
        model = Model(run.model_config(num_classes=run["num_classes"] or 2), seed=run["seed"])
    result = bench(model, args.input_length, args.repetitions, run["ensemble_size"])
    print(format_bench_report(result), end="")
    if args.out:
        out = _out_dir(args)
        (out / "bench.txt").write_text(format_bench_report(result))
        with open(out / "bench.json", "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        run.echo(out / "config.json")
        _write_invocation(out, "bench", input_length=args.input_length)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concatnet",
        description="Biomedical time-series classification with concatenation augmentation",
    )
    parser.add_argument("--version", action="version", version=f"concatnet {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic sinusoid dataset")
    synth.add_argument("--classes", type=int, default=2)
    synth.add_argument("--per-class", type=int, default=100)
    synth.add_argument("--length", type=int, default=178)
    synth.add_argument("--noise-std", type=float, default=0.05)
    synth.add_argument("--freqs", type=str, default=None,
                       help="comma-separated cycles-per-signal, one per class")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    for name, func, needs_data in (
        ("preprocess", _cmd_preprocess, True),
        ("augment", _cmd_augment, True),
        ("split", _cmd_split, True),
        ("train", _cmd_train, True),
    ):
        sub = commands.add_parser(name, help=f"run the {name} stage")
        sub.add_argument("--data", required=needs_data)
        sub.add_argument("--out", required=True)
        if name in ("preprocess", "augment"):
            sub.add_argument("--unlabeled", action="store_true",
                             help="input rows carry no label column")
        _add_config_flags(sub)
        sub.set_defaults(func=func)

    ev = commands.add_parser("evaluate", help="score checkpoints on a labeled dataset")
    ev.add_argument("--checkpoint", nargs="+", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--positive-class", type=int, default=None)
    ev.add_argument("--vote", choices=("mean", "majority"), default="mean")
    _add_config_flags(ev)
    ev.set_defaults(func=_cmd_evaluate)

    pred = commands.add_parser("predict", help="emit class probabilities for a dataset")
    pred.add_argument("--checkpoint", nargs="+", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True)
    pred.add_argument("--unlabeled", action="store_true")
    pred.add_argument("--vote", choices=("mean", "majority"), default="mean")
    _add_config_flags(pred)
    pred.set_defaults(func=_cmd_predict)

    desc = commands.add_parser("describe", help="per-stage shape and parameter table")
    desc.add_argument("--input-length", type=int, default=1246)
    desc.add_argument("--out", default=None)
    _add_config_flags(desc)
    desc.set_defaults(func=_cmd_describe)

    bench_cmd = commands.add_parser("bench", help="parameter/memory/latency report")
    bench_cmd.add_argument("--checkpoint", default=None)
    bench_cmd.add_argument("--input-length", type=int, default=1246)
    bench_cmd.add_argument("--repetitions", type=int, default=30)
    bench_cmd.add_argument("--out", default=None)
    _add_config_flags(bench_cmd)
    bench_cmd.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConcatnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
