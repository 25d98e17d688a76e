"""Command line: ``mcdnn {train,eval,inspect,preprocess,augment-preview}``.

Log text goes to stdout; every machine-readable artifact is a file.
Exit codes: 0 success, 1 usage or config error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import augment, data, descriptor, evaluator, modelio, preprocess
from .config import ConfigError, load_config
from .ensemble import Column, Ensemble
from .layers import ShapeMismatchError
from .tensor import Rng
from .trainer import train_column

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class DataError(Exception):
    pass


def _load(path, what: str) -> data.Dataset:
    try:
        return data.load_dataset(path)
    except (OSError, data.DatasetError) as e:
        raise DataError(f"{what}: {e}") from e


def _plan(cfg):
    """(column index, chain, seed) for every column; seeds are ``seed + index``."""
    jobs = []
    for p, chain in enumerate(cfg.chains):
        for r in range(cfg.columns):
            i = p * cfg.columns + r
            jobs.append((i, chain, cfg.seed + i))
    return jobs


def _train_one(args):
    index, chain, seed, cfg, train_set, val_set, out_dir = args
    pre = preprocess.parse_chain(chain)
    lines = []
    train_pp = data.Dataset(pre.apply_all(train_set.images), train_set.labels, train_set.class_count)
    val_pp = None
    if val_set is not None:
        val_pp = data.Dataset(pre.apply_all(val_set.images), val_set.labels, val_set.class_count)

    def log(state):
        val = f"{state.validation_error[-1]:.4f}" if state.validation_error else "n/a"
        lines.append(f"column {index} epoch {state.epoch} eta {state.eta:.6g} "
                     f"loss {state.train_loss[-1]:.6f} validation_error {val}")

    tc = cfg.train_config(seed)
    net, state = train_column(cfg.descriptor, train_pp, tc, validation_set=val_pp, on_epoch=log)
    path = Path(out_dir) / f"column_{index:03d}.mcd"
    modelio.save_model(path, Column(net, pre, seed))
    lines.append(f"column {index} chain {chain} seed {seed} stopped ({state.stop_reason}) "
                 f"after {state.epoch} epochs -> {path}")
    return index, path, lines


def cmd_train(config_path, out=None) -> list[Path]:
    cfg = load_config(config_path)
    print("config:")
    for line in cfg.text.splitlines():
        print(f"  {line}")
    d = descriptor.parse_descriptor(cfg.descriptor)
    train_set = _load(cfg.path("train"), "train")
    if cfg.train_limit:
        train_set = train_set.subset(np.arange(min(cfg.train_limit, len(train_set))))
    if train_set.class_count != d.class_count:
        raise DataError(f"train: dataset has {train_set.class_count} classes, "
                        f"descriptor outputs {d.class_count}")
    val_set = _load(cfg.path("validation"), "validation") if cfg.validation else None
    out_dir = Path(out or (Path(config_path).parent / cfg.output))
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(i, chain, seed, cfg, train_set, val_set, out_dir) for i, chain, seed in _plan(cfg)]
    for chain in cfg.chains:
        shape = preprocess.parse_chain(chain)(train_set.images[0]).shape
        if shape != d.input_shape:
            raise DataError(f"chain {chain!r} yields {shape}, descriptor expects {d.input_shape}")
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_train_one(job))
    paths = []
    for _, path, lines in sorted(results, key=lambda r: r[0]):
        for line in lines:
            print(line)
        paths.append(path)
    manifest = modelio.write_manifest(out_dir / "manifest.txt", paths)
    print(f"wrote {len(paths)} model files and {manifest}")
    return paths


def load_columns(path) -> list[Column]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if modelio.is_model_file(path):
        return [modelio.load_model(path)]
    models = modelio.read_manifest(path)
    if not models:
        raise DataError(f"{path}: manifest lists no models")
    missing = [str(p) for p in models if not p.exists()]
    if missing:
        raise DataError(f"{path}: missing model files {missing}")
    return [modelio.load_model(p) for p in models]


def cmd_eval(model_or_manifest, dataset_path, out_dir) -> evaluator.EvaluationReport:
    columns = load_columns(model_or_manifest)
    ds = _load(dataset_path, "dataset")
    for c in columns:
        shape = c.preprocessor(ds.images[0]).shape
        if shape != c.descriptor.input_shape:
            raise DataError(f"geometry mismatch: chain {c.preprocessor} yields {shape}, "
                            f"descriptor {c.descriptor} expects {c.descriptor.input_shape}")
        if c.class_count != ds.class_count:
            raise DataError(f"model has {c.class_count} outputs, dataset {ds.class_count} classes")
    ens = Ensemble(columns)
    preds = ens.predict_all(ds.images)
    report = evaluator.evaluate(preds, ds.labels)
    evaluator.write_report(report, out_dir)
    print(f"{len(columns)} column(s) on {len(ds)} samples")
    print(evaluator.summary(report))
    return report


def cmd_inspect(text: str) -> str:
    d = descriptor.parse_descriptor(text)
    table = descriptor.describe(d)
    print(table)
    return table


def cmd_preprocess(dataset_path, chain: str, out_path) -> data.Dataset:
    pre = preprocess.parse_chain(chain)
    ds = _load(dataset_path, "dataset")
    out = data.Dataset(pre.apply_all(ds.images), ds.labels, ds.class_count, ds.name)
    data.save_mcds(out_path, out)
    print(f"{len(out)} images {ds.image_shape} -> {out.image_shape} via {pre}; wrote {out_path}")
    return out


def cmd_augment_preview(dataset_path, params: augment.DistortionParams, n: int, out_dir,
                        versions: int = 4, seed: int = 0) -> list[Path]:
    """Write ``n`` originals and ``versions`` distorted copies of each as PGM/PPM."""
    ds = _load(dataset_path, "dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if ds.image_shape[0] == 1 else "ppm"
    if ds.image_shape[0] not in (1, 3):
        raise DataError("previews need 1- or 3-map images")
    rng = Rng(seed)
    written = []
    count = min(n, len(ds))
    for i in range(count):
        p = out / f"sample_{i:03d}_original.{ext}"
        data.write_pnm(p, ds.images[i])
        written.append(p)
    for v in range(versions):
        batch = augment.distort_all(rng, ds.images[:count], params)
        for i in range(count):
            p = out / f"sample_{i:03d}_epoch_{v + 1}.{ext}"
            data.write_pnm(p, batch[i])
            written.append(p)
    print(f"wrote {len(written)} images to {out}")
    return written


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcdnn", description="Multi-column deep neural networks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every configured column")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config's output key)")

    p = sub.add_parser("eval", help="evaluate a model file or a manifest of models")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", default="report")

    p = sub.add_parser("inspect", help="print layer shapes for a descriptor")
    p.add_argument("descriptor")

    p = sub.add_parser("preprocess", help="apply a preprocessor chain and write an MCDS1 file")
    p.add_argument("dataset")
    p.add_argument("chain")
    p.add_argument("out")

    p = sub.add_parser("augment-preview", help="write distorted samples as PGM/PPM")
    p.add_argument("dataset")
    p.add_argument("out_dir")
    p.add_argument("-n", type=int, default=8)
    p.add_argument("--versions", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-translate", type=float, default=0.0)
    p.add_argument("--max-rotate", type=float, default=0.0)
    p.add_argument("--max-scale", type=float, default=0.0)
    p.add_argument("--elastic-sigma", type=float, default=None)
    p.add_argument("--elastic-alpha", type=float, default=0.0)
    p.add_argument("--fill", default="-1")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        if args.command == "train":
            cmd_train(args.config, args.out)
        elif args.command == "eval":
            cmd_eval(args.model, args.dataset, args.out)
        elif args.command == "inspect":
            cmd_inspect(args.descriptor)
        elif args.command == "preprocess":
            cmd_preprocess(args.dataset, args.chain, args.out)
        elif args.command == "augment-preview":
            fill = args.fill if args.fill == "edge" else float(args.fill)
            params = augment.DistortionParams(args.max_translate, args.max_rotate, args.max_scale,
                                              args.elastic_sigma, args.elastic_alpha, fill)
            cmd_augment_preview(args.dataset, params, args.n, args.out_dir, args.versions, args.seed)
    except (ConfigError, descriptor.DescriptorError, preprocess.ChainParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, data.DatasetError, modelio.ModelFormatError, preprocess.PreprocessError,
            ShapeMismatchError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, AssertionError, RuntimeError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
