"""Command-line interface.

Subcommands:

    gen-data        write a synthetic train/val dataset
    train           train from a config file
    eval            evaluate a checkpoint (or an untrained model)
    retrieve        rank gallery samples for a text or image query
    inspect-frames  summarize an EVT1 file's frame conversion

Exit codes: 0 success, 1 validation/configuration error (including bad
flags), 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import torch

from . import data as data_mod
from .checkpoint import load_checkpoint, tensors_to_state
from .config import load_config, parse_config_text
from .errors import ConfigError, DataError
from .frames import RepresentationConfig, events_to_frames_raw, read_efr1, write_efr1
from .model import TriModalModel
from .streams import read_evt1
from .train import dataset_tensors, dump_embeddings, evaluate_model, train


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evtalign", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-per-category", type=int, default=40)
    p.add_argument("--val-per-category", type=int, default=10)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--few-shot-k", type=int, default=None, help="override few-shot k")
    p.add_argument("--no-image", action="store_true", help="force image-absent mode")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None,
                   help="EBCK file; omitted = untrained model (chance baseline)")
    p.add_argument("--split", choices=("train", "val"), default="val")
    p.add_argument("--dump-embeddings", default=None, help="write npz of embeddings")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-image", action="store_true")

    p = sub.add_parser("retrieve", help="retrieve events for a query")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--query-text", default=None, help="category name query")
    p.add_argument("--query-image", default=None, help=".npy image query")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--split", choices=("train", "val"), default="val")

    p = sub.add_parser("inspect-frames",
                       help="summarize an EVT1 conversion or an EFR1 file")
    p.add_argument("path", help="EVT1 or EFR1 file")
    p.add_argument("--events-total", type=int, default=None,
                   help="required for EVT1 input")
    p.add_argument("--events-per-frame", type=int, default=None,
                   help="required for EVT1 input")
    p.add_argument("--out", default=None, help="write pre-resize frames as EFR1")

    return parser


def _apply_overrides(args, config_text):
    config = parse_config_text(config_text)
    overrides = []
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "few_shot_k", None) is not None:
        overrides.append(f"few_shot_k={args.few_shot_k}")
    if getattr(args, "no_image", False):
        overrides.append("no_image=true")
    if overrides:
        config = parse_config_text(config_text + "\n" + "\n".join(overrides))
    return config


def _load_splits(config):
    train_dir = os.path.join(config.data_dir, "train")
    val_dir = os.path.join(config.data_dir, "val")
    return data_mod.load_dataset(train_dir), data_mod.load_dataset(val_dir)


def _restore_model(config, categories, checkpoint_path):
    model = TriModalModel.build(config, categories)
    if checkpoint_path:
        tensors, _, _, _ = load_checkpoint(checkpoint_path)
        tensors_to_state(model, tensors)
    return model


def cmd_gen_data(args) -> int:
    full = data_mod.make_synthetic_dataset(
        args.seed, samples_per_category=args.train_per_category + args.val_per_category)
    train_set = data_mod.Dataset(categories=full.categories)
    val_set = data_mod.Dataset(categories=full.categories)
    per_cat = args.train_per_category + args.val_per_category
    for i, sample in enumerate(full.samples):
        (train_set if i % per_cat < args.train_per_category else val_set).samples.append(sample)
    data_mod.save_dataset(train_set, os.path.join(args.out, "train"))
    data_mod.save_dataset(val_set, os.path.join(args.out, "val"))
    print(f"wrote {len(train_set)} train / {len(val_set)} val samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    _, config_text = load_config(args.config)
    config = _apply_overrides(args, config_text)
    train_set, val_set = _load_splits(config)
    result = train(config, train_set, val_set, log_stream=sys.stdout)
    print(f"best checkpoint: {result.best_path}")
    print(f"final checkpoint: {result.final_path}")
    print(f"metrics: {os.path.join(config.out_dir, 'metrics.ndjson')}")
    return 0


def cmd_eval(args) -> int:
    _, config_text = load_config(args.config)
    config = _apply_overrides(args, config_text)
    torch.manual_seed(config.seed)
    if config.threads > 0:
        torch.set_num_threads(config.threads)
    train_set, val_set = _load_splits(config)
    dataset = train_set if args.split == "train" else val_set
    model = _restore_model(config, dataset.categories, args.checkpoint)
    dtype = torch.float64 if config.dtype == "float64" else torch.float32
    frames, images, labels = dataset_tensors(dataset, config, dtype)
    use_images = None if config.no_image else images
    metrics = evaluate_model(model, frames, use_images, labels)
    label = "trained" if args.checkpoint else "untrained (chance baseline)"
    print(f"model: {label}")
    for key, value in metrics.items():
        print(f"{key}={value:.6f}")
    if args.dump_embeddings:
        dump_embeddings(model, frames, use_images, labels, args.dump_embeddings)
        print(f"embeddings: {args.dump_embeddings}")
    return 0


def cmd_retrieve(args) -> int:
    if (args.query_text is None) == (args.query_image is None):
        raise ConfigError("provide exactly one of --query-text / --query-image")
    _, config_text = load_config(args.config)
    config = _apply_overrides(args, config_text)
    torch.manual_seed(config.seed)
    train_set, val_set = _load_splits(config)
    dataset = train_set if args.split == "train" else val_set
    model = _restore_model(config, dataset.categories, args.checkpoint)
    dtype = torch.float64 if config.dtype == "float64" else torch.float32
    frames, _, labels = dataset_tensors(dataset, config, dtype)
    if not 1 <= args.k <= len(dataset):
        raise ConfigError(f"k must be in [1, {len(dataset)}], got {args.k}")

    with torch.no_grad():
        gallery = []
        for i in range(0, len(frames), 64):
            gallery.append(model.encode_events(frames[i:i + 64]))
        gallery = torch.cat(gallery).cpu().numpy()
        if args.query_text is not None:
            index = model.text_encoder.category_index(args.query_text)
            query = model.class_text_matrix(None)[index].cpu().numpy()
        else:
            image = np.load(args.query_image)
            tensor = torch.as_tensor(image[None], dtype=model.dtype)
            query = model.encode_images(tensor)[0].cpu().numpy()

    scores = gallery @ query
    order = np.argsort(-scores, kind="stable")[: args.k]
    names = dataset.categories
    for rank, i in enumerate(order, start=1):
        print(f"{rank}\tsample={int(i)}\tscore={scores[i]:.6f}\tlabel={names[labels[i]]}")
    return 0


def cmd_inspect_frames(args) -> int:
    with open(args.path, "rb") as f:
        magic = f.read(4)
    if magic == b"EFR1":
        frames = read_efr1(args.path)
        print(f"EFR1 file: {frames.values.shape[0]} frames, "
              f"{frames.height}x{frames.width}, pre-resize")
    else:
        stream = read_evt1(args.path)
        if args.events_total is None or args.events_per_frame is None:
            raise ConfigError("--events-total and --events-per-frame are "
                              "required for EVT1 input")
        cfg = RepresentationConfig(
            total_events=args.events_total,
            events_per_frame=args.events_per_frame,
            target_resolution=max(1, stream.sensor_height))
        frames = events_to_frames_raw(stream, cfg)
        print(f"stream: {len(stream)} events, sensor "
              f"{stream.sensor_width}x{stream.sensor_height}")
        print(f"frames: {frames.values.shape[0]} x {frames.height}x{frames.width}, pre-resize")
    for t in range(frames.values.shape[0]):
        frame = frames.values[t]
        lit = int((frame.sum(axis=-1) > 0).sum())
        print(f"frame {t}: lit_pixels={lit} max={int(frame.max())}")
    if args.out:
        write_efr1(frames, args.out)
        print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "retrieve": cmd_retrieve,
    "inspect-frames": cmd_inspect_frames,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures (divergence, IO, ...)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
