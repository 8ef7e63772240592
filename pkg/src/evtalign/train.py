"""Training loop, evaluation, and metrics logging.

Training is mini-batch gradient descent on the weighted alignment objective
with Adam and a cosine-annealed learning rate. Batches avoid duplicate
categories by default (see data.distinct_category_batches). The loop
logs one fixed-key-order metrics line per optimizer step and one per
evaluated epoch, retains the best checkpoint by validation accuracy, and
aborts on a non-finite loss.

Everything is deterministic under a fixed seed when run single-threaded:
frame conversion is exact integer work, batch order comes from one seeded
generator, and the model runs in the configured dtype on CPU.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import data as data_mod
from .checkpoint import save_checkpoint, state_to_tensors
from .config import RunConfig
from .data import Dataset
from .frames import events_to_frames
from .metrics import accuracy, predict, recall_at_k
from .model import TriModalModel

RECALL_KS = (1, 5, 10)
EVAL_CHUNK = 64


def _dtype_of(name: str):
    return torch.float64 if name == "float64" else torch.float32


def dataset_tensors(dataset: Dataset, config: RunConfig, dtype):
    """Precompute frame/image tensors for a dataset split.

    Frames are fixed by the representation config, so conversion happens
    once; paired images are resized to the same model resolution with the
    same bilinear kernel. Values stay in the raw [0, 255] range (the
    model rescales).
    """
    rep = config.representation()
    frames = np.stack([
        events_to_frames(s.stream, rep).values for s in dataset.samples
    ])
    images = np.stack([s.image for s in dataset.samples]).astype(np.float64)
    image_tensor = torch.as_tensor(images, dtype=torch.float64).permute(0, 3, 1, 2)
    if image_tensor.shape[-1] != config.target_resolution:
        image_tensor = torch.nn.functional.interpolate(
            image_tensor, size=(config.target_resolution, config.target_resolution),
            mode="bilinear", align_corners=False, antialias=False)
    labels = dataset.labels
    return (
        torch.as_tensor(frames, dtype=dtype),
        image_tensor.permute(0, 2, 3, 1).contiguous().to(dtype),
        torch.as_tensor(labels, dtype=torch.long),
    )


def format_record(record: dict) -> str:
    """One metrics line; insertion order of keys is preserved verbatim."""
    return json.dumps(record)


@dataclass
class TrainResult:
    model: TriModalModel
    history: list = field(default_factory=list)      # epoch-level records
    step_records: list = field(default_factory=list)
    best_path: str = ""
    final_path: str = ""
    best_val_acc: float = 0.0
    final_metrics: dict = field(default_factory=dict)


@torch.no_grad()
def evaluate_model(model: TriModalModel, frames, images, labels) -> dict:
    """Recognition accuracy plus retrieval recalls over this split.

    Text-to-event retrieval queries the unmodulated class text matrix (a
    pure text query carries no sample to condition on); image-to-event
    uses the split's image embeddings. Recall@k is reported for each
    k in (1, 5, 10) not exceeding the gallery size.
    """
    model.eval()
    probs = []
    event_embs = []
    for i in range(0, len(frames), EVAL_CHUNK):
        chunk = frames[i:i + EVAL_CHUNK]
        probs.append(model.recognition_probs(chunk))
        event_embs.append(model.encode_events(chunk))
    probs = np.concatenate(probs)
    event_embs = torch.cat(event_embs)
    labels_np = labels.cpu().numpy()
    out = {"top1": accuracy(predict(probs), labels_np)}

    gallery_embs = event_embs.cpu().numpy()
    text_matrix = model.class_text_matrix(None).cpu().numpy()
    class_labels = np.arange(len(model.categories))
    for k in RECALL_KS:
        if k <= len(gallery_embs):
            out[f"r{k}_text_event"] = recall_at_k(
                text_matrix, gallery_embs, class_labels, labels_np, k)
    if images is not None:
        image_embs = []
        for i in range(0, len(images), EVAL_CHUNK):
            image_embs.append(model.encode_images(images[i:i + EVAL_CHUNK]))
        image_embs = torch.cat(image_embs).cpu().numpy()
        for k in RECALL_KS:
            if k <= len(gallery_embs):
                out[f"r{k}_image_event"] = recall_at_k(
                    image_embs, gallery_embs, labels_np, labels_np, k)
    model.train()
    return out


def train(config: RunConfig, train_set: Dataset, val_set: Dataset,
          model: TriModalModel | None = None,
          log_stream=None) -> TrainResult:
    """Run the full training loop; returns the model and metric history."""
    if config.threads > 0:
        torch.set_num_threads(config.threads)
    torch.manual_seed(config.seed)
    dtype = _dtype_of(config.dtype)

    if config.few_shot_k > 0:
        train_set = data_mod.few_shot_subset(train_set, config.few_shot_k, config.seed)

    if model is None:
        model = TriModalModel.build(config, train_set.categories)
    model = model.to(dtype)
    model.train()

    frames_tr, images_tr, labels_tr = dataset_tensors(train_set, config, dtype)
    frames_va, images_va, labels_va = dataset_tensors(val_set, config, dtype)
    use_images = not config.no_image

    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=config.epochs, eta_min=config.min_lr)
    batcher = np.random.default_rng(config.seed)

    os.makedirs(config.out_dir, exist_ok=True)
    metrics_path = os.path.join(config.out_dir, "metrics.ndjson")
    result = TrainResult(model=model)
    result.best_path = os.path.join(config.out_dir, "best.ebck")
    result.final_path = os.path.join(config.out_dir, "final.ebck")
    start = time.time()

    def emit(record):
        line = format_record(record)
        log_file.write(line + "\n")
        if log_stream is not None:
            log_stream.write(line + "\n")
        return line

    with open(metrics_path, "w") as log_file:
        step_count = 0
        for epoch in range(1, config.epochs + 1):
            if config.distinct_category_batches:
                batches = data_mod.distinct_category_batches(
                    train_set, config.batch_size, batcher)
            else:
                batches = data_mod.shuffled_batches(
                    train_set, config.batch_size, batcher)
            for batch in batches:
                idx = torch.as_tensor(batch, dtype=torch.long)
                optimizer.zero_grad(set_to_none=True)
                _, report = model.forward_batch(
                    frames_tr[idx], labels_tr[idx],
                    images_tr[idx] if use_images else None)
                if not torch.isfinite(report.total):
                    raise RuntimeError(
                        f"training diverged: non-finite loss at epoch {epoch}")
                report.total.backward()
                optimizer.step()
                step_count += 1
                record = {"kind": "step", "epoch": epoch, "step": step_count}
                record.update(report.as_floats())
                record["lr"] = scheduler.get_last_lr()[0]
                record["tau"] = float(model.temperature.value.detach())
                result.step_records.append(record)
                emit(record)
            scheduler.step()

            if epoch % config.eval_every == 0 or epoch == config.epochs:
                train_metrics = evaluate_model(
                    model, frames_tr, images_tr if use_images else None, labels_tr)
                val_metrics = evaluate_model(
                    model, frames_va, images_va if use_images else None, labels_va)
                record = {
                    "kind": "epoch", "epoch": epoch,
                    "train_acc": train_metrics["top1"],
                    "val_acc": val_metrics["top1"],
                }
                for key, value in val_metrics.items():
                    if key != "top1":
                        record[key] = value
                record["wall_time"] = round(time.time() - start, 3)
                result.history.append(record)
                emit(record)
                result.final_metrics = record

                if val_metrics["top1"] > result.best_val_acc or not os.path.exists(result.best_path):
                    result.best_val_acc = max(result.best_val_acc, val_metrics["top1"])
                    _save(result.best_path, model, config, epoch, result.history)

                stop_train = config.early_stop_train_acc
                stop_val = config.early_stop_val_acc
                if stop_train > 0 and train_metrics["top1"] >= stop_train \
                        and (stop_val == 0 or val_metrics["top1"] >= stop_val):
                    break

        _save(result.final_path, model, config, epoch, result.history)
    return result


def _save(path, model, config, epoch, history):
    save_checkpoint(
        path, state_to_tensors(model), config.to_text(), epoch,
        "\n".join(format_record(h) for h in history))


def dump_embeddings(model: TriModalModel, frames, images, labels, path) -> None:
    """Persist eval-side embeddings for independent recomputation."""
    with torch.no_grad():
        event_embs = []
        text_mats = []
        for i in range(0, len(frames), EVAL_CHUNK):
            f_e = model.encode_events(frames[i:i + EVAL_CHUNK])
            event_embs.append(f_e)
            text_mats.append(model.query_text_matrices(f_e, "e"))
        arrays = {
            "event_embeddings": torch.cat(event_embs).cpu().numpy(),
            "text_matrices": torch.cat(text_mats).cpu().numpy(),
            "labels": labels.cpu().numpy(),
            "class_text_matrix": model.class_text_matrix(None).cpu().numpy(),
        }
        if images is not None:
            image_embs = [
                model.encode_images(images[i:i + EVAL_CHUNK])
                for i in range(0, len(images), EVAL_CHUNK)
            ]
            arrays["image_embeddings"] = torch.cat(image_embs).cpu().numpy()
    np.savez(path, **arrays)
