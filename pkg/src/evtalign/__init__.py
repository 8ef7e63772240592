"""evtalign: tri-modal alignment of event streams, images, and text.

Event streams become colorized frame tensors, a prompt-augmented
transformer encodes them alongside a ViT image encoder and a hybrid-prompt
text encoder, and the three embedding sets are aligned with a weighted
set of contrastive and consistency losses. The package exposes
sklearn-style estimators on top, plus a CLI for dataset generation,
training, evaluation, and retrieval.
"""

from .config import RunConfig, load_config, parse_config_text
from .data import CATEGORIES, Dataset, few_shot_subset, make_synthetic_dataset
from .encoder import EventEncoder, ImageEncoder
from .errors import ConfigError, DataError
from .estimators import EventFrameTransformer, EventStreamClassifier
from .frames import (
    FrameTensor,
    Histogram,
    RepresentationConfig,
    build_histograms,
    colorize,
    events_to_frames,
    events_to_frames_raw,
    normalize_stream,
    partition_stream,
    read_efr1,
    resize_frames,
    write_efr1,
)
from .losses import (
    LossReport,
    LossWeights,
    Temperature,
    contrastive_loss,
    mse_consistency,
    total_loss,
)
from .metrics import accuracy, predict, recall_at_k, recognition_logits
from .model import TriModalModel
from .streams import EventRecord, EventStream, from_arrays, read_evt1, write_evt1
from .text import ContentPromptMLP, TextEncoder, ToyTokenizer
from .train import evaluate_model, train

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES", "ConfigError", "ContentPromptMLP", "DataError", "Dataset",
    "EventEncoder", "EventFrameTransformer", "EventRecord", "EventStream",
    "EventStreamClassifier", "FrameTensor", "Histogram", "ImageEncoder",
    "LossReport", "LossWeights", "RepresentationConfig", "RunConfig",
    "Temperature", "TextEncoder", "ToyTokenizer", "TriModalModel",
    "accuracy", "build_histograms", "colorize", "contrastive_loss",
    "evaluate_model", "events_to_frames", "events_to_frames_raw",
    "few_shot_subset", "from_arrays", "load_config", "make_synthetic_dataset",
    "mse_consistency", "normalize_stream", "parse_config_text",
    "partition_stream", "predict", "read_efr1", "read_evt1", "recall_at_k",
    "recognition_logits", "resize_frames", "total_loss", "train",
    "write_efr1", "write_evt1",
]
