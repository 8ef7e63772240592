"""Scikit-learn style estimators wrapping the conversion and training code.

``EventFrameTransformer`` turns event streams into frame tensors inside
ordinary sklearn pipelines; ``EventStreamClassifier`` trains the tri-modal
model on (stream, label) pairs — optionally with paired images — and
predicts categories for new streams. Both follow the get_params /
set_params contract, so cloning and grid search compose as usual.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .config import RunConfig
from .data import Dataset, Sample
from .errors import DataError
from .frames import RepresentationConfig, events_to_frames
from .metrics import predict as predict_index
from .train import train
from .validation import check_event_streams, check_images, check_labels


class EventFrameTransformer(BaseEstimator, TransformerMixin):
    """Stateless stream-to-frame-tensor converter.

    Parameters mirror the representation config: ``events_total`` events
    are kept (or padded), grouped into ``events_per_frame``-sized parts,
    and each colorized frame is resized to ``target_resolution``.
    """

    def __init__(self, events_total=512, events_per_frame=128, target_resolution=32):
        self.events_total = events_total
        self.events_per_frame = events_per_frame
        self.target_resolution = target_resolution

    def fit(self, X, y=None):
        self._config()  # validate parameters
        return self

    def transform(self, X):
        """Streams -> (n, T, target, target, 3) float64 in [0, 255]."""
        cfg = self._config()
        streams = check_event_streams(X)
        return np.stack([events_to_frames(s, cfg).values for s in streams])

    def _config(self) -> RepresentationConfig:
        return RepresentationConfig(
            total_events=self.events_total,
            events_per_frame=self.events_per_frame,
            target_resolution=self.target_resolution)


class EventStreamClassifier(BaseEstimator, ClassifierMixin):
    """Event-stream category classifier backed by the tri-modal model.

    ``fit`` accepts streams plus integer or string labels; paired images
    (n, H, W, 3) may be given for the full objective, otherwise training
    runs in image-absent mode. Extra keyword arguments override any
    RunConfig field.
    """

    def __init__(self, epochs=30, lr=1e-3, batch_size=16, seed=0,
                 events_total=512, events_per_frame=128, target_resolution=32,
                 no_image=False, dtype="float64", **config_overrides):
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.events_total = events_total
        self.events_per_frame = events_per_frame
        self.target_resolution = target_resolution
        self.no_image = no_image
        self.dtype = dtype
        for key, value in config_overrides.items():
            if key not in {f.name for f in dataclasses.fields(RunConfig)}:
                raise DataError(f"unknown configuration key {key!r}")
            setattr(self, key, value)
        self._override_keys = tuple(config_overrides)

    def get_params(self, deep=True):
        params = super().get_params(deep=deep)
        for key in getattr(self, "_override_keys", ()):
            params[key] = getattr(self, key)
        return params

    def _run_config(self, out_dir, no_image) -> RunConfig:
        fields = {f.name for f in dataclasses.fields(RunConfig)}
        values = {k: getattr(self, k) for k in fields if hasattr(self, k)}
        values["out_dir"] = out_dir
        values["no_image"] = no_image
        values.setdefault("eval_every", max(1, self.epochs))
        return RunConfig(**values)

    def fit(self, X, y, images=None):
        import tempfile

        streams = check_event_streams(X)
        labels = check_labels(y, len(streams))
        self.classes_, encoded = np.unique(labels, return_inverse=True)
        if len(self.classes_) < 2:
            raise DataError("need at least two distinct classes")
        no_image = self.no_image or images is None
        if images is not None:
            images = check_images(images, len(streams), streams[0].sensor_height)

        categories = [str(c) for c in self.classes_]
        dataset = Dataset(categories=categories)
        for i, stream in enumerate(streams):
            image = (images[i] if images is not None
                     else np.zeros((stream.sensor_height, stream.sensor_width, 3), np.uint8))
            dataset.samples.append(Sample(stream, image, int(encoded[i])))

        with tempfile.TemporaryDirectory() as out_dir:
            config = self._run_config(out_dir, no_image)
            result = train(config, dataset, dataset)
        self.model_ = result.model
        self.config_ = result.model.config
        self.history_ = result.history
        return self

    def predict_proba(self, X):
        self._check_fitted()
        streams = check_event_streams(X)
        frames = EventFrameTransformer(
            self.events_total, self.events_per_frame,
            self.target_resolution).transform(streams)
        import torch
        tensor = torch.as_tensor(frames, dtype=self.model_.dtype)
        return self.model_.recognition_probs(tensor)

    def predict(self, X):
        self._check_fitted()
        return self.classes_[predict_index(self.predict_proba(X))]

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("classifier is not fitted; call fit first")
