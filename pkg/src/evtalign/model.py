"""The assembled tri-modal model: event, image, and text encoders plus the
shared temperature and content-prompt MLPs.

The model owns frame/image scaling (raw 0..255 inputs are divided by 255
before the encoders) and the per-sample conditioning chain: an event or
image embedding feeds the content-prompt MLP, and the resulting prompt
modulates the text branches for that sample's category. One MLP is shared
between the two modalities unless ``separate_content_mlps`` is set.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .config import RunConfig
from .encoder import EventEncoder, ImageEncoder
from .errors import ConfigError
from .losses import LossReport, Temperature, total_loss
from .text import ContentPromptMLP, TextEncoder


class TriModalModel(nn.Module):
    @classmethod
    def build(cls, config: RunConfig, categories) -> "TriModalModel":
        """Construct in the config's dtype so seeded init draws are
        reproducible regardless of the ambient torch default dtype."""
        target = torch.float64 if config.dtype == "float64" else torch.float32
        previous = torch.get_default_dtype()
        torch.set_default_dtype(target)
        try:
            return cls(config, categories)
        finally:
            torch.set_default_dtype(previous)

    def __init__(self, config: RunConfig, categories):
        super().__init__()
        self.config = config
        self.categories = list(categories)
        self.event_encoder = EventEncoder(
            frame_size=config.target_resolution,
            patch_size=config.patch_size,
            frames=config.frame_count,
            dim=config.embed_dim,
            out_dim=config.output_dim,
            layers=config.layers,
            heads=config.heads,
            n_prompts=config.n_event_prompts if config.use_event_prompts else 0,
            per_frame_prompts=config.per_frame_prompts,
            temporal_modeling=config.use_temporal_modeling,
        )
        self.image_encoder = ImageEncoder(
            image_size=config.target_resolution,
            patch_size=config.patch_size,
            dim=config.embed_dim,
            out_dim=config.output_dim,
            layers=config.layers,
            heads=config.heads,
        )
        self.text_encoder = TextEncoder(
            self.categories,
            dim=config.output_dim,
            out_dim=config.output_dim,
            layers=config.text_layers,
            heads=config.text_heads,
            n_prompts=config.n_text_prompts,
            max_len=config.max_text_len,
        )
        self.content_mlp = ContentPromptMLP(config.output_dim, config.output_dim)
        self.content_mlp_image = (
            ContentPromptMLP(config.output_dim, config.output_dim)
            if config.separate_content_mlps else None
        )
        self.temperature = Temperature(config.init_temperature)

    @property
    def dtype(self):
        return self.event_encoder.patch_projection.dtype

    def content_prompts(self, embedding, modality: str):
        """Content prompt vectors for event ('e') or image ('i') embeddings."""
        if not self.config.use_content_prompts:
            return None
        if modality == "i" and self.content_mlp_image is not None:
            return self.content_mlp_image(embedding)
        if modality not in ("e", "i"):
            raise ConfigError(f"modality must be 'e' or 'i', got {modality!r}")
        return self.content_mlp(embedding)

    def encode_events(self, frames):
        """Frames (B, T, H, W, 3) in [0, 255] -> unit-norm (B, D')."""
        return self.event_encoder(self._as_tensor(frames) / 255.0)

    def encode_images(self, images):
        """Images (B, H, W, 3) in [0, 255] -> unit-norm (B, D')."""
        return self.image_encoder(self._as_tensor(images) / 255.0)

    def _as_tensor(self, value):
        if isinstance(value, torch.Tensor):
            return value.to(self.dtype)
        return torch.as_tensor(np.asarray(value), dtype=self.dtype)

    def _sigmas(self, embeddings, modality):
        sigma = self.content_prompts(embeddings, modality)
        return [None] * len(embeddings) if sigma is None else sigma

    def forward_batch(self, frames, labels, images=None) -> tuple[dict, LossReport]:
        """Embeddings and the alignment loss for one batch.

        ``labels`` are category indices; paired ``images`` may be omitted
        only in image-absent mode (``no_image`` config).
        """
        weights = self.config.loss_weights()
        f_e = self.encode_events(frames)
        text_e = self.text_encoder.encode_text(
            [int(l) for l in labels], self._sigmas(f_e, "e"))
        out = {"f_e": f_e, "f_te": text_e.fused, "text_e": text_e}
        if self.config.no_image or images is None:
            if not self.config.no_image:
                raise ConfigError("images are required unless no_image is set")
            report = total_loss(
                f_e, text_e.fused, text_e, weights, self.temperature.value,
                symmetric=self.config.symmetric_contrastive)
            return out, report
        f_i = self.encode_images(images)
        text_i = self.text_encoder.encode_text(
            [int(l) for l in labels], self._sigmas(f_i, "i"))
        out.update({"f_i": f_i, "f_ti": text_i.fused, "text_i": text_i})
        report = total_loss(
            f_e, text_e.fused, text_e, weights, self.temperature.value,
            f_i=f_i, f_ti=text_i.fused, text_i=text_i,
            symmetric=self.config.symmetric_contrastive)
        return out, report

    @torch.no_grad()
    def class_text_matrix(self, sigma=None) -> torch.Tensor:
        """Fused text embeddings for every category: (N_cls, D').

        ``sigma`` conditions all categories with one content prompt (the
        per-query case); None yields the unmodulated prompt matrix used
        for text-query retrieval.
        """
        n = len(self.categories)
        sigmas = None if sigma is None else sigma.expand(n, -1)
        return self.text_encoder.encode_text(list(range(n)), sigmas).fused

    @torch.no_grad()
    def recognition_probs(self, frames) -> np.ndarray:
        """Per-sample softmax class probabilities for a batch of frames.

        Content prompts are recomputed per query (they depend on the
        query's event embedding), so each sample gets its own class text
        matrix; the text forwards are batched over (sample, class) pairs.
        """
        f_e = self.encode_events(frames)
        text = self.query_text_matrices(f_e, "e")
        sims = torch.einsum("bd,bcd->bc", f_e, text)
        return torch.softmax(sims, dim=-1).cpu().numpy()

    @torch.no_grad()
    def query_text_matrices(self, embeddings, modality: str) -> torch.Tensor:
        """Per-query class text matrices: (B, N_cls, D')."""
        sigmas = self.content_prompts(embeddings, modality)
        n_cls = len(self.categories)
        b = len(embeddings)
        cats = list(range(n_cls)) * b
        sig_list = None if sigmas is None else sigmas.repeat_interleave(n_cls, dim=0)
        text = self.text_encoder.encode_text(cats, sig_list).fused
        return text.reshape(b, n_cls, -1)
