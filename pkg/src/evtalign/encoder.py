"""Prompt-augmented transformer encoder over event frames.

The encoder tokenizes each of the T frames into non-overlapping square
patches (CLS token first, layer-norm over the concatenated sequence), adds
a learnable spatial encoding plus a per-frame temporal encoding, and runs S
layers. Every layer first derives one cross-frame prompt per frame by
self-attention over the frames' current CLS tokens, then runs a standard
pre-norm transformer block over

    [CLS, event_prompts, message_tokens, cross_frame_prompt]

and keeps only CLS + message tokens for the next layer, so prompts never
accumulate. The event embedding is the per-frame CLS states projected to
the output width, averaged over frames, and L2-normalized.

Event prompts are one learnable set per layer, broadcast across frames;
``per_frame_prompts=True`` switches to dedicated per-frame parameters.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError

INIT_STD = 0.02


def patch_grid(height: int, width: int, patch: int) -> tuple[int, int]:
    """Number of patches L = H*W/patch^2 and the flattened patch width 3*patch^2."""
    if patch < 1 or height % patch or width % patch:
        raise ConfigError(
            f"frame geometry {height}x{width} not divisible by patch size {patch}")
    return (height // patch) * (width // patch), 3 * patch * patch


class SelfAttention(nn.Module):
    """Multi-head self-attention with optional key padding mask.

    When ``attn_sink`` is given, the softmax-normalized attention weights
    (B, heads, L, L) are appended to it.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise ConfigError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)

    def forward(self, x, key_padding_mask=None, attn_sink=None):
        b, n, d = x.shape
        h = self.heads
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        q = q.view(b, n, h, d // h).transpose(1, 2)
        k = k.view(b, n, h, d // h).transpose(1, 2)
        v = v.view(b, n, h, d // h).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(d // h)
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        attn = scores.softmax(dim=-1)
        if attn_sink is not None:
            attn_sink.append(attn)
        y = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.out(y)


class TransformerBlock(nn.Module):
    """Pre-norm block: x + Attn(LN(x)), then x + MLP(LN(x))."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x, key_padding_mask=None, attn_sink=None):
        x = x + self.attn(self.ln1(x), key_padding_mask, attn_sink)
        return x + self.mlp(self.ln2(x))


class CrossFramePrompts(nn.Module):
    """One prompt per frame from self-attention over the frames' CLS tokens.

    No positional encoding is used, so the mapping is equivariant under
    frame permutation.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)

    def forward(self, cls_tokens, attn_sink=None):
        # cls_tokens: (B, T, D) -> (B, T, D)
        return self.attn(self.ln(cls_tokens), attn_sink=attn_sink)


class EventEncoderLayer(nn.Module):
    """One prompt-augmented layer over per-frame token sequences."""

    def __init__(self, dim, heads, n_prompts, frames, per_frame_prompts=False):
        super().__init__()
        self.n_prompts = n_prompts
        self.per_frame_prompts = per_frame_prompts
        if n_prompts > 0:
            shape = (frames, n_prompts, dim) if per_frame_prompts else (n_prompts, dim)
            self.prompts = nn.Parameter(torch.empty(*shape).normal_(0.0, INIT_STD))
        else:
            self.prompts = None
        self.block = TransformerBlock(dim, heads)

    def forward(self, tokens, cross_frame=None, attn_sink=None):
        """tokens: (B, T, 1+n_d, D); cross_frame: (B, T, D) or None.

        Returns sequences of the same length: prompts and the cross-frame
        token are dropped after the block.
        """
        b, t, n, d = tokens.shape
        parts = [tokens[:, :, :1, :]]
        if self.prompts is not None:
            if self.per_frame_prompts:
                parts.append(self.prompts.unsqueeze(0).expand(b, -1, -1, -1))
            else:
                parts.append(self.prompts.expand(b, t, -1, -1))
        parts.append(tokens[:, :, 1:, :])
        if cross_frame is not None:
            parts.append(cross_frame.unsqueeze(2))
        seq = torch.cat(parts, dim=2)

        out = self.block(seq.reshape(b * t, -1, d), attn_sink=attn_sink)
        out = out.reshape(b, t, -1, d)

        n_p = self.n_prompts if self.prompts is not None else 0
        cls = out[:, :, :1, :]
        messages = out[:, :, 1 + n_p: 1 + n_p + (n - 1), :]
        return torch.cat([cls, messages], dim=2)


class EventEncoder(nn.Module):
    """Full event-frame encoder producing unit-norm embeddings.

    Args:
        frame_size: frame height/width (square frames).
        patch_size: square patch side; must divide frame_size.
        frames: number of frames T per sample.
        dim: token width D.
        out_dim: embedding width after the CLS projection.
        layers: number of encoder layers S.
        heads: attention heads per layer.
        n_prompts: event prompt count per layer (0 disables).
        per_frame_prompts: dedicated prompt parameters per frame.
        temporal_modeling: enables the temporal encoding and cross-frame
            prompts; off, frames are encoded independently and identically.
    """

    def __init__(self, frame_size=32, patch_size=8, frames=4, dim=64,
                 out_dim=64, layers=4, heads=4, n_prompts=4,
                 per_frame_prompts=False, temporal_modeling=True):
        super().__init__()
        n_patches, flat = patch_grid(frame_size, frame_size, patch_size)
        self.frame_size = frame_size
        self.patch_size = patch_size
        self.frames = frames
        self.dim = dim
        self.out_dim = out_dim
        self.n_patches = n_patches
        self.temporal_modeling = temporal_modeling

        # prompts/encodings use the small prompt-tuning init; projection
        # matrices use the usual width-scaled init so embeddings carry
        # input-dependent variance from the first step
        self.cls_token = nn.Parameter(torch.empty(dim).normal_(0.0, INIT_STD))
        self.patch_projection = nn.Parameter(
            torch.empty(flat, dim).normal_(0.0, flat ** -0.5))
        self.ln_embed = nn.LayerNorm(dim)
        self.spatial_encoding = nn.Parameter(
            torch.empty(1 + n_patches, dim).normal_(0.0, INIT_STD))
        self.temporal_encoding = nn.Parameter(torch.empty(frames, dim).normal_(0.0, INIT_STD))
        self.layers = nn.ModuleList([
            EventEncoderLayer(dim, heads, n_prompts, frames, per_frame_prompts)
            for _ in range(layers)
        ])
        self.cross_frame = nn.ModuleList([
            CrossFramePrompts(dim, heads) for _ in range(layers)
        ]) if temporal_modeling else None
        self.cls_projection = nn.Parameter(
            torch.empty(dim, out_dim).normal_(0.0, dim ** -0.5))

    def patchify_embed(self, frames):
        """Tokenize frames: (B, T, H, W, 3) -> (B, T, 1+L, D), LN applied.

        Patches are scanned row-major; each patch is flattened in
        (row, col, channel) order before projection.
        """
        b, t, h, w, c = frames.shape
        p = self.patch_size
        if h != self.frame_size or w != self.frame_size or c != 3:
            raise ConfigError(
                f"frame shape {(h, w, c)} does not match encoder geometry "
                f"({self.frame_size}, {self.frame_size}, 3)")
        gh, gw = h // p, w // p
        x = frames.reshape(b, t, gh, p, gw, p, c)
        x = x.permute(0, 1, 2, 4, 3, 5, 6).reshape(b, t, gh * gw, p * p * c)
        tokens = x @ self.patch_projection
        cls = self.cls_token.expand(b, t, 1, -1)
        return self.ln_embed(torch.cat([cls, tokens], dim=2))

    def add_temporal_encoding(self, tokens, frame_index=None):
        """Add spatial (position-wise) and temporal (per-frame) encodings.

        ``frame_index`` selects a single frame's temporal row for a
        (B, 1+L, D) sequence; None applies all rows to (B, T, 1+L, D).
        """
        if frame_index is not None:
            if not 0 <= frame_index < self.frames:
                raise ConfigError(f"frame index {frame_index} out of range [0, {self.frames})")
            return tokens + self.spatial_encoding + self.temporal_encoding[frame_index]
        return tokens + self.spatial_encoding + self.temporal_encoding[None, :, None, :]

    def cross_frame_prompts(self, cls_tokens, layer_index, attn_sink=None):
        """Per-frame cross-frame prompt tokens for one layer: (B, T, D)."""
        if self.cross_frame is None:
            raise ConfigError("temporal modeling is disabled")
        return self.cross_frame[layer_index](cls_tokens, attn_sink=attn_sink)

    def forward(self, frames, attn_sink=None):
        """Encode frames (B, T, H, W, 3) into unit-norm embeddings (B, out_dim)."""
        tokens = self.patchify_embed(frames)
        if self.temporal_modeling:
            tokens = self.add_temporal_encoding(tokens)
        else:
            tokens = tokens + self.spatial_encoding
        for s, layer in enumerate(self.layers):
            if self.temporal_modeling:
                x_cf = self.cross_frame_prompts(tokens[:, :, 0, :], s, attn_sink=attn_sink)
            else:
                x_cf = None
            tokens = layer(tokens, x_cf, attn_sink=attn_sink)
        cls = tokens[:, :, 0, :]
        emb = (cls @ self.cls_projection).mean(dim=1)
        return F.normalize(emb, dim=-1)


class ImageEncoder(nn.Module):
    """Plain ViT over single images: patchify, CLS, S blocks, CLS projection."""

    def __init__(self, image_size=32, patch_size=8, dim=64, out_dim=64,
                 layers=4, heads=4):
        super().__init__()
        n_patches, flat = patch_grid(image_size, image_size, patch_size)
        self.image_size = image_size
        self.patch_size = patch_size
        self.dim = dim
        self.out_dim = out_dim
        self.n_patches = n_patches

        self.cls_token = nn.Parameter(torch.empty(dim).normal_(0.0, INIT_STD))
        self.patch_projection = nn.Parameter(
            torch.empty(flat, dim).normal_(0.0, flat ** -0.5))
        self.ln_embed = nn.LayerNorm(dim)
        self.spatial_encoding = nn.Parameter(
            torch.empty(1 + n_patches, dim).normal_(0.0, INIT_STD))
        self.blocks = nn.ModuleList([TransformerBlock(dim, heads) for _ in range(layers)])
        self.cls_projection = nn.Parameter(
            torch.empty(dim, out_dim).normal_(0.0, dim ** -0.5))

    def forward(self, images, attn_sink=None):
        """Encode images (B, H, W, 3) into unit-norm embeddings (B, out_dim)."""
        b, h, w, c = images.shape
        p = self.patch_size
        if h != self.image_size or w != self.image_size or c != 3:
            raise ConfigError(
                f"image shape {(h, w, c)} does not match encoder geometry "
                f"({self.image_size}, {self.image_size}, 3)")
        gh, gw = h // p, w // p
        x = images.reshape(b, gh, p, gw, p, c)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(b, gh * gw, p * p * c)
        tokens = x @ self.patch_projection
        cls = self.cls_token.expand(b, 1, -1)
        x = self.ln_embed(torch.cat([cls, tokens], dim=1))
        x = x + self.spatial_encoding
        for block in self.blocks:
            x = block(x, attn_sink=attn_sink)
        emb = x[:, 0, :] @ self.cls_projection
        return F.normalize(emb, dim=-1)
