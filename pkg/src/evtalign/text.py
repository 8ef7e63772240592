"""Category-text encoding with hybrid prompts and content prompts.

Two branches produce one text embedding per (category, modality) pair:

* hand-crafted branch: the fixed template ``"a drafted image of a
  {category} ."`` is tokenized and embedded; a content prompt vector is
  added pointwise to every template-word embedding (never to the class
  tokens or the special tokens).
* learnable branch: ``n_prompts`` free prompt embeddings followed by the
  category's word embeddings, with the content prompt added to the prompt
  positions only.

Both branches run through the same toy text transformer and are read out
at the end-of-text token, projected to the shared embedding width. The
fused text embedding is the L2-normalized mean of the two branch vectors;
the pre-normalization branch vectors are kept for the consistency loss.

Content prompts are produced by a two-layer MLP from an event or image
embedding. The tokenizer is deliberately small: whitespace words with a
per-character fallback, deterministic given the category vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, DataError
from .encoder import INIT_STD, TransformerBlock

HANDCRAFTED_TEMPLATE = "a drafted image of a {} ."

PAD, SOT, EOT = 0, 1, 2
_SPECIALS = ["<pad>", "<sot>", "<eot>"]
_CHARSET = "abcdefghijklmnopqrstuvwxyz0123456789-_'."


class ToyTokenizer:
    """Whitespace tokenizer with character fallback.

    Known words map to single ids; unknown words decompose into their
    characters. The vocabulary is the fixed special/charset base plus the
    words registered at construction, so it is deterministic given the
    category list.
    """

    def __init__(self, extra_words=()):
        self.vocab: dict[str, int] = {}
        for tok in _SPECIALS:
            self.vocab[tok] = len(self.vocab)
        for ch in _CHARSET:
            self.vocab[ch] = len(self.vocab)
        for word in extra_words:
            word = word.strip().lower()
            if word and word not in self.vocab:
                self.vocab[word] = len(self.vocab)

    def __len__(self) -> int:
        return len(self.vocab)

    def encode_word(self, word: str) -> list[int]:
        word = word.lower()
        if word in self.vocab:
            return [self.vocab[word]]
        ids = []
        for ch in word:
            if ch not in self.vocab:
                raise DataError(f"cannot tokenize character {ch!r} in {word!r}")
            ids.append(self.vocab[ch])
        return ids

    def encode(self, text: str) -> list[int]:
        ids = []
        for word in text.strip().split():
            ids.extend(self.encode_word(word))
        return ids


class ContentPromptMLP(nn.Module):
    """Two-layer MLP mapping an embedding to one content prompt vector.

    The output layer starts at zero so prompts begin unmodulated; the
    modulation magnitude is learned. Without this, freshly initialized
    content prompts dwarf the prompt embeddings they are added to and
    the text tower can ride them instead of the class tokens.
    """

    def __init__(self, in_dim: int, prompt_dim: int):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, in_dim)
        self.fc2 = nn.Linear(in_dim, prompt_dim)
        nn.init.zeros_(self.fc2.weight)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, embedding):
        # (..., in_dim) -> (..., prompt_dim); one 1 x D_p prompt per embedding
        return self.fc2(F.gelu(self.fc1(embedding)))


@dataclass
class TextInputs:
    """One branch's token-embedding sequence plus bookkeeping for tests.

    class_mask marks class-token positions; prompt_mask marks positions
    that received the content prompt.
    """

    embeddings: torch.Tensor     # (length, D_p)
    class_mask: torch.Tensor     # (length,) bool
    prompt_mask: torch.Tensor    # (length,) bool
    eot_index: int


@dataclass
class TextEmbedding:
    """Branch embeddings (pre-normalization) and their fused unit-norm mean."""

    learnable: torch.Tensor      # (B, D') pre-normalization
    handcrafted: torch.Tensor    # (B, D') pre-normalization
    fused: torch.Tensor          # (B, D') unit-norm


class TextEncoder(nn.Module):
    """Toy transformer text encoder over hybrid prompt sequences.

    Width ``dim`` doubles as the token-embedding width D_p; ``out_dim``
    is the shared embedding space width.
    """

    def __init__(self, categories, dim=64, out_dim=64, layers=2, heads=4,
                 n_prompts=16, max_len=32):
        super().__init__()
        if not categories:
            raise ConfigError("at least one category is required")
        self.categories = [c.strip().lower() for c in categories]
        template_words = HANDCRAFTED_TEMPLATE.format("").split()
        self.tokenizer = ToyTokenizer(tuple(template_words) + tuple(self.categories))
        self.dim = dim
        self.out_dim = out_dim
        self.n_prompts = n_prompts
        self.max_len = max_len

        # token table keeps the default unit-scale init: class tokens are
        # the only thing distinguishing categories, and a from-scratch toy
        # needs them visible against the 0.02-scale prompt parameters
        self.token_embedding = nn.Embedding(len(self.tokenizer), dim)
        self.positional_encoding = nn.Parameter(torch.empty(max_len, dim).normal_(0.0, INIT_STD))
        self.learnable_prompts = nn.Parameter(torch.empty(n_prompts, dim).normal_(0.0, INIT_STD))
        self.blocks = nn.ModuleList([TransformerBlock(dim, heads) for _ in range(layers)])
        self.ln_final = nn.LayerNorm(dim)
        self.text_projection = nn.Parameter(
            torch.empty(dim, out_dim).normal_(0.0, dim ** -0.5))

        self._class_ids = [self.tokenizer.encode_word(c) for c in self.categories]
        self._template_ids = [self.tokenizer.encode_word(w)[0] for w in template_words]

    def category_index(self, name: str) -> int:
        name = name.strip().lower()
        try:
            return self.categories.index(name)
        except ValueError:
            raise DataError(f"unknown category {name!r}") from None

    def build_text_inputs(self, category, sigma=None) -> tuple[TextInputs, TextInputs]:
        """Token-embedding sequences for both branches of one category.

        ``category`` is an index or name; ``sigma`` is a content prompt
        (D_p,) added pointwise to template words / learnable prompts, or
        None for the unmodulated prompts.
        """
        if isinstance(category, str):
            category = self.category_index(category)
        if not 0 <= category < len(self.categories):
            raise DataError(f"category index {category} out of range")
        class_ids = self._class_ids[category]
        dtype = self.token_embedding.weight.dtype
        device = self.token_embedding.weight.device
        if sigma is None:
            sigma = torch.zeros(self.dim, dtype=dtype, device=device)

        def embed(ids):
            return self.token_embedding(torch.as_tensor(ids, device=device))

        period = self._template_ids[-1]
        words = self._template_ids[:-1]
        class_embed = embed(class_ids)

        hand_parts = [
            embed([SOT]),
            embed(words) + sigma,
            class_embed,
            embed([period]) + sigma,
            embed([EOT]),
        ]
        hand = torch.cat(hand_parts, dim=0)
        n_cls = len(class_ids)
        hand_class = torch.zeros(len(hand), dtype=torch.bool, device=device)
        hand_class[1 + len(words): 1 + len(words) + n_cls] = True
        hand_prompt = torch.zeros(len(hand), dtype=torch.bool, device=device)
        hand_prompt[1: 1 + len(words)] = True
        hand_prompt[1 + len(words) + n_cls] = True

        learn_parts = [
            embed([SOT]),
            self.learnable_prompts + sigma,
            class_embed,
            embed([EOT]),
        ]
        learn = torch.cat(learn_parts, dim=0)
        learn_class = torch.zeros(len(learn), dtype=torch.bool, device=device)
        learn_class[1 + self.n_prompts: 1 + self.n_prompts + n_cls] = True
        learn_prompt = torch.zeros(len(learn), dtype=torch.bool, device=device)
        learn_prompt[1: 1 + self.n_prompts] = True

        for seq in (hand, learn):
            if len(seq) > self.max_len:
                raise ConfigError(
                    f"text sequence length {len(seq)} exceeds max_len {self.max_len}")
        return (
            TextInputs(hand, hand_class, hand_prompt, len(hand) - 1),
            TextInputs(learn, learn_class, learn_prompt, len(learn) - 1),
        )

    def _encode_sequences(self, inputs: list[TextInputs], attn_sink=None):
        """Pad, mask, run the transformer, read out at EOT; (B, out_dim)."""
        dtype = self.token_embedding.weight.dtype
        device = self.token_embedding.weight.device
        max_len = max(len(i.embeddings) for i in inputs)
        pad_embed = self.token_embedding(torch.as_tensor([PAD], device=device))[0]
        batch = torch.stack([
            torch.cat([
                i.embeddings,
                pad_embed.expand(max_len - len(i.embeddings), -1),
            ]) if len(i.embeddings) < max_len else i.embeddings
            for i in inputs
        ])
        mask = torch.zeros(len(inputs), max_len, dtype=torch.bool, device=device)
        for row, i in enumerate(inputs):
            mask[row, len(i.embeddings):] = True
        x = batch + self.positional_encoding[:max_len]
        for block in self.blocks:
            x = block(x, key_padding_mask=mask, attn_sink=attn_sink)
        eot = torch.stack([x[row, i.eot_index] for row, i in enumerate(inputs)])
        return self.ln_final(eot) @ self.text_projection

    def encode_text(self, categories, sigmas=None, attn_sink=None) -> TextEmbedding:
        """Encode a batch of categories into fused text embeddings.

        ``sigmas`` is (B, D_p) content prompts or None for unmodulated
        prompts. Returns pre-normalization branch embeddings and the
        normalized fused embedding (B, out_dim).
        """
        if sigmas is None:
            sigmas = [None] * len(categories)
        hands, learns = [], []
        for category, sigma in zip(categories, sigmas):
            hand, learn = self.build_text_inputs(category, sigma)
            hands.append(hand)
            learns.append(learn)
        f_hand = self._encode_sequences(hands, attn_sink=attn_sink)
        f_learn = self._encode_sequences(learns, attn_sink=attn_sink)
        fused = F.normalize((f_learn + f_hand) / 2.0, dim=-1)
        return TextEmbedding(learnable=f_learn, handcrafted=f_hand, fused=fused)
