"""Recognition and retrieval metrics.

Recognition turns an embedding's similarities to the per-category text
matrix into a softmax probability vector; the prediction is the argmax
with lowest-index tie-breaking. Retrieval ranks a gallery by dot-product
similarity (ties broken by gallery index) and reports the fraction of
queries whose top-k items contain a matching label.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def recognition_logits(embedding, text_matrix):
    """Softmax class probabilities from embedding/text similarities.

    ``embedding`` is (D,) or (B, D); ``text_matrix`` is (N_cls, D).
    Returns probabilities of matching leading shape, rows summing to 1.
    """
    emb = np.asarray(embedding, dtype=np.float64)
    txt = np.asarray(text_matrix, dtype=np.float64)
    sims = emb @ txt.T
    sims = sims - sims.max(axis=-1, keepdims=True)
    e = np.exp(sims)
    return e / e.sum(axis=-1, keepdims=True)


def predict(probabilities):
    """Argmax category index, lowest index on ties; (B,) for batched input."""
    p = np.asarray(probabilities)
    return int(np.argmax(p, axis=-1)) if p.ndim == 1 else np.argmax(p, axis=-1)


def recall_at_k(query_embs, gallery_embs, query_labels, gallery_labels, k: int) -> float:
    """Fraction of queries whose top-k retrieved items include a match.

    Similarity is the dot product; equal scores rank by gallery index.
    """
    queries = np.asarray(query_embs, dtype=np.float64)
    gallery = np.asarray(gallery_embs, dtype=np.float64)
    q_labels = np.asarray(query_labels)
    g_labels = np.asarray(gallery_labels)
    if len(gallery) == 0:
        raise ConfigError("gallery must be non-empty")
    if not 1 <= k <= len(gallery):
        raise ConfigError(f"k must be in [1, {len(gallery)}], got {k}")

    scores = queries @ gallery.T
    # stable sort on -scores keeps gallery-index order within ties
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    hits = g_labels[order] == q_labels[:, None]
    return float(hits.any(axis=1).mean())


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ConfigError("predictions and labels must have the same shape")
    return float((predictions == labels).mean())
