"""Weighted soft-margin triplet loss over descriptor volumes.

Provided for verifying the training objective and for plugging in learned
extractors later; there is no optimizer here. All forms are overflow-safe:
log(1 + exp(x)) is evaluated as logaddexp(0, x).
"""

from __future__ import annotations

import numpy as np

from .features import make_descriptor

__all__ = [
    "DEFAULT_ALPHA",
    "soft_margin",
    "soft_margin_grad",
    "frobenius_distance",
    "total_loss",
    "exhaustive_triplet_count",
]

DEFAULT_ALPHA = 10.0


def soft_margin(d_pos, d_neg, alpha: float = DEFAULT_ALPHA):
    """log(1 + exp(alpha * (d_pos - d_neg))), elementwise over arrays."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    x = alpha * (np.asarray(d_pos, dtype=np.float64) - np.asarray(d_neg, dtype=np.float64))
    out = np.logaddexp(0.0, x)
    return float(out) if out.ndim == 0 else out


def soft_margin_grad(d_pos, d_neg, alpha: float = DEFAULT_ALPHA):
    """Analytic (d loss / d d_pos, d loss / d d_neg).

    d loss / d d_pos = alpha * sigmoid(alpha * (d_pos - d_neg)); the d_neg
    derivative is its negation.
    """
    x = alpha * (np.asarray(d_pos, dtype=np.float64) - np.asarray(d_neg, dtype=np.float64))
    # sigmoid via exp of the negative magnitude only, stable on both tails
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    g = alpha * sig
    if g.ndim == 0:
        return float(g), -float(g)
    return g, -g


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def total_loss(g_bottom, g_whole, pos_proj, pos_polar, neg_proj, neg_polar,
               alpha: float = DEFAULT_ALPHA) -> float:
    """Three-term triplet loss of one (anchor, positive, negative) group.

    Terms pair the bottom-half ground volume with the projective overhead
    volumes, the whole-image ground volume with the polar overhead volumes,
    and the channel-concatenated descriptors with each other.
    """
    term_bottom = soft_margin(frobenius_distance(g_bottom, pos_proj),
                              frobenius_distance(g_bottom, neg_proj), alpha)
    term_whole = soft_margin(frobenius_distance(g_whole, pos_polar),
                             frobenius_distance(g_whole, neg_polar), alpha)
    g_full = make_descriptor(g_bottom, g_whole)
    pos_full = make_descriptor(pos_proj, pos_polar)
    neg_full = make_descriptor(neg_proj, neg_polar)
    term_full = soft_margin(frobenius_distance(g_full, pos_full),
                            frobenius_distance(g_full, neg_full), alpha)
    return term_bottom + term_whole + term_full


def exhaustive_triplet_count(batch_size: int) -> int:
    """Triplets formed by the exhaustive mini-batch strategy: 2 B (B - 1).

    Each ground image anchors B-1 triplets against its matching overhead
    image, and each overhead image anchors another B-1 the other way round.
    """
    if batch_size < 2:
        raise ValueError(f"batch size must be >= 2, got {batch_size}")
    return 2 * batch_size * (batch_size - 1)
