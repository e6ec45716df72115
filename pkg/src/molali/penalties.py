"""Differentiable connectivity and valence regularizers over relaxed graph tensors."""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .molgraph import QM9_VOCAB, AtomVocabulary, path_count


@dataclass(frozen=True)
class PenaltyWeights:
    mu: float = 0.005
    nu: float = 0.05
    a: float = 100.0

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise ValueError("penalty weights must be non-negative")
        if not self.a > 0:
            raise ValueError("smoothing a must be positive")


def _batched(A, X):
    A = torch.as_tensor(A)
    X = torch.as_tensor(X)
    if A.dim() == 3:
        A, X = A[None], X[None]
    return A, X


def connectivity_terms(A, X, weights: PenaltyWeights = PenaltyWeights()) -> torch.Tensor:
    """Per-graph connectivity penalty, shape (B,).

    Real node pairs without a path and ghost node pairs with a path are
    charged; only ordered pairs i != j count.
    """
    A, X = _batched(A, X)
    n = A.shape[-2]
    B = path_count(A, a=weights.a)
    g = X[..., 0]
    off = 1 - torch.eye(n, dtype=A.dtype)
    real = (1 - g)[..., :, None] * (1 - g)[..., None, :] * (1 - B)
    ghost = g[..., :, None] * g[..., None, :] * B
    return weights.mu / n**2 * ((real + ghost) * off).sum((-2, -1))


def valence_terms(A, X, vocab: AtomVocabulary = QM9_VOCAB,
                  weights: PenaltyWeights = PenaltyWeights()) -> torch.Tensor:
    """Per-graph valence penalty, shape (B,): hinge on bond load above capacity."""
    A, X = _batched(A, X)
    n = A.shape[-2]
    b = torch.as_tensor(vocab.bond_orders, dtype=A.dtype)
    u = torch.as_tensor(vocab.valence_capacity, dtype=A.dtype)
    off = 1 - torch.eye(n, dtype=A.dtype)
    load = ((A @ b) * off).sum(-1)
    return weights.nu / n * torch.relu(load - X @ u).sum(-1)


def connectivity_penalty(rg, weights: PenaltyWeights = PenaltyWeights()) -> torch.Tensor:
    """Batch mean of the connectivity penalty for a RelaxedGraph (or (A, X) pair)."""
    A, X = (rg.A, rg.X) if hasattr(rg, "A") else rg
    return connectivity_terms(A, X, weights).mean()


def valence_penalty(rg, vocab: AtomVocabulary = QM9_VOCAB,
                    weights: PenaltyWeights = PenaltyWeights()) -> torch.Tensor:
    A, X = (rg.A, rg.X) if hasattr(rg, "A") else rg
    return valence_terms(A, X, vocab, weights).mean()
