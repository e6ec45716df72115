"""Decoder g_theta(z, eps): latent-skip MLP, Gumbel-softmax relaxation, discretization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .molgraph import QM9_VOCAB, AtomVocabulary, MolecularGraph


@dataclass
class RelaxedGraph:
    """Batched relaxed tensors: A (B, n, n, m+1) and X (B, n, d+1)."""

    A: torch.Tensor
    X: torch.Tensor
    tau: float = 1.0

    def __len__(self) -> int:
        return self.A.shape[0]

    def detach(self) -> "RelaxedGraph":
        return RelaxedGraph(self.A.detach(), self.X.detach(), self.tau)


def sample_gumbel(shape, generator: torch.Generator | None = None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    tiny = torch.finfo(dtype).tiny
    inner = (-torch.log(u.clamp_min(tiny))).clamp_min(tiny)
    return -torch.log(inner)


def symmetric_gumbel(shape, generator=None, dtype=torch.float32) -> torch.Tensor:
    """Gumbel noise for (B, n, n, c) edge logits, mirrored from the upper triangle."""
    g = sample_gumbel(shape, generator, dtype)
    n = shape[1]
    upper = torch.triu(torch.ones(n, n, dtype=dtype), diagonal=1)[None, :, :, None]
    g = g * upper
    return g + g.transpose(1, 2)


class Generator(nn.Module):
    def __init__(self, vocab: AtomVocabulary = QM9_VOCAB, latent_dim: int = 96, noise_dim: int = 96,
                 hidden: tuple[int, ...] = (128, 256, 512), skip: bool = True):
        super().__init__()
        if skip and latent_dim % len(hidden):
            raise ValueError("latent_dim must split evenly across hidden layers")
        self.vocab = vocab
        self.n = vocab.n_max
        self.latent_dim = latent_dim
        self.skip = skip
        chunk = latent_dim // len(hidden) if skip else 0
        self.chunk = chunk
        layers = []
        prev = (chunk if skip else latent_dim) + noise_dim
        for width in hidden:
            layers.append(nn.Linear(prev, width))
            prev = width + chunk
        self.layers = nn.ModuleList(layers)
        last = hidden[-1]
        self.edge_head = nn.Linear(last, self.n * self.n * (vocab.m + 1))
        self.node_head = nn.Linear(last, self.n * (vocab.d + 1))

    def logits(self, z: torch.Tensor, eps: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Symmetrized edge logits (B, n, n, m+1) and node logits (B, n, d+1)."""
        if self.skip:
            parts = torch.split(z, self.chunk, dim=-1)
            h = torch.cat([parts[0], eps], dim=-1)
            for l, layer in enumerate(self.layers):
                if l:
                    h = torch.cat([h, parts[l]], dim=-1)
                h = torch.tanh(layer(h))
        else:
            h = torch.cat([z, eps], dim=-1)
            for layer in self.layers:
                h = torch.tanh(layer(h))
        n, v = self.n, self.vocab
        L = self.edge_head(h).reshape(-1, n, n, v.m + 1)
        L = (L + L.transpose(1, 2)) / 2
        return L, self.node_head(h).reshape(-1, n, v.d + 1)

    def forward(self, z, eps, tau: float = 1.0, gumbel: str | tuple | None = "sample",
                generator: torch.Generator | None = None) -> RelaxedGraph:
        """gumbel: "sample" draws fresh noise, None disables it, or an explicit (g_edge, g_node) pair."""
        if not tau > 0:
            raise ValueError(f"temperature must be positive, got {tau}")
        L, N = self.logits(z, eps)
        if gumbel == "sample":
            L = L + symmetric_gumbel(L.shape, generator, L.dtype)
            N = N + sample_gumbel(N.shape, generator, N.dtype)
        elif gumbel is not None:
            L = L + gumbel[0]
            N = N + gumbel[1]
        A = torch.softmax(L / tau, dim=-1)
        X = torch.softmax(N / tau, dim=-1)
        # self-loops carry no meaning; pin diagonal fibers to the ghost edge
        eye = torch.eye(self.n, dtype=A.dtype)[None, :, :, None]
        ghost = torch.zeros(self.vocab.m + 1, dtype=A.dtype)
        ghost[0] = 1
        A = A * (1 - eye) + eye * ghost
        return RelaxedGraph(A, X, tau)


def discretize_arrays(A: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fiberwise argmax (first maximum wins) on unbatched arrays; diagonal forced to ghost."""
    n = A.shape[0]
    types = np.argmax(X, axis=-1).astype(np.int8)
    orders = np.argmax(A, axis=-1).astype(np.int8)
    iu = np.triu_indices(n, 1)
    bonds = np.zeros((n, n), dtype=np.int8)
    bonds[iu] = orders[iu]
    bonds = bonds + bonds.T
    return types, bonds


def discretize(rg: RelaxedGraph, vocab: AtomVocabulary = QM9_VOCAB) -> list[MolecularGraph]:
    A = rg.A.detach().cpu().numpy()
    X = rg.X.detach().cpu().numpy()
    out = []
    for a, x in zip(A, X):
        types, bonds = discretize_arrays(a, x)
        out.append(MolecularGraph(types, bonds, vocab))
    return out


@torch.no_grad()
def sample_graphs(gen: Generator, n: int, seed: int, batch_size: int = 1024,
                  latent_dim: int = 96, noise_dim: int = 96, gumbel: bool = False) -> list[MolecularGraph]:
    """Draw n graphs from the prior. Without gumbel, each fiber decodes to its mode."""
    rng = torch.Generator().manual_seed(seed)
    dtype = next(gen.parameters()).dtype
    out: list[MolecularGraph] = []
    while len(out) < n:
        b = min(batch_size, n - len(out))
        z = torch.randn(b, latent_dim, generator=rng, dtype=dtype)
        eps = torch.randn(b, noise_dim, generator=rng, dtype=dtype)
        rg = gen(z, eps, gumbel="sample" if gumbel else None, generator=rng)
        out.extend(discretize(rg, gen.vocab))
    return out
