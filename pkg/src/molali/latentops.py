"""Latent-space services: embedding index, cosine/Tanimoto neighbors, interpolation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .generator import discretize
from .metrics.fingerprints import fingerprint, fingerprint_matrix, tanimoto_matrix
from .molgraph import MolecularGraph, canonical_key, validate

INDEX_FORMAT = "molali-embedding-index"


@dataclass(frozen=True)
class EmbeddingIndex:
    matrix: np.ndarray   # (N, latent) unit rows
    keys: tuple[str, ...]
    split: str = ""

    def __post_init__(self):
        if len(self.matrix) != len(self.keys):
            raise ValueError("one key per embedding row")

    def __len__(self) -> int:
        return len(self.keys)

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        np.save(path / "embeddings.npy", self.matrix)
        manifest = {"format": INDEX_FORMAT, "version": 1, "split": self.split,
                    "dim": int(self.matrix.shape[1]) if self.matrix.ndim == 2 else 0, "keys": list(self.keys)}
        (path / "manifest.json").write_text(json.dumps(manifest))
        return path

    @classmethod
    def load(cls, path) -> "EmbeddingIndex":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text())
        if manifest.get("format") != INDEX_FORMAT:
            raise ValueError(f"{path}: not an embedding index")
        return cls(np.load(path / "embeddings.npy"), tuple(manifest["keys"]), manifest.get("split", ""))


def _unit(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms > 0, norms, 1.0)


@torch.no_grad()
def embed(encoder, graphs: list[MolecularGraph], batch_size: int = 512) -> np.ndarray:
    """Encoder outputs with the noise input held at zero."""
    dtype = next(encoder.parameters()).dtype
    noise_dim = encoder.noise[0].in_features
    out = []
    for s in range(0, len(graphs), batch_size):
        chunk = graphs[s:s + batch_size]
        X = torch.from_numpy(np.stack([g.X for g in chunk])).to(dtype)
        A = torch.from_numpy(np.stack([g.A for g in chunk])).to(dtype)
        eps = torch.zeros(len(chunk), noise_dim, dtype=dtype)
        out.append(encoder(X, A, eps).double().numpy())
    return np.concatenate(out) if out else np.zeros((0, encoder.out.out_features))


def build_index(encoder, graphs: list[MolecularGraph], split: str = "", keys=None) -> EmbeddingIndex:
    keys = tuple(keys) if keys is not None else tuple(canonical_key(g) for g in graphs)
    return EmbeddingIndex(_unit(embed(encoder, graphs)), keys, split)


def _rank(scores: np.ndarray, keys, k: int, descending: bool) -> list[tuple[str, float]]:
    order = sorted(range(len(keys)), key=lambda i: ((-scores[i] if descending else scores[i]), keys[i]))
    return [(keys[i], float(scores[i])) for i in order[:k]]


def nearest_neighbors(encoder, query: MolecularGraph, index: EmbeddingIndex, k: int) -> list[tuple[str, float]]:
    """Top-k index entries by cosine distance (1 - cos), ties broken by key."""
    if len(index) == 0:
        raise ValueError("empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _unit(embed(encoder, [query]))[0]
    return cosine_rank(q, index, k)


def cosine_rank(q: np.ndarray, index: EmbeddingIndex, k: int) -> list[tuple[str, float]]:
    dist = 1.0 - index.matrix @ _unit(q[None])[0]
    return _rank(np.maximum(dist, 0.0), index.keys, k, descending=False)


def tanimoto_neighbors(query: MolecularGraph, corpus: list[MolecularGraph], k: int,
                       keys=None, fps: np.ndarray | None = None) -> list[tuple[str, float]]:
    """Top-k corpus molecules by fingerprint Tanimoto similarity, descending."""
    keys = list(keys) if keys is not None else [canonical_key(g) for g in corpus]
    fps = fps if fps is not None else fingerprint_matrix(corpus)
    sim = tanimoto_matrix(fingerprint(query)[None], fps)[0]
    return _rank(sim, keys, k, descending=True)


def interpolation_codes(z_a: np.ndarray, z_b: np.ndarray, steps: int) -> np.ndarray:
    """Equally spaced points on the segment, symmetric under swapping the endpoints."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    s = steps - 1
    t = np.arange(steps, dtype=float)[:, None]
    return ((s - t) * z_a[None] + t * z_b[None]) / s


@dataclass
class InterpolationStep:
    t: float
    graph: MolecularGraph
    valid: bool
    label: str


@torch.no_grad()
def interpolate(model, g_a: MolecularGraph, g_b: MolecularGraph, steps: int) -> list[InterpolationStep]:
    """Decode points between the two embeddings; invalid intermediates are kept and labeled."""
    z = embed(model.encoder, [g_a, g_b])
    codes = interpolation_codes(z[0], z[1], steps)
    dtype = next(model.generator.parameters()).dtype
    zt = torch.from_numpy(codes).to(dtype)
    eps = torch.zeros(steps, model.noise_dim, dtype=dtype)
    graphs = discretize(model.generator(zt, eps, gumbel=None), model.vocab)
    out = []
    for i, g in enumerate(graphs):
        rep = validate(g)
        label = canonical_key(g) if rep.is_valid else f"<{rep.error_class}>"
        out.append(InterpolationStep(i / (steps - 1), g, rep.is_valid, label))
    return out
