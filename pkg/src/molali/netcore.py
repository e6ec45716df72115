"""GIN backbones over multi-relational graphs, and the encoder/discriminator heads.

All modules take dense batched tensors: node matrix X of shape (B, n, d+1)
and adjacency A of shape (B, n, n, m+1). Inputs may be one-hot or relaxed
(simplex-valued); channel 0 of A (ghost edge) never carries messages.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

CHECKPOINT_FORMAT = "molali-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class GinConfig:
    node_dim: int = 5
    n_edge_types: int = 3
    units: int = 128
    n_layers: int = 2
    pool_units: int = 128
    head_units: tuple[int, ...] = (128, 64)
    skip: bool = True
    attention: bool = True


class GINLayer(nn.Module):
    """h_i' = tanh(sum_k Linear_k((1 + eps) h_i + sum_{u in N_k(i)} h_u))."""

    def __init__(self, in_dim: int, units: int, n_edge_types: int):
        super().__init__()
        self.maps = nn.ModuleList(nn.Linear(in_dim, units) for _ in range(n_edge_types))
        self.eps = nn.Parameter(torch.zeros(()))

    def forward(self, H: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        if A.shape[-1] != len(self.maps) + 1 or A.shape[-2] != H.shape[-2]:
            raise ValueError(f"shape mismatch: H {tuple(H.shape)}, A {tuple(A.shape)}")
        own = (1 + self.eps) * H
        out = 0
        for k, lin in enumerate(self.maps, start=1):
            out = out + lin(own + A[..., k] @ H)
        return torch.tanh(out)


class GraphPool(nn.Module):
    """Soft-attention sum pooling over node slots (ghost rows included)."""

    def __init__(self, in_dim: int, units: int, attention: bool = True):
        super().__init__()
        self.proj = nn.Linear(in_dim, units)
        self.gate = nn.Linear(units, units) if attention else None

    def forward(self, features: list[torch.Tensor]) -> torch.Tensor:
        h = torch.tanh(self.proj(torch.cat(features, dim=-1)))
        if self.gate is not None:
            h = torch.sigmoid(self.gate(h)) * h
        return h.sum(dim=-2)


def _mlp(sizes: list[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [nn.Linear(a, b), nn.Tanh()]
    return nn.Sequential(*layers)


class GIN(nn.Module):
    """GIN layers, skip-concat pooling and a tanh MLP yielding h'_G."""

    def __init__(self, cfg: GinConfig = GinConfig()):
        super().__init__()
        self.cfg = cfg
        dims = [cfg.node_dim] + [cfg.units] * cfg.n_layers
        self.layers = nn.ModuleList(
            GINLayer(dims[l], dims[l + 1], cfg.n_edge_types) for l in range(cfg.n_layers)
        )
        pool_in = sum(dims) if cfg.skip else dims[-1]
        self.pool = GraphPool(pool_in, cfg.pool_units, cfg.attention)
        self.head = _mlp([cfg.pool_units, *cfg.head_units])

    @property
    def out_dim(self) -> int:
        return self.cfg.head_units[-1] if self.cfg.head_units else self.cfg.pool_units

    def node_features(self, X, A) -> list[torch.Tensor]:
        feats = [X]
        for layer in self.layers:
            feats.append(layer(feats[-1], A))
        return feats

    def forward(self, X: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
        feats = self.node_features(X, A)
        pooled = self.pool(feats if self.cfg.skip else feats[-1:])
        return self.head(pooled)


class Encoder(nn.Module):
    """z~ = g_phi(G, eps): graph branch and noise branch, concatenated and projected."""

    def __init__(self, gin: GinConfig = GinConfig(), noise_dim: int = 96, noise_units: int = 256,
                 latent_dim: int = 96):
        super().__init__()
        self.gin = GIN(gin)
        self.noise = nn.Sequential(nn.Linear(noise_dim, noise_units), nn.Tanh())
        self.out = nn.Linear(self.gin.out_dim + noise_units, latent_dim)

    def forward(self, X, A, eps):
        return self.out(torch.cat([self.gin(X, A), self.noise(eps)], dim=-1))


class JointDiscriminator(nn.Module):
    """D_psi(G, z): same layout as the encoder with a scalar output."""

    def __init__(self, gin: GinConfig = GinConfig(), latent_dim: int = 96, z_units: int = 256):
        super().__init__()
        self.gin = GIN(gin)
        self.z_branch = nn.Sequential(nn.Linear(latent_dim, z_units), nn.Tanh())
        self.out = nn.Linear(self.gin.out_dim + z_units, 1)

    def forward(self, X, A, z):
        return self.out(torch.cat([self.gin(X, A), self.z_branch(z)], dim=-1)).squeeze(-1)


class UnaryDiscriminator(nn.Module):
    def __init__(self, gin: GinConfig = GinConfig()):
        super().__init__()
        self.gin = GIN(gin)
        self.out = nn.Linear(self.gin.out_dim, 1)

    def forward(self, X, A):
        return self.out(self.gin(X, A)).squeeze(-1)


class CycleDiscriminator(nn.Module):
    """D_eta(G1, G2): two GIN modules, element-wise product, 2-layer MLP."""

    def __init__(self, gin: GinConfig = GinConfig(), units: int = 64, shared: bool = False):
        super().__init__()
        self.gin1 = GIN(gin)
        self.gin2 = self.gin1 if shared else GIN(gin)
        self.mlp = nn.Sequential(nn.Linear(self.gin1.out_dim, units), nn.Tanh(), nn.Linear(units, 1))

    def forward(self, X1, A1, X2, A2):
        h = self.gin1(X1, A1) * self.gin2(X2, A2)
        return self.mlp(h).squeeze(-1)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# checkpoints ------------------------------------------------------------------

def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def save_checkpoint(path, module: nn.Module, config: dict | None = None, extra: dict | None = None) -> Path:
    """Named float arrays plus a JSON header in one .npz, written atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": _jsonable(config or {}),
        "extra": _jsonable(extra or {}),
    }
    arrays = {name: t.detach().cpu().numpy() for name, t in module.state_dict().items()}
    arrays["__header__"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with np.load(path) as data:
        header = json.loads(data["__header__"].tobytes().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        arrays = {k: data[k] for k in data.files if k != "__header__"}
    return header, arrays


def load_state(module: nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = {k: torch.from_numpy(v) for k, v in arrays.items()}
    module.load_state_dict(state)
