"""Shared test utilities: corpus fixtures, random relaxed graphs, finite differences."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from molali.chemio import parse_smiles

DATA = Path(__file__).parent / "data"
ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def oracles() -> dict:
    return json.loads((DATA / "oracles.json").read_text())


def small_corpus():
    return [parse_smiles(s) for s in (DATA / "small.smi").read_text().split()]


def random_relaxed(rng: np.random.Generator, b: int = 1, n: int = 9, m1: int = 4, d1: int = 5,
                   sharp: float = 1.0, dtype=torch.float64):
    """Symmetric simplex-valued adjacency (ghost diagonal) and node rows."""
    L = rng.normal(size=(b, n, n, m1)) * sharp
    L = (L + L.transpose(0, 2, 1, 3)) / 2
    A = np.exp(L) / np.exp(L).sum(-1, keepdims=True)
    eye = np.eye(n)[None, :, :, None]
    ghost = np.eye(m1)[0]
    A = A * (1 - eye) + eye * ghost
    N = rng.normal(size=(b, n, d1)) * sharp
    X = np.exp(N) / np.exp(N).sum(-1, keepdims=True)
    return torch.tensor(A, dtype=dtype), torch.tensor(X, dtype=dtype)


def directional_check(f, inputs: list[torch.Tensor], rng: np.random.Generator, h: float = 1e-6,
                      directions: int = 3, mask=None) -> float:
    """Worst relative error between autograd and central differences along random directions.

    f maps the input list to a scalar. ``mask`` optionally lists per-input masks
    that zero direction entries (e.g. to keep symmetry or the ghost diagonal).
    """
    inputs = [x.detach().clone().requires_grad_(True) for x in inputs]
    out = f(inputs)
    grads = torch.autograd.grad(out, inputs, allow_unused=True)
    worst = 0.0
    for _ in range(directions):
        vs = [torch.tensor(rng.normal(size=x.shape), dtype=x.dtype) for x in inputs]
        if mask is not None:
            vs = [v * m if m is not None else v for v, m in zip(vs, mask)]
        analytic = sum(float((g * v).sum()) for g, v in zip(grads, vs) if g is not None)
        with torch.no_grad():
            plus = float(f([x + h * v for x, v in zip(inputs, vs)]))
            minus = float(f([x - h * v for x, v in zip(inputs, vs)]))
        numeric = (plus - minus) / (2 * h)
        scale = max(abs(analytic), abs(numeric), 1e-7)
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def param_check(f, module: torch.nn.Module, rng: np.random.Generator, h: float = 1e-6, directions: int = 2) -> float:
    """Directional central-difference check with respect to all parameters of ``module``."""
    params = [p for p in module.parameters() if p.requires_grad]
    out = f()
    grads = torch.autograd.grad(out, params, allow_unused=True)
    worst = 0.0
    for _ in range(directions):
        vs = [torch.tensor(rng.normal(size=p.shape), dtype=p.dtype) for p in params]
        analytic = sum(float((g * v).sum()) for g, v in zip(grads, vs) if g is not None)
        vals = []
        for sign in (1, -1):
            with torch.no_grad():
                for p, v in zip(params, vs):
                    p.add_(sign * h * v)
            vals.append(float(f().detach()))  # f may need autograd internally
            with torch.no_grad():
                for p, v in zip(params, vs):
                    p.sub_(sign * h * v)
        numeric = (vals[0] - vals[1]) / (2 * h)
        scale = max(abs(analytic), abs(numeric), 1e-7)
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def permutation_matrix_apply(perm, X, A):
    p = torch.as_tensor(perm)
    return X[:, p], A[:, p][:, :, p]
