"""Circular (Morgan-style) fingerprints and Tanimoto similarity.

Identifiers are 64-bit integers built with a fixed splitmix64-style mixer,
so bits are stable across processes and platforms. They are not meant to
match any other toolkit bit-for-bit.
"""
from __future__ import annotations

import numpy as np

from ..molgraph import MolecularGraph
from .perception import perceive

FINGERPRINT_VERSION = "circular-mix64-v1"
_MASK = (1 << 64) - 1
_ATOMIC_NUMBER = {"C": 6, "N": 7, "O": 8, "F": 9}


def _mix(h: int, v: int) -> int:
    x = (h ^ (v & _MASK)) + 0x9E3779B97F4A7C15 & _MASK
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK
    return x ^ (x >> 31)


def _hash(values) -> int:
    h = 0x84222325CBF29CE4
    for v in values:
        h = _mix(h, v)
    return h


def circular_identifiers(graph: MolecularGraph, radius: int = 2) -> list[int]:
    """Identifiers of all distinct atom environments up to ``radius`` bonds."""
    p = perceive(graph)
    atoms = p.atoms
    ident = {}
    for i in atoms:
        ident[i] = _hash((_ATOMIC_NUMBER[p.symbols[i]], len(p.neighbors(i)), p.hcount[i],
                          0, int(i in p.ring_atoms)))
    out = list(ident.values())
    # environments as bond sets, so a substructure reached twice counts once
    env = {i: frozenset() for i in atoms}
    seen = set()
    for _ in range(radius):
        new_ident, new_env = {}, {}
        for i in atoms:
            nb = sorted((p.bond_type(i, j), ident[j]) for j in p.neighbors(i))
            new_ident[i] = _hash([ident[i]] + [x for pair in nb for x in pair])
            bonds = set(env[i])
            for j in p.neighbors(i):
                bonds.add(frozenset((i, j)))
                bonds |= env[j]
            new_env[i] = frozenset(bonds)
        for i in sorted(atoms, key=lambda a: new_ident[a]):
            if new_env[i] in seen or new_env[i] == env[i]:
                continue
            seen.add(new_env[i])
            out.append(new_ident[i])
        ident, env = new_ident, new_env
    return out


def fingerprint(graph: MolecularGraph, radius: int = 2, n_bits: int = 2048) -> np.ndarray:
    bits = np.zeros(n_bits, dtype=bool)
    for ident in circular_identifiers(graph, radius):
        bits[ident % n_bits] = True
    return bits


def fingerprint_matrix(graphs, radius: int = 2, n_bits: int = 2048) -> np.ndarray:
    return np.stack([fingerprint(g, radius, n_bits) for g in graphs]) if graphs else np.zeros((0, n_bits), bool)


def tanimoto(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def tanimoto_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Af = A.astype(np.float32)
    Bf = B.astype(np.float32)
    inter = Af @ Bf.T
    union = Af.sum(1)[:, None] + Bf.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return sim.astype(np.float64)


def internal_similarity(fps: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """For each row, the maximum Tanimoto similarity to any other row."""
    fps = np.asarray(fps, dtype=bool)
    n = len(fps)
    if n < 2:
        raise ValueError("internal similarity needs at least two fingerprints")
    out = np.empty(n)
    for s in range(0, n, chunk):
        sim = tanimoto_matrix(fps[s:s + chunk], fps)
        rows = np.arange(s, min(s + chunk, n))
        sim[rows - s, rows] = -np.inf
        out[s:s + chunk] = sim.max(axis=1)
    return out
