"""Validity, uniqueness and novelty with resampling, plus the error-class table."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..molgraph import ERROR_CLASSES, MolecularGraph, canonical_key, validate

# source(n, round_index) -> n raw graphs
Source = Callable[[int, int], list[MolecularGraph]]


@dataclass
class VUNResult:
    validity: float
    uniqueness: float
    novelty: float
    rounds: int
    n: int
    valid_collected: int
    unique_collected: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _content_order(keys: list[str]) -> list[str]:
    """Pseudo-random order that depends only on the multiset of keys."""
    keys = sorted(keys)
    digest = hashlib.sha256("\n".join(keys).encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return [keys[i] for i in rng.permutation(len(keys))]


def sample_vun(source: Source, n: int = 10000, training_keys: Iterable[str] = (),
               max_rounds: int = 10) -> VUNResult:
    """Percentages in [0, 100]; shortfalls after max_rounds count against the denominator n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    training = set(training_keys)
    valid: list[str] = []
    unique: list[str] = []
    unique_set: set[str] = set()
    validity = 0.0
    rounds = 0
    for r in range(max_rounds):
        graphs = source(n, r)
        rounds += 1
        keys = [canonical_key(g) for g in graphs if validate(g).is_valid]
        if r == 0:
            validity = 100.0 * len(keys) / n
        for k in _content_order(keys):
            if len(valid) < n:
                valid.append(k)
            if k not in unique_set and len(unique) < n:
                unique_set.add(k)
                unique.append(k)
        if len(valid) >= n and len(unique) >= n:
            break
    uniqueness = 100.0 * len(set(valid[:n])) / n
    novelty = 100.0 * sum(k not in training for k in unique[:n]) / n
    return VUNResult(validity, uniqueness, novelty, rounds, n, len(valid), len(unique))


def error_table(graphs: Iterable[MolecularGraph]) -> dict[str, int]:
    """Counts per mutually exclusive class (ghost-node bond, valency, split graph, valid)."""
    counts = Counter({c: 0 for c in ERROR_CLASSES})
    for g in graphs:
        counts[validate(g).error_class] += 1
    return dict(counts)
