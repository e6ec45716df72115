"""Random graph model: noisy-softmax atom types, then valence-masked edge sampling to saturation."""
from __future__ import annotations

import numpy as np

from .molgraph import QM9_VOCAB, AtomVocabulary, MolecularGraph


def _softmax_pick(k: int, rng: np.random.Generator) -> int:
    """Categorical draw from the softmax of k fresh standard normals."""
    eps = rng.standard_normal(k)
    w = np.exp(eps - eps.max())
    return int(rng.choice(k, p=w / w.sum()))


def random_node_types(n: int, vocab: AtomVocabulary = QM9_VOCAB, rng: np.random.Generator | None = None) -> np.ndarray:
    """Type indices in 1..d for n real nodes."""
    if n < 1:
        raise ValueError("need at least one node")
    rng = rng if rng is not None else np.random.default_rng()
    return np.array([1 + _softmax_pick(vocab.d, rng) for _ in range(n)], dtype=np.int8)


def random_edges(types, vocab: AtomVocabulary = QM9_VOCAB, rng: np.random.Generator | None = None) -> MolecularGraph:
    """Add bonds one at a time among feasible (pair, order) choices until none remain."""
    rng = rng if rng is not None else np.random.default_rng()
    types = np.asarray(types, dtype=np.int8)
    n = len(types)
    remaining = vocab.valence_capacity[types].astype(int)
    orders = vocab.bond_orders[1:]
    bonds = np.zeros((n, n), dtype=np.int8)
    iu, ju = np.triu_indices(n, 1)
    while True:
        open_pair = (bonds[iu, ju] == 0) & (remaining[iu] >= 1) & (remaining[ju] >= 1)
        cand = np.flatnonzero(open_pair)
        if cand.size == 0:
            break
        k = cand[_softmax_pick(cand.size, rng)]
        i, j = iu[k], ju[k]
        feasible = np.flatnonzero(orders <= min(remaining[i], remaining[j]))
        t = feasible[_softmax_pick(feasible.size, rng)]
        bonds[i, j] = bonds[j, i] = t + 1
        remaining[i] -= orders[t]
        remaining[j] -= orders[t]
    if n < vocab.n_max:
        pad_t = np.zeros(vocab.n_max, dtype=np.int8)
        pad_t[:n] = types
        pad_b = np.zeros((vocab.n_max, vocab.n_max), dtype=np.int8)
        pad_b[:n, :n] = bonds
        types, bonds = pad_t, pad_b
    return MolecularGraph(types, bonds, vocab)


def sample_random_graph(n: int = 9, vocab: AtomVocabulary = QM9_VOCAB,
                        rng: np.random.Generator | None = None) -> MolecularGraph:
    rng = rng if rng is not None else np.random.default_rng()
    return random_edges(random_node_types(n, vocab, rng), vocab, rng)


class RandomModel:
    """Callable sample source; round r uses its own seeded stream.

    ``sizes`` is None for a fixed node count ``n``, "uniform" for n drawn
    uniformly from 1..n, or a probability vector over 1..len(sizes).
    """

    def __init__(self, n: int = 9, vocab: AtomVocabulary = QM9_VOCAB, seed: int = 0, sizes=None):
        self.n, self.vocab, self.seed = n, vocab, seed
        if sizes == "uniform":
            sizes = np.full(n, 1.0 / n)
        self.sizes = None if sizes is None else np.asarray(sizes, float) / np.sum(sizes)

    def _size(self, rng) -> int:
        if self.sizes is None:
            return self.n
        return 1 + int(rng.choice(len(self.sizes), p=self.sizes))

    def sample(self, count: int, stream: int = 0) -> list[MolecularGraph]:
        rng = np.random.default_rng([self.seed, stream])
        return [sample_random_graph(self._size(rng), self.vocab, rng) for _ in range(count)]

    def __call__(self, count: int, round_index: int = 0) -> list[MolecularGraph]:
        return self.sample(count, round_index)
