import numpy as np
import pytest
import torch

from helpers import small_corpus
from molali.adversarial import TrainConfig, build_model
from molali.latentops import (EmbeddingIndex, build_index, cosine_rank, embed, interpolate, interpolation_codes,
                              nearest_neighbors, tanimoto_neighbors)
from molali.metrics import fingerprint, tanimoto
from molali.molgraph import MolecularGraph, canonical_key


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    return build_model(TrainConfig(seed=0)).eval()


@pytest.fixture(scope="module")
def corpus():
    return small_corpus()


@pytest.fixture(scope="module")
def index(model, corpus):
    return build_index(model.encoder, corpus, split="test")


def test_row_norms(index):
    assert np.all(np.abs(np.linalg.norm(index.matrix, axis=1) - 1) <= 1e-6)


def test_embedding_bitwise_stable(model, corpus):
    a = embed(model.encoder, corpus[:5])
    b = embed(model.encoder, corpus[:5])
    assert np.array_equal(a, b)


def test_self_query_rank_one(model, corpus, index):
    for g in corpus[:10]:
        key, dist = nearest_neighbors(model.encoder, g, index, 1)[0]
        assert key == canonical_key(g) and dist <= 1e-6


def test_full_ranking_sorted(model, corpus, index):
    ranked = nearest_neighbors(model.encoder, corpus[3], index, len(index))
    dists = [d for _, d in ranked]
    assert len(ranked) == len(index)
    assert all(a <= b for a, b in zip(dists, dists[1:]))


def test_k_larger_than_index_truncates(model, corpus, index):
    assert len(nearest_neighbors(model.encoder, corpus[0], index, len(index) + 10)) == len(index)


def test_invalid_k_and_empty_index(model, corpus, index):
    with pytest.raises(ValueError):
        nearest_neighbors(model.encoder, corpus[0], index, 0)
    empty = EmbeddingIndex(np.zeros((0, 96)), ())
    with pytest.raises(ValueError):
        nearest_neighbors(model.encoder, corpus[0], empty, 1)


def test_cosine_rank_brute_force_1k():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(1000, 96))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    keys = tuple(f"k{i:04d}" for i in range(1000))
    index = EmbeddingIndex(rows, keys)
    for _ in range(10):
        q = rng.normal(size=96)
        got = cosine_rank(q, index, 25)
        qn = q / np.linalg.norm(q)
        brute = []
        for i in range(1000):
            cos = sum(float(a) * float(b) for a, b in zip(rows[i], qn))
            brute.append((max(1.0 - cos, 0.0), keys[i]))
        brute.sort()
        assert [k for k, _ in got] == [k for _, k in brute[:25]]
        assert np.allclose([d for _, d in got], [d for d, _ in brute[:25]], atol=1e-12)


def test_ranking_independent_of_insertion_order(model, corpus, index):
    perm = np.random.default_rng(1).permutation(len(index))
    shuffled = EmbeddingIndex(index.matrix[perm], tuple(index.keys[i] for i in perm))
    q = embed(model.encoder, [corpus[7]])[0]
    assert cosine_rank(q, index, 20) == cosine_rank(q, shuffled, 20)


def test_ties_broken_by_key():
    rows = np.tile(np.eye(4)[0], (3, 1))
    index = EmbeddingIndex(rows, ("c", "a", "b"))
    assert [k for k, _ in cosine_rank(np.eye(4)[0], index, 3)] == ["a", "b", "c"]


def test_index_round_trip(index, tmp_path):
    back = EmbeddingIndex.load(index.save(tmp_path / "idx"))
    assert np.array_equal(back.matrix, index.matrix)
    assert back.keys == index.keys and back.split == "test"


def test_tanimoto_self_and_disjoint(corpus):
    ranked = tanimoto_neighbors(corpus[5], corpus, 3)
    assert ranked[0] == (canonical_key(corpus[5]), 1.0)
    methane = MolecularGraph.from_atoms_bonds(["C"], [])
    difluorine = MolecularGraph.from_atoms_bonds(["F", "F"], [(0, 1, 1)])
    assert not np.any(fingerprint(methane) & fingerprint(difluorine))
    assert tanimoto_neighbors(methane, [difluorine], 1)[0][1] == 0.0


def test_tanimoto_exhaustive_scan(corpus):
    q = corpus[11]
    got = tanimoto_neighbors(q, corpus, len(corpus))
    fq = fingerprint(q)
    brute = sorted(((-tanimoto(fq, fingerprint(g)), canonical_key(g)) for g in corpus))
    assert [k for k, _ in got] == [k for _, k in brute]
    assert np.allclose([s for _, s in got], [-s for s, _ in brute])


def test_interpolation_codes_endpoints_and_symmetry():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=96), rng.normal(size=96)
    codes = interpolation_codes(a, b, 2)
    assert np.array_equal(codes[0], a) and np.array_equal(codes[1], b)
    fwd, rev = interpolation_codes(a, b, 7), interpolation_codes(b, a, 7)
    for t in range(7):
        assert np.array_equal(fwd[t], rev[6 - t])
    with pytest.raises(ValueError):
        interpolation_codes(a, b, 1)


def test_interpolate_emits_well_formed_graphs(model, corpus):
    steps = interpolate(model, corpus[0], corpus[20], 6)
    assert len(steps) == 6 and steps[0].t == 0.0 and steps[-1].t == 1.0
    for s in steps:
        X, A = s.graph.X, s.graph.A
        assert np.all(X.sum(-1) == 1) and np.all(A.sum(-1) == 1)
        assert np.array_equal(A, A.transpose(1, 0, 2))
        assert s.label.startswith("<") != s.valid
