"""Evaluation protocol: VUN, descriptors, fingerprints, histograms and mEMD."""
from __future__ import annotations

import numpy as np

from .descriptors import DESCRIPTOR_NAMES, DescriptorVector, descriptors
from .emd import DescriptorHistogram, MemdReport, emd, histogram, kl_divergence, memd, shared_edges, transport_1d
from .fingerprints import fingerprint, fingerprint_matrix, internal_similarity, tanimoto, tanimoto_matrix
from .vun import VUNResult, error_table, sample_vun

__all__ = [
    "DESCRIPTOR_NAMES", "DescriptorVector", "descriptors", "DescriptorHistogram", "MemdReport", "emd",
    "histogram", "kl_divergence", "memd", "shared_edges", "transport_1d", "fingerprint",
    "fingerprint_matrix", "internal_similarity", "tanimoto", "tanimoto_matrix", "VUNResult",
    "error_table", "sample_vun", "corpus_descriptors",
]


def corpus_descriptors(graphs, radius: int = 2, n_bits: int = 2048) -> dict[str, np.ndarray]:
    """Descriptor columns for a corpus of valid graphs, internal similarity included."""
    graphs = list(graphs)
    rows = [descriptors(g) for g in graphs]
    out = {name: np.array([getattr(r, name) for r in rows], dtype=float)
           for name in DESCRIPTOR_NAMES if name != "internal_similarity"}
    if len(graphs) >= 2:
        out["internal_similarity"] = internal_similarity(fingerprint_matrix(graphs, radius, n_bits))
    return {name: out[name] for name in DESCRIPTOR_NAMES if name in out}
