"""Descriptor histograms, exact 1-D earth mover's distance and the mEMD aggregate."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_BINS = 64


@dataclass(frozen=True)
class DescriptorHistogram:
    bin_edges: np.ndarray
    masses: np.ndarray
    source_std: float

    def __post_init__(self):
        if len(self.masses) != len(self.bin_edges) - 1:
            raise ValueError("need exactly one mass per bin")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1) > 1e-9:
            raise ValueError("masses must be non-negative and sum to 1")

    def supports(self, where: str = "left") -> np.ndarray:
        e = self.bin_edges
        if where == "left":
            return e[:-1]
        if where == "mid":
            return (e[:-1] + e[1:]) / 2
        raise ValueError(f"unknown support {where!r}")


def shared_edges(*samples, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Uniform edges spanning the union range of all samples."""
    vals = np.concatenate([np.asarray(s, dtype=float).ravel() for s in samples])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise ValueError("no finite values to bin")
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def histogram(values, edges: np.ndarray) -> DescriptorHistogram:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise ValueError("empty sample")
    counts, _ = np.histogram(values, bins=edges)
    return DescriptorHistogram(np.asarray(edges, float), counts / counts.sum(), float(values.std()))


def transport_1d(x: np.ndarray, p: np.ndarray, y: np.ndarray, q: np.ndarray) -> float:
    """Exact optimal transport cost under |x - y| via the monotone (north-west) coupling."""
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, p = np.asarray(x, float)[ox], np.asarray(p, float)[ox]
    y, q = np.asarray(y, float)[oy], np.asarray(q, float)[oy]
    i = j = 0
    rp, rq = (p[0] if len(p) else 0.0), (q[0] if len(q) else 0.0)
    cost = 0.0
    while i < len(p) and j < len(q):
        t = min(rp, rq)
        cost += t * abs(x[i] - y[j])
        rp -= t
        rq -= t
        if rp <= 0:
            i += 1
            rp = p[i] if i < len(p) else 0.0
        if rq <= 0:
            j += 1
            rq = q[j] if j < len(q) else 0.0
    return cost


def emd(h_ref: DescriptorHistogram, h_gen: DescriptorHistogram, support: str = "left") -> float:
    """Transport cost with ground distance normalized by the smaller source std."""
    scale = min(h_ref.source_std, h_gen.source_std)
    if not scale > 0:
        warnings.warn("zero standard deviation; using unnormalized ground cost", RuntimeWarning)
        scale = 1.0
    return transport_1d(h_ref.supports(support), h_ref.masses,
                        h_gen.supports(support), h_gen.masses) / scale


@dataclass
class MemdReport:
    emd: dict[str, float]
    memd: float
    bins: int
    support: str


def memd(ref: dict[str, np.ndarray], gen: dict[str, np.ndarray], bins: int = DEFAULT_BINS,
         support: str = "left") -> MemdReport:
    """Mean of exp(-EMD) over the descriptors present in both corpora."""
    names = [k for k in ref if k in gen]
    if not names:
        raise ValueError("no shared descriptors")
    out = {}
    for k in names:
        edges = shared_edges(ref[k], gen[k], bins=bins)
        out[k] = emd(histogram(ref[k], edges), histogram(gen[k], edges), support)
    score = sum(math.exp(-v) for v in out.values()) / len(out)
    return MemdReport(out, score, bins, support)


def kl_divergence(h_ref: DescriptorHistogram, h_gen: DescriptorHistogram) -> float:
    """KL(ref || gen) diagnostic; infinite when gen has no mass where ref does."""
    p, q = h_ref.masses, h_gen.masses
    on = p > 0
    if np.any(q[on] == 0):
        return math.inf
    return float(np.sum(p[on] * np.log(p[on] / q[on])))
