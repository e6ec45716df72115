"""Compute reference values with independent brute-force/LP routes and freeze them to tests/data/oracles.json.

None of these routines import molali; the tests compare the package against the frozen values.
Run: python3 scripts/dev/freeze_oracles.py
"""
from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

OUT = Path(__file__).resolve().parents[2] / "tests" / "data" / "oracles.json"


def lp_transport(x, p, y, q) -> float:
    """Generic transport LP: min <C, P> s.t. row sums p, column sums q, P >= 0."""
    n, m = len(x), len(y)
    C = np.abs(np.subtract.outer(x, y)).ravel()
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A_eq[n + j, j::m] = 1
    res = linprog(C, A_eq=A_eq, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0, res.message
    return float(res.fun)


def emd_cases(count=100, seed=20240611):
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        k = int(rng.integers(2, 33))
        edges = np.sort(rng.normal(size=k + 1) * rng.uniform(0.1, 10))
        p = rng.random(k) * (rng.random(k) > 0.3)
        q = rng.random(k) * (rng.random(k) > 0.3)
        p[rng.integers(k)] += 0.1
        q[rng.integers(k)] += 0.1
        p, q = p / p.sum(), q / q.sum()
        x = edges[:-1]
        cases.append({"support": x.tolist(), "p": p.tolist(), "q": q.tolist(), "lp": lp_transport(x, p, x, q)})
    return cases


def walk_counts(n, edges):
    """Count walks i -> j of lengths 1..n-1 by explicit enumeration of vertex sequences."""
    adj = {(i, j) for i, j in edges} | {(j, i) for i, j in edges}
    total = np.eye(n, dtype=int)
    for length in range(1, n):
        for seq in itertools.product(range(n), repeat=length + 1):
            if all((seq[t], seq[t + 1]) in adj for t in range(length)):
                total[seq[0], seq[-1]] += 1
    return total.tolist()


def walk_cases():
    cases = []
    for n in range(1, 5):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(1 << len(pairs)):
            edges = [pairs[k] for k in range(len(pairs)) if mask >> k & 1]
            cases.append({"n": n, "edges": edges, "raw": walk_counts(n, edges)})
    return cases


def softmax_normal_law(d=4, draws=2_000_000, seed=7):
    """Frequencies of categorical(softmax(eps)) with eps ~ N(0, I_d), simulated without the package."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((draws, d))
    w = np.exp(eps - eps.max(1, keepdims=True))
    w /= w.sum(1, keepdims=True)
    u = rng.random((draws, 1))
    pick = (u > np.cumsum(w, 1)).sum(1)
    return (np.bincount(pick, minlength=d) / draws).tolist()


def main():
    data = {
        "emd_lp": emd_cases(),
        "walks": walk_cases(),
        "softmax_normal_law": softmax_normal_law(),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data))
    print(f"wrote {OUT}: {len(data['emd_lp'])} EMD cases, {len(data['walks'])} walk cases")


if __name__ == "__main__":
    main()
