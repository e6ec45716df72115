"""Validity, uniqueness and novelty of the random graph model.

Runs the fixed-size sampler (n = 9 real nodes) and the variant that draws
n uniformly from 1..9, so the effect of the size choice on uniqueness is
visible side by side.

    python scripts/baseline_vun.py --n 10000 [--training train.smi]
"""
from __future__ import annotations

import argparse
import json

from molali.baseline import RandomModel
from molali.chemio import parse_smiles, read_smiles_file
from molali.metrics import error_table, sample_vun
from molali.molgraph import canonical_key


def evaluate(n: int, seed: int, training_keys=()) -> dict:
    out = {}
    for label, sizes in (("fixed_n9", None), ("uniform_1_9", "uniform")):
        model = RandomModel(seed=seed, sizes=sizes)
        vun = sample_vun(model, n, training_keys)
        out[label] = {**vun.as_dict(), "error_classes": error_table(model(n, 0))}
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--training", help="SMILES file used for novelty")
    args = p.parse_args(argv)
    keys = {canonical_key(parse_smiles(s)) for s in read_smiles_file(args.training)} if args.training else set()
    print(json.dumps(evaluate(args.n, args.seed, keys), indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
