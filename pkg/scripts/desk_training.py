"""Desk-scale training signal: full model vs. the run without connectivity and valence penalties.

Trains both presets on the same random subset with the same seed and compares
final probe validity. The comparison counts as reproduced when the full model
reaches >= 60% and the penalty-free run is at least 10 points lower.

    python scripts/desk_training.py --source $QM9_PATH --out runs/desk
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from molali import dataset as ds
from molali.adversarial import TrainConfig, probe_validity, train

PRESETS = ("ALMGIG", "No Conn+Valence")


def subset(graphs, n: int, seed: int):
    idx = np.random.default_rng(seed).choice(len(graphs), size=min(n, len(graphs)), replace=False)
    return [graphs[i] for i in sorted(idx)]


def run_desk(train_graphs, out: Path, epochs: int = 30, seed: int = 0, n: int = 10000,
             final_samples: int = 4096, log=print) -> dict:
    graphs = subset(train_graphs, n, seed)
    out.mkdir(parents=True, exist_ok=True)
    result = {"n_train": len(graphs), "epochs": epochs, "seed": seed, "runs": {}}
    for name in PRESETS:
        config = TrainConfig.preset(name, epochs=epochs, seed=seed, checkpoint_every=0)
        t0 = time.perf_counter()

        def progress(rec, secs, name=name):
            log(f"[{name}] epoch {rec['epoch']:3d}  probe validity {rec['probe_validity']:.3f}  {secs:.1f}s")

        res = train(config, graphs, out / name.replace(" ", "_").replace("+", "_"), progress=progress)
        res.model.eval()
        result["runs"][name] = {
            "probe_validity": res.history[-1]["probe_validity"] if res.history else None,
            "validity_large_sample": probe_validity(res.model, final_samples, seed + 1),
            "seconds": time.perf_counter() - t0,
        }
    full = result["runs"]["ALMGIG"]["probe_validity"]
    ablated = result["runs"]["No Conn+Valence"]["probe_validity"]
    result["gap_points"] = 100 * (full - ablated)
    result["reproduced"] = bool(full >= 0.60 and result["gap_points"] >= 10)
    (out / "result.json").write_text(json.dumps(result, indent=2))
    return result


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--source", default=os.environ.get("QM9_PATH"), help="raw QM9 release (default $QM9_PATH)")
    p.add_argument("--data", help="ingested cache directory instead of --source")
    p.add_argument("--out", default="runs/desk")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if args.data:
        train_graphs = ds.read_cache(args.data).train
    elif args.source:
        train_graphs = ds.split_dataset(ds.load_qm9(args.source)).train
    else:
        print("need --source, --data or QM9_PATH", file=sys.stderr)
        return 2
    result = run_desk(train_graphs, Path(args.out), args.epochs, args.seed, args.n)
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
