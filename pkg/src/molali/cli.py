"""Command-line entry point: ingest, train, generate, baseline, evaluate, nn, interpolate, plot."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dataset as ds

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
REPORT_SCHEMA_VERSION = 1


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# run directories ---------------------------------------------------------------

def fresh_dir(path) -> Path:
    """``path`` itself if unused, else the first free ``path-N``."""
    path = Path(path)
    if not path.exists() or not any(path.iterdir()):
        path.mkdir(parents=True, exist_ok=True)
        return path
    k = 1
    while True:
        cand = path.with_name(f"{path.name}-{k}")
        if not cand.exists():
            cand.mkdir(parents=True)
            return cand
        k += 1


def write_manifest(out: Path, command: str, config: dict, seed, outputs: list, dataset_hash=None, started=None):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "code_version": __version__,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": [str(p) for p in outputs],
        "dataset_hash": dataset_hash,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err


def _data_dir(args) -> Path:
    return Path(args.data) if getattr(args, "data", None) else ds.cache_root() / "qm9"


def _read_split(args):
    d = _data_dir(args)
    if not (d / "manifest.json").exists():
        raise ConfigError(f"no ingested dataset at {d}; run `ingest` first or pass --data")
    return ds.read_cache(d), ds.dataset_hash(d)


def _write_smiles_out(out: Path, graphs, extra: dict) -> list[Path]:
    from .chemio import write_smiles
    from .metrics.vun import error_table
    from .molgraph import validate

    lines = []
    for g in graphs:
        rep = validate(g)
        lines.append(write_smiles(g) if rep.is_valid else f"# {rep.error_class}")
    smi = out / "samples.smi"
    smi.write_text("".join(s + "\n" for s in lines))
    table = error_table(graphs)
    stats = out / "stats.json"
    stats.write_text(json.dumps({"n": len(graphs), "error_classes": table, **extra}, indent=2))
    print(json.dumps({"error_classes": table}))
    return [smi, stats]


# subcommands --------------------------------------------------------------------

def cmd_ingest(args) -> int:
    source = args.source or os.environ.get("QM9_PATH")
    if not source:
        raise ConfigError("no source given: pass --source or set QM9_PATH")
    if not Path(source).exists():
        raise ConfigError(f"source {source} does not exist")
    started = _now()
    corpus = ds.load_qm9(source, limit=args.limit)
    split = ds.split_dataset(corpus, seed=args.seed if args.seed is not None else ds.DEFAULT_SPLIT_SEED)
    out = Path(args.out) if args.out else ds.cache_root() / "qm9"
    ds.write_cache(out, split, corpus.stats, source=str(source))
    write_manifest(out, "ingest", {"source": str(source), "limit": args.limit}, split.split_seed,
                   [out / "manifest.json"], ds.dataset_hash(out), started)
    print(json.dumps({"kept": len(corpus), "splits": split.sizes(), "stats": corpus.stats}))
    return EXIT_OK


def cmd_train(args) -> int:
    from .adversarial import ABLATIONS, TrainConfig, train

    raw = _load_config(args.config)
    if args.ablation:
        if args.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {args.ablation!r}; choose from {list(ABLATIONS)}")
        raw["ablation_name"] = args.ablation
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.epochs is not None:
        raw["epochs"] = args.epochs
    try:
        config = TrainConfig.from_dict(raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    started = _now()
    split, dhash = _read_split(args)
    graphs = split.train[: args.limit] if args.limit else split.train
    out = fresh_dir(args.out or "runs/train")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))

    def progress(rec, secs):
        print(json.dumps({"epoch": rec["epoch"], "probe_validity": rec["probe_validity"], "seconds": round(secs, 1)}),
              flush=True)

    result = train(config, graphs, out, progress=progress)
    write_manifest(out, "train", config.to_dict(), config.seed, [result.log_path, *result.checkpoints], dhash, started)
    return EXIT_OK


def _load_model(path):
    from .adversarial import load_model

    if not path or not Path(path).exists():
        raise ConfigError(f"checkpoint {path!r} not found")
    return load_model(path)


def cmd_generate(args) -> int:
    from .generator import sample_graphs

    model, config = _load_model(args.checkpoint)
    seed = args.seed if args.seed is not None else 0
    started = _now()
    graphs = sample_graphs(model.generator, args.n, seed, latent_dim=model.latent_dim, noise_dim=model.noise_dim)
    out = fresh_dir(args.out or "runs/generate")
    paths = _write_smiles_out(out, graphs, {"checkpoint": str(args.checkpoint), "seed": seed})
    write_manifest(out, "generate", {"checkpoint": str(args.checkpoint), "n": args.n}, seed, paths, None, started)
    return EXIT_OK


def cmd_baseline(args) -> int:
    from .baseline import RandomModel

    seed = args.seed if args.seed is not None else 0
    started = _now()
    model = RandomModel(n=args.atoms, seed=seed, sizes="uniform" if args.uniform_size else None)
    graphs = model(args.n, 0)
    out = fresh_dir(args.out or "runs/baseline")
    paths = _write_smiles_out(out, graphs, {"model": "random", "atoms": args.atoms, "seed": seed})
    write_manifest(out, "baseline", {"n": args.n, "atoms": args.atoms, "uniform_size": args.uniform_size},
                   seed, paths, None, started)
    return EXIT_OK


def _graphs_from_smiles(path):
    from .chemio import SmilesError, parse_smiles

    graphs = []
    for line in Path(path).read_text().splitlines():
        s = line.split()[0] if line.strip() else ""
        if not s or s.startswith("#"):
            continue
        try:
            graphs.append(parse_smiles(s))
        except SmilesError:
            continue
    return graphs


def cmd_evaluate(args) -> int:
    from .metrics import corpus_descriptors, memd, sample_vun
    from .metrics.emd import histogram, shared_edges
    from .molgraph import canonical_key, validate

    started = _now()
    seed = args.seed if args.seed is not None else 0
    ref_graphs, train_keys, dhash = None, set(), None
    if args.reference:
        ref_graphs = _graphs_from_smiles(args.reference)
    else:
        split, dhash = _read_split(args)
        ref_graphs = getattr(split, args.split)
        train_keys = set(split.train_smiles or [])
    if args.training:
        train_keys = set(canonical_key(g) for g in _graphs_from_smiles(args.training))
    if args.limit:
        ref_graphs = ref_graphs[: args.limit]

    vun = None
    if args.checkpoint:
        from .generator import sample_graphs

        model, _ = _load_model(args.checkpoint)

        def source(n, r):
            return sample_graphs(model.generator, n, seed * 1000 + r, latent_dim=model.latent_dim,
                                 noise_dim=model.noise_dim)

        vun = sample_vun(source, args.n, train_keys).as_dict()
        gen_graphs = [g for g in source(args.n, 0) if validate(g).is_valid]
    elif args.generated:
        gen_graphs = _graphs_from_smiles(args.generated)
    else:
        raise ConfigError("pass --checkpoint or --generated")
    if not gen_graphs or not ref_graphs:
        raise RuntimeError("need at least one valid generated and one reference molecule")

    ref_d = corpus_descriptors(ref_graphs)
    gen_d = corpus_descriptors(gen_graphs)
    rep = memd(ref_d, gen_d, bins=args.bins)
    out = fresh_dir(args.out or "runs/evaluate")
    hist_dir = out / "histograms"
    hist_dir.mkdir()
    for name in rep.emd:
        edges = shared_edges(ref_d[name], gen_d[name], bins=args.bins)
        h_ref, h_gen = histogram(ref_d[name], edges), histogram(gen_d[name], edges)
        with open(hist_dir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["left_edge", "right_edge", "reference", "generated"])
            for k in range(args.bins):
                w.writerow([edges[k], edges[k + 1], h_ref.masses[k], h_gen.masses[k]])
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "vun": vun,
        "emd": rep.emd,
        "memd": rep.memd,
        "config": {"bins": rep.bins, "support": rep.support, "n": args.n, "seed": seed,
                   "reference": str(args.reference or args.split), "generated": str(args.generated or args.checkpoint),
                   "n_reference": len(ref_graphs), "n_generated": len(gen_graphs)},
    }
    validate_report(report)
    (out / "report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps({"memd": rep.memd, "vun": vun}))
    write_manifest(out, "evaluate", report["config"], seed, [out / "report.json", hist_dir], dhash, started)
    return EXIT_OK


def validate_report(report: dict) -> None:
    """Light schema check for evaluation reports."""
    required = {"schema_version": int, "emd": dict, "memd": float, "config": dict}
    for key, typ in required.items():
        if not isinstance(report.get(key), typ):
            raise ValueError(f"report field {key!r} missing or not {typ.__name__}")
    if not 0 < report["memd"] <= 1:
        raise ValueError("memd outside (0, 1]")
    if report.get("vun") is not None:
        for key in ("validity", "uniqueness", "novelty"):
            if not 0 <= report["vun"][key] <= 100:
                raise ValueError(f"{key} outside [0, 100]")


def cmd_nn(args) -> int:
    from .chemio import parse_smiles
    from .latentops import EmbeddingIndex, build_index, nearest_neighbors, tanimoto_neighbors

    model, _ = _load_model(args.checkpoint)
    query = parse_smiles(args.query)
    if args.index and Path(args.index, "manifest.json").exists():
        index = EmbeddingIndex.load(args.index)
        corpus = None
    else:
        split, _ = _read_split(args)
        corpus = getattr(split, args.split)[: args.limit] if args.limit else getattr(split, args.split)
        keys = getattr(split, f"{args.split}_smiles")
        index = build_index(model.encoder, corpus, args.split, keys[: len(corpus)] if keys else None)
        if args.index:
            index.save(args.index)
    result = {"query": args.query, "cosine": nearest_neighbors(model.encoder, query, index, args.k)}
    if corpus is not None:
        result["tanimoto"] = tanimoto_neighbors(query, corpus, args.k, keys=index.keys)
    print(json.dumps(result, indent=2))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    from .chemio import parse_smiles
    from .latentops import interpolate

    model, _ = _load_model(args.checkpoint)
    steps = interpolate(model, parse_smiles(args.a), parse_smiles(args.b), args.steps)
    for s in steps:
        print(f"{s.t:.4f}\t{'valid' if s.valid else 'invalid'}\t{s.label}")
    return EXIT_OK


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report_dir = Path(args.report)
    hist_dir = report_dir / "histograms"
    files = sorted(hist_dir.glob("*.csv"))
    if not files:
        raise ConfigError(f"no histogram CSVs under {hist_dir}")
    report = json.loads((report_dir / "report.json").read_text())
    cols = 5
    rows = (len(files) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False)
    for ax, f in zip(axes.ravel(), files):
        data = np.genfromtxt(f, delimiter=",", names=True)
        width = data["right_edge"] - data["left_edge"]
        ax.bar(data["left_edge"], data["reference"], width=width, align="edge", alpha=0.5, label="reference")
        ax.bar(data["left_edge"], data["generated"], width=width, align="edge", alpha=0.5, label="generated")
        name = f.stem
        ax.set_title(f"{name}\nEMD={report['emd'].get(name, float('nan')):.3f}", fontsize=8)
        ax.tick_params(labelsize=6)
    for ax in axes.ravel()[len(files):]:
        ax.axis("off")
    axes.ravel()[0].legend(fontsize=6)
    fig.tight_layout()
    out = Path(args.out) if args.out else report_dir / "descriptors.png"
    fig.savefig(out, dpi=120)
    print(out)
    return EXIT_OK


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="molali", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=False):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (suffixed if it already exists)")
        sp.add_argument("--limit", type=int, help="use at most this many molecules")
        if data:
            sp.add_argument("--data", help=f"ingested dataset directory (default ${ds.CACHE_ENV}/qm9)")

    sp = sub.add_parser("ingest", help="parse, filter and split the raw corpus")
    common(sp)
    sp.add_argument("--source", help="QM9 xyz directory/tarball, CSV, SDF or SMILES file (default $QM9_PATH)")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("train", help="adversarial training")
    common(sp, data=True)
    sp.add_argument("--ablation", help="preset name, e.g. 'ALI' or 'No Conn+Valence'")
    sp.add_argument("--epochs", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("generate", help="sample molecules from a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--n", type=int, default=10000)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("baseline", help="sample the random graph model")
    common(sp)
    sp.add_argument("--n", type=int, default=10000)
    sp.add_argument("--atoms", type=int, default=9)
    sp.add_argument("--uniform-size", action="store_true", help="draw the atom count uniformly from 1..atoms")
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("evaluate", help="VUN and descriptor mEMD report")
    common(sp, data=True)
    sp.add_argument("--checkpoint")
    sp.add_argument("--generated", help="SMILES file of generated molecules")
    sp.add_argument("--reference", help="SMILES file used instead of an ingested split")
    sp.add_argument("--training", help="SMILES file of training molecules for novelty")
    sp.add_argument("--split", default="test", choices=["train", "validation", "test"])
    sp.add_argument("--n", type=int, default=10000)
    sp.add_argument("--bins", type=int, default=64)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("nn", help="nearest neighbors of a query molecule")
    common(sp, data=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--query", required=True, help="query SMILES")
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--index", help="embedding index directory (built and saved if missing)")
    sp.add_argument("--split", default="test", choices=["train", "validation", "test"])
    sp.set_defaults(func=cmd_nn)

    sp = sub.add_parser("interpolate", help="decode along a latent segment")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--a", required=True, help="start SMILES")
    sp.add_argument("--b", required=True, help="end SMILES")
    sp.add_argument("--steps", type=int, default=10)
    sp.set_defaults(func=cmd_interpolate)

    sp = sub.add_parser("plot", help="histogram overlays from an evaluate report")
    common(sp)
    sp.add_argument("--report", required=True, help="evaluate output directory")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as err:  # --help / --version
        return int(err.code or 0)
    except Exception as err:  # noqa: BLE001 - top-level reporting
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
