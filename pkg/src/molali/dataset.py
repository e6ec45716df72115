"""QM9 ingestion, filtering, deterministic splits and dense batching."""
from __future__ import annotations

import bz2
import csv
import gzip
import hashlib
import io
import json
import logging
import os
import tarfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import chemio
from .chemio import ChargedAtom, SmilesError, TooManyAtoms, UnsupportedFeature
from .molgraph import QM9_VOCAB, AtomVocabulary, MolecularGraph

log = logging.getLogger(__name__)

CACHE_ENV = "MOLALI_CACHE"
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
DEFAULT_SPLIT_SEED = 42


def cache_root() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "molali"))


@dataclass
class Corpus:
    graphs: list[MolecularGraph]
    smiles: list[str]
    stats: dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]


@dataclass
class DatasetSplit:
    train: list[MolecularGraph]
    validation: list[MolecularGraph]
    test: list[MolecularGraph]
    split_seed: int = DEFAULT_SPLIT_SEED
    fractions: tuple[float, float, float] = SPLIT_FRACTIONS
    train_smiles: list[str] | None = None
    validation_smiles: list[str] | None = None
    test_smiles: list[str] | None = None

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


# raw record readers -----------------------------------------------------------

def _open_text(path: Path):
    if path.suffix == ".bz2":
        return io.TextIOWrapper(bz2.open(path, "rb"))
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"))
    return open(path)


def _xyz_smiles(text: str, field_index: int) -> str:
    lines = text.strip().splitlines()
    n_atoms = int(lines[0].split()[0])
    # count line, comment line, atoms, frequencies, smiles, inchi
    return lines[n_atoms + 3].split()[field_index]


def _iter_xyz_dir(path: Path, field_index: int) -> Iterator[tuple[str, str]]:
    for f in sorted(path.glob("*.xyz")):
        yield f.name, ("smiles", _xyz_smiles(f.read_text(), field_index))


def _iter_xyz_tar(path: Path, field_index: int) -> Iterator[tuple[str, tuple]]:
    with tarfile.open(path) as tar:
        members = sorted((m for m in tar.getmembers() if m.name.endswith(".xyz")), key=lambda m: m.name)
        for m in members:
            text = tar.extractfile(m).read().decode()
            yield m.name, ("smiles", _xyz_smiles(text, field_index))


def _iter_csv(path: Path) -> Iterator[tuple[str, tuple]]:
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        cols = [k for k, h in enumerate(header) if "smiles" in h.lower()]
        if not cols:
            raise ValueError(f"{path}: no SMILES column in header {header}")
        col = cols[0]
        for k, row in enumerate(reader):
            if row:
                yield str(k), ("smiles", row[col])


def _iter_smiles_lines(path: Path) -> Iterator[tuple[str, tuple]]:
    with _open_text(path) as fh:
        for k, line in enumerate(fh):
            line = line.strip()
            if line and not line.startswith("#"):
                yield str(k), ("smiles", line.split()[0])


def _iter_sdf(path: Path) -> Iterator[tuple[str, tuple]]:
    with _open_text(path) as fh:
        block: list[str] = []
        k = 0
        for line in fh:
            if line.startswith("$$$$"):
                yield str(k), ("molblock", block)
                block, k = [], k + 1
            else:
                block.append(line.rstrip("\n"))
        if any(l.strip() for l in block):
            yield str(k), ("molblock", block)


_SDF_CHARGE = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}


def molblock_to_graph(lines: list[str], vocab: AtomVocabulary = QM9_VOCAB) -> MolecularGraph:
    """Read a V2000 molblock; hydrogens are folded into heavy-atom counts."""
    counts = lines[3]
    n_atoms, n_bonds = int(counts[0:3]), int(counts[3:6])
    symbols, charges = [], []
    for line in lines[4 : 4 + n_atoms]:
        symbols.append(line[31:34].strip())
        code = int(line[36:39] or 0) if len(line) >= 39 else 0
        charges.append(_SDF_CHARGE.get(code, 0))
    bonds = []
    for line in lines[4 + n_atoms : 4 + n_atoms + n_bonds]:
        bonds.append((int(line[0:3]) - 1, int(line[3:6]) - 1, int(line[6:9])))
    for line in lines[4 + n_atoms + n_bonds :]:
        if line.startswith("M  CHG"):
            parts = line.split()
            for a in range(int(parts[2])):
                charges[int(parts[3 + 2 * a]) - 1] = int(parts[4 + 2 * a])
        if line.startswith("M  ISO"):
            raise UnsupportedFeature("isotopes are not supported")
    if any(charges):
        raise ChargedAtom("molblock has charged atoms")
    heavy = [i for i, s in enumerate(symbols) if s != "H"]
    for i in heavy:
        if symbols[i] not in vocab.atom_symbols:
            raise UnsupportedFeature(f"element {symbols[i]!r} is outside the vocabulary")
    remap = {old: new for new, old in enumerate(heavy)}
    hcount = [0] * len(heavy)
    arom = set()
    heavy_bonds = []
    for i, j, t in bonds:
        if symbols[i] == "H" or symbols[j] == "H":
            if symbols[i] == "H" and symbols[j] == "H":
                raise UnsupportedFeature("molecular hydrogen is not supported")
            hcount[remap[j if symbols[i] == "H" else i]] += 1
            continue
        if t == 4:
            arom.update((remap[i], remap[j]))
            heavy_bonds.append((remap[i], remap[j], "arom"))
        elif t in (1, 2, 3):
            heavy_bonds.append((remap[i], remap[j], t))
        else:
            raise UnsupportedFeature(f"bond type {t} is not supported")
    # blocks without any H atom leave hydrogens implicit
    explicit_h = len(heavy) < len(symbols)
    atoms = [chemio._Atom(symbols[i], k in arom, hcount[k] if explicit_h else None) for k, i in enumerate(heavy)]
    return chemio._assemble(atoms, heavy_bonds, [0] * len(atoms), vocab, None, "molblock")


def iter_records(source: Path, xyz_field: int = 1) -> Iterator[tuple[str, tuple]]:
    source = Path(source)
    if source.is_dir():
        return _iter_xyz_dir(source, xyz_field)
    name = source.name.lower()
    if ".tar" in name or name.endswith(".tgz"):
        return _iter_xyz_tar(source, xyz_field)
    if ".csv" in name:
        return _iter_csv(source)
    if ".sdf" in name:
        return _iter_sdf(source)
    return _iter_smiles_lines(source)


def _classify(err: Exception) -> str:
    if isinstance(err, ChargedAtom):
        return "skipped_charge"
    if isinstance(err, TooManyAtoms):
        return "skipped_size"
    if isinstance(err, UnsupportedFeature) and "outside the vocabulary" in str(err):
        return "skipped_element"
    return "skipped_parse"


def load_qm9(
    source_path,
    vocab: AtomVocabulary = QM9_VOCAB,
    limit: int | None = None,
    xyz_field: int = 1,
) -> Corpus:
    """Parse and filter a QM9 distribution.

    Keeps molecules with at most ``vocab.n_max`` heavy atoms drawn from the
    vocabulary and no charged atom. Failures are counted per reason in
    ``Corpus.stats`` instead of raising. ``xyz_field`` picks the SMILES
    column of the per-molecule xyz files (0 = GDB, 1 = relaxed geometry).
    """
    source_path = Path(source_path)
    if not source_path.exists():
        raise FileNotFoundError(source_path)
    stats = {"total": 0, "kept": 0, "skipped_charge": 0, "skipped_size": 0,
             "skipped_element": 0, "skipped_parse": 0}
    graphs, smiles = [], []
    for _, (kind, payload) in iter_records(source_path, xyz_field):
        if limit is not None and len(graphs) >= limit:
            break
        stats["total"] += 1
        try:
            if kind == "smiles":
                g = chemio.parse_smiles(payload, vocab)
            else:
                g = molblock_to_graph(payload, vocab)
        except SmilesError as err:
            stats[_classify(err)] += 1
            continue
        except (ValueError, IndexError) as err:
            log.debug("unparseable record: %s", err)
            stats["skipped_parse"] += 1
            continue
        graphs.append(g)
        smiles.append(payload if kind == "smiles" else chemio.write_smiles(g))
        stats["kept"] += 1
    return Corpus(graphs, smiles, stats)


# splitting and batching ---------------------------------------------------------

def split_sizes(n: int, fractions=SPLIT_FRACTIONS) -> tuple[int, int, int]:
    n_train = int(np.floor(n * fractions[0]))
    n_val = int(np.floor(n * fractions[1]))
    return n_train, n_val, n - n_train - n_val


def split_dataset(corpus, seed: int = DEFAULT_SPLIT_SEED, fractions=SPLIT_FRACTIONS) -> DatasetSplit:
    graphs = list(corpus)
    smiles = getattr(corpus, "smiles", None)
    perm = np.random.default_rng(seed).permutation(len(graphs))
    n_train, n_val, _ = split_sizes(len(graphs), fractions)
    parts = np.split(perm, [n_train, n_train + n_val])
    pick = lambda seq, idx: [seq[i] for i in idx]
    out = DatasetSplit(*(pick(graphs, p) for p in parts), split_seed=seed, fractions=tuple(fractions))
    if smiles is not None:
        out.train_smiles, out.validation_smiles, out.test_smiles = (pick(smiles, p) for p in parts)
    return out


def stack_graphs(graphs: Iterable[MolecularGraph]) -> tuple[np.ndarray, np.ndarray]:
    """Compact int8 arrays (N, n) of atom types and (N, n, n) of bond types."""
    graphs = list(graphs)
    if not graphs:
        return np.zeros((0, QM9_VOCAB.n_max), np.int8), np.zeros((0, QM9_VOCAB.n_max, QM9_VOCAB.n_max), np.int8)
    return np.stack([g.types for g in graphs]), np.stack([g.bonds for g in graphs])


def one_hot_batch(types: np.ndarray, bonds: np.ndarray, vocab: AtomVocabulary = QM9_VOCAB):
    X = np.eye(vocab.d + 1, dtype=np.float32)[types]
    A = np.eye(vocab.m + 1, dtype=np.float32)[bonds]
    return X, A


def batch(
    graphs: list[MolecularGraph],
    batch_size: int,
    seed: int | None = None,
    shuffle: bool = True,
    vocab: AtomVocabulary = QM9_VOCAB,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (X, A) one-hot batches; the last batch may be partial."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    types, bonds = stack_graphs(graphs)
    order = np.arange(len(graphs))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(graphs))
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        yield one_hot_batch(types[idx], bonds[idx], vocab)


# cache ------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_cache(out_dir, split: DatasetSplit, stats: dict, source: str | None = None) -> Path:
    """Write train/validation/test as canonical SMILES lines plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in ("train", "validation", "test"):
        path = out / f"{name}.smi"
        lines = [chemio.write_smiles(g) for g in getattr(split, name)]
        tmp = path.with_suffix(".smi.tmp")
        tmp.write_text("".join(s + "\n" for s in lines))
        tmp.replace(path)
        files[name] = {"path": path.name, "count": len(lines), "sha256": _sha256(path)}
    manifest = {
        "source": source,
        "split_seed": split.split_seed,
        "fractions": list(split.fractions),
        "filter_stats": stats,
        "files": files,
    }
    digest = hashlib.sha256(json.dumps(files, sort_keys=True).encode()).hexdigest()
    manifest["dataset_hash"] = digest
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def read_cache(cache_dir, vocab: AtomVocabulary = QM9_VOCAB, limit: int | None = None) -> DatasetSplit:
    cache_dir = Path(cache_dir)
    manifest = json.loads((cache_dir / "manifest.json").read_text())
    parts = {}
    for name in ("train", "validation", "test"):
        smiles = chemio.read_smiles_file(cache_dir / manifest["files"][name]["path"])
        if limit is not None:
            smiles = smiles[:limit]
        parts[name] = (smiles, [chemio.parse_smiles(s, vocab) for s in smiles])
    return DatasetSplit(
        parts["train"][1], parts["validation"][1], parts["test"][1],
        split_seed=manifest["split_seed"], fractions=tuple(manifest["fractions"]),
        train_smiles=parts["train"][0], validation_smiles=parts["validation"][0],
        test_smiles=parts["test"][0],
    )


def dataset_hash(cache_dir) -> str:
    return json.loads((Path(cache_dir) / "manifest.json").read_text())["dataset_hash"]
