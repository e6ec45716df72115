"""Discrete molecular multi-graphs with ghost-extended tensors.

A graph lives in ``n_max`` node slots. Node slot ``i`` carries an atom type
index (0 = ghost node, 1..d = real atom types) and every unordered pair of
slots carries a bond type index (0 = ghost edge, 1..m = single/double/triple).
The one-hot tensors ``X`` (n_max x (d+1)) and ``A`` (n_max x n_max x (m+1))
are derived views of that compact storage.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import torch

__all__ = [
    "AtomVocabulary",
    "QM9_VOCAB",
    "MolecularGraph",
    "ValidityReport",
    "ERROR_CLASSES",
    "validate",
    "raw_path_count",
    "path_count",
    "smooth_step",
    "canonical_key",
]


@dataclass(frozen=True)
class AtomVocabulary:
    atom_symbols: tuple[str, ...] = ("C", "N", "O", "F")
    atom_capacity: tuple[int, ...] = (4, 3, 2, 1)
    bond_order_values: tuple[int, ...] = (1, 2, 3)
    n_max: int = 9

    def __post_init__(self):
        if len(self.atom_symbols) != len(self.atom_capacity):
            raise ValueError("one capacity per atom symbol required")

    @property
    def d(self) -> int:
        return len(self.atom_symbols)

    @property
    def m(self) -> int:
        return len(self.bond_order_values)

    @property
    def valence_capacity(self) -> np.ndarray:
        """Capacity vector u with u[0] = 0 for ghost nodes."""
        return np.array((0,) + tuple(self.atom_capacity), dtype=np.int64)

    @property
    def bond_orders(self) -> np.ndarray:
        """Bond order vector b with b[0] = 0 for ghost edges."""
        return np.array((0,) + tuple(self.bond_order_values), dtype=np.int64)

    def type_index(self, symbol: str) -> int:
        try:
            return self.atom_symbols.index(symbol) + 1
        except ValueError:
            raise KeyError(f"atom {symbol!r} is not in the vocabulary") from None

    def bond_index(self, order: int) -> int:
        try:
            return self.bond_order_values.index(order) + 1
        except ValueError:
            raise KeyError(f"bond order {order!r} is not in the vocabulary") from None


QM9_VOCAB = AtomVocabulary()


class MolecularGraph:
    """Ghost-padded molecular multi-graph.

    ``types[i]`` is the column of the one-hot node row, ``bonds[i, j]`` the
    channel of the one-hot edge fiber. Both are int8 and immutable.
    """

    __slots__ = ("types", "bonds", "vocab")

    def __init__(self, types, bonds, vocab: AtomVocabulary = QM9_VOCAB):
        types = np.asarray(types, dtype=np.int8)
        bonds = np.asarray(bonds, dtype=np.int8)
        n = types.shape[0] if types.ndim == 1 else -1
        if types.ndim != 1 or bonds.shape != (n, n):
            raise ValueError(f"shape mismatch: types {types.shape}, bonds {bonds.shape}")
        if types.min(initial=0) < 0 or types.max(initial=0) > vocab.d:
            raise ValueError("atom type index out of range")
        if bonds.min(initial=0) < 0 or bonds.max(initial=0) > vocab.m:
            raise ValueError("bond type index out of range")
        if not np.array_equal(bonds, bonds.T):
            raise ValueError("bond matrix must be symmetric")
        if np.any(np.diag(bonds) != 0):
            raise ValueError("diagonal must carry ghost edges only")
        types.setflags(write=False)
        bonds.setflags(write=False)
        self.types = types
        self.bonds = bonds
        self.vocab = vocab

    # construction -------------------------------------------------------

    @classmethod
    def from_atoms_bonds(
        cls,
        atoms: Sequence[str],
        bonds: Iterable[tuple[int, int, int]],
        vocab: AtomVocabulary = QM9_VOCAB,
        n_max: int | None = None,
    ) -> "MolecularGraph":
        n_max = vocab.n_max if n_max is None else n_max
        if len(atoms) > n_max:
            raise ValueError(f"{len(atoms)} atoms exceed n_max={n_max}")
        types = np.zeros(n_max, dtype=np.int8)
        for i, sym in enumerate(atoms):
            types[i] = vocab.type_index(sym)
        mat = np.zeros((n_max, n_max), dtype=np.int8)
        for i, j, order in bonds:
            if i == j:
                raise ValueError("self bonds are not allowed")
            if mat[i, j]:
                raise ValueError(f"duplicate bond {i}-{j}")
            mat[i, j] = mat[j, i] = vocab.bond_index(order)
        return cls(types, mat, vocab)

    @classmethod
    def from_tensors(cls, X, A, vocab: AtomVocabulary = QM9_VOCAB) -> "MolecularGraph":
        """Build from one-hot tensors, checking the simplex invariants."""
        X = np.asarray(X)
        A = np.asarray(A)
        n = X.shape[0]
        if X.shape != (n, vocab.d + 1) or A.shape != (n, n, vocab.m + 1):
            raise ValueError(f"shape mismatch: X {X.shape}, A {A.shape}")
        if not (np.all((X == 0) | (X == 1)) and np.all(X.sum(-1) == 1)):
            raise ValueError("node rows must be one-hot")
        if not (np.all((A == 0) | (A == 1)) and np.all(A.sum(-1) == 1)):
            raise ValueError("edge fibers must be one-hot")
        return cls(X.argmax(-1), A.argmax(-1), vocab)

    @classmethod
    def from_json(cls, text: str | dict, vocab: AtomVocabulary = QM9_VOCAB) -> "MolecularGraph":
        obj = json.loads(text) if isinstance(text, str) else text
        return cls.from_atoms_bonds(obj["atoms"], [tuple(b) for b in obj["bonds"]], vocab)

    # views ---------------------------------------------------------------

    @property
    def n_max(self) -> int:
        return self.types.shape[0]

    @property
    def X(self) -> np.ndarray:
        return np.eye(self.vocab.d + 1, dtype=np.float32)[self.types]

    @property
    def A(self) -> np.ndarray:
        return np.eye(self.vocab.m + 1, dtype=np.float32)[self.bonds]

    @property
    def real_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.types)

    @property
    def n_atoms(self) -> int:
        return int(np.count_nonzero(self.types))

    def symbol(self, i: int) -> str:
        t = int(self.types[i])
        return "*" if t == 0 else self.vocab.atom_symbols[t - 1]

    def order(self, i: int, j: int) -> int:
        return int(self.vocab.bond_orders[self.bonds[i, j]])

    def bond_list(self) -> list[tuple[int, int, int]]:
        iu, ju = np.nonzero(np.triu(self.bonds))
        return [(int(i), int(j), self.order(i, j)) for i, j in zip(iu, ju)]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.bonds[i])

    def loads(self) -> np.ndarray:
        """Sum of bond orders per node (c_v in the valence penalty)."""
        return self.vocab.bond_orders[self.bonds].sum(axis=1)

    def capacities(self) -> np.ndarray:
        return self.vocab.valence_capacity[self.types]

    def implicit_hydrogens(self) -> np.ndarray:
        h = self.capacities() - self.loads()
        return np.where(self.types > 0, h, 0)

    def permute(self, perm: Sequence[int]) -> "MolecularGraph":
        """Relabel so that new slot k holds old slot ``perm[k]``."""
        p = np.asarray(perm)
        return MolecularGraph(self.types[p], self.bonds[np.ix_(p, p)], self.vocab)

    def compact(self) -> "MolecularGraph":
        """Move real atoms to the leading slots, keeping their relative order."""
        real = self.real_nodes.tolist()
        ghost = [i for i in range(self.n_max) if self.types[i] == 0]
        return self.permute(real + ghost)

    def to_json(self) -> str:
        real = self.real_nodes
        index = {int(old): new for new, old in enumerate(real)}
        bonds = []
        for i, j, order in self.bond_list():
            if i not in index or j not in index:
                raise ValueError("bond touches a ghost node; not representable as JSON")
            a, b = sorted((index[i], index[j]))
            bonds.append([a, b, order])
        bonds.sort()
        return json.dumps({"atoms": [self.symbol(i) for i in real], "bonds": bonds})

    def __eq__(self, other):
        if not isinstance(other, MolecularGraph):
            return NotImplemented
        return (
            np.array_equal(self.types, other.types)
            and np.array_equal(self.bonds, other.bonds)
            and self.vocab == other.vocab
        )

    def __hash__(self):
        return hash((self.types.tobytes(), self.bonds.tobytes()))

    def __repr__(self):
        atoms = "".join(self.symbol(i) for i in self.real_nodes)
        return f"MolecularGraph(atoms={atoms!r}, bonds={len(self.bond_list())})"


# validity ---------------------------------------------------------------------

ERROR_CLASSES = ("ghost_node_bond", "valency", "split_graph", "valid")


@dataclass
class ValidityReport:
    is_valid: bool
    error_class: str
    component_count: int
    offending_nodes: list[int] = field(default_factory=list)
    flags: dict[str, bool] = field(default_factory=dict)


def _components(graph: MolecularGraph, nodes: Sequence[int]) -> list[list[int]]:
    allowed = set(int(v) for v in nodes)
    seen: set[int] = set()
    comps = []
    for start in sorted(allowed):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in graph.neighbors(v):
                u = int(u)
                if u in allowed and u not in seen:
                    seen.add(u)
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def validate(graph: MolecularGraph, vocab: AtomVocabulary | None = None) -> ValidityReport:
    """Classify a discrete graph as valid or by its most severe error.

    Priority: ghost_node_bond > valency > split_graph. A graph without any
    real atom has zero components and counts as split_graph.
    """
    vocab = graph.vocab if vocab is None else vocab
    if graph.bonds.shape != (graph.n_max, graph.n_max):
        raise ValueError("malformed graph tensors")
    types = graph.types
    ghost = types == 0
    has_edge = graph.bonds > 0
    ghost_bond_nodes = np.flatnonzero(ghost & has_edge.any(axis=1))

    caps = vocab.valence_capacity[types]
    loads = vocab.bond_orders[graph.bonds].sum(axis=1)
    over = np.flatnonzero(~ghost & (loads > caps))

    comps = _components(graph, np.flatnonzero(~ghost))
    split = len(comps) != 1

    flags = {
        "ghost_node_bond": ghost_bond_nodes.size > 0,
        "valency": over.size > 0,
        "split_graph": split,
    }
    if flags["ghost_node_bond"]:
        cls, offending = "ghost_node_bond", ghost_bond_nodes.tolist()
    elif flags["valency"]:
        cls, offending = "valency", over.tolist()
    elif split:
        # every node outside the largest component
        largest = max(comps, key=len) if comps else []
        cls = "split_graph"
        offending = sorted(v for c in comps if c is not largest for v in c)
    else:
        cls, offending = "valid", []
    return ValidityReport(cls == "valid", cls, len(comps), [int(v) for v in offending], flags)


# path counting ----------------------------------------------------------------

def raw_path_count(adjacency: torch.Tensor, n_active: int | None = None) -> torch.Tensor:
    """I + sum_{p=1}^{n-1} S^p with S the real-channel sum of the adjacency.

    ``adjacency`` has shape (..., n, n, m+1); channel 0 (ghost edge) is
    dropped and the diagonal of S is masked. ``n_active`` sets the highest
    power (n_active - 1); it defaults to the number of node slots.
    """
    adjacency = torch.as_tensor(adjacency)
    n = adjacency.shape[-2]
    n_active = n if n_active is None else n_active
    eye = torch.eye(n, dtype=adjacency.dtype, device=adjacency.device)
    S = adjacency[..., 1:].sum(-1) * (1 - eye)
    total = eye.expand_as(S).clone()
    power = S
    for p in range(1, n_active):
        total = total + power
        if p < n_active - 1:
            power = power @ S
    return total


def smooth_step(x: torch.Tensor, a: float = 100.0) -> torch.Tensor:
    """s(x) = sigmoid(a (x - 1/2))."""
    return torch.sigmoid(a * (x - 0.5))


def path_count(adjacency, n_active: int | None = None, a: float = 100.0) -> torch.Tensor:
    """Smoothed path-existence matrix B in (0, 1), differentiable in ``adjacency``."""
    if a <= 0:
        raise ValueError("smoothing a must be positive")
    return smooth_step(raw_path_count(adjacency, n_active), a)


def canonical_key(graph: MolecularGraph) -> str:
    """Canonical SMILES of the kekulized molecule; equal iff isomorphic."""
    from .chemio import write_smiles

    return write_smiles(graph)
