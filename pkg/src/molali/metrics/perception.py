"""Ring and aromaticity perception on kekulized graphs.

Rings come from a minimum cycle basis. A ring is aromatic when every atom can
donate pi electrons and the count satisfies 4k+2. Two rings of size >= 5
sharing one bond are also tested as a whole envelope; if it passes, both
become aromatic. Smaller rings are kept out of envelopes, where strained
3- and 4-membered cages otherwise pass the electron count.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from ..molgraph import MolecularGraph

AROMATIC = 4  # bond code used alongside orders 1..3


@dataclass
class Perceived:
    graph: MolecularGraph
    atoms: list[int]                  # real node indices, in slot order
    symbols: dict[int, str]
    hcount: dict[int, int]
    order: dict[frozenset, int]       # kekule bond orders
    rings: list[frozenset]
    ring_bonds: list[set]
    aromatic_rings: list[bool]

    @cached_property
    def aromatic_bonds(self) -> set[frozenset]:
        out: set[frozenset] = set()
        for bonds, arom in zip(self.ring_bonds, self.aromatic_rings):
            if arom:
                out |= bonds
        return out

    @cached_property
    def aromatic_atoms(self) -> set[int]:
        return {a for b in self.aromatic_bonds for a in b}

    @cached_property
    def ring_atoms(self) -> set[int]:
        return set().union(*self.rings) if self.rings else set()

    @cached_property
    def all_ring_bonds(self) -> set[frozenset]:
        return set().union(*self.ring_bonds) if self.ring_bonds else set()

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in self.graph.neighbors(i)]

    def bond_type(self, i: int, j: int) -> int:
        """1, 2, 3, or AROMATIC."""
        key = frozenset((i, j))
        if key in self.aromatic_bonds:
            return AROMATIC
        return self.order[key]

    def in_ring_of_size(self, i: int, size: int) -> bool:
        return any(i in r and len(r) == size for r in self.rings)


def _bond_graph(graph: MolecularGraph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(int(v) for v in graph.real_nodes)
    g.add_edges_from((i, j) for i, j, _ in graph.bond_list())
    return g


def _pi_electrons(i, ring, p: Perceived, ring_bonds_all) -> int | None:
    """Electrons atom i donates to ``ring``; None when it cannot take part."""
    sym = p.symbols[i]
    doubles = [j for j in p.neighbors(i) if p.order[frozenset((i, j))] == 2]
    triples = [j for j in p.neighbors(i) if p.order[frozenset((i, j))] == 3]
    if triples:
        return None
    if doubles:
        j = doubles[0]
        if frozenset((i, j)) in ring_bonds_all:
            return 1
        # exocyclic double bond to an electronegative atom withdraws the pair
        if p.symbols[j] in ("O", "N") and sym == "C":
            return 0
        return None
    if sym in ("N", "O"):
        return 2
    return None


def _huckel(atoms, p: Perceived, ring_bonds_all) -> bool:
    total = 0
    for a in atoms:
        e = _pi_electrons(a, atoms, p, ring_bonds_all)
        if e is None:
            return False
        total += e
    return total % 4 == 2


def perceive(graph: MolecularGraph) -> Perceived:
    atoms = [int(v) for v in graph.real_nodes]
    symbols = {i: graph.symbol(i) for i in atoms}
    hs = graph.implicit_hydrogens()
    hcount = {i: int(hs[i]) for i in atoms}
    order = {frozenset((i, j)): o for i, j, o in graph.bond_list()}
    g = _bond_graph(graph)
    cycles = sorted((sorted(c) for c in nx.minimum_cycle_basis(g)), key=lambda c: (len(c), c))
    rings = [frozenset(c) for c in cycles]
    ring_bonds = [{frozenset(e) for e in g.subgraph(r).edges()} for r in rings]
    p = Perceived(graph, atoms, symbols, hcount, order, rings, ring_bonds, [False] * len(rings))
    all_rb = set().union(*ring_bonds) if ring_bonds else set()
    arom = [_huckel(r, p, all_rb) for r in rings]
    for a in range(len(rings)):
        for b in range(a + 1, len(rings)):
            if arom[a] and arom[b]:
                continue
            ra, rb = rings[a], rings[b]
            if min(len(ra), len(rb)) < 5 or len(ra & rb) != 2 or len(ring_bonds[a] & ring_bonds[b]) != 1:
                continue
            if _huckel(ra | rb, p, all_rb):
                arom[a] = arom[b] = True
    p.aromatic_rings = arom
    return p
