"""Ten physicochemical descriptors computed directly on MolecularGraph.

logP uses the Wildman-Crippen atom-type contributions and TPSA the Ertl
fragment contributions, both restricted to neutral C/N/O/F/H environments.
Bertz complexity follows the usual bond-connection/atom-type entropy sum
with symmetry classes from a bond-order-weighted distance matrix.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.sparse.csgraph import shortest_path

from ..molgraph import MolecularGraph, validate
from .perception import AROMATIC, Perceived, perceive

DESCRIPTOR_NAMES = (
    "internal_similarity", "mol_wt", "mol_log_p", "bertz_ct", "tpsa",
    "h_acceptors", "h_donors", "rotatable_bonds", "aromatic_rings", "aliphatic_rings",
)

MASSES = {"C": 12.011, "N": 14.007, "O": 15.999, "F": 18.998, "H": 1.008}
ATOMIC_NUMBER = {"C": 6, "N": 7, "O": 8, "F": 9}
HETERO_SMALL = {"N", "O", "F"}  # the [N,O,P,S,F,Cl,Br,I] class within the vocabulary


@dataclass
class DescriptorVector:
    internal_similarity: float = float("nan")
    mol_wt: float = 0.0
    mol_log_p: float = 0.0
    bertz_ct: float = 0.0
    tpsa: float = 0.0
    h_acceptors: float = 0.0
    h_donors: float = 0.0
    rotatable_bonds: float = 0.0
    aromatic_rings: float = 0.0
    aliphatic_rings: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# per-atom environment ---------------------------------------------------------

class _Env:
    """Neighbor view of one heavy atom: (neighbor, bond code, neighbor aromatic)."""

    def __init__(self, p: Perceived, i: int):
        self.p, self.i = p, i
        self.sym = p.symbols[i]
        self.arom = i in p.aromatic_atoms
        self.h = p.hcount[i]
        self.nbrs = [(j, p.bond_type(i, j)) for j in p.neighbors(i)]
        self.degree = len(self.nbrs)
        self.X = self.degree + self.h

    def count(self, bond=None, pred=None) -> int:
        return sum(1 for j, b in self.nbrs
                   if (bond is None or b in bond) and (pred is None or pred(j)))

    def aliphatic(self, j) -> bool:
        return j not in self.p.aromatic_atoms

    def aromatic_nbr(self, j) -> bool:
        return j in self.p.aromatic_atoms

    def is_sym(self, j, *syms) -> bool:
        return self.p.symbols[j] in syms


SA = (1, AROMATIC)  # SMARTS default bond: single or aromatic


def _crippen_carbon(e: _Env) -> float:
    p = e.p
    C_al = lambda j: e.is_sym(j, "C") and e.aliphatic(j)
    het_al = lambda j: e.p.symbols[j] in HETERO_SMALL and e.aliphatic(j)
    A = lambda j: e.aliphatic(j)
    a = lambda j: e.aromatic_nbr(j)
    c = lambda j: a(j) and e.is_sym(j, "C")
    if not e.arom:
        if e.h == 4:
            return 0.1441
        if e.h == 3 and e.count(SA, C_al) >= 1:
            return 0.1441
        if e.h == 2 and e.count(SA, C_al) >= 2:
            return 0.1441
        if e.h == 1 and e.count(SA, C_al) >= 3:
            return 0.0
        if e.h == 0 and e.count(SA, C_al) >= 4:
            return 0.0
        if e.h == 3 and e.count(SA, het_al) >= 1:
            return -0.2035
        if e.h == 2 and e.X == 4 and e.count(SA, het_al) >= 1 and e.count(SA, A) >= 2:
            return -0.2035
        if e.h == 1 and e.X == 4 and e.count(SA, het_al) >= 1 and e.count(SA, A) >= 3:
            return -0.2051
        if e.h == 0 and e.X == 4 and e.count(SA, het_al) >= 1 and e.count(SA, A) >= 4:
            return -0.2051
        if e.count((2,), lambda j: A(j) and not e.is_sym(j, "C")):
            return -0.2783
        dbl_C = e.count((2,), C_al)
        if dbl_C:
            if e.h == 2:
                return 0.1551
            if e.h == 1 and e.count(SA, A) >= 1:
                return 0.1551
            if e.h == 0 and e.count(SA, A) >= 2:
                return 0.1551
            if e.h == 0 and dbl_C >= 2:
                return 0.1551
        if e.X == 2 and e.count((3,), A):
            return 0.0017
        if e.h == 3 and e.count(SA, c):
            return 0.08452
        if e.h == 3 and e.count(SA, a):
            return -0.1444
        if e.X == 4 and e.count(SA, a):
            return {2: -0.0516, 1: 0.1193, 0: -0.0967}.get(e.h, 0.08129)
        if e.count((2,), C_al):
            if e.h == 0 and e.count(SA, a) and e.count(SA, A):
                return 0.264
            if e.h == 0 and e.count(SA, c) and e.count(SA, a) >= 2:
                return 0.264
            if e.h == 1 and e.count(SA, a):
                return 0.264
        if e.count((2,), c):
            return 0.264
        return 0.08129
    # aromatic carbon
    if e.count(SA, lambda j: e.is_sym(j, "F")):
        return 0.0
    if e.h == 1:
        return 0.1581
    ar = e.count((AROMATIC,))
    if ar >= 3:
        return 0.2955
    if ar >= 2:
        single = [(j, b) for j, b in e.nbrs if b == 1]
        if any(a(j) for j, _ in single):
            return 0.2713
        if any(e.is_sym(j, "C") for j, _ in single):
            return 0.136
        if any(e.is_sym(j, "N") for j, _ in single):
            return 0.4619
        if any(e.is_sym(j, "O") for j, _ in single):
            return 0.5437
        if e.count((2,), lambda j: e.is_sym(j, "C", "N", "O") and e.aliphatic(j)):
            return -0.8186
    return 0.08129


def _crippen_nitrogen(e: _Env) -> float:
    A = lambda j: e.aliphatic(j)
    a = lambda j: e.aromatic_nbr(j)
    if e.arom:
        return -0.3239
    if e.h == 2 and e.count(SA, A):
        return -1.019
    if e.h == 1 and e.count(SA, A) >= 2:
        return -0.7096
    if e.h == 2 and e.count(SA, a):
        return -1.027
    if e.h == 1 and e.count(SA, a) and e.degree >= 2 and e.count(SA) >= 2:
        return -0.5188
    if e.h == 1 and e.count((2,)):
        return 0.08387
    if e.count((2,)) and e.count(SA) >= 1:
        return 0.1836
    if e.count(SA, A) >= 3:
        return -0.3187
    if e.count(SA, a) and e.count(SA) >= 3 and e.count(SA, A) >= 1:
        return -0.4458
    if e.count(SA, a) >= 3:
        return -0.4458
    if e.count((3,), A):
        return 0.01508
    return -0.4806


def _distinct_pair(cands, f1, f2) -> bool:
    return any(f1(k1) and f2(k2) for k1 in cands for k2 in cands if k1 != k2)


def _crippen_oxygen(e: _Env) -> float:
    p = e.p
    A = lambda j: e.aliphatic(j)
    a = lambda j: e.aromatic_nbr(j)
    if e.arom:
        return 0.1552
    if e.h >= 1:
        return -0.2893
    if e.count(SA, A) >= 2:
        return -0.0684
    if e.count(SA, a) and e.count(SA) >= 2:
        return -0.4195
    dbl = [j for j, b in e.nbrs if b == 2]
    if not dbl:
        return -0.1188
    j = dbl[0]
    if p.symbols[j] in ("N", "O"):
        return 0.0335
    if j in p.aromatic_atoms:
        return 0.1788
    # carbonyl: look at the carbon's other neighbors
    ce = _Env(p, j)
    others = [(k, b) for k, b in ce.nbrs if k != e.i]
    sa = [k for k, b in others if b in SA]
    al = lambda k: k not in p.aromatic_atoms
    ar = lambda k: k in p.aromatic_atoms
    is_C = lambda k: p.symbols[k] == "C"
    if ce.h == 1 and any(is_C(k) and al(k) for k in sa):
        return -0.1526
    if _distinct_pair(sa, lambda k: is_C(k) and al(k), al):
        return -0.1526
    if ce.h == 1 and any(p.symbols[k] in ("N", "O") and al(k) for k in sa):
        return -0.1526
    if ce.h == 2:
        return -0.1526
    if ce.X == 2 and any(b == 2 and p.symbols[k] == "O" and al(k) for k, b in others):
        return -0.1526
    if ce.h == 1 and any(is_C(k) and ar(k) for k in sa):
        return 0.1129
    if _distinct_pair(sa, is_C, ar):
        return 0.1129
    if _distinct_pair(sa, lambda k: is_C(k) and ar(k), al):
        return 0.1129
    if _distinct_pair(sa, lambda k: not is_C(k), lambda k: not is_C(k)):
        return 0.4833
    return -0.1188


def _crippen_hydrogen(p: Perceived, i: int) -> float:
    sym = p.symbols[i]
    if sym == "C":
        return 0.123
    if sym == "N":
        return 0.2142
    if sym == "F":
        return -0.2677
    nb = p.neighbors(i)
    arom = lambda k: k in p.aromatic_atoms
    if p.hcount[i] >= 2:
        # the sibling hydrogen counts as the non-C/N/O/S partner of the oxygen
        return -0.2677
    if any((p.symbols[j] == "C" and not arom(j) and len(p.neighbors(j)) + p.hcount[j] == 4)
           or (p.symbols[j] == "C" and arom(j)) for j in nb):
        return -0.2677
    if any(arom(j) or p.symbols[j] == "F" for j in nb):
        return -0.2677
    if any(p.symbols[j] == "N" for j in nb):
        return 0.2142
    for j in nb:
        if p.symbols[j] == "C" and any(p.bond_type(j, k) == 2 and (p.symbols[k] != "O" or not arom(k))
                                       for k in p.neighbors(j)):
            return 0.298
        if p.symbols[j] == "O":
            return 0.298
    return 0.1125


def crippen_log_p(p: Perceived) -> float:
    total = 0.0
    for i in p.atoms:
        e = _Env(p, i)
        if e.sym == "C":
            total += _crippen_carbon(e)
        elif e.sym == "N":
            total += _crippen_nitrogen(e)
        elif e.sym == "O":
            total += _crippen_oxygen(e)
        elif e.sym == "F":
            total += 0.4202
        total += e.h * _crippen_hydrogen(p, i)
    return total


# polar surface area -----------------------------------------------------------

def _tpsa_atom(e: _Env) -> float:
    n_single = e.count((1,))
    n_double = e.count((2,))
    n_triple = e.count((3,))
    n_arom = e.count((AROMATIC,))
    h, deg = e.h, e.degree
    ring3 = e.p.in_ring_of_size(e.i, 3)
    if e.sym == "N":
        if n_arom == 0:
            if h == 0:
                if n_single == 3 and deg == 3:
                    return 3.01 if ring3 else 3.24
                if n_single == 1 and n_double == 1 and deg == 2:
                    return 12.36
                if n_triple == 1 and deg == 1:
                    return 23.79
                if n_single == 1 and n_double == 2:
                    return 11.68
                if n_double == 1 and n_triple == 1:
                    return 13.60
            elif h == 1:
                if n_single == 2 and deg == 2:
                    return 21.94 if ring3 else 12.03
                if n_double == 1 and deg == 1:
                    return 23.85
            elif h == 2 and n_single == 1 and deg == 1:
                return 26.02
        else:
            if h == 0:
                if n_arom == 2 and deg == 2:
                    return 12.89
                if n_arom == 3:
                    return 4.41
                if n_arom == 2 and n_single == 1:
                    return 4.93
                if n_arom == 2 and n_double == 1:
                    return 8.39
            elif h == 1 and n_arom == 2 and deg == 2:
                return 15.79
        return max(0.0, 30.5 - 8.2 * deg + 1.5 * h)
    if e.sym == "O":
        if n_arom == 0:
            if h == 0 and n_single == 2 and deg == 2:
                return 12.53 if ring3 else 9.23
            if h == 0 and n_double == 1 and deg == 1:
                return 17.07
            if h == 1 and n_single == 1 and deg == 1:
                return 20.23
        elif n_arom == 2 and h == 0 and deg == 2:
            return 13.14
        return max(0.0, 28.5 - 8.6 * deg + 1.5 * h)
    return 0.0


def tpsa(p: Perceived) -> float:
    return float(sum(_tpsa_atom(_Env(p, i)) for i in p.atoms))


# complexity -------------------------------------------------------------------

def _weighted_order(p: Perceived, i: int, j: int) -> float:
    b = p.bond_type(i, j)
    return 1.5 if b == AROMATIC else float(b)


def bertz_ct(p: Perceived) -> float:
    atoms = p.atoms
    n = len(atoms)
    if n < 2:
        return 0.0
    pos = {a: k for k, a in enumerate(atoms)}
    W = np.zeros((n, n))
    for key in p.order:
        i, j = tuple(key)
        W[pos[i], pos[j]] = W[pos[j], pos[i]] = 1.0 / _weighted_order(p, i, j)
    D = shortest_path(W, method="D", directed=False)
    D[np.isinf(D)] = 1e8
    rows = np.sort(D, axis=1)
    seen: dict[str, int] = {}
    sym = [seen.setdefault(",".join(f"{v:.4f}" for v in row), len(seen) + 1) for row in rows]

    connections: Counter = Counter()
    for a in atoms:
        hinge = sym[pos[a]]
        nb = sorted(p.neighbors(a))
        for x, ni in enumerate(nb):
            ci = sym[pos[ni]]
            oi = _weighted_order(p, a, ni)
            if oi > 1 and ni > a:
                connections[(min(hinge, ci), max(hinge, ci))] += oi * (oi - 1) / 2
            for nj in nb[x + 1:]:
                cj = sym[pos[nj]]
                connections[(min(ci, cj), hinge, max(ci, cj))] += oi * _weighted_order(p, a, nj)
    if not connections:
        connections = Counter({"none": 1})
    counts = np.array(list(connections.values()), dtype=float)
    T = counts.sum()
    conn = 2 * T * math.log2(T) - float(np.sum(counts * np.log2(counts)))
    types = np.array(list(Counter(p.symbols[a] for a in atoms).values()), dtype=float)
    atom_term = n * math.log2(n) - float(np.sum(types * np.log2(types)))
    return conn + atom_term


# counts -----------------------------------------------------------------------

def h_donors(p: Perceived) -> int:
    return sum(1 for i in p.atoms if p.symbols[i] in ("N", "O") and p.hcount[i] >= 1)


def h_acceptors(p: Perceived) -> int:
    return sum(1 for i in p.atoms if p.symbols[i] in ("N", "O"))


def _rotor_end(p: Perceived, i: int) -> bool:
    """Conditions both ends of a rotatable bond must meet."""
    nb = p.neighbors(i)
    if len(nb) < 2 or any(p.order[frozenset((i, j))] == 3 for j in nb):
        return False
    if p.symbols[i] == "C":
        # CF3 and C(CH3)3 spin without changing shape
        if sum(p.symbols[j] == "F" for j in nb) >= 3:
            return False
        if sum(p.symbols[j] == "C" and j not in p.aromatic_atoms and p.hcount[j] == 3 for j in nb) >= 3:
            return False
    return True


def _acyl_carbon(p: Perceived, i: int) -> bool:
    """Three-connected C=X (X in N, O) with a chain single bond to N or O."""
    if p.symbols[i] != "C" or i in p.aromatic_atoms or len(p.neighbors(i)) != 3:
        return False
    nb = p.neighbors(i)
    if not any(p.order[frozenset((i, j))] == 2 and p.symbols[j] in ("N", "O") and j not in p.aromatic_atoms
               for j in nb):
        return False
    return any(_chain_single(p, i, j) and _hetero_link(p, j) for j in nb)


def _hetero_link(p: Perceived, j: int) -> bool:
    return p.symbols[j] == "N" or (p.symbols[j] == "O" and j not in p.aromatic_atoms)


def _chain_single(p: Perceived, i: int, j: int) -> bool:
    key = frozenset((i, j))
    return p.order[key] == 1 and key not in p.aromatic_bonds and key not in p.all_ring_bonds


def _acyl_partner(p: Perceived, i: int) -> bool:
    return _hetero_link(p, i) and any(_chain_single(p, i, j) and _acyl_carbon_core(p, j) for j in p.neighbors(i))


def _acyl_carbon_core(p: Perceived, j: int) -> bool:
    if p.symbols[j] != "C" or j in p.aromatic_atoms or len(p.neighbors(j)) != 3:
        return False
    return any(p.order[frozenset((j, k))] == 2 and p.symbols[k] in ("N", "O") and k not in p.aromatic_atoms
               for k in p.neighbors(j))


def rotatable_bonds(p: Perceived) -> int:
    """Strict rotor count: amide/ester-type C(=X)-Y links and symmetric tops are excluded."""
    def leading(i):
        return _rotor_end(p, i) and not _acyl_carbon(p, i) and not _acyl_partner(p, i)

    count = 0
    for key in p.order:
        i, j = sorted(key)
        if not _chain_single(p, i, j):
            continue
        if (leading(i) and _rotor_end(p, j)) or (leading(j) and _rotor_end(p, i)):
            count += 1
    return count


def mol_wt(p: Perceived) -> float:
    return sum(MASSES[p.symbols[i]] + p.hcount[i] * MASSES["H"] for i in p.atoms)


def descriptors(graph: MolecularGraph, check: bool = True) -> DescriptorVector:
    """All per-molecule descriptors; internal_similarity is left NaN (corpus-level)."""
    if check:
        report = validate(graph)
        if not report.is_valid:
            raise ValueError(f"descriptors need a valid graph ({report.error_class})")
    p = perceive(graph)
    arom = sum(p.aromatic_rings)
    return DescriptorVector(
        mol_wt=mol_wt(p),
        mol_log_p=crippen_log_p(p),
        bertz_ct=bertz_ct(p),
        tpsa=tpsa(p),
        h_acceptors=h_acceptors(p),
        h_donors=h_donors(p),
        rotatable_bonds=rotatable_bonds(p),
        aromatic_rings=arom,
        aliphatic_rings=len(p.rings) - arom,
    )
