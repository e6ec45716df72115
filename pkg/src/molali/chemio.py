"""SMILES subset reader and canonical writer.

Supported grammar: organic-subset atoms C N O F and aromatic c n o; bracket
atoms of the same elements with optional H count, chirality marks (dropped)
and a zero charge; bonds - = # : / \\ (directional marks read as single);
branches; ring closures 0-9 and %nn. Anything else is rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .molgraph import QM9_VOCAB, AtomVocabulary, MolecularGraph, validate

__all__ = [
    "SmilesError",
    "UnsupportedFeature",
    "ChargedAtom",
    "TooManyAtoms",
    "ValenceError",
    "SmilesSyntaxError",
    "KekulizationError",
    "SmilesToken",
    "tokenize",
    "parse_smiles",
    "write_smiles",
    "read_smiles_file",
]


class SmilesError(ValueError):
    pass


class UnsupportedFeature(SmilesError):
    pass


class ChargedAtom(UnsupportedFeature):
    pass


class TooManyAtoms(UnsupportedFeature):
    pass


class ValenceError(SmilesError):
    pass


class SmilesSyntaxError(SmilesError):
    pass


class KekulizationError(SmilesError):
    pass


@dataclass(frozen=True)
class SmilesToken:
    kind: str  # atom, bond, ring, branch_open, branch_close
    payload: object = None
    text: str = ""


_TOKEN_RE = re.compile(
    r"(\[[^\]]*\])|(Cl|Br|[BCNOSPFI]|[bcnosp])|(%\d\d|\d)|([-=#:/\\$.])|(\()|(\))|(\*)"
)
_BRACKET_RE = re.compile(
    r"^\[(?P<iso>\d+)?(?P<sym>[A-Z][a-z]?|[a-z]{1,2}|\*)"
    r"(?P<chiral>@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<h>H\d?)?(?P<charge>[+-]{1,3}\d*)?(?P<cls>:\d+)?\]$"
)
_BOND_ORDER = {"-": 1, "/": 1, "\\": 1, "=": 2, "#": 3, ":": "arom"}
_AROMATIC = {"c": "C", "n": "N", "o": "O"}


@dataclass
class _Atom:
    symbol: str
    aromatic: bool
    hcount: int | None  # explicit count from a bracket atom; None = implicit


def tokenize(text: str) -> Iterator[SmilesToken]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SmilesSyntaxError(f"unexpected character {text[pos]!r} at {pos} in {text!r}")
        bracket, organic, ring, bond, bopen, bclose, star = m.groups()
        tok = m.group(0)
        if bracket:
            yield SmilesToken("atom", _parse_bracket(bracket), tok)
        elif organic:
            yield SmilesToken("atom", _organic_atom(organic), tok)
        elif ring:
            yield SmilesToken("ring", int(ring.lstrip("%")), tok)
        elif bond:
            if bond == ".":
                raise UnsupportedFeature("disconnected structures ('.') are not supported")
            if bond == "$":
                raise UnsupportedFeature("quadruple bonds are not supported")
            yield SmilesToken("bond", _BOND_ORDER[bond], tok)
        elif bopen:
            yield SmilesToken("branch_open", None, tok)
        elif bclose:
            yield SmilesToken("branch_close", None, tok)
        else:
            raise UnsupportedFeature("wildcard atoms are not supported")
        pos = m.end()


def _organic_atom(sym: str) -> _Atom:
    if sym in _AROMATIC:
        return _Atom(_AROMATIC[sym], True, None)
    if sym in ("C", "N", "O", "F"):
        return _Atom(sym, False, None)
    raise UnsupportedFeature(f"element {sym!r} is outside the vocabulary")


def _parse_bracket(tok: str) -> _Atom | str:
    m = _BRACKET_RE.match(tok)
    if m is None:
        raise SmilesSyntaxError(f"malformed bracket atom {tok!r}")
    if m.group("iso"):
        raise UnsupportedFeature(f"isotopes are not supported: {tok}")
    charge = m.group("charge")
    if charge:
        digits = charge.lstrip("+-")
        value = int(digits) if digits else len(charge)
        if value != 0:
            raise ChargedAtom(f"charged atom {tok}")
    if m.group("cls"):
        raise UnsupportedFeature(f"atom classes are not supported: {tok}")
    h = m.group("h")
    hcount = 0 if h is None else (int(h[1:]) if len(h) > 1 else 1)
    sym = m.group("sym")
    if sym == "H":
        return "H"
    if sym in _AROMATIC:
        return _Atom(_AROMATIC[sym], True, hcount)
    if sym in ("C", "N", "O", "F"):
        return _Atom(sym, False, hcount)
    raise UnsupportedFeature(f"element {sym!r} is outside the vocabulary")


def _read_structure(text: str):
    """Return atoms, bonds (i, j, order|'arom') and explicit-H neighbour counts."""
    atoms: list[_Atom | str] = []
    bonds: list[tuple[int, int, object]] = []
    stack: list[int | None] = []
    prev: int | None = None
    pending_bond = None
    rings: dict[int, tuple[int, object]] = {}

    def add_bond(i, j, sym):
        ai, aj = atoms[i], atoms[j]
        if sym is None:
            arom = isinstance(ai, _Atom) and isinstance(aj, _Atom) and ai.aromatic and aj.aromatic
            sym = "arom" if arom else 1
        bonds.append((i, j, sym))

    for tok in tokenize(text):
        if tok.kind == "atom":
            atoms.append(tok.payload)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending_bond)
            elif pending_bond is not None:
                raise SmilesSyntaxError(f"bond without a preceding atom in {text!r}")
            prev, pending_bond = idx, None
        elif tok.kind == "bond":
            if pending_bond is not None or prev is None:
                raise SmilesSyntaxError(f"misplaced bond symbol in {text!r}")
            pending_bond = tok.payload
        elif tok.kind == "ring":
            if prev is None:
                raise SmilesSyntaxError(f"ring closure without an atom in {text!r}")
            digit = tok.payload
            if digit in rings:
                other, sym = rings.pop(digit)
                if other == prev:
                    raise SmilesSyntaxError(f"ring closure onto the same atom in {text!r}")
                if sym is not None and pending_bond is not None and sym != pending_bond:
                    raise SmilesSyntaxError(f"conflicting ring bond symbols in {text!r}")
                add_bond(other, prev, pending_bond if pending_bond is not None else sym)
            else:
                rings[digit] = (prev, pending_bond)
            pending_bond = None
        elif tok.kind == "branch_open":
            if prev is None or pending_bond is not None:
                raise SmilesSyntaxError(f"misplaced branch in {text!r}")
            stack.append(prev)
        else:
            if not stack or pending_bond is not None:
                raise SmilesSyntaxError(f"unbalanced branch in {text!r}")
            prev = stack.pop()
    if stack:
        raise SmilesSyntaxError(f"unclosed branch in {text!r}")
    if rings:
        raise SmilesSyntaxError(f"unmatched ring closure(s) {sorted(rings)} in {text!r}")
    if pending_bond is not None:
        raise SmilesSyntaxError(f"dangling bond in {text!r}")
    if not atoms:
        raise SmilesSyntaxError("empty SMILES")

    # fold explicit hydrogen atoms into their neighbour's count
    heavy = [i for i, a in enumerate(atoms) if a != "H"]
    remap = {old: new for new, old in enumerate(heavy)}
    h_extra = [0] * len(heavy)
    heavy_bonds = []
    for i, j, order in bonds:
        hi, hj = atoms[i] == "H", atoms[j] == "H"
        if hi and hj:
            raise UnsupportedFeature("molecular hydrogen is not supported")
        if hi or hj:
            if order not in (1, None):
                raise ValenceError("hydrogen must be singly bonded")
            h_extra[remap[j if hi else i]] += 1
        else:
            heavy_bonds.append((remap[i], remap[j], order))
    if not heavy:
        raise UnsupportedFeature("no heavy atoms")
    return [atoms[i] for i in heavy], heavy_bonds, h_extra


def _kekulize(atoms, bonds, h_extra, vocab):
    """Assign single/double orders to aromatic bonds by exact perfect matching."""
    arom_idx = [k for k, b in enumerate(bonds) if b[2] == "arom"]
    if not arom_idx:
        return [(i, j, o) for i, j, o in bonds]
    base = [h_extra[i] + (atoms[i].hcount or 0) for i in range(len(atoms))]
    arom_nbrs: dict[int, list[int]] = {}
    for i, j, o in bonds:
        if o == "arom":
            base[i] += 1
            base[j] += 1
            arom_nbrs.setdefault(i, []).append(j)
            arom_nbrs.setdefault(j, []).append(i)
        else:
            base[i] += o
            base[j] += o
    for i in arom_nbrs:
        if not atoms[i].aromatic:
            raise KekulizationError("aromatic bond between non-aromatic atoms")
    need = {
        i
        for i in arom_nbrs
        if vocab.atom_capacity[vocab.type_index(atoms[i].symbol) - 1] - base[i] >= 1
    }
    for i, a in enumerate(atoms):
        if a.aromatic and i not in arom_nbrs:
            raise KekulizationError(f"aromatic atom {i} is not in an aromatic system")

    partner: dict[int, int] = {}
    order = sorted(need)

    def solve(pos: int) -> bool:
        while pos < len(order) and order[pos] in partner:
            pos += 1
        if pos == len(order):
            return True
        v = order[pos]
        for u in sorted(arom_nbrs[v]):
            if u in need and u not in partner:
                partner[v], partner[u] = u, v
                if solve(pos + 1):
                    return True
                del partner[v], partner[u]
        return False

    if not solve(0):
        raise KekulizationError("no valid Kekule structure")
    out = []
    for i, j, o in bonds:
        if o == "arom":
            o = 2 if partner.get(i) == j else 1
        out.append((i, j, o))
    return out


def parse_smiles(text: str, vocab: AtomVocabulary = QM9_VOCAB, n_max: int | None = None) -> MolecularGraph:
    """Parse a SMILES string of the supported subset into a MolecularGraph."""
    text = text.strip()
    if not text:
        raise SmilesSyntaxError("empty SMILES")
    atoms, bonds, h_extra = _read_structure(text)
    return _assemble(atoms, bonds, h_extra, vocab, n_max, text)


def _assemble(atoms, bonds, h_extra, vocab, n_max, label) -> MolecularGraph:
    n_max = vocab.n_max if n_max is None else n_max
    if len(atoms) > n_max:
        raise TooManyAtoms(f"{len(atoms)} heavy atoms exceed n_max={n_max}")
    seen = set()
    for i, j, _ in bonds:
        key = (min(i, j), max(i, j))
        if key in seen:
            raise SmilesSyntaxError(f"duplicate bond {key} in {label!r}")
        seen.add(key)
    bonds = _kekulize(atoms, bonds, h_extra, vocab)

    load = list(h_extra)
    for i, j, o in bonds:
        load[i] += o
        load[j] += o
    for i, a in enumerate(atoms):
        cap = vocab.atom_capacity[vocab.type_index(a.symbol) - 1]
        total = load[i] + (a.hcount or 0)
        if total > cap:
            raise ValenceError(f"atom {i} ({a.symbol}) exceeds valence {cap} in {label!r}")
        if a.hcount is not None and total != cap:
            raise UnsupportedFeature(f"radical or unusual valence at atom {i} in {label!r}")
    return MolecularGraph.from_atoms_bonds([a.symbol for a in atoms], bonds, vocab, n_max)


# writing ----------------------------------------------------------------------

_BOND_SYMBOL = {1: "", 2: "=", 3: "#"}


def _rank(keys: list) -> list[int]:
    uniq = sorted(set(keys))
    pos = {k: r for r, k in enumerate(uniq)}
    return [pos[k] for k in keys]


def _refine(colors: list[int], nbrs: list[list[tuple[int, int]]]) -> list[int]:
    n_colors = len(set(colors))
    while True:
        keys = [
            (colors[v], tuple(sorted((order, colors[u]) for u, order in nbrs[v])))
            for v in range(len(colors))
        ]
        new = _rank(keys)
        n_new = len(set(new))
        if n_new == n_colors:
            return new
        colors, n_colors = new, n_new


def _leaf_orderings(colors, nbrs):
    colors = _refine(colors, nbrs)
    if len(set(colors)) == len(colors):
        yield colors
        return
    counts: dict[int, int] = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    target = min(c for c, k in counts.items() if k > 1)
    for v in range(len(colors)):
        if colors[v] != target:
            continue
        split = [2 * c for c in colors]
        split[v] -= 1
        yield from _leaf_orderings(_rank(split), nbrs)


def _emit(atoms: list[str], nbrs, rank: list[int]) -> str:
    n = len(atoms)
    pieces = []
    done = [False] * n
    for start in sorted(range(n), key=lambda v: rank[v]):
        if done[start]:
            continue
        # pass 1: spanning tree and ring-closure edges
        visited_pos: dict[int, int] = {}
        children: dict[int, list[int]] = {}
        closures: dict[int, list[tuple[int, int]]] = {}
        closed: set[frozenset] = set()

        def dfs(v, parent):
            visited_pos[v] = len(visited_pos)
            children[v] = []
            for u, order in sorted(nbrs[v], key=lambda t: rank[t[0]]):
                if u == parent:
                    continue
                if u in visited_pos:
                    e = frozenset((u, v))
                    if e not in closed:
                        closed.add(e)
                        closures.setdefault(u, []).append((v, order))
                        closures.setdefault(v, []).append((u, order))
                else:
                    children[v].append((u, order))
                    dfs(u, v)

        dfs(start, None)
        for v in visited_pos:
            done[v] = True

        # pass 2: emission
        out: list[str] = []
        open_digits: dict[frozenset, int] = {}
        free = list(range(1, 100))

        def ring_label(d):
            return str(d) if d < 10 else f"%{d:02d}"

        def write(v, bond_order):
            out.append(_BOND_SYMBOL[bond_order] if bond_order else "")
            out.append(atoms[v])
            ring_bonds = closures.get(v, [])
            closing = sorted(
                (e for e in ring_bonds if visited_pos[e[0]] < visited_pos[v]),
                key=lambda e: open_digits[frozenset((e[0], v))],
            )
            opening = sorted(
                (e for e in ring_bonds if visited_pos[e[0]] > visited_pos[v]),
                key=lambda e: rank[e[0]],
            )
            for u, _ in closing:
                d = open_digits.pop(frozenset((u, v)))
                out.append(ring_label(d))
                free.append(d)
                free.sort()
            for u, order in opening:
                d = free.pop(0)
                open_digits[frozenset((u, v))] = d
                out.append(_BOND_SYMBOL[order] + ring_label(d))
            kids = children[v]
            for k, (u, order) in enumerate(kids):
                if k < len(kids) - 1:
                    out.append("(")
                    write(u, order)
                    out.append(")")
                else:
                    write(u, order)

        write(start, None)
        pieces.append("".join(out))
    return ".".join(pieces)


def write_smiles(graph: MolecularGraph, canonical: bool = True, strict: bool = True) -> str:
    """Write a kekulized SMILES string.

    With ``canonical`` the string is the lexicographic minimum over all
    leaves of an individualization-refinement search, so isomorphic graphs
    give identical strings. ``strict`` rejects invalid graphs; otherwise
    components are joined by '.' and ghost nodes that carry bonds become '*'.
    """
    if strict:
        report = validate(graph)
        if not report.is_valid:
            raise ValueError(f"cannot write invalid graph ({report.error_class})")
    nodes = [i for i in range(graph.n_max) if graph.types[i] > 0 or graph.bonds[i].any()]
    if not nodes:
        return ""
    index = {v: k for k, v in enumerate(nodes)}
    atoms = [graph.symbol(v) for v in nodes]
    nbrs: list[list[tuple[int, int]]] = [[] for _ in nodes]
    for v in nodes:
        for u in graph.neighbors(v):
            nbrs[index[v]].append((index[int(u)], graph.order(v, int(u))))
    if not canonical:
        return _emit(atoms, nbrs, list(range(len(nodes))))
    elem_order = {s: k for k, s in enumerate(("C", "N", "O", "F", "*"))}
    init = _rank(
        [
            (elem_order.get(atoms[v], 99), len(nbrs[v]), sum(o for _, o in nbrs[v]))
            for v in range(len(nodes))
        ]
    )
    best = None
    for leaf in _leaf_orderings(init, nbrs):
        s = _emit(atoms, nbrs, leaf)
        if best is None or s < best:
            best = s
    return best


def read_smiles_file(path) -> list[str]:
    """First whitespace-separated field of each non-empty, non-comment line."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(line.split()[0])
    return out


def graph_atoms_bonds(graph: MolecularGraph):
    """Compact (atoms, bonds) lists over real nodes, for adapters and plotting."""
    real = graph.real_nodes.tolist()
    index = {v: k for k, v in enumerate(real)}
    bonds = [(index[i], index[j], o) for i, j, o in graph.bond_list() if i in index and j in index]
    return [graph.symbol(v) for v in real], bonds


def to_rdkit(graph: MolecularGraph):  # pragma: no cover - optional adapter
    """Optional cross-validation adapter; requires rdkit."""
    from rdkit import Chem

    atoms, bonds = graph_atoms_bonds(graph)
    mol = Chem.RWMol()
    for s in atoms:
        mol.AddAtom(Chem.Atom(s))
    kinds = {1: Chem.BondType.SINGLE, 2: Chem.BondType.DOUBLE, 3: Chem.BondType.TRIPLE}
    for i, j, o in bonds:
        mol.AddBond(i, j, kinds[o])
    m = mol.GetMol()
    Chem.SanitizeMol(m)
    return m


def degree_sequence(graph: MolecularGraph) -> np.ndarray:
    return np.count_nonzero(graph.bonds, axis=1)
