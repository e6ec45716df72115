import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import small_corpus
from molali.baseline import RandomModel
from molali.chemio import (ChargedAtom, KekulizationError, SmilesError, SmilesSyntaxError, TooManyAtoms,
                           UnsupportedFeature, ValenceError, parse_smiles, read_smiles_file, tokenize, write_smiles)
from molali.molgraph import canonical_key, validate

from test_molgraph import _isomorphic


def test_tokenizer_kinds():
    kinds = [t.kind for t in tokenize("C1=CC(N)=C1")]
    assert kinds == ["atom", "ring", "bond", "atom", "atom", "branch_open", "atom", "branch_close",
                     "bond", "atom", "ring"]


def test_single_carbon():
    g = parse_smiles("C")
    assert g.n_atoms == 1 and not g.bond_list() and g.implicit_hydrogens()[0] == 4
    assert write_smiles(g) == "C"


def test_hydrogen_cyanide_loads():
    g = parse_smiles("C#N")
    assert g.bond_list() == [(0, 1, 3)]
    assert g.loads()[:2].tolist() == [3, 3]


def test_benzene_kekulized():
    g = parse_smiles("c1ccccc1")
    orders = sorted(o for _, _, o in g.bond_list())
    assert orders == [1, 1, 1, 2, 2, 2]
    # alternation: each carbon has exactly one double bond
    assert all(sum(g.order(i, int(j)) == 2 for j in g.neighbors(i)) == 1 for i in range(6))
    assert (g.loads()[:6] + g.implicit_hydrogens()[:6]).tolist() == [4] * 6


@pytest.mark.parametrize("smiles", ["c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "Cc1ncc[nH]1", "c1cnc2[nH]cnc2c1"])
def test_heteroaromatic_kekulization_exact_valences(smiles):
    g = parse_smiles(smiles)
    assert validate(g).is_valid
    assert np.all(g.implicit_hydrogens() >= 0)


@pytest.mark.parametrize("smiles, error", [
    ("[NH4+]", ChargedAtom), ("C[O-]", ChargedAtom), ("[13CH4]", UnsupportedFeature),
    ("CCl", UnsupportedFeature), ("C.C", UnsupportedFeature), ("C(=O)(=O)=O", ValenceError),
    ("C1CC", SmilesSyntaxError), ("C(C", SmilesSyntaxError), ("c1cccc1", KekulizationError),
    ("CCCCCCCCCC", TooManyAtoms), ("", SmilesSyntaxError),
])
def test_rejections(smiles, error):
    with pytest.raises(error):
        parse_smiles(smiles)


def test_error_hierarchy():
    for cls in (ChargedAtom, UnsupportedFeature, ValenceError, SmilesSyntaxError, KekulizationError):
        assert issubclass(cls, SmilesError)


def test_permuted_ethanol_same_output():
    g = parse_smiles("CCO")
    assert write_smiles(g) == write_smiles(g.permute([1, 2, 0, 3, 4, 5, 6, 7, 8]))


def test_write_rejects_invalid():
    g = RandomModel(seed=1)(50)
    bad = next(x for x in g if not validate(x).is_valid)
    with pytest.raises(ValueError):
        write_smiles(bad)
    assert write_smiles(bad, strict=False)


def test_round_trip_small_corpus():
    for g in small_corpus():
        again = parse_smiles(write_smiles(g))
        assert _isomorphic(g, again)
        assert write_smiles(again) == write_smiles(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_round_trip_property(seed):
    g = RandomModel(seed=seed, sizes="uniform")(1)[0]
    if not validate(g).is_valid:
        return
    s = write_smiles(g)
    back = parse_smiles(s)
    assert _isomorphic(g, back)
    assert canonical_key(back) == s


def test_read_smiles_file(tmp_path):
    p = tmp_path / "x.smi"
    p.write_text("# header\nCCO ethanol\n\n  C#N\n")
    assert read_smiles_file(p) == ["CCO", "C#N"]


def test_rdkit_adapter_agrees_on_isomorphism():
    Chem = pytest.importorskip("rdkit.Chem")
    from molali.chemio import to_rdkit

    for g in small_corpus():
        a = Chem.MolToSmiles(to_rdkit(g))
        b = Chem.MolToSmiles(to_rdkit(parse_smiles(write_smiles(g))))
        assert a == b
