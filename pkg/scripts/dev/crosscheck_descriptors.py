"""Compare descriptor values with RDKit on small C/N/O/F molecules (development aid)."""
import sys
from collections import Counter

from rdkit import Chem, RDLogger
from rdkit.Chem import Crippen, Descriptors, GraphDescriptors, rdMolDescriptors

from molali.chemio import SmilesError, parse_smiles
from molali.metrics.descriptors import descriptors

RDLogger.DisableLog("rdApp.*")
path = sys.argv[1]
limit = int(sys.argv[2]) if len(sys.argv) > 2 else 10**9
bad = Counter()
n = 0
for line in open(path):
    if line.startswith("#"):
        continue
    smi = line.split(",")[0].split()[0]
    m = Chem.MolFromSmiles(smi)
    if m is None or m.GetNumAtoms() > 9:
        continue
    try:
        g = parse_smiles(smi)
    except SmilesError:
        continue
    n += 1
    d = descriptors(g)
    ref = {
        "mol_wt": Descriptors.MolWt(m), "mol_log_p": Crippen.MolLogP(m), "tpsa": rdMolDescriptors.CalcTPSA(m),
        "bertz_ct": GraphDescriptors.BertzCT(m), "rotatable_bonds": rdMolDescriptors.CalcNumRotatableBonds(m),
        "aromatic_rings": rdMolDescriptors.CalcNumAromaticRings(m),
        "aliphatic_rings": rdMolDescriptors.CalcNumAliphaticRings(m),
    }
    for k, v in ref.items():
        if abs(getattr(d, k) - v) > 1e-2:
            bad[k] += 1
            if bad[k] <= 4:
                print(k, smi, getattr(d, k), v)
    if n >= limit:
        break
print(n, dict(bad))
