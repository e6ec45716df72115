"""Freeze an external-toolkit reference for descriptor tests.

Selects small neutral C/N/O/F molecules from the NCI sample bundled with RDKit
and records RDKit's descriptor values. Writes tests/data/nci_small.smi and
tests/data/rdkit_descriptors.json. Requires rdkit (development only).
"""
from __future__ import annotations

import json
from pathlib import Path

from rdkit import Chem, RDConfig, RDLogger
from rdkit.Chem import Crippen, Descriptors, GraphDescriptors, rdMolDescriptors

RDLogger.DisableLog("rdApp.*")
ROOT = Path(__file__).resolve().parents[2] / "tests" / "data"
SOURCE = Path(RDConfig.RDDataDir) / "NCI" / "first_5K.smi"


def keep(m) -> bool:
    if m is None or not 1 <= m.GetNumAtoms() <= 9:
        return False
    return all(a.GetSymbol() in "CNOF" and a.GetFormalCharge() == 0 and a.GetNumRadicalElectrons() == 0
               and a.GetIsotope() == 0 for a in m.GetAtoms())


def reference(m) -> dict:
    return {
        "mol_wt": Descriptors.MolWt(m),
        "mol_log_p": Crippen.MolLogP(m),
        "tpsa": rdMolDescriptors.CalcTPSA(m),
        "bertz_ct": GraphDescriptors.BertzCT(m),
        "rotatable_bonds": rdMolDescriptors.CalcNumRotatableBonds(m),
        "aromatic_rings": rdMolDescriptors.CalcNumAromaticRings(m),
        "aliphatic_rings": rdMolDescriptors.CalcNumAliphaticRings(m),
        "h_donors": rdMolDescriptors.CalcNumHBD(m),
    }


def main():
    rows = []
    seen = set()
    for line in SOURCE.read_text().splitlines():
        smi = line.split()[0] if line.strip() else ""
        m = Chem.MolFromSmiles(smi)
        if not keep(m):
            continue
        can = Chem.MolToSmiles(m)
        if can in seen or "." in can:
            continue
        seen.add(can)
        rows.append({"smiles": can, **reference(m)})
    (ROOT / "nci_small.smi").write_text("".join(r["smiles"] + "\n" for r in rows))
    (ROOT / "rdkit_descriptors.json").write_text(json.dumps({"rdkit": Chem.rdBase.rdkitVersion, "rows": rows}, indent=0))
    print(f"{len(rows)} molecules")


if __name__ == "__main__":
    main()
