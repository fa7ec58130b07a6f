//! Extended descriptor vectors: a versioned, fixed 40-entry layout whose
//! first ten entries are the conditioning properties.

use crate::element::Element;
use crate::smiles::molecule::{BondOrder, Molecule};

use super::properties::{physchem_properties, PROPERTY_NAMES};

pub const DESCRIPTOR_LAYOUT_VERSION: &str = "v1";
pub const DESCRIPTOR_LEN: usize = 40;

const ELEMENT_ORDER: [Element; 9] = [
    Element::C,
    Element::N,
    Element::O,
    Element::P,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
    Element::I,
];

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub version: &'static str,
}

impl DescriptorVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Name and short description for every slot of the v1 layout.
pub fn descriptor_layout() -> Vec<(usize, String, String)> {
    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    for (i, name) in PROPERTY_NAMES.iter().enumerate() {
        out.push((i, name.to_string(), format!("conditioning property {name}")));
    }
    for (k, el) in ELEMENT_ORDER.iter().enumerate() {
        out.push((
            10 + k,
            format!("count_{}", el.symbol()),
            format!("number of {} atoms", el.symbol()),
        ));
    }
    for (k, name) in ["single", "double", "triple", "aromatic"].iter().enumerate() {
        out.push((
            19 + k,
            format!("bonds_{name}"),
            format!("number of {name} bonds"),
        ));
    }
    out.push((
        23,
        "aromatic_fraction".into(),
        "aromatic atoms / heavy atoms".into(),
    ));
    for k in 0..6 {
        out.push((
            24 + k,
            format!("rings_size_{}", k + 3),
            format!("SSSR rings of size {} (8 collects larger)", k + 3),
        ));
    }
    out.push((30, "max_ring_size".into(), "largest SSSR ring, 0 if acyclic".into()));
    for k in 0..4 {
        out.push((
            31 + k,
            format!("degree_{}", k + 1),
            format!("heavy atoms of degree {} (4 collects higher)", k + 1),
        ));
    }
    out.push((
        35,
        "fraction_sp3_carbon".into(),
        "carbons with only single bonds, non-aromatic / all carbons".into(),
    ));
    out.push((36, "graph_diameter".into(), "longest shortest path".into()));
    out.push((37, "n_heavy_atoms".into(), "heavy atom count".into()));
    out.push((38, "n_bonds".into(), "bond count".into()));
    out.push((39, "ring_atom_fraction".into(), "ring atoms / heavy atoms".into()));
    debug_assert_eq!(out.len(), DESCRIPTOR_LEN);
    out
}

/// Renders the layout reference as TSV (index, name, description).
pub fn descriptor_layout_tsv() -> String {
    let mut out = format!("# descriptor layout {DESCRIPTOR_LAYOUT_VERSION}\n");
    for (i, name, desc) in descriptor_layout() {
        out.push_str(&format!("{i}\t{name}\t{desc}\n"));
    }
    out
}

pub fn compute_descriptors(mol: &Molecule) -> DescriptorVector {
    let mut values = vec![0.0; DESCRIPTOR_LEN];
    values[..10].copy_from_slice(&physchem_properties(mol).to_array());

    for atom in &mol.atoms {
        if let Some(k) = ELEMENT_ORDER.iter().position(|e| *e == atom.element) {
            values[10 + k] += 1.0;
        }
    }
    for bond in &mol.bonds {
        let k = match bond.order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        values[19 + k] += 1.0;
    }

    let n = mol.atom_count();
    if n > 0 {
        let aromatic = mol.atoms.iter().filter(|a| a.aromatic).count();
        values[23] = aromatic as f64 / n as f64;
    }

    for ring in &mol.rings {
        let k = ring.len().clamp(3, 8) - 3;
        values[24 + k] += 1.0;
    }
    values[30] = mol.rings.iter().map(|r| r.len()).max().unwrap_or(0) as f64;

    for a in 0..n {
        let d = mol.degree(a);
        if d >= 1 {
            values[31 + d.min(4) - 1] += 1.0;
        }
    }

    let carbons = mol
        .atoms
        .iter()
        .filter(|a| a.element == Element::C)
        .count();
    if carbons > 0 {
        let sp3 = mol
            .atoms
            .iter()
            .filter(|a| {
                a.element == Element::C
                    && !a.aromatic
                    && mol
                        .neighbors(a.index)
                        .iter()
                        .all(|(_, bi)| mol.bonds[*bi].order == BondOrder::Single)
            })
            .count();
        values[35] = sp3 as f64 / carbons as f64;
    }

    values[36] = graph_diameter(mol) as f64;
    values[37] = n as f64;
    values[38] = mol.bond_count() as f64;
    if n > 0 {
        let ring_atoms = mol.ring_membership.iter().filter(|&&r| r).count();
        values[39] = ring_atoms as f64 / n as f64;
    }

    DescriptorVector {
        values,
        version: DESCRIPTOR_LAYOUT_VERSION,
    }
}

fn graph_diameter(mol: &Molecule) -> usize {
    let n = mol.atom_count();
    let mut best = 0;
    for start in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut q = std::collections::VecDeque::new();
        dist[start] = 0;
        q.push_back(start);
        while let Some(u) = q.pop_front() {
            for &(v, _) in mol.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        best = best.max(dist.iter().filter(|&&d| d != usize::MAX).copied().max().unwrap_or(0));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn layout_has_forty_documented_slots() {
        let layout = descriptor_layout();
        assert_eq!(layout.len(), DESCRIPTOR_LEN);
        for (i, (idx, _, _)) in layout.iter().enumerate() {
            assert_eq!(i, *idx);
        }
    }

    #[test]
    fn first_ten_match_properties() {
        let mol = parse("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let d = compute_descriptors(&mol);
        let p = physchem_properties(&mol).to_array();
        assert_eq!(&d.values[..10], &p[..]);
        assert_eq!(d.len(), DESCRIPTOR_LEN);
    }

    #[test]
    fn element_counts() {
        let d = compute_descriptors(&parse("CCO").unwrap());
        assert_eq!(d.values[10], 2.0); // C
        assert_eq!(d.values[11], 0.0); // N
        assert_eq!(d.values[12], 1.0); // O
    }

    #[test]
    fn no_nan_or_inf_on_edge_inputs() {
        for s in ["C", "O", "[NH4+]", "C#N", "c1ccccc1"] {
            let d = compute_descriptors(&parse(s).unwrap());
            assert!(d.values.iter().all(|v| v.is_finite()), "{s}");
        }
    }

    #[test]
    fn diameter_of_chain() {
        let d = compute_descriptors(&parse("CCCCC").unwrap());
        assert_eq!(d.values[36], 4.0);
    }
}
