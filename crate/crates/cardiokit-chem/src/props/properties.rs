//! The ten conditioning physicochemical properties.

use crate::element::Element;
use crate::smiles::molecule::{BondOrder, Molecule, StereoMark};

use super::tables;

pub const PROPERTY_NAMES: [&str; 10] = [
    "molecular_weight",
    "n_rings",
    "n_rotatable_bonds",
    "n_hbd",
    "n_hba",
    "tpsa",
    "n_heteroatoms",
    "logp",
    "n_stereocenters",
    "formal_charge",
];

/// Exactly ten entries, in the order of [`PROPERTY_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyVector {
    pub molecular_weight: f64,
    pub n_rings: f64,
    pub n_rotatable_bonds: f64,
    pub n_hbd: f64,
    pub n_hba: f64,
    pub tpsa: f64,
    pub n_heteroatoms: f64,
    pub logp: f64,
    pub n_stereocenters: f64,
    pub formal_charge: f64,
}

impl PropertyVector {
    pub fn to_array(self) -> [f64; 10] {
        [
            self.molecular_weight,
            self.n_rings,
            self.n_rotatable_bonds,
            self.n_hbd,
            self.n_hba,
            self.tpsa,
            self.n_heteroatoms,
            self.logp,
            self.n_stereocenters,
            self.formal_charge,
        ]
    }

    pub fn from_array(values: [f64; 10]) -> PropertyVector {
        PropertyVector {
            molecular_weight: values[0],
            n_rings: values[1],
            n_rotatable_bonds: values[2],
            n_hbd: values[3],
            n_hba: values[4],
            tpsa: values[5],
            n_heteroatoms: values[6],
            logp: values[7],
            n_stereocenters: values[8],
            formal_charge: values[9],
        }
    }
}

/// Sums after sorting so the result is bitwise identical for any atom
/// ordering of the same graph.
pub(crate) fn ordered_sum(mut contributions: Vec<f64>) -> f64 {
    contributions.sort_by(|a, b| a.total_cmp(b));
    contributions.iter().sum()
}

pub fn molecular_weight(mol: &Molecule) -> f64 {
    ordered_sum(
        mol.atoms
            .iter()
            .map(|a| a.element.atomic_mass() + f64::from(a.h_count) * Element::H.atomic_mass())
            .collect(),
    )
}

/// Single non-ring bond between two non-terminal heavy atoms, excluding
/// amide C-N bonds.
pub fn n_rotatable_bonds(mol: &Molecule) -> usize {
    mol.bonds
        .iter()
        .enumerate()
        .filter(|(bi, bond)| {
            bond.order == BondOrder::Single
                && !mol.ring_bonds[*bi]
                && mol.degree(bond.a) >= 2
                && mol.degree(bond.b) >= 2
                && !is_amide(mol, bond.a, bond.b)
                && !is_amide(mol, bond.b, bond.a)
        })
        .count()
}

fn is_amide(mol: &Molecule, carbon: usize, nitrogen: usize) -> bool {
    mol.atoms[carbon].element == Element::C
        && mol.atoms[nitrogen].element == Element::N
        && mol.neighbors(carbon).iter().any(|&(n, bi)| {
            mol.atoms[n].element == Element::O && mol.bonds[bi].order == BondOrder::Double
        })
}

/// Donor: N or O carrying at least one hydrogen.
pub fn n_hbd(mol: &Molecule) -> usize {
    mol.atoms
        .iter()
        .filter(|a| matches!(a.element, Element::N | Element::O) && a.h_count > 0)
        .count()
}

/// Acceptor: N or O that is not positively charged.
pub fn n_hba(mol: &Molecule) -> usize {
    mol.atoms
        .iter()
        .filter(|a| matches!(a.element, Element::N | Element::O) && a.formal_charge <= 0)
        .count()
}

pub fn n_heteroatoms(mol: &Molecule) -> usize {
    mol.atoms
        .iter()
        .filter(|a| !matches!(a.element, Element::C | Element::H))
        .count()
}

pub fn n_stereocenters(mol: &Molecule) -> usize {
    mol.atoms
        .iter()
        .filter(|a| a.stereo_mark != StereoMark::None)
        .count()
}

/// Computes all ten conditioning properties.
pub fn physchem_properties(mol: &Molecule) -> PropertyVector {
    PropertyVector {
        molecular_weight: molecular_weight(mol),
        n_rings: mol.ring_count() as f64,
        n_rotatable_bonds: n_rotatable_bonds(mol) as f64,
        n_hbd: n_hbd(mol) as f64,
        n_hba: n_hba(mol) as f64,
        tpsa: tables::tpsa(mol),
        n_heteroatoms: n_heteroatoms(mol) as f64,
        logp: tables::logp(mol),
        n_stereocenters: n_stereocenters(mol) as f64,
        formal_charge: f64::from(mol.formal_charge_sum()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn water() {
        let p = physchem_properties(&parse("O").unwrap());
        assert!((p.molecular_weight - 18.015).abs() < 0.01);
        assert_eq!(p.n_heteroatoms, 1.0);
        assert_eq!(p.formal_charge, 0.0);
        assert_eq!(p.n_hbd, 1.0);
    }

    #[test]
    fn benzene() {
        let p = physchem_properties(&parse("c1ccccc1").unwrap());
        assert_eq!(p.n_rings, 1.0);
        assert_eq!(p.n_hbd, 0.0);
        assert_eq!(p.n_rotatable_bonds, 0.0);
        assert_eq!(p.tpsa, 0.0);
        assert!((p.molecular_weight - 78.114).abs() < 0.01);
    }

    #[test]
    fn ammonium() {
        let p = physchem_properties(&parse("[NH4+]").unwrap());
        assert_eq!(p.formal_charge, 1.0);
        assert_eq!(p.n_hbd, 1.0);
        assert_eq!(p.n_hba, 0.0);
    }

    #[test]
    fn butane_single_rotor() {
        // terminal bonds excluded: only C2-C3 counts
        let p = physchem_properties(&parse("CCCC").unwrap());
        assert_eq!(p.n_rotatable_bonds, 1.0);
    }

    #[test]
    fn amide_bond_not_rotatable() {
        // N-methylacetamide: the amide C-N is excluded, every other single
        // bond touches a terminal atom. The ester analogue keeps its C-O.
        let amide = physchem_properties(&parse("CC(=O)NC").unwrap());
        assert_eq!(amide.n_rotatable_bonds, 0.0);
        let ester = physchem_properties(&parse("CC(=O)OC").unwrap());
        assert_eq!(ester.n_rotatable_bonds, 1.0);
    }

    #[test]
    fn stereocenters_counted_from_marks() {
        let p = physchem_properties(&parse("C[C@H](N)C(=O)O").unwrap());
        assert_eq!(p.n_stereocenters, 1.0);
    }
}
