//! Frozen additive-contribution tables for LogP and TPSA.
//!
//! Both tables ship as versioned TSV data files compiled into the binary.
//! The values give deterministic, monotone estimates; numeric parity with
//! any external toolkit is a non-goal.

use std::sync::OnceLock;

use crate::element::Element;
use crate::smiles::molecule::{BondOrder, Molecule};

const LOGP_TSV: &str = include_str!("../../data/logp_contrib.tsv");
const TPSA_TSV: &str = include_str!("../../data/tpsa_contrib.tsv");

fn parse_table(tsv: &str) -> Vec<f64> {
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for line in tsv.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .expect("class id column")
            .trim()
            .parse()
            .expect("numeric class id");
        let contribution: f64 = fields
            .nth(1)
            .expect("contribution column")
            .trim()
            .parse()
            .expect("numeric contribution");
        rows.push((id, contribution));
    }
    rows.sort_by_key(|(id, _)| *id);
    let mut out = vec![0.0; rows.len() + 1];
    for (id, c) in rows {
        out[id] = c;
    }
    out
}

fn logp_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(LOGP_TSV))
}

fn tpsa_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(TPSA_TSV))
}

fn has_hetero_neighbor(mol: &Molecule, atom: usize) -> bool {
    mol.neighbors(atom)
        .iter()
        .any(|&(n, _)| !matches!(mol.atoms[n].element, Element::C | Element::H))
}

fn logp_class(mol: &Molecule, atom: usize) -> usize {
    let a = &mol.atoms[atom];
    match a.element {
        Element::C => match (a.aromatic, has_hetero_neighbor(mol, atom)) {
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
            (true, true) => 4,
        },
        Element::N => {
            if a.formal_charge > 0 {
                8
            } else if a.aromatic {
                7
            } else if a.h_count > 0 {
                5
            } else {
                6
            }
        }
        Element::O => {
            if a.formal_charge < 0 {
                12
            } else if a.aromatic {
                11
            } else if a.h_count > 0 {
                9
            } else {
                10
            }
        }
        Element::S => 13,
        Element::P | Element::B => 14,
        Element::F => 15,
        Element::Cl => 16,
        Element::Br => 17,
        Element::I => 18,
        Element::H => 19, // bare graph hydrogen behaves like H-on-C
    }
}

/// Additive LogP over the frozen 20-class table.
pub fn logp(mol: &Molecule) -> f64 {
    let table = logp_table();
    let mut contributions = Vec::with_capacity(mol.atom_count() * 2);
    for atom in &mol.atoms {
        contributions.push(table[logp_class(mol, atom.index)]);
        let h_class = if atom.element == Element::C { 19 } else { 20 };
        contributions.push(f64::from(atom.h_count) * table[h_class]);
    }
    crate::props::properties::ordered_sum(contributions)
}

struct BondCounts {
    single: u32,
    double: u32,
    triple: u32,
    aromatic: u32,
}

fn bond_counts(mol: &Molecule, atom: usize) -> BondCounts {
    let mut c = BondCounts {
        single: 0,
        double: 0,
        triple: 0,
        aromatic: 0,
    };
    for &(_, bi) in mol.neighbors(atom) {
        match mol.bonds[bi].order {
            BondOrder::Single => c.single += 1,
            BondOrder::Double => c.double += 1,
            BondOrder::Triple => c.triple += 1,
            BondOrder::Aromatic => c.aromatic += 1,
        }
    }
    c
}

fn tpsa_class(mol: &Molecule, atom: usize) -> Option<usize> {
    let a = &mol.atoms[atom];
    let b = bond_counts(mol, atom);
    match a.element {
        Element::N => Some(if a.formal_charge > 0 {
            if a.aromatic {
                if a.h_count > 0 {
                    14
                } else {
                    15
                }
            } else {
                match a.h_count {
                    0 => 10,
                    1 => 11,
                    2 => 12,
                    _ => 13,
                }
            }
        } else if a.aromatic {
            if a.h_count > 0 {
                8
            } else if b.aromatic + b.single + b.double >= 3 {
                9
            } else {
                7
            }
        } else if b.triple > 0 {
            5
        } else if b.double >= 2 || (b.double == 1 && b.single >= 2) {
            6
        } else if b.double == 1 {
            4
        } else {
            match a.h_count {
                0 => 1,
                1 => 2,
                _ => 3,
            }
        }),
        Element::O => Some(if a.formal_charge < 0 {
            20
        } else if a.aromatic {
            19
        } else if a.h_count > 0 {
            17
        } else if b.double > 0 {
            18
        } else {
            16
        }),
        _ => None,
    }
}

/// Additive topological polar surface area over N/O fragment classes.
pub fn tpsa(mol: &Molecule) -> f64 {
    let table = tpsa_table();
    crate::props::properties::ordered_sum(
        mol.atoms
            .iter()
            .filter_map(|a| tpsa_class(mol, a.index))
            .map(|class| table[class])
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn tables_parse() {
        assert_eq!(logp_table().len(), 21);
        assert_eq!(tpsa_table().len(), 21);
    }

    #[test]
    fn benzene_tpsa_zero() {
        assert_eq!(tpsa(&parse("c1ccccc1").unwrap()), 0.0);
    }

    #[test]
    fn alcohol_tpsa_is_hydroxyl_class() {
        assert!((tpsa(&parse("CCO").unwrap()) - 20.23).abs() < 1e-12);
    }

    #[test]
    fn hydrocarbons_beat_polar_analogues_in_logp() {
        let hexane = logp(&parse("CCCCCC").unwrap());
        let hexanol = logp(&parse("CCCCCCO").unwrap());
        assert!(hexane > 0.0);
        assert!(hexanol < hexane + 0.3);
    }
}
