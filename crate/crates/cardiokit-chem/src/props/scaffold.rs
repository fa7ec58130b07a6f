//! Murcko scaffold extraction: ring systems plus the linkers between them.

use crate::smiles::molecule::Molecule;
use crate::smiles::parser::default_h_count;
use crate::smiles::molecule::BondOrder;

/// Iteratively removes terminal (degree <= 1) non-ring atoms until only ring
/// systems and inter-ring linkers remain. Acyclic input yields the empty
/// molecule. Idempotent.
pub fn murcko_scaffold(mol: &Molecule) -> Molecule {
    let n = mol.atom_count();
    if n == 0 || mol.ring_count() == 0 {
        return Molecule::empty();
    }

    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|a| mol.degree(a)).collect();
    let mut queue: Vec<usize> = (0..n)
        .filter(|&a| degree[a] <= 1 && !mol.ring_membership[a])
        .collect();
    while let Some(a) = queue.pop() {
        if !alive[a] {
            continue;
        }
        alive[a] = false;
        for &(nbr, _) in mol.neighbors(a) {
            if alive[nbr] {
                degree[nbr] -= 1;
                if degree[nbr] <= 1 && !mol.ring_membership[nbr] {
                    queue.push(nbr);
                }
            }
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&a| alive[a]).collect();
    let mut scaffold = mol.induced_subgraph(&keep);

    // Non-bracket atoms re-resolve their hydrogen count against the pruned
    // environment so the scaffold equals a freshly parsed copy of itself.
    for i in 0..scaffold.atom_count() {
        if scaffold.atoms[i].bracket {
            continue;
        }
        let twice = scaffold.twice_bond_order_sum(i);
        let n_arom = scaffold
            .neighbors(i)
            .iter()
            .filter(|(_, bi)| scaffold.bonds[*bi].order == BondOrder::Aromatic)
            .count() as u32;
        if let Some(h) =
            default_h_count(scaffold.atoms[i].element, scaffold.atoms[i].aromatic, twice, n_arom)
        {
            scaffold.atoms[i].h_count = h;
        }
    }
    scaffold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::{parse, write_canonical};

    #[test]
    fn benzene_is_its_own_scaffold() {
        let m = parse("c1ccccc1").unwrap();
        let s = murcko_scaffold(&m);
        assert_eq!(write_canonical(&s), write_canonical(&m));
    }

    #[test]
    fn acyclic_yields_empty() {
        assert!(murcko_scaffold(&parse("CCCC").unwrap()).is_empty());
    }

    #[test]
    fn toluene_reduces_to_benzene() {
        let s = murcko_scaffold(&parse("Cc1ccccc1").unwrap());
        assert_eq!(write_canonical(&s), write_canonical(&parse("c1ccccc1").unwrap()));
    }

    #[test]
    fn linker_between_rings_is_kept() {
        let s = murcko_scaffold(&parse("c1ccccc1CCc1ccccc1").unwrap());
        assert_eq!(s.atom_count(), 14);
        let again = murcko_scaffold(&s);
        assert_eq!(write_canonical(&again), write_canonical(&s));
    }

    #[test]
    fn side_chains_preserving_rings() {
        // cyclohexanone: exocyclic O is a terminal atom and is pruned
        let s = murcko_scaffold(&parse("O=C1CCCCC1").unwrap());
        assert_eq!(s.atom_count(), 6);
    }

    #[test]
    fn idempotent_on_drug_like_molecule() {
        let m = parse("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let s1 = murcko_scaffold(&m);
        let s2 = murcko_scaffold(&s1);
        assert_eq!(write_canonical(&s1), write_canonical(&s2));
        assert_eq!(write_canonical(&s1), write_canonical(&parse("c1ccccc1").unwrap()));
    }
}
