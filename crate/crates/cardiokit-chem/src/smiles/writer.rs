//! Deterministic canonical SMILES writer.
//!
//! Canonical ranks come from Morgan-style iterative invariant refinement
//! (initial invariant: element, charge, degree, hydrogen count, aromatic
//! flag; refined by sorted neighbour invariants until stable). Residual ties
//! are broken by singling out each tied atom in the smallest tied class in
//! turn and keeping the lexicographically smallest emitted string, so the
//! output is invariant under any input atom ordering. Stereo marks are
//! carried through to the output but never participate in ranking.

use crate::element::Element;

use super::molecule::{Bond, BondOrder, Molecule, StereoMark};
use super::parser::default_h_count;

/// Writes the canonical form. The molecule must be connected (parsing
/// guarantees this; scaffold extraction preserves it). The empty molecule
/// canonicalizes to the empty string.
pub fn write_canonical(mol: &Molecule) -> String {
    if mol.is_empty() {
        return String::new();
    }
    debug_assert!(mol.is_connected());
    let initial = initial_classes(mol);
    canon_from(mol, initial)
}

fn canon_from(mol: &Molecule, classes: Vec<u64>) -> String {
    let classes = refine(mol, classes);
    if count_distinct(&classes) == mol.atom_count() {
        return emit(mol, &classes);
    }
    // Smallest class value that still holds more than one atom.
    let tied = (0..mol.atom_count())
        .map(|i| classes[i])
        .filter(|&c| classes.iter().filter(|&&x| x == c).count() > 1)
        .min()
        .expect("non-perfect partition has a tied class");
    let mut best: Option<String> = None;
    for atom in 0..mol.atom_count() {
        if classes[atom] != tied {
            continue;
        }
        let mut forked: Vec<u64> = classes.iter().map(|&c| c * 2 + 1).collect();
        forked[atom] -= 1;
        let candidate = canon_from(mol, forked);
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
    }
    best.unwrap()
}

fn initial_classes(mol: &Molecule) -> Vec<u64> {
    let keys: Vec<(u64, Vec<(u8, u64)>)> = mol
        .atoms
        .iter()
        .map(|a| {
            let charge = (i16::from(a.formal_charge) + 8) as u64;
            let key = (u64::from(a.element.rank()) << 32)
                | (u64::from(a.aromatic) << 24)
                | (charge << 16)
                | (u64::from(a.h_count) << 8)
                | mol.degree(a.index) as u64;
            (key, Vec::new())
        })
        .collect();
    compress(&keys)
}

/// Refines atom classes until the partition stops splitting.
fn refine(mol: &Molecule, mut classes: Vec<u64>) -> Vec<u64> {
    let mut distinct = 0;
    loop {
        let sigs: Vec<(u64, Vec<(u8, u64)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(u8, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(n, bi)| (mol.bonds[bi].order.class(), classes[n]))
                    .collect();
                nbrs.sort_unstable();
                (classes[i], nbrs)
            })
            .collect();
        classes = compress(&sigs);
        let now = count_distinct(&classes);
        if now == distinct {
            return classes;
        }
        distinct = now;
    }
}

fn compress(sigs: &[(u64, Vec<(u8, u64)>)]) -> Vec<u64> {
    let mut sorted: Vec<&(u64, Vec<(u8, u64)>)> = sigs.iter().collect();
    sorted.sort();
    sorted.dedup();
    sigs.iter()
        .map(|s| sorted.binary_search(&s).unwrap() as u64)
        .collect()
}

fn count_distinct(classes: &[u64]) -> usize {
    let mut seen: Vec<u64> = classes.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

struct Emitter<'m> {
    mol: &'m Molecule,
    ranks: &'m [u64],
    visited: Vec<bool>,
    /// Tree children per atom, in rank order.
    tree_children: Vec<Vec<(usize, usize)>>,
    /// Ring-closure bonds per atom, ordered by partner preorder position.
    closures_at: Vec<Vec<usize>>,
    preorder_index: Vec<usize>,
    counter: usize,
    digit: Vec<u8>,
}

fn emit(mol: &Molecule, ranks: &[u64]) -> String {
    let start = (0..mol.atom_count()).min_by_key(|&i| ranks[i]).unwrap();
    let mut em = Emitter {
        mol,
        ranks,
        visited: vec![false; mol.atom_count()],
        tree_children: vec![Vec::new(); mol.atom_count()],
        closures_at: vec![Vec::new(); mol.atom_count()],
        preorder_index: vec![usize::MAX; mol.atom_count()],
        counter: 0,
        digit: vec![0; mol.bond_count()],
    };
    em.discover(start);
    em.order_closures();
    em.allocate_digits();
    let mut out = String::new();
    em.render(start, &mut out);
    out
}

impl<'m> Emitter<'m> {
    fn ordered_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nbrs: Vec<(usize, usize)> = self.mol.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(n, _)| self.ranks[n]);
        nbrs
    }

    fn discover(&mut self, u: usize) {
        self.visited[u] = true;
        self.preorder_index[u] = self.counter;
        self.counter += 1;
        for (v, bi) in self.ordered_neighbors(u) {
            if self.visited[v] {
                // Ring closure, seen once from its later endpoint; skip the
                // reverse sighting of an already-recorded closure and the
                // tree edge back to the parent.
                let known = self.closures_at[v].contains(&bi)
                    || self.closures_at[u].contains(&bi)
                    || self.tree_children[v].iter().any(|&(_, b)| b == bi)
                    || self.tree_children[u].iter().any(|&(_, b)| b == bi);
                if !known {
                    self.closures_at[u].push(bi);
                    self.closures_at[v].push(bi);
                }
            } else {
                self.tree_children[u].push((v, bi));
                self.discover(v);
            }
        }
    }

    fn order_closures(&mut self) {
        let pre = self.preorder_index.clone();
        let bonds = &self.mol.bonds;
        for (u, list) in self.closures_at.iter_mut().enumerate() {
            list.sort_by_key(|&bi| pre[bonds[bi].other(u)]);
        }
    }

    /// Assigns ring-closure labels in rendering order, reusing freed labels.
    fn allocate_digits(&mut self) {
        let mut order: Vec<usize> = (0..self.mol.atom_count())
            .filter(|&i| self.preorder_index[i] != usize::MAX)
            .collect();
        order.sort_by_key(|&i| self.preorder_index[i]);
        let mut free = [true; 100];
        let mut opened = vec![false; self.mol.bond_count()];
        for u in order {
            for &bi in &self.closures_at[u] {
                if !opened[bi] {
                    let d = (1..100u8).find(|&d| free[d as usize]).expect("digit pool");
                    free[d as usize] = false;
                    self.digit[bi] = d;
                    opened[bi] = true;
                } else {
                    free[self.digit[bi] as usize] = true;
                }
            }
        }
    }

    fn render(&self, u: usize, out: &mut String) {
        out.push_str(&atom_text(self.mol, u));
        for &bi in &self.closures_at[u] {
            let bond = &self.mol.bonds[bi];
            let is_opening = self.preorder_index[u] < self.preorder_index[bond.other(u)];
            if is_opening {
                if let Some(sym) = bond_symbol(self.mol, bond) {
                    out.push(sym);
                }
            }
            let d = self.digit[bi];
            if d < 10 {
                out.push((b'0' + d) as char);
            } else {
                out.push('%');
                out.push((b'0' + d / 10) as char);
                out.push((b'0' + d % 10) as char);
            }
        }
        let children = &self.tree_children[u];
        for (i, &(v, bi)) in children.iter().enumerate() {
            let last = i + 1 == children.len();
            if !last {
                out.push('(');
            }
            if let Some(sym) = bond_symbol(self.mol, &self.mol.bonds[bi]) {
                out.push(sym);
            }
            self.render(v, out);
            if !last {
                out.push(')');
            }
        }
    }
}

fn bond_symbol(mol: &Molecule, bond: &Bond) -> Option<char> {
    match bond.order {
        BondOrder::Single => {
            if mol.atoms[bond.a].aromatic && mol.atoms[bond.b].aromatic {
                Some('-')
            } else {
                None
            }
        }
        BondOrder::Double => Some('='),
        BondOrder::Triple => Some('#'),
        BondOrder::Aromatic => None,
    }
}

fn atom_text(mol: &Molecule, u: usize) -> String {
    let a = &mol.atoms[u];
    let mut symbol = a.element.symbol().to_string();
    if a.aromatic {
        symbol = symbol.to_lowercase();
    }
    let twice = mol.twice_bond_order_sum(u);
    let n_arom = mol
        .neighbors(u)
        .iter()
        .filter(|(_, bi)| mol.bonds[*bi].order == BondOrder::Aromatic)
        .count() as u32;
    let default_h = default_h_count(a.element, a.aromatic, twice, n_arom);
    let plain = a.element != Element::H
        && a.formal_charge == 0
        && a.stereo_mark == StereoMark::None
        && default_h == Some(a.h_count);
    if plain {
        return symbol;
    }
    let mut out = String::from("[");
    out.push_str(&symbol);
    match a.stereo_mark {
        StereoMark::None => {}
        StereoMark::At => out.push('@'),
        StereoMark::AtAt => out.push_str("@@"),
    }
    if a.element != Element::H {
        match a.h_count {
            0 => {}
            1 => out.push('H'),
            h => {
                out.push('H');
                out.push((b'0' + h) as char);
            }
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 1 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::molecule::Atom;
    use crate::smiles::parse;

    fn canon(s: &str) -> String {
        write_canonical(&parse(s).unwrap())
    }

    /// Rebuilds the molecule with atoms permuted by `perm` (new index of old
    /// atom i is perm[i]).
    fn permute(mol: &Molecule, perm: &[usize]) -> Molecule {
        let mut atoms: Vec<Atom> = vec![mol.atoms[0].clone(); mol.atom_count()];
        for (old, atom) in mol.atoms.iter().enumerate() {
            let mut a = atom.clone();
            a.index = perm[old];
            atoms[perm[old]] = a;
        }
        let bonds = mol
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Molecule::new(atoms, bonds)
    }

    #[test]
    fn same_graph_two_spellings() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C(O)C"), canon("CCO"));
    }

    #[test]
    fn benzene_round_trip() {
        let out = canon("c1ccccc1");
        let reparsed = parse(&out).unwrap();
        assert_eq!(reparsed.atom_count(), 6);
        assert!(reparsed.atoms.iter().all(|a| a.aromatic));
        assert_eq!(write_canonical(&reparsed), out);
    }

    #[test]
    fn kekule_and_aromatic_spellings_agree() {
        assert_eq!(canon("C1=CC=CC=C1"), canon("c1ccccc1"));
        assert_eq!(canon("C1=CC=CN1"), canon("c1cc[nH]c1"));
    }

    #[test]
    fn permutation_invariance_simple() {
        let mol = parse("CC(=O)OC1=CC=CC=C1C(=O)O").unwrap(); // aspirin
        let base = write_canonical(&mol);
        let n = mol.atom_count();
        // deterministic LCG-driven shuffles
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..50 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                perm.swap(i, j);
            }
            let shuffled = permute(&mol, &perm);
            assert_eq!(write_canonical(&shuffled), base);
        }
    }

    #[test]
    fn biphenyl_single_bond_survives() {
        let out = canon("c1ccccc1-c1ccccc1");
        let m = parse(&out).unwrap();
        let singles = m
            .bonds
            .iter()
            .filter(|b| b.order == BondOrder::Single)
            .count();
        assert_eq!(singles, 1);
        assert_eq!(m.atom_count(), 12);
    }

    #[test]
    fn charge_and_stereo_preserved() {
        let out = canon("C[C@H](N)C(=O)[O-]");
        let m = parse(&out).unwrap();
        assert_eq!(m.formal_charge_sum(), -1);
        assert_eq!(
            m.atoms
                .iter()
                .filter(|a| a.stereo_mark != StereoMark::None)
                .count(),
            1
        );
    }

    #[test]
    fn empty_molecule_is_empty_string() {
        assert_eq!(write_canonical(&Molecule::empty()), "");
    }
}
