//! SMILES parser: token stream to attributed molecular graph.
//!
//! Finalization order matters:
//! 1. structural build (branches, ring closures, component check)
//! 2. implicit-hydrogen assignment from the bonds as written
//! 3. folding of explicit `[H]` atoms into their heavy neighbour
//! 4. ring perception
//! 5. aromaticity perception on Kekulé rings and validation of rings that
//!    were written in lowercase form

use std::collections::HashMap;

use crate::element::Element;
use crate::error::SmilesError;

use super::molecule::{Atom, Bond, BondOrder, Molecule, StereoMark};
use super::token::{tokenize, SmilesToken, TokenKind};

/// Parses a single-component SMILES string.
pub fn parse(smiles: &str) -> Result<Molecule, SmilesError> {
    let tokens = tokenize(smiles)?;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[SmilesToken]) -> Result<Molecule, SmilesError> {
    let mut builder = Builder::default();
    for (ti, token) in tokens.iter().enumerate() {
        builder.feed(ti, token)?;
    }
    builder.finish()
}

#[derive(Default)]
struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Whether the bond order was written explicitly (vs. defaulted).
    bond_explicit: Vec<bool>,
    atom_token: Vec<usize>,
    prev: Option<usize>,
    pending_bond: Option<(BondOrder, usize)>,
    branch_stack: Vec<(usize, usize)>,
    ring_open: HashMap<u8, (usize, Option<BondOrder>, usize)>,
}

impl Builder {
    fn feed(&mut self, ti: usize, token: &SmilesToken) -> Result<(), SmilesError> {
        match &token.kind {
            TokenKind::Atom(at) => {
                let idx = self.atoms.len();
                self.atoms.push(Atom {
                    element: at.element,
                    formal_charge: at.charge,
                    aromatic: at.aromatic,
                    h_count: at.h_count.unwrap_or(0),
                    bracket: at.bracket,
                    stereo_mark: at.stereo,
                    index: idx,
                });
                self.atom_token.push(ti);
                if let Some(prev) = self.prev {
                    let (order, explicit) = match self.pending_bond.take() {
                        Some((o, _)) => (o, true),
                        None => (default_order(&self.atoms[prev], &self.atoms[idx]), false),
                    };
                    self.push_bond(prev, idx, order, explicit, ti)?;
                }
                self.prev = Some(idx);
            }
            TokenKind::Bond(order) => {
                if self.pending_bond.is_some() || self.prev.is_none() {
                    return Err(SmilesError::Syntax {
                        token_index: ti,
                        detail: "dangling bond symbol".into(),
                    });
                }
                self.pending_bond = Some((*order, ti));
            }
            TokenKind::OpenBranch => {
                let prev = self.prev.ok_or_else(|| SmilesError::Syntax {
                    token_index: ti,
                    detail: "branch with no preceding atom".into(),
                })?;
                if self.pending_bond.is_some() {
                    return Err(SmilesError::Syntax {
                        token_index: ti,
                        detail: "bond symbol before branch open".into(),
                    });
                }
                self.branch_stack.push((prev, ti));
            }
            TokenKind::CloseBranch => {
                if self.pending_bond.is_some() {
                    return Err(SmilesError::Syntax {
                        token_index: ti,
                        detail: "bond symbol before branch close".into(),
                    });
                }
                let (attach, _) = self
                    .branch_stack
                    .pop()
                    .ok_or(SmilesError::UnclosedBranch { token_index: ti })?;
                self.prev = Some(attach);
            }
            TokenKind::Ring(label) => {
                let prev = self.prev.ok_or_else(|| SmilesError::Syntax {
                    token_index: ti,
                    detail: "ring closure with no preceding atom".into(),
                })?;
                let close_order = self.pending_bond.take().map(|(o, _)| o);
                match self.ring_open.remove(label) {
                    Some((other, open_order, _)) => {
                        if other == prev {
                            return Err(SmilesError::Syntax {
                                token_index: ti,
                                detail: "ring closure to itself".into(),
                            });
                        }
                        let (order, explicit) = match (open_order, close_order) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(SmilesError::Syntax {
                                    token_index: ti,
                                    detail: "conflicting ring-bond orders".into(),
                                })
                            }
                            (Some(a), _) => (a, true),
                            (None, Some(b)) => (b, true),
                            (None, None) => {
                                (default_order(&self.atoms[other], &self.atoms[prev]), false)
                            }
                        };
                        self.push_bond(other, prev, order, explicit, ti)?;
                    }
                    None => {
                        self.ring_open.insert(*label, (prev, close_order, ti));
                    }
                }
            }
            TokenKind::Dot => {
                return Err(SmilesError::MultiComponentInput { token_index: ti });
            }
        }
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        explicit: bool,
        ti: usize,
    ) -> Result<(), SmilesError> {
        if self
            .bonds
            .iter()
            .any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
        {
            return Err(SmilesError::Syntax {
                token_index: ti,
                detail: "duplicate bond between the same atoms".into(),
            });
        }
        self.bonds.push(Bond { a, b, order });
        self.bond_explicit.push(explicit);
        Ok(())
    }

    fn finish(mut self) -> Result<Molecule, SmilesError> {
        if let Some((label, (_, _, ti))) = self.ring_open.iter().min_by_key(|(_, v)| v.2) {
            return Err(SmilesError::UnclosedRing {
                token_index: *ti,
                label: *label,
            });
        }
        if let Some((_, ti)) = self.branch_stack.first() {
            return Err(SmilesError::UnclosedBranch { token_index: *ti });
        }
        if let Some((_, ti)) = self.pending_bond {
            return Err(SmilesError::Syntax {
                token_index: ti,
                detail: "trailing bond symbol".into(),
            });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::Syntax {
                token_index: 0,
                detail: "no atoms".into(),
            });
        }

        assign_implicit_hydrogens(&mut self.atoms, &self.bonds, &self.atom_token)?;
        let (atoms, bonds, bond_explicit, atom_token) =
            fold_hydrogen_atoms(self.atoms, self.bonds, self.bond_explicit, self.atom_token)?;
        if atoms.is_empty() {
            return Err(SmilesError::Syntax {
                token_index: 0,
                detail: "molecule reduces to nothing after hydrogen folding".into(),
            });
        }

        let mut mol = Molecule::new(atoms, bonds);
        if !mol.is_connected() {
            return Err(SmilesError::MultiComponentInput { token_index: 0 });
        }
        // An implicit bond between two lowercase atoms defaults to aromatic;
        // outside a ring (e.g. the biphenyl junction) it is really a single
        // bond. Explicit ':' bonds keep their order and fail validation.
        for bi in 0..mol.bonds.len() {
            if mol.bonds[bi].order == BondOrder::Aromatic
                && !bond_explicit[bi]
                && !mol.ring_bonds[bi]
            {
                mol.bonds[bi].order = BondOrder::Single;
            }
        }
        perceive_and_validate_aromaticity(&mut mol, &atom_token)?;
        Ok(mol)
    }
}

fn default_order(a: &Atom, b: &Atom) -> BondOrder {
    if a.aromatic && b.aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

/// Default hydrogen count for an atom given its environment, following the
/// smallest-fitting-valence rule. Aromatic atoms count their ring bonds as
/// one each plus one shared pi contribution.
pub(crate) fn default_h_count(
    element: Element,
    aromatic: bool,
    twice_order_sum: u32,
    n_aromatic_bonds: u32,
) -> Option<u8> {
    let effective = if aromatic || n_aromatic_bonds > 0 {
        // n aromatic bonds contribute n + 1 to the valence.
        let non_aromatic = twice_order_sum - 3 * n_aromatic_bonds;
        non_aromatic.div_ceil(2) + n_aromatic_bonds + u32::from(n_aromatic_bonds > 0)
    } else {
        twice_order_sum.div_ceil(2)
    };
    let valence = element
        .valences()
        .iter()
        .copied()
        .find(|v| u32::from(*v) >= effective);
    match valence {
        Some(v) => Some((u32::from(v) - effective) as u8),
        None if aromatic => Some(0),
        None => None,
    }
}

fn assign_implicit_hydrogens(
    atoms: &mut [Atom],
    bonds: &[Bond],
    atom_token: &[usize],
) -> Result<(), SmilesError> {
    let n = atoms.len();
    let mut twice_sum = vec![0u32; n];
    let mut arom_bonds = vec![0u32; n];
    for bond in bonds {
        for end in [bond.a, bond.b] {
            twice_sum[end] += u32::from(bond.order.twice_order());
            if bond.order == BondOrder::Aromatic {
                arom_bonds[end] += 1;
            }
        }
    }
    for (i, atom) in atoms.iter_mut().enumerate() {
        if atom.bracket {
            // Bracket atoms carry their hydrogen count verbatim.
            continue;
        }
        match default_h_count(atom.element, atom.aromatic, twice_sum[i], arom_bonds[i]) {
            Some(h) => atom.h_count = h,
            None => {
                return Err(SmilesError::ValenceViolation {
                    token_index: atom_token[i],
                    detail: format!(
                        "{} cannot accommodate bond order sum {}",
                        atom.element.symbol(),
                        (twice_sum[i] as f32) / 2.0
                    ),
                })
            }
        }
    }
    Ok(())
}

/// Folds explicit `[H]` atoms bonded by a plain single bond into the heavy
/// neighbour's hydrogen count. Charged or multiply-bonded hydrogens remain
/// graph atoms.
#[allow(clippy::type_complexity)]
fn fold_hydrogen_atoms(
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_explicit: Vec<bool>,
    atom_token: Vec<usize>,
) -> Result<(Vec<Atom>, Vec<Bond>, Vec<bool>, Vec<usize>), SmilesError> {
    let mut degree = vec![0usize; atoms.len()];
    for b in &bonds {
        degree[b.a] += 1;
        degree[b.b] += 1;
    }
    let foldable: Vec<bool> = atoms
        .iter()
        .map(|a| {
            a.element == Element::H
                && a.formal_charge == 0
                && a.stereo_mark == StereoMark::None
                && degree[a.index] == 1
                && a.h_count == 0
        })
        .collect();
    if !foldable.iter().any(|&f| f) {
        return Ok((atoms, bonds, bond_explicit, atom_token));
    }

    let mut extra_h = vec![0u8; atoms.len()];
    let mut kept_bonds = Vec::new();
    for (bond, explicit) in bonds.iter().zip(&bond_explicit) {
        let fa = foldable[bond.a];
        let fb = foldable[bond.b];
        if fa && fb {
            // [H][H]: keep both as atoms.
            kept_bonds.push((*bond, *explicit));
        } else if fa || fb {
            if bond.order != BondOrder::Single {
                return Err(SmilesError::ValenceViolation {
                    token_index: atom_token[if fa { bond.a } else { bond.b }],
                    detail: "hydrogen with non-single bond".into(),
                });
            }
            let heavy = if fa { bond.b } else { bond.a };
            extra_h[heavy] += 1;
        } else {
            kept_bonds.push((*bond, *explicit));
        }
    }
    // Hydrogens in an H-H bond must stay; recompute which are dropped.
    let mut dropped = foldable.clone();
    for (bond, _) in &kept_bonds {
        dropped[bond.a] = false;
        dropped[bond.b] = false;
    }

    let mut remap = vec![usize::MAX; atoms.len()];
    let mut new_atoms = Vec::new();
    let mut new_tokens = Vec::new();
    for (i, mut atom) in atoms.into_iter().enumerate() {
        if dropped[i] {
            continue;
        }
        atom.h_count = atom.h_count.saturating_add(extra_h[i]);
        atom.index = new_atoms.len();
        remap[i] = atom.index;
        new_tokens.push(atom_token[i]);
        new_atoms.push(atom);
    }
    let mut new_bonds = Vec::with_capacity(kept_bonds.len());
    let mut new_explicit = Vec::with_capacity(kept_bonds.len());
    for (b, explicit) in kept_bonds {
        new_bonds.push(Bond {
            a: remap[b.a],
            b: remap[b.b],
            order: b.order,
        });
        new_explicit.push(explicit);
    }
    Ok((new_atoms, new_bonds, new_explicit, new_tokens))
}

// ---------------------------------------------------------------------------
// Aromaticity
// ---------------------------------------------------------------------------

/// Pi-electron contribution of `atom` within the atom set `in_system`.
/// Returns `None` when the atom cannot take part in an aromatic system.
fn pi_contribution(mol: &Molecule, atom: usize, in_system: &[bool]) -> Option<u32> {
    let a = &mol.atoms[atom];
    let mut double_in = false;
    let mut double_out = false;
    for &(nbr, bi) in mol.neighbors(atom) {
        match mol.bonds[bi].order {
            BondOrder::Double if in_system[nbr] => double_in = true,
            BondOrder::Double => double_out = true,
            BondOrder::Triple => return None,
            _ => {}
        }
    }
    if double_in {
        return Some(1);
    }
    if double_out {
        // sp2 but the pi electron points out of the ring (e.g. quinones).
        return Some(0);
    }
    match a.element {
        Element::C => {
            if a.aromatic {
                Some(1)
            } else {
                None // sp3 carbon blocks the system
            }
        }
        Element::N | Element::P => {
            if a.formal_charge > 0 {
                // pyridinium-type
                Some(1)
            } else if a.aromatic && a.h_count == 0 && mol.degree(atom) <= 2 {
                // pyridine-type: contributes one electron from the double
                // bond that the lowercase form leaves implicit
                Some(1)
            } else {
                Some(2) // pyrrole-type lone pair
            }
        }
        Element::O | Element::S => Some(2),
        Element::B => Some(0),
        _ => None,
    }
}

fn huckel_passes(mol: &Molecule, members: &[usize]) -> bool {
    let mut in_system = vec![false; mol.atom_count()];
    for &m in members {
        in_system[m] = true;
    }
    let mut total = 0u32;
    for &m in members {
        match pi_contribution(mol, m, &in_system) {
            Some(pi) => total += pi,
            None => return false,
        }
    }
    total % 4 == 2
}

fn set_aromatic(mol: &mut Molecule, members: &[usize]) {
    let mut in_system = vec![false; mol.atom_count()];
    for &m in members {
        in_system[m] = true;
    }
    for &m in members {
        mol.atoms[m].aromatic = true;
    }
    for bi in 0..mol.bonds.len() {
        let bond = mol.bonds[bi];
        if in_system[bond.a] && in_system[bond.b] && mol.ring_bonds[bi] {
            mol.bonds[bi].order = BondOrder::Aromatic;
        }
    }
}

/// Perceives aromaticity on Kekulé rings (per-ring first, then fused
/// systems) and validates rings written in lowercase form.
fn perceive_and_validate_aromaticity(
    mol: &mut Molecule,
    atom_token: &[usize],
) -> Result<(), SmilesError> {
    // Pass 1: individual SSSR rings.
    let rings = mol.rings.clone();
    let mut ring_aromatic = vec![false; rings.len()];
    for (ri, ring) in rings.iter().enumerate() {
        if huckel_passes(mol, ring) {
            ring_aromatic[ri] = true;
            set_aromatic(mol, ring);
        }
    }

    // Pass 2: fused systems of the remaining rings (edge-sharing unions).
    let remaining: Vec<usize> = (0..rings.len()).filter(|ri| !ring_aromatic[*ri]).collect();
    if !remaining.is_empty() {
        let systems = fuse_rings(&rings, &remaining);
        for system in systems {
            if system_has_sp3(mol, &system) {
                continue;
            }
            if huckel_passes(mol, &system) {
                for ri in &remaining {
                    if rings[*ri].iter().all(|a| system.contains(a)) {
                        ring_aromatic[*ri] = true;
                    }
                }
                set_aromatic(mol, &system);
            }
        }
    }

    // Validation: every aromatic atom must sit in an aromatic ring, and
    // every aromatic bond must join two aromatic atoms inside a ring.
    let mut atom_ok = vec![false; mol.atom_count()];
    for (ri, ring) in rings.iter().enumerate() {
        if ring_aromatic[ri] || ring.iter().all(|&a| mol.atoms[a].aromatic) && huckel_passes(mol, ring)
        {
            for &a in ring {
                atom_ok[a] = true;
            }
        }
    }
    // Atoms aromatized through pass 2 count as covered as well.
    for (ri, ring) in rings.iter().enumerate() {
        if ring_aromatic[ri] {
            for &a in ring {
                atom_ok[a] = true;
            }
        }
    }
    for (i, atom) in mol.atoms.iter().enumerate() {
        if atom.aromatic && !atom_ok[i] {
            return Err(SmilesError::ValenceViolation {
                token_index: atom_token[i],
                detail: "aromatic atom outside any aromatic ring".into(),
            });
        }
    }
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if bond.order == BondOrder::Aromatic {
            let okay = mol.atoms[bond.a].aromatic
                && mol.atoms[bond.b].aromatic
                && mol.ring_bonds[bi];
            if !okay {
                return Err(SmilesError::ValenceViolation {
                    token_index: atom_token[bond.a],
                    detail: "aromatic bond outside an aromatic ring".into(),
                });
            }
        }
    }
    Ok(())
}

fn system_has_sp3(mol: &Molecule, members: &[usize]) -> bool {
    let mut in_system = vec![false; mol.atom_count()];
    for &m in members {
        in_system[m] = true;
    }
    members
        .iter()
        .any(|&m| pi_contribution(mol, m, &in_system).is_none())
}

/// Groups the selected rings into edge-sharing fused systems, returning each
/// system's sorted atom set.
fn fuse_rings(rings: &[Vec<usize>], selected: &[usize]) -> Vec<Vec<usize>> {
    let edge_set = |ring: &[usize]| -> Vec<(usize, usize)> {
        (0..ring.len())
            .map(|i| {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                (a.min(b), a.max(b))
            })
            .collect()
    };
    let sets: Vec<Vec<(usize, usize)>> = selected.iter().map(|&ri| edge_set(&rings[ri])).collect();
    let mut parent: Vec<usize> = (0..selected.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for i in 0..selected.len() {
        for j in i + 1..selected.len() {
            if sets[i].iter().any(|e| sets[j].contains(e)) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..selected.len() {
        let root = find(&mut parent, i);
        let members = groups.entry(root).or_default();
        for &a in &rings[selected[i]] {
            if !members.contains(&a) {
                members.push(a);
            }
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort();
    out
}
