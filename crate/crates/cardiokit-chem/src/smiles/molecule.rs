//! Attributed molecular graph produced by the SMILES parser.

use crate::element::Element;

/// Tetrahedral stereo annotation carried by bracket atoms.
///
/// Marks are parsed and preserved, and they count toward the stereocenter
/// property, but they never influence graph isomorphism or canonical
/// ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StereoMark {
    #[default]
    None,
    /// `@` (anticlockwise)
    At,
    /// `@@` (clockwise)
    AtAt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum, doubled so it stays integral
    /// (aromatic counts as 1.5).
    pub fn twice_order(self) -> u8 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    /// Compact class id used by fingerprints, canonical invariants and the
    /// graph featurizer.
    pub fn class(self) -> u8 {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    /// Resolved hydrogen count (explicit bracket count or assigned implicit
    /// count; the two are unified once parsing finishes).
    pub h_count: u8,
    /// True when the atom was written in brackets, i.e. its hydrogen count
    /// was explicit in the input.
    pub bracket: bool,
    pub stereo_mark: StereoMark,
    /// Position in parse order.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if atom == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A single-component molecular graph.
///
/// Ring information (`ring_membership`, `rings`, `ring_bonds`) is derived
/// from a smallest-set-of-smallest-rings perception and kept in sync by
/// [`Molecule::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Per-atom flag: member of at least one SSSR ring.
    pub ring_membership: Vec<bool>,
    /// SSSR rings as atom-index cycles.
    pub rings: Vec<Vec<usize>>,
    /// Per-bond flag: member of at least one SSSR ring.
    pub ring_bonds: Vec<bool>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Builds a molecule and derives adjacency plus ring perception.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Molecule {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, bi));
            adjacency[bond.b].push((bond.a, bi));
        }
        let mut mol = Molecule {
            ring_membership: vec![false; atoms.len()],
            rings: Vec::new(),
            ring_bonds: vec![false; bonds.len()],
            atoms,
            bonds,
            adjacency,
        };
        mol.perceive_rings();
        mol
    }

    pub fn empty() -> Molecule {
        Molecule::new(Vec::new(), Vec::new())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbours of `atom` as `(neighbour_index, bond_index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, bi)| &self.bonds[*bi])
    }

    /// Twice the bond-order sum at `atom` (aromatic bonds contribute 3).
    pub fn twice_bond_order_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|(_, bi)| self.bonds[*bi].order.twice_order() as u32)
            .sum()
    }

    /// Total hydrogen count attached to `atom`.
    pub fn total_h(&self, atom: usize) -> u8 {
        self.atoms[atom].h_count
    }

    pub fn formal_charge_sum(&self) -> i32 {
        self.atoms.iter().map(|a| a.formal_charge as i32).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.atoms.len()
    }

    /// Number of SSSR rings (the circuit rank for a connected graph).
    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }

    /// Extracts the induced subgraph over `keep` (sorted, deduplicated
    /// indices), renumbering atoms in `keep` order.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Molecule {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let atoms = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let mut a = self.atoms[old].clone();
                a.index = new;
                a
            })
            .collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        Molecule::new(atoms, bonds)
    }

    fn perceive_rings(&mut self) {
        self.rings = super::ring::sssr(self);
        for ring in &self.rings {
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                self.ring_membership[a] = true;
                self.ring_membership[b] = true;
                if let Some((_, bi)) = self.adjacency[a].iter().find(|(n, _)| *n == b) {
                    self.ring_bonds[*bi] = true;
                }
            }
        }
    }
}
