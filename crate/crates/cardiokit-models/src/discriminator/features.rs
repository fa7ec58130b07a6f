//! Graph featurization for the fusion discriminator: 14 atomic features per
//! heavy atom, edges labelled with bond-order classes, self-loops added.

use cardiokit_chem::element::Element;
use cardiokit_chem::smiles::molecule::{BondOrder, Molecule};

pub const ATOM_FEATURES: usize = 14;
/// Bond-order classes 0-3 plus the self-loop class.
pub const BOND_CLASSES: usize = 5;
pub const SELF_LOOP_CLASS: u8 = 4;

/// One molecule's graph: flat node-feature rows, directed edges (both
/// orientations of every bond plus one self-loop per node).
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub n_nodes: usize,
    /// Row-major [n_nodes x ATOM_FEATURES].
    pub node_features: Vec<f64>,
    /// (destination, source, bond class); attention normalizes over each
    /// destination's in-neighbourhood.
    pub edges: Vec<(usize, usize, u8)>,
}

/// A batch of graphs with the flat layout the spec describes: one feature
/// matrix, one edge list with graph-local offsets applied, and a membership
/// index per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphBatch {
    pub graphs: Vec<MolGraph>,
}

impl GraphBatch {
    pub fn push(&mut self, g: MolGraph) {
        self.graphs.push(g);
    }

    pub fn membership(&self) -> Vec<usize> {
        self.graphs
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| std::iter::repeat_n(gi, g.n_nodes))
            .collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(|g| g.n_nodes).sum()
    }
}

/// Computes the 14 atomic features for every heavy atom and assembles the
/// self-loop-augmented edge list.
///
/// Feature order: C, N, O, P, S indicators; hydrophobic; aromatic; HBA;
/// HBD; ring membership; heavy-neighbour count; hetero-neighbour count;
/// partial charge; atomic mass.
pub fn featurize_graph(mol: &Molecule) -> MolGraph {
    let n = mol.atom_count();
    let charges = peoe_partial_charges(mol);
    let mut node_features = Vec::with_capacity(n * ATOM_FEATURES);
    for atom in &mol.atoms {
        let i = atom.index;
        let heavy_neighbors = mol.degree(i) as f64;
        let hetero_neighbors = mol
            .neighbors(i)
            .iter()
            .filter(|&&(nbr, _)| !matches!(mol.atoms[nbr].element, Element::C | Element::H))
            .count() as f64;
        let hydrophobic = (atom.element == Element::C || atom.element.is_halogen())
            && hetero_neighbors == 0.0;
        let hba = matches!(atom.element, Element::N | Element::O) && atom.formal_charge <= 0;
        let hbd = matches!(atom.element, Element::N | Element::O) && atom.h_count > 0;
        node_features.extend_from_slice(&[
            f64::from(atom.element == Element::C),
            f64::from(atom.element == Element::N),
            f64::from(atom.element == Element::O),
            f64::from(atom.element == Element::P),
            f64::from(atom.element == Element::S),
            f64::from(hydrophobic),
            f64::from(atom.aromatic),
            f64::from(hba),
            f64::from(hbd),
            f64::from(mol.ring_membership[i]),
            heavy_neighbors,
            hetero_neighbors,
            charges[i],
            atom.element.atomic_mass(),
        ]);
    }

    let mut edges = Vec::with_capacity(n + 2 * mol.bond_count());
    for i in 0..n {
        edges.push((i, i, SELF_LOOP_CLASS));
    }
    for bond in &mol.bonds {
        let class = bond.order.class();
        edges.push((bond.a, bond.b, class));
        edges.push((bond.b, bond.a, class));
    }

    MolGraph {
        n_nodes: n,
        node_features,
        edges,
    }
}

/// Electronegativity-equalization partial charges, PEOE style: eight
/// rounds of damped transfers along bonds (damping 0.5 per round), with
/// implicit hydrogens participating as pseudo-nodes whose charge folds back
/// into the parent heavy atom. The total charge is conserved exactly, so a
/// neutral molecule sums to zero.
pub fn peoe_partial_charges(mol: &Molecule) -> Vec<f64> {
    const ROUNDS: usize = 8;
    const CHI_SLOPE: f64 = 1.5;
    let n = mol.atom_count();
    // node layout: heavy atoms 0..n, then one pseudo-node per implicit H
    let mut chi: Vec<f64> = mol
        .atoms
        .iter()
        .map(|a| a.element.electronegativity())
        .collect();
    let mut charge: Vec<f64> = mol
        .atoms
        .iter()
        .map(|a| f64::from(a.formal_charge))
        .collect();
    let mut bonds: Vec<(usize, usize)> = mol.bonds.iter().map(|b| (b.a, b.b)).collect();
    let mut h_parent = Vec::new();
    for atom in &mol.atoms {
        for _ in 0..atom.h_count {
            let idx = chi.len();
            chi.push(Element::H.electronegativity());
            charge.push(0.0);
            bonds.push((atom.index, idx));
            h_parent.push((idx, atom.index));
        }
    }
    let chi_norm = 3.98; // fluorine, the most electronegative supported atom

    for round in 0..ROUNDS {
        let damp = 0.5f64.powi(round as i32 + 1);
        let snapshot = charge.clone();
        for &(a, b) in &bonds {
            let chi_a = chi[a] + CHI_SLOPE * snapshot[a];
            let chi_b = chi[b] + CHI_SLOPE * snapshot[b];
            // charge flows toward the more electronegative end
            let delta = damp * (chi_a - chi_b) / chi_norm * 0.1;
            charge[a] -= delta;
            charge[b] += delta;
        }
    }
    for &(h_idx, parent) in &h_parent {
        charge[parent] += charge[h_idx];
    }
    charge.truncate(n);
    charge
}
