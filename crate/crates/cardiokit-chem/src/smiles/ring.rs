//! Smallest-set-of-smallest-rings perception.
//!
//! Horton's construction: gather candidate cycles (per-vertex BFS tree plus
//! one non-tree edge), sort them by size, then greedily keep cycles that are
//! linearly independent over GF(2) in edge space until the circuit rank is
//! reached.

use super::molecule::Molecule;

/// Returns the SSSR as a list of atom cycles (each in traversal order).
pub fn sssr(mol: &Molecule) -> Vec<Vec<usize>> {
    let m = mol.bond_count();
    let rank = circuit_rank(mol);
    if rank == 0 {
        return Vec::new();
    }

    let mut candidates = candidate_cycles(mol);
    candidates.sort_by(|a, b| {
        a.atoms
            .len()
            .cmp(&b.atoms.len())
            .then_with(|| a.edge_set.cmp(&b.edge_set))
    });
    candidates.dedup_by(|a, b| a.edge_set == b.edge_set);

    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut chosen = Vec::new();
    let words = m.div_ceil(64);
    for cand in candidates {
        if chosen.len() == rank {
            break;
        }
        let mut vec = cand.edge_words.clone();
        // Gaussian elimination against the accepted basis.
        for row in &basis {
            let pivot = leading_bit(row, words);
            if pivot.is_some() && pivot == leading_bit(&vec, words) {
                for w in 0..words {
                    vec[w] ^= row[w];
                }
            }
        }
        if leading_bit(&vec, words).is_some() {
            basis.push(vec);
            basis.sort_by_key(|row| std::cmp::Reverse(leading_bit(row, words)));
            chosen.push(cand.atoms);
        }
    }
    chosen
}

fn circuit_rank(mol: &Molecule) -> usize {
    // bonds - atoms + number_of_components
    let n = mol.atom_count();
    if n == 0 {
        return 0;
    }
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in mol.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    (mol.bond_count() + components).saturating_sub(n)
}

struct Candidate {
    atoms: Vec<usize>,
    edge_set: Vec<usize>,
    edge_words: Vec<u64>,
}

fn leading_bit(words: &[u64], nwords: usize) -> Option<usize> {
    for w in 0..nwords {
        if words[w] != 0 {
            return Some(w * 64 + words[w].trailing_zeros() as usize);
        }
    }
    None
}

fn candidate_cycles(mol: &Molecule) -> Vec<Candidate> {
    let n = mol.atom_count();
    let m = mol.bond_count();
    let words = m.div_ceil(64);
    let mut out = Vec::new();

    for root in 0..n {
        // BFS tree from root.
        let mut parent = vec![usize::MAX; n];
        let mut parent_edge = vec![usize::MAX; n];
        let mut depth = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        depth[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &(v, bi) in mol.neighbors(u) {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    parent_edge[v] = bi;
                    queue.push_back(v);
                }
            }
        }
        for (bi, bond) in mol.bonds.iter().enumerate() {
            let (x, y) = (bond.a, bond.b);
            if depth[x] == usize::MAX || depth[y] == usize::MAX {
                continue;
            }
            if parent_edge[x] == bi || parent_edge[y] == bi {
                continue; // tree edge
            }
            // Paths root->x and root->y must meet only at root for a simple
            // cycle; checking a set intersection is sufficient here.
            let px = path_to_root(x, &parent);
            let py = path_to_root(y, &parent);
            if !disjoint_except_root(&px, &py) {
                continue;
            }
            let mut atoms = px.clone();
            atoms.reverse(); // root .. x
            atoms.extend(py.iter().take(py.len() - 1)); // y .. (excl root)
            // atoms: root..x then y..just-before-root, cycle closed by edge
            // (x,y) and the two tree paths.
            let mut edge_set = Vec::new();
            let mut edge_words = vec![0u64; words];
            let mut ok = true;
            for i in 0..atoms.len() {
                let a = atoms[i];
                let b = atoms[(i + 1) % atoms.len()];
                match mol.bond_between(a, b) {
                    Some(_) => {
                        let bi2 = mol
                            .neighbors(a)
                            .iter()
                            .find(|(nb, _)| *nb == b)
                            .map(|(_, e)| *e)
                            .unwrap();
                        edge_set.push(bi2);
                        edge_words[bi2 / 64] |= 1u64 << (bi2 % 64);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok || atoms.len() < 3 {
                continue;
            }
            edge_set.sort_unstable();
            out.push(Candidate {
                atoms,
                edge_set,
                edge_words,
            });
        }
    }
    out
}

fn path_to_root(mut v: usize, parent: &[usize]) -> Vec<usize> {
    let mut path = vec![v];
    while parent[v] != usize::MAX {
        v = parent[v];
        path.push(v);
    }
    path // v .. root
}

fn disjoint_except_root(px: &[usize], py: &[usize]) -> bool {
    // Both paths end at the root.
    let root = *px.last().unwrap();
    debug_assert_eq!(root, *py.last().unwrap());
    let set: std::collections::HashSet<usize> = px[..px.len() - 1].iter().copied().collect();
    py[..py.len() - 1].iter().all(|v| !set.contains(v))
}
