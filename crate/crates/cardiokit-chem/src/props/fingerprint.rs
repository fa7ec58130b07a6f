//! Circular atom-environment fingerprints (radius 2, 1024 bits) and
//! Tanimoto similarity.

use crate::error::FingerprintError;
use crate::smiles::molecule::Molecule;

pub const FP_BITS: usize = 1024;
pub const FP_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
}

impl Fingerprint {
    pub fn zeros(nbits: usize) -> Fingerprint {
        Fingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
        }
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.nbits == 0
    }

    pub fn set(&mut self, bit: usize) {
        debug_assert!(bit < self.nbits);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv1a_words(words: &[u64]) -> u64 {
    fnv1a(words.iter().flat_map(|w| w.to_le_bytes()))
}

/// Initial atom invariant: element, degree, hydrogen count, charge,
/// aromaticity and ring membership.
fn initial_identifier(mol: &Molecule, atom: usize) -> u64 {
    let a = &mol.atoms[atom];
    fnv1a([
        a.element.rank(),
        mol.degree(atom) as u8,
        a.h_count,
        (i16::from(a.formal_charge) + 8) as u8,
        u8::from(a.aromatic),
        u8::from(mol.ring_membership[atom]),
    ])
}

/// Morgan-style circular fingerprint: environments at radii 0..=2 hashed to
/// 64-bit identifiers, folded as `id % 1024`. An environment that stops
/// growing (its atom ball equals the previous radius) is not re-emitted, so
/// an isolated atom sets exactly one bit.
pub fn morgan_fingerprint(mol: &Molecule) -> Fingerprint {
    morgan_fingerprint_sized(mol, FP_BITS, FP_RADIUS)
}

pub fn morgan_fingerprint_sized(mol: &Molecule, nbits: usize, radius: usize) -> Fingerprint {
    let n = mol.atom_count();
    let mut fp = Fingerprint::zeros(nbits);
    if n == 0 {
        return fp;
    }

    let mut ids: Vec<u64> = (0..n).map(|a| initial_identifier(mol, a)).collect();
    let mut balls: Vec<Vec<usize>> = (0..n).map(|a| vec![a]).collect();
    for &id in &ids {
        fp.set((id % nbits as u64) as usize);
    }

    for r in 1..=radius {
        let mut next_ids = ids.clone();
        let mut next_balls = balls.clone();
        for atom in 0..n {
            let mut env: Vec<(u8, u64)> = mol
                .neighbors(atom)
                .iter()
                .map(|&(nbr, bi)| (mol.bonds[bi].order.class(), ids[nbr]))
                .collect();
            env.sort_unstable();

            let mut ball: Vec<usize> = balls[atom].clone();
            for &(nbr, _) in mol.neighbors(atom) {
                for &m in &balls[nbr] {
                    if !ball.contains(&m) {
                        ball.push(m);
                    }
                }
            }
            ball.sort_unstable();

            let mut words = vec![r as u64, ids[atom]];
            for (cls, id) in env {
                words.push(u64::from(cls));
                words.push(id);
            }
            next_ids[atom] = fnv1a_words(&words);
            next_balls[atom] = ball;
        }
        for atom in 0..n {
            if next_balls[atom] != balls[atom] {
                fp.set((next_ids[atom] % nbits as u64) as usize);
            }
        }
        ids = next_ids;
        balls = next_balls;
    }
    fp
}

/// Tanimoto similarity |a AND b| / |a OR b|; defined as 1.0 when both
/// fingerprints are all-zero.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.nbits != b.nbits {
        return Err(FingerprintError::LengthMismatch {
            a: a.nbits,
            b: b.nbits,
        });
    }
    let mut inter = 0u32;
    let mut union = 0u32;
    for (wa, wb) in a.words.iter().zip(&b.words) {
        inter += (wa & wb).count_ones();
        union += (wa | wb).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(f64::from(inter) / f64::from(union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn single_atom_sets_exactly_one_bit() {
        let fp = morgan_fingerprint(&parse("C").unwrap());
        assert_eq!(fp.count_ones(), 1);
    }

    #[test]
    fn different_molecules_differ() {
        let a = morgan_fingerprint(&parse("CCO").unwrap());
        let b = morgan_fingerprint(&parse("CCN").unwrap());
        assert_ne!(a, b);
    }

    #[test]
    fn tanimoto_identity() {
        let fp = morgan_fingerprint(&parse("c1ccccc1O").unwrap());
        assert_eq!(tanimoto(&fp, &fp).unwrap(), 1.0);
    }

    #[test]
    fn tanimoto_set_arithmetic() {
        let mut a = Fingerprint::zeros(1024);
        let mut b = Fingerprint::zeros(1024);
        for bit in [1, 2, 3] {
            a.set(bit);
        }
        for bit in [2, 3, 4] {
            b.set(bit);
        }
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn tanimoto_disjoint_and_empty() {
        let mut a = Fingerprint::zeros(1024);
        let mut b = Fingerprint::zeros(1024);
        a.set(0);
        b.set(9);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.0);
        let z = Fingerprint::zeros(1024);
        assert_eq!(tanimoto(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = Fingerprint::zeros(1024);
        let b = Fingerprint::zeros(512);
        assert!(tanimoto(&a, &b).is_err());
    }
}
