//! Masked-language-model corruption: each content token is selected with
//! probability `rate`; of the selected, 80% become `<MASK>`, 10% become a
//! random vocabulary token and 10% stay unchanged. Specials and pads are
//! never selected.

use cardiokit_chem::smiles::vocab::MASK_ID;
use cardiokit_chem::smiles::TokenSequence;
use cardiokit_engine::{StreamRng, IGNORE_TARGET};

pub const MLM_RATE: f64 = 0.15;
pub const MLM_MASK_FRAC: f64 = 0.8;
pub const MLM_RANDOM_FRAC: f64 = 0.1;

/// First vocabulary index after the four specials.
const FIRST_CONTENT_ID: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSequence {
    pub seq: TokenSequence,
    /// Original token id at selected positions, [`IGNORE_TARGET`] elsewhere.
    pub targets: Vec<usize>,
    pub n_selected: usize,
}

pub fn mlm_corrupt(
    seq: &TokenSequence,
    vocab_size: usize,
    rate: f64,
    rng: &mut StreamRng,
) -> CorruptedSequence {
    let mut corrupted = seq.clone();
    let mut targets = vec![IGNORE_TARGET; seq.ids.len()];
    let mut n_selected = 0;
    for pos in 1..=seq.content_len {
        if !rng.bernoulli(rate) {
            continue;
        }
        n_selected += 1;
        targets[pos] = seq.ids[pos] as usize;
        let roll = rng.uniform_f64();
        if roll < MLM_MASK_FRAC {
            corrupted.ids[pos] = MASK_ID;
        } else if roll < MLM_MASK_FRAC + MLM_RANDOM_FRAC && vocab_size > FIRST_CONTENT_ID {
            let random = FIRST_CONTENT_ID + rng.below(vocab_size - FIRST_CONTENT_ID);
            corrupted.ids[pos] = random as u32;
        }
        // remaining 10%: left unchanged, target still recorded
    }
    CorruptedSequence {
        seq: corrupted,
        targets,
        n_selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cardiokit_chem::smiles::vocab::{build_vocabulary, CLS_ID, EOS_ID, PAD_ID};
    use cardiokit_chem::smiles::{encode_sequence_block, tokenize};

    fn sample_seq() -> (TokenSequence, usize) {
        let build = build_vocabulary(["CC(=O)Oc1ccccc1C(=O)O"], 1).unwrap();
        let tokens: Vec<String> = tokenize("CC(=O)Oc1ccccc1")
            .unwrap()
            .into_iter()
            .map(|t| t.text)
            .collect();
        let seq = encode_sequence_block(&tokens, &build.vocabulary, 24).unwrap();
        (seq, build.vocabulary.len())
    }

    #[test]
    fn rate_zero_is_identity() {
        let (seq, vs) = sample_seq();
        let mut rng = StreamRng::named(1, "mlm");
        let out = mlm_corrupt(&seq, vs, 0.0, &mut rng);
        assert_eq!(out.seq, seq);
        assert_eq!(out.n_selected, 0);
        assert!(out.targets.iter().all(|&t| t == IGNORE_TARGET));
    }

    #[test]
    fn specials_and_pads_never_selected() {
        let (seq, vs) = sample_seq();
        let mut rng = StreamRng::named(2, "mlm");
        for _ in 0..200 {
            let out = mlm_corrupt(&seq, vs, 0.9, &mut rng);
            assert_eq!(out.seq.ids[0], CLS_ID);
            assert_eq!(out.seq.ids[seq.content_len + 1], EOS_ID);
            assert!(out.seq.ids[seq.content_len + 2..]
                .iter()
                .all(|&i| i == PAD_ID));
            assert_eq!(out.targets[0], IGNORE_TARGET);
        }
    }

    #[test]
    fn targets_recorded_only_at_selected() {
        let (seq, vs) = sample_seq();
        let mut rng = StreamRng::named(3, "mlm");
        let out = mlm_corrupt(&seq, vs, 0.5, &mut rng);
        let recorded = out
            .targets
            .iter()
            .filter(|&&t| t != IGNORE_TARGET)
            .count();
        assert_eq!(recorded, out.n_selected);
        for (pos, &target) in out.targets.iter().enumerate() {
            if target != IGNORE_TARGET {
                assert_eq!(target, seq.ids[pos] as usize);
            }
        }
    }
}
