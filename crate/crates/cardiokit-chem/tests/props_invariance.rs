//! Property-level invariants: re-spelling a molecule never changes its
//! computed properties, scaffolding is idempotent, and the tokenizer/encoder
//! contracts hold on arbitrary inputs.

use cardiokit_chem::props::descriptors::{descriptor_layout_tsv, compute_descriptors};
use cardiokit_chem::props::{morgan_fingerprint, murcko_scaffold, physchem_properties};
use cardiokit_chem::smiles::vocab::build_vocabulary;
use cardiokit_chem::smiles::{
    decode_sequence, encode_sequence, parse, token_strings, write_canonical,
};
use proptest::prelude::*;

fn corpus() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/corpus_500.smi");
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect()
}

#[test]
fn properties_invariant_under_respelling() {
    // The canonical form is a second spelling of the same graph.
    for smiles in corpus().iter().step_by(5) {
        let a = parse(smiles).unwrap();
        let b = parse(&write_canonical(&a)).unwrap();
        assert_eq!(
            physchem_properties(&a).to_array(),
            physchem_properties(&b).to_array(),
            "{smiles}"
        );
        assert_eq!(compute_descriptors(&a).values, compute_descriptors(&b).values);
        assert_eq!(morgan_fingerprint(&a), morgan_fingerprint(&b));
    }
}

#[test]
fn murcko_idempotent_over_corpus() {
    for smiles in corpus() {
        let mol = parse(&smiles).unwrap();
        let s1 = murcko_scaffold(&mol);
        let s2 = murcko_scaffold(&s1);
        assert_eq!(write_canonical(&s1), write_canonical(&s2), "{smiles}");
    }
}

#[test]
fn heteroatom_count_definition() {
    for smiles in corpus().iter().step_by(11) {
        let mol = parse(smiles).unwrap();
        let p = physchem_properties(&mol);
        let carbons = mol
            .atoms
            .iter()
            .filter(|a| a.element == cardiokit_chem::Element::C)
            .count();
        let hydrogens = mol
            .atoms
            .iter()
            .filter(|a| a.element == cardiokit_chem::Element::H)
            .count();
        assert_eq!(
            p.n_heteroatoms as usize,
            mol.atom_count() - carbons - hydrogens,
            "{smiles}"
        );
    }
}

#[test]
fn descriptor_layout_file_matches_generator() {
    let shipped = include_str!("../data/descriptor_layout_v1.tsv");
    assert_eq!(shipped, descriptor_layout_tsv());
}

proptest! {
    /// tokenize(s) either errors or satisfies join(tokens) == s.
    #[test]
    fn tokenizer_totality(s in "[A-Za-z0-9%()\\[\\]@+=#:.\\-]{0,40}") {
        if let Ok(tokens) = token_strings(&s) {
            prop_assert_eq!(tokens.concat(), s);
        }
    }

    /// decode(encode(t)) == t for any in-vocabulary token list up to 133.
    #[test]
    fn encode_decode_inverse(picks in proptest::collection::vec(0usize..6, 0..133)) {
        let vocab = build_vocabulary(["CC(=O)Oc1ccccc1C(=O)O"], 1).unwrap().vocabulary;
        let content: Vec<String> = vocab.tokens()[4..].to_vec();
        let tokens: Vec<String> = picks.iter().map(|&i| content[i % content.len()].clone()).collect();
        let seq = encode_sequence(&tokens, &vocab).unwrap();
        prop_assert_eq!(decode_sequence(&seq, &vocab), tokens);
    }

    /// Tanimoto is symmetric and 1 on identity for arbitrary bit sets.
    #[test]
    fn tanimoto_symmetry(bits_a in proptest::collection::vec(0usize..1024, 0..64),
                         bits_b in proptest::collection::vec(0usize..1024, 0..64)) {
        use cardiokit_chem::props::fingerprint::Fingerprint;
        use cardiokit_chem::props::tanimoto;
        let mut a = Fingerprint::zeros(1024);
        let mut b = Fingerprint::zeros(1024);
        for bit in bits_a { a.set(bit); }
        for bit in bits_b { b.set(bit); }
        prop_assert_eq!(tanimoto(&a, &b).unwrap(), tanimoto(&b, &a).unwrap());
        prop_assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
    }
}
