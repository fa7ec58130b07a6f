//! Cheminformatics core: SMILES grammar, molecular graphs, canonical forms,
//! physicochemical properties, fingerprints and scaffolds.

pub mod element;
pub mod error;
pub mod props;
pub mod smiles;

pub use element::Element;
pub use error::{FingerprintError, SmilesError, VocabError};
pub use props::{
    compute_descriptors, morgan_fingerprint, murcko_scaffold, physchem_properties, tanimoto,
    DescriptorVector, Fingerprint, PropertyVector,
};
pub use smiles::{
    build_vocabulary, decode_sequence, encode_sequence, parse, tokenize, write_canonical, Atom,
    Bond, BondOrder, Molecule, StereoMark, TokenSequence, Vocabulary,
};
