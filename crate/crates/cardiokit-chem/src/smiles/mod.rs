//! SMILES tokenization, parsing, canonical writing and sequence encoding.

pub mod molecule;
pub mod parser;
pub mod ring;
pub mod sequence;
pub mod token;
pub mod vocab;
pub mod writer;

pub use molecule::{Atom, Bond, BondOrder, Molecule, StereoMark};
pub use parser::parse;
pub use sequence::{
    decode_sequence, encode_sequence, encode_sequence_block, TokenSequence, BLOCK_SIZE,
    MAX_CONTENT,
};
pub use token::{token_strings, tokenize, SmilesToken, TokenKind};
pub use vocab::{build_vocabulary, Vocabulary, VocabularyBuild};
pub use writer::write_canonical;
