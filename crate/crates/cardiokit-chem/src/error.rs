use thiserror::Error;

/// Errors raised while tokenizing or parsing SMILES input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("unknown character {found:?} at byte {position}")]
    UnknownCharacter { position: usize, found: char },

    #[error("ring closure {label} opened at token {token_index} is never closed")]
    UnclosedRing { token_index: usize, label: u8 },

    #[error("unbalanced branch parenthesis at token {token_index}")]
    UnclosedBranch { token_index: usize },

    #[error("valence violation at token {token_index}: {detail}")]
    ValenceViolation { token_index: usize, detail: String },

    #[error("multi-component input: separator at token {token_index}")]
    MultiComponentInput { token_index: usize },

    #[error("syntax error at token {token_index}: {detail}")]
    Syntax { token_index: usize, detail: String },
}

/// Errors raised by vocabulary construction and sequence encoding.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("token {token:?} not in vocabulary")]
    TokenNotInVocabulary { token: String },

    #[error("sequence too long: {len} content tokens exceeds limit {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("malformed vocabulary file: {0}")]
    MalformedFile(String),
}

/// Errors from fingerprint arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}
