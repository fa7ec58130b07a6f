//! Fixed-block token-id sequences with `[CLS]`/`[EOS]`/`<pad>` framing.

use crate::error::VocabError;

use super::vocab::{Vocabulary, CLS_ID, EOS_ID, PAD_ID};

/// Default block: 133 content slots plus the start and end tokens.
pub const BLOCK_SIZE: usize = 135;
/// Default content capacity.
pub const MAX_CONTENT: usize = BLOCK_SIZE - 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub content_len: usize,
}

impl TokenSequence {
    pub fn block_size(&self) -> usize {
        self.ids.len()
    }
}

/// Encodes tokens into the default 135-slot block.
pub fn encode_sequence(tokens: &[String], vocab: &Vocabulary) -> Result<TokenSequence, VocabError> {
    encode_sequence_block(tokens, vocab, BLOCK_SIZE)
}

/// Encodes into an arbitrary block size (desk-scale configs shrink it).
pub fn encode_sequence_block(
    tokens: &[String],
    vocab: &Vocabulary,
    block_size: usize,
) -> Result<TokenSequence, VocabError> {
    assert!(block_size >= 2, "block must fit [CLS] and [EOS]");
    let max_content = block_size - 2;
    if tokens.len() > max_content {
        return Err(VocabError::SequenceTooLong {
            len: tokens.len(),
            max: max_content,
        });
    }
    let mut ids = Vec::with_capacity(block_size);
    ids.push(CLS_ID);
    for t in tokens {
        let id = vocab
            .id(t)
            .ok_or_else(|| VocabError::TokenNotInVocabulary { token: t.clone() })?;
        ids.push(id);
    }
    ids.push(EOS_ID);
    ids.resize(block_size, PAD_ID);
    Ok(TokenSequence {
        ids,
        content_len: tokens.len(),
    })
}

/// Inverse of [`encode_sequence`]: strips framing and maps ids back to
/// token strings.
pub fn decode_sequence(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.ids[1..=seq.content_len]
        .iter()
        .map(|&id| vocab.token(id).expect("id within vocabulary").to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::vocab::build_vocabulary;

    fn vocab() -> Vocabulary {
        build_vocabulary(["CCO", "c1ccccc1"], 1).unwrap().vocabulary
    }

    #[test]
    fn single_token_layout() {
        let v = vocab();
        let seq = encode_sequence(&["C".to_string()], &v).unwrap();
        assert_eq!(seq.ids.len(), BLOCK_SIZE);
        assert_eq!(seq.ids[0], CLS_ID);
        assert_eq!(seq.ids[1], v.id("C").unwrap());
        assert_eq!(seq.ids[2], EOS_ID);
        assert!(seq.ids[3..].iter().all(|&id| id == PAD_ID));
        assert_eq!(seq.content_len, 1);
    }

    #[test]
    fn boundary_133_tokens() {
        let v = vocab();
        let tokens: Vec<String> = std::iter::repeat_with(|| "C".to_string())
            .take(MAX_CONTENT)
            .collect();
        let seq = encode_sequence(&tokens, &v).unwrap();
        assert_eq!(seq.content_len, MAX_CONTENT);
        assert_eq!(seq.ids[MAX_CONTENT + 1], EOS_ID);
        assert!(!seq.ids.contains(&u32::MAX));
    }

    #[test]
    fn over_long_rejected() {
        let v = vocab();
        let tokens: Vec<String> = std::iter::repeat_with(|| "C".to_string())
            .take(MAX_CONTENT + 1)
            .collect();
        match encode_sequence(&tokens, &v) {
            Err(VocabError::SequenceTooLong { len, max }) => {
                assert_eq!(len, 134);
                assert_eq!(max, 133);
            }
            other => panic!("expected SequenceTooLong, got {other:?}"),
        }
    }

    #[test]
    fn unknown_token_rejected() {
        let v = vocab();
        let err = encode_sequence(&["N".to_string()], &v).unwrap_err();
        assert!(matches!(err, VocabError::TokenNotInVocabulary { .. }));
    }

    #[test]
    fn decode_inverts_encode() {
        let v = vocab();
        let tokens: Vec<String> = ["c", "1", "c", "c", "c", "c", "c", "1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let seq = encode_sequence(&tokens, &v).unwrap();
        assert_eq!(decode_sequence(&seq, &v), tokens);
    }
}
