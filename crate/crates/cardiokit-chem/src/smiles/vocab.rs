//! Token vocabulary construction over a SMILES corpus.

use std::collections::HashMap;

use crate::error::VocabError;

use super::token::token_strings;

pub const PAD: &str = "<pad>";
pub const CLS: &str = "[CLS]";
pub const EOS: &str = "[EOS]";
pub const MASK: &str = "<MASK>";

pub const PAD_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const MASK_ID: u32 = 3;

pub const SPECIALS: [&str; 4] = [PAD, CLS, EOS, MASK];

/// Ordered token table with the four specials pinned to indices 0-3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    /// Corpus frequency per token (zero for specials and for vocabularies
    /// loaded from file).
    pub counts: Vec<u64>,
}

impl Vocabulary {
    fn from_content_tokens(content: Vec<(String, u64)>) -> Vocabulary {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0u64; SPECIALS.len()];
        for (tok, cnt) in content {
            tokens.push(tok);
            counts.push(cnt);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            index,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // specials are always present
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Serializes as one token per line in index order, specials first.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(content: &str) -> Result<Vocabulary, VocabError> {
        let lines: Vec<&str> = content.lines().collect();
        if lines.len() < SPECIALS.len() {
            return Err(VocabError::MalformedFile("missing special tokens".into()));
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if lines[i] != *s {
                return Err(VocabError::MalformedFile(format!(
                    "expected special {s:?} at index {i}, found {:?}",
                    lines[i]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for line in &lines {
            if !seen.insert(*line) {
                return Err(VocabError::MalformedFile(format!(
                    "duplicate token {line:?}"
                )));
            }
        }
        let content_tokens = lines[SPECIALS.len()..]
            .iter()
            .map(|t| (t.to_string(), 0u64))
            .collect();
        Ok(Vocabulary::from_content_tokens(content_tokens))
    }
}

/// Result of [`build_vocabulary`]: the vocabulary plus per-molecule flags
/// marking corpus entries that contain a pruned (below `min_count`) or
/// untokenizable SMILES and should be dropped before training.
#[derive(Debug, Clone)]
pub struct VocabularyBuild {
    pub vocabulary: Vocabulary,
    /// True at position i when corpus molecule i must be removed.
    pub flagged: Vec<bool>,
    pub n_flagged: usize,
}

/// Builds a vocabulary from an iterator of SMILES strings, excluding tokens
/// seen fewer than `min_count` times. Token order is (count desc, token asc)
/// so shard-parallel counting with a final merge gives the same table.
pub fn build_vocabulary<I, S>(corpus: I, min_count: u64) -> Result<VocabularyBuild, VocabError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut per_molecule: Vec<Option<Vec<String>>> = Vec::new();
    for smiles in corpus {
        match token_strings(smiles.as_ref()) {
            Ok(tokens) => {
                for t in &tokens {
                    *counts.entry(t.clone()).or_insert(0) += 1;
                }
                per_molecule.push(Some(tokens));
            }
            Err(_) => per_molecule.push(None),
        }
    }
    if per_molecule.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }

    let mut kept: Vec<(String, u64)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let vocabulary = Vocabulary::from_content_tokens(kept);

    let flagged: Vec<bool> = per_molecule
        .iter()
        .map(|tokens| match tokens {
            Some(ts) => ts.iter().any(|t| !vocabulary.contains(t)),
            None => true,
        })
        .collect();
    let n_flagged = flagged.iter().filter(|&&f| f).count();
    Ok(VocabularyBuild {
        vocabulary,
        flagged,
        n_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_occupy_fixed_indices() {
        let build = build_vocabulary(["CCO", "CCO"], 1).unwrap();
        let v = &build.vocabulary;
        assert_eq!(v.token(PAD_ID), Some(PAD));
        assert_eq!(v.token(CLS_ID), Some(CLS));
        assert_eq!(v.token(EOS_ID), Some(EOS));
        assert_eq!(v.token(MASK_ID), Some(MASK));
        let mut content: Vec<&str> = v.tokens()[4..].iter().map(|s| s.as_str()).collect();
        content.sort();
        assert_eq!(content, vec!["C", "O"]);
        assert_eq!(build.n_flagged, 0);
    }

    #[test]
    fn min_count_excludes_and_flags() {
        let build = build_vocabulary(["CCO", "CCO", "[Se]"], 2).unwrap();
        // [Se] fails tokenization outright in this grammar, so the molecule
        // is flagged; a supported-but-rare token behaves the same way.
        assert!(build.flagged[2]);
        assert!(!build.flagged[0]);

        let build = build_vocabulary(["CCO", "CCO", "CCN"], 2).unwrap();
        assert!(!build.vocabulary.contains("N"));
        assert_eq!(build.flagged, vec![false, false, true]);
    }

    #[test]
    fn empty_corpus_errors() {
        let err = build_vocabulary(Vec::<String>::new(), 1).unwrap_err();
        assert_eq!(err, VocabError::EmptyCorpus);
    }

    #[test]
    fn file_round_trip() {
        let build = build_vocabulary(["CC(=O)[O-]", "c1ccccc1"], 1).unwrap();
        let text = build.vocabulary.to_file_string();
        let loaded = Vocabulary::from_file_string(&text).unwrap();
        assert_eq!(loaded.tokens(), build.vocabulary.tokens());
    }
}
