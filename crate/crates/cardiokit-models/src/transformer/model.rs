//! Forward passes for the conditioned autoregressive model and the
//! bidirectional masked model: embedding with conditioning, pre-norm
//! attention blocks, losses and CLS-feature extraction.

use cardiokit_chem::error::VocabError;
use cardiokit_chem::props::physchem_properties;
use cardiokit_chem::smiles::{encode_sequence_block, tokenize, Molecule, TokenSequence, Vocabulary};
use cardiokit_chem::smiles::vocab::{CLS_ID, EOS_ID, PAD_ID};
use cardiokit_engine::{Scalar, StreamRng, Tape, Tensor, Var, IGNORE_TARGET};

use super::config::TransformerConfig;
use super::params::{BlockParams, TransformerKind, TransformerParams};

/// Per-property corpus statistics used to z-score conditioning inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PropStats {
    pub mean: [f64; 10],
    pub std: [f64; 10],
}

impl PropStats {
    pub fn from_rows(rows: &[[f64; 10]]) -> PropStats {
        assert!(!rows.is_empty());
        let n = rows.len() as f64;
        let mut mean = [0.0; 10];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut std = [0.0; 10];
        for row in rows {
            for k in 0..10 {
                let d = row[k] - mean[k];
                std[k] += d * d / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if *s < 1e-12 {
                *s = 1.0; // constant columns pass through unscaled
            }
        }
        PropStats { mean, std }
    }

    pub fn normalize(&self, raw: [f64; 10]) -> [f64; 10] {
        let mut out = [0.0; 10];
        for k in 0..10 {
            out[k] = (raw[k] - self.mean[k]) / self.std[k];
        }
        out
    }

    pub fn identity() -> PropStats {
        PropStats {
            mean: [0.0; 10],
            std: [1.0; 10],
        }
    }
}

/// Scaffold token frame plus z-scored property vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningInput {
    pub scaffold: TokenSequence,
    /// Already normalized by corpus statistics.
    pub properties: [f64; 10],
}

impl ConditioningInput {
    /// Builds conditioning from a molecule: its Murcko scaffold tokenized
    /// into its own frame and its ten properties z-scored with `stats`.
    pub fn from_molecule(
        mol: &Molecule,
        vocab: &Vocabulary,
        stats: &PropStats,
        block_size: usize,
    ) -> Result<ConditioningInput, VocabError> {
        let scaffold = cardiokit_chem::props::murcko_scaffold(mol);
        let scaffold_smiles = cardiokit_chem::smiles::write_canonical(&scaffold);
        let tokens: Vec<String> = if scaffold_smiles.is_empty() {
            Vec::new()
        } else {
            tokenize(&scaffold_smiles)
                .expect("canonical scaffold tokenizes")
                .into_iter()
                .map(|t| t.text)
                .collect()
        };
        let scaffold = encode_sequence_block(&tokens, vocab, block_size)?;
        let raw = physchem_properties(mol).to_array();
        Ok(ConditioningInput {
            scaffold,
            properties: stats.normalize(raw),
        })
    }

    /// Conditioning with explicit (already raw) property values, e.g. for
    /// property-targeted sampling.
    pub fn with_properties(
        scaffold: TokenSequence,
        raw: [f64; 10],
        stats: &PropStats,
    ) -> ConditioningInput {
        ConditioningInput {
            scaffold,
            properties: stats.normalize(raw),
        }
    }
}

/// Tape handles for one forward pass over the parameters.
pub struct TapedParams {
    pub kind: TransformerKind,
    pub tok_emb: Var,
    pub pos_emb: Var,
    pub scaffold_emb: Option<Var>,
    pub prop_w: Option<Var>,
    pub prop_b: Option<Var>,
    pub blocks: Vec<TapedBlock>,
    pub ln_f_gamma: Var,
    pub ln_f_beta: Var,
    pub head_w: Var,
    pub head_b: Var,
}

pub struct TapedBlock {
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub w_q: Var,
    pub b_q: Var,
    pub w_k: Var,
    pub b_k: Var,
    pub w_v: Var,
    pub b_v: Var,
    pub w_o: Var,
    pub b_o: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
    pub w_ff1: Var,
    pub b_ff1: Var,
    pub w_ff2: Var,
    pub b_ff2: Var,
}

impl TapedParams {
    pub fn leaf<S: Scalar>(
        tape: &mut Tape<S>,
        params: &TransformerParams<S>,
        trainable: bool,
    ) -> TapedParams {
        let mut lf = |t: &Tensor<S>| tape.leaf(t.clone(), trainable);
        TapedParams {
            kind: params.kind,
            tok_emb: lf(&params.tok_emb),
            pos_emb: lf(&params.pos_emb),
            scaffold_emb: params.scaffold_emb.as_ref().map(&mut lf),
            prop_w: params.prop_w.as_ref().map(&mut lf),
            prop_b: params.prop_b.as_ref().map(&mut lf),
            blocks: params
                .blocks
                .iter()
                .map(|b| TapedBlock {
                    ln1_gamma: lf(&b.ln1_gamma),
                    ln1_beta: lf(&b.ln1_beta),
                    w_q: lf(&b.w_q),
                    b_q: lf(&b.b_q),
                    w_k: lf(&b.w_k),
                    b_k: lf(&b.b_k),
                    w_v: lf(&b.w_v),
                    b_v: lf(&b.b_v),
                    w_o: lf(&b.w_o),
                    b_o: lf(&b.b_o),
                    ln2_gamma: lf(&b.ln2_gamma),
                    ln2_beta: lf(&b.ln2_beta),
                    w_ff1: lf(&b.w_ff1),
                    b_ff1: lf(&b.b_ff1),
                    w_ff2: lf(&b.w_ff2),
                    b_ff2: lf(&b.b_ff2),
                })
                .collect(),
            ln_f_gamma: lf(&params.ln_f_gamma),
            ln_f_beta: lf(&params.ln_f_beta),
            head_w: lf(&params.head_w),
            head_b: lf(&params.head_b),
        }
    }

    /// Vars in the same order as `TransformerParams::named`.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.tok_emb, self.pos_emb];
        if let Some(v) = self.scaffold_emb {
            out.push(v);
        }
        if let Some(v) = self.prop_w {
            out.push(v);
        }
        if let Some(v) = self.prop_b {
            out.push(v);
        }
        for b in &self.blocks {
            out.extend([
                b.ln1_gamma, b.ln1_beta, b.w_q, b.b_q, b.w_k, b.b_k, b.w_v, b.b_v, b.w_o, b.b_o,
                b.ln2_gamma, b.ln2_beta, b.w_ff1, b.b_ff1, b.w_ff2, b.b_ff2,
            ]);
        }
        out.extend([self.ln_f_gamma, self.ln_f_beta, self.head_w, self.head_b]);
        out
    }
}

/// Token ids plus optional conditioning for one sequence (full block or a
/// sampling prefix).
pub struct SequenceInput<'a> {
    pub ids: Vec<usize>,
    pub cond: Option<&'a ConditioningInput>,
}

const LN_EPS: f64 = 1e-5;
const MASK_VALUE: f64 = -1e9;

/// Sums token, position and (when conditioned) scaffold and property
/// embeddings for a sequence prefix, then applies embedding dropout.
pub fn embed_and_condition<S: Scalar>(
    tape: &mut Tape<S>,
    tp: &TapedParams,
    input: &SequenceInput,
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Var {
    let t = input.ids.len();
    assert!(t <= config.block_size, "sequence length within block");
    let tok = tape.embedding_lookup(tp.tok_emb, &input.ids);
    let positions: Vec<usize> = (0..t).collect();
    let pos = tape.embedding_lookup(tp.pos_emb, &positions);
    let mut x = tape.add(tok, pos);

    // The bidirectional model ignores conditioning even if supplied.
    if tp.kind == TransformerKind::Autoregressive {
        if let Some(cond) = input.cond {
            let scaffold_ids: Vec<usize> =
                cond.scaffold.ids[..t].iter().map(|&i| i as usize).collect();
            let scaf = tape.embedding_lookup(
                tp.scaffold_emb.expect("conditioned params"),
                &scaffold_ids,
            );
            x = tape.add(x, scaf);
            let props = Tensor::new(
                vec![1, config.n_properties],
                cond.properties.iter().map(|&p| S::fromf(p)).collect(),
            );
            let props = tape.constant(props);
            let projected = tape.matmul(props, tp.prop_w.expect("conditioned params"));
            let projected = tape.reshape(projected, vec![config.d_model]);
            let projected_b = {
                let b = tp.prop_b.expect("conditioned params");
                tape.add(projected, b)
            };
            x = tape.add_row(x, projected_b);
        }
    }
    tape.dropout(x, config.dropout, rng)
}

fn causal_mask<S: Scalar>(t: usize) -> Tensor<S> {
    let mut m = Tensor::zeros(&[t, t]);
    for i in 0..t {
        for j in (i + 1)..t {
            m.set2(i, j, S::fromf(MASK_VALUE));
        }
    }
    m
}

/// One pre-norm transformer block over a batch of equal-length sequences
/// laid out as [B*T, d]. Attention is masked causally for the
/// autoregressive model and unmasked for the bidirectional one.
#[allow(clippy::too_many_arguments)]
pub fn block_forward<S: Scalar>(
    tape: &mut Tape<S>,
    bp: &TapedBlock,
    x: Var,
    n_seqs: usize,
    seq_len: usize,
    causal: bool,
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Var {
    let dh = config.head_dim();
    let scale = S::fromf(1.0 / (dh as f64).sqrt());
    let h = tape.layer_norm(x, bp.ln1_gamma, bp.ln1_beta, LN_EPS);
    let q = tape.matmul(h, bp.w_q);
    let q = tape.add_row(q, bp.b_q);
    let k = tape.matmul(h, bp.w_k);
    let k = tape.add_row(k, bp.b_k);
    let v = tape.matmul(h, bp.w_v);
    let v = tape.add_row(v, bp.b_v);

    let mask = causal.then(|| {
        let m = causal_mask::<S>(seq_len);
        tape.constant(m)
    });

    let mut seq_outputs = Vec::with_capacity(n_seqs);
    for s in 0..n_seqs {
        let row0 = s * seq_len;
        let qs = tape.narrow(q, 0, row0, seq_len);
        let ks = tape.narrow(k, 0, row0, seq_len);
        let vs = tape.narrow(v, 0, row0, seq_len);
        let mut heads = Vec::with_capacity(config.n_heads);
        for head in 0..config.n_heads {
            let qh = tape.narrow(qs, 1, head * dh, dh);
            let kh = tape.narrow(ks, 1, head * dh, dh);
            let vh = tape.narrow(vs, 1, head * dh, dh);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let mut scores = tape.scale(scores, scale);
            if let Some(m) = mask {
                scores = tape.add(scores, m);
            }
            let attn = tape.softmax(scores);
            heads.push(tape.matmul(attn, vh));
        }
        seq_outputs.push(tape.concat(&heads, 1));
    }
    let ctx = if seq_outputs.len() == 1 {
        seq_outputs[0]
    } else {
        tape.concat(&seq_outputs, 0)
    };
    let proj = tape.matmul(ctx, bp.w_o);
    let proj = tape.add_row(proj, bp.b_o);
    let proj = tape.dropout(proj, config.dropout, rng);
    let x = tape.add(x, proj);

    let h2 = tape.layer_norm(x, bp.ln2_gamma, bp.ln2_beta, LN_EPS);
    let ff = tape.matmul(h2, bp.w_ff1);
    let ff = tape.add_row(ff, bp.b_ff1);
    let ff = tape.gelu(ff);
    let ff = tape.matmul(ff, bp.w_ff2);
    let ff = tape.add_row(ff, bp.b_ff2);
    let ff = tape.dropout(ff, config.dropout, rng);
    tape.add(x, ff)
}

/// Full forward to the post-final-layer-norm hidden states, [B*T, d].
pub fn hidden_batch<S: Scalar>(
    tape: &mut Tape<S>,
    tp: &TapedParams,
    inputs: &[SequenceInput],
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Var {
    assert!(!inputs.is_empty());
    let seq_len = inputs[0].ids.len();
    assert!(inputs.iter().all(|i| i.ids.len() == seq_len));
    let causal = tp.kind == TransformerKind::Autoregressive;

    let embedded: Vec<Var> = inputs
        .iter()
        .map(|input| embed_and_condition(tape, tp, input, config, rng))
        .collect();
    let mut x = if embedded.len() == 1 {
        embedded[0]
    } else {
        tape.concat(&embedded, 0)
    };
    for bp in &tp.blocks {
        x = block_forward(tape, bp, x, inputs.len(), seq_len, causal, config, rng);
    }
    tape.layer_norm(x, tp.ln_f_gamma, tp.ln_f_beta, LN_EPS)
}

/// Vocabulary logits for every position, [B*T, V].
pub fn logits_batch<S: Scalar>(
    tape: &mut Tape<S>,
    tp: &TapedParams,
    inputs: &[SequenceInput],
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Var {
    let hidden = hidden_batch(tape, tp, inputs, config, rng);
    let logits = tape.matmul(hidden, tp.head_w);
    tape.add_row(logits, tp.head_b)
}

/// Next-token targets for a padded sequence: position i predicts ids[i+1];
/// pad positions (and the final slot) are excluded.
pub fn ar_targets(seq: &TokenSequence) -> Vec<usize> {
    let t = seq.ids.len();
    let mut targets = vec![IGNORE_TARGET; t];
    for i in 0..t - 1 {
        let next = seq.ids[i + 1] as usize;
        if next != PAD_ID as usize {
            targets[i] = next;
        }
    }
    targets
}

/// Mean next-token cross-entropy over a batch of sequences, with pad
/// positions excluded from the loss.
pub fn ar_loss<S: Scalar>(
    tape: &mut Tape<S>,
    tp: &TapedParams,
    batch: &[(TokenSequence, ConditioningInput)],
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> (Var, Var, Vec<usize>) {
    let inputs: Vec<SequenceInput> = batch
        .iter()
        .map(|(seq, cond)| SequenceInput {
            ids: seq.ids.iter().map(|&i| i as usize).collect(),
            cond: Some(cond),
        })
        .collect();
    let logits = logits_batch(tape, tp, &inputs, config, rng);
    let targets: Vec<usize> = batch.iter().flat_map(|(seq, _)| ar_targets(seq)).collect();
    let loss = tape.cross_entropy(logits, &targets);
    (loss, logits, targets)
}

/// Fraction of non-ignored positions where the argmax matches the target.
pub fn token_accuracy<S: Scalar>(logits: &Tensor<S>, targets: &[usize]) -> (usize, usize) {
    let mut correct = 0;
    let mut active = 0;
    for (r, &target) in targets.iter().enumerate() {
        if target == IGNORE_TARGET {
            continue;
        }
        active += 1;
        let row = logits.row(r);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if argmax == target {
            correct += 1;
        }
    }
    (correct, active)
}

/// Runs the bidirectional model and returns the [CLS] (position 0) vector
/// from the penultimate representation (post final layer norm, before the
/// vocabulary projection).
pub fn extract_feature_vector<S: Scalar>(
    smiles: &str,
    params: &TransformerParams<S>,
    config: &TransformerConfig,
    vocab: &Vocabulary,
) -> Result<Tensor<S>, FeatureError> {
    assert_eq!(params.kind, TransformerKind::Bidirectional);
    let tokens: Vec<String> = tokenize(smiles)
        .map_err(FeatureError::Smiles)?
        .into_iter()
        .map(|t| t.text)
        .collect();
    let seq =
        encode_sequence_block(&tokens, vocab, config.block_size).map_err(FeatureError::Vocab)?;
    Ok(extract_feature_from_sequence(&seq, params, config))
}

pub fn extract_feature_from_sequence<S: Scalar>(
    seq: &TokenSequence,
    params: &TransformerParams<S>,
    config: &TransformerConfig,
) -> Tensor<S> {
    let mut tape = Tape::new(false);
    let tp = TapedParams::leaf(&mut tape, params, false);
    let mut rng = StreamRng::named(0, "feature-extraction-inference");
    let input = SequenceInput {
        ids: seq.ids.iter().map(|&i| i as usize).collect(),
        cond: None,
    };
    let hidden = hidden_batch(&mut tape, &tp, &[input], config, &mut rng);
    let d = config.d_model;
    let row0: Vec<S> = tape.value(hidden).row(0).to_vec();
    Tensor::new(vec![d], row0)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("smiles error: {0}")]
    Smiles(cardiokit_chem::error::SmilesError),
    #[error("vocabulary error: {0}")]
    Vocab(cardiokit_chem::error::VocabError),
}

/// Convenience: sequence ids for a [CLS]-only prefix.
pub fn cls_prefix() -> Vec<usize> {
    vec![CLS_ID as usize]
}

pub const EOS: usize = EOS_ID as usize;
