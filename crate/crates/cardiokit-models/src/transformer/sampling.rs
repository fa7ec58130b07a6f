//! Conditioned autoregressive sampling with temperature and top-k controls.

use cardiokit_chem::smiles::vocab::{CLS_ID, EOS_ID};
use cardiokit_chem::smiles::{parse, Vocabulary};
use cardiokit_engine::{Scalar, StreamRng, Tape};

use super::config::TransformerConfig;
use super::model::{logits_batch, ConditioningInput, SequenceInput, TapedParams};
use super::params::{TransformerKind, TransformerParams};

/// Outcome of one sampling attempt. Rejection (an unparseable string) is a
/// normal result the caller's retry loop consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    /// The sampled string and its parsed form's token text.
    Valid(String),
    Rejected(String),
}

impl SampleOutcome {
    pub fn valid(&self) -> Option<&str> {
        match self {
            SampleOutcome::Valid(s) => Some(s),
            SampleOutcome::Rejected(_) => None,
        }
    }
}

/// Samples one SMILES string token-by-token under causal masking, starting
/// from [CLS], stopping at [EOS] or the block limit. Temperature 0 is exact
/// greedy decoding; `top_k = 0` disables truncation.
pub fn sample_sequence<S: Scalar>(
    cond: &ConditioningInput,
    params: &TransformerParams<S>,
    config: &TransformerConfig,
    vocab: &Vocabulary,
    rng: &mut StreamRng,
    temperature: f64,
    top_k: usize,
) -> SampleOutcome {
    assert_eq!(params.kind, TransformerKind::Autoregressive);
    assert!(temperature >= 0.0);
    let mut ids: Vec<usize> = vec![CLS_ID as usize];
    let max_len = config.block_size;

    while ids.len() < max_len {
        let mut tape = Tape::new(false);
        let tp = TapedParams::leaf(&mut tape, params, false);
        let input = SequenceInput {
            ids: ids.clone(),
            cond: Some(cond),
        };
        // inference mode: the dropout stream is never drawn from
        let mut drng = StreamRng::named(0, "sampling-inference");
        let logits = logits_batch(&mut tape, &tp, &[input], config, &mut drng);
        let last_row: Vec<f64> = tape
            .value(logits)
            .row(ids.len() - 1)
            .iter()
            .map(|v| v.tof())
            .collect();
        let next = sample_from_logits(&last_row, temperature, top_k, rng);
        if next == EOS_ID as usize {
            break;
        }
        ids.push(next);
    }

    let text: String = ids[1..]
        .iter()
        .filter_map(|&id| vocab.token(id as u32))
        .collect();
    if text.is_empty() {
        return SampleOutcome::Rejected(text);
    }
    match parse(&text) {
        Ok(_) => SampleOutcome::Valid(text),
        Err(_) => SampleOutcome::Rejected(text),
    }
}

/// Temperature-scaled, optionally top-k-truncated categorical draw.
/// Deterministic argmax when temperature is zero.
pub fn sample_from_logits(
    logits: &[f64],
    temperature: f64,
    top_k: usize,
    rng: &mut StreamRng,
) -> usize {
    assert!(!logits.is_empty());
    if temperature == 0.0 {
        return argmax(logits);
    }
    let mut scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    if top_k > 0 && top_k < scaled.len() {
        // keep the k largest (ties resolved toward lower index)
        let mut order: Vec<usize> = (0..scaled.len()).collect();
        order.sort_by(|&a, &b| scaled[b].partial_cmp(&scaled[a]).unwrap().then(a.cmp(&b)));
        let cutoff: std::collections::HashSet<usize> = order[..top_k].iter().copied().collect();
        for (i, s) in scaled.iter_mut().enumerate() {
            if !cutoff.contains(&i) {
                *s = f64::NEG_INFINITY;
            }
        }
    }
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut u = rng.uniform_f64() * total;
    for (i, &e) in exps.iter().enumerate() {
        u -= e;
        if u <= 0.0 {
            return i;
        }
    }
    exps.len() - 1
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_is_greedy() {
        let mut rng = StreamRng::named(1, "sampling");
        let logits = vec![0.1, 2.5, -1.0, 2.4];
        for _ in 0..10 {
            assert_eq!(sample_from_logits(&logits, 0.0, 0, &mut rng), 1);
        }
    }

    #[test]
    fn tiny_temperature_matches_greedy() {
        let mut rng = StreamRng::named(2, "sampling");
        let logits = vec![0.1, 2.5, -1.0, 2.4];
        for _ in 0..50 {
            assert_eq!(sample_from_logits(&logits, 1e-6, 0, &mut rng), 1);
        }
    }

    #[test]
    fn top_k_excludes_tail() {
        let mut rng = StreamRng::named(3, "sampling");
        let logits = vec![5.0, 4.0, -100.0, 3.9];
        for _ in 0..200 {
            let s = sample_from_logits(&logits, 1.0, 2, &mut rng);
            assert!(s == 0 || s == 1);
        }
    }
}
