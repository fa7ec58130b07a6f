//! Training loops for the two language models: next-token prediction for
//! the conditioned generator and masked-token prediction for the feature
//! extractor. Both use Sophia with a Gauss-Newton-Bartlett diagonal
//! Hessian estimate refreshed on the optimizer's interval.

use cardiokit_chem::smiles::TokenSequence;
use cardiokit_engine::optim::{sophia_step, PlateauScheduler, SophiaState};
use cardiokit_engine::{Scalar, StreamRng, Tape, Tensor, IGNORE_TARGET};

use super::config::TransformerConfig;
use super::corruption::{mlm_corrupt, MLM_RATE};
use super::model::{
    ar_targets, logits_batch, token_accuracy, ConditioningInput, SequenceInput, TapedParams,
};
use super::params::{TransformerKind, TransformerParams};
use super::sampling::sample_from_logits;

#[derive(Debug, Clone)]
pub struct LmTrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Stop once epoch token accuracy reaches this level.
    pub early_stop_accuracy: Option<f64>,
    /// Halve the learning rate after 10 epochs without loss improvement.
    pub plateau_halving: bool,
    /// Measure epoch accuracy with a dedicated inference pass instead of
    /// averaging teacher-forced batches mid-update.
    pub eval_accuracy: bool,
    /// Epochs at which the learning rate is halved outright.
    pub halve_lr_at: Vec<usize>,
}

impl LmTrainConfig {
    pub fn new(seed: u64, epochs: usize, batch_size: usize) -> LmTrainConfig {
        LmTrainConfig {
            seed,
            epochs,
            batch_size,
            lr: 3e-4,
            weight_decay: 0.1,
            early_stop_accuracy: None,
            plateau_halving: false,
            eval_accuracy: false,
            halve_lr_at: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Trains the conditioned autoregressive model. Returns the parameters of
/// the final epoch plus per-epoch history.
pub fn train_ar<S: Scalar>(
    corpus: &[(TokenSequence, ConditioningInput)],
    config: &TransformerConfig,
    tcfg: &LmTrainConfig,
) -> (TransformerParams<S>, Vec<EpochRecord>) {
    assert!(!corpus.is_empty(), "empty corpus");
    let mut init_rng = StreamRng::named(tcfg.seed, "ar-init");
    let mut params =
        TransformerParams::<S>::init(config, TransformerKind::Autoregressive, &mut init_rng);
    let mut state = SophiaState::for_params(&params.tensors(), tcfg.lr, tcfg.weight_decay);
    let mut sched = PlateauScheduler::new();
    let mut lr = tcfg.lr;
    let mut history = Vec::new();
    let mut shuffle_rng = StreamRng::named(tcfg.seed, "ar-shuffle");
    let mut dropout_rng = StreamRng::named(tcfg.seed, "ar-dropout");
    let mut gnb_rng = StreamRng::named(tcfg.seed, "ar-gnb");

    for epoch in 0..tcfg.epochs {
        if tcfg.halve_lr_at.contains(&epoch) {
            lr *= 0.5;
            state.lr = lr;
        }
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        let mut active = 0usize;

        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<(TokenSequence, ConditioningInput)> =
                chunk.iter().map(|&i| corpus[i].clone()).collect();
            let mut tape = Tape::new(true);
            let tp = TapedParams::leaf(&mut tape, &params, true);
            let (loss, logits, targets) =
                super::model::ar_loss(&mut tape, &tp, &batch, config, &mut dropout_rng);
            let (c, a) = token_accuracy(tape.value(logits), &targets);
            correct += c;
            active += a;
            epoch_loss += tape.value(loss).item().tof();
            batches += 1;

            let grads_result = tape.backward(loss);
            let grads: Vec<Tensor<S>> = tp
                .vars()
                .iter()
                .map(|&v| grads_result.get(v, &tape))
                .collect();
            let mut flat = params.tensors();
            let params_ref = &params;
            let gnb_rng_ref = &mut gnb_rng;
            sophia_step(&mut state, &mut flat, &grads, || {
                gnb_estimate(params_ref, &batch, config, gnb_rng_ref)
            })
            .expect("optimizer shapes");
            params.set_tensors(flat);
        }

        let accuracy = if tcfg.eval_accuracy {
            eval_ar_accuracy(&params, corpus, config)
        } else if active > 0 {
            correct as f64 / active as f64
        } else {
            0.0
        };
        let mean_loss = epoch_loss / batches.max(1) as f64;
        if tcfg.plateau_halving {
            lr = sched.step(mean_loss, lr);
            state.lr = lr;
        }
        history.push(EpochRecord {
            epoch,
            loss: mean_loss,
            accuracy,
        });
        if tcfg.early_stop_accuracy.is_some_and(|t| accuracy >= t) {
            break;
        }
    }
    (params, history)
}

/// Teacher-forced next-token accuracy of the current parameters in
/// inference mode.
pub fn eval_ar_accuracy<S: Scalar>(
    params: &TransformerParams<S>,
    corpus: &[(TokenSequence, ConditioningInput)],
    config: &TransformerConfig,
) -> f64 {
    let mut rng = StreamRng::named(0, "ar-eval");
    let mut correct = 0usize;
    let mut active = 0usize;
    for chunk in corpus.chunks(32) {
        let mut tape = Tape::new(false);
        let tp = TapedParams::leaf(&mut tape, params, false);
        let inputs: Vec<SequenceInput> = chunk
            .iter()
            .map(|(seq, cond)| SequenceInput {
                ids: seq.ids.iter().map(|&i| i as usize).collect(),
                cond: Some(cond),
            })
            .collect();
        let logits = logits_batch(&mut tape, &tp, &inputs, config, &mut rng);
        let targets: Vec<usize> = chunk.iter().flat_map(|(seq, _)| ar_targets(seq)).collect();
        let (c, a) = token_accuracy(tape.value(logits), &targets);
        correct += c;
        active += a;
    }
    if active == 0 {
        0.0
    } else {
        correct as f64 / active as f64
    }
}

/// Gauss-Newton-Bartlett diagonal estimate: run the batch forward, sample
/// labels from the model's own softmax, take the gradient against those
/// labels and square it, scaled by the number of contributing positions.
fn gnb_estimate<S: Scalar>(
    params: &TransformerParams<S>,
    batch: &[(TokenSequence, ConditioningInput)],
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Vec<Tensor<S>> {
    let mut tape = Tape::new(true);
    let tp = TapedParams::leaf(&mut tape, params, true);
    let inputs: Vec<SequenceInput> = batch
        .iter()
        .map(|(seq, cond)| SequenceInput {
            ids: seq.ids.iter().map(|&i| i as usize).collect(),
            cond: Some(cond),
        })
        .collect();
    let logits = logits_batch(&mut tape, &tp, &inputs, config, rng);
    let real_targets: Vec<usize> = batch.iter().flat_map(|(seq, _)| ar_targets(seq)).collect();
    let sampled: Vec<usize> = {
        let values = tape.value(logits);
        real_targets
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                if t == IGNORE_TARGET {
                    IGNORE_TARGET
                } else {
                    let row: Vec<f64> = values.row(r).iter().map(|v| v.tof()).collect();
                    sample_from_logits(&row, 1.0, 0, rng)
                }
            })
            .collect()
    };
    let n_active = sampled.iter().filter(|&&t| t != IGNORE_TARGET).count();
    let loss = tape.cross_entropy(logits, &sampled);
    let grads_result = tape.backward(loss);
    let scale = S::fromf(n_active.max(1) as f64);
    tp.vars()
        .iter()
        .map(|&v| {
            let g = grads_result.get(v, &tape);
            g.map(|x| x * x * scale)
        })
        .collect()
}

/// Trains the bidirectional masked model. Accuracy is masked-token
/// accuracy over selected positions.
pub fn train_mlm<S: Scalar>(
    corpus: &[TokenSequence],
    config: &TransformerConfig,
    tcfg: &LmTrainConfig,
) -> (TransformerParams<S>, Vec<EpochRecord>) {
    assert!(!corpus.is_empty(), "empty corpus");
    let mut init_rng = StreamRng::named(tcfg.seed, "mlm-init");
    let mut params =
        TransformerParams::<S>::init(config, TransformerKind::Bidirectional, &mut init_rng);
    let mut state = SophiaState::for_params(&params.tensors(), tcfg.lr, tcfg.weight_decay);
    let mut sched = PlateauScheduler::new();
    let mut lr = tcfg.lr;
    let mut history = Vec::new();
    let mut shuffle_rng = StreamRng::named(tcfg.seed, "mlm-shuffle");
    let mut mask_rng = StreamRng::named(tcfg.seed, "mlm-mask");
    let mut dropout_rng = StreamRng::named(tcfg.seed, "mlm-dropout");
    let mut gnb_rng = StreamRng::named(tcfg.seed, "mlm-gnb");

    for epoch in 0..tcfg.epochs {
        if tcfg.halve_lr_at.contains(&epoch) {
            lr *= 0.5;
            state.lr = lr;
        }
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        let mut active = 0usize;

        for chunk in order.chunks(tcfg.batch_size) {
            let corrupted: Vec<_> = chunk
                .iter()
                .map(|&i| mlm_corrupt(&corpus[i], config.vocab_size, MLM_RATE, &mut mask_rng))
                .collect();
            if corrupted.iter().all(|c| c.n_selected == 0) {
                continue;
            }
            let inputs: Vec<SequenceInput> = corrupted
                .iter()
                .map(|c| SequenceInput {
                    ids: c.seq.ids.iter().map(|&i| i as usize).collect(),
                    cond: None,
                })
                .collect();
            let targets: Vec<usize> = corrupted.iter().flat_map(|c| c.targets.clone()).collect();

            let mut tape = Tape::new(true);
            let tp = TapedParams::leaf(&mut tape, &params, true);
            let logits = logits_batch(&mut tape, &tp, &inputs, config, &mut dropout_rng);
            let loss = tape.cross_entropy(logits, &targets);
            let (c, a) = token_accuracy(tape.value(logits), &targets);
            correct += c;
            active += a;
            epoch_loss += tape.value(loss).item().tof();
            batches += 1;

            let grads_result = tape.backward(loss);
            let grads: Vec<Tensor<S>> = tp
                .vars()
                .iter()
                .map(|&v| grads_result.get(v, &tape))
                .collect();
            let mut flat = params.tensors();
            let params_ref = &params;
            let gnb_rng_ref = &mut gnb_rng;
            let inputs_ref = &inputs;
            let targets_ref = &targets;
            sophia_step(&mut state, &mut flat, &grads, || {
                gnb_estimate_masked(params_ref, inputs_ref, targets_ref, config, gnb_rng_ref)
            })
            .expect("optimizer shapes");
            params.set_tensors(flat);
        }

        let accuracy = if active > 0 {
            correct as f64 / active as f64
        } else {
            0.0
        };
        let mean_loss = epoch_loss / batches.max(1) as f64;
        if tcfg.plateau_halving {
            lr = sched.step(mean_loss, lr);
            state.lr = lr;
        }
        history.push(EpochRecord {
            epoch,
            loss: mean_loss,
            accuracy,
        });
        if tcfg.early_stop_accuracy.is_some_and(|t| accuracy >= t) {
            break;
        }
    }
    (params, history)
}

fn gnb_estimate_masked<S: Scalar>(
    params: &TransformerParams<S>,
    inputs: &[SequenceInput],
    real_targets: &[usize],
    config: &TransformerConfig,
    rng: &mut StreamRng,
) -> Vec<Tensor<S>> {
    let mut tape = Tape::new(true);
    let tp = TapedParams::leaf(&mut tape, params, true);
    let logits = logits_batch(&mut tape, &tp, inputs, config, rng);
    let sampled: Vec<usize> = {
        let values = tape.value(logits);
        real_targets
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                if t == IGNORE_TARGET {
                    IGNORE_TARGET
                } else {
                    let row: Vec<f64> = values.row(r).iter().map(|v| v.tof()).collect();
                    sample_from_logits(&row, 1.0, 0, rng)
                }
            })
            .collect()
    };
    let n_active = sampled.iter().filter(|&&t| t != IGNORE_TARGET).count();
    let loss = tape.cross_entropy(logits, &sampled);
    let grads_result = tape.backward(loss);
    let scale = S::fromf(n_active.max(1) as f64);
    tp.vars()
        .iter()
        .map(|&v| {
            let g = grads_result.get(v, &tape);
            g.map(|x| x * x * scale)
        })
        .collect()
}
