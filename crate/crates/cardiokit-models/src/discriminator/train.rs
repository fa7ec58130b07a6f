//! Discriminator training: AdamW with L1 regularization, gradient clipping,
//! plateau learning-rate halving, best-validation-epoch selection, plus the
//! Y-randomization control.

use cardiokit_engine::optim::{adamw_step, clip_grad_norm, AdamWState, PlateauScheduler};
use cardiokit_engine::{Scalar, StreamRng, Tape, Tensor};
use thiserror::Error;

use super::fusion::{fusion_forward, predict, FusionParams, FusionSample, TaskMode};
use super::metrics::pearson;

/// Compounds at or above this pIC50 are blockers.
pub const BLOCKER_THRESHOLD: f64 = 5.0;
/// Classification decision boundary on the sigmoid output.
pub const CLASS_DECISION: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct DiscSample {
    pub fusion: FusionSample,
    pub pic50: f64,
}

impl DiscSample {
    pub fn is_blocker(&self) -> bool {
        self.pic50 >= BLOCKER_THRESHOLD
    }
}

#[derive(Debug, Clone)]
pub struct DiscTrainConfig {
    pub seed: u64,
    pub mode: TaskMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub l1_coeff: f64,
    pub clip_norm: f64,
    pub gat_hidden: usize,
    pub gat_heads: usize,
    pub encoder_hidden: usize,
}

impl DiscTrainConfig {
    pub fn new(seed: u64, mode: TaskMode, epochs: usize) -> DiscTrainConfig {
        DiscTrainConfig {
            seed,
            mode,
            epochs,
            batch_size: 32,
            lr: 3e-4,
            weight_decay: 1e-4,
            l1_coeff: 1e-4,
            clip_norm: 5.0,
            gat_hidden: 64,
            gat_heads: 4,
            encoder_hidden: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscEpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedDiscriminator<S> {
    pub params: FusionParams<S>,
    pub history: Vec<DiscEpochRecord>,
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("y-randomization requires at least one trial")]
    NoTrials,
}

fn target_value(sample: &DiscSample, mode: TaskMode) -> f64 {
    match mode {
        TaskMode::Classification => f64::from(u8::from(sample.is_blocker())),
        TaskMode::Regression => sample.pic50,
    }
}

/// Validation metric: accuracy for classification, Pearson for regression.
pub fn evaluate_on<S: Scalar>(params: &mut FusionParams<S>, samples: &[DiscSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let fusion: Vec<FusionSample> = samples.iter().map(|s| s.fusion.clone()).collect();
    let preds = predict(params, &fusion);
    match params.mode {
        TaskMode::Classification => {
            let correct = preds
                .iter()
                .zip(samples)
                .filter(|(p, s)| (**p >= CLASS_DECISION) == s.is_blocker())
                .count();
            correct as f64 / samples.len() as f64
        }
        TaskMode::Regression => {
            let truth: Vec<f64> = samples.iter().map(|s| s.pic50).collect();
            pearson(&preds, &truth).unwrap_or(0.0)
        }
    }
}

/// Trains the fusion model. Returns the parameters of the epoch with the
/// best validation metric.
pub fn train_discriminator<S: Scalar>(
    train: &[DiscSample],
    val: &[DiscSample],
    cfg: &DiscTrainConfig,
) -> Result<TrainedDiscriminator<S>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut params = FusionParams::<S>::init_sized(
        cfg.mode,
        cfg.seed,
        cfg.gat_hidden,
        cfg.gat_heads,
        cfg.encoder_hidden,
    );
    let mut opt = AdamWState::for_params(&params.trainable(), cfg.lr, cfg.weight_decay);
    let mut sched = PlateauScheduler::new();
    let mut lr = cfg.lr;
    let mut shuffle_rng = StreamRng::named(cfg.seed, "disc-shuffle");
    let mut dropout_rng = StreamRng::named(cfg.seed, "disc-dropout");

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, FusionParams<S>)> = None;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // batch norm in training mode needs >= 2 rows
            }
            let samples: Vec<FusionSample> =
                chunk.iter().map(|&i| train[i].fusion.clone()).collect();
            let targets: Vec<f64> = chunk
                .iter()
                .map(|&i| target_value(&train[i], cfg.mode))
                .collect();

            let mut tape = Tape::new(true);
            let (out, vars) =
                fusion_forward(&mut tape, &mut params, &samples, true, &mut dropout_rng);
            let target_tensor = Tensor::new(
                vec![targets.len()],
                targets.iter().map(|&t| S::fromf(t)).collect(),
            );
            let mut loss = match cfg.mode {
                TaskMode::Classification => tape.bce_logits(out, &target_tensor),
                TaskMode::Regression => tape.mse(out, &target_tensor),
            };
            for &wi in FusionParams::<S>::WEIGHT_INDICES.iter() {
                let penalty = tape.l1_penalty(vars[wi], cfg.l1_coeff);
                loss = tape.add(loss, penalty);
            }
            let loss_value = tape.value(loss).item().tof();
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss_value;
            batches += 1;

            let grads_result = tape.backward(loss);
            let mut grads: Vec<Tensor<S>> =
                vars.iter().map(|&v| grads_result.get(v, &tape)).collect();
            clip_grad_norm(&mut grads, cfg.clip_norm);
            opt.lr = lr;
            let mut flat = params.trainable();
            adamw_step(&mut opt, &mut flat, &grads).expect("optimizer shapes");
            params.set_trainable(flat);
        }

        let train_loss = epoch_loss / batches.max(1) as f64;
        lr = sched.step(train_loss, lr);
        let val_metric = evaluate_on(&mut params, val);
        history.push(DiscEpochRecord {
            epoch,
            train_loss,
            val_metric,
            lr,
        });
        let improved = best
            .as_ref()
            .is_none_or(|(_, best_metric, _)| val_metric > *best_metric);
        if improved {
            best = Some((epoch, val_metric, params.clone()));
        }
    }

    let (best_epoch, best_val_metric, best_params) =
        best.unwrap_or((0, 0.0, params));
    Ok(TrainedDiscriminator {
        params: best_params,
        history,
        best_epoch,
        best_val_metric,
    })
}

#[derive(Debug, Clone)]
pub struct YRandReport {
    pub trial_metrics: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Retrains with per-trial permuted training labels and reports the
/// evaluation-metric distribution on the untouched test set.
pub fn y_randomization_test<S: Scalar>(
    train: &[DiscSample],
    val: &[DiscSample],
    test: &[DiscSample],
    cfg: &DiscTrainConfig,
    n_trials: usize,
) -> Result<YRandReport, TrainError> {
    if n_trials == 0 {
        return Err(TrainError::NoTrials);
    }
    let mut metrics = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let mut rng = StreamRng::named(cfg.seed, "y-randomization").substream(cfg.seed, trial as u64);
        let shuffled_train = permute_labels(train, &mut rng);
        let shuffled_val = permute_labels(val, &mut rng);
        let mut cfg_trial = cfg.clone();
        cfg_trial.seed = cfg.seed.wrapping_add(1000 + trial as u64);
        let mut trained = train_discriminator::<S>(&shuffled_train, &shuffled_val, &cfg_trial)?;
        metrics.push(evaluate_on(&mut trained.params, test));
    }
    let mean = metrics.iter().sum::<f64>() / metrics.len() as f64;
    let var = metrics
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / metrics.len() as f64;
    Ok(YRandReport {
        trial_metrics: metrics,
        mean,
        std: var.sqrt(),
    })
}

/// Permutes the label multiset across samples (the multiset is preserved).
fn permute_labels(samples: &[DiscSample], rng: &mut StreamRng) -> Vec<DiscSample> {
    let mut labels: Vec<f64> = samples.iter().map(|s| s.pic50).collect();
    rng.shuffle(&mut labels);
    samples
        .iter()
        .zip(labels)
        .map(|(s, pic50)| DiscSample {
            fusion: s.fusion.clone(),
            pic50,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_rejected() {
        let cfg = DiscTrainConfig::new(1, TaskMode::Classification, 1);
        let err = y_randomization_test::<f64>(&[], &[], &[], &cfg, 0).unwrap_err();
        assert_eq!(err, TrainError::NoTrials);
    }

    #[test]
    fn empty_dataset_rejected() {
        let cfg = DiscTrainConfig::new(1, TaskMode::Classification, 1);
        let err = train_discriminator::<f64>(&[], &[], &cfg).unwrap_err();
        assert_eq!(err, TrainError::EmptyDataset);
    }
}
