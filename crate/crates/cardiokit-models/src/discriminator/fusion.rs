//! The three-representation fusion model: GAT graph encoder, fingerprint
//! feed-forward encoder, transformer-feature feed-forward encoder, and the
//! prediction head over their concatenation.

use cardiokit_chem::props::fingerprint::Fingerprint;
use cardiokit_engine::{BatchNormState, Scalar, StreamRng, Tape, Tensor, Var};

use super::features::{MolGraph, ATOM_FEATURES};
use super::gat::{gat_encode, GatLayerParams, TapedGatLayer};

pub const FP_INPUT: usize = 1024;
pub const FEAT_INPUT: usize = 256;
pub const DROPOUT: f64 = 0.5;
const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskMode {
    Classification,
    Regression,
}

/// Linear -> batch norm -> ReLU -> dropout, twice.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<S> {
    pub w1: Tensor<S>,
    pub b1: Tensor<S>,
    pub bn1_gamma: Tensor<S>,
    pub bn1_beta: Tensor<S>,
    pub bn1_state: BatchNormState<S>,
    pub w2: Tensor<S>,
    pub b2: Tensor<S>,
    pub bn2_gamma: Tensor<S>,
    pub bn2_beta: Tensor<S>,
    pub bn2_state: BatchNormState<S>,
}

impl<S: Scalar> EncoderParams<S> {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut StreamRng) -> EncoderParams<S> {
        let normal = |rng: &mut StreamRng, shape: &[usize], std: f64| {
            let data = (0..shape.iter().product::<usize>())
                .map(|_| S::fromf(rng.normal_f64() * std))
                .collect::<Vec<S>>();
            Tensor::new(shape.to_vec(), data)
        };
        EncoderParams {
            w1: normal(rng, &[in_dim, hidden], (2.0 / in_dim as f64).sqrt()),
            b1: Tensor::zeros(&[hidden]),
            bn1_gamma: Tensor::ones(&[hidden]),
            bn1_beta: Tensor::zeros(&[hidden]),
            bn1_state: BatchNormState::new(hidden),
            w2: normal(rng, &[hidden, hidden], (2.0 / hidden as f64).sqrt()),
            b2: Tensor::zeros(&[hidden]),
            bn2_gamma: Tensor::ones(&[hidden]),
            bn2_beta: Tensor::zeros(&[hidden]),
            bn2_state: BatchNormState::new(hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams<S> {
    pub mode: TaskMode,
    pub gat1: GatLayerParams<S>,
    pub gat2: GatLayerParams<S>,
    pub fp_encoder: EncoderParams<S>,
    pub feat_encoder: EncoderParams<S>,
    pub head_w1: Tensor<S>,
    pub head_b1: Tensor<S>,
    pub head_bn_gamma: Tensor<S>,
    pub head_bn_beta: Tensor<S>,
    pub head_bn_state: BatchNormState<S>,
    pub head_w2: Tensor<S>,
    pub head_b2: Tensor<S>,
    pub gat_hidden: usize,
    pub encoder_hidden: usize,
}

impl<S: Scalar> FusionParams<S> {
    /// Defaults: GAT hidden 64 across 4 heads, encoder hiddens 256.
    pub fn init(mode: TaskMode, seed: u64) -> FusionParams<S> {
        FusionParams::init_sized(mode, seed, 64, 4, 256)
    }

    pub fn init_sized(
        mode: TaskMode,
        seed: u64,
        gat_hidden: usize,
        gat_heads: usize,
        encoder_hidden: usize,
    ) -> FusionParams<S> {
        assert_eq!(gat_hidden % gat_heads, 0);
        let mut rng = StreamRng::named(seed, "fusion-init");
        let head_dim = gat_hidden / gat_heads;
        let combined = gat_hidden + 2 * encoder_hidden;
        let normal = |rng: &mut StreamRng, shape: &[usize], std: f64| {
            let data = (0..shape.iter().product::<usize>())
                .map(|_| S::fromf(rng.normal_f64() * std))
                .collect::<Vec<S>>();
            Tensor::new(shape.to_vec(), data)
        };
        FusionParams {
            mode,
            gat1: GatLayerParams::init(ATOM_FEATURES, gat_heads, head_dim, &mut rng),
            gat2: GatLayerParams::init(gat_hidden, gat_heads, head_dim, &mut rng),
            fp_encoder: EncoderParams::init(FP_INPUT, encoder_hidden, &mut rng),
            feat_encoder: EncoderParams::init(FEAT_INPUT, encoder_hidden, &mut rng),
            head_w1: normal(&mut rng, &[combined, encoder_hidden], (2.0 / combined as f64).sqrt()),
            head_b1: Tensor::zeros(&[encoder_hidden]),
            head_bn_gamma: Tensor::ones(&[encoder_hidden]),
            head_bn_beta: Tensor::zeros(&[encoder_hidden]),
            head_bn_state: BatchNormState::new(encoder_hidden),
            head_w2: normal(&mut rng, &[encoder_hidden, 1], (2.0 / encoder_hidden as f64).sqrt()),
            head_b2: Tensor::zeros(&[1]),
            gat_hidden,
            encoder_hidden,
        }
    }

    /// Named tensors, running statistics included (they are model state).
    pub fn named(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        out.extend(self.gat1.named("gat1"));
        out.extend(self.gat2.named("gat2"));
        for (prefix, enc) in [("fp_enc", &self.fp_encoder), ("feat_enc", &self.feat_encoder)] {
            out.push((format!("{prefix}.w1"), &enc.w1));
            out.push((format!("{prefix}.b1"), &enc.b1));
            out.push((format!("{prefix}.bn1_gamma"), &enc.bn1_gamma));
            out.push((format!("{prefix}.bn1_beta"), &enc.bn1_beta));
            out.push((format!("{prefix}.bn1_mean"), &enc.bn1_state.running_mean));
            out.push((format!("{prefix}.bn1_var"), &enc.bn1_state.running_var));
            out.push((format!("{prefix}.w2"), &enc.w2));
            out.push((format!("{prefix}.b2"), &enc.b2));
            out.push((format!("{prefix}.bn2_gamma"), &enc.bn2_gamma));
            out.push((format!("{prefix}.bn2_beta"), &enc.bn2_beta));
            out.push((format!("{prefix}.bn2_mean"), &enc.bn2_state.running_mean));
            out.push((format!("{prefix}.bn2_var"), &enc.bn2_state.running_var));
        }
        out.push(("head.w1".into(), &self.head_w1));
        out.push(("head.b1".into(), &self.head_b1));
        out.push(("head.bn_gamma".into(), &self.head_bn_gamma));
        out.push(("head.bn_beta".into(), &self.head_bn_beta));
        out.push(("head.bn_mean".into(), &self.head_bn_state.running_mean));
        out.push(("head.bn_var".into(), &self.head_bn_state.running_var));
        out.push(("head.w2".into(), &self.head_w2));
        out.push(("head.b2".into(), &self.head_b2));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out = Vec::new();
        out.extend(self.gat1.named_mut("gat1"));
        out.extend(self.gat2.named_mut("gat2"));
        for (prefix, enc) in [
            ("fp_enc", &mut self.fp_encoder),
            ("feat_enc", &mut self.feat_encoder),
        ] {
            out.push((format!("{prefix}.w1"), &mut enc.w1));
            out.push((format!("{prefix}.b1"), &mut enc.b1));
            out.push((format!("{prefix}.bn1_gamma"), &mut enc.bn1_gamma));
            out.push((format!("{prefix}.bn1_beta"), &mut enc.bn1_beta));
            out.push((format!("{prefix}.bn1_mean"), &mut enc.bn1_state.running_mean));
            out.push((format!("{prefix}.bn1_var"), &mut enc.bn1_state.running_var));
            out.push((format!("{prefix}.w2"), &mut enc.w2));
            out.push((format!("{prefix}.b2"), &mut enc.b2));
            out.push((format!("{prefix}.bn2_gamma"), &mut enc.bn2_gamma));
            out.push((format!("{prefix}.bn2_beta"), &mut enc.bn2_beta));
            out.push((format!("{prefix}.bn2_mean"), &mut enc.bn2_state.running_mean));
            out.push((format!("{prefix}.bn2_var"), &mut enc.bn2_state.running_var));
        }
        out.push(("head.w1".into(), &mut self.head_w1));
        out.push(("head.b1".into(), &mut self.head_b1));
        out.push(("head.bn_gamma".into(), &mut self.head_bn_gamma));
        out.push(("head.bn_beta".into(), &mut self.head_bn_beta));
        out.push(("head.bn_mean".into(), &mut self.head_bn_state.running_mean));
        out.push(("head.bn_var".into(), &mut self.head_bn_state.running_var));
        out.push(("head.w2".into(), &mut self.head_w2));
        out.push(("head.b2".into(), &mut self.head_b2));
        out
    }

    /// Trainable tensors in the exact order `fusion_forward` leafs them:
    /// gat1 (5), gat2 (5), fp encoder (8), feat encoder (8), head (6).
    pub fn trainable(&self) -> Vec<Tensor<S>> {
        let mut out = vec![
            self.gat1.w.clone(),
            self.gat1.b.clone(),
            self.gat1.attn_src.clone(),
            self.gat1.attn_dst.clone(),
            self.gat1.bond_bias.clone(),
            self.gat2.w.clone(),
            self.gat2.b.clone(),
            self.gat2.attn_src.clone(),
            self.gat2.attn_dst.clone(),
            self.gat2.bond_bias.clone(),
        ];
        for enc in [&self.fp_encoder, &self.feat_encoder] {
            out.extend([
                enc.w1.clone(),
                enc.b1.clone(),
                enc.bn1_gamma.clone(),
                enc.bn1_beta.clone(),
                enc.w2.clone(),
                enc.b2.clone(),
                enc.bn2_gamma.clone(),
                enc.bn2_beta.clone(),
            ]);
        }
        out.extend([
            self.head_w1.clone(),
            self.head_b1.clone(),
            self.head_bn_gamma.clone(),
            self.head_bn_beta.clone(),
            self.head_w2.clone(),
            self.head_b2.clone(),
        ]);
        out
    }

    pub fn set_trainable(&mut self, tensors: Vec<Tensor<S>>) {
        assert_eq!(tensors.len(), 32);
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        self.gat1.w = next();
        self.gat1.b = next();
        self.gat1.attn_src = next();
        self.gat1.attn_dst = next();
        self.gat1.bond_bias = next();
        self.gat2.w = next();
        self.gat2.b = next();
        self.gat2.attn_src = next();
        self.gat2.attn_dst = next();
        self.gat2.bond_bias = next();
        for k in 0..2 {
            let enc = if k == 0 {
                &mut self.fp_encoder
            } else {
                &mut self.feat_encoder
            };
            enc.w1 = next();
            enc.b1 = next();
            enc.bn1_gamma = next();
            enc.bn1_beta = next();
            enc.w2 = next();
            enc.b2 = next();
            enc.bn2_gamma = next();
            enc.bn2_beta = next();
        }
        self.head_w1 = next();
        self.head_b1 = next();
        self.head_bn_gamma = next();
        self.head_bn_beta = next();
        self.head_w2 = next();
        self.head_b2 = next();
    }

    /// Positions of weight matrices within [`FusionParams::trainable`],
    /// the tensors the L1 penalty applies to.
    pub const WEIGHT_INDICES: [usize; 8] = [0, 5, 10, 14, 18, 22, 26, 30];
}

/// One sample's three representations.
#[derive(Debug, Clone)]
pub struct FusionSample {
    pub graph: MolGraph,
    pub fingerprint: Fingerprint,
    /// 256-d transformer feature vector.
    pub features: Vec<f64>,
}

impl FusionSample {
    pub fn fingerprint_dense<S: Scalar>(&self) -> Vec<S> {
        (0..self.fingerprint.len())
            .map(|b| {
                if self.fingerprint.get(b) {
                    S::one()
                } else {
                    S::zero()
                }
            })
            .collect()
    }
}

/// Forward pass over a batch of samples; returns raw head outputs [B].
/// Classification applies the sigmoid outside the tape at inference time.
#[allow(clippy::too_many_arguments)]
pub fn fusion_forward<S: Scalar>(
    tape: &mut Tape<S>,
    params: &mut FusionParams<S>,
    samples: &[FusionSample],
    trainable: bool,
    rng: &mut StreamRng,
) -> (Var, Vec<Var>) {
    assert!(!samples.is_empty());
    let gat1 = TapedGatLayer::leaf(tape, &params.gat1, trainable);
    let gat2 = TapedGatLayer::leaf(tape, &params.gat2, trainable);

    // graph encodings stacked to [B, gat_hidden]
    let pooled: Vec<Var> = samples
        .iter()
        .map(|s| {
            let e = gat_encode(tape, &gat1, &gat2, &s.graph);
            tape.reshape(e, vec![1, params.gat_hidden])
        })
        .collect();
    let graph_enc = if pooled.len() == 1 {
        pooled[0]
    } else {
        tape.concat(&pooled, 0)
    };

    let fp_matrix = Tensor::new(
        vec![samples.len(), FP_INPUT],
        samples
            .iter()
            .flat_map(|s| s.fingerprint_dense::<S>())
            .collect(),
    );
    let feat_matrix = Tensor::new(
        vec![samples.len(), FEAT_INPUT],
        samples
            .iter()
            .flat_map(|s| s.features.iter().map(|&v| S::fromf(v)))
            .collect(),
    );
    let fp_in = tape.constant(fp_matrix);
    let feat_in = tape.constant(feat_matrix);

    let mut vars_acc: Vec<Var> = gat1.vars();
    vars_acc.extend(gat2.vars());

    let (fp_out, fp_vars) = encoder_forward(tape, &mut params.fp_encoder, fp_in, trainable, rng);
    let (feat_out, feat_vars) =
        encoder_forward(tape, &mut params.feat_encoder, feat_in, trainable, rng);
    vars_acc.extend(&fp_vars);
    vars_acc.extend(&feat_vars);

    let combined = tape.concat(&[graph_enc, fp_out, feat_out], 1);
    let head_w1 = tape.leaf(params.head_w1.clone(), trainable);
    let head_b1 = tape.leaf(params.head_b1.clone(), trainable);
    let bn_gamma = tape.leaf(params.head_bn_gamma.clone(), trainable);
    let bn_beta = tape.leaf(params.head_bn_beta.clone(), trainable);
    let head_w2 = tape.leaf(params.head_w2.clone(), trainable);
    let head_b2 = tape.leaf(params.head_b2.clone(), trainable);

    let h = tape.matmul(combined, head_w1);
    let h = tape.add_row(h, head_b1);
    let h = tape.batch_norm(h, bn_gamma, bn_beta, &mut params.head_bn_state, BN_EPS);
    let h = tape.relu(h);
    let h = tape.dropout(h, DROPOUT, rng);
    let out = tape.matmul(h, head_w2);
    let out = tape.add_row(out, head_b2);
    let out = tape.reshape(out, vec![samples.len()]);

    vars_acc.extend([head_w1, head_b1, bn_gamma, bn_beta, head_w2, head_b2]);
    (out, vars_acc)
}

/// Two (linear -> batch norm -> ReLU -> dropout 0.5) stages.
fn encoder_forward<S: Scalar>(
    tape: &mut Tape<S>,
    enc: &mut EncoderParams<S>,
    input: Var,
    trainable: bool,
    rng: &mut StreamRng,
) -> (Var, Vec<Var>) {
    let w1 = tape.leaf(enc.w1.clone(), trainable);
    let b1 = tape.leaf(enc.b1.clone(), trainable);
    let g1 = tape.leaf(enc.bn1_gamma.clone(), trainable);
    let be1 = tape.leaf(enc.bn1_beta.clone(), trainable);
    let w2 = tape.leaf(enc.w2.clone(), trainable);
    let b2 = tape.leaf(enc.b2.clone(), trainable);
    let g2 = tape.leaf(enc.bn2_gamma.clone(), trainable);
    let be2 = tape.leaf(enc.bn2_beta.clone(), trainable);

    let h = tape.matmul(input, w1);
    let h = tape.add_row(h, b1);
    let h = tape.batch_norm(h, g1, be1, &mut enc.bn1_state, BN_EPS);
    let h = tape.relu(h);
    let h = tape.dropout(h, DROPOUT, rng);
    let h = tape.matmul(h, w2);
    let h = tape.add_row(h, b2);
    let h = tape.batch_norm(h, g2, be2, &mut enc.bn2_state, BN_EPS);
    let h = tape.relu(h);
    let h = tape.dropout(h, DROPOUT, rng);
    (h, vec![w1, b1, g1, be1, w2, b2, g2, be2])
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inference on a batch: deterministic (dropout off, running statistics).
/// Classification mode returns sigmoid probabilities; regression returns
/// raw predicted pIC50 values.
pub fn predict<S: Scalar>(params: &mut FusionParams<S>, samples: &[FusionSample]) -> Vec<f64> {
    let mut tape = Tape::new(false);
    let mut rng = StreamRng::named(0, "fusion-inference");
    let (out, _) = fusion_forward(&mut tape, params, samples, false, &mut rng);
    let raw: Vec<f64> = tape.value(out).data().iter().map(|v| v.tof()).collect();
    match params.mode {
        TaskMode::Classification => raw.into_iter().map(sigmoid).collect(),
        TaskMode::Regression => raw,
    }
}
