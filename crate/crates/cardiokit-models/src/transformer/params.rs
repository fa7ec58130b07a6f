//! Learnable parameters for the transformer models.

use cardiokit_engine::{Scalar, StreamRng, Tensor};

use super::config::TransformerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<S> {
    pub ln1_gamma: Tensor<S>,
    pub ln1_beta: Tensor<S>,
    pub w_q: Tensor<S>,
    pub b_q: Tensor<S>,
    pub w_k: Tensor<S>,
    pub b_k: Tensor<S>,
    pub w_v: Tensor<S>,
    pub b_v: Tensor<S>,
    pub w_o: Tensor<S>,
    pub b_o: Tensor<S>,
    pub ln2_gamma: Tensor<S>,
    pub ln2_beta: Tensor<S>,
    pub w_ff1: Tensor<S>,
    pub b_ff1: Tensor<S>,
    pub w_ff2: Tensor<S>,
    pub b_ff2: Tensor<S>,
}

/// Whether the model is the conditioned next-token generator or the
/// bidirectional masked model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformerKind {
    Autoregressive,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams<S> {
    pub kind: TransformerKind,
    pub tok_emb: Tensor<S>,
    pub pos_emb: Tensor<S>,
    /// Scaffold embedding table (autoregressive only).
    pub scaffold_emb: Option<Tensor<S>>,
    /// Property projection to d_model (autoregressive only).
    pub prop_w: Option<Tensor<S>>,
    pub prop_b: Option<Tensor<S>>,
    pub blocks: Vec<BlockParams<S>>,
    pub ln_f_gamma: Tensor<S>,
    pub ln_f_beta: Tensor<S>,
    pub head_w: Tensor<S>,
    pub head_b: Tensor<S>,
}

fn init_normal<S: Scalar>(rng: &mut StreamRng, shape: &[usize], std: f64) -> Tensor<S> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| S::fromf(rng.normal_f64() * std))
        .collect();
    Tensor::new(shape.to_vec(), data)
}

impl<S: Scalar> TransformerParams<S> {
    pub fn init(config: &TransformerConfig, kind: TransformerKind, rng: &mut StreamRng) -> Self {
        config.validate();
        let d = config.d_model;
        let v = config.vocab_size;
        let f = config.ffn_dim();
        let std = 0.02;
        let conditioned = kind == TransformerKind::Autoregressive;
        let blocks = (0..config.n_blocks)
            .map(|_| BlockParams {
                ln1_gamma: Tensor::ones(&[d]),
                ln1_beta: Tensor::zeros(&[d]),
                w_q: init_normal(rng, &[d, d], std),
                b_q: Tensor::zeros(&[d]),
                w_k: init_normal(rng, &[d, d], std),
                b_k: Tensor::zeros(&[d]),
                w_v: init_normal(rng, &[d, d], std),
                b_v: Tensor::zeros(&[d]),
                w_o: init_normal(rng, &[d, d], std),
                b_o: Tensor::zeros(&[d]),
                ln2_gamma: Tensor::ones(&[d]),
                ln2_beta: Tensor::zeros(&[d]),
                w_ff1: init_normal(rng, &[d, f], std),
                b_ff1: Tensor::zeros(&[f]),
                w_ff2: init_normal(rng, &[f, d], std),
                b_ff2: Tensor::zeros(&[d]),
            })
            .collect();
        TransformerParams {
            kind,
            tok_emb: init_normal(rng, &[v, d], std),
            pos_emb: init_normal(rng, &[config.block_size, d], std),
            // conditioning enters as an additive signal shared by every
            // position; a larger initial scale keeps it salient next to the
            // token embeddings so binding is learnable quickly
            scaffold_emb: conditioned.then(|| init_normal(rng, &[v, d], 5.0 * std)),
            prop_w: conditioned.then(|| init_normal(rng, &[config.n_properties, d], 10.0 * std)),
            prop_b: conditioned.then(|| Tensor::zeros(&[d])),
            blocks,
            ln_f_gamma: Tensor::ones(&[d]),
            ln_f_beta: Tensor::zeros(&[d]),
            head_w: init_normal(rng, &[d, v], std),
            head_b: Tensor::zeros(&[v]),
        }
    }

    /// Flat named view for optimizers and checkpoints. Order is stable.
    pub fn named(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out: Vec<(String, &Tensor<S>)> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
        ];
        if let Some(t) = &self.scaffold_emb {
            out.push(("scaffold_emb".into(), t));
        }
        if let Some(t) = &self.prop_w {
            out.push(("prop_w".into(), t));
        }
        if let Some(t) = &self.prop_b {
            out.push(("prop_b".into(), t));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, t) in [
                ("ln1_gamma", &b.ln1_gamma),
                ("ln1_beta", &b.ln1_beta),
                ("w_q", &b.w_q),
                ("b_q", &b.b_q),
                ("w_k", &b.w_k),
                ("b_k", &b.b_k),
                ("w_v", &b.w_v),
                ("b_v", &b.b_v),
                ("w_o", &b.w_o),
                ("b_o", &b.b_o),
                ("ln2_gamma", &b.ln2_gamma),
                ("ln2_beta", &b.ln2_beta),
                ("w_ff1", &b.w_ff1),
                ("b_ff1", &b.b_ff1),
                ("w_ff2", &b.w_ff2),
                ("b_ff2", &b.b_ff2),
            ] {
                out.push((format!("block{i}.{name}"), t));
            }
        }
        out.push(("ln_f_gamma".into(), &self.ln_f_gamma));
        out.push(("ln_f_beta".into(), &self.ln_f_beta));
        out.push(("head_w".into(), &self.head_w));
        out.push(("head_b".into(), &self.head_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out: Vec<(String, &mut Tensor<S>)> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
        ];
        if let Some(t) = &mut self.scaffold_emb {
            out.push(("scaffold_emb".into(), t));
        }
        if let Some(t) = &mut self.prop_w {
            out.push(("prop_w".into(), t));
        }
        if let Some(t) = &mut self.prop_b {
            out.push(("prop_b".into(), t));
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (name, t) in [
                ("ln1_gamma", &mut b.ln1_gamma),
                ("ln1_beta", &mut b.ln1_beta),
                ("w_q", &mut b.w_q),
                ("b_q", &mut b.b_q),
                ("w_k", &mut b.w_k),
                ("b_k", &mut b.b_k),
                ("w_v", &mut b.w_v),
                ("b_v", &mut b.b_v),
                ("w_o", &mut b.w_o),
                ("b_o", &mut b.b_o),
                ("ln2_gamma", &mut b.ln2_gamma),
                ("ln2_beta", &mut b.ln2_beta),
                ("w_ff1", &mut b.w_ff1),
                ("b_ff1", &mut b.b_ff1),
                ("w_ff2", &mut b.w_ff2),
                ("b_ff2", &mut b.b_ff2),
            ] {
                out.push((format!("block{i}.{name}"), t));
            }
        }
        out.push(("ln_f_gamma".into(), &mut self.ln_f_gamma));
        out.push(("ln_f_beta".into(), &mut self.ln_f_beta));
        out.push(("head_w".into(), &mut self.head_w));
        out.push(("head_b".into(), &mut self.head_b));
        out
    }

    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn tensors(&self) -> Vec<Tensor<S>> {
        self.named().into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn set_tensors(&mut self, tensors: Vec<Tensor<S>>) {
        let mut slots = self.named_mut();
        assert_eq!(slots.len(), tensors.len());
        for (slot, value) in slots.iter_mut().zip(tensors) {
            assert_eq!(slot.1.shape(), value.shape(), "{}", slot.0);
            *slot.1 = value;
        }
    }
}
