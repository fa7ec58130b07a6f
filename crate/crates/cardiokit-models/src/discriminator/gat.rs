//! Two-layer graph attention encoder with self-loops, per-bond-class
//! attention bias and global add pooling.

use cardiokit_engine::{Scalar, StreamRng, Tape, Tensor, Var};

use super::features::{MolGraph, ATOM_FEATURES, BOND_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayerParams<S> {
    /// [in_dim, heads * head_dim]
    pub w: Tensor<S>,
    pub b: Tensor<S>,
    /// [heads, head_dim] source-side attention vectors.
    pub attn_src: Tensor<S>,
    /// [heads, head_dim] destination-side attention vectors.
    pub attn_dst: Tensor<S>,
    /// [heads, BOND_CLASSES] learned per-bond-class logit offsets.
    pub bond_bias: Tensor<S>,
    pub heads: usize,
    pub head_dim: usize,
}

impl<S: Scalar> GatLayerParams<S> {
    pub fn init(in_dim: usize, heads: usize, head_dim: usize, rng: &mut StreamRng) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        let normal = |rng: &mut StreamRng, shape: &[usize], std: f64| {
            let data = (0..shape.iter().product::<usize>())
                .map(|_| S::fromf(rng.normal_f64() * std))
                .collect();
            Tensor::new(shape.to_vec(), data)
        };
        GatLayerParams {
            w: normal(rng, &[in_dim, heads * head_dim], std),
            b: Tensor::zeros(&[heads * head_dim]),
            attn_src: normal(rng, &[heads, head_dim], 0.1),
            attn_dst: normal(rng, &[heads, head_dim], 0.1),
            bond_bias: Tensor::zeros(&[heads, BOND_CLASSES]),
            heads,
            head_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor<S>)> {
        vec![
            (format!("{prefix}.w"), &self.w),
            (format!("{prefix}.b"), &self.b),
            (format!("{prefix}.attn_src"), &self.attn_src),
            (format!("{prefix}.attn_dst"), &self.attn_dst),
            (format!("{prefix}.bond_bias"), &self.bond_bias),
        ]
    }

    pub fn named_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor<S>)> {
        vec![
            (format!("{prefix}.w"), &mut self.w),
            (format!("{prefix}.b"), &mut self.b),
            (format!("{prefix}.attn_src"), &mut self.attn_src),
            (format!("{prefix}.attn_dst"), &mut self.attn_dst),
            (format!("{prefix}.bond_bias"), &mut self.bond_bias),
        ]
    }
}

pub struct TapedGatLayer {
    pub w: Var,
    pub b: Var,
    pub attn_src: Var,
    pub attn_dst: Var,
    pub bond_bias: Var,
    pub heads: usize,
    pub head_dim: usize,
}

impl TapedGatLayer {
    pub fn leaf<S: Scalar>(
        tape: &mut Tape<S>,
        params: &GatLayerParams<S>,
        trainable: bool,
    ) -> TapedGatLayer {
        TapedGatLayer {
            w: tape.leaf(params.w.clone(), trainable),
            b: tape.leaf(params.b.clone(), trainable),
            attn_src: tape.leaf(params.attn_src.clone(), trainable),
            attn_dst: tape.leaf(params.attn_dst.clone(), trainable),
            bond_bias: tape.leaf(params.bond_bias.clone(), trainable),
            heads: params.heads,
            head_dim: params.head_dim,
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        vec![self.w, self.b, self.attn_src, self.attn_dst, self.bond_bias]
    }
}

const MASK_VALUE: f64 = -1e9;

/// leaky_relu(x) = relu(x) - 0.2 relu(-x), composed from primitives.
fn leaky_relu<S: Scalar>(tape: &mut Tape<S>, x: Var) -> Var {
    let pos = tape.relu(x);
    let negated = tape.scale(x, S::fromf(-1.0));
    let neg = tape.relu(negated);
    let neg_scaled = tape.scale(neg, S::fromf(-0.2));
    tape.add(pos, neg_scaled)
}

/// One GAT layer over one graph:
/// transformed = x W + b, per-head attention logits
/// e(dst, src) = leaky_relu(a_dst . h_dst + a_src . h_src) + bond_bias[class],
/// softmax over each destination's in-neighbourhood (self-loop included),
/// weighted aggregation of transformed source features.
pub fn gat_layer_forward<S: Scalar>(
    tape: &mut Tape<S>,
    layer: &TapedGatLayer,
    x: Var,
    graph: &MolGraph,
) -> Var {
    let n = graph.n_nodes;
    let h = tape.matmul(x, layer.w);
    let h = tape.add_row(h, layer.b);

    // [n, n] additive mask: 0 on (dst, src) edges, -1e9 elsewhere
    let mask = {
        let mut m = Tensor::full(&[n, n], S::fromf(MASK_VALUE));
        for &(dst, src, _) in &graph.edges {
            m.set2(dst, src, S::zero());
        }
        tape.constant(m)
    };
    let cells: Vec<(usize, usize, usize)> = graph
        .edges
        .iter()
        .map(|&(dst, src, class)| (dst, src, class as usize))
        .collect();

    let mut heads = Vec::with_capacity(layer.heads);
    for head in 0..layer.heads {
        let hh = tape.narrow(h, 1, head * layer.head_dim, layer.head_dim);
        let a_src = tape.narrow(layer.attn_src, 0, head, 1);
        let a_src = tape.reshape(a_src, vec![layer.head_dim, 1]);
        let a_dst = tape.narrow(layer.attn_dst, 0, head, 1);
        let a_dst = tape.reshape(a_dst, vec![layer.head_dim, 1]);

        let src_term = tape.matmul(hh, a_src);
        let src_term = tape.reshape(src_term, vec![n]);
        let dst_term = tape.matmul(hh, a_dst);
        let dst_term = tape.reshape(dst_term, vec![n]);

        // logits[dst][src] = a_dst.h_dst + a_src.h_src
        let raw = tape.outer_add(dst_term, src_term);
        let raw = leaky_relu(tape, raw);
        let bias_row = tape.narrow(layer.bond_bias, 0, head, 1);
        let bias_row = tape.reshape(bias_row, vec![BOND_CLASSES]);
        let bond = tape.class_scatter(bias_row, &cells, (n, n));
        let logits = tape.add(raw, bond);
        let masked = tape.add(logits, mask);
        let attn = tape.softmax(masked);
        heads.push(tape.matmul(attn, hh));
    }
    tape.concat(&heads, 1)
}

/// Runs both GAT layers with ReLU between, then global add pooling; returns
/// the per-graph embedding [out_dim].
pub fn gat_encode<S: Scalar>(
    tape: &mut Tape<S>,
    layer1: &TapedGatLayer,
    layer2: &TapedGatLayer,
    graph: &MolGraph,
) -> Var {
    let x = tape.constant(Tensor::new(
        vec![graph.n_nodes, ATOM_FEATURES],
        graph.node_features.iter().map(|&v| S::fromf(v)).collect(),
    ));
    let h1 = gat_layer_forward(tape, layer1, x, graph);
    let h1 = tape.relu(h1);
    let h2 = gat_layer_forward(tape, layer2, h1, graph);
    let h2 = tape.relu(h2);
    tape.sum_axis0(h2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::features::featurize_graph;
    use cardiokit_chem::smiles::parse;

    fn layer(in_dim: usize, seed: u64) -> GatLayerParams<f64> {
        let mut rng = StreamRng::named(seed, "gat-test");
        GatLayerParams::init(in_dim, 4, 16, &mut rng)
    }

    #[test]
    fn single_node_attention_is_one() {
        let graph = featurize_graph(&parse("C").unwrap());
        let params = layer(ATOM_FEATURES, 1);
        let mut tape = Tape::<f64>::new(false);
        let taped = TapedGatLayer::leaf(&mut tape, &params, false);
        let x = tape.constant(Tensor::new(
            vec![1, ATOM_FEATURES],
            graph.node_features.clone(),
        ));
        // reproduce the attention matrix of head 0 by hand
        let out = gat_layer_forward(&mut tape, &taped, x, &graph);
        // with a single node the aggregation equals the transformed features
        let h = Tensor::new(vec![1, ATOM_FEATURES], graph.node_features.clone())
            .matmul(&params.w);
        let got = tape.value(out);
        for c in 0..h.cols() {
            assert!((got.at2(0, c) - (h.at2(0, c) + params.b.data()[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        // checked indirectly: aggregation of constant features over any
        // neighbourhood equals those features exactly when softmax rows
        // sum to 1
        let graph = featurize_graph(&parse("CCO").unwrap());
        let mut params = layer(ATOM_FEATURES, 2);
        // constant transform: every node maps to the same vector
        params.w = Tensor::zeros(&[ATOM_FEATURES, 64]);
        params.b = Tensor::ones(&[64]);
        let mut tape = Tape::<f64>::new(false);
        let taped = TapedGatLayer::leaf(&mut tape, &params, false);
        let x = tape.constant(Tensor::new(
            vec![graph.n_nodes, ATOM_FEATURES],
            graph.node_features.clone(),
        ));
        let out = gat_layer_forward(&mut tape, &taped, x, &graph);
        let got = tape.value(out);
        for r in 0..graph.n_nodes {
            for c in 0..64 {
                assert!((got.at2(r, c) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn add_pooling_is_sum_of_node_vectors() {
        let graph = featurize_graph(&parse("CC").unwrap());
        let l1 = layer(ATOM_FEATURES, 3);
        let l2 = layer(64, 4);
        let mut tape = Tape::<f64>::new(false);
        let t1 = TapedGatLayer::leaf(&mut tape, &l1, false);
        let t2 = TapedGatLayer::leaf(&mut tape, &l2, false);
        let pooled = gat_encode(&mut tape, &t1, &t2, &graph);

        // recompute the two node vectors and sum by hand
        let x = tape.constant(Tensor::new(
            vec![graph.n_nodes, ATOM_FEATURES],
            graph.node_features.clone(),
        ));
        let h1 = gat_layer_forward(&mut tape, &t1, x, &graph);
        let h1 = tape.relu(h1);
        let h2 = gat_layer_forward(&mut tape, &t2, h1, &graph);
        let h2 = tape.relu(h2);
        let manual: Vec<f64> = (0..64)
            .map(|c| tape.value(h2).at2(0, c) + tape.value(h2).at2(1, c))
            .collect();
        for (a, b) in tape.value(pooled).data().iter().zip(&manual) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn node_permutation_equivariance_of_pooling() {
        use cardiokit_chem::smiles::molecule::{Bond, Molecule};
        let mol = parse("CC(=O)Oc1ccccc1").unwrap();
        let graph = featurize_graph(&mol);
        let l1 = layer(ATOM_FEATURES, 5);
        let l2 = layer(64, 6);

        let pool = |g: &MolGraph| -> Vec<f64> {
            let mut tape = Tape::<f64>::new(false);
            let t1 = TapedGatLayer::leaf(&mut tape, &l1, false);
            let t2 = TapedGatLayer::leaf(&mut tape, &l2, false);
            let out = gat_encode(&mut tape, &t1, &t2, g);
            tape.value(out).data().to_vec()
        };
        let base = pool(&graph);

        // reverse the atom order and re-featurize
        let n = mol.atom_count();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut atoms = vec![mol.atoms[0].clone(); n];
        for (old, a) in mol.atoms.iter().enumerate() {
            let mut a2 = a.clone();
            a2.index = perm[old];
            atoms[perm[old]] = a2;
        }
        let bonds = mol
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        let permuted = featurize_graph(&Molecule::new(atoms, bonds));
        let other = pool(&permuted);
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
