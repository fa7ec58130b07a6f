//! Central-difference gradient checks for every differentiable primitive.
//!
//! Each op is exercised on at least five random shapes at f64; backward
//! output must match (f(x+h) - f(x-h)) / 2h with relative error below 1e-4
//! (h = 1e-5). Non-scalar outputs are reduced through a fixed random linear
//! functional so the check covers the full Jacobian action.

use cardiokit_engine::rng::StreamRng;
use cardiokit_engine::tape::{Tape, Var, IGNORE_TARGET};
use cardiokit_engine::tensor::Tensor;
use cardiokit_engine::BatchNormState;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const ABS_TOL: f64 = 1e-7;

fn random_tensor(rng: &mut StreamRng, shape: &[usize], avoid_kink: bool) -> Tensor<f64> {
    let data: Vec<f64> = (0..shape.iter().product())
        .map(|_| {
            let mut v: f64 = rng.normal();
            if avoid_kink {
                while v.abs() < 0.05 {
                    v = rng.normal();
                }
            }
            v
        })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

/// Builds the graph from leaves, reduces to a scalar and checks every input
/// element's gradient against central differences.
fn check_op(
    name: &str,
    inputs: &[Tensor<f64>],
    build: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) {
    let forward = |tensors: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new(true);
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };

    let mut tape = Tape::new(true);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars);
    assert_eq!(tape.value(out).numel(), 1, "{name}: output must be scalar");
    let grads = tape.backward(out);

    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i], &tape);
        for e in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += H;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= H;
            let numeric = (forward(&plus) - forward(&minus)) / (2.0 * H);
            let ana = analytic.data()[e];
            let denom = ana.abs().max(numeric.abs()).max(1e-6);
            let rel = (ana - numeric).abs() / denom;
            assert!(
                rel < REL_TOL || (ana - numeric).abs() < ABS_TOL,
                "{name}: input {i} elem {e}: analytic {ana} vs numeric {numeric} (rel {rel:.2e})"
            );
        }
    }
}

/// Reduces a non-scalar output with a fixed random weighting.
fn weighted_sum(tape: &mut Tape<f64>, out: Var, rng_tag: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let mut wrng = StreamRng::named(rng_tag, "grad-check-weights");
    let weights = random_tensor(&mut wrng, &shape, false);
    let w = tape.constant(weights);
    let prod = tape.mul(out, w);
    tape.sum_all(prod)
}

fn shapes(seed: u64) -> Vec<(usize, usize)> {
    let mut rng = StreamRng::named(seed, "grad-check-shapes");
    (0..5)
        .map(|_| (2 + rng.below(4), 2 + rng.below(4)))
        .collect()
}

#[test]
fn grad_matmul() {
    let mut rng = StreamRng::named(11, "gc");
    for (i, (m, k)) in shapes(11).into_iter().enumerate() {
        let n = 2 + (i % 3);
        let a = random_tensor(&mut rng, &[m, k], false);
        let b = random_tensor(&mut rng, &[k, n], false);
        check_op("matmul", &[a, b], |t, v| {
            let c = t.matmul(v[0], v[1]);
            weighted_sum(t, c, 100 + i as u64)
        });
    }
}

#[test]
fn grad_add_and_mul_and_scale() {
    let mut rng = StreamRng::named(12, "gc");
    for (i, (m, n)) in shapes(12).into_iter().enumerate() {
        let a = random_tensor(&mut rng, &[m, n], false);
        let b = random_tensor(&mut rng, &[m, n], false);
        check_op("add", &[a.clone(), b.clone()], |t, v| {
            let c = t.add(v[0], v[1]);
            weighted_sum(t, c, 200 + i as u64)
        });
        check_op("mul", &[a.clone(), b], |t, v| {
            let c = t.mul(v[0], v[1]);
            weighted_sum(t, c, 300 + i as u64)
        });
        check_op("scale", &[a], |t, v| {
            let c = t.scale(v[0], -1.7);
            weighted_sum(t, c, 400 + i as u64)
        });
    }
}

#[test]
fn grad_add_row() {
    let mut rng = StreamRng::named(13, "gc");
    for (i, (m, n)) in shapes(13).into_iter().enumerate() {
        let x = random_tensor(&mut rng, &[m, n], false);
        let b = random_tensor(&mut rng, &[n], false);
        check_op("add_row", &[x, b], |t, v| {
            let c = t.add_row(v[0], v[1]);
            weighted_sum(t, c, 500 + i as u64)
        });
    }
}

#[test]
fn grad_concat_narrow_transpose_reshape() {
    let mut rng = StreamRng::named(14, "gc");
    for (i, (m, n)) in shapes(14).into_iter().enumerate() {
        let a = random_tensor(&mut rng, &[m, n], false);
        let b = random_tensor(&mut rng, &[m, n], false);
        let axis = i % 2;
        check_op("concat", &[a.clone(), b.clone()], |t, v| {
            let c = t.concat(&[v[0], v[1]], axis);
            weighted_sum(t, c, 600 + i as u64)
        });
        check_op("narrow", &[a.clone()], |t, v| {
            let c = t.narrow(v[0], axis, 1, if axis == 0 { m - 1 } else { n - 1 });
            weighted_sum(t, c, 700 + i as u64)
        });
        check_op("transpose", &[a.clone()], |t, v| {
            let c = t.transpose(v[0]);
            weighted_sum(t, c, 800 + i as u64)
        });
        check_op("reshape", &[a], |t, v| {
            let c = t.reshape(v[0], vec![n * m]);
            weighted_sum(t, c, 900 + i as u64)
        });
    }
}

#[test]
fn grad_embedding_lookup() {
    let mut rng = StreamRng::named(15, "gc");
    for (i, (v_rows, d)) in shapes(15).into_iter().enumerate() {
        let table = random_tensor(&mut rng, &[v_rows + 2, d], false);
        let ids: Vec<usize> = (0..4 + i).map(|_| rng.below(v_rows + 2)).collect();
        check_op("embedding_lookup", &[table], |t, v| {
            let c = t.embedding_lookup(v[0], &ids);
            weighted_sum(t, c, 1000 + i as u64)
        });
    }
}

#[test]
fn grad_activations() {
    let mut rng = StreamRng::named(16, "gc");
    for (i, (m, n)) in shapes(16).into_iter().enumerate() {
        let x = random_tensor(&mut rng, &[m, n], true);
        check_op("relu", &[x.clone()], |t, v| {
            let c = t.relu(v[0]);
            weighted_sum(t, c, 1100 + i as u64)
        });
        check_op("gelu", &[x.clone()], |t, v| {
            let c = t.gelu(v[0]);
            weighted_sum(t, c, 1200 + i as u64)
        });
        check_op("softmax", &[x], |t, v| {
            let c = t.softmax(v[0]);
            weighted_sum(t, c, 1300 + i as u64)
        });
    }
}

#[test]
fn grad_layer_norm() {
    let mut rng = StreamRng::named(17, "gc");
    for (i, (m, n)) in shapes(17).into_iter().enumerate() {
        let n = n + 1; // avoid width-2 degeneracy amplifying fd noise
        let x = random_tensor(&mut rng, &[m, n], false);
        let gamma = random_tensor(&mut rng, &[n], true);
        let beta = random_tensor(&mut rng, &[n], false);
        check_op("layer_norm", &[x, gamma, beta], |t, v| {
            let c = t.layer_norm(v[0], v[1], v[2], 1e-5);
            weighted_sum(t, c, 1400 + i as u64)
        });
    }
}

#[test]
fn grad_batch_norm_training() {
    let mut rng = StreamRng::named(18, "gc");
    for (i, (m, n)) in shapes(18).into_iter().enumerate() {
        let m = m + 1; // batch >= 3 keeps batch statistics well-conditioned
        let x = random_tensor(&mut rng, &[m, n], false);
        let gamma = random_tensor(&mut rng, &[n], true);
        let beta = random_tensor(&mut rng, &[n], false);
        check_op("batch_norm", &[x, gamma, beta], |t, v| {
            let mut state = BatchNormState::new(t.value(v[0]).cols());
            let c = t.batch_norm(v[0], v[1], v[2], &mut state, 1e-5);
            weighted_sum(t, c, 1500 + i as u64)
        });
    }
}

#[test]
fn grad_dropout_fixed_mask() {
    let mut rng = StreamRng::named(19, "gc");
    for (i, (m, n)) in shapes(19).into_iter().enumerate() {
        let x = random_tensor(&mut rng, &[m, n], false);
        check_op("dropout", &[x], |t, v| {
            // fresh stream per forward, same seed => identical mask
            let mut drng = StreamRng::named(42 + i as u64, "gc-dropout");
            let c = t.dropout(v[0], 0.3, &mut drng);
            weighted_sum(t, c, 1600 + i as u64)
        });
    }
}

#[test]
fn grad_losses() {
    let mut rng = StreamRng::named(20, "gc");
    for (i, (m, v_dim)) in shapes(20).into_iter().enumerate() {
        let v_dim = v_dim + 2;
        let logits = random_tensor(&mut rng, &[m, v_dim], false);
        let mut targets: Vec<usize> = (0..m).map(|_| rng.below(v_dim)).collect();
        if i % 2 == 0 && m > 2 {
            targets[1] = IGNORE_TARGET;
        }
        check_op("cross_entropy", &[logits], |t, v| t.cross_entropy(v[0], &targets));

        let pred = random_tensor(&mut rng, &[m], false);
        let target = random_tensor(&mut rng, &[m], false);
        check_op("mse", &[pred.clone()], |t, v| t.mse(v[0], &target));

        let bce_target = Tensor::new(
            vec![m],
            (0..m).map(|_| f64::from(u8::from(rng.bernoulli(0.5)))).collect(),
        );
        check_op("bce_logits", &[pred], |t, v| t.bce_logits(v[0], &bce_target));

        let x = random_tensor(&mut rng, &[m, v_dim], true);
        check_op("l1_penalty", &[x], |t, v| t.l1_penalty(v[0], 1e-2));
    }
}

#[test]
fn grad_reductions_and_graph_helpers() {
    let mut rng = StreamRng::named(21, "gc");
    for (i, (m, n)) in shapes(21).into_iter().enumerate() {
        let x = random_tensor(&mut rng, &[m, n], false);
        check_op("sum_axis0", &[x.clone()], |t, v| {
            let c = t.sum_axis0(v[0]);
            weighted_sum(t, c, 1700 + i as u64)
        });
        check_op("sum_all", &[x.clone()], |t, v| t.sum_all(v[0]));

        let col = random_tensor(&mut rng, &[m], false);
        let row = random_tensor(&mut rng, &[n], false);
        check_op("outer_add", &[col, row], |t, v| {
            let c = t.outer_add(v[0], v[1]);
            weighted_sum(t, c, 1800 + i as u64)
        });

        let values = random_tensor(&mut rng, &[3], false);
        let cells: Vec<(usize, usize, usize)> = (0..m.min(n))
            .map(|d| (d, d, d % 3))
            .collect();
        check_op("class_scatter", &[values], |t, v| {
            let c = t.class_scatter(v[0], &cells, (m, n));
            weighted_sum(t, c, 1900 + i as u64)
        });
    }
}
