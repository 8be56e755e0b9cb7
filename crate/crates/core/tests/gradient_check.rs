mod common;

use advsum::autodiff::{gradient_check, gradient_check_params, Tape, Tensor, Var};
use advsum::discriminator::{d_loss, DiscVars, DiscriminatorDims, LabeledSummary};
use advsum::generator::{mle_loss, GenVars};
use advsum::{Prng, Result};
use common::*;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const TRIALS: usize = 100;

/// Runs `TRIALS` gradient checks of `f` at random points of random shape.
fn check_primitive<F>(name: &str, seed: u64, shape: impl Fn(&mut Prng) -> Vec<usize>, f: F)
where
    F: Fn(&mut Tape<f64>, Var, &mut Prng) -> Result<Var>,
{
    let mut rng = Prng::new(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..TRIALS {
        let s = shape(&mut rng);
        let point = random_tensor(&s, &mut rng);
        let aux_seed = rng.next_u64();
        let report = gradient_check(
            |tape: &mut Tape<f64>, x: Var| f(tape, x, &mut Prng::new(aux_seed)),
            &point,
            H,
            TOL,
        )
        .unwrap();
        worst = worst.max(report.max_rel_err);
        assert!(
            report.passed(),
            "{name}: trial {trial} shape {s:?} max rel err {:.3e}",
            report.max_rel_err
        );
    }
    assert!(worst < TOL, "{name}: {worst}");
}

fn mat(rng: &mut Prng) -> Vec<usize> {
    vec![1 + rng.below(4), 1 + rng.below(4)]
}

fn row(rng: &mut Prng) -> Vec<usize> {
    vec![1, 1 + rng.below(6)]
}

fn constant_like(tape: &mut Tape<f64>, shape: &[usize], rng: &mut Prng) -> Var {
    tape.constant(random_tensor(shape, rng))
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn matmul_both_operands() {
    check_primitive("matmul lhs", 1, mat, |t, x, rng| {
        let k = 1 + rng.below(3);
        let b = constant_like(t, &[t.shape(x)[1], k], rng);
        let y = t.matmul(x, b)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("matmul rhs", 2, mat, |t, x, rng| {
        let k = 1 + rng.below(3);
        let a = constant_like(t, &[k, t.shape(x)[0]], rng);
        let y = t.matmul(a, x)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn elementwise_binary_with_broadcast() {
    type Bin = fn(&mut Tape<f64>, Var, Var) -> Result<Var>;
    let ops: [(&str, Bin); 3] = [("add", Tape::add), ("sub", Tape::sub), ("mul", Tape::mul)];
    for (i, (name, op)) in ops.iter().enumerate() {
        check_primitive(name, 10 + i as u64, mat, |t, x, rng| {
            let other = constant_like(t, &t.shape(x).to_vec(), rng);
            let y = op(t, x, other)?;
            weighted_sum(t, y, rng)
        });
        // x is the larger operand; a row broadcast over it.
        check_primitive(name, 20 + i as u64, mat, |t, x, rng| {
            let c = t.shape(x)[1];
            let other = constant_like(t, &[1, c], rng);
            let y = op(t, x, other)?;
            weighted_sum(t, y, rng)
        });
        // x is the broadcast row.
        check_primitive(name, 30 + i as u64, row, |t, x, rng| {
            let c = t.shape(x)[1];
            let r = 1 + rng.below(4);
            let big = constant_like(t, &[r, c], rng);
            let y = op(t, big, x)?;
            weighted_sum(t, y, rng)
        });
    }
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn elementwise_unary() {
    type Un = fn(&mut Tape<f64>, Var) -> Result<Var>;
    let ops: [(&str, Un); 4] = [
        ("tanh", Tape::tanh),
        ("sigmoid", Tape::sigmoid),
        ("softmax", Tape::softmax),
        ("log_softmax", Tape::log_softmax),
    ];
    for (i, (name, op)) in ops.iter().enumerate() {
        check_primitive(name, 40 + i as u64, mat, |t, x, rng| {
            let y = op(t, x)?;
            weighted_sum(t, y, rng)
        });
    }
    check_primitive("affine", 50, mat, |t, x, rng| {
        let a = rng.uniform_in(-2.0, 2.0);
        let y = t.affine(x, a, 0.3)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("scale", 51, mat, |t, x, rng| {
        let a = rng.uniform_in(-2.0, 2.0);
        let y = t.scale(x, a)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("clamp", 52, mat, |t, x, rng| {
        let y = t.clamp(x, -1.0, 1.0)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn log_on_positive_inputs() {
    // log needs a positive argument: shift [-2, 2] to [0.5, 4.5].
    check_primitive("log", 60, mat, |t, x, rng| {
        let shifted = t.affine(x, 1.0, 2.5)?;
        let y = t.log(shifted)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn log_of_softmax_gradient_is_onehot_minus_softmax() {
    let mut rng = Prng::new(61);
    for _ in 0..TRIALS {
        let n = 2 + rng.below(5);
        let z = random_tensor(&[1, n], &mut rng);
        let k = rng.below(n);
        let f = |t: &mut Tape<f64>, x: Var| {
            let s = t.softmax(x)?;
            let l = t.log(s)?;
            t.gather(l, &[k])
        };
        let report = gradient_check(f, &z, H, TOL).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        let max = z.data().iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = z.data().iter().map(|v| (v - max).exp()).collect();
        let total: f64 = e.iter().sum();
        for (i, (&a, &ei)) in report.analytic.iter().zip(&e).enumerate() {
            let want = if i == k { 1.0 } else { 0.0 } - ei / total;
            assert!((a - want).abs() < 1e-12, "coordinate {i}: {a} vs {want}");
        }
    }
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn structural_ops() {
    check_primitive("concat_cols", 70, mat, |t, x, rng| {
        let r = t.shape(x)[0];
        let other = constant_like(t, &[r, 1 + rng.below(3)], rng);
        let y = t.concat_cols(&[other, x, x])?;
        weighted_sum(t, y, rng)
    });
    check_primitive("concat_rows", 71, mat, |t, x, rng| {
        let c = t.shape(x)[1];
        let other = constant_like(t, &[1 + rng.below(3), c], rng);
        let y = t.concat_rows(&[x, other, x])?;
        weighted_sum(t, y, rng)
    });
    check_primitive("slice", 72, mat, |t, x, rng| {
        let c = t.shape(x)[1];
        let start = rng.below(c);
        let len = 1 + rng.below(c - start);
        let y = t.slice(x, start, len)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("rows", 73, mat, |t, x, rng| {
        let r = t.shape(x)[0];
        let start = rng.below(r);
        let len = 1 + rng.below(r - start);
        let y = t.rows(x, start, len)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("reshape", 74, mat, |t, x, rng| {
        let n = t.value(x).len();
        let y = t.reshape(x, &[1, n])?;
        weighted_sum(t, y, rng)
    });
    check_primitive("sum", 75, mat, |t, x, _| t.sum(x));
    check_primitive("mean", 76, mat, |t, x, _| t.mean(x));
    check_primitive("gather", 77, mat, |t, x, rng| {
        let n = t.value(x).len();
        let idx: Vec<usize> = (0..1 + rng.below(6)).map(|_| rng.below(n)).collect();
        let y = t.gather(x, &idx)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("scatter_add", 78, row, |t, x, rng| {
        let n = t.value(x).len();
        let size = 1 + rng.below(4);
        let idx: Vec<usize> = (0..n).map(|_| rng.below(size)).collect();
        let y = t.scatter_add(x, &idx, size)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn embedding_table() {
    check_primitive("embedding", 80, mat, |t, x, rng| {
        let v = t.shape(x)[0];
        let ids: Vec<usize> = (0..1 + rng.below(6)).map(|_| rng.below(v)).collect();
        let y = t.embedding(x, &ids)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn convolution_over_time_both_operands() {
    let seq = |rng: &mut Prng| vec![3 + rng.below(4), 1 + rng.below(3)];
    check_primitive("conv input", 90, seq, |t, x, rng| {
        let d = t.shape(x)[1];
        let k = 1 + rng.below(3);
        let w = constant_like(t, &[k * d, 1 + rng.below(3)], rng);
        let y = t.conv_over_time(x, w, k)?;
        weighted_sum(t, y, rng)
    });
    let filt = |rng: &mut Prng| {
        let k = 1 + rng.below(3);
        let d = 1 + rng.below(3);
        vec![k * d, 1 + rng.below(3)]
    };
    check_primitive("conv filters", 91, filt, |t, w, rng| {
        // Recover a (width, dim) factorisation of the filter rows.
        let kd = t.shape(w)[0];
        let d = (1..=kd).rev().find(|d| kd % d == 0 && kd / d <= 3).unwrap();
        let k = kd / d;
        let x = constant_like(t, &[k + rng.below(3), d], rng);
        let y = t.conv_over_time(x, w, k)?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn max_over_time_with_and_without_mask() {
    let tall = |rng: &mut Prng| vec![2 + rng.below(4), 1 + rng.below(3)];
    check_primitive("max_over_time", 100, tall, |t, x, rng| {
        let y = t.max_over_time(x, None)?;
        weighted_sum(t, y, rng)
    });
    check_primitive("max_over_time masked", 101, tall, |t, x, rng| {
        let r = t.shape(x)[0];
        let mut keep: Vec<bool> = (0..r).map(|_| rng.below(2) == 0).collect();
        keep[rng.below(r)] = true;
        let y = t.max_over_time(x, Some(&keep))?;
        weighted_sum(t, y, rng)
    });
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn generator_likelihood_loss() {
    let vocab = numbered_vocab(12);
    let mut rng = Prng::new(7);
    let dims = small_dims(vocab.len());
    for trial in 0..3 {
        let ex = random_example(&vocab, 6, 3, &mut rng);
        let mut params = dims.init::<f64>(&mut rng);
        // Nonzero biases so their gradients are exercised too.
        for (_, t) in params.iter_mut() {
            for v in t.data_mut() {
                if *v == 0.0 {
                    *v = rng.uniform_in(-0.1, 0.1);
                }
            }
        }
        let report = gradient_check_params(
            |tape: &mut Tape<f64>, b| {
                let g = GenVars::from_bindings(dims, b)?;
                mle_loss(tape, &g, &ex)
            },
            &params,
            H,
            TOL,
        )
        .unwrap();
        assert!(
            report.passed(),
            "trial {trial}: max rel err {:.3e} at {:?}",
            report.max_rel_err,
            report
                .flagged
                .iter()
                .take(5)
                .map(|&i| &report.labels[i])
                .collect::<Vec<_>>()
        );
        assert_eq!(report.analytic.len(), params.num_elements());
        assert!(report.analytic.iter().any(|g| g.abs() > 1e-6));
    }
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn discriminator_loss_two_by_two() {
    let dims = DiscriminatorDims::new(10, 4, &[1, 2, 3], 3).unwrap();
    let mut rng = Prng::new(8);
    for _ in 0..3 {
        let mut params = dims.init::<f64>(&mut rng);
        for (_, t) in params.iter_mut() {
            for v in t.data_mut() {
                *v = rng.uniform_in(-0.5, 0.5);
            }
        }
        let seq = |rng: &mut Prng, len: usize| -> Vec<usize> { (0..len).map(|_| 1 + rng.below(9)).collect() };
        let pos = [
            LabeledSummary::from_ext_ids(&seq(&mut rng, 4), 10, true).unwrap(),
            LabeledSummary::from_ext_ids(&seq(&mut rng, 2), 10, true).unwrap(),
        ];
        let neg = [
            LabeledSummary::from_ext_ids(&seq(&mut rng, 5), 10, false).unwrap(),
            LabeledSummary::from_ext_ids(&seq(&mut rng, 1), 10, false).unwrap(),
        ];
        let report = gradient_check_params(
            |tape: &mut Tape<f64>, b| {
                let d = DiscVars::from_bindings(&dims, b)?;
                d_loss(tape, &d, &pos, &neg)
            },
            &params,
            H,
            TOL,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {:.3e}", report.max_rel_err);
    }
}

#[cfg_attr(not(advsum_acceptance), test)]
pub fn sum_of_squares_is_near_exact() {
    let p = Tensor::row(vec![1.0, 2.0, 3.0]);
    let report = gradient_check(
        |t: &mut Tape<f64>, x| {
            let sq = t.mul(x, x)?;
            t.sum(sq)
        },
        &p,
        H,
        1e-7,
    )
    .unwrap();
    assert_eq!(report.analytic, vec![2.0, 4.0, 6.0]);
    assert!(report.max_rel_err < 1e-7);
}
