use advsum::autodiff::ParamSet;
use advsum::discriminator::{Discriminator, DiscriminatorDims, LabeledSummary, ORIGINAL, PROB_CLAMP};
use advsum::text::{PAD, UNK};
use advsum::training::{labeled_step, TrainingConfig};
use advsum::Prng;

fn zeroed(mut ps: ParamSet<f64>) -> ParamSet<f64> {
    for (_, t) in ps.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    ps
}

fn randomized(dims: DiscriminatorDims, scale: f64, rng: &mut Prng) -> Discriminator<f64> {
    let mut d = Discriminator::new(dims, rng);
    for (_, t) in d.params.iter_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = rng.uniform_in(-scale, scale));
    }
    d
}

fn default_dims(v: usize) -> DiscriminatorDims {
    DiscriminatorDims::new(v, 8, &[3, 4, 5], 6).unwrap()
}

fn summary(ids: &[usize], original: bool) -> LabeledSummary {
    LabeledSummary {
        ids: ids.to_vec(),
        original,
    }
}

fn random_ids(v: usize, rng: &mut Prng) -> Vec<usize> {
    let n = 1 + rng.below(9);
    (0..n).map(|_| 1 + rng.below(v - 1)).collect()
}

#[test]
fn zero_params_are_undecided() {
    let d = Discriminator::from_params(zeroed(default_dims(10).init(&mut Prng::new(0)))).unwrap();
    for ids in [vec![4], vec![4, 5, 6, 7, 8, 9, 4]] {
        assert_eq!(d.probability(&ids).unwrap(), 0.5);
    }
}

#[test]
fn output_is_a_probability() {
    let mut rng = Prng::new(1);
    for _ in 0..1000 {
        let widths: Vec<usize> = match rng.below(3) {
            0 => vec![1],
            1 => vec![2, 3],
            _ => vec![3, 4, 5],
        };
        let dims = DiscriminatorDims::new(12, 1 + rng.below(6), &widths, 1 + rng.below(5)).unwrap();
        let d = randomized(dims, 3.0, &mut rng);
        let p = d.probability(&random_ids(12, &mut rng)).unwrap();
        assert!(p > 0.0 && p < 1.0, "{p}");
    }
}

#[test]
fn trailing_padding_is_inert() {
    let mut rng = Prng::new(2);
    for _ in 0..200 {
        let d = randomized(default_dims(12), 1.0, &mut rng);
        let ids = random_ids(12, &mut rng);
        let p = d.probability(&ids).unwrap();
        for extra in 1..8 {
            let mut padded = ids.clone();
            padded.resize(ids.len() + extra, PAD);
            assert_eq!(d.probability(&padded).unwrap(), p);
        }
    }
}

#[test]
fn empty_or_all_padding_input_is_rejected() {
    let d = Discriminator::<f64>::new(default_dims(10), &mut Prng::new(3));
    assert!(d.probability(&[]).is_err());
    assert!(d.probability(&[PAD, PAD]).is_err());
}

#[test]
fn extended_ids_and_padding_read_as_unknown() {
    let s = LabeledSummary::from_ext_ids(&[4, 12, PAD, 3], 10, true).unwrap();
    assert_eq!(s.ids, vec![4, UNK, UNK, 3]);
    assert!(LabeledSummary::from_ext_ids(&[], 10, true).is_err());
}

#[test]
fn undecided_discriminator_loss_is_two_ln_two() {
    let d = Discriminator::from_params(zeroed(default_dims(10).init(&mut Prng::new(0)))).unwrap();
    let pos = [summary(&[4, 5], true), summary(&[6], true)];
    let neg = [summary(&[7, 8, 9], false)];
    let loss = d.loss_value(&pos, &neg).unwrap();
    assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12, "{loss}");
}

/// One width-1 filter reading a one-dimensional embedding: token 4 scores
/// +1 and token 5 scores -1, scaled so the softmax saturates.
fn perfect() -> Discriminator<f64> {
    let dims = DiscriminatorDims::new(6, 1, &[1], 1).unwrap();
    let mut ps = zeroed(dims.init(&mut Prng::new(0)));
    let emb = ps.get_mut("emb").unwrap().data_mut();
    emb[4] = 1.0;
    emb[5] = -1.0;
    ps.get_mut("conv1.w").unwrap().data_mut()[0] = 1.0;
    let out = ps.get_mut("out.w").unwrap().data_mut();
    out[ORIGINAL] = 100.0;
    out[1 - ORIGINAL] = -100.0;
    Discriminator::from_params(ps).unwrap()
}

#[test]
fn perfect_discriminator_loss_is_the_clamp_floor() {
    let d = perfect();
    let pos = [summary(&[4, 4], true), summary(&[4], true)];
    let neg = [summary(&[5, 5, 5], false), summary(&[5], false)];
    let loss = d.loss_value(&pos, &neg).unwrap();
    let floor = -2.0 * (1.0 - PROB_CLAMP).ln();
    assert!((loss - floor).abs() < 1e-15, "{loss} vs {floor}");
    // Wrong labels hit the other clamp: finite, and large.
    let swapped = d
        .loss_value(
            &neg.map(|s| summary(&s.ids, true)),
            &pos.map(|s| summary(&s.ids, false)),
        )
        .unwrap();
    assert!((swapped + 2.0 * PROB_CLAMP.ln()).abs() < 1e-9, "{swapped}");
}

#[test]
fn accuracy_tie_flip_and_perfect_cases() {
    let batch = [
        summary(&[4, 4], true),
        summary(&[4], true),
        summary(&[5, 5], false),
        summary(&[5], false),
        summary(&[5, 5, 5], false),
    ];
    let zero = Discriminator::from_params(zeroed(default_dims(6).init(&mut Prng::new(0)))).unwrap();
    // D = 0.5 everywhere counts as "generated": only the negatives are right.
    assert_eq!(zero.accuracy(&batch, 0.5).unwrap(), 0.6);

    let d = perfect();
    assert_eq!(d.accuracy(&batch, 0.5).unwrap(), 1.0);
    let flipped: Vec<LabeledSummary> = batch.iter().map(|s| summary(&s.ids, !s.original)).collect();
    assert_eq!(d.accuracy(&flipped, 0.5).unwrap(), 0.0);

    let mut rng = Prng::new(4);
    for _ in 0..20 {
        let d = randomized(default_dims(6), 1.0, &mut rng);
        let a = d.accuracy(&batch, 0.5).unwrap();
        let b = d.accuracy(&flipped, 0.5).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }
    assert!(d.accuracy(&[], 0.5).is_err());
}

#[test]
fn separable_toy_loss_decreases_every_step() {
    // Positives use tokens 4..7, negatives 8..11.
    let mut rng = Prng::new(5);
    let dims = DiscriminatorDims::new(12, 4, &[1], 4).unwrap();
    let mut d = Discriminator::<f64>::new(dims, &mut rng);
    let draw = |lo: usize, original: bool, rng: &mut Prng| {
        let n = 1 + rng.below(5);
        summary(&(0..n).map(|_| lo + rng.below(4)).collect::<Vec<_>>(), original)
    };
    let pos: Vec<_> = (0..8).map(|_| draw(4, true, &mut rng)).collect();
    let neg: Vec<_> = (0..8).map(|_| draw(8, false, &mut rng)).collect();
    let cfg = TrainingConfig {
        lr_d: 0.5,
        ..Default::default()
    };
    let mut prev = d.loss_value(&pos, &neg).unwrap();
    let start = prev;
    for step in 0..200 {
        labeled_step(&mut d, &pos, &neg, &cfg).unwrap();
        let loss = d.loss_value(&pos, &neg).unwrap();
        assert!(loss <= prev, "step {step}: {loss} > {prev}");
        prev = loss;
    }
    assert!(prev < 0.1 * start, "{start} -> {prev}");
    assert_eq!(d.accuracy(&[pos, neg].concat(), 0.5).unwrap(), 1.0);
}

#[test]
fn identical_classes_drive_the_output_to_one_half() {
    let mut rng = Prng::new(6);
    let mut d = randomized(default_dims(10), 0.5, &mut rng);
    let seqs: Vec<Vec<usize>> = (0..6).map(|_| random_ids(10, &mut rng)).collect();
    let pos: Vec<_> = seqs.iter().map(|s| summary(s, true)).collect();
    let neg: Vec<_> = seqs.iter().map(|s| summary(s, false)).collect();
    let cfg = TrainingConfig {
        lr_d: 0.5,
        ..Default::default()
    };
    for _ in 0..300 {
        labeled_step(&mut d, &pos, &neg, &cfg).unwrap();
    }
    let loss = d.loss_value(&pos, &neg).unwrap();
    assert!(loss >= 2.0 * 2f64.ln() - 1e-12);
    assert!(loss - 2.0 * 2f64.ln() < 1e-3, "{loss}");
    for s in &seqs {
        assert!((d.probability(s).unwrap() - 0.5).abs() < 0.02);
    }
}
