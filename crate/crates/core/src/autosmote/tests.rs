use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::classifier::{weighted_cross_entropy, MlpClassifier, TrainConfig, Trainer};
use crate::gumbel::gumbel_sample;

fn fixture(counts: &[usize], f: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            rows.push((0..f).map(|_| rng.random::<f64>() * 0.6 + 0.3 * c as f64).collect::<Vec<_>>());
            labels.push(c);
        }
    }
    Dataset::from_rows(&rows, labels, counts.len()).unwrap()
}

fn self_config() -> AutoSmoteConfig {
    AutoSmoteConfig::default()
}

fn cohort_config(groups: usize) -> AutoSmoteConfig {
    AutoSmoteConfig {
        variant: Variant::Cohort { groups },
        ..AutoSmoteConfig::default()
    }
}

fn build(cfg: AutoSmoteConfig, f: usize, seed: u64) -> AutoSmote {
    AutoSmote::new(f, cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn synth_values(a: &AutoSmote, batch: &Dataset, seed: u64) -> Option<(Matrix, Matrix, SyntheticTrace, [Matrix; 3])> {
    let tape = Tape::new();
    let bound = a.model.bind(&tape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    a.synthesize(&tape, &bound, batch, &mut rng).unwrap().map(|s| {
        let soft = std::array::from_fn(|j| s.soft[j].value().clone());
        (s.rows.value().clone(), s.weights.value().clone(), s.trace, soft)
    })
}

#[test]
fn parameter_counts_are_nested() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for f in [8, 9, 13, 30] {
        let own = build(self_config(), f, 1).param_count();
        let direct = MlpOversampler::new(f, 0.05, &mut rng).param_count();
        for g in 1..=7 {
            let cohort = build(cohort_config(g), f, 1).param_count();
            assert!(cohort < own && own < direct, "f={f} g={g}: {cohort} {own} {direct}");
        }
    }
    // f = 8, G = 7: assigner 8*32+32+32*7+7, tables 7*14
    assert_eq!(build(cohort_config(7), 8, 0).param_count(), 617);
    // three heads 8*32+32+32*n+n for n = 2, 6, 6
    assert_eq!(build(self_config(), 8, 0).param_count(), 3 * 288 + 33 * 14);
}

#[test]
fn config_validation() {
    let bad_k = AutoSmoteConfig {
        k: 7,
        ..AutoSmoteConfig::default()
    };
    assert!(matches!(bad_k.validate(), Err(Error::InvalidK { .. })));
    assert!(cohort_config(8).validate().is_err());
    assert!(cohort_config(0).validate().is_err());
    let cold = AutoSmoteConfig {
        tau: 0.0,
        ..AutoSmoteConfig::default()
    };
    assert!(cold.validate().is_err());
}

#[test]
fn zero_head_gives_uniform_neighbor_counts() {
    let mut a = build(self_config(), 4, 0);
    for p in a.params_mut() {
        p.value.fill(0.0);
    }
    let (logits, _) = a.model.logits_eval(&[0.1, 0.2, 0.3, 0.4], 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let probs = crate::gradcore::softmax_rows(&Matrix::new(1, 6, logits[1].clone()).unwrap());
    assert!(probs.data().iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));
    assert_eq!(logits[0].len(), 2);
}

#[test]
fn confident_head_repeats_its_decision() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = [0.0, 0.0, 10.0, 0.0, 0.0, 0.0];
    let same = (0..100)
        .filter(|_| gumbel_sample(&logits, 0.1, &mut rng).unwrap().hard_index == 2)
        .count();
    assert!(same >= 95);
}

#[test]
fn batch_plan_counts() {
    assert!(BatchPlan::balance(&fixture(&[10, 10], 2, 0), 2).is_empty());
    let plan = BatchPlan::balance(&fixture(&[40, 10], 2, 0), 2);
    assert_eq!(plan.len(), 30);
    assert!(plan.classes.iter().all(|&c| c == 1));
    // cycling covers every member before repeating
    assert_eq!(plan.seeds[..10].iter().collect::<std::collections::HashSet<_>>().len(), 10);
    assert_eq!(plan.seeds[0], plan.seeds[10]);
    assert!(BatchPlan::balance(&fixture(&[5, 1], 2, 0), 2).is_empty());
}

#[test]
fn balanced_batch_adds_nothing() {
    let a = build(self_config(), 3, 0);
    assert!(synth_values(&a, &fixture(&[8, 8], 3, 1), 0).is_none());
}

#[test]
fn imbalanced_batch_gets_weighted_rows() {
    let a = build(self_config(), 3, 0);
    let (rows, weights, trace, soft) = synth_values(&a, &fixture(&[40, 10], 3, 1), 0).unwrap();
    assert_eq!(rows.shape(), (30, 3));
    assert_eq!(trace.classes, vec![1; 30]);
    for i in 0..30 {
        assert!((0.0..=1.0).contains(&weights.get(i, 0)));
        assert_eq!(weights.get(i, 0), soft[0].get(i, 1));
        assert!(trace.neighbors[i].iter().all(|&r| r >= 40));
        assert!(!trace.neighbors[i].contains(&trace.seeds[i]));
    }
}

#[test]
fn mixtures_stay_in_candidate_hull() {
    let batch = fixture(&[50, 12, 20], 4, 2);
    for (cfg, seed) in [(self_config(), 0), (cohort_config(3), 1), (self_config(), 7)] {
        let a = build(cfg, 4, seed);
        let (rows, _, trace, _) = synth_values(&a, &batch, seed).unwrap();
        for i in 0..rows.rows() {
            let x = batch.row(trace.seeds[i]);
            for j in 0..4 {
                let cand: Vec<f64> = trace.candidates.iter().map(|c| c.get(i, j)).collect();
                let lo = cand.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = cand.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(rows.get(i, j) >= lo - 1e-12 && rows.get(i, j) <= hi + 1e-12);
                // bounded aggregators never leave the box of {x} and its neighbors
                let pool: Vec<f64> = std::iter::once(x[j])
                    .chain(trace.neighbors[i].iter().map(|&r| batch.row(r)[j]))
                    .collect();
                let plo = pool.iter().cloned().fold(f64::INFINITY, f64::min);
                let phi = pool.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for kind in AggregatorKind::ALL.into_iter().filter(|k| k.is_bounded()) {
                    let v = trace.candidates[kind.ordinal()].get(i, j);
                    assert!(v >= plo - 1e-12 && v <= phi + 1e-12);
                }
            }
        }
    }
}

#[test]
fn one_hot_mixture_equals_its_aggregator() {
    let batch = fixture(&[20, 8], 3, 3);
    let mut a = build(self_config(), 3, 0);
    let DecisionModel::Instance { heads } = &mut a.model else { unreachable!() };
    heads[2].b2.value = Matrix::new(1, 6, vec![0.0, 0.0, 0.0, 0.0, 60.0, 0.0]).unwrap();
    let (rows, _, trace, soft) = synth_values(&a, &batch, 4).unwrap();
    let avg = &trace.candidates[AggregatorKind::Average.ordinal()];
    for i in 0..rows.rows() {
        assert!((soft[2].get(i, 4) - 1.0).abs() < 1e-6);
        for j in 0..3 {
            assert!((rows.get(i, j) - avg.get(i, j)).abs() < 1e-6);
        }
    }
}

#[test]
fn low_temperature_mixture_matches_hard_choice() {
    let batch = fixture(&[30, 10], 3, 5);
    let mut cfg = self_config();
    cfg.tau = 0.01;
    let mut a = build(cfg, 3, 1);
    let DecisionModel::Instance { heads } = &mut a.model else { unreachable!() };
    heads[2].b2.value = Matrix::new(1, 6, vec![0.0, 0.0, 0.0, 0.0, 0.0, 8.0]).unwrap();
    let (rows, _, trace, _) = synth_values(&a, &batch, 6).unwrap();
    for i in 0..rows.rows() {
        let hard = &trace.candidates[trace.aggregator[i].ordinal()];
        for j in 0..3 {
            assert!((rows.get(i, j) - hard.get(i, j)).abs() < 1e-3);
        }
    }
}

#[test]
fn ablations_fix_their_criterion() {
    let batch = fixture(&[30, 10], 3, 8);
    let mut cfg = self_config();
    cfg.ablation = Ablation::removing(Criterion::Participation);
    let (_, w, trace, _) = synth_values(&build(cfg, 3, 0), &batch, 0).unwrap();
    assert!(w.data().iter().all(|&v| v == 1.0));
    assert!(trace.participate.iter().all(|&p| p));

    let mut cfg = self_config();
    cfg.ablation = Ablation::removing(Criterion::NeighborCount);
    cfg.k = 3;
    let (_, _, trace, _) = synth_values(&build(cfg, 3, 0), &batch, 0).unwrap();
    assert!(trace.neighbors.iter().all(|n| n.len() == 3));

    let mut cfg = self_config();
    cfg.ablation = Ablation::removing(Criterion::Aggregator);
    let (rows, _, trace, _) = synth_values(&build(cfg, 3, 0), &batch, 0).unwrap();
    for i in 0..rows.rows() {
        let x = batch.row(trace.seeds[i]);
        let on_segment = trace.neighbors[i].iter().any(|&r| {
            let y = batch.row(r);
            // solve for lambda on the first coordinate, check the others
            let lam = (rows.get(i, 0) - y[0]) / (x[0] - y[0]);
            (0.0..=1.0).contains(&lam) && (0..3).all(|j| (lam * x[j] + (1.0 - lam) * y[j] - rows.get(i, j)).abs() < 1e-9)
        });
        assert!(on_segment, "row {i} is not on a seed-neighbor segment");
        assert_eq!(trace.aggregator[i], AggregatorKind::Interpolation);
    }
}

#[test]
fn cohort_with_one_group_shares_one_profile() {
    let batch = fixture(&[30, 10], 3, 9);
    let a = build(cohort_config(1), 3, 2);
    let (_, _, trace, _) = synth_values(&a, &batch, 1).unwrap();
    assert!(trace.groups.unwrap().iter().all(|&g| g == 0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let first = a.model.logits_eval(batch.row(30), 1.0, &mut rng).unwrap().0;
    for r in 31..40 {
        assert_eq!(a.model.logits_eval(batch.row(r), 1.0, &mut rng).unwrap().0, first);
    }
}

#[test]
fn confident_assigner_keeps_groups_stable() {
    let batch = fixture(&[30, 10], 3, 10);
    let mut a = build(cohort_config(7), 3, 3);
    let DecisionModel::Cohort { assigner, .. } = &mut a.model else { unreachable!() };
    assigner.b2.value.set(0, 5, 100.0);
    for seed in 0..10 {
        let (_, _, trace, _) = synth_values(&a, &batch, seed).unwrap();
        assert!(trace.groups.unwrap().iter().all(|&g| g == 5));
    }
}

fn batch_loss(clf: &MlpClassifier, aug: &mut AutoSmote, batch: &Dataset, seed: u64) -> f64 {
    let tape = Tape::new();
    let net = clf.net.bind(&tape);
    let a = aug.augment(&tape, batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let probs = clf.forward(&net, a.features).unwrap();
    weighted_cross_entropy(probs, &a.labels, a.weights.unwrap()).unwrap().item()
}

fn gradients(clf: &mut MlpClassifier, aug: &mut AutoSmote, batch: &Dataset, seed: u64) {
    let tape = Tape::new();
    let net = clf.net.bind(&tape);
    let a = aug.augment(&tape, batch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let probs = clf.forward(&net, a.features).unwrap();
    let loss = weighted_cross_entropy(probs, &a.labels, a.weights.unwrap()).unwrap();
    tape.backward(loss).unwrap();
    clf.pull_grads(&net.vars());
    aug.model.pull_grads(&a.bound);
}

#[test]
fn every_decision_parameter_receives_gradient() {
    let batch = fixture(&[30, 12], 4, 11);
    for cfg in [self_config(), cohort_config(4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut clf = MlpClassifier::new(4, 2, &mut rng);
        let mut aug = build(cfg, 4, 2);
        gradients(&mut clf, &mut aug, &batch, 3);
        for p in aug.params() {
            assert!(p.grad.max_abs() > 0.0, "{} has no gradient", p.name);
        }
    }
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let batch = fixture(&[14, 6], 3, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut clf = MlpClassifier::new(3, 2, &mut rng);
    let mut aug = build(self_config(), 3, 4);
    let seed = 21;
    gradients(&mut clf, &mut aug, &batch, seed);

    let h = 1e-5;
    let mut checked = 0;
    // dc1 and dc3 heads (the neighbor-count head's gradient is a surrogate)
    for pi in [0, 2, 3, 8, 10, 11] {
        let n = aug.params()[pi].len();
        for j in (0..n).step_by(5) {
            let analytic = aug.params()[pi].grad.data()[j];
            let mut plus = aug.clone();
            plus.params_mut()[pi].value.data_mut()[j] += h;
            let mut minus = aug.clone();
            minus.params_mut()[pi].value.data_mut()[j] -= h;
            let numeric = (batch_loss(&clf, &mut plus, &batch, seed) - batch_loss(&clf, &mut minus, &batch, seed)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-2, "{}[{j}]: {analytic} vs {numeric}", aug.params()[pi].name);
            checked += 1;
        }
    }
    for pi in 0..4 {
        let n = clf.params()[pi].len();
        for j in (0..n).step_by(7) {
            let analytic = clf.params()[pi].grad.data()[j];
            let mut plus = clf.clone();
            plus.params_mut()[pi].value.data_mut()[j] += h;
            let mut minus = clf.clone();
            minus.params_mut()[pi].value.data_mut()[j] -= h;
            let numeric =
                (batch_loss(&plus, &mut aug.clone(), &batch, seed) - batch_loss(&minus, &mut aug.clone(), &batch, seed)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-2, "classifier {pi}[{j}]: {analytic} vs {numeric}");
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn zero_participation_contributes_nothing() {
    let tape = Tape::new();
    let probs = tape.constant(Matrix::new(3, 2, vec![0.9, 0.1, 0.8, 0.2, 0.01, 0.99]).unwrap());
    let w = tape.constant(Matrix::column(&[1.0, 1.0, 0.0]).unwrap());
    let with = weighted_cross_entropy(probs, &[0, 0, 0], w).unwrap().item();
    let base = -(0.9f64.ln() + 0.8f64.ln()) / 2.0;
    assert!((with - base).abs() < 1e-12);
}

#[test]
fn inference_generation() {
    let d = fixture(&[30, 10], 3, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = build(self_config(), 3, 5);
    let out = a.generate(&d, &mut rng).unwrap();
    assert_eq!(out.class_counts, vec![30, 30]);

    let mut shy = build(self_config(), 3, 5);
    let DecisionModel::Instance { heads } = &mut shy.model else { unreachable!() };
    heads[0].b2.value = Matrix::new(1, 2, vec![100.0, 0.0]).unwrap();
    assert_eq!(shy.generate(&d, &mut rng).unwrap().class_counts, vec![30, 10]);
}

fn train_with(aug: &mut dyn BatchAugmenter, d: &Dataset, epochs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clf = MlpClassifier::new(d.n_features(), d.n_classes(), &mut rng);
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        seed,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(clf, cfg).unwrap();
    (0..epochs).map(|_| t.train_epoch(d, Some(&mut *aug), &mut rng).unwrap().loss).collect()
}

#[test]
fn joint_training_is_deterministic() {
    let d = fixture(&[60, 15], 3, 14);
    let a = train_with(&mut build(cohort_config(3), 3, 1), &d, 5, 2);
    let b = train_with(&mut build(cohort_config(3), 3, 1), &d, 5, 2);
    assert_eq!(a, b);
    assert!(a.iter().all(|l| l.is_finite()));
}

#[test]
fn direct_oversampler_starts_at_identity_and_then_leaves_the_hull() {
    let d = fixture(&[60, 15], 3, 15);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut direct = MlpOversampler::new(3, 0.05, &mut rng);
    let minority = d.subset(&d.class_rows(1)).unwrap();
    assert_eq!(direct.transform(&minority.features).unwrap(), minority.features);

    train_with(&mut direct, &d, 60, 3);
    let moved = direct.transform(&minority.features).unwrap();
    let outside = (0..moved.rows())
        .filter(|&i| {
            (0..3).any(|j| {
                let col: Vec<f64> = (0..minority.len()).map(|r| minority.row(r)[j]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                moved.get(i, j) < lo || moved.get(i, j) > hi
            })
        })
        .count();
    assert!(outside > 0);
}
