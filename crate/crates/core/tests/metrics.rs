use imagan::augment::{augment_dataset, AugmentPolicy, Interpolation};
use imagan::data::{LabeledDataset, SkeletonSequence};
use imagan::metrics::{affinity, diversity, seed_stats, AffinityDiversityReport};
use imagan::numcore::Array;
use imagan::recognition::{
    train_recognizer, EpochStats, Recognizer, RecognizerKind, RecognizerSpec, TrainSchedule,
    TrainedRecognizer,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn separable(per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for c in 0..3 {
        for k in 0..per_class {
            let data = (0..8 * 3)
                .map(|i| if i % 3 == 0 { c as f64 - 1.0 } else { 0.0 } + rng.random_range(-0.2..0.2))
                .collect();
            let a = Array::from_vec(&[8, 3], data).unwrap();
            samples.push(SkeletonSequence::new(a, c, 1, format!("s{c}_{k}")).unwrap());
        }
    }
    LabeledDataset::new("sep", 3, 1, samples).unwrap()
}

fn recognizer(seed: u64) -> Recognizer {
    let mut spec = RecognizerSpec::new(RecognizerKind::Lstm, 3, 8, 3, seed);
    spec.hidden = 16;
    spec.attention = 8;
    Recognizer::build(spec).unwrap()
}

fn trained() -> (Recognizer, LabeledDataset) {
    let train = separable(15, 1);
    let val = separable(15, 2);
    let s = TrainSchedule { lr: 3e-3, max_epochs: 40, ..TrainSchedule::default() };
    (train_recognizer(recognizer(0), &train, &val, &s).unwrap().recognizer, val)
}

#[test]
fn affinity_of_identical_and_degenerate_sets_is_zero() {
    let (r, val) = trained();
    let a = affinity(&r, &val, &val).unwrap();
    assert_eq!(a.value, 0.0);
    assert_eq!(a.clean_minus_augmented(), 0.0);

    let mut p = AugmentPolicy::with_joints(0.0, 0.0, 0.0, (1, 1), 3);
    p.multiplier = 1;
    p.interpolation = Interpolation::Knots;
    let same = augment_dataset(&val, &p).unwrap().dataset;
    assert!(affinity(&r, &val, &same).unwrap().value.abs() < 1e-12);
}

#[test]
fn affinity_of_pure_noise_hits_the_chance_floor() {
    let (r, val) = trained();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 600;
    let noise: Vec<SkeletonSequence> = (0..n)
        .map(|i| {
            let data = (0..24).map(|_| rng.random_range(-3.0..3.0)).collect();
            SkeletonSequence::new(Array::from_vec(&[8, 3], data).unwrap(), i % 3, 1, "noise").unwrap()
        })
        .collect();
    let noise = LabeledDataset::new("noise", 3, 1, noise).unwrap();
    let a = affinity(&r, &val, &noise).unwrap();
    // labels are independent of the inputs, so accuracy is binomial around 1/K
    let p = 1.0 / 3.0;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((a.value - (p - a.clean_acc)).abs() < 3.0 * se, "affinity {}", a.value);
    assert!(a.value < 0.0);

    let wrong_k = LabeledDataset::new("k4", 4, 1, val.samples().to_vec()).unwrap();
    assert!(affinity(&r, &val, &wrong_k).is_err());
}

fn history(rows: &[(f64, f64)]) -> Vec<EpochStats> {
    rows.iter()
        .enumerate()
        .map(|(i, &(tl, vl))| EpochStats {
            epoch: i + 1,
            lr: 1e-4,
            train_loss: tl,
            train_acc: 0.0,
            val_loss: vl,
            val_acc: 0.0,
        })
        .collect()
}

#[test]
fn diversity_reads_the_restored_epoch() {
    let r = recognizer(1);
    let mut t = TrainedRecognizer {
        recognizer: r,
        history: history(&[(1.0, 1.5), (0.5, 1.2), (0.3, 1.4)]),
        stopped_epoch: 3,
        best_epoch: 2,
    };
    assert!((diversity(&t).unwrap() - 0.7).abs() < 1e-15);
    t.history = history(&[(0.4, 0.4)]);
    t.best_epoch = 1;
    assert_eq!(diversity(&t).unwrap(), 0.0);
    t.history.clear();
    assert!(diversity(&t).is_err());
}

#[test]
fn memorization_run_has_no_diversity() {
    let tiny = separable(3, 9);
    let s = TrainSchedule { lr: 3e-3, max_epochs: 60, ..TrainSchedule::default() };
    let t = train_recognizer(recognizer(2), &tiny, &tiny, &s).unwrap();
    let d = diversity(&t).unwrap();
    assert!(d.abs() < 0.05, "diversity {d}");
    assert_eq!(t.best().train_acc, 1.0);
}

#[test]
fn seed_stats_examples() {
    let (m, se) = seed_stats(&[0.8, 0.8, 0.8, 0.8]).unwrap();
    assert!((m - 0.8).abs() < 1e-15);
    assert!(se.abs() < 1e-15);
    let (m, se) = seed_stats(&[0.7, 0.9]).unwrap();
    assert!((m - 0.8).abs() < 1e-12);
    assert!((se - 0.1).abs() < 1e-12);
    // four seeds: the divisor is √4 = 2
    let v = [0.1, 0.4, 0.2, 0.7];
    let mean = 0.35;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0).sqrt();
    assert!((seed_stats(&v).unwrap().1 - sd / 2.0).abs() < 1e-15);
    assert_eq!(seed_stats(&[0.3]).unwrap(), (0.3, 0.0));
    assert!(seed_stats(&[]).is_err());
}

proptest! {
    #[test]
    fn replicated_lists_shrink_the_standard_error(v in prop::collection::vec(0.0f64..1.0, 2..6), k in 1usize..6) {
        let rep: Vec<f64> = v.iter().cycle().take(v.len() * k).copied().collect();
        let (m1, _) = seed_stats(&v).unwrap();
        let (mk, sek) = seed_stats(&rep).unwrap();
        prop_assert!((m1 - mk).abs() < 1e-12);
        let n = rep.len() as f64;
        let ss: f64 = rep.iter().map(|x| (x - mk).powi(2)).sum();
        prop_assert!((sek - (ss / (n - 1.0) / n).sqrt()).abs() < 1e-12);
        prop_assert!(sek >= 0.0);
    }
}

#[test]
fn report_records_both_affinity_orientations() {
    let r = AffinityDiversityReport::from_runs(
        vec![0, 1],
        &[(0.7, -0.1, 0.9), (0.9, -0.3, 1.1)],
        vec![("train".into(), "abc".into())],
    )
    .unwrap();
    assert!((r.accuracy_mean - 0.8).abs() < 1e-12);
    assert!((r.accuracy_se - 0.1).abs() < 1e-12);
    assert!((r.affinity + 0.2).abs() < 1e-12);
    assert!((r.diversity - 1.0).abs() < 1e-12);
    let text = r.to_text();
    assert!(text.contains("affinity -0.2"));
    assert!(text.contains("affinity_clean_minus_augmented 0.2"));
    assert!(text.contains("input train abc"));
    assert!(AffinityDiversityReport::from_runs(vec![], &[], vec![]).is_err());
    assert!(AffinityDiversityReport::from_runs(vec![0], &[(0.5, f64::NAN, 0.0)], vec![]).is_err());
}
