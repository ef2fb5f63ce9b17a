use imagan::data::{LabeledDataset, SkeletonSequence};
use imagan::numcore::{sparse_ce_loss, Array, Tape};
use imagan::recognition::{
    argmax_rows, evaluate, extract_latents, mean_cross_entropy, train_recognizer, Evaluation,
    Recognizer, RecognizerKind, RecognizerSpec, StopTracker, TrainSchedule, LATENT_DIM,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Class `c` sits at offset `c − 1` on channel 0, plus noise.
fn separable(per_class: usize, frames: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for c in 0..3 {
        for k in 0..per_class {
            let data = (0..frames * 3)
                .map(|i| {
                    let base = if i % 3 == 0 { c as f64 - 1.0 } else { 0.0 };
                    base + rng.random_range(-0.2..0.2)
                })
                .collect();
            let a = Array::from_vec(&[frames, 3], data).unwrap();
            samples.push(SkeletonSequence::new(a, c, (k % 5 + 1) as u32, format!("sep{c}_{k}")).unwrap());
        }
    }
    LabeledDataset::new("separable", 3, 1, samples).unwrap()
}

fn small(kind: RecognizerKind, frames: usize, seed: u64) -> Recognizer {
    let mut spec = RecognizerSpec::new(kind, 3, frames, 3, seed);
    spec.hidden = 16;
    spec.attention = 8;
    spec.channels = (4, 4);
    Recognizer::build(spec).unwrap()
}

#[test]
fn build_is_deterministic_and_shaped() {
    let ds = separable(2, 8, 0);
    for kind in [RecognizerKind::Lstm, RecognizerKind::Cnn] {
        let a = small(kind, 8, 3);
        assert_eq!(a, small(kind, 8, 3));
        assert_ne!(a.params, small(kind, 8, 4).params);
        assert_eq!(a.logits(&ds).unwrap().dims(), &[6, 3]);
        let lat = extract_latents(&a, &ds).unwrap();
        assert_eq!(lat.points.dims(), &[6, LATENT_DIM]);
        assert_eq!(lat.labels, ds.labels());
    }
    // defaults: 512 LSTM units
    let full = Recognizer::build(RecognizerSpec::lstm(14, 10, 66, 0)).unwrap();
    let expect = 66 * 2048 + 512 * 2048 + 2048 + 512 * 128 + 128 + 512 * 512 + 512 + 512 * 14 + 14;
    assert_eq!(full.params.numel(), expect);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(Recognizer::build(RecognizerSpec::lstm(1, 10, 3, 0)).is_err());
    assert!(Recognizer::build(RecognizerSpec::cnn(3, 0, 3, 0)).is_err());
    assert!(Recognizer::build(RecognizerSpec::cnn(3, 10, 0, 0)).is_err());
    let mut s = RecognizerSpec::lstm(3, 10, 3, 0);
    s.hidden = 0;
    assert!(Recognizer::build(s).is_err());
    let bad = TrainSchedule { lr_factor: 1.0, ..TrainSchedule::default() };
    assert!(bad.validate().is_err());
    let bad = TrainSchedule { plateau_patience: 0, ..TrainSchedule::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn mismatched_inputs_are_rejected() {
    let ds = separable(2, 8, 0);
    let r = small(RecognizerKind::Lstm, 9, 0);
    assert!(r.logits(&ds).is_err());
    let empty = ds.with_samples(Vec::new()).unwrap();
    let r = small(RecognizerKind::Lstm, 8, 0);
    assert!(evaluate(&r, &empty).is_err());
    assert!(train_recognizer(r, &empty, &ds, &TrainSchedule::default()).is_err());
}

#[test]
fn one_epoch_gives_one_history_row() {
    let ds = separable(3, 6, 1);
    let s = TrainSchedule { max_epochs: 1, ..TrainSchedule::default() };
    for kind in [RecognizerKind::Lstm, RecognizerKind::Cnn] {
        let t = train_recognizer(small(kind, 6, 0), &ds, &ds, &s).unwrap();
        assert_eq!(t.history.len(), 1);
        assert_eq!(t.stopped_epoch, 1);
        assert_eq!(t.best_epoch, 1);
    }
}

#[test]
fn worsening_validation_stops_after_patience() {
    let s = TrainSchedule::default();
    let mut tr = StopTracker::default();
    let mut stopped = None;
    for epoch in 1..=20 {
        if tr.observe(epoch as f64, &s).stop {
            stopped = Some(epoch);
            break;
        }
    }
    assert_eq!(stopped, Some(s.early_stop_patience + 1));
}

/// Independent replay of the schedule rules: returns `(lr per epoch, stop epoch)`.
fn schedule_oracle(losses: &[f64], s: &TrainSchedule) -> (Vec<f64>, usize) {
    let mut lr = s.lr;
    let mut lrs = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut plateau_best = f64::INFINITY;
    let mut plateau_at = 0;
    for (e, &l) in losses.iter().enumerate() {
        lrs.push(lr);
        if l < best {
            best = l;
            best_at = e;
        }
        if l < plateau_best - s.plateau_threshold {
            plateau_best = l;
            plateau_at = e;
        } else if e - plateau_at >= s.plateau_patience {
            lr *= s.lr_factor;
            plateau_at = e;
        }
        if e - best_at >= s.early_stop_patience {
            return (lrs, e + 1);
        }
    }
    (lrs, losses.len())
}

proptest! {
    #[test]
    fn tracker_matches_schedule_oracle(losses in prop::collection::vec(0.0f64..1.0, 1..40), quantize in 1u32..4) {
        // coarse values make ties and sub-threshold changes common
        let losses: Vec<f64> = losses.iter().map(|l| (l * 10f64.powi(quantize as i32)).round() / 10f64.powi(quantize as i32)).collect();
        let s = TrainSchedule { plateau_threshold: 0.01, ..TrainSchedule::default() };
        let (lrs, stop) = schedule_oracle(&losses, &s);
        let mut tr = StopTracker::default();
        let mut lr = s.lr;
        let mut got_stop = losses.len();
        for (e, &l) in losses.iter().enumerate() {
            prop_assert_eq!(lr, lrs[e]);
            let ev = tr.observe(l, &s);
            let before = lr;
            if ev.reduce_lr {
                lr *= s.lr_factor;
            }
            prop_assert!(lr <= before);
            if ev.stop {
                got_stop = e + 1;
                break;
            }
        }
        prop_assert_eq!(got_stop, stop);
    }
}

#[test]
fn separable_task_is_learned_and_best_epoch_restored() {
    let train = separable(20, 12, 2);
    let val = separable(20, 12, 3);
    let s = TrainSchedule { lr: 1e-3, max_epochs: 50, ..TrainSchedule::default() };
    let t = train_recognizer(small(RecognizerKind::Lstm, 12, 5), &train, &val, &s).unwrap();
    assert!(t.stopped_epoch <= 50);
    let best = t.best();
    assert!(best.val_acc >= 0.95, "val acc {}", best.val_acc);
    let min = t.history.iter().map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss, min);
    // restored parameters reproduce the best epoch exactly
    let ev = evaluate(&t.recognizer, &val).unwrap();
    assert_eq!(ev.loss, best.val_loss);
    assert_eq!(ev.accuracy, best.val_acc);
    // the learning rate never increases
    assert!(t.history.windows(2).all(|w| w[1].lr <= w[0].lr));

    let again = train_recognizer(small(RecognizerKind::Lstm, 12, 5), &train, &val, &s).unwrap();
    assert_eq!(again, t);

    // a least-squares linear probe on the latents separates the classes
    let lat = extract_latents(&t.recognizer, &val).unwrap();
    let n = lat.labels.len();
    let x = DMatrix::from_fn(n, LATENT_DIM + 1, |i, j| if j == LATENT_DIM { 1.0 } else { lat.points.get2(i, j) });
    let y = DMatrix::from_fn(n, 3, |i, j| f64::from(u8::from(lat.labels[i] == j)));
    let w = x.clone().svd(true, true).solve(&y, 1e-10).unwrap();
    let pred = x * w;
    let hits = (0..n)
        .filter(|&i| (0..3).max_by(|&a, &b| pred[(i, a)].total_cmp(&pred[(i, b)])).unwrap() == lat.labels[i])
        .count();
    assert!(hits as f64 / n as f64 >= 0.95);
}

#[test]
fn tiny_sets_are_memorized() {
    let mut ds = separable(4, 8, 7);
    // scramble labels so the task needs memorization
    let samples: Vec<SkeletonSequence> = ds
        .samples()
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            s.label = (i * 7) % 3;
            s
        })
        .collect();
    ds = ds.with_samples(samples).unwrap();
    for kind in [RecognizerKind::Lstm, RecognizerKind::Cnn] {
        let mut spec = RecognizerSpec::new(kind, 3, 8, 3, 1);
        spec.hidden = 64;
        let s = TrainSchedule { lr: 1e-3, max_epochs: 200, early_stop_patience: 200, ..TrainSchedule::default() };
        let t = train_recognizer(Recognizer::build(spec).unwrap(), &ds, &ds, &s).unwrap();
        let acc = t.history.iter().map(|h| h.train_acc).fold(0.0, f64::max);
        assert_eq!(acc, 1.0, "{kind}");
        // identical train and validation sets: zero gap at every epoch
        assert!(t.history.iter().all(|h| h.train_loss == h.val_loss));
    }
}

#[test]
fn evaluation_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k = 5;
    let n = 20_000;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let perfect = Evaluation::from_predictions(&labels, &labels, k, 0.0).unwrap();
    assert_eq!(perfect.accuracy, 1.0);
    assert!(perfect.per_class.iter().all(|a| *a == Some(1.0)));

    let guess: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let ev = Evaluation::from_predictions(&guess, &labels, k, 0.0).unwrap();
    let p = 1.0 / k as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((ev.accuracy - p).abs() < 3.0 * se, "acc {}", ev.accuracy);
    let weighted: f64 = ev
        .per_class
        .iter()
        .zip(&ev.class_counts)
        .map(|(a, &c)| a.unwrap() * c as f64)
        .sum::<f64>()
        / n as f64;
    assert!((weighted - ev.accuracy).abs() < 1e-12);

    let missing = Evaluation::from_predictions(&[0, 0], &[0, 2], 3, 0.0).unwrap();
    assert_eq!(missing.per_class, vec![Some(1.0), None, Some(0.0)]);
    assert!(missing.report().contains("class 1 0 -"));
    assert!(Evaluation::from_predictions(&[], &[], 3, 0.0).is_err());
}

#[test]
fn cross_entropy_agrees_with_tape_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let (n, k) = (rng.random_range(1..8), rng.random_range(2..6));
        let logits = Array::from_vec(&[n, k], (0..n * k).map(|_| rng.random_range(-30.0..30.0)).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut tape = Tape::new();
        let v = tape.constant(logits.clone());
        let l = sparse_ce_loss(&mut tape, v, &labels).unwrap();
        let direct = mean_cross_entropy(&logits, &labels).unwrap();
        assert!((tape.value(l).item().unwrap() - direct).abs() < 1e-10);
    }
    let tie = Array::from_vec(&[1, 3], vec![2.0, 2.0, 1.0]).unwrap();
    assert_eq!(argmax_rows(&tie).unwrap(), vec![0]);
}

#[test]
fn identical_samples_give_identical_latents_and_checkpoints_round_trip() {
    let ds = separable(2, 8, 11);
    let dup = ds.with_samples(vec![ds.samples()[0].clone(), ds.samples()[3].clone(), ds.samples()[0].clone()]).unwrap();
    for kind in [RecognizerKind::Lstm, RecognizerKind::Cnn] {
        let r = small(kind, 8, 12);
        let lat = extract_latents(&r, &dup).unwrap();
        assert_eq!(lat.points.row(0), lat.points.row(2));
        assert_ne!(lat.points.row(0), lat.points.row(1));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.ckpt");
        r.save(&path).unwrap();
        let back = Recognizer::load(&path).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.logits(&ds).unwrap(), r.logits(&ds).unwrap());
    }
}
