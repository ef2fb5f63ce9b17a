//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use imagan::augment::{augment_dataset, sample_scale, sample_shift, AugmentPolicy, Interpolation};
use imagan::data::{
    load_msr, load_shrec, savgol_coefficients, savgol_filter, split, toy_dataset, LabeledDataset,
    ShrecLabels, SplitSpec, ToySpec, CLEAN_ORDER, CLEAN_WINDOW,
};
use imagan::gan::{
    full_objective, full_objective_var, generate, loss_cycle, loss_disc, loss_gen, loss_identity,
    train, Critic, GanConfig, GanModel, Translator,
};
use imagan::metrics::{affinity, diversity, seed_stats};
use imagan::numcore::gradcheck::{layer_gradient_check, CHECKED_LAYERS};
use imagan::numcore::{Array, Tape, Var};
use imagan::recognition::{
    evaluate, train_recognizer, Recognizer, RecognizerKind, RecognizerSpec, TrainSchedule,
    TrainedRecognizer,
};
use imagan::search::{best_policy, point_rows, run_grid, GridSpec, SearchSetup};
use imagan::viz::{neighbor_purity, pca, tsne, TsneParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String>;

fn main() {
    let checks: [(&str, Check); 11] = [
        ("1 autodiff gradients", c1_autodiff),
        ("2 loss oracles", c2_losses),
        ("3 savitzky-golay", c3_savgol),
        ("4 classical degeneracy", c4_classical),
        ("5 toy end-to-end trend", c5_toy_trend),
        ("6 withheld-class generalization", c6_generalization),
        ("7 grid search", c7_grid),
        ("8 metrics", c8_metrics),
        ("9 visualization", c9_viz),
        ("10 dataset loaders", c10_loaders),
        ("11 replay determinism", c11_replay),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in checks {
        let id = name.split(' ').next().unwrap_or_default();
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let t0 = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name}: {e:#} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn rand_seq(rng: &mut ChaCha8Rng, t: usize, b: usize, w: usize, scale: f64) -> Vec<Array> {
    (0..t)
        .map(|_| {
            let d = (0..b * w).map(|_| rng.random_range(-scale..scale)).collect();
            Array::from_vec(&[b, w], d).unwrap()
        })
        .collect()
}

fn c1_autodiff() -> Result<String> {
    let t0 = Instant::now();
    let mut worst = (0.0f64, "");
    for &layer in CHECKED_LAYERS {
        let err = layer_gradient_check(layer, 20, 2024)?;
        ensure!(err < 1e-4, "{layer}: max relative error {err:.3e}");
        if err >= worst.0 {
            worst = (err, layer);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!(
        "{} layers x 20 trials, worst {:.2e} ({}), {secs:.1}s",
        CHECKED_LAYERS.len(),
        worst.0,
        worst.1
    ))
}

/// Logit of sequence `b` is `Σ_t Σ_w c_w x_t[b, w]`.
struct LinearCritic(Vec<f64>);

impl LinearCritic {
    fn direct(&self, xs: &[Array]) -> Vec<f64> {
        let (b, w) = (xs[0].dims()[0], xs[0].dims()[1]);
        (0..b)
            .map(|i| xs.iter().map(|x| (0..w).map(|k| self.0[k] * x.get2(i, k)).sum::<f64>()).sum())
            .collect()
    }
}

impl Critic for LinearCritic {
    fn logits(&self, tape: &mut Tape, xs: &[Var]) -> imagan::Result<Var> {
        let c = tape.constant(Array::from_vec(&[self.0.len(), 1], self.0.clone())?);
        let mut acc = tape.matmul(xs[0], c)?;
        for &x in &xs[1..] {
            let l = tape.matmul(x, c)?;
            acc = tape.add(acc, l)?;
        }
        Ok(acc)
    }
}

/// `x ↦ a·x + b` elementwise.
struct Affine(f64, f64);

impl Affine {
    fn direct(&self, xs: &[Array]) -> Vec<Array> {
        xs.iter().map(|x| x.map(|v| self.0 * v + self.1)).collect()
    }
}

impl Translator for Affine {
    fn translate(&mut self, tape: &mut Tape, xs: &[Var]) -> imagan::Result<Vec<Var>> {
        xs.iter()
            .map(|&x| {
                let s = tape.scale(x, self.0)?;
                let dims = tape.value(x).dims().to_vec();
                let b = tape.constant(Array::full(&dims, self.1)?);
                tape.add(s, b)
            })
            .collect()
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn mean_abs_diff(a: &[Array], b: &[Array]) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.data().iter().zip(y.data()) {
            s += (u - v).abs();
            n += 1;
        }
    }
    s / n as f64
}

fn c2_losses() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (t, b, w) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..4));
        let d = LinearCritic((0..w).map(|_| rng.random_range(-3.0..3.0)).collect());
        let mut g = Affine(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let mut f = Affine(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let x = rand_seq(&mut rng, t, b, w, 2.0);
        let y = rand_seq(&mut rng, t, b, w, 2.0);
        let (l1, l2) = (rng.random_range(0.0..20.0), rng.random_range(0.0..10.0));
        let mut tape = Tape::new();
        let xv: Vec<Var> = x.iter().map(|a| tape.constant(a.clone())).collect();
        let yv: Vec<Var> = y.iter().map(|a| tape.constant(a.clone())).collect();
        let lg = loss_gen(&mut tape, &d, &yv)?;
        let ld = loss_disc(&mut tape, &d, &xv, &yv)?;
        let lc = loss_cycle(&mut tape, &mut g, &mut f, &xv, &yv)?;
        let li = loss_identity(&mut tape, &mut g, &xv, &yv)?;
        let obj = full_objective_var(&mut tape, lg, lc, li, l1, l2)?;

        let n = b as f64;
        let (lr, lf) = (d.direct(&x), d.direct(&y));
        let gen = -lf.iter().map(|&l| log_sigmoid(l)).sum::<f64>() / n;
        let disc = -lr.iter().map(|&l| log_sigmoid(l)).sum::<f64>() / n - lf.iter().map(|&l| log_sigmoid(-l)).sum::<f64>() / n;
        let cyc = mean_abs_diff(&f.direct(&g.direct(&x)), &x) + mean_abs_diff(&g.direct(&f.direct(&y)), &y);
        let id = mean_abs_diff(&g.direct(&y), &y) + mean_abs_diff(&g.direct(&x), &x);
        let direct = gen + l1 * cyc + l2 * id;
        for (v, o) in [(lg, gen), (ld, disc), (lc, cyc), (li, id), (obj, direct)] {
            let e = (tape.value(v).item()? - o).abs();
            ensure!(e < 1e-10, "loss differs from its oracle by {e:.3e}");
            worst = worst.max(e);
        }
        ensure!((full_objective(gen, cyc, id, l1, l2) - direct).abs() < 1e-10, "scalar objective");
    }
    let mut tape = Tape::new();
    let x = rand_seq(&mut rng, 4, 3, 2, 1.0);
    let y = rand_seq(&mut rng, 4, 3, 2, 1.0);
    let xv: Vec<Var> = x.iter().map(|a| tape.constant(a.clone())).collect();
    let yv: Vec<Var> = y.iter().map(|a| tape.constant(a.clone())).collect();
    let (mut id_g, mut id_f) = (Affine(1.0, 0.0), Affine(1.0, 0.0));
    let c = loss_cycle(&mut tape, &mut id_g, &mut id_f, &xv, &yv)?;
    let i = loss_identity(&mut tape, &mut id_g, &xv, &yv)?;
    ensure!(tape.value(c).item()? == 0.0 && tape.value(i).item()? == 0.0, "identity stubs give nonzero loss");
    Ok(format!("100 random cases, worst deviation {worst:.2e}; identity stubs exactly 0"))
}

/// Row 0 of `(AᵀA)⁻¹Aᵀ` for the monomial design at `positions`, by
/// Gaussian elimination on the normal equations.
fn lsq_weights(positions: &[f64], order: usize) -> Vec<f64> {
    let p = order + 1;
    let a: Vec<Vec<f64>> = positions.iter().map(|&x| (0..p).map(|j| x.powi(j as i32)).collect()).collect();
    let mut m: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| a.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let mut rhs = vec![0.0; p];
    rhs[0] = 1.0;
    for c in 0..p {
        let piv = (c..p).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        rhs.swap(c, piv);
        for r in (0..p).filter(|&r| r != c) {
            let f = m[r][c] / m[c][c];
            for k in c..p {
                m[r][k] -= f * m[c][k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let z: Vec<f64> = (0..p).map(|i| rhs[i] / m[i][i]).collect();
    a.iter().map(|r| r.iter().zip(&z).map(|(u, v)| u * v).sum()).collect()
}

fn c3_savgol() -> Result<String> {
    let c = savgol_coefficients(CLEAN_WINDOW, CLEAN_ORDER)?;
    let pos: Vec<f64> = (-3..=3).map(f64::from).collect();
    let oracle = lsq_weights(&pos, 3);
    let coef_err = c.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(coef_err < 1e-12, "coefficients deviate by {coef_err:.3e}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = rng.random_range(4..40);
        let x: Vec<f64> = (0..t)
            .map(|i| {
                let u = i as f64 / 10.0;
                k[0] + k[1] * u + k[2] * u * u + k[3] * u * u * u
            })
            .collect();
        let y = savgol_filter(&x, 7, 3)?;
        worst = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure!(worst < 1e-10, "cubic changed by {worst:.3e}");
    Ok(format!("coefficient error {coef_err:.1e}, 200 cubics moved at most {worst:.1e}"))
}

fn c4_classical() -> Result<String> {
    let ds = toy_dataset(&ToySpec::default(), 5)?;
    for m in [1, 2, 4] {
        let mut p = AugmentPolicy::with_joints(0.0, 0.0, 0.0, (1, 1), 7);
        p.multiplier = m;
        p.interpolation = Interpolation::Knots;
        let out = augment_dataset(&ds, &p)?.dataset;
        ensure!(out.len() == m * ds.len(), "multiplier {m}: {} samples", out.len());
        for (k, s) in out.samples().iter().enumerate() {
            ensure!(s == &ds.samples()[k / m], "multiplier {m}: copy {k} differs from its source");
        }
    }
    let n = 100_000;
    let sigma = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let s: Vec<f64> = (0..n).map(|_| sample_scale(&mut rng, sigma)).collect();
    let d: Vec<f64> = (0..n).map(|_| sample_shift(&mut rng, sigma)[0]).collect();
    let moments = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        (m, v.sqrt())
    };
    let se_mean = sigma / (n as f64).sqrt();
    let se_std = sigma / (2.0 * n as f64).sqrt();
    let (ms, ss) = moments(&s);
    let (md, sd) = moments(&d);
    let z = [
        (ms - 1.0) / se_mean,
        (ss - sigma) / se_std,
        md / se_mean,
        (sd - sigma) / se_std,
    ];
    ensure!(z.iter().all(|v| v.abs() < 3.0), "sampler z-scores {z:?}");
    Ok(format!(
        "bit-exact copies at multiplicity 1/2/4; sampler z-scores {:.2}/{:.2}/{:.2}/{:.2}",
        z[0], z[1], z[2], z[3]
    ))
}

/// Clean toy data split 60/60, as the toy recipes prepare it.
fn toy_split() -> Result<(LabeledDataset, LabeledDataset)> {
    let spec = ToySpec { per_class: 40, frames: 40, ..ToySpec::default() };
    let ds = toy_dataset(&spec, 0)?.clean(CLEAN_WINDOW, CLEAN_ORDER)?;
    Ok(split(&ds, &SplitSpec::Ratio { ratio: 0.5, seed: 0 })?)
}

fn toy_gan_config() -> GanConfig {
    GanConfig { hidden: 64, batch: 10, lr: 1e-3, max_epochs: 300, seed: 0, ..GanConfig::default() }
}

fn toy_recognizer(train: &LabeledDataset, val: &LabeledDataset, seed: u64) -> Result<TrainedRecognizer> {
    let mut spec = RecognizerSpec::lstm(train.num_classes(), 40, train.width(), seed);
    spec.hidden = 32;
    spec.attention = 16;
    let s = TrainSchedule { lr: 1e-3, batch: 64, max_epochs: 100, ..TrainSchedule::default() };
    Ok(train_recognizer(Recognizer::build(spec)?, train, val, &s)?)
}

const SEEDS: [u64; 4] = [0, 1, 2, 3];

/// Pooled per-channel mean and std over every frame.
fn channel_stats(ds: &LabeledDataset) -> Vec<(f64, f64)> {
    let w = ds.width();
    let rows: Vec<&[f64]> = ds.samples().iter().flat_map(|s| (0..s.len()).map(move |t| s.frame(t))).collect();
    (0..w)
        .map(|c| {
            let n = rows.len() as f64;
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        })
        .collect()
}

fn single_core<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

fn c5_toy_trend() -> Result<String> {
    single_core(|| {
        let (train_set, val) = toy_split()?;
        ensure!(train_set.len() == 60 && val.len() == 60, "split {}/{}", train_set.len(), val.len());
        let mut gan = GanModel::new(train_set.width(), toy_gan_config())?;
        let t0 = Instant::now();
        let out = train(&mut gan, &train_set, |_, _| Ok(()))?;
        let gan_secs = t0.elapsed().as_secs_f64();
        let (first, last) = (out.history[0].losses.objective, out.history.last().unwrap().losses.objective);
        let epochs = out.history.len();
        ensure!(out.converged, "GAN did not converge in {epochs} epochs");
        ensure!(gan_secs < 900.0, "GAN took {gan_secs:.0}s");
        ensure!(last < first, "objective rose from {first:.4} to {last:.4}");

        let gad = generate(&gan, &train_set, 4, gan.config.noise_sigma, 0)?;
        let (real, fake) = (channel_stats(&train_set), channel_stats(&gad));
        let mut worst = 0.0f64;
        for (c, (r, g)) in real.iter().zip(&fake).enumerate() {
            let dm = (g.0 - r.0).abs() / r.0.abs();
            let ds = (g.1 - r.1).abs() / r.1;
            ensure!(dm <= 0.2 && ds <= 0.2, "channel {c}: mean {:.3} vs {:.3}, std {:.3} vs {:.3}", g.0, r.0, g.1, r.1);
            worst = worst.max(dm).max(ds);
        }

        let mut cd = Vec::new();
        let mut ga = Vec::new();
        for seed in SEEDS {
            cd.push(evaluate(&toy_recognizer(&train_set, &val, seed)?.recognizer, &val)?.accuracy);
            ga.push(evaluate(&toy_recognizer(&gad, &val, seed)?.recognizer, &val)?.accuracy);
        }
        let (cd_m, cd_se) = seed_stats(&cd)?;
        let (ga_m, ga_se) = seed_stats(&ga)?;
        let summary = format!(
            "GAN converged at epoch {epochs} in {gan_secs:.0}s (objective {first:.3} -> {last:.3}); \
             moments within {:.1}%; CD {:.1}% +- {:.3}, GAD {:.1}% +- {:.3}",
            100.0 * worst,
            100.0 * cd_m,
            cd_se,
            100.0 * ga_m,
            ga_se
        );
        ensure!(ga_m >= cd_m - 0.02, "GAD accuracy below CD - 2pp: {summary}");
        ensure!(ga_se <= cd_se + 0.02, "GAD std-error above CD + 0.02: {summary}");
        Ok(summary)
    })
}

/// Withheld classes, drawn the way the generalization recipe draws them.
fn withheld_classes(classes: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..classes).collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut w = all[..count].to_vec();
    w.sort_unstable();
    w
}

fn c6_generalization() -> Result<String> {
    single_core(|| {
        let (train_set, val) = toy_split()?;
        let withheld = withheld_classes(3, 1, 0);
        let seen = train_set.filter_classes(|c| !withheld.contains(&c))?;
        let cfg = toy_gan_config();
        let mut gan = GanModel::new(seen.width(), cfg.clone())?;
        train(&mut gan, &seen, |_, _| Ok(()))?;
        let gen = generate(&gan, &val, 4, cfg.noise_sigma, 0)?;
        let mut per_class = vec![Vec::new(); 3];
        for seed in SEEDS {
            let r = toy_recognizer(&train_set, &val, seed)?.recognizer;
            for (k, a) in evaluate(&r, &gen)?.per_class.into_iter().enumerate() {
                per_class[k].extend(a);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let acc: Vec<f64> = per_class.iter().map(|v| mean(v)).collect();
        let seen_mean = mean(&(0..3).filter(|k| !withheld.contains(k)).map(|k| acc[k]).collect::<Vec<_>>());
        let w = withheld[0];
        let gap = acc[w] - seen_mean;
        let summary = format!(
            "withheld class {w}: {:.1}% vs seen mean {:.1}% (gap {:+.1}pp)",
            100.0 * acc[w],
            100.0 * seen_mean,
            100.0 * gap
        );
        ensure!(gap.abs() <= 0.10, "{summary}");
        Ok(summary)
    })
}

/// Max accuracy, ties to the smallest (noise, shift, scale), by rescanning the table.
fn rescan(table: &str) -> usize {
    let rows: Vec<Vec<f64>> = table
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        let b = &rows[best];
        if r[4] > b[4] || (r[4] == b[4] && (r[3], r[2], r[1]) < (b[3], b[2], b[1])) {
            best = i;
        }
    }
    best
}

fn c7_grid() -> Result<String> {
    let (c, f) = (GridSpec::coarse().points(), GridSpec::fine().points());
    ensure!(c.len() == 75 && f.len() == 75, "grid sizes {} and {}", c.len(), f.len());
    let spec = ToySpec { per_class: 6, frames: 12, ..ToySpec::default() };
    let train_set = toy_dataset(&spec, 1)?;
    let val = toy_dataset(&spec, 2)?;
    let mut rec = RecognizerSpec::lstm(3, 12, 3, 0);
    rec.hidden = 8;
    rec.attention = 4;
    let mut base = AugmentPolicy::with_joints(0.0, 0.0, 0.0, (1, 1), 0);
    base.multiplier = 2;
    let setup = SearchSetup {
        train: &train_set,
        val: &val,
        base_policy: base,
        recognizer: rec,
        schedule: TrainSchedule { lr: 3e-3, max_epochs: 4, ..TrainSchedule::default() },
        include_clean: false,
    };
    let grid = GridSpec {
        sigma_scale: vec![0.1, 0.2],
        sigma_shift: vec![0.1, 0.2],
        sigma_noise: vec![0.1, 0.2],
        seeds: vec![0, 1],
        kind: RecognizerKind::Lstm,
        max_seconds: None,
    };
    let result = run_grid(&setup, &grid)?;
    ensure!(result.points.len() == 8, "{} points", result.points.len());
    for p in &result.points {
        let alone = GridSpec {
            sigma_scale: vec![p.sigmas[0]],
            sigma_shift: vec![p.sigmas[1]],
            sigma_noise: vec![p.sigmas[2]],
            ..grid.clone()
        };
        let r = single_core(|| run_grid(&setup, &alone))?;
        ensure!(r.points[0].report == p.report, "point {} differs when run alone", p.index);
    }
    let table = point_rows(&result);
    let oracle = rescan(&table);
    ensure!(result.best == oracle, "best {} vs table scan {oracle}", result.best);
    let pol = best_policy(&result, &setup.base_policy)?;
    ensure!([pol.sigma_scale, pol.sigma_shift, pol.sigma_noise] == result.points[oracle].sigmas, "best policy σ");
    Ok(format!("75/75 preset points; 8 toy rows reproduce alone; best row {oracle} matches the scan"))
}

fn c8_metrics() -> Result<String> {
    let spec = ToySpec { per_class: 10, frames: 12, ..ToySpec::default() };
    let (train_set, val) = (toy_dataset(&spec, 1)?, toy_dataset(&spec, 2)?);
    let mk = |seed| -> Result<Recognizer> {
        let mut s = RecognizerSpec::lstm(3, 12, 3, seed);
        s.hidden = 16;
        s.attention = 8;
        Ok(Recognizer::build(s)?)
    };
    let sched = TrainSchedule { lr: 3e-3, max_epochs: 30, ..TrainSchedule::default() };
    let r = train_recognizer(mk(0)?, &train_set, &val, &sched)?.recognizer;
    let a = affinity(&r, &val, &val)?.value;
    ensure!(a == 0.0, "affinity of identical sets {a}");
    let (m, se) = seed_stats(&[0.7, 0.9])?;
    ensure!((m - 0.8).abs() < 1e-12 && (se - 0.1).abs() < 1e-12, "seed_stats gave ({m}, {se})");
    let tiny = toy_dataset(&ToySpec { per_class: 3, frames: 12, ..ToySpec::default() }, 9)?;
    let memo = train_recognizer(mk(1)?, &tiny, &tiny, &TrainSchedule { max_epochs: 60, ..sched })?;
    let d = diversity(&memo)?;
    ensure!(d.abs() < 0.05, "memorization diversity {d}");
    Ok(format!("affinity 0, seed_stats (0.8, 0.1), memorization diversity {d:.4}"))
}

fn c9_viz() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (per, d) = (50, 10);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for _ in 0..per {
            data.extend((0..d).map(|k| if k == 0 { 20.0 * c as f64 } else { 0.0 } + 0.5 * rng.random_range(-1.0..1.0)));
            labels.push(c);
        }
    }
    let x = Array::from_vec(&[2 * per, d], data)?;
    let params = TsneParams::default();
    let t = tsne(&x, &params)?;
    let purity = neighbor_purity(&t.points, &labels)?;
    ensure!(purity >= 0.9, "purity {purity}");
    let rise = t.kl_trace[params.exaggeration_iters..]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(rise <= 1e-6, "KL rose by {rise:.3e} after exaggeration");

    let dim = 64;
    let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut plane = Vec::new();
    for _ in 0..40 {
        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        plane.extend((0..dim).map(|k| 2.0 + a * u[k] + b * v[k]));
    }
    let p = pca(&Array::from_vec(&[40, dim], plane)?, 2)?;
    let total: f64 = p.explained.iter().sum();
    ensure!((total - 1.0).abs() < 1e-10, "planar PCA explains {total}");
    Ok(format!("purity {purity:.2}, largest post-exaggeration KL step {rise:+.1e}, planar PCA {total:.12}"))
}

fn fixture_root() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn c10_loaders() -> Result<String> {
    let mut notes = Vec::new();
    match std::env::var_os("IMAGAN_SHREC_ROOT") {
        Some(root) => {
            let n = load_shrec(Path::new(&root), ShrecLabels::Gestures14)?.len();
            ensure!(n == 2800, "SHREC'17 parsed to {n} sequences");
            notes.push("SHREC'17 2800".to_string());
        }
        None => {
            let ds = load_shrec(&fixture_root().join("shrec"), ShrecLabels::Gestures14)?;
            ensure!(ds.len() == 3 && ds.joints() == 22, "SHREC fixture parsed to {} x {}", ds.len(), ds.joints());
            notes.push("SHREC fixture 3".to_string());
        }
    }
    match std::env::var_os("IMAGAN_MSR_ROOT") {
        Some(root) => {
            let n = load_msr(Path::new(&root))?.len();
            ensure!(n == 567, "MSR Action3D parsed to {n} sequences");
            notes.push("MSR Action3D 567".to_string());
        }
        None => {
            let ds = load_msr(&fixture_root().join("msr"))?;
            ensure!(ds.len() == 3 && ds.joints() == 20, "MSR fixture parsed to {} x {}", ds.len(), ds.joints());
            notes.push("MSR fixture 3".to_string());
        }
    }
    Ok(notes.join(", "))
}

fn imagan(dir: &Path, args: &[&str]) -> Result<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_imagan")).args(args).current_dir(dir).output()?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure!(
        out.status.success(),
        "`imagan {}` exited with {}: {}",
        args.join(" "),
        out.status,
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(stdout)
}

const TINY_RECIPE: &str = "[run-recipe]\nper-class = 6\nframes = 16\nrec-max-epochs = 2\nrec-hidden = 8\nrec-attention = 4\ngan-max-epochs = 2\ngan-hidden = 8\nseeds = \"0,1\"\n";

fn c11_replay() -> Result<String> {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path();
    std::fs::write(dir.join("grid.txt"), "sigma_scale = 0.1\nsigma_shift = 0.1, 0.2\nsigma_noise = 0.1\nseeds = 0\n")?;
    std::fs::write(dir.join("tiny.toml"), TINY_RECIPE)?;
    let rec = ["--hidden", "8", "--attention", "4", "--max-epochs", "2"];
    let runs: Vec<(Vec<&str>, &str)> = vec![
        (
            vec!["prepare", "--dataset", "toy", "--per-class", "6", "--frames", "16", "--out", "cd.imds", "--split", "ratio:0.5", "--train-out", "tr.imds", "--val-out", "va.imds"],
            "cd.imds.manifest.json",
        ),
        (vec!["augment-classical", "--in", "tr.imds", "--out", "cad.imds", "--multiplier", "2"], "cad.imds.manifest.json"),
        (vec!["augment-classical", "--in", "va.imds", "--out", "cadv.imds", "--multiplier", "1"], "cadv.imds.manifest.json"),
        (vec!["train-gan", "--in", "tr.imds", "--out", "gan.ckpt", "--hidden", "8", "--batch", "4", "--max-epochs", "2"], "gan.ckpt.manifest.json"),
        (vec!["generate", "--ckpt", "gan.ckpt", "--in", "tr.imds", "--out", "gad.imds", "--per-sample", "2"], "gad.imds.manifest.json"),
        (
            [&["train-recognizer", "--train", "tr.imds", "--val", "va.imds", "--out", "cd.ckpt"][..], &rec[..]].concat(),
            "cd.ckpt.manifest.json",
        ),
        (
            [&["train-recognizer", "--train", "cad.imds", "--val", "va.imds", "--out", "cad.ckpt"][..], &rec[..]].concat(),
            "cad.ckpt.manifest.json",
        ),
        (vec!["evaluate", "--ckpt", "cd.ckpt", "--data", "va.imds", "--report", "eval.txt"], "eval.txt.manifest.json"),
        (
            vec!["metrics", "--run", "cd.ckpt:cad.ckpt", "--val", "va.imds", "--aug-val", "cadv.imds", "--out", "metrics.txt"],
            "metrics.txt.manifest.json",
        ),
        (
            [&["grid-search", "--grid", "grid.txt", "--dataset", "tr.imds", "--val", "va.imds", "--out", "grid"][..], &rec[..]].concat(),
            "grid/manifest.json",
        ),
        (
            vec!["visualize", "--ckpt", "cd.ckpt", "--data", "va.imds", "--out", "embed.csv", "--perplexity", "2", "--iterations", "60"],
            "embed.csv.manifest.json",
        ),
        (vec!["--config", "tiny.toml", "run-recipe", "generalization", "--out", "recipe"], "recipe/manifest.json"),
    ];
    let mut compared = 0;
    for (args, manifest) in &runs {
        imagan(dir, args)?;
        let out = imagan(dir, &["replay", manifest])?;
        let last = out.lines().last().unwrap_or_default();
        ensure!(last.starts_with("replay identical"), "{} replay: {last}", args[0]);
        compared += last.split_whitespace().nth(2).and_then(|n| n.parse::<usize>().ok()).unwrap_or(0);
    }
    Ok(format!("{} command runs replayed, {compared} artifact checksums identical", runs.len()))
}
