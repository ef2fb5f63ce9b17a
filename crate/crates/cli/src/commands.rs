//! One function per pipeline command. Each resolves its settings first,
//! rejects unknown config keys, then runs its stages.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use imagan::augment::{augment_dataset, AugmentPolicy, Interpolation};
use imagan::data::{
    export_normalized, import_normalized, load_msr, load_shrec, split, toy_dataset, LabeledDataset, ShrecLabels,
    SplitSpec, ToySpec, CLEAN_ORDER, CLEAN_WINDOW, MSR_JOINTS, NORMALIZED_MAGIC, SHREC_JOINTS,
};
use imagan::gan::{self, GanConfig, GanModel};
use imagan::metrics::{affinity, diversity, AffinityDiversityReport};
use imagan::numcore::Checkpoint;
use imagan::recognition::{
    evaluate as evaluate_recognizer, extract_latents, train_recognizer, Recognizer, RecognizerKind, RecognizerSpec,
    TrainSchedule,
};
use imagan::search::{point_rows, run_grid, timing_rows, GridSpec, SearchSetup};
use imagan::viz::{embed_latents, neighbor_purity, TsneParams};

use crate::args::*;
use crate::errors::usage;
use crate::manifest::{file_sha256, Run};

/// Environment variable naming the directory that holds dataset roots.
pub const DATA_DIR_ENV: &str = "IMAGAN_DATA_DIR";

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| usage(format!("bad {what} {t:?} in {s:?}"))))
        .collect()
}

pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("expected MIN:MAX, got {s:?}")))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|_| usage(format!("bad count {t:?} in {s:?}")));
    Ok((p(a)?, p(b)?))
}

/// `predefined`, `odd-subjects`, `subjects:1,3` or `ratio:0.7`.
pub fn parse_split(s: &str, seed: u64) -> Result<SplitSpec> {
    match s.split_once(':') {
        None if s == "predefined" => Ok(SplitSpec::Predefined),
        None if s == "odd-subjects" => Ok(SplitSpec::OddSubjects),
        Some(("subjects", list)) => Ok(SplitSpec::Subjects { train: parse_list(list, "subject")? }),
        Some(("ratio", r)) => {
            let ratio: f64 = r.trim().parse().map_err(|_| usage(format!("bad ratio {r:?}")))?;
            Ok(SplitSpec::Ratio { ratio, seed })
        }
        _ => Err(usage(format!(
            "unknown split {s:?}; expected predefined, odd-subjects, subjects:LIST or ratio:R"
        ))),
    }
}

/// Noised-joint range for a skeleton of `joints` joints.
pub fn default_joint_range(joints: usize) -> (usize, usize) {
    match joints {
        SHREC_JOINTS => (1, 8),
        MSR_JOINTS => (1, 4),
        j => (1, j.clamp(1, 4)),
    }
}

fn kind(s: &str) -> Result<RecognizerKind> {
    RecognizerKind::parse(s).map_err(|e| usage(e.to_string()))
}

fn load(run: &mut Run, path: &Path) -> Result<LabeledDataset> {
    let ds = import_normalized(path)?;
    run.input(path)?;
    Ok(ds)
}

fn export(run: &mut Run, ds: &LabeledDataset, path: &Path) -> Result<()> {
    crate::manifest::ensure_parent(path)?;
    export_normalized(ds, path)?;
    run.artifact(path)
}

/// `<path><suffix>`.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn dataset_root(root: Option<&Path>, kind: DatasetKind) -> Result<PathBuf> {
    if let Some(r) = root {
        return Ok(r.to_path_buf());
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => Ok(PathBuf::from(dir).join(kind.as_str())),
        None => Err(usage(format!("--root is required when {DATA_DIR_ENV} is unset"))),
    }
}

fn reject_normalized(root: &Path) -> Result<()> {
    if root.is_file() {
        let head = std::fs::read(root).with_context(|| format!("reading {}", root.display()))?;
        if head.starts_with(NORMALIZED_MAGIC.as_bytes()) {
            return Err(usage(format!(
                "{} is already a prepared dataset; prepare expects a raw dataset root",
                root.display()
            )));
        }
    }
    Ok(())
}

pub fn prepare(run: &mut Run, a: &PrepareArgs) -> Result<()> {
    run.settings.fixed("dataset", &a.dataset.as_str())?;
    let window = run.settings.get("window", a.window, CLEAN_WINDOW)?;
    let order = run.settings.get("order", a.order, CLEAN_ORDER)?;
    let split_text = run.settings.opt("split", a.split.clone())?;
    let split_seed = run.settings.get("split-seed", a.split_seed, 0u64)?;
    let split_spec = split_text.map(|s| parse_split(&s, split_seed)).transpose()?;
    let outs = match (&split_spec, &a.train_out, &a.val_out) {
        (Some(s), Some(t), Some(v)) => Some((s.clone(), t.clone(), v.clone())),
        (None, None, None) => None,
        _ => return Err(usage("--split, --train-out and --val-out must be given together")),
    };
    let raw = match a.dataset {
        DatasetKind::Normalized => {
            return Err(usage(
                "normalized data is already prepared; prepare reads shrec17, msr3d or toy sources",
            ))
        }
        DatasetKind::Toy => {
            let d = ToySpec::default();
            let spec = ToySpec {
                classes: run.settings.get("classes", a.classes, d.classes)?,
                per_class: run.settings.get("per-class", a.per_class, d.per_class)?,
                frames: run.settings.get("frames", a.frames, d.frames)?,
                noise: run.settings.get("toy-noise", a.toy_noise, d.noise)?,
            };
            let seed = run.settings.get("seed", a.seed, 0u64)?;
            run.settings.check_unused()?;
            run.seed(seed);
            run.stage("load", |_| Ok(toy_dataset(&spec, seed)?))?
        }
        DatasetKind::Shrec17 | DatasetKind::Msr3d => {
            let root = dataset_root(a.root.as_deref(), a.dataset)?;
            run.settings.fixed("root", &root)?;
            let labels = match run.settings.get("labels", a.labels, 14usize)? {
                14 => ShrecLabels::Gestures14,
                28 => ShrecLabels::Gestures28,
                n => return Err(usage(format!("--labels must be 14 or 28, got {n}"))),
            };
            run.settings.check_unused()?;
            reject_normalized(&root)?;
            let ds = run.stage("load", |_| {
                Ok(match a.dataset {
                    DatasetKind::Shrec17 => load_shrec(&root, labels)?,
                    _ => load_msr(&root)?,
                })
            })?;
            run.input_checksum(&root, ds.checksum());
            ds
        }
    };
    let cd = run.stage("clean", |_| Ok(raw.clean(window, order)?))?;
    run.note("samples", cd.len());
    run.note("classes", cd.num_classes());
    run.note("joints", cd.joints());
    run.note("frames", cd.require_fixed_len()?);
    run.stage("export", |run| {
        export(run, &cd, &a.out)?;
        if let Some((spec, t, v)) = &outs {
            let (train, val) = split(&cd, spec)?;
            run.note("train_samples", train.len());
            run.note("val_samples", val.len());
            export(run, &train, t)?;
            export(run, &val, v)?;
        }
        Ok(())
    })
}

pub fn augment_classical(run: &mut Run, a: &AugmentArgs) -> Result<()> {
    let ds = load(run, &a.input)?;
    let (jmin, jmax) = default_joint_range(ds.joints());
    let joints = parse_range(&run.settings.get("joints", a.joints.clone(), format!("{jmin}:{jmax}"))?)?;
    let interpolation = match run.settings.get("interpolation", a.interpolation.clone(), "random".into())?.as_str() {
        "random" => Interpolation::Random,
        "knots" => Interpolation::Knots,
        other => return Err(usage(format!("interpolation must be random or knots, got {other:?}"))),
    };
    let policy = AugmentPolicy {
        sigma_scale: run.settings.get("sigma-scale", a.sigma_scale, 0.1)?,
        sigma_shift: run.settings.get("sigma-shift", a.sigma_shift, 0.1)?,
        sigma_noise: run.settings.get("sigma-noise", a.sigma_noise, 0.1)?,
        joints,
        multiplier: run.settings.get("multiplier", a.multiplier, 4usize)?,
        seed: run.settings.get("seed", a.seed, 0u64)?,
        interpolation,
    };
    run.settings.check_unused()?;
    run.seed(policy.seed);
    let out = run.stage("augment", |_| Ok(augment_dataset(&ds, &policy)?))?;
    run.note("samples", out.dataset.len());
    run.note("interpolation_skipped", out.warnings.len());
    run.stage("export", |run| export(run, &out.dataset, &a.out))
}

fn class_filter(run: &mut Run, key: &str, flag: Option<String>, k: usize) -> Result<Vec<usize>> {
    let list: Vec<usize> = match run.settings.opt(key, flag)? {
        Some(s) => parse_list(&s, "class")?,
        None => Vec::new(),
    };
    if let Some(c) = list.iter().find(|&&c| c >= k) {
        return Err(usage(format!("class {c} is out of range for {k} classes")));
    }
    Ok(list)
}

pub fn train_gan(run: &mut Run, a: &TrainGanArgs) -> Result<()> {
    let all = load(run, &a.input)?;
    let d = GanConfig::default();
    let s = &mut run.settings;
    let cfg = GanConfig {
        hidden: s.get("hidden", a.hidden, d.hidden)?,
        batch: s.get("batch", a.batch, d.batch)?,
        max_epochs: s.get("max-epochs", a.max_epochs, d.max_epochs)?,
        window: s.get("window", a.window, d.window)?,
        tolerance: s.get("tolerance", a.tolerance, d.tolerance)?,
        lr: s.get("lr", a.lr, d.lr)?,
        beta1: s.get("beta1", a.beta1, d.beta1)?,
        beta2: d.beta2,
        lambda1: s.get("lambda1", a.lambda1, d.lambda1)?,
        lambda2: s.get("lambda2", a.lambda2, d.lambda2)?,
        noise_sigma: s.get("noise-sigma", a.noise_sigma, d.noise_sigma)?,
        seed: s.get("seed", a.seed, d.seed)?,
    };
    let excluded = class_filter(run, "exclude-classes", a.exclude_classes.clone(), all.num_classes())?;
    run.settings.check_unused()?;
    run.seed(cfg.seed);
    let ds = if excluded.is_empty() {
        all
    } else {
        all.filter_classes(|c| !excluded.contains(&c))?
    };
    let frames = ds.require_fixed_len()?;
    let mut model = GanModel::new(ds.width(), cfg)?;
    let outcome = run.stage("train", |_| Ok(gan::train(&mut model, &ds, |_, _| Ok(()))?))?;
    let h = &outcome.history;
    let last = h.last().map_or(0.0, |e| e.losses.objective);
    run.note("epochs", h.len());
    run.note("converged", outcome.converged);
    run.note("first_objective", h.first().map_or(0.0, |e| e.losses.objective));
    run.note("last_objective", last);
    run.note("train_samples", ds.len());
    run.stage("save", |run| {
        let mut table = String::from("epoch\tobjective\tgen_g\tgen_f\tcycle\tidentity_g\tidentity_f\tdisc_x\tdisc_y\n");
        for e in h {
            let l = &e.losses;
            let _ = writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.epoch, l.objective, l.gen_g, l.gen_f, l.cycle, l.identity_g, l.identity_f, l.disc_x, l.disc_y
            );
        }
        let history = a.history.clone().unwrap_or_else(|| suffixed(&a.out, ".history.tsv"));
        run.write_artifact(&history, &table)?;
        let mut ck = model.to_checkpoint()?;
        let excluded_text = excluded.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        for (k, v) in [
            ("joints", ds.joints().to_string()),
            ("frames", frames.to_string()),
            ("epoch", h.len().to_string()),
            ("converged", outcome.converged.to_string()),
            ("excluded_classes", excluded_text),
        ] {
            ck.meta.insert(k.into(), v);
        }
        crate::manifest::ensure_parent(&a.out)?;
        ck.save(&a.out)?;
        run.artifact(&a.out)
    })
}

pub fn generate(run: &mut Run, a: &GenerateArgs) -> Result<()> {
    let model = GanModel::load(&a.ckpt)?;
    run.input(&a.ckpt)?;
    let src = load(run, &a.input)?;
    let per = run.settings.get("per-sample", a.per_sample, 4usize)?;
    let noise = run.settings.get("noise-sigma", a.noise_sigma, model.config.noise_sigma)?;
    let seed = run.settings.get("seed", a.seed, 0u64)?;
    let classes = class_filter(run, "classes", a.classes.clone(), src.num_classes())?;
    run.settings.check_unused()?;
    run.seed(seed);
    let src = if classes.is_empty() {
        src
    } else {
        src.filter_classes(|c| classes.contains(&c))?
    };
    let out = run.stage("generate", |_| Ok(gan::generate(&model, &src, per, noise, seed)?))?;
    run.note("samples", out.len());
    run.stage("export", |run| export(run, &out, &a.out))
}

fn schedule(run: &mut Run, lr: Option<f64>, batch: Option<usize>, max_epochs: Option<usize>) -> Result<TrainSchedule> {
    let d = TrainSchedule::default();
    Ok(TrainSchedule {
        lr: run.settings.get("lr", lr, d.lr)?,
        batch: run.settings.get("batch", batch, d.batch)?,
        max_epochs: run.settings.get("max-epochs", max_epochs, d.max_epochs)?,
        ..d
    })
}

pub fn train_recognizer_cmd(run: &mut Run, a: &TrainRecognizerArgs) -> Result<()> {
    let kind = kind(&run.settings.get("kind", a.kind.clone(), "lstm".into())?)?;
    let seed = run.settings.get("seed", a.seed, 0u64)?;
    let mut sched = schedule(run, a.lr, a.batch, a.max_epochs)?;
    sched.plateau_patience = run.settings.get("plateau-patience", a.plateau_patience, sched.plateau_patience)?;
    sched.early_stop_patience =
        run.settings.get("early-stop-patience", a.early_stop_patience, sched.early_stop_patience)?;
    sched.lr_factor = run.settings.get("lr-factor", a.lr_factor, sched.lr_factor)?;
    sched.plateau_threshold = run.settings.get("plateau-threshold", a.plateau_threshold, sched.plateau_threshold)?;
    let base = RecognizerSpec::new(kind, 2, 1, 1, seed);
    let hidden = run.settings.get("hidden", a.hidden, base.hidden)?;
    let attention = run.settings.get("attention", a.attention, base.attention)?;
    let channels = run
        .settings
        .get("channels", a.channels.clone(), format!("{}:{}", base.channels.0, base.channels.1))?;
    let channels = parse_range(&channels)?;
    run.settings.check_unused()?;
    run.seed(seed);

    let mut train = load(run, &a.train[0])?;
    for p in &a.train[1..] {
        let more = load(run, p)?;
        train = train.concat(&more)?;
    }
    let val = load(run, &a.val)?;
    let spec = RecognizerSpec {
        hidden,
        attention,
        channels,
        ..RecognizerSpec::new(kind, train.num_classes(), train.require_fixed_len()?, train.width(), seed)
    };
    let rec = Recognizer::build(spec)?;
    let trained = run.stage("train", |_| Ok(train_recognizer(rec, &train, &val, &sched)?))?;
    let best = *trained.best();
    let div = diversity(&trained)?;
    run.note("train_samples", train.len());
    run.note("best_epoch", trained.best_epoch);
    run.note("stopped_epoch", trained.stopped_epoch);
    run.note("best_val_acc", best.val_acc);
    run.note("diversity", div);
    run.stage("save", |run| {
        let mut table = String::from("epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc\n");
        for e in &trained.history {
            let _ = writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.epoch, e.lr, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            );
        }
        let history = a.history.clone().unwrap_or_else(|| suffixed(&a.out, ".history.tsv"));
        run.write_artifact(&history, &table)?;
        let mut ck = trained.recognizer.to_checkpoint();
        for (k, v) in [
            ("best_epoch", trained.best_epoch.to_string()),
            ("stopped_epoch", trained.stopped_epoch.to_string()),
            ("best_train_loss", best.train_loss.to_string()),
            ("best_val_loss", best.val_loss.to_string()),
            ("best_val_acc", best.val_acc.to_string()),
            ("diversity", div.to_string()),
        ] {
            ck.meta.insert(k.into(), v);
        }
        crate::manifest::ensure_parent(&a.out)?;
        ck.save(&a.out)?;
        run.artifact(&a.out)
    })
}

pub fn evaluate(run: &mut Run, a: &EvaluateArgs) -> Result<()> {
    run.settings.check_unused()?;
    let rec = Recognizer::load(&a.ckpt)?;
    run.input(&a.ckpt)?;
    let ds = load(run, &a.data)?;
    let ev = run.stage("evaluate", |_| Ok(evaluate_recognizer(&rec, &ds)?))?;
    run.note("accuracy", ev.accuracy);
    run.note("loss", ev.loss);
    let text = format!("checkpoint {}\ndata {}\n{}", a.ckpt.display(), a.data.display(), ev.report());
    run.stage("report", |run| run.write_artifact(&a.report, &text))
}

pub fn metrics(run: &mut Run, a: &MetricsArgs) -> Result<()> {
    run.settings.check_unused()?;
    let val = load(run, &a.val)?;
    let aug_val = load(run, &a.aug_val)?;
    let mut provenance = vec![
        ("val".to_string(), file_sha256(&a.val)?),
        ("aug_val".to_string(), file_sha256(&a.aug_val)?),
    ];
    let mut seeds = Vec::new();
    let mut runs = Vec::new();
    run.stage("score", |run| {
        for (i, pair) in a.runs.iter().enumerate() {
            let (clean_path, aug_path) = pair
                .split_once(':')
                .ok_or_else(|| usage(format!("--run expects CLEAN:AUG, got {pair:?}")))?;
            let (clean_path, aug_path) = (Path::new(clean_path), Path::new(aug_path));
            let clean = Recognizer::load(clean_path)?;
            let ck = Checkpoint::load(aug_path)?;
            let aug = Recognizer::from_checkpoint(&ck)?;
            run.input(clean_path)?;
            run.input(aug_path)?;
            provenance.push((format!("clean_ckpt_{i}"), file_sha256(clean_path)?));
            provenance.push((format!("aug_ckpt_{i}"), file_sha256(aug_path)?));
            let div: f64 = ck.meta_parse("diversity")?;
            let acc = evaluate_recognizer(&aug, &val)?.accuracy;
            let aff = affinity(&clean, &val, &aug_val)?.value;
            seeds.push(aug.spec.seed);
            runs.push((acc, aff, div));
        }
        Ok(())
    })?;
    for &s in &seeds {
        run.seed(s);
    }
    let report = AffinityDiversityReport::from_runs(seeds, &runs, provenance)?;
    run.note("accuracy_mean", report.accuracy_mean);
    run.note("affinity", report.affinity);
    run.note("diversity", report.diversity);
    run.stage("report", |run| run.write_artifact(&a.out, &report.to_text()))
}

pub fn grid_search(run: &mut Run, a: &GridSearchArgs) -> Result<()> {
    let mut grid = match &a.grid {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading grid {}", p.display()))?;
            run.input(p)?;
            GridSpec::parse(&text, &p.display().to_string())?
        }
        None => GridSpec::coarse(),
    };
    if let Some(k) = run.settings.opt("kind", a.kind.clone())? {
        grid.kind = kind(&k)?;
    }
    let split_text = run.settings.get("split", a.split.clone(), "ratio:0.7".to_string())?;
    let split_seed = run.settings.get("split-seed", a.split_seed, 0u64)?;
    let multiplier = run.settings.get("multiplier", a.multiplier, 4usize)?;
    let include_clean = run.settings.get("include-clean", a.include_clean, false)?;
    let joints = run.settings.opt("joints", a.joints.clone())?;
    let sched = schedule(run, a.lr, a.batch, a.max_epochs)?;
    let base = RecognizerSpec::new(grid.kind, 2, 1, 1, 0);
    let hidden = run.settings.get("hidden", a.hidden, base.hidden)?;
    let attention = run.settings.get("attention", a.attention, base.attention)?;
    run.settings.check_unused()?;
    for (k, v) in [
        ("grid.sigma_scale", &grid.sigma_scale),
        ("grid.sigma_shift", &grid.sigma_shift),
        ("grid.sigma_noise", &grid.sigma_noise),
    ] {
        run.settings.fixed(k, v)?;
    }
    run.settings.fixed("grid.seeds", &grid.seeds)?;
    run.settings.fixed("grid.kind", &grid.kind.as_str())?;
    run.settings.fixed("grid.max_seconds", &grid.max_seconds)?;
    for &s in &grid.seeds {
        run.seed(s);
    }

    let data = load(run, &a.dataset)?;
    let (train, val) = match &a.val {
        Some(v) => (data, load(run, v)?),
        None => split(&data, &parse_split(&split_text, split_seed)?)?,
    };
    let joints = match joints {
        Some(j) => parse_range(&j)?,
        None => default_joint_range(train.joints()),
    };
    let mut base_policy = AugmentPolicy::with_joints(0.0, 0.0, 0.0, joints, 0);
    base_policy.multiplier = multiplier;
    let setup = SearchSetup {
        train: &train,
        val: &val,
        base_policy,
        recognizer: RecognizerSpec {
            hidden,
            attention,
            ..RecognizerSpec::new(grid.kind, train.num_classes(), train.require_fixed_len()?, train.width(), 0)
        },
        schedule: sched,
        include_clean,
    };
    let result = run.stage("search", |_| Ok(run_grid(&setup, &grid)?))?;
    let best = &result.points[result.best];
    run.note("points", result.points.len());
    run.note("complete", result.complete);
    run.note("best_index", best.index);
    run.stage("report", |run| {
        run.write_artifact(&a.out.join("points.tsv"), &point_rows(&result))?;
        run.write_volatile(&a.out.join("timing.tsv"), &timing_rows(&result))?;
        let r = &best.report;
        let text = format!(
            "index {}\nsigma_scale {}\nsigma_shift {}\nsigma_noise {}\naccuracy_mean {}\naccuracy_se {}\naffinity {}\ndiversity {}\npoints {}\ncomplete {}\n",
            best.index,
            best.sigmas[0],
            best.sigmas[1],
            best.sigmas[2],
            r.accuracy_mean,
            r.accuracy_se,
            r.affinity,
            r.diversity,
            result.points.len(),
            result.complete
        );
        run.write_artifact(&a.out.join("best.txt"), &text)
    })
}

pub fn visualize(run: &mut Run, a: &VisualizeArgs) -> Result<()> {
    let d = TsneParams::default();
    let s = &mut run.settings;
    let keep = s.get("pca-keep", a.pca_keep, 50usize)?;
    let params = TsneParams {
        perplexity: s.get("perplexity", a.perplexity, d.perplexity)?,
        iterations: s.get("iterations", a.iterations, d.iterations)?,
        exaggeration: s.get("exaggeration", a.exaggeration, d.exaggeration)?,
        exaggeration_iters: s.get("exaggeration-iters", a.exaggeration_iters, d.exaggeration_iters)?,
        learning_rate: s.get("learning-rate", a.learning_rate, d.learning_rate)?,
        seed: s.get("seed", a.seed, d.seed)?,
    };
    run.settings.check_unused()?;
    run.seed(params.seed);
    let rec = Recognizer::load(&a.ckpt)?;
    run.input(&a.ckpt)?;
    let ds = load(run, &a.data)?;
    let latents = run.stage("latents", |_| Ok(extract_latents(&rec, &ds)?))?;
    let emb = run.stage("embed", |_| Ok(embed_latents(&latents.points, &latents.labels, keep, &params)?))?;
    run.note("pca_keep", emb.pca_keep);
    run.note("pca_explained", emb.pca_explained);
    run.note("final_kl", emb.final_kl);
    run.note("neighbor_purity", neighbor_purity(&emb.points, &emb.labels)?);
    run.stage("export", |run| run.write_artifact(&a.out, &emb.to_csv()))
}
