//! Multi-stage experiments. Every stage is an ordinary command line run
//! in-process with its own manifest under `<out>/stages/`, so any stage can
//! be replayed alone; the recipe manifest lists the union of all artifacts.
//!
//! `--dataset toy` (the default) scales every network and the data down to
//! desk size; `shrec17` and `msr3d` use the full-size defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::Parser;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{Cli, RecipeArgs, RecipeName};
use crate::commands::parse_list;
use crate::errors::{usage, StageFailed};
use crate::manifest::{Run, RunManifest};

/// Reduced σ grid for toy runs.
pub const TOY_GRID: &str = "sigma_scale = 0.1, 0.2\nsigma_shift = 0.1, 0.2\nsigma_noise = 0.1, 0.2\n";

#[derive(Clone, Debug)]
struct Conf {
    dataset: String,
    root: Option<PathBuf>,
    split: String,
    seeds: Vec<u64>,
    kinds: Vec<String>,
    grid: Option<PathBuf>,
    per_sample: usize,
    include_clean: bool,
    per_class: usize,
    frames: usize,
    data_seed: u64,
    rec_hidden: usize,
    rec_attention: usize,
    rec_lr: f64,
    rec_batch: usize,
    rec_max_epochs: usize,
    gan_hidden: usize,
    gan_batch: usize,
    gan_lr: f64,
    gan_max_epochs: usize,
    gan_seed: u64,
    withhold: usize,
    hidden_units: Vec<usize>,
}

impl Conf {
    fn toy(&self) -> bool {
        self.dataset == "toy"
    }
}

fn resolve(run: &mut Run, a: &RecipeArgs) -> Result<Conf> {
    let s = &mut run.settings;
    let dataset = s.get("dataset", a.dataset.clone(), "toy".to_string())?;
    let toy = match dataset.as_str() {
        "toy" => true,
        "shrec17" | "msr3d" => false,
        other => return Err(usage(format!("recipe dataset must be toy, shrec17 or msr3d, got {other:?}"))),
    };
    let pick = |t, p| if toy { t } else { p };
    let split_default = match dataset.as_str() {
        "toy" => "ratio:0.5",
        "shrec17" => "predefined",
        _ => "odd-subjects",
    };
    let kinds_default = if a.recipe == RecipeName::Table1 { "lstm,cnn" } else { "lstm" };
    let units_default = if toy { "8,16,32,64" } else { "64,128,256,512" };
    let c = Conf {
        root: s.opt("root", a.root.clone())?,
        split: s.get("split", a.split.clone(), split_default.to_string())?,
        seeds: parse_list(&s.get("seeds", a.seeds.clone(), "0,1,2,3".to_string())?, "seed")?,
        kinds: parse_list(&s.get("kinds", a.kinds.clone(), kinds_default.to_string())?, "kind")?,
        grid: s.opt("grid", a.grid.clone())?,
        per_sample: s.get("per-sample", a.per_sample, 4usize)?,
        include_clean: s.get("include-clean", a.include_clean, false)?,
        per_class: s.get("per-class", a.per_class, 40usize)?,
        frames: s.get("frames", a.frames, 40usize)?,
        data_seed: s.get("data-seed", a.data_seed, 0u64)?,
        rec_hidden: s.get("rec-hidden", a.rec_hidden, pick(32, 512))?,
        rec_attention: s.get("rec-attention", a.rec_attention, pick(16, 128))?,
        rec_lr: s.get("rec-lr", a.rec_lr, if toy { 1e-3 } else { 1e-4 })?,
        rec_batch: s.get("rec-batch", a.rec_batch, 64usize)?,
        rec_max_epochs: s.get("rec-max-epochs", a.rec_max_epochs, 100usize)?,
        gan_hidden: s.get("gan-hidden", a.gan_hidden, pick(64, 512))?,
        gan_batch: s.get("gan-batch", a.gan_batch, pick(10, 64))?,
        gan_lr: s.get("gan-lr", a.gan_lr, if toy { 1e-3 } else { 2e-4 })?,
        gan_max_epochs: s.get("gan-max-epochs", a.gan_max_epochs, pick(300, 200))?,
        gan_seed: s.get("gan-seed", a.gan_seed, 0u64)?,
        withhold: s.get("withhold", a.withhold, pick(1, 4))?,
        hidden_units: parse_list(&s.get("hidden-units", a.hidden_units.clone(), units_default.to_string())?, "unit count")?,
        dataset,
    };
    if c.seeds.is_empty() || c.kinds.is_empty() || c.hidden_units.is_empty() {
        return Err(usage("seeds, kinds and hidden-units need at least one entry"));
    }
    Ok(c)
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Runs stages as sub-commands and folds their manifests into the recipe's.
struct Stager<'a> {
    cli: &'a Cli,
    dir: PathBuf,
    n: usize,
}

impl Stager<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn call(&mut self, run: &mut Run, args: Vec<String>) -> Result<RunManifest> {
        self.n += 1;
        let name = format!("{:03}-{}", self.n, args[0]);
        let manifest = self.dir.join("stages").join(format!("{name}.json"));
        let mut argv = vec!["imagan".to_string()];
        if let Some(c) = &self.cli.config {
            argv.extend(["--config".to_string(), p(c)]);
        }
        argv.extend(["--manifest".to_string(), p(&manifest)]);
        argv.extend(args);
        let sub = Cli::try_parse_from(&argv).map_err(|e| anyhow!("recipe built an invalid command line: {e}"))?;
        run.stage(&name, |run| {
            let (code, m) = crate::execute(&sub, argv[1..].to_vec());
            let m = m.ok_or_else(|| anyhow!("stage {name} produced no manifest"))?;
            run.volatile(&manifest);
            for i in &m.inputs {
                if !run.manifest.artifacts.iter().any(|a| a.path == i.path) {
                    run.input_record(i.clone());
                }
            }
            for a in &m.artifacts {
                run.artifact_record(a.clone());
            }
            for v in &m.volatile {
                run.volatile(Path::new(v));
            }
            if code != 0 {
                let msg = m.error.as_ref().map_or(String::new(), |e| e.message.clone());
                return Err(StageFailed { code, msg: format!("stage {name} failed: {msg}") }.into());
            }
            Ok(m)
        })
    }

    fn last_seconds(run: &Run) -> f64 {
        run.manifest.stages.last().map_or(0.0, |s| s.seconds)
    }
}

fn args(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

struct Data {
    train: PathBuf,
    val: PathBuf,
    classes: usize,
}

fn prepare(run: &mut Run, st: &mut Stager, c: &Conf) -> Result<Data> {
    let (cd, train, val) = (st.path("data/cd.imds"), st.path("data/train.imds"), st.path("data/val.imds"));
    let mut a = args(&["prepare", "--dataset", &c.dataset]);
    if c.toy() {
        a.extend(args(&[
            "--per-class",
            &c.per_class.to_string(),
            "--frames",
            &c.frames.to_string(),
            "--seed",
            &c.data_seed.to_string(),
        ]));
    } else if let Some(r) = &c.root {
        a.extend(["--root".to_string(), p(r)]);
    }
    a.extend(args(&[
        "--split",
        &c.split,
        "--split-seed",
        &c.data_seed.to_string(),
        "--out",
        &p(&cd),
        "--train-out",
        &p(&train),
        "--val-out",
        &p(&val),
    ]));
    let m = st.call(run, a)?;
    let classes = m
        .summary
        .get("classes")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| anyhow!("prepare did not report a class count"))?;
    Ok(Data { train, val, classes })
}

#[allow(clippy::too_many_arguments)]
fn train_rec(run: &mut Run, st: &mut Stager, c: &Conf, kind: &str, seed: u64, train: &[&Path], val: &Path, out: &Path) -> Result<()> {
    let mut a = args(&["train-recognizer", "--kind", kind, "--seed", &seed.to_string()]);
    for t in train {
        a.extend(["--train".to_string(), p(t)]);
    }
    a.extend(args(&[
        "--val",
        &p(val),
        "--out",
        &p(out),
        "--hidden",
        &c.rec_hidden.to_string(),
        "--attention",
        &c.rec_attention.to_string(),
        "--lr",
        &c.rec_lr.to_string(),
        "--batch",
        &c.rec_batch.to_string(),
        "--max-epochs",
        &c.rec_max_epochs.to_string(),
    ]));
    st.call(run, a).map(drop)
}

fn train_gan(run: &mut Run, st: &mut Stager, c: &Conf, hidden: usize, train: &Path, exclude: &[usize], out: &Path) -> Result<RunManifest> {
    let mut a = args(&[
        "train-gan",
        "--in",
        &p(train),
        "--out",
        &p(out),
        "--hidden",
        &hidden.to_string(),
        "--batch",
        &c.gan_batch.to_string(),
        "--lr",
        &c.gan_lr.to_string(),
        "--max-epochs",
        &c.gan_max_epochs.to_string(),
        "--seed",
        &c.gan_seed.to_string(),
    ]);
    if !exclude.is_empty() {
        let list: Vec<String> = exclude.iter().map(usize::to_string).collect();
        a.extend(["--exclude-classes".to_string(), list.join(",")]);
    }
    st.call(run, a)
}

fn generate(run: &mut Run, st: &mut Stager, ckpt: &Path, src: &Path, per: usize, seed: u64, out: &Path) -> Result<()> {
    let a = args(&[
        "generate",
        "--ckpt",
        &p(ckpt),
        "--in",
        &p(src),
        "--per-sample",
        &per.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &p(out),
    ]);
    st.call(run, a).map(drop)
}

fn evaluate(run: &mut Run, st: &mut Stager, ckpt: &Path, data: &Path, out: &Path) -> Result<()> {
    st.call(run, args(&["evaluate", "--ckpt", &p(ckpt), "--data", &p(data), "--report", &p(out)]))
        .map(drop)
}

/// Runs `metrics` and returns the parsed report.
fn metrics(run: &mut Run, st: &mut Stager, pairs: &[(PathBuf, PathBuf)], val: &Path, aug_val: &Path, out: &Path) -> Result<BTreeMap<String, String>> {
    let mut a = args(&["metrics"]);
    for (clean, aug) in pairs {
        a.extend(["--run".to_string(), format!("{}:{}", p(clean), p(aug))]);
    }
    a.extend(args(&["--val", &p(val), "--aug-val", &p(aug_val), "--out", &p(out)]));
    st.call(run, a)?;
    read_kv(out)
}

/// `key value` lines; later keys win.
pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(' '))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn kv<'a>(m: &'a BTreeMap<String, String>, k: &str) -> Result<&'a str> {
    m.get(k).map(String::as_str).ok_or_else(|| anyhow!("report lacks {k}"))
}

/// Per-class accuracy lines `class k n acc|-` of an evaluate report.
pub fn per_class(path: &Path) -> Result<Vec<Option<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for l in text.lines().filter(|l| l.starts_with("class ")) {
        let acc = l.split_whitespace().nth(3).ok_or_else(|| anyhow!("short class line {l:?}"))?;
        out.push(acc.parse().ok());
    }
    Ok(out)
}

/// Grid file for the policy search: the user's, the toy grid, or the fine preset.
fn grid_file(run: &mut Run, st: &Stager, c: &Conf) -> Result<PathBuf> {
    if let Some(g) = &c.grid {
        return Ok(g.clone());
    }
    let seed = c.seeds[0];
    let text = if c.toy() {
        format!("{TOY_GRID}seeds = {seed}\n")
    } else {
        format!("preset = fine\nseeds = {seed}\n")
    };
    let path = st.path("grid.txt");
    run.write_artifact(&path, &text)?;
    Ok(path)
}

/// Runs `grid-search` for `kind`; returns the best σ values and the stage time.
fn search(run: &mut Run, st: &mut Stager, c: &Conf, grid: &Path, d: &Data, kind: &str) -> Result<([String; 3], f64)> {
    let out = st.path(&format!("grid-{kind}"));
    let a = args(&[
        "grid-search",
        "--grid",
        &p(grid),
        "--dataset",
        &p(&d.train),
        "--val",
        &p(&d.val),
        "--kind",
        kind,
        "--out",
        &p(&out),
        "--multiplier",
        &c.per_sample.to_string(),
        "--include-clean",
        &c.include_clean.to_string(),
        "--hidden",
        &c.rec_hidden.to_string(),
        "--attention",
        &c.rec_attention.to_string(),
        "--lr",
        &c.rec_lr.to_string(),
        "--batch",
        &c.rec_batch.to_string(),
        "--max-epochs",
        &c.rec_max_epochs.to_string(),
    ]);
    st.call(run, a)?;
    let secs = Stager::last_seconds(run);
    let best = read_kv(&out.join("best.txt"))?;
    Ok((
        [
            kv(&best, "sigma_scale")?.to_string(),
            kv(&best, "sigma_shift")?.to_string(),
            kv(&best, "sigma_noise")?.to_string(),
        ],
        secs,
    ))
}

fn augment(run: &mut Run, st: &mut Stager, src: &Path, sigmas: &[String; 3], multiplier: usize, out: &Path) -> Result<()> {
    let a = args(&[
        "augment-classical",
        "--in",
        &p(src),
        "--out",
        &p(out),
        "--sigma-scale",
        &sigmas[0],
        "--sigma-shift",
        &sigmas[1],
        "--sigma-noise",
        &sigmas[2],
        "--multiplier",
        &multiplier.to_string(),
        "--seed",
        "0",
    ]);
    st.call(run, a).map(drop)
}

/// Training sets of an augmented condition.
fn aug_train<'a>(c: &Conf, d: &'a Data, aug: &'a Path) -> Vec<&'a Path> {
    if c.include_clean {
        vec![d.train.as_path(), aug]
    } else {
        vec![aug]
    }
}

/// Clean recognizers, one per seed.
fn clean_recs(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data, kind: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for &seed in &c.seeds {
        let ck = st.path(&format!("rec/{kind}-cd-s{seed}.ckpt"));
        train_rec(run, st, c, kind, seed, &[&d.train], &d.val, &ck)?;
        out.push(ck);
    }
    Ok(out)
}

fn gan_and_samples(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data, hidden: usize, tag: &str) -> Result<(PathBuf, PathBuf, f64, RunManifest)> {
    let ck = st.path(&format!("gan/{tag}.ckpt"));
    let m = train_gan(run, st, c, hidden, &d.train, &[], &ck)?;
    let secs = Stager::last_seconds(run);
    let (gad, gad_val) = (st.path(&format!("data/{tag}.imds")), st.path(&format!("data/{tag}-val.imds")));
    generate(run, st, &ck, &d.train, c.per_sample, 0, &gad)?;
    generate(run, st, &ck, &d.val, 1, 1, &gad_val)?;
    Ok((gad, gad_val, secs, m))
}

pub fn run_recipe(run: &mut Run, cli: &Cli, a: &RecipeArgs) -> Result<()> {
    run.settings.fixed("recipe", &a.recipe.as_str())?;
    let c = resolve(run, a)?;
    run.settings.check_unused()?;
    for &s in &c.seeds {
        run.seed(s);
    }
    let mut st = Stager { cli, dir: a.out.clone(), n: 0 };
    let d = prepare(run, &mut st, &c)?;
    match a.recipe {
        RecipeName::Table1 => table1(run, &mut st, &c, &d),
        RecipeName::Generalization => generalization(run, &mut st, &c, &d),
        RecipeName::Ablation => ablation(run, &mut st, &c, &d),
        RecipeName::AffinityScatter => scatter(run, &mut st, &c, &d),
    }
}

fn table1(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data) -> Result<()> {
    let grid = grid_file(run, st, c)?;
    let (gad, gad_val, gan_secs, _) = gan_and_samples(run, st, c, d, c.gan_hidden, "gad")?;
    let mut table = String::from("kind\tcondition\taccuracy_mean\taccuracy_se\timprovement\taffinity\tdiversity\n");
    let mut times = String::from("kind\tcad_search_seconds\tgan_seconds\n");
    for kind in &c.kinds {
        let (sigmas, search_secs) = search(run, st, c, &grid, d, kind)?;
        let _ = writeln!(times, "{kind}\t{search_secs}\t{gan_secs}");
        let (cad, cad_val) = (st.path(&format!("data/cad-{kind}.imds")), st.path(&format!("data/cad-{kind}-val.imds")));
        augment(run, st, &d.train, &sigmas, c.per_sample, &cad)?;
        augment(run, st, &d.val, &sigmas, 1, &cad_val)?;
        let clean = clean_recs(run, st, c, d, kind)?;
        let mut cd_acc = None;
        for (cond, aug, aug_val) in [("cd", None, &d.val), ("cad", Some(&cad), &cad_val), ("gad", Some(&gad), &gad_val)] {
            let mut pairs = Vec::new();
            for (i, &seed) in c.seeds.iter().enumerate() {
                let ck = match aug {
                    None => clean[i].clone(),
                    Some(aug) => {
                        let ck = st.path(&format!("rec/{kind}-{cond}-s{seed}.ckpt"));
                        train_rec(run, st, c, kind, seed, &aug_train(c, d, aug), &d.val, &ck)?;
                        ck
                    }
                };
                evaluate(run, st, &ck, &d.val, &st.path(&format!("eval/{kind}-{cond}-s{seed}.txt")))?;
                pairs.push((clean[i].clone(), ck));
            }
            let m = metrics(run, st, &pairs, &d.val, aug_val, &st.path(&format!("metrics/{kind}-{cond}.txt")))?;
            let acc: f64 = kv(&m, "accuracy_mean")?.parse()?;
            let base = *cd_acc.get_or_insert(acc);
            let _ = writeln!(
                table,
                "{kind}\t{cond}\t{acc}\t{}\t{}\t{}\t{}",
                kv(&m, "accuracy_se")?,
                acc - base,
                kv(&m, "affinity")?,
                kv(&m, "diversity")?
            );
        }
    }
    run.stage("report", |run| {
        run.write_artifact(&st.path("table1.tsv"), &table)?;
        run.write_volatile(&st.path("times.tsv"), &times)
    })
}

fn generalization(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data) -> Result<()> {
    if c.withhold == 0 || c.withhold >= d.classes {
        return Err(usage(format!("cannot withhold {} of {} classes", c.withhold, d.classes)));
    }
    let mut classes: Vec<usize> = (0..d.classes).collect();
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(c.gan_seed));
    let mut withheld = classes[..c.withhold].to_vec();
    withheld.sort_unstable();
    run.note("withheld", withheld.iter().map(usize::to_string).collect::<Vec<_>>().join(","));

    let gan = st.path("gan/withheld.ckpt");
    train_gan(run, st, c, c.gan_hidden, &d.train, &withheld, &gan)?;
    let gen = st.path("data/generated-val.imds");
    generate(run, st, &gan, &d.val, c.per_sample, 0, &gen)?;
    let kind = &c.kinds[0];
    let clean = clean_recs(run, st, c, d, kind)?;
    let mut real_acc = vec![Vec::new(); d.classes];
    let mut gen_acc = vec![Vec::new(); d.classes];
    for (i, &seed) in c.seeds.iter().enumerate() {
        let (er, eg) = (st.path(&format!("eval/real-s{seed}.txt")), st.path(&format!("eval/generated-s{seed}.txt")));
        evaluate(run, st, &clean[i], &d.val, &er)?;
        evaluate(run, st, &clean[i], &gen, &eg)?;
        for (k, a) in per_class(&er)?.into_iter().enumerate() {
            real_acc[k].extend(a);
        }
        for (k, a) in per_class(&eg)?.into_iter().enumerate() {
            gen_acc[k].extend(a);
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let mut table = String::from("class\twithheld\treal_accuracy\tgenerated_accuracy\n");
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for k in 0..d.classes {
        let w = withheld.contains(&k);
        let g = mean(&gen_acc[k]);
        let _ = writeln!(table, "{k}\t{}\t{}\t{g}", u8::from(w), mean(&real_acc[k]));
        if w { &mut unseen } else { &mut seen }.push(g);
    }
    let (s, u) = (mean(&seen), mean(&unseen));
    let summary = format!(
        "withheld {}\nseen_generated_accuracy {s}\nwithheld_generated_accuracy {u}\ngap {}\n",
        withheld.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        u - s
    );
    run.note("seen_generated_accuracy", s);
    run.note("withheld_generated_accuracy", u);
    run.stage("report", |run| {
        run.write_artifact(&st.path("generalization.tsv"), &table)?;
        run.write_artifact(&st.path("summary.txt"), &summary)
    })
}

fn ablation(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data) -> Result<()> {
    let kind = &c.kinds[0];
    let clean = clean_recs(run, st, c, d, kind)?;
    let mut table = String::from("hidden\taccuracy_mean\taccuracy_se\taffinity\tdiversity\tgan_epochs\tconverged\n");
    for &h in &c.hidden_units {
        let (gad, gad_val, _, m) = gan_and_samples(run, st, c, d, h, &format!("gad-h{h}"))?;
        let mut pairs = Vec::new();
        for (i, &seed) in c.seeds.iter().enumerate() {
            let ck = st.path(&format!("rec/{kind}-gad-h{h}-s{seed}.ckpt"));
            train_rec(run, st, c, kind, seed, &aug_train(c, d, &gad), &d.val, &ck)?;
            pairs.push((clean[i].clone(), ck));
        }
        let r = metrics(run, st, &pairs, &d.val, &gad_val, &st.path(&format!("metrics/gad-h{h}.txt")))?;
        let _ = writeln!(
            table,
            "{h}\t{}\t{}\t{}\t{}\t{}\t{}",
            kv(&r, "accuracy_mean")?,
            kv(&r, "accuracy_se")?,
            kv(&r, "affinity")?,
            kv(&r, "diversity")?,
            m.summary.get("epochs").map_or("-", String::as_str),
            m.summary.get("converged").map_or("-", String::as_str)
        );
    }
    run.stage("report", |run| run.write_artifact(&st.path("ablation.tsv"), &table))
}

fn scatter(run: &mut Run, st: &mut Stager, c: &Conf, d: &Data) -> Result<()> {
    let kind = &c.kinds[0];
    let grid = grid_file(run, st, c)?;
    search(run, st, c, &grid, d, kind)?;
    let clean = clean_recs(run, st, c, d, kind)?;
    let (gad, gad_val, _, _) = gan_and_samples(run, st, c, d, c.gan_hidden, "gad")?;
    let mut gad_pairs = Vec::new();
    for (i, &seed) in c.seeds.iter().enumerate() {
        let ck = st.path(&format!("rec/{kind}-gad-s{seed}.ckpt"));
        train_rec(run, st, c, kind, seed, &aug_train(c, d, &gad), &d.val, &ck)?;
        gad_pairs.push((clean[i].clone(), ck));
    }
    let cd_pairs: Vec<(PathBuf, PathBuf)> = clean.iter().map(|k| (k.clone(), k.clone())).collect();
    let cd = metrics(run, st, &cd_pairs, &d.val, &d.val, &st.path("metrics/cd.txt"))?;
    let ga = metrics(run, st, &gad_pairs, &d.val, &gad_val, &st.path("metrics/gad.txt"))?;

    let points = std::fs::read_to_string(st.path(&format!("grid-{kind}/points.tsv")))?;
    let mut lines = points.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| anyhow!("points.tsv lacks {name}"));
    let cols = [
        col("index")?,
        col("sigma_scale")?,
        col("sigma_shift")?,
        col("sigma_noise")?,
        col("accuracy_mean")?,
        col("affinity")?,
        col("diversity")?,
    ];
    let mut table = String::from("source\tsigma_scale\tsigma_shift\tsigma_noise\taccuracy_mean\taffinity\tdiversity\n");
    for l in lines {
        let f: Vec<&str> = l.split('\t').collect();
        let v: Vec<&str> = cols.iter().map(|&i| f.get(i).copied().unwrap_or("-")).collect();
        let _ = writeln!(table, "cad-{}\t{}", v[0], v[1..].join("\t"));
    }
    for (name, m) in [("cd", &cd), ("gad", &ga)] {
        let _ = writeln!(
            table,
            "{name}\t-\t-\t-\t{}\t{}\t{}",
            kv(m, "accuracy_mean")?,
            kv(m, "affinity")?,
            kv(m, "diversity")?
        );
    }
    run.stage("report", |run| run.write_artifact(&st.path("scatter.tsv"), &table))
}
