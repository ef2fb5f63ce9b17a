//! Grid search over the classical policy's σ values.
//!
//! Each point is evaluated per seed by augmenting the clean training set,
//! training a recognizer on the augmented copies (optionally joined with the
//! clean set) and validating on clean data. Affinity uses a recognizer trained on clean data only with
//! the same seed. A point's randomness depends only on its σ values and
//! the seed, so any row can be recomputed in isolation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::augment::{augment_dataset, AugmentPolicy};
use crate::data::LabeledDataset;
use crate::error::{contract, Error, Result};
use crate::metrics::{affinity, diversity, AffinityDiversityReport};
use crate::recognition::{train_recognizer, Recognizer, RecognizerKind, RecognizerSpec, TrainSchedule};

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub sigma_scale: Vec<f64>,
    pub sigma_shift: Vec<f64>,
    pub sigma_noise: Vec<f64>,
    pub seeds: Vec<u64>,
    pub kind: RecognizerKind,
    /// Points not started within this many seconds are skipped.
    pub max_seconds: Option<f64>,
}

impl GridSpec {
    /// First-round grid.
    pub fn coarse() -> Self {
        GridSpec {
            sigma_scale: vec![0.1, 0.15, 0.2, 0.25, 0.3],
            sigma_shift: vec![0.1, 0.15, 0.2, 0.25, 0.3],
            sigma_noise: vec![0.1, 0.2, 0.3],
            seeds: vec![0],
            kind: RecognizerKind::Lstm,
            max_seconds: None,
        }
    }

    /// Second-round grid.
    pub fn fine() -> Self {
        GridSpec {
            sigma_scale: vec![0.1, 0.12, 0.14, 0.18, 0.2],
            sigma_shift: vec![0.1, 0.12, 0.14, 0.18, 0.2],
            sigma_noise: vec![0.05, 0.1, 0.15],
            ..Self::coarse()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_scale", &self.sigma_scale),
            ("sigma_shift", &self.sigma_shift),
            ("sigma_noise", &self.sigma_noise),
        ] {
            contract!(!v.is_empty(), "{name} list is empty");
            contract!(
                v.iter().all(|x| x.is_finite() && *x >= 0.0),
                "{name} values must be finite and >= 0"
            );
        }
        contract!(!self.seeds.is_empty(), "at least one seed is required");
        Ok(())
    }

    /// Cartesian product as `[σ_scale, σ_shift, σ_noise]`, scale-major.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for &a in &self.sigma_scale {
            for &b in &self.sigma_shift {
                for &c in &self.sigma_noise {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.sigma_scale.len() * self.sigma_shift.len() * self.sigma_noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses `key = v1, v2, ...` lines; `#` starts a comment. Keys:
    /// `sigma_scale`, `sigma_shift`, `sigma_noise`, `seeds`, `kind`,
    /// `max_seconds`, or `preset` (`coarse` | `fine`) as the base.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut g = Self::coarse();
        let bad = |line: usize, msg: String| Error::Parse {
            file: file.into(),
            line,
            msg,
        };
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        // a preset applies before the keys that override it
        for &(no, l) in &lines {
            if let Some(("preset", v)) = l.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                g = match v {
                    "coarse" => Self::coarse(),
                    "fine" => Self::fine(),
                    other => return Err(bad(no, format!("unknown preset {other:?}"))),
                };
            }
        }
        for (no, l) in lines {
            let (k, v) = l
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(no, format!("expected key = values, got {l:?}")))?;
            let reals = || -> Result<Vec<f64>> {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| bad(no, format!("bad number {:?}", x.trim()))))
                    .collect()
            };
            match k {
                "preset" => {}
                "sigma_scale" => g.sigma_scale = reals()?,
                "sigma_shift" => g.sigma_shift = reals()?,
                "sigma_noise" => g.sigma_noise = reals()?,
                "seeds" => {
                    g.seeds = v
                        .split(',')
                        .map(|x| x.trim().parse::<u64>().map_err(|_| bad(no, format!("bad seed {:?}", x.trim()))))
                        .collect::<Result<_>>()?
                }
                "kind" => g.kind = RecognizerKind::parse(v).map_err(|e| bad(no, e.to_string()))?,
                "max_seconds" => {
                    g.max_seconds = Some(v.parse().map_err(|_| bad(no, format!("bad number {v:?}")))?)
                }
                other => return Err(bad(no, format!("unknown key {other:?}"))),
            }
        }
        g.validate().map_err(|e| bad(0, e.to_string()))?;
        Ok(g)
    }
}

/// Everything a grid point needs besides its σ values.
#[derive(Clone, Debug)]
pub struct SearchSetup<'a> {
    pub train: &'a LabeledDataset,
    pub val: &'a LabeledDataset,
    /// Joint range, multiplier and interpolation of every point's policy.
    pub base_policy: AugmentPolicy,
    /// Architecture template; kind and seed are overridden per run.
    pub recognizer: RecognizerSpec,
    pub schedule: TrainSchedule,
    /// Train on clean ∪ augmented instead of the augmented copies alone.
    pub include_clean: bool,
}

impl SearchSetup<'_> {
    fn spec(&self, kind: RecognizerKind, seed: u64) -> RecognizerSpec {
        RecognizerSpec {
            kind,
            seed,
            ..self.recognizer.clone()
        }
    }

    fn policy(&self, sigmas: [f64; 3], seed: u64) -> AugmentPolicy {
        AugmentPolicy {
            sigma_scale: sigmas[0],
            sigma_shift: sigmas[1],
            sigma_noise: sigmas[2],
            seed,
            ..self.base_policy.clone()
        }
    }

    /// Recognizer trained on clean data for `seed`.
    pub fn clean_recognizer(&self, kind: RecognizerKind, seed: u64) -> Result<Recognizer> {
        let r = Recognizer::build(self.spec(kind, seed))?;
        Ok(train_recognizer(r, self.train, self.val, &self.schedule)?.recognizer)
    }

    /// `(accuracy, affinity, diversity)` of one point and seed.
    pub fn run_point_seed(&self, kind: RecognizerKind, sigmas: [f64; 3], seed: u64, clean: &Recognizer) -> Result<(f64, f64, f64)> {
        let policy = self.policy(sigmas, seed);
        let aug = augment_dataset(self.train, &policy)?.dataset;
        let train = if self.include_clean { self.train.concat(&aug)? } else { aug };
        let r = Recognizer::build(self.spec(kind, seed))?;
        let trained = train_recognizer(r, &train, self.val, &self.schedule)?;
        let val_policy = AugmentPolicy { multiplier: 1, ..policy };
        let aug_val = augment_dataset(self.val, &val_policy)?.dataset;
        let aff = affinity(clean, self.val, &aug_val)?;
        Ok((trained.best().val_acc, aff.value, diversity(&trained)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub index: usize,
    /// `[σ_scale, σ_shift, σ_noise]`
    pub sigmas: [f64; 3],
    pub report: AffinityDiversityReport,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    /// Evaluated points in grid order; skipped points are absent.
    pub points: Vec<PointResult>,
    /// Position in `points` of the best point.
    pub best: usize,
    pub total_seconds: f64,
    /// False when the time budget cut the grid short.
    pub complete: bool,
}

/// Evaluates every grid point, in parallel across points.
pub fn run_grid(setup: &SearchSetup, grid: &GridSpec) -> Result<GridResult> {
    grid.validate()?;
    let start = Instant::now();
    let cleans: Vec<Recognizer> = grid
        .seeds
        .par_iter()
        .map(|&s| setup.clean_recognizer(grid.kind, s))
        .collect::<Result<_>>()?;
    let points = grid.points();
    let rows: Vec<Option<PointResult>> = points
        .par_iter()
        .enumerate()
        .map(|(index, &sigmas)| {
            if grid.max_seconds.is_some_and(|m| start.elapsed().as_secs_f64() > m) {
                return Ok(None);
            }
            let t0 = Instant::now();
            let runs = grid
                .seeds
                .iter()
                .zip(&cleans)
                .map(|(&s, clean)| setup.run_point_seed(grid.kind, sigmas, s, clean))
                .collect::<Result<Vec<_>>>()?;
            let report = AffinityDiversityReport::from_runs(grid.seeds.clone(), &runs, Vec::new())?;
            log::info!("grid point {index} {sigmas:?}: accuracy {:.4}", report.accuracy_mean);
            Ok(Some(PointResult {
                index,
                sigmas,
                report,
                seconds: t0.elapsed().as_secs_f64(),
            }))
        })
        .collect::<Result<_>>()?;
    let complete = rows.iter().all(Option::is_some);
    let points: Vec<PointResult> = rows.into_iter().flatten().collect();
    contract!(!points.is_empty(), "time budget exhausted before any grid point ran");
    let best = best_index(&points)?;
    Ok(GridResult {
        points,
        best,
        total_seconds: start.elapsed().as_secs_f64(),
        complete,
    })
}

/// Highest mean accuracy; ties go to lower σ_noise, then σ_shift, then σ_scale.
pub fn best_index(points: &[PointResult]) -> Result<usize> {
    contract!(!points.is_empty(), "no grid points to choose from");
    let key = |p: &PointResult| (p.report.accuracy_mean, -p.sigmas[2], -p.sigmas[1], -p.sigmas[0]);
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let (a, b) = (key(p), key(&points[best]));
        if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2, a.3) > (b.1, b.2, b.3)) {
            best = i;
        }
    }
    Ok(best)
}

/// The best point's σ values applied to `base`.
pub fn best_policy(result: &GridResult, base: &AugmentPolicy) -> Result<AugmentPolicy> {
    let p = result
        .points
        .get(result.best)
        .ok_or_else(|| Error::Contract("grid result has no points".into()))?;
    Ok(AugmentPolicy {
        sigma_scale: p.sigmas[0],
        sigma_shift: p.sigmas[1],
        sigma_noise: p.sigmas[2],
        ..base.clone()
    })
}

/// Header of [`point_rows`].
pub const ROW_HEADER: &str =
    "index\tsigma_scale\tsigma_shift\tsigma_noise\taccuracy_mean\taccuracy_se\taffinity\tdiversity";

/// One tab-separated line per point, without a header. Wall-clock time is
/// left out so rows are reproducible; see [`timing_rows`].
pub fn point_row(p: &PointResult) -> String {
    let r = &p.report;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        p.index, p.sigmas[0], p.sigmas[1], p.sigmas[2], r.accuracy_mean, r.accuracy_se, r.affinity, r.diversity
    )
}

/// Header plus every point row.
pub fn point_rows(result: &GridResult) -> String {
    let mut s = String::from(ROW_HEADER);
    s.push('\n');
    for p in &result.points {
        let _ = writeln!(s, "{}", point_row(p));
    }
    s
}

/// `index seconds` per point, then the total.
pub fn timing_rows(result: &GridResult) -> String {
    let mut s = String::from("index\tseconds\n");
    for p in &result.points {
        let _ = writeln!(s, "{}\t{}", p.index, p.seconds);
    }
    let _ = writeln!(s, "total\t{}", result.total_seconds);
    s
}
