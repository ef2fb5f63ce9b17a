//! Classical transform-based augmentation: global scale, global shift,
//! cubic time re-sampling and per-joint constant noise.
//!
//! Each augmented copy applies scale → shift → interpolation → joint noise
//! with fresh draws from its own counter-based stream, so the result does
//! not depend on how the copies are scheduled across threads.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{LabeledDataset, SkeletonSequence};
use crate::error::{contract, Result};
use crate::numcore::Array;

/// Shortest sequence the cubic re-sampling accepts.
pub const MIN_INTERP_FRAMES: usize = 4;

/// Where the cubic re-sampling evaluates the spline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// `T` sorted positions drawn uniformly from `[0, T − 1]`.
    Random,
    /// The knots themselves, which reproduces the input.
    Knots,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentPolicy {
    pub sigma_scale: f64,
    pub sigma_shift: f64,
    pub sigma_noise: f64,
    /// Inclusive range for the number of noised joints.
    pub joints: (usize, usize),
    /// Augmented copies per source sample.
    pub multiplier: usize,
    pub seed: u64,
    pub interpolation: Interpolation,
}

impl AugmentPolicy {
    /// Joint-count range 1..=8 for hand skeletons (22 joints).
    pub fn shrec(sigma_scale: f64, sigma_shift: f64, sigma_noise: f64, seed: u64) -> Self {
        Self::with_joints(sigma_scale, sigma_shift, sigma_noise, (1, 8), seed)
    }

    /// Joint-count range 1..=4 for body skeletons (20 joints).
    pub fn msr(sigma_scale: f64, sigma_shift: f64, sigma_noise: f64, seed: u64) -> Self {
        Self::with_joints(sigma_scale, sigma_shift, sigma_noise, (1, 4), seed)
    }

    pub fn with_joints(sigma_scale: f64, sigma_shift: f64, sigma_noise: f64, joints: (usize, usize), seed: u64) -> Self {
        AugmentPolicy {
            sigma_scale,
            sigma_shift,
            sigma_noise,
            joints,
            multiplier: 4,
            seed,
            interpolation: Interpolation::Random,
        }
    }

    pub fn validate(&self, joint_count: usize) -> Result<()> {
        for (name, s) in [
            ("sigma_scale", self.sigma_scale),
            ("sigma_shift", self.sigma_shift),
            ("sigma_noise", self.sigma_noise),
        ] {
            contract!(s.is_finite() && s >= 0.0, "{name} must be finite and non-negative, got {s}");
        }
        let (lo, hi) = self.joints;
        contract!(
            1 <= lo && lo <= hi && hi <= joint_count,
            "joint range {lo}:{hi} is not within 1..={joint_count}"
        );
        contract!(self.multiplier >= 1, "multiplier must be at least 1");
        Ok(())
    }
}

/// Draw from `N(1, σ²)`.
pub fn sample_scale(rng: &mut impl Rng, sigma: f64) -> f64 {
    Normal::new(1.0, sigma).expect("finite σ").sample(rng)
}

/// Three independent draws from `N(0, σ²)`.
pub fn sample_shift(rng: &mut impl Rng, sigma: f64) -> [f64; 3] {
    let n = Normal::new(0.0, sigma).expect("finite σ");
    [n.sample(rng), n.sample(rng), n.sample(rng)]
}

fn map_frames(seq: &SkeletonSequence, f: impl Fn(usize, f64) -> f64) -> Result<SkeletonSequence> {
    let w = seq.width();
    let data = seq
        .frames()
        .data()
        .iter()
        .enumerate()
        .map(|(k, &v)| f(k % w, v))
        .collect();
    seq.with_frames(Array::from_vec(seq.frames().dims(), data)?)
}

/// Multiplies every coordinate by `s`.
pub fn scale(seq: &SkeletonSequence, s: f64) -> Result<SkeletonSequence> {
    contract!(s.is_finite(), "scale factor must be finite");
    map_frames(seq, |_, v| v * s)
}

/// Adds `d` to every joint at every frame.
pub fn shift(seq: &SkeletonSequence, d: [f64; 3]) -> Result<SkeletonSequence> {
    contract!(d.iter().all(|v| v.is_finite()), "displacement must be finite");
    map_frames(seq, |c, v| v + d[c % 3])
}

/// Natural cubic spline through `(i, y_i)` for `i = 0..n`.
#[derive(Clone, Debug)]
pub struct NaturalSpline {
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(y: &[f64]) -> Result<Self> {
        let n = y.len();
        contract!(n >= 2, "a spline needs at least two knots");
        let mut m = vec![0.0; n];
        if n > 2 {
            // Unit spacing: m_{i−1} + 4 m_i + m_{i+1} = 6 (y_{i+1} − 2 y_i + y_{i−1}).
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
                let (ci, di) = if i == 0 {
                    (1.0 / 4.0, rhs / 4.0)
                } else {
                    let den = 4.0 - c[i - 1];
                    (1.0 / den, (rhs - d[i - 1]) / den)
                };
                c[i] = ci;
                d[i] = di;
            }
            for i in (0..k).rev() {
                m[i + 1] = if i + 1 == k { d[i] } else { d[i] - c[i] * m[i + 2] };
            }
        }
        Ok(NaturalSpline { y: y.to_vec(), m })
    }

    /// Value at `x ∈ [0, n − 1]`; exact at the knots.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        let t = x - i as f64;
        if t == 0.0 {
            return self.y[i];
        }
        if t == 1.0 {
            return self.y[i + 1];
        }
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let u = 1.0 - t;
        u * y0 + t * y1 + ((u * u * u - u) * m0 + (t * t * t - t) * m1) / 6.0
    }
}

/// Re-samples every channel at `positions` (frame units) with a natural
/// cubic spline through the frames.
pub fn time_interpolate_at(seq: &SkeletonSequence, positions: &[f64]) -> Result<SkeletonSequence> {
    let (t, w) = (seq.len(), seq.width());
    contract!(t >= MIN_INTERP_FRAMES, "cubic re-sampling needs at least {MIN_INTERP_FRAMES} frames, got {t}");
    let hi = (t - 1) as f64;
    contract!(
        positions.iter().all(|p| (0.0..=hi).contains(p)),
        "evaluation positions must lie in [0, {hi}]"
    );
    let mut out = vec![0.0; positions.len() * w];
    let mut channel = vec![0.0; t];
    for c in 0..w {
        for (k, v) in channel.iter_mut().enumerate() {
            *v = seq.frames().data()[k * w + c];
        }
        let s = NaturalSpline::new(&channel)?;
        for (k, &p) in positions.iter().enumerate() {
            out[k * w + c] = s.eval(p);
        }
    }
    seq.with_frames(Array::from_vec(&[positions.len(), w], out)?)
}

/// `T` sorted positions drawn uniformly from `[0, T − 1]`.
pub fn sample_positions(rng: &mut impl Rng, t: usize) -> Vec<f64> {
    let hi = (t - 1) as f64;
    let mut p: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..=hi)).collect();
    p.sort_by(f64::total_cmp);
    p
}

/// Random cubic re-sampling. Returns `None` when the sequence is shorter
/// than [`MIN_INTERP_FRAMES`].
pub fn time_interpolate(seq: &SkeletonSequence, rng: &mut impl Rng) -> Result<Option<SkeletonSequence>> {
    if seq.len() < MIN_INTERP_FRAMES {
        return Ok(None);
    }
    let p = sample_positions(rng, seq.len());
    time_interpolate_at(seq, &p).map(Some)
}

/// Adds one constant `N(0, σ²I)` 3-vector to each of `n` distinct joints,
/// with `n` uniform in the policy's joint range.
pub fn joint_noise(seq: &SkeletonSequence, policy: &AugmentPolicy, rng: &mut impl Rng) -> Result<SkeletonSequence> {
    let joints = seq.width() / 3;
    policy.validate(joints)?;
    let (lo, hi) = policy.joints;
    let n = rng.random_range(lo..=hi);
    let chosen = index::sample(rng, joints, n);
    let mut offset = vec![0.0; seq.width()];
    for j in chosen.iter() {
        let d = sample_shift(rng, policy.sigma_noise);
        offset[3 * j..3 * j + 3].copy_from_slice(&d);
    }
    map_frames(seq, |c, v| v + offset[c])
}

/// One augmented copy of `seq`; the flag reports a skipped interpolation.
pub fn augment_sequence(seq: &SkeletonSequence, policy: &AugmentPolicy, rng: &mut impl Rng) -> Result<(SkeletonSequence, bool)> {
    let s = scale(seq, sample_scale(rng, policy.sigma_scale))?;
    let s = shift(&s, sample_shift(rng, policy.sigma_shift))?;
    let (s, skipped) = match policy.interpolation {
        Interpolation::Random => match time_interpolate(&s, rng)? {
            Some(r) => (r, false),
            None => (s, true),
        },
        Interpolation::Knots if s.len() >= MIN_INTERP_FRAMES => {
            let p: Vec<f64> = (0..s.len()).map(|i| i as f64).collect();
            (time_interpolate_at(&s, &p)?, false)
        }
        Interpolation::Knots => (s, true),
    };
    Ok((joint_noise(&s, policy, rng)?, skipped))
}

/// Stream for copy `copy` of sample `index`.
pub fn copy_rng(seed: u64, index: usize, copy: usize, multiplier: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index * multiplier + copy) as u64);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    /// `multiplier` copies of each source sample, grouped by source.
    pub dataset: LabeledDataset,
    /// Warnings such as skipped interpolations.
    pub warnings: Vec<String>,
}

/// Expands `ds` into `multiplier × |ds|` augmented samples (originals excluded).
pub fn augment_dataset(ds: &LabeledDataset, policy: &AugmentPolicy) -> Result<Augmented> {
    policy.validate(ds.joints())?;
    let m = policy.multiplier;
    let results: Vec<(SkeletonSequence, bool)> = (0..ds.len() * m)
        .into_par_iter()
        .map(|k| {
            let (i, c) = (k / m, k % m);
            let mut rng = copy_rng(policy.seed, i, c, m);
            augment_sequence(&ds.samples()[i], policy, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let mut samples = Vec::with_capacity(results.len());
    for (k, (s, skipped)) in results.into_iter().enumerate() {
        if skipped {
            let msg = format!(
                "sample {} ({}): {} frames, interpolation skipped",
                k / m,
                s.meta.source,
                s.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        samples.push(s);
    }
    Ok(Augmented {
        dataset: ds.with_samples(samples)?,
        warnings,
    })
}
