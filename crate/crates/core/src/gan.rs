//! The teacher-forced GRU CycleGAN.
//!
//! Two generators `G: X → Y` and `F: Y → X` and two discriminators `D_X`,
//! `D_Y`, all over a single dataset: the X and Y streams are independent
//! shuffles of the same training set. A generator reads the ground-truth
//! frame `x_t` (plus Gaussian noise) at every step and maps its GRU state
//! through a linear layer to the output frame, so output and input have
//! the same shape. A discriminator is a generator-shaped network with one
//! more linear layer on its last output frame, giving one logit per
//! sequence.
//!
//! Losses are written in minimization form:
//!
//! * generator: `mean(−log σ(D(fake)))`
//! * discriminator: `mean(−log σ(D(real))) + mean(−log σ(−D(fake)))`
//! * cycle: `mean|F(G(x)) − x| + mean|G(F(y)) − y|`
//! * identity of `G`: `mean|G(y) − y| + mean|G(x) − x|`
//!
//! `G` and `F` are updated jointly on
//! `gen_G + gen_F + λ1·cycle + λ2·(identity_G + identity_F)`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{LabeledDataset, SkeletonSequence};
use crate::error::{contract, Error, Result};
use crate::numcore::checkpoint::{merge_prefixed, split_prefixed};
use crate::numcore::{
    sequence_forward, Activation, AdamState, Array, Bound, Checkpoint, Dense, GruCell, ParamSet,
    Tape, Var,
};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GanConfig {
    /// GRU hidden units of every network.
    pub hidden: usize,
    pub batch: usize,
    pub max_epochs: usize,
    /// Epochs per convergence window.
    pub window: usize,
    /// Relative change of the windowed generator objective that counts as converged.
    pub tolerance: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Cycle-consistency weight.
    pub lambda1: f64,
    /// Identity weight.
    pub lambda2: f64,
    /// Std of the Gaussian noise added to generator inputs, in data units.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            hidden: 512,
            batch: 64,
            max_epochs: 200,
            window: 10,
            tolerance: 1e-3,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            lambda1: 10.0,
            lambda2: 5.0,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.hidden >= 1, "hidden units must be at least 1");
        contract!(self.batch >= 1, "batch size must be at least 1");
        contract!(self.window >= 1, "convergence window must be at least 1");
        contract!(
            self.lambda1 >= 0.0 && self.lambda2 >= 0.0,
            "loss weights must be non-negative"
        );
        contract!(
            self.noise_sigma.is_finite() && self.noise_sigma >= 0.0,
            "noise sigma must be finite and non-negative"
        );
        contract!(self.lr > 0.0 && self.lr.is_finite(), "learning rate must be positive");
        Ok(())
    }
}

/// Registers a generator's parameters: `gru.*` and `fc.*`.
pub fn init_generator(ps: &mut ParamSet, width: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    GruCell::init(ps, "gru", width, hidden, rng)?;
    Dense::init(ps, "fc", hidden, width, rng)
}

/// Registers a discriminator's parameters: the generator layout plus `head.*`.
pub fn init_discriminator(ps: &mut ParamSet, width: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    init_generator(ps, width, hidden, rng)?;
    Dense::init(ps, "head", width, 1, rng)
}

/// Anything that maps a time-major batch to one of the same shape.
pub trait Translator {
    fn translate(&mut self, tape: &mut Tape, xs: &[Var]) -> Result<Vec<Var>>;
}

/// Anything that scores a time-major batch with one logit per sequence (`[B×1]`).
pub trait Critic {
    fn logits(&self, tape: &mut Tape, xs: &[Var]) -> Result<Var>;
}

/// A generator bound onto a tape, with its input-noise source.
pub struct GeneratorNet {
    gru: GruCell,
    fc: Dense,
    noise: Option<(Normal<f64>, ChaCha8Rng)>,
}

impl GeneratorNet {
    /// `noise_sigma = 0` disables the input noise.
    pub fn bind(bound: &Bound, noise_sigma: f64, rng: ChaCha8Rng) -> Result<Self> {
        let noise = if noise_sigma > 0.0 {
            Some((Normal::new(0.0, noise_sigma).expect("finite σ"), rng))
        } else {
            None
        };
        Ok(GeneratorNet {
            gru: GruCell::bind(bound, "gru")?,
            fc: Dense::bind(bound, "fc")?,
            noise,
        })
    }
}

impl Translator for GeneratorNet {
    fn translate(&mut self, tape: &mut Tape, xs: &[Var]) -> Result<Vec<Var>> {
        let inputs: Vec<Var> = match &mut self.noise {
            None => xs.to_vec(),
            Some((dist, rng)) => xs
                .iter()
                .map(|&x| {
                    let mut n = Array::zeros(tape.value(x).dims())?;
                    for v in n.data_mut() {
                        *v = dist.sample(rng);
                    }
                    let n = tape.constant(n);
                    tape.add(x, n)
                })
                .collect::<Result<_>>()?,
        };
        let hs = sequence_forward(tape, &self.gru, &inputs)?;
        hs.into_iter()
            .map(|h| self.fc.forward(tape, h, Activation::None))
            .collect()
    }
}

/// A discriminator bound onto a tape.
pub struct DiscriminatorNet {
    gru: GruCell,
    fc: Dense,
    head: Dense,
}

impl DiscriminatorNet {
    pub fn bind(bound: &Bound) -> Result<Self> {
        Ok(DiscriminatorNet {
            gru: GruCell::bind(bound, "gru")?,
            fc: Dense::bind(bound, "fc")?,
            head: Dense::bind(bound, "head")?,
        })
    }
}

impl Critic for DiscriminatorNet {
    fn logits(&self, tape: &mut Tape, xs: &[Var]) -> Result<Var> {
        let hs = sequence_forward(tape, &self.gru, xs)?;
        let last = self.fc.forward(tape, *hs.last().expect("non-empty"), Activation::None)?;
        self.head.forward(tape, last, Activation::None)
    }
}

/// Mean of `−log σ(sign · l)`.
fn mean_neg_log_sigmoid(tape: &mut Tape, logits: Var, sign: f64) -> Result<Var> {
    let l = if sign == 1.0 { logits } else { tape.scale(logits, sign)? };
    let ls = tape.log_sigmoid(l)?;
    let m = tape.mean(ls)?;
    tape.scale(m, -1.0)
}

/// Non-saturating generator loss `mean(−log σ(D(fake)))`.
pub fn loss_gen(tape: &mut Tape, d: &impl Critic, fake: &[Var]) -> Result<Var> {
    let l = d.logits(tape, fake)?;
    mean_neg_log_sigmoid(tape, l, 1.0)
}

/// `mean(−log σ(D(real))) + mean(−log σ(−D(fake)))`.
pub fn loss_disc(tape: &mut Tape, d: &impl Critic, real: &[Var], fake: &[Var]) -> Result<Var> {
    let lr = d.logits(tape, real)?;
    let lf = d.logits(tape, fake)?;
    let a = mean_neg_log_sigmoid(tape, lr, 1.0)?;
    let b = mean_neg_log_sigmoid(tape, lf, -1.0)?;
    tape.add(a, b)
}

/// Mean absolute difference over every element of two sequences.
pub fn mean_l1(tape: &mut Tape, a: &[Var], b: &[Var]) -> Result<Var> {
    contract!(a.len() == b.len() && !a.is_empty(), "sequence lengths differ or are zero");
    let da = tape.concat(a, 0)?;
    let db = tape.concat(b, 0)?;
    let d = tape.sub(da, db)?;
    let d = tape.abs(d)?;
    tape.mean(d)
}

/// `mean|F(G(x)) − x| + mean|G(F(y)) − y|`.
pub fn loss_cycle(
    tape: &mut Tape,
    g: &mut impl Translator,
    f: &mut impl Translator,
    x: &[Var],
    y: &[Var],
) -> Result<Var> {
    let gx = g.translate(tape, x)?;
    let fgx = f.translate(tape, &gx)?;
    let fy = f.translate(tape, y)?;
    let gfy = g.translate(tape, &fy)?;
    let a = mean_l1(tape, &fgx, x)?;
    let b = mean_l1(tape, &gfy, y)?;
    tape.add(a, b)
}

/// `mean|G(y) − y| + mean|G(x) − x|`.
pub fn loss_identity(tape: &mut Tape, g: &mut impl Translator, x: &[Var], y: &[Var]) -> Result<Var> {
    let gy = g.translate(tape, y)?;
    let gx = g.translate(tape, x)?;
    let a = mean_l1(tape, &gy, y)?;
    let b = mean_l1(tape, &gx, x)?;
    tape.add(a, b)
}

/// `gen + λ1·cycle + λ2·identity`.
pub fn full_objective(gen: f64, cycle: f64, identity: f64, lambda1: f64, lambda2: f64) -> f64 {
    gen + lambda1 * cycle + lambda2 * identity
}

/// Tape form of [`full_objective`].
pub fn full_objective_var(tape: &mut Tape, gen: Var, cycle: Var, identity: Var, lambda1: f64, lambda2: f64) -> Result<Var> {
    let c = tape.scale(cycle, lambda1)?;
    let i = tape.scale(identity, lambda2)?;
    let s = tape.add(gen, c)?;
    tape.add(s, i)
}

/// Component losses of one training step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossRecord {
    pub disc_x: f64,
    pub disc_y: f64,
    pub gen_g: f64,
    pub gen_f: f64,
    pub cycle: f64,
    pub identity_g: f64,
    pub identity_f: f64,
    /// The joint generator objective.
    pub objective: f64,
}

impl LossRecord {
    fn values(&self) -> [f64; 8] {
        [
            self.disc_x,
            self.disc_y,
            self.gen_g,
            self.gen_f,
            self.cycle,
            self.identity_g,
            self.identity_f,
            self.objective,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    fn add_scaled(&mut self, o: &LossRecord, w: f64) {
        self.disc_x += w * o.disc_x;
        self.disc_y += w * o.disc_y;
        self.gen_g += w * o.gen_g;
        self.gen_f += w * o.gen_f;
        self.cycle += w * o.cycle;
        self.identity_g += w * o.identity_g;
        self.identity_f += w * o.identity_f;
        self.objective += w * o.objective;
    }
}

/// Epoch means of the step records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossRecord,
}

/// The four networks, their optimizers and the training configuration.
#[derive(Clone, Debug)]
pub struct GanModel {
    pub g: ParamSet,
    pub f: ParamSet,
    pub dx: ParamSet,
    pub dy: ParamSet,
    opt_g: AdamState,
    opt_f: AdamState,
    opt_dx: AdamState,
    opt_dy: AdamState,
    width: usize,
    pub config: GanConfig,
    /// Draws consumed by noise and shuffling.
    rng: ChaCha8Rng,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s);
    r
}

impl GanModel {
    /// Glorot-initialized networks for `width` coordinates per frame.
    pub fn new(width: usize, config: GanConfig) -> Result<Self> {
        config.validate()?;
        contract!(width >= 1, "frame width must be at least 1");
        let h = config.hidden;
        let mut nets = Vec::new();
        for (k, disc) in [(0, false), (1, false), (2, true), (3, true)] {
            let mut rng = stream(config.seed, k);
            let mut ps = ParamSet::new(config.seed);
            if disc {
                init_discriminator(&mut ps, width, h, &mut rng)?;
            } else {
                init_generator(&mut ps, width, h, &mut rng)?;
            }
            nets.push(ps);
        }
        let dy = nets.pop().expect("four nets");
        let dx = nets.pop().expect("four nets");
        let f = nets.pop().expect("four nets");
        let g = nets.pop().expect("four nets");
        let adam = || AdamState::with_betas(config.lr, config.beta1, config.beta2);
        Ok(GanModel {
            g,
            f,
            dx,
            dy,
            opt_g: adam(),
            opt_f: adam(),
            opt_dx: adam(),
            opt_dy: adam(),
            width,
            rng: stream(config.seed, 4),
            config,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_finite(&self) -> bool {
        [&self.g, &self.f, &self.dx, &self.dy].iter().all(|p| p.is_finite())
    }

    fn fork_rng(&mut self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(rand::Rng::random(&mut self.rng))
    }

    /// Detached translation of `xs` by a frozen copy of `params`.
    fn translate_values(&mut self, which: Which, xs: &[Array]) -> Result<Vec<Array>> {
        let rng = self.fork_rng();
        let params = match which {
            Which::G => &self.g,
            Which::F => &self.f,
        };
        translate_arrays(params, xs, self.config.noise_sigma, rng)
    }

    /// One update: discriminators on detached fakes, then both generators
    /// jointly with the discriminators frozen.
    pub fn train_step(&mut self, x: &[Array], y: &[Array]) -> Result<LossRecord> {
        let (disc_x, disc_y) = self.disc_step(x, y)?;
        let mut rec = self.gen_step(x, y)?;
        rec.disc_x = disc_x;
        rec.disc_y = disc_y;
        Ok(rec)
    }

    /// Updates `D_X` and `D_Y` on `x`, `y` and detached fakes `F(y)`, `G(x)`.
    /// Returns their losses.
    pub fn disc_step(&mut self, x: &[Array], y: &[Array]) -> Result<(f64, f64)> {
        contract!(!x.is_empty() && x.len() == y.len(), "batches must share a non-zero length");
        let fake_y = self.translate_values(Which::G, x)?;
        let fake_x = self.translate_values(Which::F, y)?;
        let mut tape = Tape::new();
        let bx = self.dx.bind(&mut tape);
        let by = self.dy.bind(&mut tape);
        let dx = DiscriminatorNet::bind(&bx)?;
        let dy = DiscriminatorNet::bind(&by)?;
        let xv = constants(&mut tape, x);
        let yv = constants(&mut tape, y);
        let fxv = constants(&mut tape, &fake_x);
        let fyv = constants(&mut tape, &fake_y);
        let lx = loss_disc(&mut tape, &dx, &xv, &fxv)?;
        let ly = loss_disc(&mut tape, &dy, &yv, &fyv)?;
        let (vx, vy) = (tape.value(lx).item()?, tape.value(ly).item()?);
        if !(vx.is_finite() && vy.is_finite()) {
            return Err(Error::NonFinite(format!("discriminator losses D_X {vx}, D_Y {vy}")));
        }
        let total = tape.add(lx, ly)?;
        tape.backward(total)?;
        self.dx.pull_grads(&tape, &bx);
        self.dy.pull_grads(&tape, &by);
        self.opt_dx.step(&mut self.dx)?;
        self.opt_dy.step(&mut self.dy)?;
        self.check_params("discriminator step")?;
        Ok((vx, vy))
    }

    /// Updates `G` and `F` jointly with the discriminators frozen. The
    /// returned record has zero discriminator losses.
    pub fn gen_step(&mut self, x: &[Array], y: &[Array]) -> Result<LossRecord> {
        contract!(!x.is_empty() && x.len() == y.len(), "batches must share a non-zero length");
        let (rg, rf) = (self.fork_rng(), self.fork_rng());
        let mut tape = Tape::new();
        let bg = self.g.bind(&mut tape);
        let bf = self.f.bind(&mut tape);
        let bdx = self.dx.bind_frozen(&mut tape);
        let bdy = self.dy.bind_frozen(&mut tape);
        let nets = BoundNets {
            g: &bg,
            f: &bf,
            dx: &bdx,
            dy: &bdy,
        };
        let (total, rec) = generator_objective(&mut tape, &nets, &self.config, x, y, rg, rf)?;
        if !rec.is_finite() {
            return Err(Error::NonFinite(format!("generator losses {rec:?}")));
        }
        tape.backward(total)?;
        self.g.pull_grads(&tape, &bg);
        self.f.pull_grads(&tape, &bf);
        drop(tape);
        self.opt_g.step(&mut self.g)?;
        self.opt_f.step(&mut self.f)?;
        self.check_params("generator step")?;
        Ok(rec)
    }

    fn check_params(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("parameters after {what}")))
        }
    }

    /// Translates a dataset's samples through `G` (`use_g`) or `F`.
    pub fn translate(&self, use_g: bool, xs: &[Array], noise_sigma: f64, rng: ChaCha8Rng) -> Result<Vec<Array>> {
        let p = if use_g { &self.g } else { &self.f };
        translate_arrays(p, xs, noise_sigma, rng)
    }

    /// Logits of `D_X` (`use_x`) or `D_Y` on a time-major batch.
    pub fn discriminate(&self, use_x: bool, xs: &[Array]) -> Result<Vec<f64>> {
        let p = if use_x { &self.dx } else { &self.dy };
        let mut tape = Tape::new();
        let b = p.bind_frozen(&mut tape);
        let d = DiscriminatorNet::bind(&b)?;
        let v = constants(&mut tape, xs);
        let l = d.logits(&mut tape, &v)?;
        Ok(tape.value(l).data().to_vec())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut all = ParamSet::new(self.config.seed);
        for (name, p) in [("G", &self.g), ("F", &self.f), ("DX", &self.dx), ("DY", &self.dy)] {
            merge_prefixed(&mut all, name, p)?;
        }
        let mut ck = Checkpoint::new(all);
        let c = &self.config;
        for (k, v) in [
            ("kind", "gan".to_string()),
            ("width", self.width.to_string()),
            ("hidden", c.hidden.to_string()),
            ("batch", c.batch.to_string()),
            ("max_epochs", c.max_epochs.to_string()),
            ("window", c.window.to_string()),
            ("tolerance", c.tolerance.to_string()),
            ("lr", c.lr.to_string()),
            ("beta1", c.beta1.to_string()),
            ("beta2", c.beta2.to_string()),
            ("lambda1", c.lambda1.to_string()),
            ("lambda2", c.lambda2.to_string()),
            ("noise_sigma", c.noise_sigma.to_string()),
        ] {
            ck.meta.insert(k.into(), v);
        }
        Ok(ck)
    }

    /// Rebuilds a model from a checkpoint; optimizer moments start fresh.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "gan" {
            return Err(Error::Load("checkpoint does not hold a GAN".into()));
        }
        let seed = ck.params.seed();
        let config = GanConfig {
            hidden: ck.meta_parse("hidden")?,
            batch: ck.meta_parse("batch")?,
            max_epochs: ck.meta_parse("max_epochs")?,
            window: ck.meta_parse("window")?,
            tolerance: ck.meta_parse("tolerance")?,
            lr: ck.meta_parse("lr")?,
            beta1: ck.meta_parse("beta1")?,
            beta2: ck.meta_parse("beta2")?,
            lambda1: ck.meta_parse("lambda1")?,
            lambda2: ck.meta_parse("lambda2")?,
            noise_sigma: ck.meta_parse("noise_sigma")?,
            seed,
        };
        let mut m = GanModel::new(ck.meta_parse("width")?, config)?;
        for (name, slot) in [("G", &mut m.g), ("F", &mut m.f), ("DX", &mut m.dx), ("DY", &mut m.dy)] {
            let p = split_prefixed(&ck.params, name, seed)?;
            let same = p.len() == slot.len()
                && p.iter().all(|(n, v)| slot.get(n).is_some_and(|s| s.value.dims() == v.value.dims()));
            if !same {
                return Err(Error::Load(format!("network {name} does not match the recorded shape")));
            }
            *slot = p;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[derive(Clone, Copy)]
enum Which {
    G,
    F,
}

fn constants(tape: &mut Tape, xs: &[Array]) -> Vec<Var> {
    xs.iter().map(|x| tape.constant(x.clone())).collect()
}

fn translate_arrays(params: &ParamSet, xs: &[Array], noise_sigma: f64, rng: ChaCha8Rng) -> Result<Vec<Array>> {
    let mut tape = Tape::new();
    let b = params.bind_frozen(&mut tape);
    let mut g = GeneratorNet::bind(&b, noise_sigma, rng)?;
    let v = constants(&mut tape, xs);
    let out = g.translate(&mut tape, &v)?;
    Ok(out.iter().map(|&o| tape.value(o).clone()).collect())
}

/// Handles of the four networks on one tape.
pub struct BoundNets<'a> {
    pub g: &'a Bound,
    pub f: &'a Bound,
    pub dx: &'a Bound,
    pub dy: &'a Bound,
}

/// The joint generator objective on `tape`, with `rg`/`rf` feeding the
/// input noise of `G`/`F`. Discriminator fields of the record are zero.
pub fn generator_objective(
    tape: &mut Tape,
    nets: &BoundNets,
    cfg: &GanConfig,
    x: &[Array],
    y: &[Array],
    rg: ChaCha8Rng,
    rf: ChaCha8Rng,
) -> Result<(Var, LossRecord)> {
    let mut g = GeneratorNet::bind(nets.g, cfg.noise_sigma, rg)?;
    let mut f = GeneratorNet::bind(nets.f, cfg.noise_sigma, rf)?;
    let dx = DiscriminatorNet::bind(nets.dx)?;
    let dy = DiscriminatorNet::bind(nets.dy)?;
    let xv = constants(tape, x);
    let yv = constants(tape, y);

    let gx = g.translate(tape, &xv)?;
    let fy = f.translate(tape, &yv)?;
    let gen_g = loss_gen(tape, &dy, &gx)?;
    let gen_f = loss_gen(tape, &dx, &fy)?;
    let fgx = f.translate(tape, &gx)?;
    let gfy = g.translate(tape, &fy)?;
    let c1 = mean_l1(tape, &fgx, &xv)?;
    let c2 = mean_l1(tape, &gfy, &yv)?;
    let cycle = tape.add(c1, c2)?;
    // G(x) and F(y) are reused for the identity terms
    let gy = g.translate(tape, &yv)?;
    let fx = f.translate(tape, &xv)?;
    let ig1 = mean_l1(tape, &gy, &yv)?;
    let ig2 = mean_l1(tape, &gx, &xv)?;
    let id_g = tape.add(ig1, ig2)?;
    let if1 = mean_l1(tape, &fx, &xv)?;
    let if2 = mean_l1(tape, &fy, &yv)?;
    let id_f = tape.add(if1, if2)?;
    let gen = tape.add(gen_g, gen_f)?;
    let id = tape.add(id_g, id_f)?;
    let total = full_objective_var(tape, gen, cycle, id, cfg.lambda1, cfg.lambda2)?;
    let rec = LossRecord {
        disc_x: 0.0,
        disc_y: 0.0,
        gen_g: tape.value(gen_g).item()?,
        gen_f: tape.value(gen_f).item()?,
        cycle: tape.value(cycle).item()?,
        identity_g: tape.value(id_g).item()?,
        identity_f: tape.value(id_f).item()?,
        objective: tape.value(total).item()?,
    };
    Ok((total, rec))
}

/// Time-major batch: entry `t` is `[B×W]`, row `b` is frame `t` of sample `idx[b]`.
pub fn time_major(samples: &[SkeletonSequence], idx: &[usize]) -> Result<Vec<Array>> {
    contract!(!idx.is_empty(), "empty batch");
    let t = samples[idx[0]].len();
    let w = samples[idx[0]].width();
    for &i in idx {
        contract!(
            samples[i].len() == t && samples[i].width() == w,
            "batch members differ in shape"
        );
    }
    (0..t)
        .map(|k| {
            let mut data = Vec::with_capacity(idx.len() * w);
            for &i in idx {
                data.extend_from_slice(samples[i].frame(k));
            }
            Array::from_vec(&[idx.len(), w], data)
        })
        .collect()
}

/// Row `b` of a time-major batch as a `[T×W]` array.
pub fn unbatch(xs: &[Array], b: usize) -> Result<Array> {
    let w = xs[0].dims()[1];
    let mut data = Vec::with_capacity(xs.len() * w);
    for x in xs {
        data.extend_from_slice(x.row(b));
    }
    Array::from_vec(&[xs.len(), w], data)
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub converged: bool,
}

/// Relative change between the last two windows of epoch objectives, once
/// `2 · window` epochs exist.
pub fn window_change(history: &[EpochRecord], window: usize) -> Option<f64> {
    let n = history.len();
    if n < 2 * window {
        return None;
    }
    let mean = |s: &[EpochRecord]| s.iter().map(|e| e.losses.objective).sum::<f64>() / s.len() as f64;
    let now = mean(&history[n - window..]);
    let before = mean(&history[n - 2 * window..n - window]);
    Some((now - before).abs() / before.abs().max(f64::MIN_POSITIVE))
}

/// Trains on shuffled mini-batches until `max_epochs` or convergence.
/// `on_epoch` sees the model after every epoch (e.g. for checkpoints).
pub fn train(
    model: &mut GanModel,
    ds: &LabeledDataset,
    mut on_epoch: impl FnMut(&GanModel, &EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    contract!(!ds.is_empty(), "cannot train a GAN on an empty dataset");
    ds.require_fixed_len()?;
    contract!(
        ds.width() == model.width,
        "dataset width {} differs from model width {}",
        ds.width(),
        model.width
    );
    let cfg = model.config.clone();
    let n = ds.len();
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut px: Vec<usize> = (0..n).collect();
        let mut py: Vec<usize> = (0..n).collect();
        px.shuffle(&mut model.rng);
        py.shuffle(&mut model.rng);
        let mut mean = LossRecord::default();
        let mut steps = 0usize;
        for (bx, by) in px.chunks(cfg.batch).zip(py.chunks(cfg.batch)) {
            let x = time_major(ds.samples(), bx)?;
            let y = time_major(ds.samples(), by)?;
            let rec = model.train_step(&x, &y).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}, step {}: {m}", steps + 1)),
                other => other,
            })?;
            mean.add_scaled(&rec, 1.0);
            steps += 1;
        }
        let mut avg = LossRecord::default();
        avg.add_scaled(&mean, 1.0 / steps as f64);
        let er = EpochRecord { epoch, losses: avg };
        log::info!(
            "gan epoch {epoch}: objective {:.5} disc {:.4}/{:.4}",
            avg.objective,
            avg.disc_x,
            avg.disc_y
        );
        history.push(er);
        on_epoch(model, &er)?;
        if window_change(&history, cfg.window).is_some_and(|c| c < cfg.tolerance) {
            return Ok(TrainOutcome { history, converged: true });
        }
    }
    Ok(TrainOutcome { history, converged: false })
}

/// Batch size used when generating.
const GENERATE_BATCH: usize = 64;

/// Emits `count` synthetic sequences per source sample, grouped by source.
/// Copy `c` (1-based) is `G(x)` for odd `c` and `F(x)` for even `c`, with
/// input noise of std `noise_sigma`. Labels and subjects are copied.
pub fn generate(model: &GanModel, ds: &LabeledDataset, count: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if count == 0 || ds.is_empty() {
        return ds.with_samples(Vec::new());
    }
    ds.require_fixed_len()?;
    contract!(ds.width() == model.width, "dataset width differs from model width");
    let chunks: Vec<Vec<usize>> = (0..ds.len())
        .collect::<Vec<_>>()
        .chunks(GENERATE_BATCH)
        .map(<[usize]>::to_vec)
        .collect();
    let per_chunk: Vec<Vec<SkeletonSequence>> = chunks
        .par_iter()
        .map(|idx| {
            let x = time_major(ds.samples(), idx)?;
            let mut out: Vec<Vec<SkeletonSequence>> = vec![Vec::with_capacity(count); idx.len()];
            for c in 1..=count {
                // per-sample noise streams, stacked into one batch
                let noisy: Vec<Array> = if noise_sigma > 0.0 {
                    let dist = Normal::new(0.0, noise_sigma).expect("finite σ");
                    let mut rngs: Vec<ChaCha8Rng> = idx
                        .iter()
                        .map(|&i| stream(seed, (i * count + c) as u64))
                        .collect();
                    x.iter()
                        .map(|xt| {
                            let mut a = xt.clone();
                            let w = a.dims()[1];
                            for (b, r) in rngs.iter_mut().enumerate() {
                                for v in &mut a.data_mut()[b * w..(b + 1) * w] {
                                    *v += dist.sample(r);
                                }
                            }
                            a
                        })
                        .collect()
                } else {
                    x.clone()
                };
                let y = model.translate(c % 2 == 1, &noisy, 0.0, stream(seed, u64::MAX))?;
                for (b, &i) in idx.iter().enumerate() {
                    let src = &ds.samples()[i];
                    let mut s = src.with_frames(unbatch(&y, b)?)?;
                    s.meta.source = format!("{}#gan{c}", src.meta.source);
                    out[b].push(s);
                }
            }
            Ok(out.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    ds.with_samples(per_chunk.into_iter().flatten().collect())
}
