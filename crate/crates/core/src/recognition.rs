//! The two evaluation classifiers and their training schedule.
//!
//! * LSTM: LSTM over frames → additive self-attention → dense 512 (tanh) → K logits.
//! * CNN: the sequence as a one-channel `T × W` image → two blocks of
//!   3×3 conv (tanh) + max-pool 2 along time → flatten → dense 512 (tanh) → K logits.
//!
//! The 512-wide dense layer is the latent representation used for
//! visualization.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{contract, Error, Result};
use crate::gan::time_major;
use crate::numcore::{
    max_pool_rows, sequence_forward, sparse_ce_loss, Activation, AdamState, Array, Attention,
    Bound, Checkpoint, Conv2d, Dense, LstmCell, ParamSet, Tape, Var,
};

/// Width of the penultimate dense layer.
pub const LATENT_DIM: usize = 512;

/// Batch size used for inference.
const EVAL_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecognizerKind {
    Lstm,
    Cnn,
}

impl RecognizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecognizerKind::Lstm => "lstm",
            RecognizerKind::Cnn => "cnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(RecognizerKind::Lstm),
            "cnn" => Ok(RecognizerKind::Cnn),
            other => Err(Error::Contract(format!("unknown recognizer kind {other:?}"))),
        }
    }
}

impl fmt::Display for RecognizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecognizerSpec {
    pub kind: RecognizerKind,
    /// LSTM units (LSTM kind only).
    pub hidden: usize,
    /// Attention projection width (LSTM kind only).
    pub attention: usize,
    /// Output channels of the two conv blocks (CNN kind only).
    pub channels: (usize, usize),
    pub classes: usize,
    pub frames: usize,
    pub width: usize,
    pub seed: u64,
}

impl RecognizerSpec {
    pub fn lstm(classes: usize, frames: usize, width: usize, seed: u64) -> Self {
        RecognizerSpec {
            kind: RecognizerKind::Lstm,
            hidden: 512,
            attention: 128,
            channels: (8, 16),
            classes,
            frames,
            width,
            seed,
        }
    }

    pub fn cnn(classes: usize, frames: usize, width: usize, seed: u64) -> Self {
        RecognizerSpec { kind: RecognizerKind::Cnn, ..Self::lstm(classes, frames, width, seed) }
    }

    pub fn new(kind: RecognizerKind, classes: usize, frames: usize, width: usize, seed: u64) -> Self {
        match kind {
            RecognizerKind::Lstm => Self::lstm(classes, frames, width, seed),
            RecognizerKind::Cnn => Self::cnn(classes, frames, width, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract!(self.classes >= 2, "a recognizer needs K >= 2, got {}", self.classes);
        contract!(
            self.frames >= 1 && self.width >= 1,
            "input dims must be positive, got {}x{}",
            self.frames,
            self.width
        );
        match self.kind {
            RecognizerKind::Lstm => contract!(
                self.hidden >= 1 && self.attention >= 1,
                "LSTM widths must be positive"
            ),
            RecognizerKind::Cnn => contract!(
                self.channels.0 >= 1 && self.channels.1 >= 1,
                "CNN channel counts must be positive"
            ),
        }
        Ok(())
    }

    /// Time extent after the two pooling stages.
    fn pooled_frames(&self) -> usize {
        ((self.frames / 2).max(1) / 2).max(1)
    }
}

/// A recognizer and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Recognizer {
    pub spec: RecognizerSpec,
    pub params: ParamSet,
}

impl Recognizer {
    /// Glorot-initialized network; parameters depend only on `spec`.
    pub fn build(spec: RecognizerSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut ps = ParamSet::new(spec.seed);
        match spec.kind {
            RecognizerKind::Lstm => {
                LstmCell::init(&mut ps, "lstm", spec.width, spec.hidden, &mut rng)?;
                Attention::init(&mut ps, "attn", spec.hidden, spec.attention, &mut rng)?;
                Dense::init(&mut ps, "latent", spec.hidden, LATENT_DIM, &mut rng)?;
            }
            RecognizerKind::Cnn => {
                let (c1, c2) = spec.channels;
                Conv2d::init(&mut ps, "conv1", 1, c1, (3, 3), &mut rng)?;
                Conv2d::init(&mut ps, "conv2", c1, c2, (3, 3), &mut rng)?;
                let flat = c2 * spec.pooled_frames() * spec.width;
                Dense::init(&mut ps, "latent", flat, LATENT_DIM, &mut rng)?;
            }
        }
        Dense::init(&mut ps, "out", LATENT_DIM, spec.classes, &mut rng)?;
        Ok(Recognizer { spec, params: ps })
    }

    /// Checks that `ds` fits the input layer.
    pub fn check_input(&self, ds: &LabeledDataset) -> Result<()> {
        contract!(
            ds.num_classes() == self.spec.classes,
            "dataset has K = {}, recognizer has K = {}",
            ds.num_classes(),
            self.spec.classes
        );
        contract!(ds.width() == self.spec.width, "dataset width {} differs from {}", ds.width(), self.spec.width);
        if !ds.is_empty() {
            let t = ds.require_fixed_len()?;
            contract!(t == self.spec.frames, "dataset has T = {t}, recognizer expects {}", self.spec.frames);
        }
        Ok(())
    }

    /// `(latent [B×512], logits [B×K])` for samples `idx` of `ds`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, ds: &LabeledDataset, idx: &[usize]) -> Result<(Var, Var)> {
        let latent = match self.spec.kind {
            RecognizerKind::Lstm => {
                let xs: Vec<Var> = time_major(ds.samples(), idx)?
                    .into_iter()
                    .map(|x| tape.constant(x))
                    .collect();
                let hs = sequence_forward(tape, &LstmCell::bind(bound, "lstm")?, &xs)?;
                let (ctx, _) = Attention::bind(bound, "attn")?.forward(tape, &hs)?;
                Dense::bind(bound, "latent")?.forward(tape, ctx, Activation::Tanh)?
            }
            RecognizerKind::Cnn => {
                let (t, w) = (self.spec.frames, self.spec.width);
                let mut data = Vec::with_capacity(idx.len() * t * w);
                for &i in idx {
                    data.extend_from_slice(ds.samples()[i].frames().data());
                }
                let x = tape.constant(Array::from_vec(&[idx.len(), 1, t, w], data)?);
                let mut h = x;
                for name in ["conv1", "conv2"] {
                    let c = Conv2d::bind(bound, name)?.forward(tape, h, 1, 1)?;
                    let a = tape.tanh(c)?;
                    h = max_pool_rows(tape, a, 2)?;
                }
                let flat = tape.value(h).len() / idx.len();
                let h = tape.reshape(h, &[idx.len(), flat])?;
                Dense::bind(bound, "latent")?.forward(tape, h, Activation::Tanh)?
            }
        };
        let logits = Dense::bind(bound, "out")?.forward(tape, latent, Activation::None)?;
        Ok((latent, logits))
    }

    /// Inference over all of `ds` in batches: `(latents, logits)` row-aligned with the samples.
    fn infer(&self, ds: &LabeledDataset) -> Result<(Array, Array)> {
        self.check_input(ds)?;
        contract!(!ds.is_empty(), "cannot run a recognizer on an empty dataset");
        let chunks: Vec<Vec<usize>> = (0..ds.len())
            .collect::<Vec<_>>()
            .chunks(EVAL_BATCH)
            .map(<[usize]>::to_vec)
            .collect();
        let parts: Vec<(Array, Array)> = chunks
            .par_iter()
            .map(|idx| {
                let mut tape = Tape::new();
                let b = self.params.bind_frozen(&mut tape);
                let (l, o) = self.forward(&mut tape, &b, ds, idx)?;
                Ok((tape.value(l).clone(), tape.value(o).clone()))
            })
            .collect::<Result<_>>()?;
        let mut lat = Vec::with_capacity(ds.len() * LATENT_DIM);
        let mut log = Vec::with_capacity(ds.len() * self.spec.classes);
        for (l, o) in parts {
            lat.extend(l.into_data());
            log.extend(o.into_data());
        }
        Ok((
            Array::from_vec(&[ds.len(), LATENT_DIM], lat)?,
            Array::from_vec(&[ds.len(), self.spec.classes], log)?,
        ))
    }

    /// Logits `[N×K]`.
    pub fn logits(&self, ds: &LabeledDataset) -> Result<Array> {
        Ok(self.infer(ds)?.1)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.spec;
        let mut ck = Checkpoint::new(self.params.clone());
        for (k, v) in [
            ("kind", "recognizer".to_string()),
            ("arch", s.kind.as_str().to_string()),
            ("hidden", s.hidden.to_string()),
            ("attention", s.attention.to_string()),
            ("channels1", s.channels.0.to_string()),
            ("channels2", s.channels.1.to_string()),
            ("classes", s.classes.to_string()),
            ("frames", s.frames.to_string()),
            ("width", s.width.to_string()),
        ] {
            ck.meta.insert(k.into(), v);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "recognizer" {
            return Err(Error::Load("checkpoint does not hold a recognizer".into()));
        }
        let spec = RecognizerSpec {
            kind: RecognizerKind::parse(ck.meta_str("arch")?).map_err(|e| Error::Load(e.to_string()))?,
            hidden: ck.meta_parse("hidden")?,
            attention: ck.meta_parse("attention")?,
            channels: (ck.meta_parse("channels1")?, ck.meta_parse("channels2")?),
            classes: ck.meta_parse("classes")?,
            frames: ck.meta_parse("frames")?,
            width: ck.meta_parse("width")?,
            seed: ck.params.seed(),
        };
        let fresh = Recognizer::build(spec.clone()).map_err(|e| Error::Load(e.to_string()))?;
        let names = |p: &ParamSet| p.iter().map(|(n, q)| (n.clone(), q.value.dims().to_vec())).collect::<Vec<_>>();
        if names(&fresh.params) != names(&ck.params) {
            return Err(Error::Load("checkpoint parameters do not match its recognizer spec".into()));
        }
        Ok(Recognizer { spec, params: ck.params.clone() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Optimizer and stopping schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub lr: f64,
    /// Epochs without improvement before the learning rate is reduced.
    pub plateau_patience: usize,
    /// Epochs without improvement before training stops.
    pub early_stop_patience: usize,
    pub lr_factor: f64,
    /// Minimum validation-loss decrease that resets the plateau counter.
    pub plateau_threshold: f64,
    pub batch: usize,
    pub max_epochs: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            lr: 1e-4,
            plateau_patience: 3,
            early_stop_patience: 5,
            lr_factor: 0.5,
            plateau_threshold: 1e-4,
            batch: 64,
            max_epochs: 100,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        contract!(self.lr > 0.0 && self.lr.is_finite(), "learning rate must be positive");
        contract!(
            self.plateau_patience >= 1 && self.early_stop_patience >= 1,
            "patience values must be >= 1"
        );
        contract!(
            self.lr_factor > 0.0 && self.lr_factor < 1.0,
            "lr factor must lie in (0, 1), got {}",
            self.lr_factor
        );
        contract!(self.plateau_threshold >= 0.0, "plateau threshold must be >= 0");
        contract!(self.batch >= 1, "batch size must be >= 1");
        Ok(())
    }
}

/// Losses and accuracies after one epoch, both measured on the full sets
/// with the end-of-epoch parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedRecognizer {
    /// Parameters of the best-validation epoch.
    pub recognizer: Recognizer,
    pub history: Vec<EpochStats>,
    pub stopped_epoch: usize,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
}

impl TrainedRecognizer {
    pub fn best(&self) -> &EpochStats {
        &self.history[self.best_epoch - 1]
    }
}

/// Which epoch counters fire after observing a validation loss.
#[derive(Clone, Debug)]
pub struct StopTracker {
    best: f64,
    plateau_best: f64,
    since_best: usize,
    since_plateau: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopEvent {
    pub improved: bool,
    pub reduce_lr: bool,
    pub stop: bool,
}

impl Default for StopTracker {
    fn default() -> Self {
        StopTracker {
            best: f64::INFINITY,
            plateau_best: f64::INFINITY,
            since_best: 0,
            since_plateau: 0,
        }
    }
}

impl StopTracker {
    /// Early stopping counts any decrease as improvement; the plateau
    /// counter needs a decrease larger than `plateau_threshold`.
    pub fn observe(&mut self, val_loss: f64, s: &TrainSchedule) -> StopEvent {
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        let mut reduce_lr = false;
        if val_loss < self.plateau_best - s.plateau_threshold {
            self.plateau_best = val_loss;
            self.since_plateau = 0;
        } else {
            self.since_plateau += 1;
            if self.since_plateau >= s.plateau_patience {
                reduce_lr = true;
                self.since_plateau = 0;
            }
        }
        StopEvent {
            improved,
            reduce_lr,
            stop: self.since_best >= s.early_stop_patience,
        }
    }
}

/// Mini-batch Adam on sparse cross-entropy with plateau LR reduction and
/// early stopping; the best-validation parameters are restored.
pub fn train_recognizer(
    recognizer: Recognizer,
    train: &LabeledDataset,
    val: &LabeledDataset,
    schedule: &TrainSchedule,
) -> Result<TrainedRecognizer> {
    schedule.validate()?;
    contract!(!train.is_empty() && !val.is_empty(), "training and validation sets must be non-empty");
    contract!(schedule.max_epochs >= 1, "max_epochs must be >= 1");
    recognizer.check_input(train)?;
    recognizer.check_input(val)?;
    let mut rng = ChaCha8Rng::seed_from_u64(recognizer.spec.seed);
    rng.set_stream(1);
    let mut rec = recognizer;
    let mut adam = AdamState::new(schedule.lr);
    let mut tracker = StopTracker::default();
    let mut best = rec.params.clone();
    let mut best_epoch = 1;
    let mut history = Vec::new();
    let labels = train.labels();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=schedule.max_epochs {
        order.shuffle(&mut rng);
        let lr = adam.lr;
        for idx in order.chunks(schedule.batch) {
            let mut tape = Tape::new();
            let bound = rec.params.bind(&mut tape);
            let (_, logits) = rec.forward(&mut tape, &bound, train, idx)?;
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let loss = sparse_ce_loss(&mut tape, logits, &y)?;
            tape.backward(loss)?;
            rec.params.pull_grads(&tape, &bound);
            adam.step(&mut rec.params)?;
        }
        if !rec.params.is_finite() {
            return Err(Error::NonFinite(format!("recognizer parameters diverged in epoch {epoch}")));
        }
        let tr = evaluate(&rec, train)?;
        let va = evaluate(&rec, val)?;
        let stats = EpochStats {
            epoch,
            lr,
            train_loss: tr.loss,
            train_acc: tr.accuracy,
            val_loss: va.loss,
            val_acc: va.accuracy,
        };
        log::debug!(
            "recognizer epoch {epoch}: loss {:.4}/{:.4} acc {:.3}/{:.3} lr {lr:e}",
            tr.loss,
            va.loss,
            tr.accuracy,
            va.accuracy
        );
        history.push(stats);
        let ev = tracker.observe(va.loss, schedule);
        if ev.improved {
            best = rec.params.clone();
            best_epoch = epoch;
        }
        if ev.reduce_lr {
            adam.lr *= schedule.lr_factor;
        }
        if ev.stop {
            break;
        }
    }
    rec.params = best;
    Ok(TrainedRecognizer {
        recognizer: rec,
        stopped_epoch: history.len(),
        history,
        best_epoch,
    })
}

/// Accuracy report over one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Per-class accuracy; `None` for classes absent from the dataset.
    pub per_class: Vec<Option<f64>>,
    pub class_counts: Vec<usize>,
    /// Mean cross-entropy.
    pub loss: f64,
    pub n: usize,
}

impl Evaluation {
    /// Scores predictions against labels; `loss` is passed through.
    pub fn from_predictions(predictions: &[usize], labels: &[usize], classes: usize, loss: f64) -> Result<Self> {
        contract!(!labels.is_empty(), "cannot evaluate an empty dataset");
        contract!(predictions.len() == labels.len(), "prediction and label counts differ");
        contract!(labels.iter().all(|&l| l < classes), "label out of range [0, {classes})");
        let mut counts = vec![0usize; classes];
        let mut correct = vec![0usize; classes];
        for (&p, &l) in predictions.iter().zip(labels) {
            counts[l] += 1;
            correct[l] += usize::from(p == l);
        }
        let total: usize = correct.iter().sum();
        Ok(Evaluation {
            accuracy: total as f64 / labels.len() as f64,
            per_class: counts
                .iter()
                .zip(&correct)
                .map(|(&n, &c)| (n > 0).then(|| c as f64 / n as f64))
                .collect(),
            class_counts: counts,
            loss,
            n: labels.len(),
        })
    }

    /// Structured text report.
    pub fn report(&self) -> String {
        let mut s = format!("samples {}\naccuracy {}\nloss {}\n", self.n, self.accuracy, self.loss);
        for (k, (acc, n)) in self.per_class.iter().zip(&self.class_counts).enumerate() {
            match acc {
                Some(a) => s.push_str(&format!("class {k} {n} {a}\n")),
                None => s.push_str(&format!("class {k} 0 -\n")),
            }
        }
        s
    }
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(logits: &Array) -> Result<Vec<usize>> {
    let (n, k) = logits.matrix_dims()?;
    Ok((0..n)
        .map(|i| {
            let row = logits.row(i);
            (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b })
        })
        .collect())
}

/// Mean of `−log softmax(row)[label]`.
pub fn mean_cross_entropy(logits: &Array, labels: &[usize]) -> Result<f64> {
    let (n, k) = logits.matrix_dims()?;
    contract!(labels.len() == n && n > 0, "label count differs from logit rows");
    let mut s = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        contract!(l < k, "label out of range [0, {k})");
        let row = logits.row(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        s += lse - row[l];
    }
    Ok(s / n as f64)
}

pub fn evaluate(recognizer: &Recognizer, ds: &LabeledDataset) -> Result<Evaluation> {
    let logits = recognizer.logits(ds)?;
    let labels = ds.labels();
    let loss = mean_cross_entropy(&logits, &labels)?;
    Evaluation::from_predictions(&argmax_rows(&logits)?, &labels, recognizer.spec.classes, loss)
}

/// Penultimate-layer activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Latents {
    /// `[N×512]`
    pub points: Array,
    pub labels: Vec<usize>,
}

pub fn extract_latents(recognizer: &Recognizer, ds: &LabeledDataset) -> Result<Latents> {
    Ok(Latents {
        points: recognizer.infer(ds)?.0,
        labels: ds.labels(),
    })
}
