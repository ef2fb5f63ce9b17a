//! Neural layers composed from tape primitives.
//!
//! Each layer registers its parameters in a [`ParamSet`] under a name
//! prefix (`init`) and is later rebuilt from tape handles (`bind`).
//! Sequences are slices of per-step `[B×d]` values.

use rand::Rng;

use super::params::{Bound, ParamSet};
use super::tape::{Tape, Var};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    Tanh,
    Sigmoid,
}

/// `act(x·W + b)` for `x: [B×n]`, `W: [n×m]`, `b: [1×m]`.
pub fn dense_forward(tape: &mut Tape, x: Var, w: Var, b: Var, act: Activation) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let (_, m) = tape.value(xw).matrix_dims()?;
    contract!(
        tape.value(b).len() == m,
        "dense bias has {} elements, layer width is {m}",
        tape.value(b).len()
    );
    let b = if tape.value(b).dims() == [1, m] {
        b
    } else {
        tape.reshape(b, &[1, m])?
    };
    let y = tape.add(xw, b)?;
    match act {
        Activation::None => Ok(y),
        Activation::Tanh => tape.tanh(y),
        Activation::Sigmoid => tape.sigmoid(y),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: Var,
    pub b: Var,
}

impl Dense {
    pub fn init(ps: &mut ParamSet, prefix: &str, n_in: usize, n_out: usize, rng: &mut impl Rng) -> Result<()> {
        ps.add_glorot(&format!("{prefix}.w"), &[n_in, n_out], n_in, n_out, rng)?;
        ps.add_zeros(&format!("{prefix}.b"), &[1, n_out])
    }

    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(Dense {
            w: bound.get(&format!("{prefix}.w"))?,
            b: bound.get(&format!("{prefix}.b"))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, act: Activation) -> Result<Var> {
        dense_forward(tape, x, self.w, self.b, act)
    }
}

/// A recurrent cell folded over a sequence by [`sequence_forward`].
pub trait Recurrent {
    type State: Clone;

    fn hidden_size(&self, tape: &Tape) -> usize;
    fn zero_state(&self, tape: &mut Tape, batch: usize) -> Result<Self::State>;
    fn step(&self, tape: &mut Tape, x: Var, state: &Self::State) -> Result<Self::State>;
    fn hidden(state: &Self::State) -> Var;
}

/// GRU cell with fused gate weights.
///
/// `z = σ(x Wz + h Uz + bz)`, `r = σ(x Wr + h Ur + br)`,
/// `h̃ = tanh(x Wh + (r∘h) Uh + bh)`, `h' = (1 − z)∘h + z∘h̃`.
/// Parameters: `wx [d×3H]` (z|r|h̃), `uzr [H×2H]`, `uh [H×H]`, `b [1×3H]`.
#[derive(Clone, Copy, Debug)]
pub struct GruCell {
    pub wx: Var,
    pub uzr: Var,
    pub uh: Var,
    pub b: Var,
}

impl GruCell {
    pub fn init(ps: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<()> {
        let h = hidden;
        ps.add_glorot(&format!("{prefix}.wx"), &[input, 3 * h], input, 3 * h, rng)?;
        ps.add_glorot(&format!("{prefix}.uzr"), &[h, 2 * h], h, 2 * h, rng)?;
        ps.add_glorot(&format!("{prefix}.uh"), &[h, h], h, h, rng)?;
        ps.add_zeros(&format!("{prefix}.b"), &[1, 3 * h])
    }

    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(GruCell {
            wx: bound.get(&format!("{prefix}.wx"))?,
            uzr: bound.get(&format!("{prefix}.uzr"))?,
            uh: bound.get(&format!("{prefix}.uh"))?,
            b: bound.get(&format!("{prefix}.b"))?,
        })
    }
}

impl Recurrent for GruCell {
    type State = Var;

    fn hidden_size(&self, tape: &Tape) -> usize {
        tape.value(self.uh).dims()[0]
    }

    fn zero_state(&self, tape: &mut Tape, batch: usize) -> Result<Var> {
        let h = self.hidden_size(tape);
        Ok(tape.constant(super::array::Array::zeros(&[batch, h])?))
    }

    fn step(&self, tape: &mut Tape, x: Var, h: &Var) -> Result<Var> {
        gru_cell_forward(tape, x, *h, self)
    }

    fn hidden(state: &Var) -> Var {
        *state
    }
}

/// One GRU step: `x_t: [B×d]`, `h_prev: [B×H]` → `h_t: [B×H]`.
pub fn gru_cell_forward(tape: &mut Tape, x: Var, h: Var, cell: &GruCell) -> Result<Var> {
    let hs = cell.hidden_size(tape);
    let (_, hw) = tape.value(h).matrix_dims()?;
    contract!(hw == hs, "GRU state width {hw} differs from hidden size {hs}");
    let xw = dense_forward(tape, x, cell.wx, cell.b, Activation::None)?;
    let hu = tape.matmul(h, cell.uzr)?;
    let xzr = tape.slice(xw, 1, 0, 2 * hs)?;
    let zr_pre = tape.add(xzr, hu)?;
    let zr = tape.sigmoid(zr_pre)?;
    let z = tape.slice(zr, 1, 0, hs)?;
    let r = tape.slice(zr, 1, hs, hs)?;
    let rh = tape.mul(r, h)?;
    let rhu = tape.matmul(rh, cell.uh)?;
    let xh = tape.slice(xw, 1, 2 * hs, hs)?;
    let cand_pre = tape.add(xh, rhu)?;
    let cand = tape.tanh(cand_pre)?;
    let delta = tape.sub(cand, h)?;
    let step = tape.mul(z, delta)?;
    tape.add(h, step)
}

/// LSTM cell. Parameters: `wx [d×4H]`, `uh [H×4H]`, `b [1×4H]`, gate
/// columns ordered input | forget | output | candidate.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub wx: Var,
    pub uh: Var,
    pub b: Var,
}

impl LstmCell {
    pub fn init(ps: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Result<()> {
        let h = hidden;
        ps.add_glorot(&format!("{prefix}.wx"), &[input, 4 * h], input, 4 * h, rng)?;
        ps.add_glorot(&format!("{prefix}.uh"), &[h, 4 * h], h, 4 * h, rng)?;
        ps.add_zeros(&format!("{prefix}.b"), &[1, 4 * h])
    }

    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(LstmCell {
            wx: bound.get(&format!("{prefix}.wx"))?,
            uh: bound.get(&format!("{prefix}.uh"))?,
            b: bound.get(&format!("{prefix}.b"))?,
        })
    }
}

impl Recurrent for LstmCell {
    /// `(h, c)`
    type State = (Var, Var);

    fn hidden_size(&self, tape: &Tape) -> usize {
        tape.value(self.uh).dims()[0]
    }

    fn zero_state(&self, tape: &mut Tape, batch: usize) -> Result<(Var, Var)> {
        let h = self.hidden_size(tape);
        let z = super::array::Array::zeros(&[batch, h])?;
        Ok((tape.constant(z.clone()), tape.constant(z)))
    }

    fn step(&self, tape: &mut Tape, x: Var, state: &(Var, Var)) -> Result<(Var, Var)> {
        let (h, c) = *state;
        let hs = self.hidden_size(tape);
        let xw = dense_forward(tape, x, self.wx, self.b, Activation::None)?;
        let hu = tape.matmul(h, self.uh)?;
        let pre = tape.add(xw, hu)?;
        let gates_pre = tape.slice(pre, 1, 0, 3 * hs)?;
        let gates = tape.sigmoid(gates_pre)?;
        let i = tape.slice(gates, 1, 0, hs)?;
        let f = tape.slice(gates, 1, hs, hs)?;
        let o = tape.slice(gates, 1, 2 * hs, hs)?;
        let g_pre = tape.slice(pre, 1, 3 * hs, hs)?;
        let g = tape.tanh(g_pre)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let ct = tape.tanh(c_next)?;
        let h_next = tape.mul(o, ct)?;
        Ok((h_next, c_next))
    }

    fn hidden(state: &(Var, Var)) -> Var {
        state.0
    }
}

/// Folds `cell` over `xs` from a zero state and returns every hidden state.
pub fn sequence_forward<C: Recurrent>(tape: &mut Tape, cell: &C, xs: &[Var]) -> Result<Vec<Var>> {
    contract!(!xs.is_empty(), "sequence_forward needs T >= 1");
    let (batch, _) = tape.value(xs[0]).matrix_dims()?;
    let mut state = cell.zero_state(tape, batch)?;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        state = cell.step(tape, x, &state)?;
        out.push(C::hidden(&state));
    }
    Ok(out)
}

/// Additive single-head attention pooling:
/// `s_t = v·tanh(W h_t)`, `α = softmax(s)`, `context = Σ α_t h_t`.
/// Parameters: `w [H×A]`, `v [A×1]`.
#[derive(Clone, Copy, Debug)]
pub struct Attention {
    pub w: Var,
    pub v: Var,
}

impl Attention {
    pub fn init(ps: &mut ParamSet, prefix: &str, hidden: usize, attn: usize, rng: &mut impl Rng) -> Result<()> {
        ps.add_glorot(&format!("{prefix}.w"), &[hidden, attn], hidden, attn, rng)?;
        ps.add_glorot(&format!("{prefix}.v"), &[attn, 1], attn, 1, rng)
    }

    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(Attention {
            w: bound.get(&format!("{prefix}.w"))?,
            v: bound.get(&format!("{prefix}.v"))?,
        })
    }

    /// Returns `(context [B×H], weights [B×T])`.
    pub fn forward(&self, tape: &mut Tape, hs: &[Var]) -> Result<(Var, Var)> {
        self_attention_forward(tape, hs, self.w, self.v)
    }
}

pub fn self_attention_forward(tape: &mut Tape, hs: &[Var], w: Var, v: Var) -> Result<(Var, Var)> {
    contract!(!hs.is_empty(), "attention needs T >= 1");
    let mut scores = Vec::with_capacity(hs.len());
    for &h in hs {
        let proj = tape.matmul(h, w)?;
        let act = tape.tanh(proj)?;
        scores.push(tape.matmul(act, v)?);
    }
    let s = tape.concat(&scores, 1)?;
    let alpha = tape.softmax(s)?;
    let mut context = None;
    for (t, &h) in hs.iter().enumerate() {
        let a_t = tape.slice(alpha, 1, t, 1)?;
        let term = tape.mul(a_t, h)?;
        context = Some(match context {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    Ok((context.expect("T >= 1"), alpha))
}

/// 2-D cross-correlation layer. Parameters: `k [OC×C×kh×kw]`, `b [1×OC]`.
#[derive(Clone, Copy, Debug)]
pub struct Conv2d {
    pub k: Var,
    pub b: Var,
}

impl Conv2d {
    pub fn init(
        ps: &mut ParamSet,
        prefix: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        rng: &mut impl Rng,
    ) -> Result<()> {
        let (kh, kw) = kernel;
        ps.add_glorot(
            &format!("{prefix}.k"),
            &[out_ch, in_ch, kh, kw],
            in_ch * kh * kw,
            out_ch * kh * kw,
            rng,
        )?;
        ps.add_zeros(&format!("{prefix}.b"), &[1, out_ch])
    }

    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        Ok(Conv2d {
            k: bound.get(&format!("{prefix}.k"))?,
            b: bound.get(&format!("{prefix}.b"))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, stride: usize, padding: usize) -> Result<Var> {
        conv2d_forward(tape, x, self.k, Some(self.b), stride, padding)
    }
}

/// Valid cross-correlation of `x: [B×C×H×W]` with `k: [OC×C×kh×kw]` after
/// zero padding of `padding` on each spatial side. Output `[B×OC×OH×OW]`.
pub fn conv2d_forward(
    tape: &mut Tape,
    x: Var,
    k: Var,
    bias: Option<Var>,
    stride: usize,
    padding: usize,
) -> Result<Var> {
    contract!(stride >= 1, "conv stride must be >= 1");
    let xd = tape.value(x).dims().to_vec();
    let kd = tape.value(k).dims().to_vec();
    contract!(xd.len() == 4, "conv input must be rank 4, got {xd:?}");
    contract!(kd.len() == 4, "conv kernel must be rank 4, got {kd:?}");
    let (b, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
    let (oc, kc, kh, kw) = (kd[0], kd[1], kd[2], kd[3]);
    contract!(kc == c, "kernel expects {kc} channels, input has {c}");
    contract!(
        h + 2 * padding >= kh && w + 2 * padding >= kw,
        "kernel {kh}x{kw} larger than padded input {}x{}",
        h + 2 * padding,
        w + 2 * padding
    );
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let patch = c * kh * kw;
    let mut index = Vec::with_capacity(b * oh * ow * patch);
    for bi in 0..b {
        for y in 0..oh {
            for xo in 0..ow {
                for ci in 0..c {
                    for i in 0..kh {
                        for j in 0..kw {
                            let yy = (y * stride + i) as isize - padding as isize;
                            let xx = (xo * stride + j) as isize - padding as isize;
                            index.push(
                                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                                    None
                                } else {
                                    Some(((bi * c + ci) * h + yy as usize) * w + xx as usize)
                                },
                            );
                        }
                    }
                }
            }
        }
    }
    let cols = tape.gather(x, index, &[b * oh * ow, patch])?;
    let kmat = tape.reshape(k, &[oc, patch])?;
    let kt = tape.transpose(kmat)?;
    let mut out = tape.matmul(cols, kt)?;
    if let Some(bias) = bias {
        out = tape.add(out, bias)?;
    }
    let mut perm = Vec::with_capacity(b * oc * oh * ow);
    for bi in 0..b {
        for o in 0..oc {
            for y in 0..oh {
                for xo in 0..ow {
                    perm.push(Some(((bi * oh + y) * ow + xo) * oc + o));
                }
            }
        }
    }
    tape.gather(out, perm, &[b, oc, oh, ow])
}

/// Max-pooling by `pool` along the third axis (time) of `[B×C×H×W]`.
/// A trailing partial window is dropped unless it is the only one.
pub fn max_pool_rows(tape: &mut Tape, x: Var, pool: usize) -> Result<Var> {
    contract!(pool >= 1, "pool size must be >= 1");
    let d = tape.value(x).dims().to_vec();
    contract!(d.len() == 4, "max_pool_rows needs rank 4, got {d:?}");
    let (b, c, h, w) = (d[0], d[1], d[2], d[3]);
    let oh = (h / pool).max(1);
    let mut groups = Vec::with_capacity(b * c * oh * w);
    for bi in 0..b {
        for ci in 0..c {
            for y in 0..oh {
                for xx in 0..w {
                    let g = (y * pool..((y + 1) * pool).min(h))
                        .map(|yy| ((bi * c + ci) * h + yy) * w + xx)
                        .collect();
                    groups.push(g);
                }
            }
        }
    }
    tape.group_max(x, &groups, &[b, c, oh, w])
}

/// Mean over the batch of `−log softmax(logits)[label]`.
pub fn sparse_ce_loss(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let (b, k) = tape.value(logits).matrix_dims()?;
    contract!(
        labels.len() == b,
        "{} labels for a batch of {b}",
        labels.len()
    );
    contract!(
        labels.iter().all(|&l| l < k),
        "label out of range [0, {k})"
    );
    let ls = tape.log_softmax(logits)?;
    let picked = tape.gather(
        ls,
        labels.iter().enumerate().map(|(i, &l)| Some(i * k + l)).collect(),
        &[b],
    )?;
    let m = tape.mean(picked)?;
    tape.scale(m, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::array::Array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arr(dims: &[usize], v: &[f64]) -> Array {
        Array::from_vec(dims, v.to_vec()).unwrap()
    }

    #[test]
    fn dense_identity_and_affine() {
        let mut t = Tape::new();
        let x = t.constant(arr(&[1, 2], &[1.0, 1.0]));
        let w = t.constant(arr(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b0 = t.constant(arr(&[1, 2], &[0.0, 0.0]));
        let b1 = t.constant(arr(&[2], &[1.0, 1.0]));
        let y0 = dense_forward(&mut t, x, w, b0, Activation::None).unwrap();
        assert_eq!(t.value(y0).data(), &[1.0, 1.0]);
        let y1 = dense_forward(&mut t, x, w, b1, Activation::None).unwrap();
        assert_eq!(t.value(y1).data(), &[2.0, 2.0]);
    }

    #[test]
    fn dense_shape_mismatch() {
        let mut t = Tape::new();
        let x = t.constant(Array::zeros(&[1, 3]).unwrap());
        let w = t.constant(Array::zeros(&[2, 2]).unwrap());
        let b = t.constant(Array::zeros(&[1, 2]).unwrap());
        assert!(dense_forward(&mut t, x, w, b, Activation::Tanh).is_err());
    }

    #[test]
    fn zero_gru_stays_at_zero() {
        let mut ps = ParamSet::new(0);
        for (n, d) in [("g.wx", [2, 9]), ("g.uzr", [3, 6]), ("g.uh", [3, 3]), ("g.b", [1, 9])] {
            ps.add_zeros(n, &d).unwrap();
        }
        let mut t = Tape::new();
        let bound = ps.bind(&mut t);
        let cell = GruCell::bind(&bound, "g").unwrap();
        let x = t.constant(Array::zeros(&[4, 2]).unwrap());
        let h0 = t.constant(Array::zeros(&[4, 3]).unwrap());
        let h = gru_cell_forward(&mut t, x, h0, &cell).unwrap();
        assert!(t.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_recurrence_gives_identical_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new(3);
        GruCell::init(&mut ps, "g", 2, 4, &mut rng).unwrap();
        ps.value_mut("g.uzr").unwrap().data_mut().fill(0.0);
        ps.value_mut("g.uh").unwrap().data_mut().fill(0.0);
        // with U = 0, h_t = (1 - z) h + z h~ depends on h through (1 - z)h, so
        // also pin z = 1 via a large bias on the update gate
        for v in &mut ps.value_mut("g.b").unwrap().data_mut()[..4] {
            *v = 50.0;
        }
        let mut t = Tape::new();
        let bound = ps.bind(&mut t);
        let cell = GruCell::bind(&bound, "g").unwrap();
        let xs: Vec<Var> = (0..5).map(|_| t.constant(arr(&[1, 2], &[0.3, -0.7]))).collect();
        let hs = sequence_forward(&mut t, &cell, &xs).unwrap();
        for h in &hs[1..] {
            assert_eq!(t.value(*h), t.value(hs[0]));
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new(3);
        GruCell::init(&mut ps, "g", 2, 4, &mut rng).unwrap();
        let mut t = Tape::new();
        let cell = GruCell::bind(&ps.bind(&mut t), "g").unwrap();
        assert!(sequence_forward(&mut t, &cell, &[]).is_err());
    }

    #[test]
    fn attention_singleton_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new(5);
        Attention::init(&mut ps, "a", 3, 4, &mut rng).unwrap();
        let mut t = Tape::new();
        let att = Attention::bind(&ps.bind(&mut t), "a").unwrap();
        let h = t.constant(arr(&[2, 3], &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]));
        let (ctx, alpha) = att.forward(&mut t, &[h]).unwrap();
        assert_eq!(t.value(alpha).data(), &[1.0, 1.0]);
        assert_eq!(t.value(ctx), t.value(h));

        let (ctx, alpha) = att.forward(&mut t, &[h, h, h, h]).unwrap();
        for (a, b) in t.value(ctx).data().iter().zip(t.value(h).data()) {
            assert!((a - b).abs() < 1e-15);
        }
        for r in 0..2 {
            let s: f64 = t.value(alpha).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_identity_and_sum_kernels() {
        let mut t = Tape::new();
        let data: Vec<f64> = (0..2 * 3 * 4).map(|v| v as f64).collect();
        let x = t.constant(arr(&[1, 2, 3, 4], &data));
        // 1x1 kernel mapping channel c -> channel c
        let k = t.constant(arr(&[2, 2, 1, 1], &[1.0, 0.0, 0.0, 1.0]));
        let y = conv2d_forward(&mut t, x, k, None, 1, 0).unwrap();
        assert_eq!(t.value(y), t.value(x));

        let ones = t.constant(Array::full(&[1, 1, 3, 3], 1.0).unwrap());
        let k = t.constant(Array::full(&[1, 1, 3, 3], 1.0).unwrap());
        let y = conv2d_forward(&mut t, ones, k, None, 1, 0).unwrap();
        assert_eq!(t.value(y).dims(), &[1, 1, 1, 1]);
        assert_eq!(t.value(y).data(), &[9.0]);
    }

    #[test]
    fn conv_kernel_too_large() {
        let mut t = Tape::new();
        let x = t.constant(Array::zeros(&[1, 1, 2, 2]).unwrap());
        let k = t.constant(Array::zeros(&[1, 1, 3, 3]).unwrap());
        assert!(conv2d_forward(&mut t, x, k, None, 1, 0).is_err());
        assert!(conv2d_forward(&mut t, x, k, None, 1, 1).is_ok());
    }

    #[test]
    fn max_pool_halves_time() {
        let mut t = Tape::new();
        let x = t.constant(arr(&[1, 1, 5, 2], &[1.0, 9.0, 3.0, 2.0, 0.0, 0.0, 4.0, -1.0, 7.0, 7.0]));
        let y = max_pool_rows(&mut t, x, 2).unwrap();
        assert_eq!(t.value(y).dims(), &[1, 1, 2, 2]);
        assert_eq!(t.value(y).data(), &[3.0, 9.0, 4.0, 0.0]);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let mut t = Tape::new();
        let uniform = t.constant(Array::zeros(&[3, 14]).unwrap());
        let l = sparse_ce_loss(&mut t, uniform, &[0, 5, 13]).unwrap();
        assert!((t.value(l).data()[0] - 14f64.ln()).abs() < 1e-12);

        let mut logits = vec![0.0; 4];
        logits[2] = 1000.0;
        let sat = t.constant(arr(&[1, 4], &logits));
        let l = sparse_ce_loss(&mut t, sat, &[2]).unwrap();
        assert!(t.value(l).data()[0].abs() < 1e-12);
        let l = sparse_ce_loss(&mut t, sat, &[1]).unwrap();
        assert!((t.value(l).data()[0] - 1000.0).abs() < 1e-9);

        assert!(sparse_ce_loss(&mut t, sat, &[4]).is_err());
    }
}
