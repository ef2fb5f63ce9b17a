//! Central finite-difference gradient checking.
//!
//! The numeric side only evaluates forward values, so it shares nothing
//! with [`Tape::backward`] beyond the forward primitives.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::array::Array;
use super::nn::{
    conv2d_forward, max_pool_rows, sequence_forward, sparse_ce_loss, Activation, Attention,
    Conv2d, Dense, GruCell, LstmCell,
};
use super::params::{Bound, ParamSet};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Analytic gradients of the scalar produced by `build`.
pub fn analytic_gradients<F>(params: &ParamSet, build: &F) -> Result<BTreeMap<String, Array>>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = build(&mut tape, &bound)?;
    tape.backward(loss)?;
    let mut out = BTreeMap::new();
    for (name, p) in params.iter() {
        let v = bound.get(name)?;
        let g = tape
            .grad(v)
            .cloned()
            .unwrap_or_else(|| Array::zeros(p.value.dims()).expect("valid dims"));
        out.insert(name.clone(), g);
    }
    Ok(out)
}

/// Central differences `(f(θ+h) − f(θ−h)) / 2h` for every scalar parameter.
pub fn numeric_gradients<F>(params: &ParamSet, h: f64, build: &F) -> Result<BTreeMap<String, Array>>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let bound = ps.bind_frozen(&mut tape);
        let loss = build(&mut tape, &bound)?;
        tape.value(loss).item()
    };
    let mut work = params.clone();
    let mut out = BTreeMap::new();
    let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    for name in names {
        let n = params.value(&name)?.len();
        let mut g = Array::zeros(params.value(&name)?.dims())?;
        for k in 0..n {
            let orig = work.value(&name)?.data()[k];
            work.value_mut(&name)?.data_mut()[k] = orig + h;
            let up = eval(&work)?;
            work.value_mut(&name)?.data_mut()[k] = orig - h;
            let down = eval(&work)?;
            work.value_mut(&name)?.data_mut()[k] = orig;
            g.data_mut()[k] = (up - down) / (2.0 * h);
        }
        out.insert(name, g);
    }
    Ok(out)
}

/// Largest `|a − n| / max(|a|, |n|, 1e-6)` over all parameters.
pub fn max_relative_error<F>(params: &ParamSet, h: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var>,
{
    let a = analytic_gradients(params, &build)?;
    let n = numeric_gradients(params, h, &build)?;
    let mut worst = 0.0f64;
    for (name, ga) in &a {
        for (x, y) in ga.data().iter().zip(n[name].data()) {
            let denom = x.abs().max(y.abs()).max(1e-6);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    Ok(worst)
}

fn random_array(rng: &mut ChaCha8Rng, dims: &[usize], scale: f64) -> Array {
    let mut a = Array::zeros(dims).expect("valid dims");
    for v in a.data_mut() {
        *v = rng.random_range(-scale..scale);
    }
    a
}

/// Fixed random projection to a scalar so every output element matters.
fn project(tape: &mut Tape, y: Var, rng: &mut ChaCha8Rng) -> Result<Var> {
    let dims = tape.value(y).dims().to_vec();
    let w = tape.constant(random_array(rng, &dims, 1.0));
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

/// Layers covered by [`layer_gradient_check`].
pub const CHECKED_LAYERS: &[&str] = &[
    "dense", "gru", "lstm", "attention", "conv", "sparse_ce", "bce", "l1", "mlp3",
];

/// Runs `trials` randomized finite-difference checks of `layer` and
/// returns the worst relative error seen.
pub fn layer_gradient_check(layer: &str, trials: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9));
        let b = rng.random_range(1..4);
        let mut ps = ParamSet::new(trial as u64);
        let proj_seed: u64 = rng.random();
        let err = match layer {
            "dense" => {
                let (n, m) = (rng.random_range(1..5), rng.random_range(1..5));
                Dense::init(&mut ps, "d", n, m, &mut rng)?;
                perturb_biases(&mut ps, &mut rng);
                let x = random_array(&mut rng, &[b, n], 1.0);
                let act = [Activation::None, Activation::Tanh, Activation::Sigmoid][trial % 3];
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
                    let xv = t.param(x.clone());
                    let y = Dense::bind(bd, "d")?.forward(t, xv, act)?;
                    project(t, y, &mut r)
                })?
            }
            "gru" | "lstm" => {
                let (d, h, steps) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4));
                if layer == "gru" {
                    GruCell::init(&mut ps, "c", d, h, &mut rng)?;
                } else {
                    LstmCell::init(&mut ps, "c", d, h, &mut rng)?;
                }
                perturb_biases(&mut ps, &mut rng);
                let xs: Vec<Array> = (0..steps).map(|_| random_array(&mut rng, &[b, d], 1.0)).collect();
                let is_gru = layer == "gru";
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
                    let xv: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
                    let hs = if is_gru {
                        sequence_forward(t, &GruCell::bind(bd, "c")?, &xv)?
                    } else {
                        sequence_forward(t, &LstmCell::bind(bd, "c")?, &xv)?
                    };
                    let all = t.concat(&hs, 1)?;
                    project(t, all, &mut r)
                })?
            }
            "attention" => {
                let (h, a, steps) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
                Attention::init(&mut ps, "a", h, a, &mut rng)?;
                let hs: Vec<Array> = (0..steps).map(|_| random_array(&mut rng, &[b, h], 1.0)).collect();
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
                    let hv: Vec<Var> = hs.iter().map(|x| t.constant(x.clone())).collect();
                    let (ctx, _) = Attention::bind(bd, "a")?.forward(t, &hv)?;
                    project(t, ctx, &mut r)
                })?
            }
            "conv" => {
                let (c, oc) = (rng.random_range(1..3), rng.random_range(1..3));
                let (hh, ww) = (rng.random_range(3..7), rng.random_range(2..5));
                let pad = rng.random_range(0..2);
                Conv2d::init(&mut ps, "k", c, oc, (2, 2), &mut rng)?;
                perturb_biases(&mut ps, &mut rng);
                let x = random_array(&mut rng, &[b, c, hh, ww], 1.0);
                let stride = 1 + trial % 2;
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
                    let xv = t.param(x.clone());
                    let conv = Conv2d::bind(bd, "k")?;
                    let y = conv2d_forward(t, xv, conv.k, Some(conv.b), stride, pad)?;
                    let y = t.tanh(y)?;
                    let y = max_pool_rows(t, y, 2)?;
                    project(t, y, &mut r)
                })?
            }
            "sparse_ce" => {
                let k = rng.random_range(2..6);
                ps.insert("logits", random_array(&mut rng, &[b, k], 3.0))?;
                let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
                max_relative_error(&ps, 1e-5, |t, bd| {
                    sparse_ce_loss(t, bd.get("logits")?, &labels)
                })?
            }
            "bce" => {
                ps.insert("logits", random_array(&mut rng, &[b, 1], 4.0))?;
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let l = bd.get("logits")?;
                    let pos = t.log_sigmoid(l)?;
                    let neg_l = t.scale(l, -1.0)?;
                    let neg = t.log_sigmoid(neg_l)?;
                    let s = t.add(pos, neg)?;
                    let m = t.mean(s)?;
                    t.scale(m, -1.0)
                })?
            }
            "l1" => {
                let n = rng.random_range(1..6);
                ps.insert("a", random_array(&mut rng, &[b, n], 1.0))?;
                ps.insert("b", random_array(&mut rng, &[b, n], 1.0))?;
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let d = t.sub(bd.get("a")?, bd.get("b")?)?;
                    let a = t.abs(d)?;
                    t.mean(a)
                })?
            }
            "mlp3" => {
                let dims: Vec<usize> = (0..4).map(|_| rng.random_range(1..6)).collect();
                for l in 0..3 {
                    Dense::init(&mut ps, &format!("l{l}"), dims[l], dims[l + 1], &mut rng)?;
                }
                perturb_biases(&mut ps, &mut rng);
                let x = random_array(&mut rng, &[b, dims[0]], 1.0);
                max_relative_error(&ps, 1e-5, |t, bd| {
                    let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
                    let mut y = t.constant(x.clone());
                    y = Dense::bind(bd, "l0")?.forward(t, y, Activation::Tanh)?;
                    y = Dense::bind(bd, "l1")?.forward(t, y, Activation::Sigmoid)?;
                    y = Dense::bind(bd, "l2")?.forward(t, y, Activation::None)?;
                    let e = t.exp(y)?;
                    let p = project(t, e, &mut r)?;
                    let p2 = t.mul(p, p)?;
                    let one = t.constant(Array::scalar(1.0));
                    let q = t.add(p2, one)?;
                    t.log(q)
                })?
            }
            other => {
                return Err(crate::Error::Contract(format!("unknown layer {other:?}")));
            }
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

fn perturb_biases(ps: &mut ParamSet, rng: &mut ChaCha8Rng) {
    let names: Vec<String> = ps
        .iter()
        .filter(|(n, _)| n.ends_with(".b"))
        .map(|(n, _)| n.clone())
        .collect();
    for n in names {
        for v in ps.value_mut(&n).expect("listed").data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradients_agree() {
        let mut ps = ParamSet::new(0);
        ps.insert("x", Array::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap())
            .unwrap();
        let err = max_relative_error(&ps, 1e-5, |t, b| {
            let x = b.get("x")?;
            let sq = t.mul(x, x)?;
            t.sum(sq)
        })
        .unwrap();
        assert!(err < 1e-8);
    }

    #[test]
    fn unknown_layer_is_an_error() {
        assert!(layer_gradient_check("nope", 1, 0).is_err());
    }
}
