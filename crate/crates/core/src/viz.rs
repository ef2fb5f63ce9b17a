//! PCA followed by exact t-SNE, producing 2-D points for cluster plots.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::numcore::Array;

/// Principal-component projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `[N×keep]`
    pub projected: Array,
    /// Share of total variance per kept component, descending.
    pub explained: Vec<f64>,
    /// `[d×keep]` unit loadings.
    pub components: Array,
    pub mean: Vec<f64>,
}

fn to_matrix(x: &Array) -> Result<DMatrix<f64>> {
    let (n, d) = x.matrix_dims()?;
    Ok(DMatrix::from_row_slice(n, d, x.data()))
}

fn from_matrix(m: &DMatrix<f64>) -> Result<Array> {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        data.extend(m.row(i).iter());
    }
    Array::from_vec(&[m.nrows(), m.ncols()], data)
}

/// Projects centered rows of `x: [N×d]` onto the top `keep` covariance
/// eigenvectors. Each loading vector's largest-magnitude entry is positive.
/// Components beyond the data's rank carry a zero ratio.
pub fn pca(x: &Array, keep: usize) -> Result<Pca> {
    let (n, d) = x.matrix_dims()?;
    contract!(n >= 2, "PCA needs N >= 2, got {n}");
    contract!(keep >= 1 && keep <= d, "PCA keep must lie in [1, {d}], got {keep}");
    contract!(x.is_finite(), "PCA input is not finite");
    let mut m = to_matrix(x)?;
    let mean: Vec<f64> = (0..d).map(|j| m.column(j).sum() / n as f64).collect();
    for j in 0..d {
        m.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = (m.transpose() * &m) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut comps = DMatrix::zeros(d, keep);
    let mut explained = Vec::with_capacity(keep);
    for (k, &i) in order.iter().take(keep).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.neg_mut();
        }
        comps.set_column(k, &v);
        explained.push(if total > 0.0 { eig.eigenvalues[i].max(0.0) / total } else { 0.0 });
    }
    Ok(Pca {
        projected: from_matrix(&(m * &comps))?,
        explained,
        components: from_matrix(&comps)?,
        mean,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    /// Iterations run with exaggerated affinities.
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tsne {
    /// `[N×2]`
    pub points: Array,
    /// KL(P‖Q) of the embedding entering each iteration, then the final one.
    pub kl_trace: Vec<f64>,
}

impl Tsne {
    pub fn final_kl(&self) -> f64 {
        *self.kl_trace.last().expect("trace is never empty")
    }
}

/// Squared Euclidean distances, row-parallel.
pub fn squared_distances(x: &Array) -> Result<Vec<f64>> {
    let (n, _) = x.matrix_dims()?;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let a = x.row(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = a.iter().zip(x.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
        }
    });
    Ok(out)
}

/// Conditional distribution of row `i` at precision `beta`, and its entropy (nats).
fn row_distribution(d: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let dmin = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(j, &v)| if j == i { 0.0 } else { (-beta * (v - dmin)).exp() })
        .collect();
    let z: f64 = p.iter().sum();
    let mut h = 0.0;
    for v in &mut p {
        *v /= z;
        if *v > 0.0 {
            h -= *v * v.ln();
        }
    }
    (p, h)
}

/// Row-conditional affinities whose entropies equal `ln(perplexity)`,
/// found by bisection on the Gaussian precision. Returns `[N×N]` rows and
/// the achieved entropies.
pub fn conditional_affinities(dist2: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = &dist2[i * n..(i + 1) * n];
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut beta = 1.0;
            let mut best = row_distribution(d, i, beta);
            for _ in 0..500 {
                let diff = best.1 - target;
                if diff.abs() < 1e-12 {
                    break;
                }
                // entropy falls as beta grows
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = 0.5 * (beta + lo);
                }
                best = row_distribution(d, i, beta);
            }
            best
        })
        .collect();
    let mut p = Vec::with_capacity(n * n);
    let mut h = Vec::with_capacity(n);
    for (row, e) in rows {
        p.extend(row);
        h.push(e);
    }
    (p, h)
}

/// Symmetrized joint affinities `(p_{j|i} + p_{i|j}) / 2N`.
pub fn joint_affinities(x: &Array, perplexity: f64) -> Result<Vec<f64>> {
    let (n, _) = x.matrix_dims()?;
    let d = squared_distances(x)?;
    let (c, _) = conditional_affinities(&d, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (c[i * n + j] + c[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(p)
}

/// Student-t affinities of a 2-D embedding: `(q, unnormalized kernel)`.
pub fn embedding_affinities(y: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, r) in row.iter_mut().enumerate() {
            if j != i {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                *r = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    let z: f64 = num.iter().sum();
    (num.iter().map(|v| v / z).collect(), num)
}

/// `Σ p log(p / q)` over entries with `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b.max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Step retries per iteration once exaggeration has ended.
const MAX_RETRIES: usize = 30;

/// Exact t-SNE with momentum, per-coordinate gains and early exaggeration.
/// Once exaggeration ends the KL divergence never increases.
pub fn tsne(x: &Array, params: &TsneParams) -> Result<Tsne> {
    let (n, _) = x.matrix_dims()?;
    contract!(params.perplexity >= 1.0, "perplexity must be >= 1");
    contract!(
        n as f64 >= 3.0 * params.perplexity,
        "perplexity {} is too large for N = {n} (needs N >= 3·perplexity)",
        params.perplexity
    );
    contract!(params.iterations >= 1, "t-SNE needs at least one iteration");
    contract!(x.is_finite(), "t-SNE input is not finite");
    let p = joint_affinities(x, params.perplexity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Normal::new(0.0, 1e-2).expect("valid std");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = Vec::with_capacity(params.iterations + 1);
    let (mut q, mut num) = embedding_affinities(&y);
    let mut kl = kl_divergence(&p, &q);
    for it in 0..params.iterations {
        let exaggerating = it < params.exaggeration_iters;
        let ex = if exaggerating { params.exaggeration } else { 1.0 };
        let momentum = if exaggerating { 0.5 } else { 0.8 };
        trace.push(kl);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    let k = i * n + j;
                    let m = (ex * p[k] - q[k]) * num[k];
                    g[0] += m * (y[i][0] - y[j][0]);
                    g[1] += m * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        // after exaggeration a step that raises KL is retried from rest at
        // half the rate; if none helps the embedding stays put
        let mut rate = params.learning_rate;
        for _ in 0..MAX_RETRIES {
            let mut nu = update.clone();
            let mut ng = gains.clone();
            let mut ny = y.clone();
            for i in 0..n {
                for c in 0..2 {
                    let same = (grad[i][c] > 0.0) == (nu[i][c] > 0.0);
                    ng[i][c] = if same { (ng[i][c] * 0.8).max(0.01) } else { ng[i][c] + 0.2 };
                    nu[i][c] = momentum * nu[i][c] - rate * ng[i][c] * grad[i][c];
                    ny[i][c] += nu[i][c];
                }
            }
            let cx = ny.iter().map(|v| v[0]).sum::<f64>() / n as f64;
            let cy = ny.iter().map(|v| v[1]).sum::<f64>() / n as f64;
            for v in &mut ny {
                v[0] -= cx;
                v[1] -= cy;
            }
            let (nq, nnum) = embedding_affinities(&ny);
            let nkl = kl_divergence(&p, &nq);
            if exaggerating || nkl <= kl {
                (y, update, gains, q, num, kl) = (ny, nu, ng, nq, nnum, nkl);
                break;
            }
            update = vec![[0.0; 2]; n];
            gains = vec![[1.0; 2]; n];
            rate *= 0.5;
        }
    }
    trace.push(kl);
    let points = Array::from_vec(&[n, 2], y.iter().flat_map(|v| [v[0], v[1]]).collect())?;
    contract!(points.is_finite(), "t-SNE embedding diverged");
    Ok(Tsne { points, kl_trace: trace })
}

/// 2-D embedding plus a record of how it was made.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding2D {
    /// `[N×2]`
    pub points: Array,
    pub labels: Vec<usize>,
    pub pca_keep: usize,
    /// Total variance share of the kept components.
    pub pca_explained: f64,
    pub perplexity: f64,
    pub iterations: usize,
    pub final_kl: f64,
}

impl Embedding2D {
    /// `x,y,label` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,label\n");
        for (i, l) in self.labels.iter().enumerate() {
            let r = self.points.row(i);
            s.push_str(&format!("{},{},{l}\n", r[0], r[1]));
        }
        s
    }
}

/// PCA to `min(pca_keep, d)` components, then t-SNE.
pub fn embed_latents(latents: &Array, labels: &[usize], pca_keep: usize, params: &TsneParams) -> Result<Embedding2D> {
    let (n, d) = latents.matrix_dims()?;
    contract!(labels.len() == n, "{} labels for {n} points", labels.len());
    let keep = pca_keep.min(d);
    let p = pca(latents, keep)?;
    let t = tsne(&p.projected, params)?;
    Ok(Embedding2D {
        final_kl: t.final_kl(),
        points: t.points,
        labels: labels.to_vec(),
        pca_keep: keep,
        pca_explained: p.explained.iter().sum(),
        perplexity: params.perplexity,
        iterations: params.iterations,
    })
}

/// Share of points whose nearest other point has the same label.
pub fn neighbor_purity(points: &Array, labels: &[usize]) -> Result<f64> {
    let (n, _) = points.matrix_dims()?;
    contract!(n >= 2 && labels.len() == n, "purity needs N >= 2 labelled points");
    let d = squared_distances(points)?;
    let hits = (0..n)
        .filter(|&i| {
            let j = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| d[i * n + a].total_cmp(&d[i * n + b]))
                .expect("N >= 2");
            labels[j] == labels[i]
        })
        .count();
    Ok(hits as f64 / n as f64)
}
