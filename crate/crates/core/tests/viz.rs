use imagan::numcore::Array;
use imagan::viz::{
    conditional_affinities, embed_latents, embedding_affinities, joint_affinities, pca,
    squared_distances, tsne, TsneParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, d: usize, seed: u64) -> Array {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array::from_vec(&[n, d], (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap()
}

/// Two tight clusters of `per` points, far apart in `d` dimensions.
fn two_clusters(per: usize, d: usize, seed: u64) -> (Array, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for _ in 0..per {
            for k in 0..d {
                let centre = if k == 0 { 20.0 * c as f64 } else { 0.0 };
                data.push(centre + 0.5 * rng.random_range(-1.0..1.0));
            }
            labels.push(c);
        }
    }
    (Array::from_vec(&[2 * per, d], data).unwrap(), labels)
}

/// Nearest-neighbour label purity, brute force.
fn purity(points: &Array, labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut hits = 0;
    for i in 0..n {
        let mut best = (f64::INFINITY, 0);
        for j in (0..n).filter(|&j| j != i) {
            let d: f64 = (0..points.dims()[1]).map(|k| (points.get2(i, k) - points.get2(j, k)).powi(2)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        hits += usize::from(labels[best.1] == labels[i]);
    }
    hits as f64 / n as f64
}

#[test]
fn planar_data_is_fully_explained() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 512;
    let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = 60;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        data.extend((0..d).map(|k| 5.0 + a * u[k] + b * v[k]));
    }
    let p = pca(&Array::from_vec(&[n, d], data).unwrap(), 2).unwrap();
    let total: f64 = p.explained.iter().sum();
    assert!((total - 1.0).abs() < 1e-10, "explained {total}");
    assert!(p.explained[0] >= p.explained[1]);
}

#[test]
fn full_rank_projection_is_an_isometry() {
    let x = gaussian(30, 12, 2);
    let p = pca(&x, 12).unwrap();
    let a = squared_distances(&x).unwrap();
    let b = squared_distances(&p.projected).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u.sqrt() - v.sqrt()).abs() < 1e-8);
    }
    // reconstruction from all components is exact
    let (n, d) = (30, 12);
    for i in 0..n {
        for k in 0..d {
            let r: f64 = p.mean[k] + (0..d).map(|c| p.projected.get2(i, c) * p.components.get2(k, c)).sum::<f64>();
            assert!((r - x.get2(i, k)).abs() < 1e-8);
        }
    }
    // sign convention: largest-magnitude loading positive
    for c in 0..d {
        let col: Vec<f64> = (0..d).map(|k| p.components.get2(k, c)).collect();
        let pivot = col.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(pivot > 0.0);
    }
    assert!(pca(&x, 13).is_err());
    assert!(pca(&gaussian(1, 3, 0), 1).is_err());
}

#[test]
fn isotropic_sample_has_even_spectrum() {
    let (n, d) = (20_000, 4);
    let p = pca(&gaussian(n, d, 3), d).unwrap();
    // each ratio is ≈ 1/d; eigenvalue sampling error is about √(2/n)
    let tol = 4.0 * (2.0 / n as f64).sqrt() / d as f64;
    for r in &p.explained {
        assert!((r - 0.25).abs() < tol, "ratio {r}");
    }
}

#[test]
fn rank_deficient_keep_pads_zero_ratios() {
    let x = gaussian(3, 10, 4);
    let p = pca(&x, 5).unwrap();
    assert_eq!(p.projected.dims(), &[3, 5]);
    for r in &p.explained[2..] {
        assert!(r.abs() < 1e-12);
    }
}

#[test]
fn bisection_hits_target_perplexity() {
    let x = gaussian(120, 5, 5);
    let d = squared_distances(&x).unwrap();
    for perp in [5.0, 30.0] {
        let (p, h) = conditional_affinities(&d, 120, perp);
        for (i, hi) in h.iter().enumerate() {
            assert!((hi - f64::ln(perp)).abs() < 1e-5, "row {i}: {hi}");
            let row = &p[i * 120..(i + 1) * 120];
            assert_eq!(row[i], 0.0);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // recompute the entropy from the returned row
            let e: f64 = -row.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
            assert!((e - f64::ln(perp)).abs() < 1e-5);
        }
    }
}

#[test]
fn affinity_matrices_are_distributions() {
    let x = gaussian(50, 6, 6);
    let p = joint_affinities(&x, 10.0).unwrap();
    assert!(p.iter().all(|&v| v >= 0.0));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    for i in 0..50 {
        for j in 0..50 {
            assert_eq!(p[i * 50 + j], p[j * 50 + i]);
        }
    }
    let y: Vec<[f64; 2]> = (0..50).map(|i| [x.get2(i, 0), x.get2(i, 1)]).collect();
    let (q, _) = embedding_affinities(&y);
    assert!(q.iter().all(|&v| v >= 0.0));
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn two_clusters_separate_and_kl_settles() {
    let (x, labels) = two_clusters(50, 10, 7);
    let params = TsneParams { perplexity: 30.0, ..TsneParams::default() };
    let t = tsne(&x, &params).unwrap();
    assert!(purity(&t.points, &labels) >= 0.9);
    // the two clusters are split by the line through the midpoint normal to the centroid gap
    let centroid = |c: usize| {
        let idx: Vec<usize> = (0..100).filter(|&i| labels[i] == c).collect();
        let m = |k: usize| idx.iter().map(|&i| t.points.get2(i, k)).sum::<f64>() / idx.len() as f64;
        [m(0), m(1)]
    };
    let (a, b) = (centroid(0), centroid(1));
    let dir = [b[0] - a[0], b[1] - a[1]];
    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    for i in 0..100 {
        let s = (t.points.get2(i, 0) - mid[0]) * dir[0] + (t.points.get2(i, 1) - mid[1]) * dir[1];
        assert_eq!(s > 0.0, labels[i] == 1);
    }
    let half = params.iterations / 2;
    for w in t.kl_trace[half.max(params.exaggeration_iters)..].windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "KL rose from {} to {}", w[0], w[1]);
    }
    assert_eq!(tsne(&x, &params).unwrap(), t);
}

#[test]
fn perplexity_bound_and_minimal_input() {
    let x = gaussian(10, 3, 8);
    assert!(tsne(&x, &TsneParams { perplexity: 4.0, ..TsneParams::default() }).is_err());
    let tiny = gaussian(3, 512, 9);
    let params = TsneParams { perplexity: 1.0, iterations: 50, ..TsneParams::default() };
    let e = embed_latents(&tiny, &[0, 1, 1], 50, &params).unwrap();
    assert_eq!(e.points.dims(), &[3, 2]);
    assert_eq!(e.pca_keep, 50);
    assert!(e.points.is_finite());
    assert!(e.to_csv().starts_with("x,y,label\n"));
    assert_eq!(e.to_csv().lines().count(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn embedding_row_count_matches(n in 6usize..20, d in 1usize..8, seed in any::<u64>()) {
        let x = gaussian(n, d, seed);
        let params = TsneParams { perplexity: 2.0, iterations: 30, exaggeration_iters: 10, seed, ..TsneParams::default() };
        let e = embed_latents(&x, &vec![0; n], 50, &params).unwrap();
        prop_assert_eq!(e.points.dims(), &[n, 2]);
        prop_assert_eq!(e.pca_keep, d);
        prop_assert!(e.points.is_finite());
    }
}
