//! Savitzky–Golay smoothing.
//!
//! Every output frame is the value at its own position of the least-squares
//! polynomial fitted to the frames inside the window. Near the edges the
//! window is truncated to the frames that exist, and the order drops to
//! `n − 1` when fewer than `order + 1` frames remain.

use nalgebra::{DMatrix, DVector};

use super::SkeletonSequence;
use crate::error::{contract, Error, Result};
use crate::numcore::Array;

/// Weights `c` such that `Σ c_j y(x_j)` is the order-`order` least-squares
/// polynomial through `(x_j, y_j)` evaluated at 0.
pub fn savgol_weights(positions: &[f64], order: usize) -> Result<Vec<f64>> {
    let n = positions.len();
    contract!(n >= 1, "empty fitting window");
    let p = order.min(n - 1) + 1;
    let a = DMatrix::from_fn(n, p, |i, j| positions[i].powi(j as i32));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut e0 = DVector::zeros(p);
    e0[0] = 1.0;
    // c = e0ᵀ R⁻¹ Qᵀ, so c = Q u with Rᵀ u = e0.
    let u = r
        .transpose()
        .solve_lower_triangular(&e0)
        .ok_or_else(|| Error::Contract("degenerate Savitzky–Golay window".into()))?;
    Ok((q * u).iter().copied().collect())
}

/// Central weights for a symmetric window.
pub fn savgol_coefficients(window: usize, order: usize) -> Result<Vec<f64>> {
    check_params(window, order)?;
    let h = (window / 2) as f64;
    let pos: Vec<f64> = (0..window).map(|i| i as f64 - h).collect();
    savgol_weights(&pos, order)
}

fn check_params(window: usize, order: usize) -> Result<()> {
    contract!(window % 2 == 1, "window must be odd, got {window}");
    contract!(order < window, "order {order} must be below window {window}");
    Ok(())
}

/// Smooths one signal.
pub fn savgol_filter(x: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    check_params(window, order)?;
    let t = x.len();
    contract!(window < 2 * t, "window {window} must be below twice the length {t}");
    let weights = frame_weights(t, window, order)?;
    Ok(weights
        .iter()
        .map(|(lo, w)| w.iter().zip(&x[*lo..]).map(|(c, v)| c * v).sum())
        .collect())
}

/// Per output frame: first input index and its weights.
fn frame_weights(t: usize, window: usize, order: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let h = window / 2;
    let central = savgol_coefficients(window, order)?;
    (0..t)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(t - 1);
            if hi - lo + 1 == window {
                return Ok((lo, central.clone()));
            }
            let pos: Vec<f64> = (lo..=hi).map(|j| j as f64 - i as f64).collect();
            Ok((lo, savgol_weights(&pos, order)?))
        })
        .collect()
}

/// Smooths each coordinate channel of `seq` independently over time.
pub fn savgol_smooth(seq: &SkeletonSequence, window: usize, order: usize) -> Result<SkeletonSequence> {
    check_params(window, order)?;
    let (t, w) = (seq.len(), seq.width());
    contract!(window < 2 * t, "window {window} must be below twice the length {t}");
    let weights = frame_weights(t, window, order)?;
    let src = seq.frames().data();
    let mut out = vec![0.0; t * w];
    for (i, (lo, c)) in weights.iter().enumerate() {
        let row = &mut out[i * w..(i + 1) * w];
        for (k, ck) in c.iter().enumerate() {
            let x = &src[(lo + k) * w..(lo + k + 1) * w];
            for (o, v) in row.iter_mut().zip(x) {
                *o += ck * v;
            }
        }
    }
    seq.with_frames(Array::from_vec(&[t, w], out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_unchanged() {
        let x = vec![3.5; 12];
        for v in savgol_filter(&x, 7, 3).unwrap() {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn full_order_is_identity() {
        let x: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let y = savgol_filter(&x, 5, 4).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn contracts() {
        assert!(savgol_filter(&[1.0; 10], 6, 3).is_err());
        assert!(savgol_filter(&[1.0; 10], 7, 7).is_err());
        assert!(savgol_filter(&[1.0; 3], 7, 3).is_err());
        assert!(savgol_filter(&[1.0; 4], 7, 3).is_ok());
    }
}
