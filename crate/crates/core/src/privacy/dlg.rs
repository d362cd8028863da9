use serde::{Deserialize, Serialize};

use super::psnr;
use crate::numcore::{softmax, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlgResult {
    pub input: Vec<f64>,
    pub label: usize,
    /// `+∞` for an exact reconstruction.
    pub psnr_db: f64,
}

/// Single-sample cross-entropy gradient of a linear-softmax head
/// `z = xᵀW + b`, with `w` stored input-major (`d × C`). Returns
/// `grad_W` class-major (`C × d`) and `grad_b`.
pub fn head_gradient(x: &[f64], label: usize, w: &[f64], b: &[f64]) -> Result<(Matrix, Vec<f64>)> {
    let c = b.len();
    let d = x.len();
    if w.len() != d * c || label >= c {
        return Err(Error::Shape(format!(
            "head of {} weights does not fit input {d} and {c} classes (label {label})",
            w.len()
        )));
    }
    let xm = Matrix::from_vec(1, d, x.to_vec())?;
    let mut z = xm.matmul_slice(w, c)?;
    z.add_row_vector(b)?;
    let mut gb = softmax(&z).into_vec();
    gb[label] -= 1.0;
    let mut gw = Matrix::zeros(c, d);
    for (k, &g) in gb.iter().enumerate() {
        for (dst, &xi) in gw.row_mut(k).iter_mut().zip(x) {
            *dst = g * xi;
        }
    }
    Ok((gw, gb))
}

/// Closed-form inversion of a single-sample head gradient.
///
/// The label is the most negative entry of `grad_b` (lowest index on ties);
/// the input is row `k` of `grad_W` divided by `grad_b[k]` for the `k` of
/// largest magnitude.
pub fn dlg_invert(grad_w: &Matrix, grad_b: &[f64]) -> Result<(Vec<f64>, usize)> {
    if grad_w.rows() != grad_b.len() || grad_b.is_empty() {
        return Err(Error::Shape(format!(
            "grad_W has {} rows for {} bias entries",
            grad_w.rows(),
            grad_b.len()
        )));
    }
    let mut label = 0;
    let mut k = 0;
    for c in 1..grad_b.len() {
        if grad_b[c] < grad_b[label] {
            label = c;
        }
        if grad_b[c].abs() > grad_b[k].abs() {
            k = c;
        }
    }
    if grad_b[k] == 0.0 {
        return Err(Error::Degenerate("bias gradient is zero; the sample cannot be recovered".into()));
    }
    let x = grad_w.row(k).iter().map(|v| v / grad_b[k]).collect();
    Ok((x, label))
}

/// Inverts the gradient and scores the reconstruction against `truth`.
pub fn dlg_attack(grad_w: &Matrix, grad_b: &[f64], truth: &[f64], max_value: f64) -> Result<DlgResult> {
    let (input, label) = dlg_invert(grad_w, grad_b)?;
    let psnr_db = psnr(&input, truth, max_value)?;
    Ok(DlgResult { input, label, psnr_db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn instance(seed: u64, d: usize, c: usize) -> (Vec<f64>, usize, Vec<f64>, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let x = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let w = (0..d * c).map(|_| r.random_range(-1.0..1.0)).collect();
        let b = (0..c).map(|_| r.random_range(-1.0..1.0)).collect();
        (x, r.random_range(0..c), w, b)
    }

    #[test]
    fn round_trip() {
        for s in 0..50 {
            let (x, y, w, b) = instance(s, 7, 4);
            let (gw, gb) = head_gradient(&x, y, &w, &b).unwrap();
            let (xh, yh) = dlg_invert(&gw, &gb).unwrap();
            assert_eq!(yh, y);
            let err = xh.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn scale_invariant() {
        let (x, y, w, b) = instance(9, 5, 3);
        let (gw, gb) = head_gradient(&x, y, &w, &b).unwrap();
        let (x1, _) = dlg_invert(&gw, &gb).unwrap();
        let s = 3.7;
        let gw2 = Matrix::from_vec(gw.rows(), gw.cols(), gw.as_slice().iter().map(|v| v * s).collect()).unwrap();
        let gb2: Vec<f64> = gb.iter().map(|v| v * s).collect();
        let (x2, _) = dlg_invert(&gw2, &gb2).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_bias_gradient_is_degenerate() {
        let gw = Matrix::zeros(2, 3);
        assert!(matches!(dlg_invert(&gw, &[0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn attack_scores_exact_match_as_infinite() {
        let (x, y, w, b) = instance(2, 4, 3);
        let (gw, gb) = head_gradient(&x, y, &w, &b).unwrap();
        let r = dlg_attack(&gw, &gb, &x, 1.0).unwrap();
        assert!(r.psnr_db > 150.0);
    }
}
