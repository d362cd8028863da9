use super::Matrix;
use crate::{Error, Result};

/// Numerically stable `log softmax` of one row.
pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for z in row.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        for z in row.iter_mut() {
            *z /= sum;
        }
    }
    out
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::Shape(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    Ok(())
}

/// Mean softmax cross-entropy over the batch.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| -log_softmax_row(logits.row(r))[y])
        .sum();
    Ok(total / labels.len() as f64)
}

/// Mean cross-entropy and its gradient with respect to the logits,
/// `(softmax − one_hot) / n`.
pub fn cross_entropy_grad(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    let n = labels.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let ls = log_softmax_row(logits.row(r));
        total -= ls[y];
        let g = grad.row_mut(r);
        for (gi, l) in g.iter_mut().zip(&ls) {
            *gi = l.exp() / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((total / n, grad))
}
