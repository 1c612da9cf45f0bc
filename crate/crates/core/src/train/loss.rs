use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Mean softmax cross-entropy over rows and its gradient `(softmax − onehot) / n`.
pub fn loss_ce<T: Real>(logits: &Matrix<T>, labels: &[usize]) -> Result<(T, Matrix<T>)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    if n == 0 {
        return Ok((T::zero(), logits.clone()));
    }
    let inv_n = T::one() / T::from_f64_lossy(n as f64);
    let mut grad = Matrix::zeros(n, k);
    let mut total = T::zero();
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().fold(T::neg_infinity(), |a, b| a.max(*b));
        let z = row.iter().fold(T::zero(), |a, v| a + (*v - m).exp());
        let lse = m + z.ln();
        total = total + lse - row[y];
        let g = grad.row_mut(r);
        for (c, v) in row.iter().enumerate() {
            g[c] = (*v - lse).exp() * inv_n;
        }
        g[y] = g[y] - inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}
