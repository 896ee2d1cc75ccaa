use super::matrix::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let mut sum = 0.0f64;
        let exps: Vec<f64> = row
            .iter()
            .map(|v| {
                let e = (v.as_f64() - max).exp();
                sum += e;
                e
            })
            .collect();
        for (v, e) in row.iter_mut().zip(exps) {
            *v = T::of_f64(e / sum);
        }
    }
    out
}

/// Mean softmax cross-entropy and its gradient `(softmax - onehot) / n`.
pub fn softmax_xent<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> Result<(f64, Matrix<T>)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape(
            "softmax_xent",
            format!("{} labels for {n} rows", labels.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::LabelOutOfRange { label: bad, classes: k });
    }
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, k)));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0f64;
    let mut grad = Matrix::zeros(n, k);
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let sum: f64 = row.iter().map(|v| (v.as_f64() - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[y].as_f64();
        let g = grad.row_mut(r);
        for (c, gv) in g.iter_mut().enumerate() {
            let p = (row[c].as_f64() - lse).exp();
            let target = if c == y { 1.0 } else { 0.0 };
            *gv = T::of_f64((p - target) * inv_n);
        }
    }
    Ok((loss * inv_n, grad))
}

/// Mean squared error over all entries and its gradient `2 (pred - target) / count`.
pub fn mse<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<(f64, Matrix<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    if pred.is_empty() {
        return Ok((0.0, pred.clone()));
    }
    let count = pred.len() as f64;
    let mut loss = 0.0f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p.as_f64() - t.as_f64();
            loss += d * d;
            T::of_f64(2.0 * d / count)
        })
        .collect();
    Ok((loss / count, Matrix::new(pred.rows(), pred.cols(), data)?))
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy<T: Scalar>(logits: &Matrix<T>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = logits
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Matrix::<f32>::zeros(5, 2);
        let (loss, _) = softmax_xent(&logits, &[0, 1, 1, 0, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-7);
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let mut last = f64::INFINITY;
        for margin in [1.0f32, 5.0, 10.0, 30.0] {
            let logits = Matrix::from_rows(&[vec![margin, 0.0, 0.0]]).unwrap();
            let (loss, _) = softmax_xent(&logits, &[0]).unwrap();
            assert!(loss >= 0.0 && loss < last);
            last = loss;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Matrix::<f32>::zeros(2, 3);
        assert!(matches!(
            softmax_xent(&logits, &[0, 3]),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::<f32>::from_rows(&[vec![1000.0, 0.0, -1000.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let s = softmax(&m);
        for r in 0..2 {
            let sum: f64 = s.row(r).iter().map(|&v| v as f64).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mse_basics() {
        let a = Matrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (l, g) = mse(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let b = a.map(|v| v - 1.0);
        let (l, g) = mse(&a, &b).unwrap();
        assert_eq!(l, 1.0);
        assert!(g.data().iter().all(|&v| v == 0.5));
        assert!(mse(&a, &Matrix::zeros(1, 2)).is_err());
    }
}
