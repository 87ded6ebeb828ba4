use super::Tensor;
use crate::error::{Error, Result};
use crate::mesh::Label;

/// Mean softmax cross-entropy over labeled rows, and its gradient w.r.t. the
/// logits. Unlabeled rows contribute nothing; with no labeled rows the loss
/// is 0.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[Label]) -> Result<(f64, Tensor)> {
    let (n, classes) = logits.shape();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    let mut grad = Tensor::zeros(n, classes);
    let labeled = labels.iter().filter(|l| l.is_some()).count();
    if labeled == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / labeled as f64;
    let mut loss = 0.0;
    for (r, label) in labels.iter().enumerate() {
        let Some(t) = *label else { continue };
        if t >= classes {
            return Err(Error::LabelOutOfRange {
                label: t as i64,
                count: classes,
            });
        }
        let row = logits.row(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - row[t];
        let g = grad.row_mut(r);
        for (gi, z) in g.iter_mut().zip(row) {
            *gi = (z - lse).exp() * inv;
        }
        g[t] -= inv;
    }
    let loss = loss * inv;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy".into()));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Tensor::filled(3, 7, 0.25);
        let (loss, _) = softmax_cross_entropy(&logits, &[Some(0), Some(6), Some(3)]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn stable_for_large_logits() {
        let logits = Tensor::from_vec(1, 2, vec![1000.0, 0.0]).unwrap();
        let (loss, g) = softmax_cross_entropy(&logits, &[Some(1)]).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
        assert!((g.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_rows_are_ignored() {
        let a = Tensor::from_vec(1, 3, vec![0.1, 0.7, -0.2]).unwrap();
        let b = Tensor::from_vec(2, 3, vec![0.1, 0.7, -0.2, 5.0, -3.0, 1.0]).unwrap();
        let (la, _) = softmax_cross_entropy(&a, &[Some(2)]).unwrap();
        let (lb, gb) = softmax_cross_entropy(&b, &[Some(2), None]).unwrap();
        assert_eq!(la, lb);
        assert!(gb.row(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn out_of_range_label() {
        let logits = Tensor::zeros(1, 2);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[Some(2)]),
            Err(Error::LabelOutOfRange { label: 2, count: 2 })
        ));
    }
}
