use crate::error::{Error, Result};
use crate::linalg::Matrix;

const EPS: f64 = 1e-12;

fn clamp(q: f64) -> f64 {
    q.clamp(EPS, 1.0 - EPS)
}

/// Categorical cross-entropy `(1/n) Σ_i Σ_j p_ij log2 q_ij`. The value is
/// non-positive; trainers minimize its negation.
pub fn cce_loss(truth: &Matrix, predicted: &Matrix) -> Result<f64> {
    if truth.rows() != predicted.rows() || truth.cols() != predicted.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}×{} targets vs {}×{} predictions",
            truth.rows(),
            truth.cols(),
            predicted.rows(),
            predicted.cols()
        )));
    }
    if truth.rows() == 0 {
        return Err(Error::ShapeMismatch("no rows".into()));
    }
    let mut total = 0.0;
    for i in 0..truth.rows() {
        let q = predicted.row(i);
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "row {i} of predictions sums to {s}"
            )));
        }
        total += truth
            .row(i)
            .iter()
            .zip(q)
            .map(|(p, q)| p * clamp(*q).log2())
            .sum::<f64>();
    }
    Ok(total / truth.rows() as f64)
}

/// Binary cross-entropy `(1/n) Σ [p log2 q + (1−p) log2(1−q)]`.
pub fn bce_loss(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} targets vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let s: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&p, &q)| {
            let q = clamp(q);
            p * q.log2() + (1.0 - p) * (1.0 - q).log2()
        })
        .sum();
    Ok(s / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cce_examples() {
        let t = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let q = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(cce_loss(&t, &q).unwrap(), -1.0);
        let t = Matrix::from_rows(&[vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let q = Matrix::from_rows(&[vec![0.25; 4]]).unwrap();
        assert_eq!(cce_loss(&t, &q).unwrap(), -2.0);
        assert!(cce_loss(&t, &t).unwrap().abs() < 1e-9);
        let bad = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!(matches!(cce_loss(&t, &bad), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bce_examples() {
        assert_eq!(bce_loss(&[1.0], &[0.5]).unwrap(), -1.0);
        assert_eq!(bce_loss(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), -1.0);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap().abs() < 1e-9);
        assert!(bce_loss(&[1.0], &[0.5, 0.5]).is_err());
    }
}
