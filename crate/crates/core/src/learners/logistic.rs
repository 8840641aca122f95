use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::encode::{Design, FeatureEncoder};
use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.5,
            epochs: 300,
        }
    }
}

/// Softmax regression on one-hot expanded, z-scored features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub encoder: FeatureEncoder,
    /// `C × q` row-major, `q` = expanded feature count.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

/// Numeric features pass through, categoricals expand to one indicator per
/// category (unseen values give all zeros).
fn expand(design: &Design) -> (Vec<f64>, usize) {
    let q: usize = design.arity.iter().map(|a| a.unwrap_or(1)).sum();
    let mut out = vec![0.0; design.n * q];
    for i in 0..design.n {
        let row = design.row(i);
        let dst = &mut out[i * q..(i + 1) * q];
        let mut k = 0;
        for (x, a) in row.iter().zip(&design.arity) {
            match a {
                None => {
                    dst[k] = *x;
                    k += 1;
                }
                Some(m) => {
                    if *x >= 0.0 {
                        dst[k + *x as usize] = 1.0;
                    }
                    k += m;
                }
            }
        }
    }
    (out, q)
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

fn logits(weights: &[f64], biases: &[f64], x: &[f64], out: &mut [f64]) {
    let q = x.len();
    for (c, o) in out.iter_mut().enumerate() {
        let w = &weights[c * q..(c + 1) * q];
        *o = biases[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Negated categorical cross-entropy (base 2) plus `(l2/2)‖W‖²`, with its
/// gradient with respect to weights and biases. `x` is row-major `n × q`.
pub fn logistic_objective(
    weights: &[f64],
    biases: &[f64],
    x: &[f64],
    y: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let c = biases.len();
    let n = y.len();
    let q = if n == 0 { 0 } else { x.len() / n };
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let mut p = vec![0.0; c];
    for (i, &yi) in y.iter().enumerate() {
        let xi = &x[i * q..(i + 1) * q];
        logits(weights, biases, xi, &mut p);
        // log-sum-exp for an accurate log-probability of the true class
        let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss -= (p[yi] - lse) / LN_2;
        softmax_in_place(&mut p);
        for k in 0..c {
            let r = (p[k] - if k == yi { 1.0 } else { 0.0 }) / (n as f64 * LN_2);
            gb[k] += r;
            for (g, xv) in gw[k * q..(k + 1) * q].iter_mut().zip(xi) {
                *g += r * xv;
            }
        }
    }
    loss /= n as f64;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in gw.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, gw, gb)
}

pub fn train_logistic(train: &Table, hp: &LogisticParams) -> Result<LogisticModel> {
    let encoder = FeatureEncoder::fit(train)?;
    let y = encoder.targets(train)?;
    let (mut x, q) = expand(&encoder.design(train)?);
    let n = train.n_rows();
    let mut mean = vec![0.0; q];
    let mut scale = vec![1.0; q];
    if n > 0 {
        for j in 0..q {
            let m = (0..n).map(|i| x[i * q + j]).sum::<f64>() / n as f64;
            let v = (0..n).map(|i| (x[i * q + j] - m).powi(2)).sum::<f64>() / n as f64;
            mean[j] = m;
            if v > 0.0 {
                scale[j] = v.sqrt();
            }
        }
        standardize(&mut x, &mean, &scale);
    }
    let c = encoder.classes().len();
    let mut weights = vec![0.0; c * q];
    let mut biases = vec![0.0; c];
    for epoch in 0..hp.epochs {
        let (loss, gw, gb) = logistic_objective(&weights, &biases, &x, &y, hp.l2);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: epoch });
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= hp.learning_rate * g;
        }
        for (b, g) in biases.iter_mut().zip(&gb) {
            *b -= hp.learning_rate * g;
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { step: epoch });
        }
    }
    Ok(LogisticModel {
        encoder,
        weights,
        biases,
        l2: hp.l2,
        learning_rate: hp.learning_rate,
        epochs: hp.epochs,
        mean,
        scale,
    })
}

fn standardize(x: &mut [f64], mean: &[f64], scale: &[f64]) {
    let q = mean.len();
    if q == 0 {
        return;
    }
    for row in x.chunks_mut(q) {
        for ((v, m), s) in row.iter_mut().zip(mean).zip(scale) {
            *v = (*v - m) / s;
        }
    }
}

impl LogisticModel {
    pub fn predict_proba(&self, t: &Table) -> Result<Vec<f64>> {
        let (mut x, q) = expand(&self.encoder.design(t)?);
        standardize(&mut x, &self.mean, &self.scale);
        let c = self.biases.len();
        let mut out = vec![0.0; t.n_rows() * c];
        for i in 0..t.n_rows() {
            let o = &mut out[i * c..(i + 1) * c];
            logits(&self.weights, &self.biases, &x[i * q..(i + 1) * q], o);
            softmax_in_place(o);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnData, ColumnSchema};

    fn line_table(xs: &[f64]) -> Table {
        let labels: Vec<&str> = xs
            .iter()
            .map(|&x| if x < 0.0 { "A" } else { "B" })
            .collect();
        Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(xs.to_vec())),
            (ColumnSchema::label("y"), ColumnData::from_strings(&labels)),
        ])
        .unwrap()
    }

    #[test]
    fn separable_line_is_learned() {
        let xs: Vec<f64> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    -1.0 - i as f64 * 0.1
                } else {
                    1.0 + i as f64 * 0.1
                }
            })
            .collect();
        let t = line_table(&xs);
        let m = train_logistic(&t, &LogisticParams::default()).unwrap();
        let model = super::super::Model::Logistic(m);
        let pred = model.predict(&t).unwrap();
        let truth = model.encoder().targets(&t).unwrap();
        assert_eq!(pred, truth);
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let t = line_table(&[-1.0, 1.0, 2.0]);
        let hp = LogisticParams {
            epochs: 0,
            ..LogisticParams::default()
        };
        let p = train_logistic(&t, &hp).unwrap().predict_proba(&t).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn duplicated_rows_give_the_same_model() {
        let xs = [-2.0, -1.5, -0.2, 0.3, 1.0, 4.0];
        let t = line_table(&xs);
        let doubled = t.select_rows(&[0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5]);
        let a = train_logistic(&t, &LogisticParams::default()).unwrap();
        let b = train_logistic(&doubled, &LogisticParams::default()).unwrap();
        for (u, v) in a
            .weights
            .iter()
            .chain(&a.biases)
            .zip(b.weights.iter().chain(&b.biases))
        {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn exploding_learning_rate_is_reported() {
        let t = line_table(&[-1e3, -2e3, 1e3, 5e3]);
        let hp = LogisticParams {
            learning_rate: 1e300,
            l2: 1.0,
            epochs: 50,
        };
        assert!(matches!(
            train_logistic(&t, &hp),
            Err(Error::NonFiniteLoss { .. })
        ));
    }
}
