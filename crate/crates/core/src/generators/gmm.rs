use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{largest_remainder, CategoricalFrequencies, Proportions, TableTemplate};
use crate::error::{Error, Result};
use crate::ingest::{fit_robust_scaler, RobustScalerParams};
use crate::linalg::{cholesky, Matrix};
use crate::rng::{self, Rng};
use crate::table::Table;

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Covariance with the ridge already added.
    pub cov: Matrix,
    /// Lower Cholesky factor of `cov`.
    pub chol: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMixture {
    pub class: String,
    /// Code of the class in the label dictionary.
    pub code: u32,
    pub n_rows: usize,
    pub proportion: f64,
    pub components: Vec<Component>,
    pub ridge: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mean per-row log-likelihood in scaled space at the last E-step.
    pub log_likelihood: f64,
}

/// Per-class Gaussian mixtures over the robust-scaled numeric columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmClassSampler {
    pub template: TableTemplate,
    pub scaler: Option<RobustScalerParams>,
    pub classes: Vec<ClassMixture>,
    pub categoricals: CategoricalFrequencies,
    pub k: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl GmmClassSampler {
    /// Component means of one class mapped back to data scale.
    pub fn component_means(&self, class: &str) -> Option<Vec<Vec<f64>>> {
        let c = self.classes.iter().find(|c| c.class == class)?;
        Some(
            c.components
                .iter()
                .map(|comp| {
                    let mut m = comp.mean.clone();
                    if let Some(s) = &self.scaler {
                        s.unscale_row(&mut m);
                    }
                    m
                })
                .collect(),
        )
    }
}

/// `ln N(x | μ, LLᵀ)`.
fn log_density(x: &[f64], mean: &[f64], chol: &Matrix) -> f64 {
    let p = x.len();
    let mut y = vec![0.0; p];
    let mut maha = 0.0;
    let mut log_det = 0.0;
    for i in 0..p {
        let mut s = x[i] - mean[i];
        for (j, yj) in y.iter().enumerate().take(i) {
            s -= chol.get(i, j) * yj;
        }
        let lii = chol.get(i, i);
        y[i] = s / lii;
        maha += y[i] * y[i];
        log_det += lii.ln();
    }
    -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + maha) - log_det
}

fn factor(cov: &mut Matrix, ridge: f64) -> Result<Matrix> {
    let p = cov.rows();
    let mut extra = ridge;
    for _ in 0..12 {
        if let Some(l) = cholesky(cov) {
            return Ok(l);
        }
        for i in 0..p {
            cov.set(i, i, cov.get(i, i) + extra);
        }
        extra *= 10.0;
    }
    Err(Error::DegenerateInput(
        "covariance is not positive definite after ridge".into(),
    ))
}

/// M-step from responsibilities `resp` (`n × k`).
fn m_step(x: &Matrix, resp: &[f64], k: usize, ridge: f64) -> Result<Vec<Component>> {
    let (n, p) = (x.rows(), x.cols());
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum::<f64>().max(1e-12);
        let mut mean = vec![0.0; p];
        for i in 0..n {
            let r = resp[i * k + c];
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += r * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut cov = Matrix::zeros(p, p);
        for i in 0..n {
            let r = resp[i * k + c];
            if r == 0.0 {
                continue;
            }
            let row = x.row(i);
            for a in 0..p {
                let da = row[a] - mean[a];
                for b in a..p {
                    cov.set(a, b, cov.get(a, b) + r * da * (row[b] - mean[b]));
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                let v = cov.get(a, b) / nk;
                cov.set(a, b, v);
                cov.set(b, a, v);
            }
            cov.set(a, a, cov.get(a, a) + ridge);
        }
        let chol = factor(&mut cov, ridge)?;
        out.push(Component {
            weight: nk / n as f64,
            mean,
            cov,
            chol,
        });
    }
    let total: f64 = out.iter().map(|c| c.weight).sum();
    out.iter_mut().for_each(|c| c.weight /= total);
    Ok(out)
}

/// Seeded k-means++ centres, then hard assignment to the nearest centre.
fn initial_responsibilities(x: &Matrix, k: usize, rng: &mut Rng) -> Vec<f64> {
    let n = x.rows();
    let mut centres = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| crate::linalg::squared_distance(x.row(i), x.row(centres[0])))
        .collect();
    while centres.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            Err(_) => rng.random_range(0..n),
        };
        centres.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(crate::linalg::squared_distance(x.row(i), x.row(next)));
        }
    }
    let mut resp = vec![0.0; n * k];
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &ci) in centres.iter().enumerate() {
            let d = crate::linalg::squared_distance(x.row(i), x.row(ci));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        resp[i * k + best] = 1.0;
    }
    resp
}

fn fit_class(
    x: &Matrix,
    k: usize,
    ridge_scale: f64,
    rng: &mut Rng,
) -> Result<(Vec<Component>, f64, usize, bool, f64)> {
    let (n, p) = (x.rows(), x.cols());
    let trace = x.covariance().trace();
    let ridge = if trace > 0.0 {
        ridge_scale * trace / p as f64
    } else {
        ridge_scale
    };
    let mut comps = m_step(x, &initial_responsibilities(x, k, rng), k, ridge)?;
    let mut prev = f64::NEG_INFINITY;
    let mut resp = vec![0.0; n * k];
    let mut ll = prev;
    for iter in 0..MAX_ITER {
        let mut total = 0.0;
        for i in 0..n {
            let lp: Vec<f64> = comps
                .iter()
                .map(|c| c.weight.ln() + log_density(x.row(i), &c.mean, &c.chol))
                .collect();
            let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + lp.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse;
            for (c, v) in lp.iter().enumerate() {
                resp[i * k + c] = (v - lse).exp();
            }
        }
        ll = total / n as f64;
        if ll - prev < TOL {
            return Ok((comps, ridge, iter, true, ll));
        }
        prev = ll;
        comps = m_step(x, &resp, k, ridge)?;
    }
    Ok((comps, ridge, MAX_ITER, false, ll))
}

/// Fits one mixture of `k` Gaussians per label class by EM in
/// robust-scaled space. Classes with at most `k` rows use a single
/// component. `ridge` scales the covariance ridge `ridge · trace(S)/p`.
pub fn fit_gmm_sampler(train: &Table, k: usize, ridge: f64, seed: u64) -> Result<GmmClassSampler> {
    let label = train.label()?;
    if k == 0 {
        return Err(Error::InvalidArgument("mixture needs k ≥ 1".into()));
    }
    if !(ridge > 0.0) {
        return Err(Error::InvalidArgument("ridge must be > 0".into()));
    }
    let scaler = if train.n_numeric() > 0 {
        Some(fit_robust_scaler(train)?)
    } else {
        None
    };
    let p = train.n_numeric();
    let mut scaled = train.numeric_matrix().to_vec();
    if let Some(s) = &scaler {
        for row in scaled.chunks_mut(p) {
            s.scale_row(row);
        }
    }
    let counts = label.counts();
    let n = train.n_rows() as f64;
    let mut classes = Vec::new();
    for (code, (name, &count)) in label.dictionary().iter().zip(&counts).enumerate() {
        if count == 0 {
            continue;
        }
        let rows: Vec<usize> = (0..train.n_rows())
            .filter(|&r| label.codes()[r] as usize == code)
            .collect();
        let mut mixture = ClassMixture {
            class: name.clone(),
            code: code as u32,
            n_rows: count,
            proportion: count as f64 / n,
            components: Vec::new(),
            ridge: 0.0,
            iterations: 0,
            converged: true,
            log_likelihood: 0.0,
        };
        if p > 0 {
            let mut data = Vec::with_capacity(rows.len() * p);
            for &r in &rows {
                data.extend_from_slice(&scaled[r * p..(r + 1) * p]);
            }
            let x = Matrix::new(rows.len(), p, data)?;
            let k_eff = if count > k { k } else { 1 };
            let mut r = rng::stream(rng::derive(seed, "gmm-init"), code as u64);
            let (components, lambda, iterations, converged, ll) =
                fit_class(&x, k_eff, ridge, &mut r)?;
            mixture.components = components;
            mixture.ridge = lambda;
            mixture.iterations = iterations;
            mixture.converged = converged;
            mixture.log_likelihood = ll;
        }
        classes.push(mixture);
    }
    Ok(GmmClassSampler {
        template: TableTemplate::of(train),
        scaler,
        classes,
        categoricals: CategoricalFrequencies::fit(train),
        k,
        ridge,
        seed,
    })
}

/// Draws `n` labeled rows with class counts from `proportions` (largest
/// remainder rounding). Rows come grouped by class.
pub fn sample(s: &GmmClassSampler, n: usize, proportions: Proportions, seed: u64) -> Result<Table> {
    let weights: Vec<f64> = match proportions {
        Proportions::MatchReal => s.classes.iter().map(|c| c.proportion).collect(),
        Proportions::Uniform => vec![1.0; s.classes.len()],
    };
    let counts = largest_remainder(n, &weights);
    let p = s.template.numeric_names().len();
    let label_slot = s
        .template
        .columns
        .iter()
        .filter(|c| c.kind == crate::table::ColumnKind::Categorical)
        .position(|c| c.role == crate::table::ColumnRole::Label)
        .expect("sampler tables are labeled");
    let mut numeric = Vec::with_capacity(n * p);
    let mut cats: Vec<Vec<u32>> = vec![Vec::with_capacity(n); s.template.dictionaries.len()];
    for (ci, (class, &m)) in s.classes.iter().zip(&counts).enumerate() {
        let mut r = rng::stream(seed, ci as u64);
        let pick = if class.components.is_empty() {
            None
        } else {
            Some(
                WeightedIndex::new(class.components.iter().map(|c| c.weight)).map_err(|_| {
                    Error::DegenerateInput(format!(
                        "class `{}` has no usable component",
                        class.class
                    ))
                })?,
            )
        };
        for _ in 0..m {
            if let Some(pick) = &pick {
                let comp = &class.components[pick.sample(&mut r)];
                let z: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
                let mut x = comp.mean.clone();
                for (a, xa) in x.iter_mut().enumerate() {
                    for (b, zb) in z.iter().enumerate().take(a + 1) {
                        *xa += comp.chol.get(a, b) * zb;
                    }
                }
                if let Some(sc) = &s.scaler {
                    sc.unscale_row(&mut x);
                }
                numeric.extend_from_slice(&x);
            }
            s.categoricals.draw(class.code as usize, &mut r, &mut cats);
            cats[label_slot].push(class.code);
        }
    }
    s.template.build(n, numeric, cats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnData, ColumnSchema};

    fn normal_table(centres: &[(f64, f64, &str)], per: usize, seed: u64) -> Table {
        let mut r = rng::seeded(seed);
        let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for &(ca, cb, label) in centres {
            for _ in 0..per {
                let za: f64 = r.sample(StandardNormal);
                let zb: f64 = r.sample(StandardNormal);
                a.push(ca + za);
                b.push(cb + zb);
                y.push(label);
            }
        }
        Table::from_columns(vec![
            (ColumnSchema::numeric("a"), ColumnData::Numeric(a)),
            (ColumnSchema::numeric("b"), ColumnData::Numeric(b)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&y)),
        ])
        .unwrap()
    }

    #[test]
    fn single_gaussian_mean_is_consistent() {
        let t = normal_table(&[(3.0, -2.0, "k")], 1000, 1);
        let s = fit_gmm_sampler(&t, 1, 1e-6, 0).unwrap();
        let m = &s.component_means("k").unwrap()[0];
        let se = 1.0 / (1000f64).sqrt();
        assert!(
            (m[0] - 3.0).abs() < 3.0 * se && (m[1] + 2.0).abs() < 3.0 * se,
            "{m:?}"
        );
        let w: f64 = s.classes[0].components.iter().map(|c| c.weight).sum();
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_modes_are_recovered() {
        let t = normal_table(&[(-5.0, 0.0, "k"), (5.0, 4.0, "k")], 500, 2);
        let s = fit_gmm_sampler(&t, 2, 1e-6, 7).unwrap();
        let mut means = s.component_means("k").unwrap();
        means.sort_by(|x, y| x[0].total_cmp(&y[0]));
        assert!(
            (means[0][0] + 5.0).abs() < 0.5 && means[0][1].abs() < 0.5,
            "{means:?}"
        );
        assert!((means[1][0] - 5.0).abs() < 0.5 && (means[1][1] - 4.0).abs() < 0.5);
    }

    #[test]
    fn constant_column_stays_factorizable() {
        let t = Table::from_columns(vec![
            (
                ColumnSchema::numeric("c"),
                ColumnData::Numeric(vec![2.0; 20]),
            ),
            (
                ColumnSchema::numeric("v"),
                ColumnData::Numeric((0..20).map(f64::from).collect()),
            ),
            (
                ColumnSchema::label("y"),
                ColumnData::from_strings(&["a"; 20]),
            ),
        ])
        .unwrap();
        let s = fit_gmm_sampler(&t, 1, 1e-6, 0).unwrap();
        assert!(cholesky(&s.classes[0].components[0].cov).is_some());
        let out = sample(&s, 50, Proportions::MatchReal, 1).unwrap();
        assert!(out
            .numeric_at(0)
            .unwrap()
            .iter()
            .all(|v| (v - 2.0).abs() < 0.01));
    }

    #[test]
    fn sampled_counts_and_determinism() {
        let t = normal_table(&[(0.0, 0.0, "A"), (3.0, 3.0, "B")], 10, 3);
        let s = fit_gmm_sampler(&t, 1, 1e-6, 0).unwrap();
        let out = sample(&s, 100, Proportions::Uniform, 5).unwrap();
        assert_eq!(out.label().unwrap().counts(), vec![50, 50]);
        assert_eq!(out, sample(&s, 100, Proportions::Uniform, 5).unwrap());
        assert_eq!(out.schema(), t.schema());
        let balanced = normal_table(&[(0.0, 0.0, "A"), (3.0, 3.0, "B")], 1, 0);
        let skew = balanced.select_rows(&[0, 0, 0, 1]);
        let s = fit_gmm_sampler(&skew, 1, 1e-6, 0).unwrap();
        let out = sample(&s, 100, Proportions::MatchReal, 5).unwrap();
        assert_eq!(out.label().unwrap().counts(), vec![75, 25]);
    }
}
