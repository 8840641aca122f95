//! Permutation two-sample tests on numeric matrices: ridge-regularized
//! Hotelling T² (equal means), Frobenius norm of the covariance difference
//! (equal covariances) and unbiased RBF-kernel MMD² (equal distributions).
//!
//! All three share one driver: the two samples are pooled, group membership
//! is relabelled `B` times, and the p-value is `(1 + #{T*_b ≥ T_obs}) / (B + 1)`.
//! Permutation `b` draws from its own ChaCha stream so results are
//! independent of evaluation order. Rows are put into a canonical order
//! before pooling, which makes every result invariant to the input row order.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// Per-group row cap applied to MMD when none is configured.
pub const MMD_DEFAULT_SUBSAMPLE: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub permutations: usize,
    pub alpha: f64,
    pub ridge_scale: f64,
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            permutations: 500,
            alpha: 0.05,
            ridge_scale: 1e-3,
            subsample: None,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.permutations < 1 {
            return Err(Error::InvalidArgument("permutations must be ≥ 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if !(self.ridge_scale > 0.0) {
            return Err(Error::InvalidArgument("ridge scale must be > 0".into()));
        }
        if self.subsample.is_some_and(|c| c < 2) {
            return Err(Error::InvalidArgument("subsample cap must be ≥ 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub statistic_name: String,
    pub observed: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub seed: u64,
    pub alpha: f64,
    pub reject: bool,
    pub n1: usize,
    pub n2: usize,
    pub dims: usize,
    /// Kernel bandwidth σ (MMD only).
    pub bandwidth: Option<f64>,
    pub flags: Vec<String>,
}

/// Statistic evaluated on a relabelling: the first `n1` entries of `order`
/// index group one in the pooled sample.
trait TwoSampleStatistic {
    fn eval(&self, order: &[usize], n1: usize) -> f64;
}

fn check_inputs(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} columns, y has {}",
            x.cols(),
            y.cols()
        )));
    }
    if x.rows() < 2 || y.rows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least two rows per group, got {} and {}",
            x.rows(),
            y.rows()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::DegenerateInput("zero columns".into()));
    }
    Ok(())
}

/// Canonical row order, optional seeded subsample, then pooling.
fn prepare(x: &Matrix, y: &Matrix, cap: Option<usize>, seed: u64) -> Matrix {
    let take = |m: &Matrix, label: &str| {
        let m = m.sorted_rows();
        match cap {
            Some(c) if m.rows() > c => {
                let mut idx =
                    index::sample(&mut rng::seeded(rng::derive(seed, label)), m.rows(), c)
                        .into_vec();
                idx.sort_unstable();
                m.select_rows(&idx)
            }
            _ => m,
        }
    };
    take(x, "subsample-x")
        .vstack(&take(y, "subsample-y"))
        .expect("column counts checked")
}

fn run_permutations<S: TwoSampleStatistic>(
    name: &str,
    stat: &S,
    n1: usize,
    n2: usize,
    dims: usize,
    cfg: &TestConfig,
) -> PermutationResult {
    let n = n1 + n2;
    let identity: Vec<usize> = (0..n).collect();
    let observed = stat.eval(&identity, n1);
    let tol = 1e-12 * observed.abs();
    let mut null = Vec::with_capacity(cfg.permutations);
    let mut order = identity;
    for b in 0..cfg.permutations {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, b as u64));
        null.push(stat.eval(&order, n1));
    }
    let exceed = null.iter().filter(|&&t| t >= observed - tol).count();
    let p_value = (1 + exceed) as f64 / (cfg.permutations + 1) as f64;
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    let null_sd = if null.len() > 1 {
        (null.iter().map(|t| (t - null_mean).powi(2)).sum::<f64>() / (null.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    PermutationResult {
        statistic_name: name.to_string(),
        observed,
        permutations: cfg.permutations,
        p_value,
        null_mean,
        null_sd,
        seed: cfg.seed,
        alpha: cfg.alpha,
        reject: p_value <= cfg.alpha,
        n1,
        n2,
        dims,
        bandwidth: None,
        flags: Vec::new(),
    }
}

/// Pooled sample centred at its grand mean, with the total scatter
/// `Σ z zᵀ` precomputed so per-permutation work is `O(n1·p)` plus the solve.
struct Centered {
    z: Matrix,
    total_sum: Vec<f64>,
    total_scatter: Vec<f64>,
}

impl Centered {
    fn new(pooled: &Matrix) -> Self {
        let mean = pooled.column_means();
        let p = pooled.cols();
        let mut z = pooled.clone();
        for i in 0..z.rows() {
            for (v, m) in z.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let mut total_sum = vec![0.0; p];
        let mut total_scatter = vec![0.0; p * p];
        for i in 0..z.rows() {
            let r = z.row(i);
            accumulate(&mut total_sum, &mut total_scatter, r);
        }
        Self {
            z,
            total_sum,
            total_scatter,
        }
    }

    fn group_sum(&self, rows: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.z.cols()];
        for &i in rows {
            for (a, v) in s.iter_mut().zip(self.z.row(i)) {
                *a += v;
            }
        }
        s
    }

    fn group_scatter(&self, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let p = self.z.cols();
        let mut s = vec![0.0; p];
        let mut q = vec![0.0; p * p];
        for &i in rows {
            accumulate(&mut s, &mut q, self.z.row(i));
        }
        (s, q)
    }
}

/// Adds `r` to a running sum and the upper triangle of `Σ r rᵀ`.
fn accumulate(sum: &mut [f64], scatter: &mut [f64], r: &[f64]) {
    let p = r.len();
    for a in 0..p {
        sum[a] += r[a];
        let ra = r[a];
        let row = &mut scatter[a * p..(a + 1) * p];
        for b in a..p {
            row[b] += ra * r[b];
        }
    }
}

/// Within-group scatter `Q − n m mᵀ` (upper triangle) from a sum and scatter.
fn centered_scatter(scatter: &[f64], sum: &[f64], n: usize) -> Vec<f64> {
    let p = sum.len();
    let mut w = scatter.to_vec();
    for a in 0..p {
        for b in a..p {
            w[a * p + b] -= sum[a] * sum[b] / n as f64;
        }
    }
    w
}

fn symmetrize(upper: &mut [f64], p: usize) {
    for a in 0..p {
        for b in 0..a {
            upper[a * p + b] = upper[b * p + a];
        }
    }
}

struct Hotelling {
    data: Centered,
    ridge_scale: f64,
}

impl Hotelling {
    /// Ridge λ = ridge_scale · trace(S)/p; falls back to `ridge_scale` when
    /// the pooled covariance is identically zero.
    fn lambda(&self, pooled_cov: &[f64], p: usize) -> f64 {
        let tr: f64 = (0..p).map(|a| pooled_cov[a * p + a]).sum();
        let l = self.ridge_scale * tr / p as f64;
        if l > 0.0 {
            l
        } else {
            self.ridge_scale
        }
    }
}

impl TwoSampleStatistic for Hotelling {
    fn eval(&self, order: &[usize], n1: usize) -> f64 {
        let n = order.len();
        let n2 = n - n1;
        let p = self.data.z.cols();
        let s1 = self.data.group_sum(&order[..n1]);
        let s2: Vec<f64> = self
            .data
            .total_sum
            .iter()
            .zip(&s1)
            .map(|(t, a)| t - a)
            .collect();
        let m1: Vec<f64> = s1.iter().map(|v| v / n1 as f64).collect();
        let m2: Vec<f64> = s2.iter().map(|v| v / n2 as f64).collect();
        let mut w = self.data.total_scatter.clone();
        for a in 0..p {
            for b in a..p {
                w[a * p + b] -= n1 as f64 * m1[a] * m1[b] + n2 as f64 * m2[a] * m2[b];
            }
        }
        symmetrize(&mut w, p);
        let dof = (n - 2) as f64;
        w.iter_mut().for_each(|v| *v /= dof);
        let lambda = self.lambda(&w, p);
        for a in 0..p {
            w[a * p + a] += lambda;
        }
        let d: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a - b).collect();
        let a = Matrix::new(p, p, w).expect("p×p");
        let v = match linalg::spd_solve(&a, &d) {
            Some(v) => v,
            None => return f64::INFINITY,
        };
        let q: f64 = d.iter().zip(&v).map(|(a, b)| a * b).sum();
        (n1 * n2) as f64 / n as f64 * q.max(0.0)
    }
}

/// Ridge-regularized Hotelling T² with a permutation p-value.
pub fn hotelling_t2_regularized(
    x: &Matrix,
    y: &Matrix,
    cfg: &TestConfig,
) -> Result<PermutationResult> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let pooled = prepare(x, y, cfg.subsample, cfg.seed);
    let n2 = y.rows().min(cfg.subsample.unwrap_or(usize::MAX));
    let n1 = pooled.rows() - n2;
    let stat = Hotelling {
        data: Centered::new(&pooled),
        ridge_scale: cfg.ridge_scale,
    };
    let mut r = run_permutations("regularized_hotelling_t2", &stat, n1, n2, x.cols(), cfg);
    if n1 + n2 < x.cols() {
        r.flags
            .push("n1 + n2 < p: pooled covariance singular, ridge applied".into());
    }
    Ok(r)
}

struct Frobenius {
    data: Centered,
}

impl TwoSampleStatistic for Frobenius {
    fn eval(&self, order: &[usize], n1: usize) -> f64 {
        let n2 = order.len() - n1;
        let p = self.data.z.cols();
        let (s1, q1) = self.data.group_scatter(&order[..n1]);
        let s2: Vec<f64> = self
            .data
            .total_sum
            .iter()
            .zip(&s1)
            .map(|(t, a)| t - a)
            .collect();
        let q2: Vec<f64> = self
            .data
            .total_scatter
            .iter()
            .zip(&q1)
            .map(|(t, a)| t - a)
            .collect();
        let c1 = centered_scatter(&q1, &s1, n1);
        let c2 = centered_scatter(&q2, &s2, n2);
        let mut f = 0.0;
        for a in 0..p {
            for b in a..p {
                let d = c1[a * p + b] / (n1 - 1) as f64 - c2[a * p + b] / (n2 - 1) as f64;
                f += if a == b { d * d } else { 2.0 * d * d };
            }
        }
        f.sqrt()
    }
}

/// `‖S_x − S_y‖_F` of the sample covariances with a permutation p-value.
pub fn frobenius_covariance_test(
    x: &Matrix,
    y: &Matrix,
    cfg: &TestConfig,
) -> Result<PermutationResult> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let pooled = prepare(x, y, cfg.subsample, cfg.seed);
    let n2 = y.rows().min(cfg.subsample.unwrap_or(usize::MAX));
    let n1 = pooled.rows() - n2;
    let stat = Frobenius {
        data: Centered::new(&pooled),
    };
    Ok(run_permutations(
        "frobenius_covariance",
        &stat,
        n1,
        n2,
        x.cols(),
        cfg,
    ))
}

/// Upper triangle of the RBF Gram matrix plus per-row tail sums.
struct Mmd {
    n: usize,
    /// Row `i` holds `k(i, j)` for `j > i`, concatenated.
    kernel: Vec<f64>,
    row_start: Vec<usize>,
}

impl Mmd {
    fn new(pooled: &Matrix, inv_two_sigma2: f64) -> Self {
        let n = pooled.rows();
        let mut kernel = Vec::with_capacity(n * (n - 1) / 2);
        let mut row_start = Vec::with_capacity(n);
        for i in 0..n {
            row_start.push(kernel.len());
            let ri = pooled.row(i);
            for j in i + 1..n {
                let d2 = linalg::squared_distance(ri, pooled.row(j));
                kernel.push((-d2 * inv_two_sigma2).exp());
            }
        }
        Self {
            n,
            kernel,
            row_start,
        }
    }

    fn tail(&self, i: usize) -> &[f64] {
        let end = if i + 1 < self.n {
            self.row_start[i + 1]
        } else {
            self.kernel.len()
        };
        &self.kernel[self.row_start[i]..end]
    }
}

impl TwoSampleStatistic for Mmd {
    fn eval(&self, order: &[usize], n1: usize) -> f64 {
        let n = self.n;
        let n2 = n - n1;
        // in_x[j] = 1 when pooled row j is in group one under this relabelling
        let mut in_x = vec![0.0; n];
        for &i in &order[..n1] {
            in_x[i] = 1.0;
        }
        let (mut kxx, mut kyy, mut total) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let tail = self.tail(i);
            let mask = &in_x[i + 1..];
            let mut with_x = 0.0;
            let mut all = 0.0;
            for (k, m) in tail.iter().zip(mask) {
                with_x += k * m;
                all += k;
            }
            total += all;
            if in_x[i] == 1.0 {
                kxx += with_x;
            } else {
                kyy += all - with_x;
            }
        }
        let kxy = total - kxx - kyy;
        let (a, b) = (n1 as f64, n2 as f64);
        2.0 * kxx / (a * (a - 1.0)) + 2.0 * kyy / (b * (b - 1.0)) - 2.0 * kxy / (a * b)
    }
}

/// Median of the squared pairwise distances of the pooled sample.
fn median_squared_distance(pooled: &Matrix) -> f64 {
    let n = pooled.rows();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(linalg::squared_distance(pooled.row(i), pooled.row(j)));
        }
    }
    let m = d.len();
    let (_, hi, _) = d.select_nth_unstable_by(m / 2, f64::total_cmp);
    let hi = *hi;
    if m % 2 == 1 {
        hi
    } else {
        let lo = d[..m / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

/// Unbiased MMD² with an RBF kernel whose bandwidth comes from the median
/// heuristic on the observed pooled sample (fixed across permutations).
/// Without a configured cap each group is subsampled to
/// [`MMD_DEFAULT_SUBSAMPLE`] rows.
pub fn mmd_test(x: &Matrix, y: &Matrix, cfg: &TestConfig) -> Result<PermutationResult> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let cap = cfg.subsample.unwrap_or(MMD_DEFAULT_SUBSAMPLE);
    let pooled = prepare(x, y, Some(cap), cfg.seed);
    let n2 = y.rows().min(cap);
    let n1 = pooled.rows() - n2;
    let med = median_squared_distance(&pooled);
    if med == 0.0 {
        return Ok(PermutationResult {
            statistic_name: "mmd2_unbiased_rbf".into(),
            observed: 0.0,
            permutations: cfg.permutations,
            p_value: 1.0,
            null_mean: 0.0,
            null_sd: 0.0,
            seed: cfg.seed,
            alpha: cfg.alpha,
            reject: false,
            n1,
            n2,
            dims: x.cols(),
            bandwidth: Some(0.0),
            flags: vec!["zero bandwidth: median pairwise distance is 0".into()],
        });
    }
    // σ² = median / 2, so 1 / (2σ²) = 1 / median
    let sigma = (med / 2.0).sqrt();
    let stat = Mmd::new(&pooled, 1.0 / med);
    let mut r = run_permutations("mmd2_unbiased_rbf", &stat, n1, n2, x.cols(), cfg);
    r.bandwidth = Some(sigma);
    if x.rows() > cap || y.rows() > cap {
        r.flags
            .push(format!("subsampled to at most {cap} rows per group"));
    }
    Ok(r)
}
