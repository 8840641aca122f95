#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use synth_eval::rng;
use synth_eval::{ColumnData, ColumnSchema, Table};

/// `n` rows of `p` unit-variance Gaussian columns `f0..`, plus a `Label`
/// column cycling through `classes` classes. Class `k` has mean
/// `k·separation + shift` in every column.
pub fn gaussian_table(
    n: usize,
    p: usize,
    classes: usize,
    separation: f64,
    shift: f64,
    seed: u64,
) -> Table {
    let mut r = rng::seeded(seed);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % classes;
        for c in cols.iter_mut() {
            let z: f64 = r.sample(StandardNormal);
            c.push(z + k as f64 * separation + shift);
        }
        labels.push(format!("c{k}"));
    }
    let mut columns: Vec<(ColumnSchema, ColumnData)> = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| {
            (
                ColumnSchema::numeric(format!("f{j}")),
                ColumnData::Numeric(v),
            )
        })
        .collect();
    columns.push((
        ColumnSchema::label("Label"),
        ColumnData::from_strings(&labels),
    ));
    Table::from_columns(columns).unwrap()
}

/// A mixed table: numeric Gaussian columns, a categorical protocol column
/// and a label.
pub fn mixed_table(n: usize, seed: u64) -> Table {
    let base = gaussian_table(n, 4, 2, 1.5, 0.0, seed);
    let mut r = rng::seeded(seed ^ 0x5eed);
    let protos = ["tcp", "udp", "icmp"];
    let proto: Vec<&str> = (0..n).map(|_| protos[r.random_range(0..3)]).collect();
    base.with_column(
        ColumnSchema::categorical("proto"),
        ColumnData::from_strings(&proto),
    )
    .unwrap()
}

/// Adds `delta` to every numeric cell.
pub fn shifted(t: &Table, delta: f64) -> Table {
    let data: Vec<f64> = t.numeric_matrix().iter().map(|x| x + delta).collect();
    t.with_numeric(data).unwrap()
}

/// Row-major `n×p` standard normal draws, scaled by `sd` and offset by
/// `mean` in the first `shift_dims` coordinates.
pub fn normal_matrix(
    r: &mut rng::Rng,
    n: usize,
    p: usize,
    mean: f64,
    shift_dims: usize,
    sd: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * p);
    for _ in 0..n {
        for j in 0..p {
            let z: f64 = r.sample(StandardNormal);
            out.push(z * sd + if j < shift_dims { mean } else { 0.0 });
        }
    }
    out
}
