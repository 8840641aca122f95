//! Evaluation protocols built on the learners: the real-vs-synthetic
//! distinguishability test, TRTR/TRTS/TSTR utility comparison and the
//! nearest-neighbour distance ratio (NNDR) privacy score.
//!
//! Inputs are canonicalized first, so every result depends only on the
//! multiset of rows and the seed.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    apply_scaler, fit_robust_scaler, stratified_split_indices, RobustScalerParams,
};
use crate::learners::{evaluate, ClassifierSpec, MetricsBundle};
use crate::rng;
use crate::table::{union_dictionary, ColumnData, ColumnKind, ColumnSchema, Table};

const ORIGIN: &str = "__origin";
const HELD_OUT_FRACTION: f64 = 0.2;
pub const REAL_CLASS: &str = "real";
pub const SYNTH_CLASS: &str = "synthetic";

fn features(t: &Table) -> Table {
    if t.label_index().is_some() {
        t.without_label()
    } else {
        t.clone()
    }
}

/// `synth` restricted to `reference`'s columns, in the same order. Both
/// must hold exactly the same column names and kinds.
fn align_to(reference: &Table, synth: &Table) -> Result<Table> {
    if reference.n_cols() != synth.n_cols() {
        let name = reference
            .schema()
            .iter()
            .map(|s| &s.name)
            .chain(synth.schema().iter().map(|s| &s.name))
            .find(|n| reference.column_index(n).is_none() || synth.column_index(n).is_none())
            .cloned()
            .unwrap_or_default();
        return Err(Error::SchemaMismatch(name));
    }
    let names: Vec<&str> = reference.schema().iter().map(|s| s.name.as_str()).collect();
    let aligned = synth.select_columns(&names).map_err(|e| match e {
        Error::UnknownColumn(n) => Error::SchemaMismatch(n),
        other => other,
    })?;
    for (a, b) in reference.schema().iter().zip(aligned.schema()) {
        if a.kind != b.kind || a.role != b.role {
            return Err(Error::SchemaMismatch(a.name.clone()));
        }
    }
    Ok(aligned)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityResult {
    pub classifier: String,
    /// F1 of the synthetic class on the held-out split.
    pub f1: f64,
    pub roc_auc: f64,
    pub n_real: usize,
    pub n_synth: usize,
    /// Rows per side after equalizing class sizes.
    pub n_per_class: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Trains `spec` to separate real (class 1) from synthetic (class 0) rows
/// on an 80/20 split that keeps identical rows together. Labels are dropped first and the larger
/// side is subsampled to the size of the smaller.
pub fn distinguishability(
    real: &Table,
    synth: &Table,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<DistinguishabilityResult> {
    let real_f = features(real).canonicalize();
    let synth_f = align_to(&real_f, &features(synth))?.canonicalize();
    if synth_f.n_rows() == 0 || real_f.n_rows() == 0 {
        return Err(Error::DegenerateInput(format!(
            "distinguishability needs rows on both sides ({} real, {} synthetic)",
            real_f.n_rows(),
            synth_f.n_rows()
        )));
    }
    if real_f.column_index(ORIGIN).is_some() {
        return Err(Error::InvalidSchema(format!(
            "column name `{ORIGIN}` is reserved"
        )));
    }
    let m = real_f.n_rows().min(synth_f.n_rows());
    let shrink = |t: &Table, label: &str| {
        if t.n_rows() == m {
            return t.clone();
        }
        let mut idx =
            index::sample(&mut rng::seeded(rng::derive(seed, label)), t.n_rows(), m).into_vec();
        idx.sort_unstable();
        t.select_rows(&idx)
    };
    let real_b = shrink(&real_f, "distinguish-real");
    let synth_b = shrink(&synth_f, "distinguish-synth");
    let mut origin = vec![REAL_CLASS; m];
    origin.extend(std::iter::repeat_n(SYNTH_CLASS, m));
    let pooled = Table::vertical_concat(&real_b, &synth_b)?.with_column(
        ColumnSchema::label(ORIGIN),
        ColumnData::from_strings(&origin),
    )?;
    let (train, test) = twin_aware_split(&pooled, m, rng::derive(seed, "distinguish-split"))?;
    let model = spec
        .reseeded(rng::derive(seed, "distinguish-model"))
        .train(&train)?;
    let metrics = evaluate(&model, &test)?;
    let f1 = metrics.class(SYNTH_CLASS).map_or(0.0, |c| c.f1);
    let roc_auc = metrics
        .roc_auc
        .ok_or_else(|| Error::DegenerateInput("held-out split lacks one of the classes".into()))?;
    Ok(DistinguishabilityResult {
        classifier: spec.name().to_string(),
        f1,
        roc_auc,
        n_real: real.n_rows(),
        n_synth: synth.n_rows(),
        n_per_class: m,
        n_test: test.n_rows(),
        seed,
    })
}

/// 80/20 split of the pooled real-then-synthetic table in which rows with
/// identical features always land on the same side, so a held-out row is
/// never matched by its own copy in training. Groups of identical rows are
/// stratified by whether they hold real rows, synthetic rows or both.
fn twin_aware_split(pooled: &Table, m: usize, seed: u64) -> Result<(Table, Table)> {
    let features = pooled.without_label();
    let mut group_of_key: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for r in 0..features.n_rows() {
        let g = *group_of_key.entry(features.row_key(r)).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[g].push(r);
    }
    let strata: Vec<u32> = members
        .iter()
        .map(|rows| {
            let real = rows.iter().any(|&r| r < m);
            let synth = rows.iter().any(|&r| r >= m);
            match (real, synth) {
                (true, false) => 0,
                (false, true) => 1,
                _ => 2,
            }
        })
        .collect();
    let (train_g, test_g) = stratified_split_indices(&strata, 3, HELD_OUT_FRACTION, seed)?;
    let expand = |groups: Vec<usize>| {
        let mut rows: Vec<usize> = groups
            .into_iter()
            .flat_map(|g| members[g].iter().copied())
            .collect();
        rows.sort_unstable();
        pooled.select_rows(&rows)
    };
    Ok((expand(train_g), expand(test_g)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Trtr,
    Trts,
    Tstr,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Trtr => "TRTR",
            Protocol::Trts => "TRTS",
            Protocol::Tstr => "TSTR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityResult {
    pub protocol: Protocol,
    /// The model evaluated on its own training rows.
    pub train: MetricsBundle,
    pub test: MetricsBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilitySuite {
    pub classifier: String,
    pub seed: u64,
    pub trtr: UtilityResult,
    pub trts: UtilityResult,
    pub tstr: UtilityResult,
    /// Test-side classes the relevant model never saw, per protocol.
    pub missing_classes: Vec<String>,
}

/// TRTR: real_train → real_test; TRTS: real_train → synth (the whole
/// synthetic table is the test set); TSTR: synth → real_test.
pub fn utility_suite(
    real_train: &Table,
    real_test: &Table,
    synth: &Table,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<UtilitySuite> {
    let real_train = real_train.canonicalize();
    if real_train.label_index().is_none() {
        return Err(Error::NoLabelColumn);
    }
    let real_test = align_to(&real_train, real_test)?.canonicalize();
    let synth = align_to(&real_train, synth)?.canonicalize();
    let real_model = spec
        .reseeded(rng::derive(seed, "utility-real"))
        .train(&real_train)?;
    let real_on_train = evaluate(&real_model, &real_train)?;
    let trtr = UtilityResult {
        protocol: Protocol::Trtr,
        train: real_on_train.clone(),
        test: evaluate(&real_model, &real_test)?,
    };
    let trts = UtilityResult {
        protocol: Protocol::Trts,
        train: real_on_train,
        test: evaluate(&real_model, &synth)?,
    };
    let synth_model = spec
        .reseeded(rng::derive(seed, "utility-synth"))
        .train(&synth)?;
    let tstr = UtilityResult {
        protocol: Protocol::Tstr,
        train: evaluate(&synth_model, &synth)?,
        test: evaluate(&synth_model, &real_test)?,
    };
    let mut missing_classes = Vec::new();
    for r in [&trtr, &trts, &tstr] {
        for c in &r.test.absent_from_train {
            missing_classes.push(format!("{}: {c}", r.protocol.as_str()));
        }
    }
    Ok(UtilitySuite {
        classifier: spec.name().to_string(),
        seed,
        trtr,
        trts,
        tstr,
        missing_classes,
    })
}

/// Feature rows for distance computations: scaled numeric block plus
/// categorical codes over dictionaries shared by both tables.
struct Points {
    numeric: Vec<f64>,
    p: usize,
    codes: Vec<u32>,
    q: usize,
}

fn points(
    reference: &Table,
    synth: &Table,
    scaler: Option<&RobustScalerParams>,
) -> Result<(Points, Points)> {
    let (reference, synth) = match scaler {
        Some(s) => (apply_scaler(reference, s)?, apply_scaler(synth, s)?),
        None => (reference.clone(), synth.clone()),
    };
    let cat_cols: Vec<usize> = (0..reference.n_cols())
        .filter(|&i| reference.schema()[i].kind == ColumnKind::Categorical)
        .collect();
    let q = cat_cols.len();
    let mut ref_codes = vec![0u32; reference.n_rows() * q];
    let mut syn_codes = vec![0u32; synth.n_rows() * q];
    for (k, &i) in cat_cols.iter().enumerate() {
        let a = reference.categorical_at(i).expect("categorical");
        let b = synth.categorical_at(i).expect("aligned");
        let mut dict = a.dictionary().to_vec();
        let remap = union_dictionary(&mut dict, b.dictionary());
        for (r, &c) in a.codes().iter().enumerate() {
            ref_codes[r * q + k] = c;
        }
        for (r, &c) in b.codes().iter().enumerate() {
            syn_codes[r * q + k] = remap[c as usize];
        }
    }
    let p = reference.n_numeric();
    Ok((
        Points {
            numeric: reference.numeric_matrix().to_vec(),
            p,
            codes: ref_codes,
            q,
        },
        Points {
            numeric: synth.numeric_matrix().to_vec(),
            p,
            codes: syn_codes,
            q,
        },
    ))
}

/// Mean over synthetic rows of `d1 / d2`, the distances to the nearest and
/// second-nearest reference rows (`0/0 := 0`). Distances are Euclidean on
/// the numeric columns after `scaler`; each categorical mismatch adds 1 to
/// the squared distance. The label column is ignored.
pub fn nndr_with_scaler(
    synth: &Table,
    reference: &Table,
    scaler: Option<&RobustScalerParams>,
) -> Result<f64> {
    if reference.n_rows() < 2 {
        return Err(Error::TooFewReferenceRows(reference.n_rows()));
    }
    if synth.n_rows() == 0 {
        return Err(Error::DegenerateInput("no synthetic rows".into()));
    }
    let reference = features(reference);
    let synth = align_to(&reference, &features(synth))?;
    let (r, s) = points(&reference, &synth, scaler)?;
    let n_ref = reference.n_rows();
    let mut total = 0.0;
    for i in 0..synth.n_rows() {
        let xs = &s.numeric[i * s.p..(i + 1) * s.p];
        let cs = &s.codes[i * s.q..(i + 1) * s.q];
        let (mut b1, mut b2) = (f64::INFINITY, f64::INFINITY);
        for j in 0..n_ref {
            let xr = &r.numeric[j * r.p..(j + 1) * r.p];
            let cr = &r.codes[j * r.q..(j + 1) * r.q];
            let mut d = 0.0;
            for (a, b) in xs.iter().zip(xr) {
                d += (a - b) * (a - b);
            }
            for (a, b) in cs.iter().zip(cr) {
                if a != b {
                    d += 1.0;
                }
            }
            if d < b1 {
                b2 = b1;
                b1 = d;
            } else if d < b2 {
                b2 = d;
            }
        }
        let (d1, d2) = (b1.sqrt(), b2.sqrt());
        total += if d2 == 0.0 { 0.0 } else { d1 / d2 };
    }
    Ok(total / synth.n_rows() as f64)
}

/// NNDR with a robust scaler fitted on `reference` (no scaling when the
/// reference has no numeric columns).
pub fn nndr(synth: &Table, reference: &Table) -> Result<f64> {
    let scaler = scaler_for(reference)?;
    nndr_with_scaler(synth, reference, scaler.as_ref())
}

fn scaler_for(t: &Table) -> Result<Option<RobustScalerParams>> {
    if t.n_numeric() == 0 {
        Ok(None)
    } else {
        fit_robust_scaler(&features(t)).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyResult {
    pub train_nndr: f64,
    pub test_nndr: f64,
    pub gap: f64,
    pub band: f64,
    pub overfit: bool,
}

/// NNDR of `synth` against the real train and test sets, both in the
/// scale fitted on `real_train`; flags overfitting when they differ by
/// more than `band`.
pub fn privacy_report(
    synth: &Table,
    real_train: &Table,
    real_test: &Table,
    band: f64,
) -> Result<PrivacyResult> {
    let scaler = scaler_for(real_train)?;
    let train_nndr = nndr_with_scaler(synth, real_train, scaler.as_ref())?;
    let test_nndr = nndr_with_scaler(synth, real_test, scaler.as_ref())?;
    Ok(privacy_from_scores(train_nndr, test_nndr, band))
}

pub fn privacy_from_scores(train_nndr: f64, test_nndr: f64, band: f64) -> PrivacyResult {
    let gap = (train_nndr - test_nndr).abs();
    PrivacyResult {
        train_nndr,
        test_nndr,
        gap,
        band,
        overfit: gap > band,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ForestParams;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_table(n: usize, shift: f64, seed: u64) -> Table {
        let mut r = rng::seeded(seed);
        let mut cols = Vec::new();
        for j in 0..3 {
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    shift + z
                })
                .collect();
            cols.push((
                ColumnSchema::numeric(format!("x{j}")),
                ColumnData::Numeric(v),
            ));
        }
        let labels: Vec<&str> = (0..n).map(|i| if i % 3 == 0 { "a" } else { "b" }).collect();
        cols.push((ColumnSchema::label("y"), ColumnData::from_strings(&labels)));
        Table::from_columns(cols).unwrap()
    }

    fn small_forest() -> ClassifierSpec {
        ClassifierSpec::RandomForest(ForestParams {
            n_trees: 20,
            ..ForestParams::default()
        })
    }

    #[test]
    fn shifted_synth_is_detected() {
        let real = gaussian_table(300, 0.0, 1);
        let synth = gaussian_table(300, 10.0, 2);
        let r = distinguishability(&real, &synth, &small_forest(), 5).unwrap();
        assert!(r.roc_auc >= 0.99);
        assert_eq!(r.n_test, 120);
    }

    #[test]
    fn distinguishability_errors_and_invariance() {
        let real = gaussian_table(100, 0.0, 1);
        let empty = real.select_rows(&[]);
        assert!(matches!(
            distinguishability(&real, &empty, &small_forest(), 0),
            Err(Error::DegenerateInput(_))
        ));
        let other = real.select_columns(&["x0", "x1", "y"]).unwrap();
        assert!(matches!(
            distinguishability(&real, &other, &small_forest(), 0),
            Err(Error::SchemaMismatch(_))
        ));
        let synth = gaussian_table(80, 0.3, 3);
        let rev: Vec<usize> = (0..100).rev().collect();
        let a = distinguishability(&real, &synth, &small_forest(), 9).unwrap();
        let b = distinguishability(&real.select_rows(&rev), &synth, &small_forest(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_per_class, 80);
    }

    #[test]
    fn nndr_examples() {
        let line = |v: &[f64]| {
            Table::from_columns(vec![(
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(v.to_vec()),
            )])
            .unwrap()
        };
        let reference = line(&[0.0, 10.0]);
        let v = nndr_with_scaler(&line(&[1.0]), &reference, None).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(
            nndr_with_scaler(&line(&[5.0]), &reference, None).unwrap(),
            1.0
        );
        assert_eq!(nndr(&line(&[0.0, 10.0, 0.0]), &reference).unwrap(), 0.0);
        assert!(matches!(
            nndr(&line(&[1.0]), &line(&[0.0])),
            Err(Error::TooFewReferenceRows(1))
        ));
    }

    #[test]
    fn categorical_mismatch_counts_one() {
        let t = |x: &[f64], c: &[&str]| {
            Table::from_columns(vec![
                (ColumnSchema::numeric("x"), ColumnData::Numeric(x.to_vec())),
                (ColumnSchema::categorical("c"), ColumnData::from_strings(c)),
            ])
            .unwrap()
        };
        let reference = t(&[0.0, 0.0], &["u", "v"]);
        // distances 0 and 1 from the first synthetic row, ratio 0
        let v = nndr_with_scaler(&t(&[0.0], &["u"]), &reference, None).unwrap();
        assert_eq!(v, 0.0);
        let v = nndr_with_scaler(&t(&[1.0], &["w"]), &reference, None).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn privacy_flags_leakage() {
        let train = gaussian_table(200, 0.0, 1);
        let test = gaussian_table(100, 0.0, 2);
        let copy = train.select_rows(&(0..100).collect::<Vec<_>>());
        let r = privacy_report(&copy, &train, &test, 0.04).unwrap();
        assert_eq!(r.train_nndr, 0.0);
        assert!(r.test_nndr > 0.0 && r.overfit);
        let p = privacy_from_scores(0.9634, 0.9731, 0.04);
        assert!(!p.overfit && (p.gap - 0.0097).abs() < 1e-12);
    }

    #[test]
    fn utility_with_copied_train() {
        let train = gaussian_table(150, 0.0, 1);
        let test = gaussian_table(60, 0.0, 2);
        let spec = ClassifierSpec::logistic();
        let u = utility_suite(&train, &test, &train, &spec, 3).unwrap();
        assert_eq!(u.trts.test, u.trtr.train);
        assert!(u.missing_classes.is_empty());
    }
}
