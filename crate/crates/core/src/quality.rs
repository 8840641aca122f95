//! Column-shape and pairwise-correlation fidelity scores (quality report),
//! structural checks (diagnostic report), and the gate that decides whether
//! a synthetic table goes on to further evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ColumnKind, ColumnView, Table};

/// `1 − sup |F_real − F_synth|` over the pooled support.
pub fn ks_complement(real: &[f64], synth: &[f64]) -> Result<f64> {
    if real.is_empty() {
        return Err(Error::EmptyColumn("real".into()));
    }
    if synth.is_empty() {
        return Err(Error::EmptyColumn("synthetic".into()));
    }
    Ok(1.0 - ks_statistic(real, synth))
}

/// Two-sample Kolmogorov–Smirnov distance between empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `1 − ½ Σ |p_c − q_c|` over category frequencies of two code vectors that
/// share a dictionary of `n_categories` entries.
pub fn tv_complement(real: &[u32], synth: &[u32], n_categories: usize) -> Result<f64> {
    if real.is_empty() {
        return Err(Error::EmptyColumn("real".into()));
    }
    if synth.is_empty() {
        return Err(Error::EmptyColumn("synthetic".into()));
    }
    let freq = |codes: &[u32]| {
        let mut f = vec![0.0; n_categories];
        for &c in codes {
            f[c as usize] += 1.0;
        }
        let n = codes.len() as f64;
        f.iter_mut().for_each(|x| *x /= n);
        f
    };
    let (p, q) = (freq(real), freq(synth));
    let tv: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    Ok(1.0 - tv)
}

/// Pearson correlation; `None` when either side has zero variance. Sums run
/// over the pairs in sorted order so the result does not depend on row order.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnShape {
    pub column: String,
    pub metric: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub columns: (String, String),
    pub real_correlation: f64,
    pub synthetic_correlation: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSimilarity {
    pub pairs: Vec<PairScore>,
    pub skipped: Vec<(String, String)>,
    pub average: f64,
}

/// Columns present in both tables with the same kind, in `real`'s order.
fn shared_columns(real: &Table, synth: &Table) -> Vec<(usize, usize)> {
    real.schema()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let j = synth.column_index(&s.name)?;
            (synth.schema()[j].kind == s.kind).then_some((i, j))
        })
        .collect()
}

/// Per-pair `1 − |ρ_real − ρ_synth| / 2` over shared numeric columns.
pub fn correlation_similarity(real: &Table, synth: &Table) -> Result<CorrelationSimilarity> {
    let cols: Vec<(String, Vec<f64>, Vec<f64>)> = shared_columns(real, synth)
        .into_iter()
        .filter(|&(i, _)| real.schema()[i].kind == ColumnKind::Numeric)
        .map(|(i, j)| {
            (
                real.schema()[i].name.clone(),
                real.numeric_at(i).expect("numeric").to_vec(),
                synth.numeric_at(j).expect("numeric").to_vec(),
            )
        })
        .collect();
    if cols.len() < 2 {
        return Err(Error::TooFewNumericColumns(cols.len()));
    }
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            let names = (cols[a].0.clone(), cols[b].0.clone());
            match (
                pearson(&cols[a].1, &cols[b].1),
                pearson(&cols[a].2, &cols[b].2),
            ) {
                (Some(r), Some(s)) => pairs.push(PairScore {
                    columns: names,
                    real_correlation: r,
                    synthetic_correlation: s,
                    score: 1.0 - (r - s).abs() / 2.0,
                }),
                _ => skipped.push(names),
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateInput(
            "every numeric column pair has zero variance".into(),
        ));
    }
    let average = pairs.iter().map(|p| p.score).sum::<f64>() / pairs.len() as f64;
    Ok(CorrelationSimilarity {
        pairs,
        skipped,
        average,
    })
}

/// Category frequencies keyed by string, so tables with different
/// dictionaries can be compared.
fn string_codes(real: &Table, i: usize, synth: &Table, j: usize) -> (Vec<u32>, Vec<u32>, usize) {
    let rc = real.categorical_at(i).expect("categorical");
    let sc = synth.categorical_at(j).expect("categorical");
    let mut dict: Vec<String> = rc.dictionary().to_vec();
    let remap = crate::table::union_dictionary(&mut dict, sc.dictionary());
    let synth_codes = sc.codes().iter().map(|&c| remap[c as usize]).collect();
    (rc.codes().to_vec(), synth_codes, dict.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub column_shapes: Vec<ColumnShape>,
    pub column_shapes_average: f64,
    pub correlation: CorrelationSimilarity,
    pub overall: f64,
}

pub fn quality_report(real: &Table, synth: &Table) -> Result<QualityReport> {
    let mut column_shapes = Vec::new();
    for (i, j) in shared_columns(real, synth) {
        let name = real.schema()[i].name.clone();
        let (metric, score) = match real.schema()[i].kind {
            ColumnKind::Numeric => {
                let r = real.numeric_at(i).expect("numeric").to_vec();
                let s = synth.numeric_at(j).expect("numeric").to_vec();
                ("KSComplement", ks_complement(&r, &s))
            }
            ColumnKind::Categorical => {
                let (r, s, n) = string_codes(real, i, synth, j);
                ("TVComplement", tv_complement(&r, &s, n))
            }
        };
        let score = score.map_err(|e| match e {
            Error::EmptyColumn(_) => Error::EmptyColumn(name.clone()),
            e => e,
        })?;
        column_shapes.push(ColumnShape {
            column: name,
            metric: metric.into(),
            score,
        });
    }
    if column_shapes.is_empty() {
        return Err(Error::NoSharedColumns);
    }
    let column_shapes_average =
        column_shapes.iter().map(|c| c.score).sum::<f64>() / column_shapes.len() as f64;
    let correlation = correlation_similarity(real, synth)?;
    let overall = (column_shapes_average + correlation.average) / 2.0;
    Ok(QualityReport {
        column_shapes,
        column_shapes_average,
        correlation,
        overall,
    })
}

/// Fraction of column names present in both tables with identical kind,
/// relative to the union of names.
pub fn table_structure(real: &Table, synth: &Table) -> f64 {
    let matched = shared_columns(real, synth).len();
    let extra = synth
        .schema()
        .iter()
        .filter(|s| real.column_index(&s.name).is_none())
        .count();
    let union = real.n_cols() + extra;
    if union == 0 {
        return 1.0;
    }
    matched as f64 / union as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnBoundary {
    pub column: String,
    pub score: f64,
}

/// Per-column share of synthetic values inside the real column's range
/// (numeric, inclusive) or among the categories observed in real data.
pub fn boundary_adherence_columns(real: &Table, synth: &Table) -> Result<Vec<ColumnBoundary>> {
    let shared = shared_columns(real, synth);
    if shared.is_empty() {
        return Err(Error::NoSharedColumns);
    }
    let mut out = Vec::with_capacity(shared.len());
    for (i, j) in shared {
        let name = real.schema()[i].name.clone();
        if synth.n_rows() == 0 || real.n_rows() == 0 {
            return Err(Error::EmptyColumn(name));
        }
        let inside = match (real.view_at(i), synth.view_at(j)) {
            (ColumnView::Numeric(r), ColumnView::Numeric(s)) => {
                let (lo, hi) = r
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                s.iter().filter(|&x| x >= lo && x <= hi).count()
            }
            (ColumnView::Categorical(r), ColumnView::Categorical(s)) => {
                let seen: HashMap<&str, ()> = r
                    .counts()
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(c, _)| (r.dictionary()[c].as_str(), ()))
                    .collect();
                (0..s.codes().len())
                    .filter(|&k| seen.contains_key(s.value(k)))
                    .count()
            }
            _ => unreachable!("shared columns have equal kinds"),
        };
        out.push(ColumnBoundary {
            column: name,
            score: inside as f64 / synth.n_rows() as f64,
        });
    }
    Ok(out)
}

pub fn boundary_adherence(real: &Table, synth: &Table) -> Result<f64> {
    let cols = boundary_adherence_columns(real, synth)?;
    Ok(cols.iter().map(|c| c.score).sum::<f64>() / cols.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub table_structure: f64,
    pub boundary_adherence: f64,
    pub boundary_columns: Vec<ColumnBoundary>,
    pub overall: f64,
}

pub fn diagnostic_report(real: &Table, synth: &Table) -> Result<DiagnosticReport> {
    let table_structure = table_structure(real, synth);
    let boundary_columns = boundary_adherence_columns(real, synth)?;
    let boundary_adherence =
        boundary_columns.iter().map(|c| c.score).sum::<f64>() / boundary_columns.len() as f64;
    Ok(DiagnosticReport {
        table_structure,
        boundary_adherence,
        boundary_columns,
        overall: (table_structure + boundary_adherence) / 2.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateThresholds {
    pub quality: f64,
    pub diagnostic: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            quality: 0.65,
            diagnostic: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub pass: bool,
    pub quality_overall: f64,
    pub diagnostic_overall: f64,
    pub thresholds: GateThresholds,
    pub reasons: Vec<String>,
}

/// Inclusive thresholds on the two overall scores.
pub fn gate_scores(quality: f64, diagnostic: f64, thresholds: GateThresholds) -> GateDecision {
    let mut reasons = Vec::new();
    if quality < thresholds.quality {
        reasons.push(format!(
            "quality overall {quality} below threshold {}",
            thresholds.quality
        ));
    }
    if diagnostic < thresholds.diagnostic {
        reasons.push(format!(
            "diagnostic overall {diagnostic} below threshold {}",
            thresholds.diagnostic
        ));
    }
    GateDecision {
        pass: reasons.is_empty(),
        quality_overall: quality,
        diagnostic_overall: diagnostic,
        thresholds,
        reasons,
    }
}

pub fn gate(q: &QualityReport, d: &DiagnosticReport, thresholds: GateThresholds) -> GateDecision {
    gate_scores(q.overall, d.overall, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnData, ColumnSchema};

    #[test]
    fn ks_complement_examples() {
        let x = [0.3, 1.2, -4.0];
        assert_eq!(ks_complement(&x, &x).unwrap(), 1.0);
        assert_eq!(ks_complement(&[0.0; 3], &[1.0; 5]).unwrap(), 0.0);
        assert_eq!(
            ks_complement(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 1.0]).unwrap(),
            0.75
        );
        assert!(matches!(ks_complement(&[], &x), Err(Error::EmptyColumn(_))));
    }

    #[test]
    fn tv_complement_examples() {
        assert_eq!(tv_complement(&[0, 1, 1], &[1, 0, 1], 2).unwrap(), 1.0);
        assert_eq!(tv_complement(&[0, 0], &[1, 1], 2).unwrap(), 0.0);
        assert_eq!(tv_complement(&[0, 0, 0, 1], &[0, 1], 2).unwrap(), 0.75);
        assert!(matches!(
            tv_complement(&[0], &[], 1),
            Err(Error::EmptyColumn(_))
        ));
    }

    fn two_numeric(a: Vec<f64>, b: Vec<f64>) -> Table {
        Table::from_columns(vec![
            (ColumnSchema::numeric("a"), ColumnData::Numeric(a)),
            (ColumnSchema::numeric("b"), ColumnData::Numeric(b)),
        ])
        .unwrap()
    }

    #[test]
    fn correlation_similarity_examples() {
        let real = two_numeric(vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]);
        let same = correlation_similarity(&real, &real).unwrap();
        assert_eq!(same.average, 1.0);
        let anti = two_numeric(vec![1.0, 2.0, 3.0], vec![6.0, 4.0, 2.0]);
        assert!(correlation_similarity(&real, &anti).unwrap().average.abs() < 1e-12);

        let constant = two_numeric(vec![1.0, 2.0, 3.0], vec![5.0; 3]);
        assert!(correlation_similarity(&real, &constant).is_err());

        let one = Table::from_columns(vec![(
            ColumnSchema::numeric("a"),
            ColumnData::Numeric(vec![1.0]),
        )])
        .unwrap();
        assert!(matches!(
            correlation_similarity(&one, &one),
            Err(Error::TooFewNumericColumns(1))
        ));
    }

    #[test]
    fn correlation_pair_formula() {
        // ρ_real = 0.6, ρ_synth = 0.2 → 0.8
        assert!((1.0 - (0.6f64 - 0.2).abs() / 2.0 - 0.8).abs() < 1e-15);
    }

    fn ten_numeric(names: &[&str]) -> Table {
        Table::from_columns(
            names
                .iter()
                .map(|n| (ColumnSchema::numeric(*n), ColumnData::Numeric(vec![0.0])))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn table_structure_examples() {
        let names: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let real = ten_numeric(&refs);
        assert_eq!(table_structure(&real, &real), 1.0);
        assert_eq!(table_structure(&real, &ten_numeric(&refs[..9])), 0.9);

        let mut cols: Vec<_> = refs[..9]
            .iter()
            .map(|n| (ColumnSchema::numeric(*n), ColumnData::Numeric(vec![0.0])))
            .collect();
        cols.push((
            ColumnSchema::categorical("c9"),
            ColumnData::from_strings(&["x"]),
        ));
        let kinds = Table::from_columns(cols).unwrap();
        assert_eq!(table_structure(&real, &kinds), 0.9);
    }

    #[test]
    fn boundary_adherence_examples() {
        let real = Table::from_columns(vec![(
            ColumnSchema::numeric("x"),
            ColumnData::Numeric(vec![0.0, 1.0]),
        )])
        .unwrap();
        assert_eq!(boundary_adherence(&real, &real).unwrap(), 1.0);
        let synth = Table::from_columns(vec![(
            ColumnSchema::numeric("x"),
            ColumnData::Numeric(vec![0.5, 0.5, 2.0, -1.0]),
        )])
        .unwrap();
        assert_eq!(boundary_adherence(&real, &synth).unwrap(), 0.5);

        let real = Table::from_columns(vec![
            (
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(vec![0.0, 1.0]),
            ),
            (
                ColumnSchema::categorical("c"),
                ColumnData::from_strings(&["a", "b"]),
            ),
        ])
        .unwrap();
        let synth = Table::from_columns(vec![
            (
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(vec![0.0, 1.0]),
            ),
            (
                ColumnSchema::categorical("c"),
                ColumnData::from_strings(&["z", "z"]),
            ),
        ])
        .unwrap();
        assert_eq!(boundary_adherence(&real, &synth).unwrap(), 0.5);

        let other = Table::from_columns(vec![(
            ColumnSchema::numeric("y"),
            ColumnData::Numeric(vec![0.0]),
        )])
        .unwrap();
        assert!(matches!(
            boundary_adherence(&real, &other),
            Err(Error::NoSharedColumns)
        ));
    }

    #[test]
    fn gate_examples() {
        let t = GateThresholds::default();
        assert!(gate_scores(0.9891, 1.0, t).pass);
        let wgan = gate_scores(0.5707, 0.8124, t);
        assert!(!wgan.pass);
        assert_eq!(wgan.reasons.len(), 2);
        assert!(gate_scores(0.65, 0.95, t).pass);
        assert!(gate_scores(0.6500, 0.9517, t).pass);
    }
}
