use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierSpec, Model};
use crate::error::{Error, Result};
use crate::ingest::stratified_kfold;
use crate::rng;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Macro one-vs-rest AUC over classes where it is defined.
    pub roc_auc: Option<f64>,
    pub accuracy: f64,
    pub n: usize,
    pub per_class: Vec<ClassMetrics>,
    /// Known to the model but absent from the evaluated rows.
    pub absent_from_test: Vec<String>,
    /// Present in the evaluated rows but never seen in training.
    pub absent_from_train: Vec<String>,
}

impl MetricsBundle {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.class == name)
    }
}

/// Area under the ROC curve via the Mann–Whitney rank statistic with
/// midranks for ties. `None` when either class is empty.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum keeps midranks integral
    let mut rank_sum2 = 0u128;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j share the midrank (i+1+j)/2
        let mid2 = (i + 1 + j) as u128;
        let pos = idx[i..j].iter().filter(|&&k| positive[k]).count() as u128;
        rank_sum2 += mid2 * pos;
        i = j;
    }
    let np = n_pos as u128;
    let u2 = rank_sum2 - np * (np + 1);
    Some(u2 as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Metrics from class probabilities (`n × C`, columns in `classes` order)
/// and the true labels. Predictions take the most probable class.
pub fn metrics_from_scores(
    classes: &[String],
    truth: &[String],
    proba: &[f64],
) -> Result<MetricsBundle> {
    let c = classes.len();
    let n = truth.len();
    if n == 0 {
        return Err(Error::DegenerateInput("no rows to evaluate".into()));
    }
    if proba.len() != n * c {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {n} rows × {c} classes",
            proba.len()
        )));
    }
    let mut universe: Vec<String> = classes.to_vec();
    let mut y = Vec::with_capacity(n);
    for t in truth {
        let k = match universe.iter().position(|u| u == t) {
            Some(k) => k,
            None => {
                universe.push(t.clone());
                universe.len() - 1
            }
        };
        y.push(k);
    }
    let pred: Vec<usize> = proba.chunks(c).map(argmax).collect();
    let mut per_class = Vec::with_capacity(universe.len());
    for (k, name) in universe.iter().enumerate() {
        let support = y.iter().filter(|&&t| t == k).count();
        let predicted = pred.iter().filter(|&&p| p == k).count();
        let tp = y
            .iter()
            .zip(&pred)
            .filter(|&(&t, &p)| t == k && p == k)
            .count();
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let roc = if k < c {
            let scores: Vec<f64> = proba.chunks(c).map(|r| r[k]).collect();
            let positive: Vec<bool> = y.iter().map(|&t| t == k).collect();
            roc_auc(&scores, &positive)
        } else {
            None
        };
        per_class.push(ClassMetrics {
            class: name.clone(),
            support,
            predicted,
            precision,
            recall,
            f1,
            roc_auc: roc,
        });
    }
    let included: Vec<&ClassMetrics> = per_class[..c].iter().filter(|m| m.support > 0).collect();
    let mean = |f: &dyn Fn(&ClassMetrics) -> f64| {
        if included.is_empty() {
            0.0
        } else {
            included.iter().map(|m| f(m)).sum::<f64>() / included.len() as f64
        }
    };
    let aucs: Vec<f64> = included.iter().filter_map(|m| m.roc_auc).collect();
    let correct = y.iter().zip(&pred).filter(|(t, p)| t == p).count();
    Ok(MetricsBundle {
        precision: mean(&|m| m.precision),
        recall: mean(&|m| m.recall),
        f1: mean(&|m| m.f1),
        roc_auc: if aucs.is_empty() {
            None
        } else {
            Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
        },
        accuracy: correct as f64 / n as f64,
        n,
        absent_from_test: per_class[..c]
            .iter()
            .filter(|m| m.support == 0)
            .map(|m| m.class.clone())
            .collect(),
        absent_from_train: universe[c..].to_vec(),
        per_class,
    })
}

pub fn evaluate(model: &Model, test: &Table) -> Result<MetricsBundle> {
    let proba = model.predict_proba(test)?;
    let truth = model.encoder().labels(test)?;
    metrics_from_scores(model.classes(), &truth, &proba)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStability {
    pub metric: String,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub stable: bool,
}

/// Stable iff `max − min ≤ band` (with a 1e-12 allowance for rounding).
pub fn metric_stability(metric: &str, values: &[f64], band: f64) -> MetricStability {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if values.is_empty() { 0.0 } else { max - min };
    MetricStability {
        metric: metric.to_string(),
        min,
        max,
        range,
        stable: range <= band + 1e-12,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub classifier: String,
    pub k: usize,
    pub stability_band: f64,
    pub seed: u64,
    pub folds: Vec<MetricsBundle>,
    pub stability: Vec<MetricStability>,
}

impl CvResult {
    pub fn all_stable(&self) -> bool {
        self.stability.iter().all(|s| s.stable)
    }
}

/// Stratified k-fold evaluation with a per-metric stability flag.
pub fn cross_validate(
    t: &Table,
    spec: &ClassifierSpec,
    k: usize,
    stability_band: f64,
    seed: u64,
) -> Result<CvResult> {
    let folds = stratified_kfold(t, k, rng::derive(seed, "cv-folds"))?;
    let mut results = Vec::with_capacity(k);
    for (i, f) in folds.iter().enumerate() {
        let fold_spec = spec.reseeded(rng::derive(seed, &format!("cv-model-{i}")));
        let model = fold_spec.train(&t.select_rows(&f.train))?;
        results.push(evaluate(&model, &t.select_rows(&f.validation))?);
    }
    let mut stability = Vec::new();
    let series: [(&str, fn(&MetricsBundle) -> Option<f64>); 4] = [
        ("precision", |m| Some(m.precision)),
        ("recall", |m| Some(m.recall)),
        ("f1", |m| Some(m.f1)),
        ("roc_auc", |m| m.roc_auc),
    ];
    for (name, get) in series {
        let values: Option<Vec<f64>> = results.iter().map(get).collect();
        if let Some(v) = values {
            stability.push(metric_stability(name, &v, stability_band));
        }
    }
    Ok(CvResult {
        classifier: spec.name().to_string(),
        k,
        stability_band,
        seed,
        folds: results,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ForestParams;
    use crate::table::{ColumnData, ColumnSchema};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn hand_confusion_matrix() {
        // predictions [A, A, B], truth [A, B, B]
        let proba = [0.9, 0.1, 0.8, 0.2, 0.3, 0.7];
        let m = metrics_from_scores(&s(&["A", "B"]), &s(&["A", "B", "B"]), &proba).unwrap();
        let a = m.class("A").unwrap();
        let b = m.class("B").unwrap();
        assert_eq!((a.precision, a.recall), (0.5, 1.0));
        assert_eq!((b.precision, b.recall), (1.0, 0.5));
        assert!((a.f1 - 2.0 / 3.0).abs() < 1e-15 && (b.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_uninformative() {
        let proba = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let m = metrics_from_scores(&s(&["A", "B"]), &s(&["A", "B", "A"]), &proba).unwrap();
        assert_eq!(
            (m.precision, m.recall, m.f1, m.roc_auc),
            (1.0, 1.0, 1.0, Some(1.0))
        );
        let flat = [0.5; 6];
        let m = metrics_from_scores(&s(&["A", "B"]), &s(&["A", "B", "A"]), &flat).unwrap();
        assert_eq!(m.roc_auc, Some(0.5));
    }

    #[test]
    fn absent_classes_are_listed_and_excluded() {
        let proba = [0.6, 0.3, 0.1, 0.2, 0.7, 0.1];
        let m = metrics_from_scores(&s(&["A", "B", "C"]), &s(&["A", "Z"]), &proba).unwrap();
        assert_eq!(m.absent_from_test, s(&["B", "C"]));
        assert_eq!(m.absent_from_train, s(&["Z"]));
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn auc_matches_pair_counting() {
        let scores = [0.1, 0.4, 0.4, 0.8, 0.4, 0.2];
        let pos = [false, true, false, true, true, false];
        let mut num = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if pos[i] && !pos[j] {
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert_eq!(roc_auc(&scores, &pos), Some(num / 9.0));
        assert_eq!(roc_auc(&scores, &[true; 6]), None);
    }

    #[test]
    fn stability_band_rule() {
        assert!(!metric_stability("f1", &[0.90, 0.95], 0.04).stable);
        assert!(metric_stability("f1", &[0.96, 0.99], 0.04).stable);
        assert!(metric_stability("f1", &[1.0, 1.0, 1.0], 0.04).stable);
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let n = 100;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    i as f64
                } else {
                    -(i as f64) - 50.0
                }
            })
            .collect();
        let y: Vec<&str> = x
            .iter()
            .map(|&v| if v < 0.0 { "neg" } else { "pos" })
            .collect();
        let t = Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(x)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&y)),
        ])
        .unwrap();
        let spec = ClassifierSpec::RandomForest(ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        });
        let cv = cross_validate(&t, &spec, 10, 0.04, 3).unwrap();
        assert_eq!(cv.folds.len(), 10);
        assert!(
            cv.all_stable(),
            "{:?}",
            cv.folds
                .iter()
                .map(|f| (f.f1, f.roc_auc))
                .collect::<Vec<_>>()
        );
        assert!(cv.folds.iter().all(|f| f.f1 == 1.0));
    }
}
