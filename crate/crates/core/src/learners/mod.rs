//! Classifiers used by the evaluation protocols: softmax logistic
//! regression (baseline) and a Gini random forest, plus cross-entropy
//! losses, macro metrics and stratified cross-validation.

mod encode;
mod forest;
mod logistic;
mod losses;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::table::Table;

pub use encode::{Design, FeatureEncoder};
pub use forest::{train_forest, ForestModel, ForestParams, Node, Tree};
pub use logistic::{logistic_objective, train_logistic, LogisticModel, LogisticParams};
pub use losses::{bce_loss, cce_loss};
pub use metrics::{
    cross_validate, evaluate, metric_stability, metrics_from_scores, roc_auc, ClassMetrics,
    CvResult, MetricStability, MetricsBundle,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Logistic(LogisticParams),
    RandomForest(ForestParams),
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic(_) => "logistic_regression",
            ClassifierSpec::RandomForest(_) => "random_forest",
        }
    }

    pub fn forest(seed: u64) -> Self {
        ClassifierSpec::RandomForest(ForestParams {
            seed,
            ..ForestParams::default()
        })
    }

    pub fn logistic() -> Self {
        ClassifierSpec::Logistic(LogisticParams::default())
    }

    /// Same spec with its seed replaced (logistic training is seed-free).
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            ClassifierSpec::Logistic(p) => ClassifierSpec::Logistic(p.clone()),
            ClassifierSpec::RandomForest(p) => {
                ClassifierSpec::RandomForest(ForestParams { seed, ..p.clone() })
            }
        }
    }

    pub fn train(&self, t: &Table) -> Result<Model> {
        Ok(match self {
            ClassifierSpec::Logistic(p) => Model::Logistic(train_logistic(t, p)?),
            ClassifierSpec::RandomForest(p) => Model::Forest(train_forest(t, p)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logistic(LogisticModel),
    Forest(ForestModel),
}

impl Model {
    pub fn encoder(&self) -> &FeatureEncoder {
        match self {
            Model::Logistic(m) => &m.encoder,
            Model::Forest(m) => &m.encoder,
        }
    }

    /// Class names in the column order of [`Model::predict_proba`].
    pub fn classes(&self) -> &[String] {
        self.encoder().classes()
    }

    /// Row-major `n × C` class probabilities.
    pub fn predict_proba(&self, t: &Table) -> Result<Vec<f64>> {
        match self {
            Model::Logistic(m) => m.predict_proba(t),
            Model::Forest(m) => m.predict_proba(t),
        }
    }

    /// Most probable class index per row, lowest index on ties.
    pub fn predict(&self, t: &Table) -> Result<Vec<usize>> {
        let c = self.classes().len();
        Ok(self.predict_proba(t)?.chunks(c).map(argmax).collect())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
