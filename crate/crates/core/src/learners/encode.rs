use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ColumnKind, ColumnRole, ColumnView, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Feature {
    Numeric {
        name: String,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
    },
}

/// Maps a labeled table to a numeric design matrix using the training
/// schema. Categorical features become category indices; values unseen at
/// fit time encode as `-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    features: Vec<Feature>,
    label: String,
    classes: Vec<String>,
}

/// Row-major `n × d` design matrix. `arity[j]` is `Some(k)` for a
/// categorical feature with `k` categories.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub n: usize,
    pub d: usize,
    pub data: Vec<f64>,
    pub arity: Vec<Option<usize>>,
}

impl Design {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

impl FeatureEncoder {
    /// Classes are the label values present in `train`, in dictionary order.
    pub fn fit(train: &Table) -> Result<Self> {
        let label = train.label()?;
        let counts = label.counts();
        let classes = label
            .dictionary()
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, _)| s.clone())
            .collect();
        let features = train
            .schema()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role == ColumnRole::Feature)
            .map(|(i, s)| match train.view_at(i) {
                ColumnView::Numeric(_) => Feature::Numeric {
                    name: s.name.clone(),
                },
                ColumnView::Categorical(c) => Feature::Categorical {
                    name: s.name.clone(),
                    categories: c.dictionary().to_vec(),
                },
            })
            .collect();
        Ok(Self {
            features,
            label: train.label_name().expect("labeled").to_string(),
            classes,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn label_name(&self) -> &str {
        &self.label
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn design(&self, t: &Table) -> Result<Design> {
        let n = t.n_rows();
        let d = self.features.len();
        let mut data = vec![0.0; n * d];
        let mut arity = Vec::with_capacity(d);
        for (j, f) in self.features.iter().enumerate() {
            let (name, kind) = match f {
                Feature::Numeric { name } => (name, ColumnKind::Numeric),
                Feature::Categorical { name, .. } => (name, ColumnKind::Categorical),
            };
            let col = t
                .column_index(name)
                .filter(|&i| t.schema()[i].kind == kind)
                .ok_or_else(|| Error::SchemaMismatch(name.clone()))?;
            match (f, t.view_at(col)) {
                (Feature::Numeric { .. }, ColumnView::Numeric(c)) => {
                    for (r, x) in c.iter().enumerate() {
                        data[r * d + j] = x;
                    }
                    arity.push(None);
                }
                (Feature::Categorical { categories, .. }, ColumnView::Categorical(c)) => {
                    let index: HashMap<&str, usize> = categories
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (s.as_str(), i))
                        .collect();
                    let remap: Vec<f64> = c
                        .dictionary()
                        .iter()
                        .map(|s| index.get(s.as_str()).map_or(-1.0, |&i| i as f64))
                        .collect();
                    for (r, &code) in c.codes().iter().enumerate() {
                        data[r * d + j] = remap[code as usize];
                    }
                    arity.push(Some(categories.len()));
                }
                _ => unreachable!("kind checked"),
            }
        }
        Ok(Design { n, d, data, arity })
    }

    /// Label values of `t` as strings.
    pub fn labels(&self, t: &Table) -> Result<Vec<String>> {
        let i = t
            .column_index(&self.label)
            .filter(|&i| t.schema()[i].kind == ColumnKind::Categorical)
            .ok_or_else(|| Error::SchemaMismatch(self.label.clone()))?;
        let c = t.categorical_at(i).expect("categorical");
        Ok((0..t.n_rows()).map(|r| c.value(r).to_string()).collect())
    }

    /// Training targets as class indices; every value must be a known class.
    pub(crate) fn targets(&self, t: &Table) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        self.labels(t)?
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::SchemaMismatch(self.label.clone()))
            })
            .collect()
    }
}
