//! Synthetic data generators: a per-class Gaussian-mixture sampler and an
//! MLP GAN trainer with vanilla, conditional, Wasserstein and f-GAN
//! objectives. Both generate numeric columns in robust-scaled space and
//! draw categorical feature columns from per-class empirical frequencies.

mod gan;
mod gmm;
pub mod nn;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::table::{ColumnData, ColumnKind, ColumnRole, ColumnSchema, Table};

pub use gan::{
    critic_objective, gan_sample, generator_objective, gradient_penalty, load_generator, train_gan,
    train_gan_traced, vanilla_gan_risk, write_trace_csv, CriticEval, EpochSummary, GanGenerator,
    GanSpec, Init, Objective, TraceStep, TrainTrace, MODEL_VERSION,
};
pub use gmm::{fit_gmm_sampler, sample, ClassMixture, Component, GmmClassSampler};

/// Class proportions used when sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proportions {
    MatchReal,
    Uniform,
}

impl std::str::FromStr for Proportions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "match-real" | "match_real" | "real" => Ok(Proportions::MatchReal),
            "uniform" => Ok(Proportions::Uniform),
            other => Err(Error::Unsupported(format!("proportions `{other}`"))),
        }
    }
}

/// Splits `n` into integer counts proportional to `weights` by the
/// largest-remainder rule (ties go to the lower index).
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Schema and dictionaries of a training table, used to emit tables of the
/// same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableTemplate {
    pub columns: Vec<ColumnSchema>,
    /// Dictionary for each categorical column (label included), schema order.
    pub dictionaries: Vec<Vec<String>>,
}

impl TableTemplate {
    pub fn of(t: &Table) -> Self {
        let dictionaries = (0..t.n_cols())
            .filter_map(|i| t.categorical_at(i).map(|c| c.dictionary().to_vec()))
            .collect();
        Self {
            columns: t.schema().to_vec(),
            dictionaries,
        }
    }

    pub fn numeric_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Numeric)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Position of the label among the categorical columns.
    fn label_slot(&self) -> Option<usize> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Categorical)
            .position(|c| c.role == ColumnRole::Label)
    }

    pub fn label_dictionary(&self) -> Option<&[String]> {
        self.label_slot().map(|s| self.dictionaries[s].as_slice())
    }

    /// `numeric` is row-major over the numeric columns; `categorical` holds
    /// one code vector per categorical column in schema order.
    pub fn build(&self, n: usize, numeric: Vec<f64>, categorical: Vec<Vec<u32>>) -> Result<Table> {
        let p = self.numeric_names().len();
        if numeric.len() != n * p || categorical.len() != self.dictionaries.len() {
            return Err(Error::ShapeMismatch(
                "generated block does not fit the schema".into(),
            ));
        }
        let mut cols = Vec::with_capacity(self.columns.len());
        let (mut j, mut k) = (0, 0);
        let mut categorical = categorical.into_iter();
        for s in &self.columns {
            let data = match s.kind {
                ColumnKind::Numeric => {
                    let v = (0..n).map(|r| numeric[r * p + j]).collect();
                    j += 1;
                    ColumnData::Numeric(v)
                }
                ColumnKind::Categorical => {
                    let codes = categorical.next().expect("length checked");
                    let dictionary = self.dictionaries[k].clone();
                    k += 1;
                    ColumnData::Categorical { codes, dictionary }
                }
            };
            cols.push((s.clone(), data));
        }
        Table::from_columns(cols)
    }
}

/// Per-group empirical frequencies of every categorical feature column.
/// Groups are label codes, or a single group for unlabeled tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFrequencies {
    /// `[group][feature column][category]` counts.
    pub counts: Vec<Vec<Vec<usize>>>,
    /// Slot of each feature column among the template's categorical columns.
    pub slots: Vec<usize>,
}

impl CategoricalFrequencies {
    pub fn fit(t: &Table) -> Self {
        let label = t.label().ok();
        let n_groups = label.map_or(1, |l| l.dictionary().len());
        let group = |r: usize| label.map_or(0, |l| l.codes()[r] as usize);
        let mut slots = Vec::new();
        let mut per_col = Vec::new();
        let mut slot = 0;
        for i in 0..t.n_cols() {
            if let Some(c) = t.categorical_at(i) {
                if t.schema()[i].role == ColumnRole::Feature {
                    let mut counts = vec![vec![0usize; c.dictionary().len()]; n_groups];
                    for (r, &code) in c.codes().iter().enumerate() {
                        counts[group(r)][code as usize] += 1;
                    }
                    per_col.push(counts);
                    slots.push(slot);
                }
                slot += 1;
            }
        }
        let counts = (0..n_groups)
            .map(|g| per_col.iter().map(|c| c[g].clone()).collect())
            .collect();
        Self { counts, slots }
    }

    /// Draws one row of codes for `group` into `out` (indexed by slot). A
    /// group without observations falls back to the pooled frequencies.
    pub fn draw(&self, group: usize, rng: &mut Rng, out: &mut [Vec<u32>]) {
        for (j, &slot) in self.slots.iter().enumerate() {
            let own = &self.counts[group][j];
            let pooled: Vec<usize>;
            let w = if own.iter().any(|&c| c > 0) {
                own
            } else {
                pooled = (0..own.len())
                    .map(|k| self.counts.iter().map(|g| g[j][k]).sum())
                    .collect();
                &pooled
            };
            let code = match WeightedIndex::new(w) {
                Ok(d) => d.sample(rng) as u32,
                Err(_) => 0,
            };
            out[slot].push(code);
        }
    }
}

/// A fitted generator of either kind, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorModel {
    Gmm(GmmClassSampler),
    Gan(GanGenerator),
}

impl GeneratorModel {
    pub fn name(&self) -> String {
        match self {
            GeneratorModel::Gmm(s) => format!("gmm(k={})", s.k),
            GeneratorModel::Gan(g) => g.spec.objective.name().to_string(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: GeneratorModel = serde_json::from_str(&text)?;
        if let GeneratorModel::Gan(g) = &model {
            if g.version != MODEL_VERSION {
                return Err(Error::Unsupported(format!(
                    "generator model version {}",
                    g.version
                )));
            }
        }
        Ok(model)
    }

    /// Draws `n` rows. For a labeled GAN the label column is filled by
    /// largest-remainder rounding of the requested proportions.
    pub fn sample(&self, n: usize, proportions: Proportions, seed: u64) -> Result<Table> {
        match self {
            GeneratorModel::Gmm(s) => sample(s, n, proportions, seed),
            GeneratorModel::Gan(g) => {
                let Some(dict) = g.template.label_dictionary() else {
                    return gan_sample(g, n, None, seed);
                };
                let weights = match proportions {
                    Proportions::MatchReal => g.label_proportions.clone().unwrap_or_default(),
                    Proportions::Uniform => vec![1.0; dict.len()],
                };
                let counts = largest_remainder(n, &weights);
                let labels: Vec<String> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(c, &k)| std::iter::repeat_n(dict[c].clone(), k))
                    .collect();
                gan_sample(g, n, Some(&labels), seed)
            }
        }
    }
}
