use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::encode::{Design, FeatureEncoder};
use crate::error::Result;
use crate::rng::{self, Rng};
use crate::table::Table;

/// Above this many distinct values a numeric feature is only split at
/// `QUANTILE_CANDIDATES` quantile positions.
const MAX_EXACT_UNIQUE: usize = 256;
const QUANTILE_CANDIDATES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `⌊√d⌋` (at least 1).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 12,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    /// `x[feature] ≤ threshold` goes left.
    Numeric {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `x[feature] == category` goes left.
    Category {
        feature: usize,
        category: usize,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub depth: usize,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Numeric {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Category {
                    feature,
                    category,
                    left,
                    right,
                } => {
                    i = if x[*feature] == *category as f64 {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub encoder: FeatureEncoder,
    pub params: ForestParams,
    pub features_per_split: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean over trees of the leaf class frequencies, row-major `n × C`.
    pub fn predict_proba(&self, t: &Table) -> Result<Vec<f64>> {
        let design = self.encoder.design(t)?;
        let c = self.encoder.classes().len();
        let mut out = vec![0.0; design.n * c];
        for i in 0..design.n {
            let x = design.row(i);
            let o = &mut out[i * c..(i + 1) * c];
            for tree in &self.trees {
                let counts = tree.leaf(x);
                let total: usize = counts.iter().sum();
                for (p, &k) in o.iter_mut().zip(counts) {
                    *p += k as f64 / total as f64;
                }
            }
            o.iter_mut().for_each(|p| *p /= self.trees.len() as f64);
        }
        Ok(out)
    }
}

struct Builder<'a> {
    x: &'a Design,
    y: &'a [usize],
    n_classes: usize,
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    depth: usize,
}

struct Split {
    score: f64,
    node: Node,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        self.depth = self.depth.max(depth);
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return id;
        }
        let parent = sum_sq(&counts) / rows.len() as f64;
        let mut best: Option<Split> = None;
        for f in index::sample(rng, self.x.d, self.mtry) {
            let cand = match self.x.arity[f] {
                None => self.numeric_split(&rows, f),
                Some(k) => self.category_split(&rows, f, k),
            };
            if let Some(s) = cand {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(best) = best else { return id };
        // zero-gain splits are allowed, they can unlock XOR-like structure below
        if best.score < parent - 1e-12 * parent {
            return id;
        }
        let goes_left = |r: usize| {
            let x = self.x.row(r);
            match &best.node {
                Node::Numeric {
                    feature, threshold, ..
                } => x[*feature] <= *threshold,
                Node::Category {
                    feature, category, ..
                } => x[*feature] == *category as f64,
                Node::Leaf { .. } => unreachable!(),
            }
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| goes_left(r));
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = match best.node {
            Node::Numeric {
                feature, threshold, ..
            } => Node::Numeric {
                feature,
                threshold,
                left,
                right,
            },
            Node::Category {
                feature, category, ..
            } => Node::Category {
                feature,
                category,
                left,
                right,
            },
            Node::Leaf { .. } => unreachable!(),
        };
        id
    }

    fn numeric_split(&self, rows: &[usize], f: usize) -> Option<Split> {
        let d = self.x.d;
        let mut pairs: Vec<(f64, usize)> = rows
            .iter()
            .map(|&r| (self.x.data[r * d + f], self.y[r]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = pairs.len();
        let boundary = |k: usize| pairs[k - 1].0 < pairs[k].0;
        let mut candidates: Vec<usize> = (1..m).filter(|&k| boundary(k)).collect();
        if candidates.len() + 1 > MAX_EXACT_UNIQUE {
            let mut picked = Vec::with_capacity(QUANTILE_CANDIDATES);
            for i in 1..=QUANTILE_CANDIDATES {
                let target = i * m / (QUANTILE_CANDIDATES + 1);
                let pos = candidates.partition_point(|&k| k < target.max(1));
                if let Some(&k) = candidates.get(pos) {
                    if picked.last() != Some(&k) {
                        picked.push(k);
                    }
                }
            }
            candidates = picked;
        }
        let min_leaf = self.params.min_leaf;
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for &(_, c) in &pairs {
            right[c] += 1;
        }
        let (mut sq_l, mut sq_r) = (0.0, sum_sq(&right));
        let mut best: Option<(f64, usize)> = None;
        let mut next = 0;
        for k in 1..m {
            let c = pairs[k - 1].1;
            sq_l += 2.0 * left[c] as f64 + 1.0;
            sq_r -= 2.0 * right[c] as f64 - 1.0;
            left[c] += 1;
            right[c] -= 1;
            if next < candidates.len() && candidates[next] == k {
                next += 1;
                if k < min_leaf || m - k < min_leaf {
                    continue;
                }
                let score = sq_l / k as f64 + sq_r / (m - k) as f64;
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, k));
                }
            }
        }
        best.map(|(score, k)| {
            let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            Split {
                score,
                node: Node::Numeric {
                    feature: f,
                    threshold,
                    left: 0,
                    right: 0,
                },
            }
        })
    }

    fn category_split(&self, rows: &[usize], f: usize, arity: usize) -> Option<Split> {
        let d = self.x.d;
        let mut by_cat = vec![vec![0usize; self.n_classes]; arity];
        let mut size = vec![0usize; arity];
        let mut total = vec![0usize; self.n_classes];
        for &r in rows {
            let v = self.x.data[r * d + f];
            total[self.y[r]] += 1;
            if v >= 0.0 {
                by_cat[v as usize][self.y[r]] += 1;
                size[v as usize] += 1;
            }
        }
        let m = rows.len();
        let mut best: Option<(f64, usize)> = None;
        for cat in 0..arity {
            let nl = size[cat];
            if nl < self.params.min_leaf.max(1) || m - nl < self.params.min_leaf.max(1) {
                continue;
            }
            let rest: Vec<usize> = total.iter().zip(&by_cat[cat]).map(|(t, l)| t - l).collect();
            let score = sum_sq(&by_cat[cat]) / nl as f64 + sum_sq(&rest) / (m - nl) as f64;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, cat));
            }
        }
        best.map(|(score, category)| Split {
            score,
            node: Node::Category {
                feature: f,
                category,
                left: 0,
                right: 0,
            },
        })
    }
}

fn sum_sq(c: &[usize]) -> f64 {
    c.iter().map(|&k| (k * k) as f64).sum()
}

pub fn train_forest(train: &Table, hp: &ForestParams) -> Result<ForestModel> {
    let encoder = FeatureEncoder::fit(train)?;
    let y = encoder.targets(train)?;
    let x = encoder.design(train)?;
    let d = x.d;
    let mtry = hp
        .features_per_split
        .unwrap_or((d as f64).sqrt().floor() as usize)
        .clamp(1.min(d), d);
    let n = x.n;
    let mut trees = Vec::with_capacity(hp.n_trees);
    for t in 0..hp.n_trees {
        let mut rng = rng::stream(hp.seed, t as u64);
        let rows: Vec<usize> = if hp.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut b = Builder {
            x: &x,
            y: &y,
            n_classes: encoder.classes().len(),
            params: hp,
            mtry,
            nodes: Vec::new(),
            depth: 0,
        };
        b.build(rows, 0, &mut rng);
        trees.push(Tree {
            nodes: b.nodes,
            depth: b.depth,
        });
    }
    Ok(ForestModel {
        encoder,
        params: hp.clone(),
        features_per_split: mtry,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnData, ColumnSchema};

    fn xor_table() -> Table {
        let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..50 {
            for (u, v) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                a.push(u);
                b.push(v);
                y.push(if (u == 1.0) != (v == 1.0) {
                    "one"
                } else {
                    "zero"
                });
            }
        }
        Table::from_columns(vec![
            (ColumnSchema::numeric("a"), ColumnData::Numeric(a)),
            (ColumnSchema::numeric("b"), ColumnData::Numeric(b)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&y)),
        ])
        .unwrap()
    }

    fn accuracy(m: &ForestModel, t: &Table) -> f64 {
        let model = super::super::Model::Forest(m.clone());
        let pred = model.predict(t).unwrap();
        let truth = m.encoder.targets(t).unwrap();
        pred.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
    }

    #[test]
    fn xor_is_learned() {
        let t = xor_table();
        let hp = ForestParams {
            max_depth: 3,
            seed: 4,
            ..ForestParams::default()
        };
        let m = train_forest(&t, &hp).unwrap();
        assert!(accuracy(&m, &t) >= 0.95);
        assert!(m.trees.iter().all(|t| t.depth <= 3));
        assert_eq!(m, train_forest(&t, &hp).unwrap());
    }

    #[test]
    fn pure_data_gives_stumps() {
        let t = Table::from_columns(vec![
            (
                ColumnSchema::numeric("a"),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0]),
            ),
            (
                ColumnSchema::label("y"),
                ColumnData::from_strings(&["k", "k", "k"]),
            ),
        ])
        .unwrap();
        let m = train_forest(&t, &ForestParams::default()).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(m.predict_proba(&t).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn categorical_one_vs_rest_and_min_leaf() {
        let colors = ["r", "g", "b", "g"];
        let mut c = Vec::new();
        let mut y = Vec::new();
        for i in 0..80 {
            c.push(colors[i % 4]);
            y.push(if colors[i % 4] == "g" { "G" } else { "other" });
        }
        let t = Table::from_columns(vec![
            (ColumnSchema::categorical("c"), ColumnData::from_strings(&c)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&y)),
        ])
        .unwrap();
        let hp = ForestParams {
            min_leaf: 5,
            n_trees: 10,
            ..ForestParams::default()
        };
        let m = train_forest(&t, &hp).unwrap();
        assert_eq!(accuracy(&m, &t), 1.0);
        for tree in &m.trees {
            for node in &tree.nodes {
                if let Node::Leaf { counts } = node {
                    assert!(counts.iter().sum::<usize>() >= 5);
                }
            }
        }
        for row in m.predict_proba(&t).unwrap().chunks(2) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn many_unique_values_use_quantile_candidates() {
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<&str> = (0..n).map(|i| if i < 700 { "lo" } else { "hi" }).collect();
        let t = Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(x)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&y)),
        ])
        .unwrap();
        let hp = ForestParams {
            n_trees: 5,
            bootstrap: false,
            ..ForestParams::default()
        };
        let m = train_forest(&t, &hp).unwrap();
        assert!(accuracy(&m, &t) > 0.99);
    }
}
