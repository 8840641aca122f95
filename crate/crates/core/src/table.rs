//! Column-typed tabular data.
//!
//! Numeric columns live in one row-major buffer; categorical columns are
//! dictionary-encoded `u32` codes. Tables are immutable once built; every
//! transformation returns a new table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            role: ColumnRole::Feature,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            role: ColumnRole::Feature,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            role: ColumnRole::Label,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalColumn {
    codes: Vec<u32>,
    dictionary: Vec<String>,
}

impl CategoricalColumn {
    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn dictionary(&self) -> &[String] {
        &self.dictionary
    }

    pub fn value(&self, row: usize) -> &str {
        &self.dictionary[self.codes[row] as usize]
    }

    /// Occurrence count per dictionary entry.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dictionary.len()];
        for &c in &self.codes {
            counts[c as usize] += 1;
        }
        counts
    }
}

/// Column payload used to build a [`Table`].
#[derive(Clone, Debug)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical {
        codes: Vec<u32>,
        dictionary: Vec<String>,
    },
}

impl ColumnData {
    /// Encodes string values with a first-appearance dictionary.
    pub fn from_strings<S: AsRef<str>>(values: &[S]) -> Self {
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut dictionary = Vec::new();
        let mut codes = Vec::with_capacity(values.len());
        for v in values {
            let v = v.as_ref();
            let code = *index.entry(v).or_insert_with(|| {
                dictionary.push(v.to_string());
                (dictionary.len() - 1) as u32
            });
            codes.push(code);
        }
        ColumnData::Categorical { codes, dictionary }
    }

    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }
}

/// Strided, borrowed view of one numeric column.
#[derive(Clone, Copy, Debug)]
pub struct NumericColumn<'a> {
    data: &'a [f64],
    offset: usize,
    stride: usize,
    len: usize,
}

impl<'a> NumericColumn<'a> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, row: usize) -> f64 {
        self.data[row * self.stride + self.offset]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + 'a {
        let (data, offset, stride) = (self.data, self.offset, self.stride);
        (0..self.len).map(move |r| data[r * stride + offset])
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ColumnView<'a> {
    Numeric(NumericColumn<'a>),
    Categorical(&'a CategoricalColumn),
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Numeric(usize),
    Categorical(usize),
}

#[derive(Clone, Debug)]
pub struct Table {
    schema: Vec<ColumnSchema>,
    slots: Vec<Slot>,
    n_rows: usize,
    n_numeric: usize,
    numeric: Vec<f64>,
    categorical: Vec<CategoricalColumn>,
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.n_rows == other.n_rows
            && self.numeric == other.numeric
            && self.categorical == other.categorical
    }
}

impl Table {
    /// Builds a table from per-column payloads, checking every invariant.
    pub fn from_columns(columns: Vec<(ColumnSchema, ColumnData)>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |(_, d)| d.len());
        let mut seen = HashMap::new();
        let mut labels = 0;
        for (i, (s, d)) in columns.iter().enumerate() {
            if seen.insert(s.name.as_str(), i).is_some() {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column `{}`",
                    s.name
                )));
            }
            if d.len() != n_rows {
                return Err(Error::InvalidSchema(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    s.name,
                    d.len()
                )));
            }
            match (s.kind, d) {
                (ColumnKind::Numeric, ColumnData::Numeric(v)) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::ParseError {
                            row,
                            column: s.name.clone(),
                            content: v[row].to_string(),
                        });
                    }
                }
                (ColumnKind::Categorical, ColumnData::Categorical { codes, dictionary }) => {
                    if codes.iter().any(|&c| c as usize >= dictionary.len()) {
                        return Err(Error::InvalidSchema(format!(
                            "column `{}` has a code outside its dictionary",
                            s.name
                        )));
                    }
                }
                _ => return Err(Error::SchemaMismatch(s.name.clone())),
            }
            if s.role == ColumnRole::Label {
                labels += 1;
                if s.kind != ColumnKind::Categorical {
                    return Err(Error::InvalidSchema(format!(
                        "label column `{}` must be categorical",
                        s.name
                    )));
                }
            }
        }
        if labels > 1 {
            return Err(Error::InvalidSchema("more than one label column".into()));
        }

        let n_numeric = columns
            .iter()
            .filter(|(s, _)| s.kind == ColumnKind::Numeric)
            .count();
        let mut numeric = vec![0.0; n_rows * n_numeric];
        let mut categorical = Vec::new();
        let mut slots = Vec::with_capacity(columns.len());
        let mut schema = Vec::with_capacity(columns.len());
        let mut j = 0;
        for (s, d) in columns {
            match d {
                ColumnData::Numeric(v) => {
                    for (r, x) in v.into_iter().enumerate() {
                        numeric[r * n_numeric + j] = x;
                    }
                    slots.push(Slot::Numeric(j));
                    j += 1;
                }
                ColumnData::Categorical { codes, dictionary } => {
                    slots.push(Slot::Categorical(categorical.len()));
                    categorical.push(CategoricalColumn { codes, dictionary });
                }
            }
            schema.push(s);
        }
        Ok(Self {
            schema,
            slots,
            n_rows,
            n_numeric,
            numeric,
            categorical,
        })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s.name == name)
    }

    pub fn label_index(&self) -> Option<usize> {
        self.schema.iter().position(|s| s.role == ColumnRole::Label)
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_index().map(|i| self.schema[i].name.as_str())
    }

    /// The label column; errors when the table is unlabeled.
    pub fn label(&self) -> Result<&CategoricalColumn> {
        let i = self.label_index().ok_or(Error::NoLabelColumn)?;
        Ok(self.categorical_at(i).expect("label is categorical"))
    }

    pub fn column_view(&self, name: &str) -> Result<ColumnView<'_>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.view_at(i))
    }

    pub fn view_at(&self, col: usize) -> ColumnView<'_> {
        match self.slots[col] {
            Slot::Numeric(j) => ColumnView::Numeric(NumericColumn {
                data: &self.numeric,
                offset: j,
                stride: self.n_numeric,
                len: self.n_rows,
            }),
            Slot::Categorical(j) => ColumnView::Categorical(&self.categorical[j]),
        }
    }

    pub fn numeric_at(&self, col: usize) -> Option<NumericColumn<'_>> {
        match self.view_at(col) {
            ColumnView::Numeric(c) => Some(c),
            ColumnView::Categorical(_) => None,
        }
    }

    pub fn categorical_at(&self, col: usize) -> Option<&CategoricalColumn> {
        match self.view_at(col) {
            ColumnView::Categorical(c) => Some(c),
            ColumnView::Numeric(_) => None,
        }
    }

    /// Number of numeric columns.
    pub fn n_numeric(&self) -> usize {
        self.n_numeric
    }

    /// Schema indices of the numeric columns, in schema order.
    pub fn numeric_indices(&self) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&i| matches!(self.slots[i], Slot::Numeric(_)))
            .collect()
    }

    /// Schema indices of categorical columns that are not the label.
    pub fn categorical_feature_indices(&self) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&i| {
                matches!(self.slots[i], Slot::Categorical(_))
                    && self.schema[i].role == ColumnRole::Feature
            })
            .collect()
    }

    /// Numeric values of one row, in numeric-column order.
    pub fn numeric_row(&self, row: usize) -> &[f64] {
        &self.numeric[row * self.n_numeric..(row + 1) * self.n_numeric]
    }

    /// Row-major numeric block (`n_rows × n_numeric`).
    pub fn numeric_matrix(&self) -> &[f64] {
        &self.numeric
    }

    /// Payload of one column, copied out.
    pub fn column_data(&self, col: usize) -> ColumnData {
        match self.view_at(col) {
            ColumnView::Numeric(c) => ColumnData::Numeric(c.to_vec()),
            ColumnView::Categorical(c) => ColumnData::Categorical {
                codes: c.codes.clone(),
                dictionary: c.dictionary.clone(),
            },
        }
    }

    fn into_columns(self) -> Vec<(ColumnSchema, ColumnData)> {
        (0..self.n_cols())
            .map(|i| (self.schema[i].clone(), self.column_data(i)))
            .collect()
    }

    /// Rows at `indices`, in that order; dictionaries are kept as is.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        let mut numeric = Vec::with_capacity(indices.len() * self.n_numeric);
        for &r in indices {
            numeric.extend_from_slice(self.numeric_row(r));
        }
        let categorical = self
            .categorical
            .iter()
            .map(|c| CategoricalColumn {
                codes: indices.iter().map(|&r| c.codes[r]).collect(),
                dictionary: c.dictionary.clone(),
            })
            .collect();
        Table {
            schema: self.schema.clone(),
            slots: self.slots.clone(),
            n_rows: indices.len(),
            n_numeric: self.n_numeric,
            numeric,
            categorical,
        }
    }

    /// Table restricted to the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Table> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let i = self
                .column_index(name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            cols.push((self.schema[i].clone(), self.column_data(i)));
        }
        Table::from_columns(cols)
    }

    /// Same table with the label column removed.
    pub fn without_label(&self) -> Table {
        let cols = self
            .clone()
            .into_columns()
            .into_iter()
            .filter(|(s, _)| s.role != ColumnRole::Label)
            .collect();
        Table::from_columns(cols).expect("subset of a valid table")
    }

    /// Marks `name` as the label column; numeric columns cannot be labels.
    pub fn with_label(&self, name: &str) -> Result<Table> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if self.schema[i].kind != ColumnKind::Categorical {
            return Err(Error::InvalidSchema(format!(
                "label column `{name}` must be categorical"
            )));
        }
        let mut t = self.clone();
        for (j, s) in t.schema.iter_mut().enumerate() {
            s.role = if j == i {
                ColumnRole::Label
            } else {
                ColumnRole::Feature
            };
        }
        Ok(t)
    }

    /// Appends a column to the right.
    pub fn with_column(&self, schema: ColumnSchema, data: ColumnData) -> Result<Table> {
        let mut cols = self.clone().into_columns();
        cols.push((schema, data));
        Table::from_columns(cols)
    }

    /// Replaces the numeric block with `numeric` (same shape).
    pub fn with_numeric(&self, numeric: Vec<f64>) -> Result<Table> {
        if numeric.len() != self.numeric.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} numeric values, got {}",
                self.numeric.len(),
                numeric.len()
            )));
        }
        if numeric.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInput("non-finite numeric value".into()));
        }
        let mut t = self.clone();
        t.numeric = numeric;
        Ok(t)
    }

    /// Proportion of each label category (every dictionary entry included).
    pub fn label_distribution(&self) -> Result<LabelDistribution> {
        let label = self.label()?;
        if self.n_rows == 0 {
            return Err(Error::DegenerateInput(
                "label distribution of an empty table".into(),
            ));
        }
        let n = self.n_rows as f64;
        Ok(LabelDistribution {
            categories: label.dictionary.clone(),
            proportions: label.counts().into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    /// Stacks `b` under `a`. Categorical dictionaries are unioned, `a`'s
    /// entries first, and `b`'s codes remapped.
    pub fn vertical_concat(a: &Table, b: &Table) -> Result<Table> {
        if a.n_cols() != b.n_cols() {
            let name = a
                .schema
                .iter()
                .zip(&b.schema)
                .find(|(x, y)| x != y)
                .map(|(x, _)| x.name.clone())
                .or_else(|| {
                    let longer = if a.n_cols() > b.n_cols() { a } else { b };
                    longer
                        .schema
                        .get(a.n_cols().min(b.n_cols()))
                        .map(|s| s.name.clone())
                })
                .unwrap_or_default();
            return Err(Error::SchemaMismatch(name));
        }
        if let Some((s, _)) = a.schema.iter().zip(&b.schema).find(|(x, y)| x != y) {
            return Err(Error::SchemaMismatch(s.name.clone()));
        }
        let mut numeric = Vec::with_capacity(a.numeric.len() + b.numeric.len());
        numeric.extend_from_slice(&a.numeric);
        numeric.extend_from_slice(&b.numeric);
        let categorical = a
            .categorical
            .iter()
            .zip(&b.categorical)
            .map(|(ca, cb)| {
                let mut dictionary = ca.dictionary.clone();
                let remap = union_dictionary(&mut dictionary, &cb.dictionary);
                let mut codes = ca.codes.clone();
                codes.extend(cb.codes.iter().map(|&c| remap[c as usize]));
                CategoricalColumn { codes, dictionary }
            })
            .collect();
        Ok(Table {
            schema: a.schema.clone(),
            slots: a.slots.clone(),
            n_rows: a.n_rows + b.n_rows,
            n_numeric: a.n_numeric,
            numeric,
            categorical,
        })
    }

    /// Same rows and values with every dictionary sorted and rows in
    /// lexicographic order (schema column order, categoricals by string).
    /// Two tables holding the same multiset of rows canonicalize identically.
    pub fn canonicalize(&self) -> Table {
        let mut t = self.clone();
        for c in &mut t.categorical {
            let mut order: Vec<usize> = (0..c.dictionary.len()).collect();
            order.sort_by(|&a, &b| c.dictionary[a].cmp(&c.dictionary[b]));
            let mut remap = vec![0u32; order.len()];
            for (new, &old) in order.iter().enumerate() {
                remap[old] = new as u32;
            }
            c.dictionary = order.iter().map(|&i| c.dictionary[i].clone()).collect();
            c.codes.iter_mut().for_each(|k| *k = remap[*k as usize]);
        }
        let mut rows: Vec<usize> = (0..t.n_rows).collect();
        rows.sort_by(|&a, &b| {
            for slot in &t.slots {
                let o = match *slot {
                    Slot::Numeric(j) => {
                        t.numeric[a * t.n_numeric + j].total_cmp(&t.numeric[b * t.n_numeric + j])
                    }
                    Slot::Categorical(j) => {
                        t.categorical[j].codes[a].cmp(&t.categorical[j].codes[b])
                    }
                };
                if o.is_ne() {
                    return o;
                }
            }
            std::cmp::Ordering::Equal
        });
        t.select_rows(&rows)
    }

    /// Hashable identity of a full row (numeric bit patterns and codes).
    pub(crate) fn row_key(&self, row: usize) -> Vec<u64> {
        let mut key: Vec<u64> = self.numeric_row(row).iter().map(|x| x.to_bits()).collect();
        key.extend(self.categorical.iter().map(|c| u64::from(c.codes[row])));
        key
    }
}

/// Appends entries of `other` missing from `dict`; returns the code map for
/// `other`'s codes into the merged dictionary.
pub(crate) fn union_dictionary(dict: &mut Vec<String>, other: &[String]) -> Vec<u32> {
    let mut index: HashMap<String, u32> = dict
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    other
        .iter()
        .map(|s| {
            *index.entry(s.clone()).or_insert_with(|| {
                dict.push(s.clone());
                (dict.len() - 1) as u32
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub categories: Vec<String>,
    pub proportions: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(categories: Vec<String>, proportions: Vec<f64>) -> Result<Self> {
        if categories.len() != proportions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} categories, {} proportions",
                categories.len(),
                proportions.len()
            )));
        }
        let total: f64 = proportions.iter().sum();
        if proportions.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "proportions must be nonnegative and sum to 1 (sum = {total})"
            )));
        }
        Ok(Self {
            categories,
            proportions,
        })
    }

    pub fn get(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.proportions[i])
    }

    /// Re-expresses `self` and `other` over the union of their categories
    /// (`self`'s order first, zeros filled in).
    pub fn align(&self, other: &LabelDistribution) -> (LabelDistribution, LabelDistribution) {
        let mut categories = self.categories.clone();
        let remap = union_dictionary(&mut categories, &other.categories);
        let mut p = self.proportions.clone();
        p.resize(categories.len(), 0.0);
        let mut q = vec![0.0; categories.len()];
        for (i, &j) in remap.iter().enumerate() {
            q[j as usize] += other.proportions[i];
        }
        (
            LabelDistribution {
                categories: categories.clone(),
                proportions: p,
            },
            LabelDistribution {
                categories,
                proportions: q,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Table {
        Table::from_columns(vec![
            (
                ColumnSchema::numeric("dur"),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0]),
            ),
            (
                ColumnSchema::label("Label"),
                ColumnData::from_strings(&["BENIGN", "DDoS", "BENIGN"]),
            ),
        ])
        .unwrap()
    }

    fn labels(values: &[&str]) -> Table {
        Table::from_columns(vec![(
            ColumnSchema::label("y"),
            ColumnData::from_strings(values),
        )])
        .unwrap()
    }

    #[test]
    fn column_view_retrieves_data() {
        let t = small();
        match t.column_view("dur").unwrap() {
            ColumnView::Numeric(c) => assert_eq!(c.to_vec(), vec![1.0, 2.0, 3.0]),
            _ => panic!("expected numeric"),
        }
        match t.column_view("Label").unwrap() {
            ColumnView::Categorical(c) => {
                assert_eq!(c.codes(), &[0, 1, 0]);
                assert_eq!(c.dictionary(), &["BENIGN".to_string(), "DDoS".to_string()]);
            }
            _ => panic!("expected categorical"),
        }
        assert!(matches!(
            t.column_view("nonexistent"),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn label_distribution_counts() {
        let d = labels(&["A", "A", "B", "B"]).label_distribution().unwrap();
        assert_eq!(d.proportions, vec![0.5, 0.5]);
        let d = labels(&["A", "A", "A", "B"]).label_distribution().unwrap();
        assert_eq!(d.get("A"), Some(0.75));
        assert_eq!(d.get("B"), Some(0.25));

        let t = Table::from_columns(vec![(
            ColumnSchema::label("y"),
            ColumnData::Categorical {
                codes: vec![0, 0],
                dictionary: vec!["A".into(), "B".into()],
            },
        )])
        .unwrap();
        let d = t.label_distribution().unwrap();
        assert_eq!(d.proportions, vec![1.0, 0.0]);

        let unlabeled = Table::from_columns(vec![(
            ColumnSchema::numeric("x"),
            ColumnData::Numeric(vec![1.0]),
        )])
        .unwrap();
        assert!(matches!(
            unlabeled.label_distribution(),
            Err(Error::NoLabelColumn)
        ));
    }

    #[test]
    fn concat_adds_rows_and_unions_dictionaries() {
        let a = labels(&["A", "B"]);
        let b = labels(&["C", "A", "A"]);
        let c = Table::vertical_concat(&a, &b).unwrap();
        assert_eq!(c.n_rows(), 5);
        let l = c.label().unwrap();
        assert_eq!(l.dictionary(), &["A", "B", "C"]);
        assert_eq!(l.codes(), &[0, 1, 2, 0, 0]);
    }

    #[test]
    fn concat_rejects_kind_mismatch() {
        let a = Table::from_columns(vec![(
            ColumnSchema::numeric("proto"),
            ColumnData::Numeric(vec![6.0]),
        )])
        .unwrap();
        let b = Table::from_columns(vec![(
            ColumnSchema::categorical("proto"),
            ColumnData::from_strings(&["tcp"]),
        )])
        .unwrap();
        match Table::vertical_concat(&a, &b) {
            Err(Error::SchemaMismatch(name)) => assert_eq!(name, "proto"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let a = small();
        let empty = a.select_rows(&[]);
        assert_eq!(Table::vertical_concat(&a, &empty).unwrap(), a);
    }

    #[test]
    fn invariants_are_enforced() {
        let bad_code = Table::from_columns(vec![(
            ColumnSchema::categorical("c"),
            ColumnData::Categorical {
                codes: vec![2],
                dictionary: vec!["a".into()],
            },
        )]);
        assert!(bad_code.is_err());
        let nan = Table::from_columns(vec![(
            ColumnSchema::numeric("x"),
            ColumnData::Numeric(vec![f64::NAN]),
        )]);
        assert!(nan.is_err());
        let ragged = Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(vec![1.0])),
            (
                ColumnSchema::numeric("y"),
                ColumnData::Numeric(vec![1.0, 2.0]),
            ),
        ]);
        assert!(ragged.is_err());
        let dup = Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(vec![1.0])),
            (ColumnSchema::numeric("x"), ColumnData::Numeric(vec![1.0])),
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn align_fills_missing_categories() {
        let p = LabelDistribution::new(vec!["A".into(), "B".into()], vec![0.5, 0.5]).unwrap();
        let q = LabelDistribution::new(vec!["C".into(), "A".into()], vec![0.25, 0.75]).unwrap();
        let (p2, q2) = p.align(&q);
        assert_eq!(p2.categories, vec!["A", "B", "C"]);
        assert_eq!(p2.proportions, vec![0.5, 0.5, 0.0]);
        assert_eq!(q2.proportions, vec![0.75, 0.0, 0.25]);
    }

    #[test]
    fn canonicalize_ignores_row_order() {
        let t = Table::from_columns(vec![
            (
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(vec![2.0, 1.0, 2.0]),
            ),
            (
                ColumnSchema::categorical("c"),
                ColumnData::from_strings(&["b", "a", "a"]),
            ),
        ])
        .unwrap();
        let shuffled = t.select_rows(&[2, 0, 1]);
        let rebuilt = Table::from_columns(vec![
            (
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(vec![2.0, 2.0, 1.0]),
            ),
            (
                ColumnSchema::categorical("c"),
                ColumnData::from_strings(&["a", "b", "a"]),
            ),
        ])
        .unwrap();
        assert_eq!(t.canonicalize(), shuffled.canonicalize());
        assert_eq!(t.canonicalize(), rebuilt.canonicalize());
        let c = t.canonicalize();
        assert_eq!(c.numeric_matrix(), &[1.0, 2.0, 2.0]);
        assert_eq!(c.categorical_at(1).unwrap().dictionary(), &["a", "b"]);
    }
}
