//! CSV codec, schema hints, and the preprocessing steps applied before any
//! evaluation: de-duplication, robust scaling, and stratified splitting.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::table::{ColumnData, ColumnKind, ColumnRole, ColumnSchema, ColumnView, Table};

/// Explicit per-column schema, one `name,kind,role` line per column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaHint {
    pub columns: Vec<ColumnSchema>,
}

impl SchemaHint {
    pub fn of(table: &Table) -> Self {
        Self {
            columns: table.schema().to_vec(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() == 1 && rec[0].trim().is_empty() {
                continue;
            }
            if rec.len() != 3 {
                return Err(Error::InvalidSchema(format!(
                    "schema line {}: expected `name,kind,role`",
                    line + 1
                )));
            }
            let kind = match rec[1].trim().to_ascii_lowercase().as_str() {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                other => {
                    return Err(Error::InvalidSchema(format!("unknown kind `{other}`")));
                }
            };
            let role = match rec[2].trim().to_ascii_lowercase().as_str() {
                "feature" => ColumnRole::Feature,
                "label" => ColumnRole::Label,
                other => {
                    return Err(Error::InvalidSchema(format!("unknown role `{other}`")));
                }
            };
            columns.push(ColumnSchema {
                name: rec[0].to_string(),
                kind,
                role,
            });
        }
        Ok(Self { columns })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for c in &self.columns {
            let kind = match c.kind {
                ColumnKind::Numeric => "numeric",
                ColumnKind::Categorical => "categorical",
            };
            let role = match c.role {
                ColumnRole::Feature => "feature",
                ColumnRole::Label => "label",
            };
            w.write_record([c.name.as_str(), kind, role])
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReadOptions {
    pub schema_hint: Option<SchemaHint>,
    /// Column to mark as the label; it is always read as categorical.
    pub label: Option<String>,
}

pub fn read_csv(path: impl AsRef<Path>, opts: &ReadOptions) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(BufReader::new(file), opts)
}

pub fn read_csv_from<R: Read>(reader: R, opts: &ReadOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    if let Some(hint) = &opts.schema_hint {
        if let Some(c) = hint.columns.iter().find(|c| !header.contains(&c.name)) {
            return Err(Error::UnknownColumn(c.name.clone()));
        }
    }
    if let Some(label) = &opts.label {
        if !header.contains(label) {
            return Err(Error::UnknownColumn(label.clone()));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow(row));
        }
        for (j, v) in rec.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::MissingValue {
                    row,
                    column: header[j].clone(),
                });
            }
            cells[j].push(v.to_string());
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    for (name, values) in header.iter().zip(cells) {
        let hinted = opts.schema_hint.as_ref().and_then(|h| h.get(name));
        let is_label = opts.label.as_deref() == Some(name.as_str())
            || (opts.label.is_none() && hinted.is_some_and(|c| c.role == ColumnRole::Label));
        let role = if is_label {
            ColumnRole::Label
        } else {
            ColumnRole::Feature
        };
        let kind = if is_label {
            ColumnKind::Categorical
        } else if let Some(c) = hinted {
            c.kind
        } else {
            infer_kind(&values)
        };
        let data = match kind {
            ColumnKind::Numeric => ColumnData::Numeric(parse_numeric(name, &values)?),
            ColumnKind::Categorical => ColumnData::from_strings(&values),
        };
        columns.push((
            ColumnSchema {
                name: name.clone(),
                kind,
                role,
            },
            data,
        ));
    }
    Table::from_columns(columns)
}

/// Numeric iff every cell parses as a real. Cells that parse but overflow to
/// a non-finite value are left for [`parse_numeric`] to reject.
fn infer_kind(values: &[String]) -> ColumnKind {
    if values.iter().all(|v| v.trim().parse::<f64>().is_ok()) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

fn parse_numeric(name: &str, values: &[String]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| match v.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(Error::ParseError {
                row: i + 1,
                column: name.to_string(),
                content: v.clone(),
            }),
        })
        .collect()
}

pub fn write_csv(path: impl AsRef<Path>, table: &Table) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(file), table)
}

/// Writes the header and rows. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv_to<W: Write>(writer: W, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.schema().iter().map(|s| s.name.as_str()))?;
    let views: Vec<ColumnView<'_>> = (0..table.n_cols()).map(|i| table.view_at(i)).collect();
    let mut record: Vec<String> = Vec::with_capacity(views.len());
    for r in 0..table.n_rows() {
        record.clear();
        for v in &views {
            record.push(match v {
                ColumnView::Numeric(c) => format!("{}", c.get(r)),
                ColumnView::Categorical(c) => c.value(r).to_string(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads only the header line of a CSV file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    if line.trim().is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes());
    let rec = rdr.records().next().ok_or(Error::EmptyFile)??;
    Ok(rec.iter().map(str::to_string).collect())
}

/// Drops full-row duplicates, keeping first occurrences in order.
pub fn dedupe(t: &Table) -> Table {
    let mut seen = HashSet::with_capacity(t.n_rows());
    let keep: Vec<usize> = (0..t.n_rows())
        .filter(|&r| seen.insert(t.row_key(r)))
        .collect();
    if keep.len() == t.n_rows() {
        return t.clone();
    }
    t.select_rows(&keep)
}

/// Sample quantile by linear interpolation of order statistics (type 7).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerParams {
    pub columns: Vec<String>,
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
}

impl RobustScalerParams {
    pub fn is_constant(&self, j: usize) -> bool {
        self.iqr[j] == 0.0
    }

    fn divisor(&self, j: usize) -> f64 {
        if self.is_constant(j) {
            1.0
        } else {
            self.iqr[j]
        }
    }

    fn check(&self, t: &Table) -> Result<Vec<usize>> {
        let idx = t.numeric_indices();
        if idx.len() != self.columns.len() {
            let name = idx
                .iter()
                .map(|&i| t.schema()[i].name.clone())
                .find(|n| !self.columns.contains(n))
                .or_else(|| self.columns.get(idx.len()).cloned())
                .unwrap_or_default();
            return Err(Error::SchemaMismatch(name));
        }
        for (&i, name) in idx.iter().zip(&self.columns) {
            if &t.schema()[i].name != name {
                return Err(Error::SchemaMismatch(t.schema()[i].name.clone()));
            }
        }
        Ok(idx)
    }

    /// Scales one numeric row in place.
    pub fn scale_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - self.median[j]) / self.divisor(j);
        }
    }

    /// Maps one scaled row back to data scale in place.
    pub fn unscale_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = *x * self.divisor(j) + self.median[j];
        }
    }
}

/// Per-column median and IQR of the numeric columns of a training table.
pub fn fit_robust_scaler(train: &Table) -> Result<RobustScalerParams> {
    let idx = train.numeric_indices();
    if idx.is_empty() {
        return Err(Error::NoNumericColumns);
    }
    if train.n_rows() == 0 {
        return Err(Error::DegenerateInput(
            "cannot fit a scaler on zero rows".into(),
        ));
    }
    let mut columns = Vec::with_capacity(idx.len());
    let mut median = Vec::with_capacity(idx.len());
    let mut iqr = Vec::with_capacity(idx.len());
    for &i in &idx {
        let mut v = train.numeric_at(i).expect("numeric index").to_vec();
        v.sort_by(f64::total_cmp);
        columns.push(train.schema()[i].name.clone());
        median.push(quantile_sorted(&v, 0.5));
        iqr.push(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25));
    }
    Ok(RobustScalerParams {
        columns,
        median,
        iqr,
    })
}

/// `(x − median) / IQR`; constant columns are only centred.
pub fn apply_scaler(t: &Table, p: &RobustScalerParams) -> Result<Table> {
    p.check(t)?;
    let mut data = t.numeric_matrix().to_vec();
    if !p.columns.is_empty() {
        for row in data.chunks_mut(p.columns.len()) {
            p.scale_row(row);
        }
    }
    t.with_numeric(data)
}

pub fn invert_scaler(t: &Table, p: &RobustScalerParams) -> Result<Table> {
    p.check(t)?;
    let mut data = t.numeric_matrix().to_vec();
    if !p.columns.is_empty() {
        for row in data.chunks_mut(p.columns.len()) {
            p.unscale_row(row);
        }
    }
    t.with_numeric(data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub stratify_on: String,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(stratify_on: impl Into<String>, seed: u64) -> Self {
        Self {
            test_fraction: 0.2,
            stratify_on: stratify_on.into(),
            seed,
        }
    }
}

/// Group id per row for the stratification column.
fn strata(t: &Table, column: &str) -> Result<(Vec<u32>, usize)> {
    match t.column_view(column)? {
        ColumnView::Categorical(c) => Ok((c.codes().to_vec(), c.dictionary().len())),
        ColumnView::Numeric(c) => {
            let mut ids = std::collections::HashMap::new();
            let groups = c
                .iter()
                .map(|x| {
                    let n = ids.len() as u32;
                    *ids.entry(x.to_bits()).or_insert(n)
                })
                .collect();
            Ok((groups, ids.len()))
        }
    }
}

fn group_members(groups: &[u32], n_groups: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); n_groups];
    for (r, &g) in groups.iter().enumerate() {
        members[g as usize].push(r);
    }
    members
}

/// Row indices `(train, test)` for a stratified split over `groups`.
pub fn stratified_split_indices(
    groups: &[u32],
    n_groups: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (g, mut rows) in group_members(groups, n_groups).into_iter().enumerate() {
        let n_c = rows.len();
        let n_test = if n_c <= 1 {
            0
        } else {
            ((n_c as f64 * test_fraction).round_ties_even() as usize).min(n_c)
        };
        rows.shuffle(&mut rng::stream(seed, g as u64));
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified train/test split; `test` gets `round(n_c · fraction)` rows of
/// each class (ties to even), singleton classes stay in `train`.
pub fn stratified_split(t: &Table, s: &SplitSpec) -> Result<(Table, Table)> {
    let (groups, n_groups) = strata(t, &s.stratify_on)?;
    let (train, test) = stratified_split_indices(&groups, n_groups, s.test_fraction, s.seed)?;
    Ok((t.select_rows(&train), t.select_rows(&test)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold assignment over group ids. Each group's shuffled rows are
/// dealt round-robin, continuing from where the previous group stopped.
pub fn stratified_kfold_indices(
    groups: &[u32],
    n_groups: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    let n = groups.len();
    if k < 2 || k > n {
        return Err(Error::BadK { k, n_rows: n });
    }
    let mut fold_of = vec![0usize; n];
    let mut next = 0usize;
    for (g, mut rows) in group_members(groups, n_groups).into_iter().enumerate() {
        rows.shuffle(&mut rng::stream(seed, g as u64));
        for r in rows {
            fold_of[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&r| fold_of[r] == f);
            Fold { train, validation }
        })
        .collect())
}

/// Stratified k-fold over the label column.
pub fn stratified_kfold(t: &Table, k: usize, seed: u64) -> Result<Vec<Fold>> {
    let label = t.label()?;
    stratified_kfold_indices(label.codes(), label.dictionary().len(), k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Table> {
        read_csv_from(text.as_bytes(), &ReadOptions::default())
    }

    fn numeric(values: &[f64]) -> Table {
        Table::from_columns(vec![(
            ColumnSchema::numeric("x"),
            ColumnData::Numeric(values.to_vec()),
        )])
        .unwrap()
    }

    fn labeled(counts: &[(&str, usize)]) -> Table {
        let mut labels = Vec::new();
        let mut xs = Vec::new();
        for (name, n) in counts {
            for _ in 0..*n {
                xs.push(xs.len() as f64);
                labels.push(*name);
            }
        }
        Table::from_columns(vec![
            (ColumnSchema::numeric("x"), ColumnData::Numeric(xs)),
            (ColumnSchema::label("y"), ColumnData::from_strings(&labels)),
        ])
        .unwrap()
    }

    #[test]
    fn infers_kinds() {
        let t = read("a,b\n1,x\n2,y\n").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.schema()[0].kind, ColumnKind::Numeric);
        assert_eq!(t.schema()[1].kind, ColumnKind::Categorical);

        let t = read("v\n1\n2\nthree\n").unwrap();
        assert_eq!(t.schema()[0].kind, ColumnKind::Categorical);
    }

    #[test]
    fn rejects_overflow_and_missing() {
        assert!(matches!(
            read("a\n1\n1e309\n"),
            Err(Error::ParseError { row: 2, .. })
        ));
        assert!(matches!(
            read("a,b\n1,\n"),
            Err(Error::MissingValue { row: 1, .. })
        ));
        assert!(matches!(read("a,b\n1,2\n3\n"), Err(Error::RaggedRow(2))));
        assert!(matches!(read(""), Err(Error::EmptyFile)));
    }

    #[test]
    fn hint_and_label_override_inference() {
        let hint = SchemaHint::parse("code,categorical,feature\n").unwrap();
        let opts = ReadOptions {
            schema_hint: Some(hint),
            label: Some("y".into()),
        };
        let t = read_csv_from("code,y\n1,0\n2,1\n".as_bytes(), &opts).unwrap();
        assert_eq!(t.schema()[0].kind, ColumnKind::Categorical);
        assert_eq!(t.schema()[1], ColumnSchema::label("y"));
    }

    #[test]
    fn schema_hint_text_roundtrip() {
        let hint = SchemaHint {
            columns: vec![
                ColumnSchema::numeric("a,b"),
                ColumnSchema::categorical("c"),
                ColumnSchema::label("y"),
            ],
        };
        assert_eq!(SchemaHint::parse(&hint.to_text()).unwrap(), hint);
    }

    #[test]
    fn dedupe_keeps_first_occurrence() {
        let t = numeric(&[1.0, 1.0, 2.0]);
        assert_eq!(dedupe(&t).numeric_matrix(), &[1.0, 2.0]);
        let t = numeric(&[3.0, 1.0, 2.0]);
        assert_eq!(dedupe(&t), t);
        let t = numeric(&[4.0; 4]);
        assert_eq!(dedupe(&t).n_rows(), 1);
    }

    #[test]
    fn robust_scaler_type7() {
        let p = fit_robust_scaler(&numeric(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!((p.median[0], p.iqr[0]), (3.0, 2.0));
        let p = fit_robust_scaler(&numeric(&[1.0, 2.0])).unwrap();
        assert_eq!(p.median[0], 1.5);
        assert!((p.iqr[0] - 0.5).abs() < 1e-15);
        let p = fit_robust_scaler(&numeric(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!((p.median[0], p.iqr[0]), (5.0, 0.0));
        assert!(p.is_constant(0));
    }

    #[test]
    fn apply_scaler_values() {
        let p = fit_robust_scaler(&numeric(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        let s = apply_scaler(&numeric(&[3.0, 5.0]), &p).unwrap();
        assert_eq!(s.numeric_matrix(), &[0.0, 1.0]);
        let back = invert_scaler(&s, &p).unwrap();
        assert_eq!(back.numeric_matrix(), &[3.0, 5.0]);

        let c = fit_robust_scaler(&numeric(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(
            apply_scaler(&numeric(&[5.0]), &c).unwrap().numeric_matrix(),
            &[0.0]
        );

        let other = Table::from_columns(vec![(
            ColumnSchema::numeric("z"),
            ColumnData::Numeric(vec![1.0]),
        )])
        .unwrap();
        assert!(matches!(
            apply_scaler(&other, &p),
            Err(Error::SchemaMismatch(_))
        ));
        let labels_only = labeled(&[("a", 1)]).select_columns(&["y"]).unwrap();
        assert!(matches!(
            fit_robust_scaler(&labels_only),
            Err(Error::NoNumericColumns)
        ));
    }

    #[test]
    fn split_rounds_per_class() {
        let t = labeled(&[("a", 80), ("b", 20)]);
        let (train, test) = stratified_split(&t, &SplitSpec::new("y", 3)).unwrap();
        assert_eq!(test.n_rows(), 20);
        assert_eq!(train.n_rows(), 80);
        let d = test.label_distribution().unwrap();
        assert_eq!(d.proportions, vec![0.8, 0.2]);

        let t = labeled(&[("a", 10), ("solo", 1)]);
        let (train, test) = stratified_split(&t, &SplitSpec::new("y", 3)).unwrap();
        assert_eq!(test.label().unwrap().counts(), vec![2, 0]);
        assert_eq!(train.label().unwrap().counts(), vec![8, 1]);

        let again = stratified_split(&t, &SplitSpec::new("y", 3)).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(again.1, test);
        assert!(matches!(
            stratified_split(&t, &SplitSpec::new("nope", 3)),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn split_ties_round_to_even() {
        // 5 · 0.5 = 2.5 → 2, 7 · 0.5 = 3.5 → 4
        let t = labeled(&[("a", 5), ("b", 7)]);
        let mut s = SplitSpec::new("y", 0);
        s.test_fraction = 0.5;
        let (_, test) = stratified_split(&t, &s).unwrap();
        assert_eq!(test.label().unwrap().counts(), vec![2, 4]);
    }

    #[test]
    fn kfold_even_and_round_robin() {
        let t = labeled(&[("a", 5), ("b", 5)]);
        let folds = stratified_kfold(&t, 5, 1).unwrap();
        let label = t.label().unwrap();
        for f in &folds {
            let mut counts = [0; 2];
            for &r in &f.validation {
                counts[label.codes()[r] as usize] += 1;
            }
            assert_eq!(counts, [1, 1]);
        }

        let t = labeled(&[("big", 40), ("small", 3)]);
        let folds = stratified_kfold(&t, 10, 9).unwrap();
        let label = t.label().unwrap();
        let with_small = folds
            .iter()
            .filter(|f| f.validation.iter().any(|&r| label.codes()[r] == 1))
            .count();
        assert_eq!(with_small, 3);

        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.validation.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..t.n_rows()).collect::<Vec<_>>());
        assert!(matches!(
            stratified_kfold(&t, 1, 0),
            Err(Error::BadK { .. })
        ));
        assert!(matches!(
            stratified_kfold(&t, 44, 0),
            Err(Error::BadK { .. })
        ));
    }
}
