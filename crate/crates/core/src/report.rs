//! The evaluation report: one JSON document per run plus a Markdown summary
//! whose numbers are the JSON values printed with six significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::divergence::Divergences;
use crate::error::{Error, Result};
use crate::harness::{DistinguishabilityResult, PrivacyResult, UtilityResult, UtilitySuite};
use crate::learners::CvResult;
use crate::quality::{DiagnosticReport, GateDecision, QualityReport};
use crate::stattests::PermutationResult;
use crate::table::Table;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "synth-eval";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub columns: usize,
}

impl InputDigest {
    pub fn of(role: &str, path: impl AsRef<Path>, table: &Table) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self {
            role: role.to_string(),
            file: path.display().to_string(),
            sha256: sha256_file(path)?,
            rows: table.n_rows(),
            columns: table.n_cols(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Every setting that influenced the numbers in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub label: Option<String>,
    pub permutations: usize,
    pub alpha: f64,
    pub quality_gate: f64,
    pub diagnostic_gate: f64,
    pub stability_band: f64,
    pub privacy_band: f64,
    pub test_fraction: f64,
    pub kfold: usize,
    pub subsample: Option<usize>,
    pub classifier: String,
    pub force: bool,
    pub derived_seeds: BTreeMap<String, u64>,
    pub assumptions: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            label: None,
            permutations: 500,
            alpha: 0.05,
            quality_gate: 0.65,
            diagnostic_gate: 0.95,
            stability_band: 0.04,
            privacy_band: 0.04,
            test_fraction: 0.2,
            kfold: 10,
            subsample: None,
            classifier: "random_forest".into(),
            force: false,
            derived_seeds: BTreeMap::new(),
            assumptions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub epochs: usize,
    pub domain_clamps: usize,
    pub first_d_loss: f64,
    pub last_d_loss: f64,
    pub first_g_loss: f64,
    pub last_g_loss: f64,
    pub trace_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSummary {
    pub model: String,
    pub rows_trained: usize,
    pub model_file: String,
    pub trace: Option<TraceSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sections {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<DiagnosticReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateDecision>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distinguishability: Vec<DistinguishabilityResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySuite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CvResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergences: Option<Divergences>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stat_tests: Vec<PermutationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSummary>,
}

/// Wall-clock data. Kept apart from everything else so two runs can be
/// compared byte for byte once this field is removed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub section_ms: BTreeMap<String, u64>,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub sections: Sections,
    /// Sections not run, with the reason.
    pub skipped: Vec<String>,
    pub timestamps: Timestamps,
}

impl EvalReport {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config,
            inputs: Vec::new(),
            sections: Sections::default(),
            skipped: Vec::new(),
            timestamps: Timestamps {
                started_unix_ms: unix_ms(),
                ..Timestamps::default()
            },
        }
    }

    /// Runs `f`, recording its wall time under `name`.
    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = std::time::Instant::now();
        let out = f();
        self.timestamps
            .section_ms
            .insert(name.to_string(), start.elapsed().as_millis() as u64);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Unsupported(format!(
                "report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.timestamps.finished_unix_ms = unix_ms();
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(self)
    }
}

/// Removes the `timestamps` member from a serialized report.
pub fn strip_timestamps(json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timestamps");
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

/// `%g` with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_g(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), fmt_g)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn render_markdown(r: &EvalReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let c = &r.config;
    let _ = writeln!(w, "# Synthetic data evaluation: `{}`\n", r.command);
    let _ = writeln!(w, "{} {} · seed {}\n", r.tool, r.tool_version, c.seed);

    if !r.inputs.is_empty() {
        let _ = writeln!(w, "## Inputs\n");
        let _ = writeln!(w, "| role | file | rows | columns | sha256 |");
        let _ = writeln!(w, "|---|---|---:|---:|---|");
        for i in &r.inputs {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | `{}` |",
                i.role, i.file, i.rows, i.columns, i.sha256
            );
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(w, "## Configuration\n");
    let _ = writeln!(w, "| setting | value |");
    let _ = writeln!(w, "|---|---|");
    let rows: Vec<(&str, String)> = vec![
        ("label", c.label.clone().unwrap_or_else(|| "none".into())),
        ("permutations", c.permutations.to_string()),
        ("alpha", fmt_g(c.alpha)),
        ("quality gate", fmt_g(c.quality_gate)),
        ("diagnostic gate", fmt_g(c.diagnostic_gate)),
        ("stability band", fmt_g(c.stability_band)),
        ("privacy band", fmt_g(c.privacy_band)),
        ("test fraction", fmt_g(c.test_fraction)),
        ("classifier", c.classifier.clone()),
        (
            "subsample",
            c.subsample.map_or_else(|| "none".into(), |s| s.to_string()),
        ),
        ("force", yes_no(c.force).into()),
    ];
    for (k, v) in rows {
        let _ = writeln!(w, "| {k} | {v} |");
    }
    for (k, v) in &c.derived_seeds {
        let _ = writeln!(w, "| seed: {k} | {v} |");
    }
    let _ = writeln!(w);
    if !c.assumptions.is_empty() {
        let _ = writeln!(w, "Assumptions:\n");
        for a in &c.assumptions {
            let _ = writeln!(w, "- {a}");
        }
        let _ = writeln!(w);
    }

    let s = &r.sections;
    if let Some(q) = &s.quality {
        let _ = writeln!(w, "## Quality\n");
        let _ = writeln!(
            w,
            "Overall: **{}** (column shapes {}, column pair trends {})\n",
            fmt_g(q.overall),
            fmt_g(q.column_shapes_average),
            fmt_g(q.correlation.average)
        );
        let _ = writeln!(w, "| column | metric | score |");
        let _ = writeln!(w, "|---|---|---:|");
        for cs in &q.column_shapes {
            let _ = writeln!(w, "| {} | {} | {} |", cs.column, cs.metric, fmt_g(cs.score));
        }
        let _ = writeln!(w);
    }
    if let Some(d) = &s.diagnostic {
        let _ = writeln!(w, "## Diagnostic\n");
        let _ = writeln!(
            w,
            "Overall: **{}** (table structure {}, boundary adherence {})\n",
            fmt_g(d.overall),
            fmt_g(d.table_structure),
            fmt_g(d.boundary_adherence)
        );
        let _ = writeln!(w, "| column | boundary adherence |");
        let _ = writeln!(w, "|---|---:|");
        for b in &d.boundary_columns {
            let _ = writeln!(w, "| {} | {} |", b.column, fmt_g(b.score));
        }
        let _ = writeln!(w);
    }
    if let Some(g) = &s.gate {
        let _ = writeln!(w, "## Gate\n");
        let _ = writeln!(
            w,
            "**{}**: quality {} (≥ {}), diagnostic {} (≥ {})\n",
            if g.pass { "PASS" } else { "FAIL" },
            fmt_g(g.quality_overall),
            fmt_g(g.thresholds.quality),
            fmt_g(g.diagnostic_overall),
            fmt_g(g.thresholds.diagnostic)
        );
        for reason in &g.reasons {
            let _ = writeln!(w, "- {reason}");
        }
        if !g.reasons.is_empty() {
            let _ = writeln!(w);
        }
    }
    if !s.distinguishability.is_empty() {
        let _ = writeln!(w, "## Distinguishability\n");
        let _ = writeln!(
            w,
            "| classifier | F1 (synthetic) | ROC-AUC | rows per class | test rows | seed |"
        );
        let _ = writeln!(w, "|---|---:|---:|---:|---:|---:|");
        for d in &s.distinguishability {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} |",
                d.classifier,
                fmt_g(d.f1),
                fmt_g(d.roc_auc),
                d.n_per_class,
                d.n_test,
                d.seed
            );
        }
        let _ = writeln!(w);
    }
    if let Some(u) = &s.utility {
        let _ = writeln!(w, "## Utility ({})\n", u.classifier);
        let _ = writeln!(w, "| protocol | train precision | train recall | test precision | test recall | test F1 | test ROC-AUC |");
        let _ = writeln!(w, "|---|---:|---:|---:|---:|---:|---:|");
        for p in [&u.trtr, &u.trts, &u.tstr] {
            utility_row(w, p);
        }
        if !u.missing_classes.is_empty() {
            let _ = writeln!(
                w,
                "\nClasses missing from a training side: {}",
                u.missing_classes.join(", ")
            );
        }
        let _ = writeln!(w);
    }
    if let Some(cv) = &s.cross_validation {
        let _ = writeln!(w, "## Cross-validation ({}, k = {})\n", cv.classifier, cv.k);
        let _ = writeln!(w, "| metric | min | max | range | stable |");
        let _ = writeln!(w, "|---|---:|---:|---:|---|");
        for m in &cv.stability {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} |",
                m.metric,
                fmt_g(m.min),
                fmt_g(m.max),
                fmt_g(m.range),
                yes_no(m.stable)
            );
        }
        let _ = writeln!(w);
    }
    if let Some(d) = &s.divergences {
        let _ = writeln!(w, "## Label divergences\n");
        let _ = writeln!(w, "| Jensen-Shannon | Hellinger | Wasserstein-1 |");
        let _ = writeln!(w, "|---:|---:|---:|");
        let _ = writeln!(
            w,
            "| {} | {} | {} |\n",
            fmt_g(d.jensen_shannon),
            fmt_g(d.hellinger),
            fmt_g(d.wasserstein)
        );
        let _ = writeln!(w, "| class | real | synthetic |");
        let _ = writeln!(w, "|---|---:|---:|");
        for (i, cat) in d.categories.iter().enumerate() {
            let _ = writeln!(
                w,
                "| {} | {} | {} |",
                cat,
                fmt_g(d.real[i]),
                fmt_g(d.synthetic[i])
            );
        }
        let _ = writeln!(w);
    }
    if !s.stat_tests.is_empty() {
        let _ = writeln!(w, "## Two-sample tests\n");
        let _ = writeln!(
            w,
            "| test | statistic | p-value | permutations | alpha | reject | n1 | n2 | flags |"
        );
        let _ = writeln!(w, "|---|---:|---:|---:|---:|---|---:|---:|---|");
        for t in &s.stat_tests {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                t.statistic_name,
                fmt_g(t.observed),
                fmt_g(t.p_value),
                t.permutations,
                fmt_g(t.alpha),
                yes_no(t.reject),
                t.n1,
                t.n2,
                t.flags.join(", ")
            );
        }
        let _ = writeln!(w);
    }
    if let Some(p) = &s.privacy {
        let _ = writeln!(w, "## Privacy (NNDR)\n");
        let _ = writeln!(w, "| train NNDR | test NNDR | gap | band | overfit |");
        let _ = writeln!(w, "|---:|---:|---:|---:|---|");
        let _ = writeln!(
            w,
            "| {} | {} | {} | {} | {} |\n",
            fmt_g(p.train_nndr),
            fmt_g(p.test_nndr),
            fmt_g(p.gap),
            fmt_g(p.band),
            yes_no(p.overfit)
        );
    }
    if let Some(g) = &s.generator {
        let _ = writeln!(w, "## Generator\n");
        let _ = writeln!(
            w,
            "Model `{}` trained on {} rows, saved to `{}`.\n",
            g.model, g.rows_trained, g.model_file
        );
        if let Some(t) = &g.trace {
            let _ = writeln!(w, "| steps | epochs | first d_loss | last d_loss | first g_loss | last g_loss | domain clamps |");
            let _ = writeln!(w, "|---:|---:|---:|---:|---:|---:|---:|");
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                t.steps,
                t.epochs,
                fmt_g(t.first_d_loss),
                fmt_g(t.last_d_loss),
                fmt_g(t.first_g_loss),
                fmt_g(t.last_g_loss),
                t.domain_clamps
            );
        }
    }
    if !r.skipped.is_empty() {
        let _ = writeln!(w, "## Skipped\n");
        for sk in &r.skipped {
            let _ = writeln!(w, "- {sk}");
        }
        let _ = writeln!(w);
    }
    out
}

fn utility_row(w: &mut String, u: &UtilityResult) {
    let _ = writeln!(
        w,
        "| {} | {} | {} | {} | {} | {} | {} |",
        u.protocol.as_str(),
        fmt_g(u.train.precision),
        fmt_g(u.train.recall),
        fmt_g(u.test.precision),
        fmt_g(u.test.recall),
        fmt_g(u.test.f1),
        opt_g(u.test.roc_auc)
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::{gate_scores, GateThresholds};

    #[test]
    fn g_format_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (-1.3862943611198906, "-1.38629"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (999999.5, "1e+06"),
            (0.04, "0.04"),
            (100.0, "100"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g(x), s, "{x}");
        }
    }

    #[test]
    fn json_round_trip_and_timestamp_isolation() {
        let mut r = EvalReport::new("quality", RunConfig::default());
        r.sections.gate = Some(gate_scores(0.7, 0.99, GateThresholds::default()));
        r.skipped.push("privacy: not requested".into());
        let json = r.to_json().unwrap();
        assert_eq!(EvalReport::from_json(&json).unwrap(), r);
        let mut later = r.clone();
        later.timestamps.started_unix_ms += 5000;
        assert_eq!(
            strip_timestamps(&json).unwrap(),
            strip_timestamps(&later.to_json().unwrap()).unwrap()
        );
        let md = r.to_markdown();
        assert!(md.contains("**PASS**: quality 0.7 (≥ 0.65), diagnostic 0.99 (≥ 0.95)"));
    }

    #[test]
    fn digest_of_known_bytes() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
