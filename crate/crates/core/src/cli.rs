//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::divergence::{label_divergences, FDivergence};
use crate::error::{Error, Result};
use crate::generators::{
    fit_gmm_sampler, train_gan, write_trace_csv, GanSpec, GeneratorModel, Init, Objective,
    Proportions,
};
use crate::harness::{distinguishability, privacy_report, utility_suite};
use crate::ingest::{
    apply_scaler, fit_robust_scaler, read_csv, write_csv, ReadOptions, SchemaHint, SplitSpec,
};
use crate::learners::{cross_validate, ClassifierSpec};
use crate::linalg::Matrix;
use crate::quality::{diagnostic_report, gate, quality_report, GateThresholds};
use crate::report::{EvalReport, GeneratorSummary, InputDigest, RunConfig, TraceSummary};
use crate::rng::derive;
use crate::stattests::{
    frobenius_covariance_test, hotelling_t2_regularized, mmd_test, PermutationResult, TestConfig,
};
use crate::table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_GATE_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "synth-eval",
    version,
    about = "Evaluate synthetic tabular data against real data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Column shapes and pair trends.
    Quality(Common),
    /// Table structure and boundary adherence.
    Diagnose(Common),
    /// Real-vs-synthetic classification.
    Distinguish {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ClassifierChoice::Both)]
        classifier: ClassifierChoice,
    },
    /// TRTR, TRTS and TSTR.
    Utility {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value_t = ClassifierChoice::Rf)]
        classifier: ClassifierChoice,
        /// Also cross-validate the classifier on the real training split.
        #[arg(long)]
        cv: bool,
        #[arg(long, default_value_t = 10)]
        kfold: usize,
        #[arg(long, default_value_t = 0.04)]
        stability_band: f64,
    },
    /// Label-distribution divergences.
    Divergence(Common),
    /// Permutation two-sample tests on the numeric columns.
    Stattest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tests: TestArgs,
        #[arg(long, value_enum, default_value_t = TestChoice::All)]
        test: TestChoice,
    },
    /// Nearest-neighbour distance ratio against the train and test splits.
    Privacy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0.04)]
        privacy_band: f64,
    },
    /// Fit a generator on real data.
    Fitgen(FitArgs),
    /// Draw rows from a fitted generator.
    Sample(SampleArgs),
    /// Quality, diagnostic, gate, then every other section.
    Full(FullArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    synth: PathBuf,
    /// Name of the class label column.
    #[arg(long)]
    label: Option<String>,
    /// CSV of `name,kind[,role]` rows fixing column types.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    /// Held-out real data; without it the real table is split.
    #[arg(long)]
    real_test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Args, Debug, Clone)]
struct TestArgs {
    #[arg(long, default_value_t = 500)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cap on rows per sample for the permutation tests.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct FullArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    tests: TestArgs,
    #[arg(long, default_value_t = 0.65)]
    quality_gate: f64,
    #[arg(long, default_value_t = 0.95)]
    diagnostic_gate: f64,
    #[arg(long, default_value_t = 0.04)]
    stability_band: f64,
    #[arg(long, default_value_t = 0.04)]
    privacy_band: f64,
    /// Run every section even when the gate fails.
    #[arg(long)]
    force: bool,
    /// Classifier for the utility protocols.
    #[arg(long, value_enum, default_value_t = ClassifierChoice::Rf)]
    classifier: ClassifierChoice,
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = 10)]
    kfold: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ClassifierChoice {
    Rf,
    Logistic,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TestChoice {
    Hotelling,
    Frobenius,
    Mmd,
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModelChoice {
    Gmm,
    Vanilla,
    Conditional,
    Wgan,
    WganGp,
    FganKl,
    FganH2,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelChoice::Gmm)]
    model: ModelChoice,
    /// Model file; defaults to `model.json` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mixture components per class.
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Covariance ridge relative to trace(S)/p.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    noise_dim: usize,
    /// Hidden layer widths for both networks, comma separated.
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    slope: f64,
    #[arg(long, default_value_t = 0.01)]
    clip: f64,
    #[arg(long, default_value_t = 10.0)]
    gp_weight: f64,
    #[arg(long, default_value_t = 1)]
    critic_steps: usize,
    /// Use the saturating generator loss.
    #[arg(long)]
    saturating: bool,
    /// Start every weight at zero.
    #[arg(long)]
    zero_init: bool,
}

#[derive(Args, Debug, Clone)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "match-real")]
    proportions: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

struct Loaded {
    real: Table,
    synth: Table,
    inputs: Vec<InputDigest>,
    opts: ReadOptions,
}

fn read_options(label: &Option<String>, schema: &Option<PathBuf>) -> Result<ReadOptions> {
    Ok(ReadOptions {
        schema_hint: schema.as_ref().map(SchemaHint::read).transpose()?,
        label: label.clone(),
    })
}

/// Reads real then synthetic data, parsing the synthetic file with the real
/// table's schema.
fn load(c: &Common) -> Result<Loaded> {
    let opts = read_options(&c.label, &c.schema)?;
    let real = read_csv(&c.real, &opts)?;
    let typed = ReadOptions {
        schema_hint: Some(
            opts.schema_hint
                .clone()
                .unwrap_or_else(|| SchemaHint::of(&real)),
        ),
        label: c.label.clone(),
    };
    let synth = read_csv(&c.synth, &typed)?;
    let inputs = vec![
        InputDigest::of("real", &c.real, &real)?,
        InputDigest::of("synthetic", &c.synth, &synth)?,
    ];
    Ok(Loaded {
        real,
        synth,
        inputs,
        opts: typed,
    })
}

fn base_config(c: &Common) -> RunConfig {
    RunConfig {
        seed: c.seed,
        label: c.label.clone(),
        ..RunConfig::default()
    }
}

fn start(command: &str, c: &Common, config: RunConfig, loaded: &Loaded) -> EvalReport {
    let mut r = EvalReport::new(
        command,
        RunConfig {
            seed: c.seed,
            ..config
        },
    );
    r.inputs = loaded.inputs.clone();
    r
}

fn finish(mut report: EvalReport, dir: &Path, code: i32) -> Result<i32> {
    report.write(dir)?;
    println!("wrote {}", dir.join("report.json").display());
    Ok(code)
}

fn classifier_specs(choice: ClassifierChoice, seed: u64) -> Vec<ClassifierSpec> {
    match choice {
        ClassifierChoice::Rf => vec![ClassifierSpec::forest(seed)],
        ClassifierChoice::Logistic => vec![ClassifierSpec::logistic()],
        ClassifierChoice::Both => vec![ClassifierSpec::forest(seed), ClassifierSpec::logistic()],
    }
}

/// `(real_train, real_test)` from `--real-test` or a stratified split.
fn split_real(
    real: &Table,
    split: &SplitArgs,
    opts: &ReadOptions,
    seed: u64,
    report: &mut EvalReport,
) -> Result<(Table, Table)> {
    report.config.test_fraction = split.test_fraction;
    if let Some(path) = &split.real_test {
        let test = read_csv(path, opts)?;
        report
            .inputs
            .push(InputDigest::of("real_test", path, &test)?);
        return Ok((real.clone(), test));
    }
    let label = real.label_name().ok_or(Error::NoLabelColumn)?.to_string();
    let s = derive(seed, "split");
    report.config.derived_seeds.insert("split".into(), s);
    let spec = SplitSpec {
        test_fraction: split.test_fraction,
        ..SplitSpec::new(label, s)
    };
    crate::ingest::stratified_split(real, &spec)
}

fn numeric_matrices(real: &Table, synth: &Table) -> Result<(Matrix, Matrix)> {
    let names: Vec<&str> = real
        .numeric_indices()
        .into_iter()
        .map(|i| real.schema()[i].name.as_str())
        .collect();
    if names.is_empty() {
        return Err(Error::NoNumericColumns);
    }
    let real = real.select_columns(&names)?;
    let synth = synth.select_columns(&names)?;
    let scaler = fit_robust_scaler(&real)?;
    Ok((
        Matrix::from_table(&apply_scaler(&real, &scaler)?),
        Matrix::from_table(&apply_scaler(&synth, &scaler)?),
    ))
}

fn run_tests(
    real: &Table,
    synth: &Table,
    which: TestChoice,
    args: &TestArgs,
    report: &mut EvalReport,
) -> Result<Vec<PermutationResult>> {
    let s = derive(report.config.seed, "stattests");
    report.config.derived_seeds.insert("stattests".into(), s);
    report.config.permutations = args.permutations;
    report.config.alpha = args.alpha;
    report.config.subsample = args.subsample;
    let cfg = TestConfig {
        permutations: args.permutations,
        alpha: args.alpha,
        subsample: args.subsample,
        ..TestConfig::with_seed(s)
    };
    let (x, y) = numeric_matrices(real, synth)?;
    let mut out = Vec::new();
    if matches!(which, TestChoice::Hotelling | TestChoice::All) {
        out.push(report.timed("hotelling", || hotelling_t2_regularized(&x, &y, &cfg))?);
    }
    if matches!(which, TestChoice::Frobenius | TestChoice::All) {
        out.push(report.timed("frobenius", || frobenius_covariance_test(&x, &y, &cfg))?);
    }
    if matches!(which, TestChoice::Mmd | TestChoice::All) {
        out.push(report.timed("mmd", || mmd_test(&x, &y, &cfg))?);
    }
    Ok(out)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Quality(c) => {
            let l = load(&c)?;
            let mut r = start("quality", &c, base_config(&c), &l);
            r.sections.quality = Some(r.timed("quality", || quality_report(&l.real, &l.synth))?);
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Diagnose(c) => {
            let l = load(&c)?;
            let mut r = start("diagnose", &c, base_config(&c), &l);
            r.sections.diagnostic =
                Some(r.timed("diagnostic", || diagnostic_report(&l.real, &l.synth))?);
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Distinguish {
            common: c,
            classifier,
        } => {
            let l = load(&c)?;
            let mut r = start("distinguish", &c, base_config(&c), &l);
            r.config.classifier = format!("{classifier:?}").to_lowercase();
            run_distinguish(&l.real, &l.synth, classifier, &mut r)?;
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Utility {
            common: c,
            split,
            classifier,
            cv,
            kfold,
            stability_band,
        } => {
            let l = load(&c)?;
            let mut r = start("utility", &c, base_config(&c), &l);
            let (train, test) = split_real(&l.real, &split, &l.opts, c.seed, &mut r)?;
            r.config.kfold = kfold;
            r.config.stability_band = stability_band;
            run_utility(&train, &test, &l.synth, classifier, cv, &mut r)?;
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Divergence(c) => {
            let l = load(&c)?;
            let mut r = start("divergence", &c, base_config(&c), &l);
            let (p, q) = (l.real.label_distribution()?, l.synth.label_distribution()?);
            r.sections.divergences = Some(label_divergences(&p, &q));
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Stattest {
            common: c,
            tests,
            test,
        } => {
            let l = load(&c)?;
            let mut r = start("stattest", &c, base_config(&c), &l);
            r.sections.stat_tests = run_tests(&l.real, &l.synth, test, &tests, &mut r)?;
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Privacy {
            common: c,
            split,
            privacy_band,
        } => {
            let l = load(&c)?;
            let mut r = start("privacy", &c, base_config(&c), &l);
            let (train, test) = split_real(&l.real, &split, &l.opts, c.seed, &mut r)?;
            r.config.privacy_band = privacy_band;
            r.sections.privacy = Some(r.timed("privacy", || {
                privacy_report(&l.synth, &train, &test, privacy_band)
            })?);
            finish(r, &c.output_dir, EXIT_OK)
        }
        Command::Fitgen(a) => fitgen(a),
        Command::Sample(a) => {
            let model = GeneratorModel::load(&a.model)?;
            let proportions: Proportions = a.proportions.parse()?;
            let t = model.sample(a.n, proportions, a.seed)?;
            write_csv(&a.out, &t)?;
            println!("wrote {} rows to {}", t.n_rows(), a.out.display());
            Ok(EXIT_OK)
        }
        Command::Full(a) => full(a),
    }
}

fn run_distinguish(
    real: &Table,
    synth: &Table,
    choice: ClassifierChoice,
    r: &mut EvalReport,
) -> Result<()> {
    let s = derive(r.config.seed, "distinguish");
    r.config.derived_seeds.insert("distinguish".into(), s);
    for spec in classifier_specs(choice, derive(s, "forest")) {
        let name = format!("distinguish-{}", spec.name());
        let res = r.timed(&name, || distinguishability(real, synth, &spec, s))?;
        r.sections.distinguishability.push(res);
    }
    Ok(())
}

fn run_utility(
    train: &Table,
    test: &Table,
    synth: &Table,
    choice: ClassifierChoice,
    cv: bool,
    r: &mut EvalReport,
) -> Result<()> {
    let s = derive(r.config.seed, "utility");
    r.config.derived_seeds.insert("utility".into(), s);
    let choice = if choice == ClassifierChoice::Both {
        ClassifierChoice::Rf
    } else {
        choice
    };
    let spec = classifier_specs(choice, derive(s, "forest")).remove(0);
    r.config.classifier = spec.name().to_string();
    r.sections.utility = Some(r.timed("utility", || utility_suite(train, test, synth, &spec, s))?);
    if cv {
        let cs = derive(r.config.seed, "cv");
        r.config.derived_seeds.insert("cv".into(), cs);
        let (k, band) = (r.config.kfold, r.config.stability_band);
        r.sections.cross_validation =
            Some(r.timed("cv", || cross_validate(train, &spec, k, band, cs))?);
    }
    Ok(())
}

fn full(a: FullArgs) -> Result<i32> {
    let c = &a.common;
    let l = load(c)?;
    let config = RunConfig {
        quality_gate: a.quality_gate,
        diagnostic_gate: a.diagnostic_gate,
        stability_band: a.stability_band,
        privacy_band: a.privacy_band,
        kfold: a.kfold,
        force: a.force,
        assumptions: vec![
            "quality, diagnostic, distinguishability, divergences and two-sample tests compare the whole real table with the synthetic table".into(),
            "two-sample tests use the numeric columns after robust scaling fitted on the real table".into(),
            "utility and privacy use the real train/test split".into(),
            "NNDR excludes the label column".into(),
        ],
        ..base_config(c)
    };
    let mut r = start("full", c, config, &l);
    let q = r.timed("quality", || quality_report(&l.real, &l.synth))?;
    let d = r.timed("diagnostic", || diagnostic_report(&l.real, &l.synth))?;
    let thresholds = GateThresholds {
        quality: a.quality_gate,
        diagnostic: a.diagnostic_gate,
    };
    let g = gate(&q, &d, thresholds);
    let pass = g.pass;
    r.sections.quality = Some(q);
    r.sections.diagnostic = Some(d);
    r.sections.gate = Some(g);
    if !pass && !a.force {
        r.skipped
            .push("all later sections: gate failed (use --force to run them)".into());
        eprintln!("gate failed; later sections skipped");
        return finish(r, &c.output_dir, EXIT_GATE_FAILED);
    }
    run_distinguish(&l.real, &l.synth, ClassifierChoice::Both, &mut r)?;
    let labeled = l.real.label_index().is_some() && l.synth.label_index().is_some();
    if labeled {
        let (train, test) = split_real(&l.real, &a.split, &l.opts, c.seed, &mut r)?;
        run_utility(&train, &test, &l.synth, a.classifier, a.cv, &mut r)?;
        let (p, q) = (l.real.label_distribution()?, l.synth.label_distribution()?);
        r.sections.divergences = Some(label_divergences(&p, &q));
        r.sections.stat_tests = run_tests(&l.real, &l.synth, TestChoice::All, &a.tests, &mut r)?;
        let band = a.privacy_band;
        r.sections.privacy =
            Some(r.timed("privacy", || privacy_report(&l.synth, &train, &test, band))?);
    } else {
        r.skipped.push("utility: no label column".into());
        r.skipped.push("divergences: no label column".into());
        r.sections.stat_tests = run_tests(&l.real, &l.synth, TestChoice::All, &a.tests, &mut r)?;
        match &a.split.real_test {
            Some(path) => {
                let test = read_csv(path, &l.opts)?;
                r.inputs.push(InputDigest::of("real_test", path, &test)?);
                let band = a.privacy_band;
                r.sections.privacy =
                    Some(r.timed("privacy", || privacy_report(&l.synth, &l.real, &test, band))?);
            }
            None => r
                .skipped
                .push("privacy: no label to split on and no --real-test".into()),
        }
    }
    finish(r, &c.output_dir, EXIT_OK)
}

fn fitgen(a: FitArgs) -> Result<i32> {
    let opts = read_options(&a.label, &a.schema)?;
    let real = read_csv(&a.real, &opts)?;
    let config = RunConfig {
        seed: a.seed,
        label: a.label.clone(),
        ..RunConfig::default()
    };
    let mut r = EvalReport::new("fitgen", config);
    r.inputs.push(InputDigest::of("real", &a.real, &real)?);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.output_dir.join("model.json"));
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    let s = derive(a.seed, "generator");
    r.config.derived_seeds.insert("generator".into(), s);
    let (model, trace) = match a.model {
        ModelChoice::Gmm => {
            let m = r.timed("fit", || fit_gmm_sampler(&real, a.components, a.ridge, s))?;
            (GeneratorModel::Gmm(m), None)
        }
        choice => {
            let objective = match choice {
                ModelChoice::Vanilla => Objective::Vanilla,
                ModelChoice::Conditional => Objective::Conditional,
                ModelChoice::Wgan => Objective::Wgan,
                ModelChoice::WganGp => Objective::WganGp,
                ModelChoice::FganKl => Objective::FGan(FDivergence::KullbackLeibler),
                ModelChoice::FganH2 => Objective::FGan(FDivergence::SquaredHellinger),
                ModelChoice::Gmm => unreachable!(),
            };
            let spec = GanSpec {
                objective,
                noise_dim: a.noise_dim,
                generator_hidden: a.hidden.clone(),
                discriminator_hidden: a.hidden.clone(),
                slope: a.slope,
                epochs: a.epochs,
                batch_size: a.batch_size,
                learning_rate: a.learning_rate,
                clip: a.clip,
                gp_weight: a.gp_weight,
                critic_steps: a.critic_steps,
                saturating: a.saturating,
                init: if a.zero_init {
                    Init::Zero
                } else {
                    Init::Glorot
                },
                seed: s,
            };
            let (g, trace) = r.timed("fit", || train_gan(&real, &spec))?;
            let trace_path = a.output_dir.join("trace.csv");
            let file = std::fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
            write_trace_csv(std::io::BufWriter::new(file), &trace, &spec)?;
            let summary = TraceSummary {
                steps: trace.steps.len(),
                epochs: trace.epochs.len(),
                domain_clamps: trace.domain_clamps,
                first_d_loss: trace.steps.first().map_or(0.0, |s| s.d_loss),
                last_d_loss: trace.steps.last().map_or(0.0, |s| s.d_loss),
                first_g_loss: trace.steps.first().map_or(0.0, |s| s.g_loss),
                last_g_loss: trace.steps.last().map_or(0.0, |s| s.g_loss),
                trace_file: Some(trace_path.display().to_string()),
            };
            (GeneratorModel::Gan(g), Some(summary))
        }
    };
    model.save(&out)?;
    r.sections.generator = Some(GeneratorSummary {
        model: model.name(),
        rows_trained: real.n_rows(),
        model_file: out.display().to_string(),
        trace,
    });
    finish(r, &a.output_dir, EXIT_OK)
}
