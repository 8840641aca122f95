use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::Mlp;
use super::{CategoricalFrequencies, TableTemplate};
use crate::divergence::{f_pair, FDivergence};
use crate::error::{Error, Result};
use crate::ingest::{fit_robust_scaler, RobustScalerParams};
use crate::rng::{self, Rng};
use crate::table::Table;

pub const MODEL_VERSION: u32 = 1;

/// Largest value the squared-Hellinger critic output may take before the
/// conjugate `t/(1−t)` is evaluated.
const H2_T_MAX: f64 = 1.0 - 1e-12;
const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Vanilla,
    Conditional,
    Wgan,
    WganGp,
    FGan(FDivergence),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Vanilla => "vanilla",
            Objective::Conditional => "conditional",
            Objective::Wgan => "wgan",
            Objective::WganGp => "wgan-gp",
            Objective::FGan(FDivergence::KullbackLeibler) => "fgan-kl",
            Objective::FGan(FDivergence::SquaredHellinger) => "fgan-h2",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Objective::Vanilla),
            "conditional" | "cgan" => Ok(Objective::Conditional),
            "wgan" => Ok(Objective::Wgan),
            "wgan-gp" | "wgan_gp" | "wgangp" => Ok(Objective::WganGp),
            other => match other
                .strip_prefix("fgan-")
                .or_else(|| other.strip_prefix("fgan_"))
            {
                Some(f) => Ok(Objective::FGan(f.parse()?)),
                None => Err(Error::Unsupported(format!("objective `{other}`"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Glorot,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanSpec {
    pub objective: Objective,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight clip for WGAN.
    pub clip: f64,
    /// Penalty weight for WGAN-GP.
    pub gp_weight: f64,
    pub critic_steps: usize,
    /// Use the saturating generator loss `ln(1 − D(G(z)))` (vanilla and
    /// conditional only).
    pub saturating: bool,
    pub init: Init,
    pub seed: u64,
}

impl Default for GanSpec {
    fn default() -> Self {
        Self {
            objective: Objective::Vanilla,
            noise_dim: 16,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
            slope: 0.2,
            epochs: 20,
            batch_size: 128,
            learning_rate: 0.01,
            clip: 0.01,
            gp_weight: 10.0,
            critic_steps: 1,
            saturating: false,
            init: Init::Glorot,
            seed: 0,
        }
    }
}

impl GanSpec {
    pub fn new(objective: Objective, seed: u64) -> Self {
        Self {
            objective,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.batch_size == 0 || self.critic_steps == 0 {
            return bad("batch size and critic steps must be ≥ 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.objective == Objective::Wgan && !(self.clip > 0.0) {
            return bad("clip must be > 0");
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `mean ln D(x) + mean ln(1 − D(G(z)))` on discriminator probabilities,
/// clamped to `[ε, 1 − ε]`.
pub fn vanilla_gan_risk(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::ShapeMismatch("empty discriminator output".into()));
    }
    let c = |p: f64| p.clamp(EPS, 1.0 - EPS);
    let real = d_real.iter().map(|&p| c(p).ln()).sum::<f64>() / d_real.len() as f64;
    let fake = d_fake.iter().map(|&p| (1.0 - c(p)).ln()).sum::<f64>() / d_fake.len() as f64;
    Ok(real + fake)
}

/// Critic objective value (the quantity the discriminator ascends) and its
/// parameter gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Fake-side outputs clamped into the conjugate's domain.
    pub clamped: usize,
}

/// `T = g_f(v)` on the fake side, clamped below the conjugate's bound.
/// Returns `(f*(T), d f*(T)/dv, clamped)`.
fn conjugate_of_output(div: FDivergence, v: f64) -> (f64, f64, bool) {
    let pair = f_pair(div);
    let mut t = pair.activation(v);
    let mut clamped = false;
    if div == FDivergence::SquaredHellinger && t > H2_T_MAX {
        t = H2_T_MAX;
        clamped = true;
    }
    let value = pair.f_conjugate(t).expect("t inside the domain");
    let slope = if clamped {
        0.0
    } else {
        pair.f_conjugate_derivative(t) * pair.activation_derivative(v)
    };
    (value, slope, clamped)
}

/// Evaluates the discriminator's objective on one batch of real and fake
/// discriminator inputs (row-major, `batch` rows each). `eps` gives the
/// interpolation weights for the WGAN-GP penalty and is ignored otherwise.
pub fn critic_objective(
    objective: Objective,
    d: &Mlp,
    real: &[f64],
    fake: &[f64],
    batch: usize,
    eps: &[f64],
    gp_weight: f64,
) -> CriticEval {
    let cr = d.forward(real, batch);
    let cf = d.forward(fake, batch);
    let (vr, vf) = (cr.output(), cf.output());
    let b = batch as f64;
    let mut dr = vec![0.0; batch];
    let mut df = vec![0.0; batch];
    let mut clamped = 0;
    let mut value = 0.0;
    match objective {
        Objective::Vanilla | Objective::Conditional => {
            for i in 0..batch {
                value += -softplus(-vr[i]) - softplus(vf[i]);
                dr[i] = (1.0 - sigmoid(vr[i])) / b;
                df[i] = -sigmoid(vf[i]) / b;
            }
        }
        Objective::Wgan | Objective::WganGp => {
            for i in 0..batch {
                value += vr[i] - vf[i];
                dr[i] = 1.0 / b;
                df[i] = -1.0 / b;
            }
        }
        Objective::FGan(div) => {
            let pair = f_pair(div);
            for i in 0..batch {
                let (fs, slope, c) = conjugate_of_output(div, vf[i]);
                clamped += usize::from(c);
                value += pair.activation(vr[i]) - fs;
                dr[i] = pair.activation_derivative(vr[i]) / b;
                df[i] = -slope / b;
            }
        }
    }
    value /= b;
    let (mut grad, _) = d.backward(&cr, &dr);
    let (gf, _) = d.backward(&cf, &df);
    grad.iter_mut().zip(&gf).for_each(|(a, b)| *a += b);
    if objective == Objective::WganGp {
        let (pen, gp) = gradient_penalty(d, real, fake, batch, eps, gp_weight);
        value -= pen;
        grad.iter_mut().zip(&gp).for_each(|(a, b)| *a -= b);
    }
    CriticEval {
        value,
        grad,
        clamped,
    }
}

/// `λ · mean (‖∇ D(x̂)‖ − 1)²` at `x̂ = ε·real + (1 − ε)·fake`.
pub fn gradient_penalty(
    d: &Mlp,
    real: &[f64],
    fake: &[f64],
    batch: usize,
    eps: &[f64],
    weight: f64,
) -> (f64, Vec<f64>) {
    let dim = d.input_dim();
    let mut hat = vec![0.0; batch * dim];
    for i in 0..batch {
        for j in 0..dim {
            let k = i * dim + j;
            hat[k] = eps[i] * real[k] + (1.0 - eps[i]) * fake[k];
        }
    }
    d.gradient_penalty(&hat, batch, weight)
}

fn concat_rows(a: &[f64], da: usize, b: Option<&[f64]>, db: usize, batch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * (da + db));
    for i in 0..batch {
        out.extend_from_slice(&a[i * da..(i + 1) * da]);
        if let Some(b) = b {
            out.extend_from_slice(&b[i * db..(i + 1) * db]);
        }
    }
    out
}

/// Generator loss (the quantity the generator descends) and its gradient.
/// `g_in` holds noise plus condition per row, `cond` the condition alone.
#[allow(clippy::too_many_arguments)]
pub fn generator_objective(
    objective: Objective,
    g: &Mlp,
    d: &Mlp,
    g_in: &[f64],
    cond: Option<&[f64]>,
    cond_dim: usize,
    batch: usize,
    saturating: bool,
) -> (f64, Vec<f64>, usize) {
    let p = g.output_dim();
    let cg = g.forward(g_in, batch);
    let d_in = concat_rows(cg.output(), p, cond, cond_dim, batch);
    let cd = d.forward(&d_in, batch);
    let v = cd.output();
    let b = batch as f64;
    let mut dv = vec![0.0; batch];
    let mut value = 0.0;
    let mut clamped = 0;
    for i in 0..batch {
        match objective {
            Objective::Vanilla | Objective::Conditional => {
                if saturating {
                    value -= softplus(v[i]);
                    dv[i] = -sigmoid(v[i]) / b;
                } else {
                    value += softplus(-v[i]);
                    dv[i] = -(1.0 - sigmoid(v[i])) / b;
                }
            }
            Objective::Wgan | Objective::WganGp => {
                value -= v[i];
                dv[i] = -1.0 / b;
            }
            Objective::FGan(div) => {
                let (fs, slope, c) = conjugate_of_output(div, v[i]);
                clamped += usize::from(c);
                value -= fs;
                dv[i] = -slope / b;
            }
        }
    }
    let (_, dx) = d.backward(&cd, &dv);
    let dim = d.input_dim();
    let mut dfake = Vec::with_capacity(batch * p);
    for i in 0..batch {
        dfake.extend_from_slice(&dx[i * dim..i * dim + p]);
    }
    let (grad, _) = g.backward(&cg, &dfake);
    (value / b, grad, clamped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub epoch: usize,
    /// Discriminator objective before its last update (vanilla: the risk
    /// `mean ln D(x) + mean ln(1 − D(G(z)))`).
    pub d_loss: f64,
    /// Generator loss before its update.
    pub g_loss: f64,
    /// Largest absolute discriminator parameter after the critic updates.
    pub critic_max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub mean_d_loss: f64,
    pub mean_g_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub objective: String,
    pub steps: Vec<TraceStep>,
    pub epochs: Vec<EpochSummary>,
    /// Conjugate-domain clamps of the f-GAN critic output.
    pub domain_clamps: usize,
    /// Step at which training stopped on a non-finite loss.
    pub aborted_at: Option<usize>,
}

/// Trained generator with everything needed to emit tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanGenerator {
    pub version: u32,
    pub spec: GanSpec,
    pub net: Mlp,
    pub template: TableTemplate,
    pub scaler: RobustScalerParams,
    /// Label proportions over the label dictionary, when labeled.
    pub label_proportions: Option<Vec<f64>>,
    pub categoricals: CategoricalFrequencies,
}

impl GanGenerator {
    pub fn conditional(&self) -> bool {
        self.spec.objective == Objective::Conditional
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GanGenerator = serde_json::from_str(text)?;
        if g.version != MODEL_VERSION {
            return Err(Error::Unsupported(format!(
                "generator model version {}",
                g.version
            )));
        }
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<GanGenerator> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GanGenerator::from_json(&text)
}

fn noise(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn one_hot(codes: &[u32], classes: usize) -> Vec<f64> {
    let mut out = vec![0.0; codes.len() * classes];
    for (i, &c) in codes.iter().enumerate() {
        out[i * classes + c as usize] = 1.0;
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Trains a generator and returns it with the loss trace; on a non-finite
/// loss the trace up to that step is returned with the error.
pub fn train_gan_traced(train: &Table, spec: &GanSpec) -> (Result<GanGenerator>, TrainTrace) {
    let mut trace = TrainTrace {
        objective: spec.objective.name().to_string(),
        ..TrainTrace::default()
    };
    let result = run(train, spec, &mut trace);
    (result, trace)
}

pub fn train_gan(train: &Table, spec: &GanSpec) -> Result<(GanGenerator, TrainTrace)> {
    let (g, t) = train_gan_traced(train, spec);
    g.map(|g| (g, t))
}

fn run(train: &Table, spec: &GanSpec, trace: &mut TrainTrace) -> Result<GanGenerator> {
    spec.validate()?;
    let p = train.n_numeric();
    if p == 0 {
        return Err(Error::NoNumericColumns);
    }
    let conditional = spec.objective == Objective::Conditional;
    let label = train.label().ok();
    if conditional && label.is_none() {
        return Err(Error::NoLabelColumn);
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::DegenerateInput("cannot train on zero rows".into()));
    }
    let scaler = fit_robust_scaler(train)?;
    let mut x = train.numeric_matrix().to_vec();
    for row in x.chunks_mut(p) {
        scaler.scale_row(row);
    }
    let cond_dim = if conditional {
        label.map_or(0, |l| l.dictionary().len())
    } else {
        0
    };
    let y = label.map(|l| one_hot(l.codes(), l.dictionary().len()));

    let mut g_sizes = vec![spec.noise_dim + cond_dim];
    g_sizes.extend(&spec.generator_hidden);
    g_sizes.push(p);
    let mut d_sizes = vec![p + cond_dim];
    d_sizes.extend(&spec.discriminator_hidden);
    d_sizes.push(1);
    let (mut g, mut d) = match spec.init {
        Init::Zero => (
            Mlp::zeros(&g_sizes, spec.slope),
            Mlp::zeros(&d_sizes, spec.slope),
        ),
        Init::Glorot => (
            Mlp::glorot(
                &g_sizes,
                spec.slope,
                &mut rng::seeded(rng::derive(spec.seed, "gan-init-g")),
            ),
            Mlp::glorot(
                &d_sizes,
                spec.slope,
                &mut rng::seeded(rng::derive(spec.seed, "gan-init-d")),
            ),
        ),
    };
    let mut batch_rng = rng::seeded(rng::derive(spec.seed, "gan-batches"));
    let mut noise_rng = rng::seeded(rng::derive(spec.seed, "gan-noise"));
    let lr = spec.learning_rate;
    let mut order: Vec<usize> = (0..n).collect();
    let mut critic_updates = 0usize;
    for epoch in 0..spec.epochs {
        order.shuffle(&mut batch_rng);
        let first_step = trace.steps.len();
        for chunk in order.chunks(spec.batch_size) {
            let b = chunk.len();
            let step = trace.steps.len();
            let mut real_x = Vec::with_capacity(b * p);
            for &r in chunk {
                real_x.extend_from_slice(&x[r * p..(r + 1) * p]);
            }
            let cond: Option<Vec<f64>> = if conditional {
                let y = y.as_ref().expect("labeled");
                let mut c = Vec::with_capacity(b * cond_dim);
                for &r in chunk {
                    c.extend_from_slice(&y[r * cond_dim..(r + 1) * cond_dim]);
                }
                Some(c)
            } else {
                None
            };
            let z = noise(&mut noise_rng, b * spec.noise_dim);
            let g_in = concat_rows(&z, spec.noise_dim, cond.as_deref(), cond_dim, b);
            let fake_x = g.predict(&g_in, b);
            let real = concat_rows(&real_x, p, cond.as_deref(), cond_dim, b);
            let fake = concat_rows(&fake_x, p, cond.as_deref(), cond_dim, b);
            let eps: Vec<f64> = if spec.objective == Objective::WganGp {
                (0..b).map(|_| noise_rng.random::<f64>()).collect()
            } else {
                Vec::new()
            };
            let ce = critic_objective(spec.objective, &d, &real, &fake, b, &eps, spec.gp_weight);
            trace.domain_clamps += ce.clamped;
            if !ce.value.is_finite() {
                trace.aborted_at = Some(step);
                return Err(Error::NonFiniteLoss { step });
            }
            for (w, gr) in d.params.iter_mut().zip(&ce.grad) {
                *w += lr * gr;
            }
            if spec.objective == Objective::Wgan {
                d.params
                    .iter_mut()
                    .for_each(|w| *w = w.clamp(-spec.clip, spec.clip));
            }
            critic_updates += 1;
            if critic_updates % spec.critic_steps != 0 {
                continue;
            }
            let z = noise(&mut noise_rng, b * spec.noise_dim);
            let g_in = concat_rows(&z, spec.noise_dim, cond.as_deref(), cond_dim, b);
            let (g_loss, grad, clamped) = generator_objective(
                spec.objective,
                &g,
                &d,
                &g_in,
                cond.as_deref(),
                cond_dim,
                b,
                spec.saturating,
            );
            trace.domain_clamps += clamped;
            if !g_loss.is_finite() {
                trace.aborted_at = Some(step);
                return Err(Error::NonFiniteLoss { step });
            }
            for (w, gr) in g.params.iter_mut().zip(&grad) {
                *w -= lr * gr;
            }
            if g.params.iter().chain(&d.params).any(|v| !v.is_finite()) {
                trace.aborted_at = Some(step);
                return Err(Error::NonFiniteLoss { step });
            }
            trace.steps.push(TraceStep {
                step,
                epoch,
                d_loss: ce.value,
                g_loss,
                critic_max_abs: max_abs(&d.params),
            });
        }
        let steps = &trace.steps[first_step..];
        let k = steps.len().max(1) as f64;
        trace.epochs.push(EpochSummary {
            epoch,
            steps: steps.len(),
            mean_d_loss: steps.iter().map(|s| s.d_loss).sum::<f64>() / k,
            mean_g_loss: steps.iter().map(|s| s.g_loss).sum::<f64>() / k,
        });
    }
    let label_proportions =
        label.map(|l| l.counts().iter().map(|&c| c as f64 / n as f64).collect());
    Ok(GanGenerator {
        version: MODEL_VERSION,
        spec: spec.clone(),
        net: g,
        template: TableTemplate::of(train),
        scaler,
        label_proportions,
        categoricals: CategoricalFrequencies::fit(train),
    })
}

/// Writes `step,d_loss,g_loss` rows after `#` metadata lines describing the
/// run.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &TrainTrace, spec: &GanSpec) -> Result<()> {
    let layers = |h: &[usize]| {
        h.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("x")
    };
    let io = |e| Error::io("trace", e);
    writeln!(w, "# objective: {}", spec.objective.name()).map_err(io)?;
    writeln!(w, "# noise_dim: {}", spec.noise_dim).map_err(io)?;
    writeln!(w, "# generator_hidden: {}", layers(&spec.generator_hidden)).map_err(io)?;
    writeln!(
        w,
        "# discriminator_hidden: {}",
        layers(&spec.discriminator_hidden)
    )
    .map_err(io)?;
    writeln!(w, "# batch_size: {}", spec.batch_size).map_err(io)?;
    writeln!(w, "# epochs: {}", spec.epochs).map_err(io)?;
    writeln!(w, "# learning_rate: {}", spec.learning_rate).map_err(io)?;
    writeln!(w, "# critic_steps: {}", spec.critic_steps).map_err(io)?;
    writeln!(w, "# seed: {}", spec.seed).map_err(io)?;
    writeln!(w, "# domain_clamps: {}", trace.domain_clamps).map_err(io)?;
    writeln!(w, "step,d_loss,g_loss").map_err(io)?;
    for s in &trace.steps {
        writeln!(w, "{},{},{}", s.step, s.d_loss, s.g_loss).map_err(io)?;
    }
    Ok(())
}

/// Draws `n` rows. `labels` fixes the label of every row; without it an
/// unconditional generator draws labels from the training proportions and
/// a conditional one fails with `MissingLabels`.
pub fn gan_sample(
    gen: &GanGenerator,
    n: usize,
    labels: Option<&[String]>,
    seed: u64,
) -> Result<Table> {
    let mut r = rng::seeded(rng::derive(seed, "gan-sample"));
    let dict = gen.template.label_dictionary();
    let codes: Option<Vec<u32>> = match (labels, dict) {
        (Some(l), Some(dict)) => {
            if l.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {n} rows",
                    l.len()
                )));
            }
            Some(
                l.iter()
                    .map(|s| {
                        dict.iter()
                            .position(|d| d == s)
                            .map(|i| i as u32)
                            .ok_or_else(|| Error::InvalidArgument(format!("unknown label `{s}`")))
                    })
                    .collect::<Result<_>>()?,
            )
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument(
                "generator was trained without labels".into(),
            ))
        }
        (None, _) if gen.conditional() => return Err(Error::MissingLabels),
        (None, Some(_)) => {
            let props = gen.label_proportions.as_ref().expect("labeled");
            let w = rand::distr::weighted::WeightedIndex::new(props)
                .map_err(|_| Error::DegenerateInput("empty label distribution".into()))?;
            Some(
                (0..n)
                    .map(|_| rand::distr::Distribution::sample(&w, &mut r) as u32)
                    .collect(),
            )
        }
        (None, None) => None,
    };
    let k = gen.spec.noise_dim;
    let cond_dim = if gen.conditional() {
        dict.map_or(0, |d| d.len())
    } else {
        0
    };
    let z = noise(&mut r, n * k);
    let cond = if cond_dim > 0 {
        Some(one_hot(codes.as_ref().expect("conditional"), cond_dim))
    } else {
        None
    };
    let g_in = concat_rows(&z, k, cond.as_deref(), cond_dim, n);
    let mut numeric = if n == 0 {
        Vec::new()
    } else {
        gen.net.predict(&g_in, n)
    };
    let p = gen.net.output_dim();
    for row in numeric.chunks_mut(p) {
        gen.scaler.unscale_row(row);
    }
    let mut cats: Vec<Vec<u32>> = vec![Vec::with_capacity(n); gen.template.dictionaries.len()];
    let label_slot = gen.template.label_slot();
    for i in 0..n {
        let group = codes.as_ref().map_or(0, |c| c[i] as usize);
        gen.categoricals.draw(group, &mut r, &mut cats);
        if let (Some(slot), Some(c)) = (label_slot, &codes) {
            cats[slot].push(c[i]);
        }
    }
    gen.template.build(n, numeric, cats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnData, ColumnSchema};

    fn table(values: &[f64], labels: &[&str]) -> Table {
        Table::from_columns(vec![
            (
                ColumnSchema::numeric("x"),
                ColumnData::Numeric(values.to_vec()),
            ),
            (ColumnSchema::label("y"), ColumnData::from_strings(labels)),
        ])
        .unwrap()
    }

    fn small(objective: Objective, seed: u64) -> GanSpec {
        GanSpec {
            noise_dim: 2,
            generator_hidden: vec![8],
            discriminator_hidden: vec![8],
            epochs: 3,
            batch_size: 16,
            ..GanSpec::new(objective, seed)
        }
    }

    #[test]
    fn vanilla_risk_examples() {
        let v = vanilla_gan_risk(&[0.5; 4], &[0.5; 3]).unwrap();
        assert!((v - 2.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!(vanilla_gan_risk(&[1.0], &[0.0]).unwrap().abs() < 1e-11);
        assert!(vanilla_gan_risk(&[0.0], &[0.5]).unwrap() < -27.0);
        assert!(vanilla_gan_risk(&[], &[0.5]).is_err());
    }

    #[test]
    fn zero_init_first_risk() {
        let vals: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let t = table(&vals, &["a"; 40]);
        let spec = GanSpec {
            init: Init::Zero,
            ..small(Objective::Vanilla, 1)
        };
        let (_, trace) = train_gan(&t, &spec).unwrap();
        assert!((trace.steps[0].d_loss - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn every_objective_trains_and_is_deterministic() {
        let vals: Vec<f64> = (0..60).map(|i| (i % 7) as f64).collect();
        let labels: Vec<&str> = (0..60)
            .map(|i| if i % 2 == 0 { "a" } else { "b" })
            .collect();
        let t = table(&vals, &labels);
        for obj in [
            Objective::Vanilla,
            Objective::Conditional,
            Objective::Wgan,
            Objective::WganGp,
            Objective::FGan(FDivergence::KullbackLeibler),
            Objective::FGan(FDivergence::SquaredHellinger),
        ] {
            let (g, trace) = train_gan(&t, &small(obj, 4)).unwrap();
            assert_eq!(trace.steps.len(), 12);
            assert!(trace
                .steps
                .iter()
                .all(|s| s.d_loss.is_finite() && s.g_loss.is_finite()));
            assert_eq!(trace, train_gan(&t, &small(obj, 4)).unwrap().1);
            let labels: Vec<String> = ["a", "a", "b"].iter().map(|s| s.to_string()).collect();
            let out = gan_sample(&g, 3, Some(&labels), 0).unwrap();
            let lab = out.label().unwrap();
            assert_eq!(
                (0..3).map(|i| lab.value(i)).collect::<Vec<_>>(),
                ["a", "a", "b"]
            );
        }
    }

    #[test]
    fn wgan_keeps_critic_clipped() {
        let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let t = table(&vals, &["a"; 64]);
        let (_, trace) = train_gan(&t, &small(Objective::Wgan, 2)).unwrap();
        assert!(trace.steps.iter().all(|s| s.critic_max_abs <= 0.01));
    }

    #[test]
    fn sampling_contract() {
        let vals: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let labels: Vec<&str> = (0..32).map(|i| if i < 8 { "a" } else { "b" }).collect();
        let t = table(&vals, &labels);
        let (g, _) = train_gan(&t, &small(Objective::Conditional, 0)).unwrap();
        assert!(matches!(
            gan_sample(&g, 3, None, 0),
            Err(Error::MissingLabels)
        ));
        let empty = gan_sample(&g, 0, Some(&[]), 0).unwrap();
        assert_eq!((empty.n_rows(), empty.schema()), (0, t.schema()));
        let (u, _) = train_gan(&t, &small(Objective::Vanilla, 0)).unwrap();
        let out = gan_sample(&u, 5, None, 1).unwrap();
        assert_eq!(out.n_rows(), 5);
        assert!(out.numeric_at(0).unwrap().iter().all(f64::is_finite));
        let back = GanGenerator::from_json(&u.to_json().unwrap()).unwrap();
        assert_eq!(back, u);
        assert_eq!(gan_sample(&back, 5, None, 1).unwrap(), out);
    }

    #[test]
    fn trace_csv_layout() {
        let t = table(&[1.0, 2.0, 3.0, 4.0], &["a"; 4]);
        let spec = small(Objective::Vanilla, 0);
        let (_, trace) = train_gan(&t, &spec).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace, &spec).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "step,d_loss,g_loss");
        assert_eq!(data.len(), 1 + trace.steps.len());
        assert!(text.contains("# generator_hidden: 8"));
    }

    #[test]
    fn diverging_run_reports_its_step() {
        let vals: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let t = table(&vals, &["a"; 40]);
        let spec = GanSpec {
            learning_rate: 1e200,
            ..small(Objective::FGan(FDivergence::KullbackLeibler), 0)
        };
        let (res, trace) = train_gan_traced(&t, &spec);
        assert!(matches!(res, Err(Error::NonFiniteLoss { .. })));
        assert!(trace.aborted_at.is_some());
        assert!(trace.steps.iter().all(|s| s.d_loss.is_finite()));
    }

    #[test]
    fn objective_names_parse() {
        for o in [
            "vanilla",
            "conditional",
            "wgan",
            "wgan-gp",
            "fgan-kl",
            "fgan-h2",
        ] {
            assert_eq!(o.parse::<Objective>().unwrap().name(), o);
        }
        assert!("fgan-js".parse::<Objective>().is_err());
    }
}
