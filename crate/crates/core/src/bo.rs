//! Sequential design loop: initial design, hyperparameter inference,
//! acquisition maximization, evaluation, augmentation.
//!
//! The loop works on the unit box. Grid domains are scaled axis by axis and
//! their nodes are addressed by a row-major linear index (last axis
//! fastest), which also defines tie-breaking.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{Acquisition, Incumbent, PosteriorEnsemble, Sense};
use crate::gp::{fit_posterior, Dataset, Hyperparams, KernelKind, DEFAULT_NOISE};
use crate::hyper::{map_estimate, mcmc_sample, ml_estimate, GradAscentConfig, McmcConfig, PriorSpec, UniformPrior};
use crate::objectives::{check_box, node_index, Objective, ScaledObjective};
use crate::rng::{derive_named, derive_seed, rng_from};
use crate::simplex::{self, SimplexOptions};
use crate::{Error, Result};

/// Search space in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Grid { axes: Vec<Vec<f64>> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn unit_box(dim: usize) -> Self {
        Domain::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Grid { axes } => {
                if axes.is_empty() {
                    return Err(Error::InvalidConfig("grid needs at least one axis".into()));
                }
                for (i, a) in axes.iter().enumerate() {
                    if a.is_empty() || a.iter().any(|v| !v.is_finite()) || a.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::InvalidConfig(format!(
                            "grid axis {i} must be nonempty, finite and strictly increasing"
                        )));
                    }
                }
                Ok(())
            }
            Domain::Box { lower, upper } => check_box(lower, upper),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Grid { axes } => axes.len(),
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Grid { axes } => (
                axes.iter().map(|a| a[0]).collect(),
                axes.iter().map(|a| a[a.len() - 1]).collect(),
            ),
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    /// Number of grid nodes; `None` for boxes.
    pub fn grid_size(&self) -> Option<usize> {
        match self {
            Domain::Grid { axes } => Some(axes.iter().map(Vec::len).product()),
            Domain::Box { .. } => None,
        }
    }

    /// The same domain mapped onto `[0, 1]^d`.
    pub fn to_unit(&self) -> Self {
        match self {
            Domain::Grid { axes } => Domain::Grid {
                axes: axes
                    .iter()
                    .map(|a| {
                        let (lo, span) = (a[0], a[a.len() - 1] - a[0]);
                        a.iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect()
                    })
                    .collect(),
            },
            Domain::Box { lower, .. } => Domain::unit_box(lower.len()),
        }
    }

    /// Grid node at a row-major linear index.
    pub fn grid_point(&self, mut linear: usize) -> Option<Vec<f64>> {
        let Domain::Grid { axes } = self else { return None };
        if linear >= self.grid_size()? {
            return None;
        }
        let mut x = vec![0.0; axes.len()];
        for (d, a) in axes.iter().enumerate().rev() {
            x[d] = a[linear % a.len()];
            linear /= a.len();
        }
        Some(x)
    }

    /// Row-major index of the grid node at `x` (up to rounding).
    pub fn grid_index(&self, x: &[f64]) -> Option<usize> {
        let Domain::Grid { axes } = self else { return None };
        if x.len() != axes.len() {
            return None;
        }
        axes.iter()
            .zip(x)
            .try_fold(0usize, |acc, (a, v)| node_index(a, *v).map(|i| acc * a.len() + i))
    }
}

/// Uniform random points of `domain`; grid nodes are drawn without
/// replacement.
pub fn initial_design(domain: &Domain, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    domain.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("initial design needs at least one point".into()));
    }
    let mut rng = rng_from(seed);
    match domain {
        Domain::Grid { .. } => {
            let available = domain.grid_size().unwrap_or(0);
            if n > available {
                return Err(Error::GridTooSmall { requested: n, available });
            }
            Ok(index::sample(&mut rng, available, n)
                .into_iter()
                .map(|i| domain.grid_point(i).expect("index in range"))
                .collect())
        }
        Domain::Box { lower, upper } => Ok((0..n).map(|_| uniform_point(&mut rng, lower, upper)).collect()),
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower.iter().zip(upper).map(|(l, u)| l + rng.random::<f64>() * (u - l)).collect()
}

/// Effort spent maximizing an acquisition over a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub probes: usize,
    pub local_starts: usize,
    /// Acquisition evaluations per local ascent.
    pub local_evals: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            probes: 1000,
            local_starts: 10,
            local_evals: 150,
        }
    }
}

/// Maximizes `score` over `domain`, never returning a visited point.
///
/// On a grid this is an exhaustive argmax over unvisited nodes with ties
/// going to the lowest linear index. On a box, `opts.probes` uniform
/// probes are scored and the best `opts.local_starts` of them seed bounded
/// simplex ascents; the best point seen overall wins. A winner that
/// coincides with a visited point is nudged by 1e-9 of the box width.
pub fn maximize_acquisition<F>(
    mut score: F,
    domain: &Domain,
    visited: &[Vec<f64>],
    opts: &SearchOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    match domain {
        Domain::Grid { .. } => {
            let taken: HashSet<usize> = visited.iter().filter_map(|v| domain.grid_index(v)).collect();
            let mut best: Option<(usize, f64)> = None;
            for i in 0..domain.grid_size().unwrap_or(0) {
                if taken.contains(&i) {
                    continue;
                }
                let s = score(&domain.grid_point(i).expect("index in range"))?;
                let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            let (i, s) = best.ok_or(Error::GridExhausted)?;
            Ok((domain.grid_point(i).expect("index in range"), s))
        }
        Domain::Box { lower, upper } => {
            let mut probes: Vec<(Vec<f64>, f64)> = Vec::with_capacity(opts.probes.max(1));
            for _ in 0..opts.probes.max(1) {
                let x = uniform_point(rng, lower, upper);
                let s = score(&x)?;
                probes.push((x, if s.is_nan() { f64::NEG_INFINITY } else { s }));
            }
            // Stable sort keeps probe order among ties.
            probes.sort_by(|a, b| b.1.total_cmp(&a.1));
            let (mut best_x, mut best_s) = probes[0].clone();
            let simplex_opts = SimplexOptions {
                initial_step: lower.iter().zip(upper).map(|(l, u)| 0.05 * (u - l)).collect(),
                max_evals: opts.local_evals,
                diameter_tol: 1e-7,
                lower: lower.clone(),
                upper: upper.clone(),
            };
            let mut failure = None;
            for (start, _) in probes.iter().take(opts.local_starts) {
                let outcome = simplex::minimize(
                    |x| match score(x) {
                        Ok(s) => Some(if s.is_nan() { f64::INFINITY } else { -s }),
                        Err(e) => {
                            failure = Some(e);
                            None
                        }
                    },
                    start,
                    &simplex_opts,
                );
                if let Some(e) = failure.take() {
                    return Err(e);
                }
                if -outcome.best_f > best_s {
                    best_s = -outcome.best_f;
                    best_x = outcome.best_x;
                }
            }
            avoid_collisions(&mut best_x, visited, lower, upper, rng);
            Ok((best_x, best_s))
        }
    }
}

fn avoid_collisions(x: &mut [f64], visited: &[Vec<f64>], lower: &[f64], upper: &[f64], rng: &mut ChaCha8Rng) {
    let same = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .zip(lower.iter().zip(upper))
            .all(|((a, b), (l, u))| (a - b).abs() <= 1e-12 * (u - l))
    };
    while visited.iter().any(|v| same(v, x)) {
        for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
            let nudge = 1e-9 * (u - l);
            let step = if rng.random::<bool>() { nudge } else { -nudge };
            let moved = *v + step;
            *v = if moved < *l || moved > *u { *v - step } else { moved };
        }
    }
}

/// How θ is obtained each iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "backend")]
pub enum Inference {
    /// Gradient ascent on the likelihood from a fixed starting point.
    Ml {
        #[serde(default = "default_init_amplitude")]
        init_amplitude: f64,
        #[serde(default = "default_init_lengthscale")]
        init_lengthscale: f64,
        #[serde(default)]
        ascent: GradAscentConfig,
    },
    /// Projected ascent on log prior + likelihood from the prior centre.
    Map {
        #[serde(default = "Inference::default_priors")]
        priors: PriorSpec,
        #[serde(default)]
        ascent: GradAscentConfig,
    },
    /// Metropolis samples, re-drawn every iteration.
    Mcmc {
        #[serde(default = "Inference::default_priors")]
        priors: PriorSpec,
        #[serde(default)]
        mcmc: McmcConfig,
    },
}

fn default_init_amplitude() -> f64 {
    1.0
}

fn default_init_lengthscale() -> f64 {
    0.5
}

impl Inference {
    pub fn name(&self) -> &'static str {
        match self {
            Inference::Ml { .. } => "ml",
            Inference::Map { .. } => "map",
            Inference::Mcmc { .. } => "mcmc",
        }
    }

    /// The priors `σ ∼ U(0.1, 6)`, `l ∼ U(0.1, 1)`.
    pub fn default_priors() -> PriorSpec {
        PriorSpec {
            signal_amplitude: UniformPrior { lower: 0.1, upper: 6.0 },
            lengthscale: UniformPrior { lower: 0.1, upper: 1.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Inference::Ml {
                init_amplitude,
                init_lengthscale,
                ascent,
            } => {
                if !(*init_amplitude > 0.0 && *init_lengthscale > 0.0) {
                    return Err(Error::InvalidConfig("ML starting point must be positive".into()));
                }
                ascent.validate()
            }
            Inference::Map { priors, ascent } => {
                priors.validate()?;
                ascent.validate()
            }
            Inference::Mcmc { priors, mcmc } => {
                priors.validate()?;
                mcmc.validate()
            }
        }
    }
}

/// Summary of the hyperparameters used in one iteration (ensemble mean for MCMC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub signal_amplitude: f64,
    pub lengthscales: Vec<f64>,
    pub samples: usize,
    pub skipped: usize,
}

/// Fits the surrogate(s) for `data` with the chosen backend. `stream`
/// separates the random streams of successive calls.
#[allow(clippy::too_many_arguments)]
pub fn infer_posteriors(
    data: &Dataset,
    kind: KernelKind,
    inference: &Inference,
    dim: usize,
    noise_variance: f64,
    shared_lengthscale: bool,
    seed: u64,
    stream: u64,
) -> Result<(PosteriorEnsemble, ThetaSummary)> {
    let samples: Vec<Hyperparams> = match inference {
        Inference::Ml {
            init_amplitude,
            init_lengthscale,
            ascent,
        } => {
            let init = Hyperparams::isotropic(*init_amplitude, *init_lengthscale, dim, noise_variance)?;
            let cfg = GradAscentConfig {
                shared_lengthscale,
                ..*ascent
            };
            if data.len() < 2 {
                vec![init]
            } else {
                vec![ml_estimate(data, kind, &init, &cfg)?.hyper]
            }
        }
        Inference::Map { priors, ascent } => {
            let init = priors.centre(dim, noise_variance);
            let cfg = GradAscentConfig {
                shared_lengthscale,
                ..*ascent
            };
            vec![map_estimate(data, kind, priors, &init, &cfg)?.hyper]
        }
        Inference::Mcmc { priors, mcmc } => {
            let cfg = McmcConfig {
                shared_lengthscale,
                seed: derive_seed(derive_named(seed, "mcmc"), stream),
                ..*mcmc
            };
            let chain = mcmc_sample(data, kind, priors, dim, noise_variance, &cfg)?;
            if let Some(w) = &chain.warning {
                log::warn!("{w}");
            }
            chain.samples
        }
    };
    let ensemble = if samples.len() == 1 {
        PosteriorEnsemble::single(fit_posterior(data, kind, &samples[0])?)
    } else {
        PosteriorEnsemble::fit(&samples, data, kind)?
    };
    let used = ensemble.posteriors();
    let m = used.len() as f64;
    let summary = ThetaSummary {
        signal_amplitude: used.iter().map(|p| p.hyperparams().signal_amplitude).sum::<f64>() / m,
        lengthscales: (0..dim)
            .map(|d| used.iter().map(|p| p.hyperparams().lengthscales[d]).sum::<f64>() / m)
            .collect(),
        samples: used.len(),
        skipped: ensemble.skipped(),
    };
    Ok((ensemble, summary))
}

/// Affine output map applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputTransform {
    /// Fit the (already scaled) objective values as they are.
    None,
    /// Subtract the sample mean and divide by the sample standard deviation.
    Standardize,
}

impl OutputTransform {
    /// `(offset, scale)` with `fitted = (y − offset) / scale`.
    pub fn coefficients(self, ys: &[f64]) -> (f64, f64) {
        match self {
            OutputTransform::None => (0.0, 1.0),
            OutputTransform::Standardize => {
                let n = ys.len() as f64;
                if ys.is_empty() {
                    return (0.0, 1.0);
                }
                let mean = ys.iter().sum::<f64>() / n;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (mean, if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 })
            }
        }
    }
}

/// One sequential-design run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub domain: Domain,
    pub kernel: KernelKind,
    pub inference: Inference,
    pub init_count: usize,
    pub max_iterations: usize,
    pub noise_variance: f64,
    pub output_transform: OutputTransform,
    pub shared_lengthscale: bool,
    pub search: SearchOptions,
    pub seed: u64,
}

impl BoConfig {
    pub fn new(domain: Domain, kernel: KernelKind, inference: Inference, init_count: usize, max_iterations: usize) -> Self {
        let grid = matches!(domain, Domain::Grid { .. });
        Self {
            domain,
            kernel,
            inference,
            init_count,
            max_iterations,
            noise_variance: DEFAULT_NOISE,
            output_transform: OutputTransform::Standardize,
            shared_lengthscale: grid,
            search: SearchOptions::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.inference.validate()?;
        if self.init_count == 0 {
            return Err(Error::InvalidConfig("init_count must be at least 1".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidConfig("noise_variance must be non-negative".into()));
        }
        if let Some(n) = self.domain.grid_size() {
            let needed = self.init_count + self.max_iterations;
            if needed > n {
                return Err(Error::GridTooSmall { requested: needed, available: n });
            }
        }
        Ok(())
    }
}

/// One evaluation in natural units. Initial-design rows have `iter = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub incumbent: f64,
}

/// Per-iteration diagnostics not carried in the trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub iter: usize,
    pub acquisition: f64,
    pub theta: ThetaSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub iter: usize,
    pub x: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub sense: Sense,
    pub init_count: usize,
    pub rows: Vec<TraceRow>,
    pub iterations: Vec<IterationInfo>,
    pub failures: Vec<EvaluationFailure>,
    /// Objective calls made, failed ones included.
    pub evaluation_count: usize,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
}

impl BoTrace {
    pub fn best(&self) -> Option<&TraceRow> {
        self.rows.last().and_then(|last| self.rows.iter().find(|r| r.y == last.incumbent))
    }

    pub fn best_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.incumbent)
    }

    /// Number of evaluations after which the incumbent first equals `target`
    /// within `tol`, if ever.
    pub fn evaluations_to_reach(&self, target: f64, tol: f64) -> Option<usize> {
        self.rows.iter().position(|r| (r.incumbent - target).abs() <= tol).map(|p| p + 1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_trace_csv(&self.rows, out)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Writes `iter,x0,…,x{d-1},y,incumbent`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.x.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(["y".to_string(), "incumbent".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.iter.to_string()];
        rec.extend(r.x.iter().map(f64::to_string));
        rec.extend([r.y.to_string(), r.incumbent.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let n = header.len();
    if n < 3 || &header[0] != "iter" || &header[n - 2] != "y" || &header[n - 1] != "incumbent" {
        return Err(Error::InvalidData("trace header must be iter,x…,y,incumbent".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::InvalidData(format!("bad number `{s}` in trace: {e}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let iter = rec[0]
            .parse::<usize>()
            .map_err(|e| Error::InvalidData(format!("bad iteration `{}`: {e}", &rec[0])))?;
        let x = (1..n - 2).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow {
            iter,
            x,
            y: num(&rec[n - 2])?,
            incumbent: num(&rec[n - 1])?,
        });
    }
    Ok(rows)
}

/// State shared by the sequential design loops: data in unit/scaled form,
/// the trace in natural units, and failure bookkeeping.
pub(crate) struct Recorder<'a, O> {
    pub objective: &'a ScaledObjective<O>,
    pub data: Dataset,
    pub visited: Vec<Vec<f64>>,
    pub trace: BoTrace,
}

impl<'a, O: Objective> Recorder<'a, O> {
    pub fn new(objective: &'a ScaledObjective<O>, init_count: usize) -> Self {
        Self {
            objective,
            data: Dataset::new(),
            visited: Vec::new(),
            trace: BoTrace {
                sense: objective.sense(),
                init_count,
                rows: Vec::new(),
                iterations: Vec::new(),
                failures: Vec::new(),
                evaluation_count: 0,
                aborted: None,
            },
        }
    }

    /// Evaluates at unit point `u`; failures are recorded and returned.
    pub fn evaluate(&mut self, iter: usize, u: Vec<f64>) -> Result<()> {
        self.trace.evaluation_count += 1;
        let x = self.objective.to_natural(&u);
        match self.objective.evaluate_raw(&u) {
            Ok(y) if y.is_finite() => {
                let scaled = self.objective.scale_output(y);
                let sense = self.objective.sense();
                let incumbent = match self.trace.rows.last() {
                    Some(r) if !sense.better(y, r.incumbent) => r.incumbent,
                    _ => y,
                };
                self.trace.rows.push(TraceRow { iter, x, y, incumbent });
                self.data.push(u.clone(), scaled)?;
                self.visited.push(u);
                Ok(())
            }
            Ok(y) => {
                let e = Error::Objective(format!("non-finite value {y}"));
                self.fail(iter, x, &e, u);
                Err(e)
            }
            Err(e) => {
                self.fail(iter, x, &e, u);
                Err(e)
            }
        }
    }

    fn fail(&mut self, iter: usize, x: Vec<f64>, e: &Error, u: Vec<f64>) {
        log::warn!("evaluation at {x:?} failed: {e}");
        self.trace.failures.push(EvaluationFailure {
            iter,
            x,
            message: e.to_string(),
        });
        // Never propose a failed point again.
        self.visited.push(u);
    }

    pub fn abort(mut self, e: &Error) -> BoTrace {
        self.trace.aborted = Some(e.to_string());
        self.trace
    }
}

/// Runs the initial design and `cfg.max_iterations` acquisition rounds of
/// expected improvement against `objective`, which must be defined on
/// `cfg.domain`. A failed evaluation is retried once at the next-best
/// candidate; a second failure ends the run with a partial trace.
pub fn run_bo<O: Objective>(cfg: &BoConfig, objective: &ScaledObjective<O>) -> Result<BoTrace> {
    cfg.validate()?;
    check_domain_matches(&cfg.domain, objective)?;
    let unit = cfg.domain.to_unit();
    let dim = unit.dim();
    let mut rec = Recorder::new(objective, cfg.init_count);

    let design = initial_design(&unit, cfg.init_count, derive_named(cfg.seed, "design"))?;
    let mut design_rng = rng_from(derive_named(cfg.seed, "design-retry"));
    for u in design {
        if let Err(e) = rec.evaluate(0, u) {
            // Retry once with a fresh draw.
            let Some(alt) = fresh_point(&unit, &rec.visited, &mut design_rng) else {
                return Ok(rec.abort(&e));
            };
            if let Err(e) = rec.evaluate(0, alt) {
                return Ok(rec.abort(&e));
            }
        }
    }

    let mut rng = rng_from(derive_named(cfg.seed, "acquisition"));
    for iter in 1..=cfg.max_iterations {
        let (offset, scale) = cfg.output_transform.coefficients(rec.data.outputs());
        let fitted = rec.data.map_outputs(|y| (y - offset) / scale);
        let (ensemble, theta) = match infer_posteriors(
            &fitted,
            cfg.kernel,
            &cfg.inference,
            dim,
            cfg.noise_variance,
            cfg.shared_lengthscale,
            cfg.seed,
            iter as u64,
        ) {
            Ok(v) => v,
            Err(e) => return Ok(rec.abort(&e)),
        };
        let incumbent = Incumbent::from_outputs(fitted.outputs(), Sense::Minimize).expect("design is nonempty");
        let acq = Acquisition::ExpectedImprovement(incumbent);

        let mut attempt = 0;
        loop {
            let (u, a) = match maximize_acquisition(|x| ensemble.score(&acq, x), &unit, &rec.visited, &cfg.search, &mut rng)
            {
                Ok(v) => v,
                Err(e) => return Ok(rec.abort(&e)),
            };
            match rec.evaluate(iter, u) {
                Ok(()) => {
                    rec.trace.iterations.push(IterationInfo {
                        iter,
                        acquisition: a,
                        theta: theta.clone(),
                    });
                    break;
                }
                Err(e) if attempt == 0 => {
                    log::warn!("iteration {iter}: retrying with the next-best candidate after: {e}");
                    attempt += 1;
                }
                Err(e) => return Ok(rec.abort(&e)),
            }
        }
    }
    Ok(rec.trace)
}

fn fresh_point(unit: &Domain, visited: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    match unit {
        Domain::Grid { .. } => {
            let taken: HashSet<usize> = visited.iter().filter_map(|v| unit.grid_index(v)).collect();
            let free: Vec<usize> = (0..unit.grid_size()?).filter(|i| !taken.contains(i)).collect();
            if free.is_empty() {
                return None;
            }
            unit.grid_point(free[rng.random_range(0..free.len())])
        }
        Domain::Box { lower, upper } => Some(uniform_point(rng, lower, upper)),
    }
}

pub(crate) fn check_domain_matches<O: Objective>(domain: &Domain, objective: &ScaledObjective<O>) -> Result<()> {
    let (lower, upper) = domain.bounds();
    let (ol, ou) = objective.natural_bounds();
    if lower.len() != ol.len() {
        return Err(Error::DimensionMismatch {
            expected: ol.len(),
            found: lower.len(),
        });
    }
    let close = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0))
    };
    if !close(&lower, ol) || !close(&upper, ou) {
        return Err(Error::InvalidConfig(format!(
            "domain [{lower:?}, {upper:?}] does not match the objective's [{ol:?}, {ou:?}]"
        )));
    }
    Ok(())
}
