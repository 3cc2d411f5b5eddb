//! Config-driven study runner.
//!
//! A study is one JSON document:
//!
//! ```json
//! { "study_id": "protection", "seed": 2024,
//!   "study": { "kind": "bo-grid", "objective": "synthetic", "domain": "from-objective",
//!              "inference": { "backend": "mcmc", "priors": { ... } }, "restarts": 20 } }
//! ```
//!
//! `kind` is one of `bo-grid`, `bo-continuous`, `baseline-suite`,
//! `exceedance`, `monte-carlo`, `impedance-scan`; the remaining fields of
//! `study` depend on the kind (see the structs below, all fields with
//! defaults may be omitted). Relative file paths are resolved against the
//! config file's directory. All randomness is derived from `seed`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::acquisition::Sense;
use crate::baselines::{dual_annealing, nelder_mead, random_search, AnnealingOptions, BaselineResult};
use crate::bo::{run_bo, write_trace_csv, BoConfig, BoTrace, Domain, Inference, OutputTransform, SearchOptions, TraceRow};
use crate::emt::{self, CircuitParams};
use crate::exceedance::{
    estimate_exceedance_probability, monte_carlo_oracle, run_classification, threshold_for_exceedance, ExceedanceStudy,
};
use crate::gp::KernelKind;
use crate::hyper::GradAscentConfig;
use crate::objectives::{
    synthetic_risk_surface, EnergizationInputs, EnergizationObjective, GridObjective, Objective, ScaledObjective,
};
use crate::rng::{derive_named, derive_seed};
use crate::stats::quantile_sorted;
use crate::Error;

/// Failure of a study, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    /// The config does not parse or validate (exit code 2).
    #[error("invalid study config: {0}")]
    Config(String),
    /// The study failed while running (exit code 3).
    #[error("study failed: {0}")]
    Runtime(#[from] Error),
}

impl StudyError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 2,
            StudyError::Runtime(_) => 3,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> StudyError {
    StudyError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FromObjective {
    FromObjective,
}

/// Either an explicit domain or the grid of the lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    FromObjective(FromObjective),
    Explicit(Domain),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSource {
    /// `k,phi,risk` CSV file.
    File(PathBuf),
    /// The built-in two-bowl 9×20 surface.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergizationSpec {
    #[serde(default = "default_inputs")]
    pub inputs: EnergizationInputs,
    /// Circuit data; the built-in defaults when omitted.
    #[serde(default)]
    pub circuit: Option<CircuitParams>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_inputs() -> EnergizationInputs {
    EnergizationInputs::SwitchingTime
}
fn default_dt() -> f64 {
    emt::DEFAULT_DT
}
fn default_duration() -> f64 {
    emt::DEFAULT_DURATION
}

impl EnergizationSpec {
    fn build(&self) -> Result<EnergizationObjective, StudyError> {
        let params = self.circuit.clone().unwrap_or_default();
        params.validate().map_err(invalid)?;
        if !(self.dt > 0.0 && self.dt <= 50e-6) {
            return Err(invalid(format!("dt must be in (0, 50 µs], got {}", self.dt)));
        }
        if !(self.duration >= 0.5) {
            return Err(invalid(format!("duration must be at least 0.5 s, got {}", self.duration)));
        }
        let mut o = EnergizationObjective::new(params, self.inputs);
        o.dt = self.dt;
        o.duration = self.duration;
        Ok(o)
    }
}

/// Reference optimum for optimality gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleSpec {
    Value(f64),
    /// Evenly spaced sweep of a one-dimensional objective.
    DenseSweep { points: usize },
    /// CSV with a `y` column; the best value under the study's sense is used.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoGridStudy {
    pub objective: GridSource,
    pub domain: DomainSpec,
    #[serde(default)]
    pub sense: Sense,
    #[serde(default = "default_grid_kernel")]
    pub kernel: KernelKind,
    pub inference: Inference,
    #[serde(default = "default_grid_init")]
    pub init_count: usize,
    #[serde(default = "default_grid_iterations")]
    pub max_iterations: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default = "default_transform")]
    pub output_transform: OutputTransform,
}

fn default_grid_kernel() -> KernelKind {
    KernelKind::SquaredExponential
}
fn default_grid_init() -> usize {
    3
}
fn default_grid_iterations() -> usize {
    20
}
fn one() -> usize {
    1
}
fn default_transform() -> OutputTransform {
    OutputTransform::Standardize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoContinuousStudy {
    pub objective: EnergizationSpec,
    pub domain: Domain,
    #[serde(default = "maximize")]
    pub sense: Sense,
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    #[serde(default = "default_continuous_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_map")]
    pub inference: Inference,
    pub init_count: usize,
    pub max_iterations: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default = "default_transform")]
    pub output_transform: OutputTransform,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
}

fn maximize() -> Sense {
    Sense::Maximize
}
fn default_divisor() -> f64 {
    800.0
}
fn default_continuous_kernel() -> KernelKind {
    KernelKind::Matern52
}
fn default_map() -> Inference {
    Inference::Map {
        priors: Inference::default_priors(),
        ascent: GradAscentConfig::default(),
    }
}

/// One method of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum MethodSpec {
    Bo {
        #[serde(default = "default_continuous_kernel")]
        kernel: KernelKind,
        #[serde(default = "default_map")]
        inference: Inference,
        init_count: usize,
        max_iterations: usize,
        #[serde(default = "default_transform")]
        output_transform: OutputTransform,
    },
    Random {
        budget: usize,
    },
    NelderMead {
        /// Starting point in natural units.
        x0: Vec<f64>,
        budget: usize,
    },
    DualAnnealing {
        budget: usize,
        #[serde(default)]
        options: AnnealingOptions,
    },
}

impl MethodSpec {
    fn label(&self) -> String {
        match self {
            MethodSpec::Bo { .. } => "bo".into(),
            MethodSpec::Random { .. } => "random".into(),
            MethodSpec::NelderMead { x0, .. } => {
                format!("nelder-mead@{}", x0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
            }
            MethodSpec::DualAnnealing { .. } => "dual-annealing".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSuiteStudy {
    pub objective: EnergizationSpec,
    #[serde(default = "maximize")]
    pub sense: Sense,
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    pub oracle: OracleSpec,
    pub methods: Vec<MethodSpec>,
    /// Independent seeds per stochastic method.
    #[serde(default = "one")]
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSpecKv {
    /// Fixed threshold in kV.
    Kv(f64),
    /// Threshold exceeded by `exceed_fraction` of an even sweep of the
    /// (one-dimensional) objective.
    Calibrate { exceed_fraction: f64, sweep_points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExceedanceStudySpec {
    pub objective: EnergizationSpec,
    pub threshold: ThresholdSpecKv,
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_n_acquire")]
    pub n_acquire: usize,
    #[serde(default = "default_n_estimate")]
    pub n_estimate: usize,
    #[serde(default = "default_continuous_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_map")]
    pub inference: Inference,
    /// Simulator runs of the Monte Carlo reference; 0 skips it.
    #[serde(default = "default_mc_samples")]
    pub oracle_samples: usize,
    #[serde(default = "default_bin")]
    pub histogram_bin_kv: f64,
}

fn default_n_init() -> usize {
    5
}
fn default_n_acquire() -> usize {
    10
}
fn default_n_estimate() -> usize {
    100_000
}
fn default_mc_samples() -> usize {
    7000
}
fn default_bin() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloStudy {
    pub objective: EnergizationSpec,
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
    /// Exceedance threshold in kV.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "default_bin")]
    pub histogram_bin_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceScanStudy {
    #[serde(default)]
    pub circuit: Option<CircuitParams>,
    #[serde(default = "default_fmin")]
    pub fmin: f64,
    #[serde(default = "default_fmax")]
    pub fmax: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Also measure each frequency with the time-domain solver.
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_fmin() -> f64 {
    20.0
}
fn default_fmax() -> f64 {
    300.0
}
fn default_points() -> usize {
    20
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyKind {
    BoGrid(BoGridStudy),
    BoContinuous(BoContinuousStudy),
    BaselineSuite(BaselineSuiteStudy),
    Exceedance(ExceedanceStudySpec),
    MonteCarlo(MonteCarloStudy),
    ImpedanceScan(ImpedanceScanStudy),
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::BoGrid(_) => "bo-grid",
            StudyKind::BoContinuous(_) => "bo-continuous",
            StudyKind::BaselineSuite(_) => "baseline-suite",
            StudyKind::Exceedance(_) => "exceedance",
            StudyKind::MonteCarlo(_) => "monte-carlo",
            StudyKind::ImpedanceScan(_) => "impedance-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study_id: String,
    pub seed: u64,
    pub kind: StudyKind,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    /// The document as given, echoed into the report.
    pub raw: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    study_id: String,
    #[serde(default)]
    seed: u64,
    study: Value,
}

fn parse_at<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, StudyError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        StudyError::Config(format!("{at}: {}", e.inner()))
    })
}

impl StudyConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, StudyError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| invalid(format!("not valid JSON: {e}")))?;
        let env: Envelope = parse_at(raw.clone(), "config")?;
        if env.study_id.trim().is_empty()
            || env.study_id.contains(['/', '\\'])
            || env.study_id == "."
            || env.study_id == ".."
        {
            return Err(invalid("study_id must be a nonempty file-name-safe string"));
        }
        let mut body = env.study;
        let kind = body
            .as_object_mut()
            .ok_or_else(|| invalid("study: expected an object"))?
            .remove("kind")
            .ok_or_else(|| invalid("study: missing field `kind`"))?;
        let kind = match kind.as_str() {
            Some("bo-grid") => StudyKind::BoGrid(parse_at(body, "study")?),
            Some("bo-continuous") => StudyKind::BoContinuous(parse_at(body, "study")?),
            Some("baseline-suite") => StudyKind::BaselineSuite(parse_at(body, "study")?),
            Some("exceedance") => StudyKind::Exceedance(parse_at(body, "study")?),
            Some("monte-carlo") => StudyKind::MonteCarlo(parse_at(body, "study")?),
            Some("impedance-scan") => StudyKind::ImpedanceScan(parse_at(body, "study")?),
            other => {
                return Err(invalid(format!(
                    "study.kind: unknown study kind {other:?}; expected one of bo-grid, bo-continuous, \
                     baseline-suite, exceedance, monte-carlo, impedance-scan"
                )))
            }
        };
        Ok(Self {
            study_id: env.study_id,
            seed: env.seed,
            kind,
            base_dir: base_dir.into(),
            raw,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StudyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Files go to `out_dir/<study_id>/`.
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Replaces the config's seed.
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            jobs: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub study_id: String,
    pub kind: String,
    pub seed: u64,
    pub config: Value,
    pub summary: Value,
    pub wall_time_s: f64,
    /// Written files, relative to the study's output directory.
    pub files: Vec<String>,
}

/// Output directory plus the list of files written to it.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

/// Runs a study and writes its outputs; `summary.json` holds the report.
pub fn run_study(cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyReport, StudyError> {
    with_jobs(opts.jobs, || run_in_pool(cfg, opts))
}

/// Runs `f` on a dedicated pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T, StudyError> + Send) -> Result<T, StudyError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(invalid("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| StudyError::Runtime(Error::InvalidConfig(e.to_string())))?;
    pool.install(f)
}

fn run_in_pool(cfg: &StudyConfig, opts: &RunOptions) -> Result<StudyReport, StudyError> {
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(cfg.seed);
    let dir = opts.out_dir.join(&cfg.study_id);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let mut out = Outputs { dir, files: Vec::new() };
    let summary = match &cfg.kind {
        StudyKind::BoGrid(s) => run_bo_grid(cfg, s, seed, &mut out)?,
        StudyKind::BoContinuous(s) => run_bo_continuous(cfg, s, seed, &mut out)?,
        StudyKind::BaselineSuite(s) => run_baseline_suite(cfg, s, seed, &mut out)?,
        StudyKind::Exceedance(s) => run_exceedance(s, seed, &mut out)?,
        StudyKind::MonteCarlo(s) => run_monte_carlo(s, seed, &mut out)?,
        StudyKind::ImpedanceScan(s) => run_impedance_scan(s, &mut out)?,
    };
    let summary_path = out.path("summary.json");
    let report = StudyReport {
        study_id: cfg.study_id.clone(),
        kind: cfg.kind.name().to_string(),
        seed,
        config: cfg.raw.clone(),
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
        files: out.files.clone(),
    };
    std::fs::write(summary_path, serde_json::to_string_pretty(&report).map_err(Error::from)?).map_err(Error::from)?;
    Ok(report)
}

fn load_grid(cfg: &StudyConfig, source: &GridSource) -> Result<GridObjective, StudyError> {
    match source {
        GridSource::Synthetic => Ok(synthetic_risk_surface()),
        GridSource::File(p) => GridObjective::load(cfg.resolve(p)).map_err(invalid),
    }
}

fn trace_name(restart: usize, restarts: usize) -> String {
    if restarts == 1 {
        "trace.csv".to_string()
    } else {
        format!("trace_r{restart:02}.csv")
    }
}

fn run_bo_grid(cfg: &StudyConfig, s: &BoGridStudy, seed: u64, out: &mut Outputs) -> Result<Value, StudyError> {
    let grid = load_grid(cfg, &s.objective)?;
    let domain = match &s.domain {
        DomainSpec::FromObjective(_) => Domain::Grid { axes: grid.axes() },
        DomainSpec::Explicit(d) => d.clone(),
    };
    if s.restarts == 0 {
        return Err(invalid("study.restarts must be at least 1"));
    }
    let mut bo = BoConfig::new(domain, s.kernel, s.inference.clone(), s.init_count, s.max_iterations);
    bo.output_transform = s.output_transform;
    bo.validate().map_err(invalid)?;
    // Fail on a domain/table mismatch before any work starts.
    crate::bo::check_domain_matches(&bo.domain, &ScaledObjective::plain(&grid).map_err(invalid)?).map_err(invalid)?;

    let optimum = match s.sense {
        Sense::Minimize => grid.argmin().1,
        Sense::Maximize => {
            (0..grid.k_axis().len())
                .flat_map(|i| (0..grid.phi_axis().len()).map(move |j| (i, j)))
                .map(|(i, j)| grid.value(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let traces: Vec<(BoTrace, usize)> = (0..s.restarts)
        .into_par_iter()
        .map(|r| {
            let obj = ScaledObjective::new(&grid, 1.0, s.sense)?;
            let run_cfg = BoConfig {
                seed: derive_seed(seed, r as u64),
                ..bo.clone()
            };
            let trace = run_bo(&run_cfg, &obj)?;
            Ok((trace, obj.evaluations()))
        })
        .collect::<Result<_, Error>>()?;
    let mut per_run = Vec::new();
    let mut converged = 0;
    for (r, (trace, calls)) in traces.iter().enumerate() {
        trace.save_csv(out.path(&trace_name(r, s.restarts))).map_err(StudyError::Runtime)?;
        let reached = trace.evaluations_to_reach(optimum, 1e-12);
        converged += usize::from(reached.is_some());
        per_run.push(json!({
            "restart": r,
            "best": trace.best_value(),
            "evaluations": calls,
            "evaluations_to_optimum": reached,
            "aborted": trace.aborted,
        }));
    }
    Ok(json!({
        "backend": s.inference.name(),
        "optimum": optimum,
        "restarts": s.restarts,
        "restarts_converged": converged,
        "runs": per_run,
    }))
}

fn run_bo_continuous(cfg: &StudyConfig, s: &BoContinuousStudy, seed: u64, out: &mut Outputs) -> Result<Value, StudyError> {
    let objective = s.objective.build()?;
    if s.restarts == 0 {
        return Err(invalid("study.restarts must be at least 1"));
    }
    let mut bo = BoConfig::new(s.domain.clone(), s.kernel, s.inference.clone(), s.init_count, s.max_iterations);
    bo.output_transform = s.output_transform;
    bo.search = s.search;
    bo.validate().map_err(invalid)?;
    let probe = ScaledObjective::new(&objective, s.divisor, s.sense).map_err(invalid)?;
    crate::bo::check_domain_matches(&bo.domain, &probe).map_err(invalid)?;
    let oracle = s
        .oracle
        .as_ref()
        .map(|o| oracle_value(cfg, o, &objective, s.sense))
        .transpose()?;

    let traces: Vec<BoTrace> = (0..s.restarts)
        .into_par_iter()
        .map(|r| {
            let obj = ScaledObjective::new(&objective, s.divisor, s.sense)?;
            run_bo(
                &BoConfig {
                    seed: derive_seed(seed, r as u64),
                    ..bo.clone()
                },
                &obj,
            )
        })
        .collect::<Result<_, Error>>()?;
    let mut runs = Vec::new();
    for (r, t) in traces.iter().enumerate() {
        t.save_csv(out.path(&trace_name(r, s.restarts)))?;
        let best = t.best_value();
        runs.push(json!({
            "restart": r,
            "best": best,
            "best_x": t.best().map(|b| b.x.clone()),
            "evaluations": t.evaluation_count,
            "optimality_gap_pct": oracle.zip(best).map(|(o, b)| gap_pct(b, o)),
            "aborted": t.aborted,
        }));
    }
    Ok(json!({ "oracle": oracle, "restarts": s.restarts, "runs": runs }))
}

/// `|best − oracle| / |oracle| · 100`.
pub fn gap_pct(best: f64, oracle: f64) -> f64 {
    (best - oracle).abs() / oracle.abs() * 100.0
}

/// Evenly spaced sweep of a one-dimensional objective (endpoints included).
pub fn dense_sweep<O: Objective>(objective: &O, points: usize) -> Result<Vec<(f64, f64)>, Error> {
    let (lo, hi) = objective.bounds();
    if lo.len() != 1 {
        return Err(Error::InvalidConfig("a dense sweep needs a one-dimensional objective".into()));
    }
    if points < 2 {
        return Err(Error::InvalidConfig("a dense sweep needs at least two points".into()));
    }
    (0..points)
        .into_par_iter()
        .map(|i| {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (points - 1) as f64;
            objective.evaluate(&[x]).map(|y| (x, y))
        })
        .collect()
}

fn oracle_value<O: Objective>(cfg: &StudyConfig, spec: &OracleSpec, objective: &O, sense: Sense) -> Result<f64, StudyError> {
    let best = |ys: &mut dyn Iterator<Item = f64>| match sense {
        Sense::Minimize => ys.fold(f64::INFINITY, f64::min),
        Sense::Maximize => ys.fold(f64::NEG_INFINITY, f64::max),
    };
    let v = match spec {
        OracleSpec::Value(v) => *v,
        OracleSpec::DenseSweep { points } => {
            if objective.dim() != 1 {
                return Err(invalid("study.oracle: dense-sweep needs a one-dimensional objective"));
            }
            best(&mut dense_sweep(objective, *points)?.into_iter().map(|(_, y)| y))
        }
        OracleSpec::File(p) => {
            let path = cfg.resolve(p);
            let mut rdr = csv::Reader::from_path(&path).map_err(|e| invalid(format!("oracle file {}: {e}", path.display())))?;
            let col = rdr
                .headers()
                .map_err(invalid)?
                .iter()
                .position(|h| h == "y")
                .ok_or_else(|| invalid("oracle file needs a `y` column"))?;
            let mut ys = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(invalid)?;
                ys.push(rec[col].parse::<f64>().map_err(invalid)?);
            }
            best(&mut ys.into_iter())
        }
    };
    if !v.is_finite() || v == 0.0 {
        return Err(invalid(format!("oracle optimum must be finite and nonzero, got {v}")));
    }
    Ok(v)
}

/// One row of a method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub evaluations: usize,
    pub optimality_gap_pct: f64,
    pub converged: bool,
}

pub fn write_compare_csv<W: std::io::Write>(rows: &[CompareRow], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_compare_csv<R: std::io::Read>(input: R) -> Result<Vec<CompareRow>, Error> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Result of [`compare_methods`].
#[derive(Debug, Clone)]
pub struct Comparison {
    pub oracle: f64,
    pub rows: Vec<CompareRow>,
    pub traces: Vec<(String, Vec<TraceRow>)>,
}

/// Runs every method of a baseline suite against the oracle optimum.
pub fn compare_methods(cfg: &StudyConfig, seed: u64) -> Result<Comparison, StudyError> {
    let StudyKind::BaselineSuite(s) = &cfg.kind else {
        return Err(invalid(format!("compare needs a baseline-suite study, got {}", cfg.kind.name())));
    };
    let objective = s.objective.build()?;
    if s.methods.is_empty() {
        return Err(invalid("study.methods: at least one method is required"));
    }
    if s.seeds == 0 {
        return Err(invalid("study.seeds must be at least 1"));
    }
    ScaledObjective::new(&objective, s.divisor, s.sense).map_err(invalid)?;
    let dim = objective.dim();
    for m in &s.methods {
        match m {
            MethodSpec::NelderMead { x0, budget } if x0.len() != dim || *budget < dim + 1 => {
                return Err(invalid(format!("study.methods: {} needs a {dim}-dimensional x0 and budget > {dim}", m.label())))
            }
            MethodSpec::Random { budget } | MethodSpec::DualAnnealing { budget, .. } if *budget == 0 => {
                return Err(invalid(format!("study.methods: {} needs a positive budget", m.label())))
            }
            MethodSpec::Bo { init_count, .. } if *init_count == 0 => {
                return Err(invalid("study.methods: bo needs init_count >= 1"))
            }
            _ => {}
        }
    }
    let oracle = oracle_value(cfg, &s.oracle, &objective, s.sense)?;
    let (lower, upper) = objective.bounds();

    // (method index, seed index) pairs; deterministic methods run once.
    let jobs: Vec<(usize, usize)> = s
        .methods
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            let n = if matches!(m, MethodSpec::NelderMead { .. }) { 1 } else { s.seeds };
            (0..n).map(move |k| (i, k))
        })
        .collect();
    let results: Vec<(String, BaselineResult)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let m = &s.methods[i];
            let obj = ScaledObjective::new(&objective, s.divisor, s.sense)?;
            let run_seed = derive_seed(derive_named(seed, &m.label()), k as u64);
            let label = if s.seeds > 1 && !matches!(m, MethodSpec::NelderMead { .. }) {
                format!("{}#{k}", m.label())
            } else {
                m.label()
            };
            let r = match m {
                MethodSpec::Random { budget } => random_search(&obj, *budget, run_seed)?,
                MethodSpec::NelderMead { x0, budget } => nelder_mead(&obj, x0, *budget)?,
                MethodSpec::DualAnnealing { budget, options } => dual_annealing(&obj, *budget, run_seed, options)?,
                MethodSpec::Bo {
                    kernel,
                    inference,
                    init_count,
                    max_iterations,
                    output_transform,
                } => {
                    let mut bo = BoConfig::new(
                        Domain::Box {
                            lower: lower.clone(),
                            upper: upper.clone(),
                        },
                        *kernel,
                        inference.clone(),
                        *init_count,
                        *max_iterations,
                    )
                    .with_seed(run_seed);
                    bo.output_transform = *output_transform;
                    let t = run_bo(&bo, &obj)?;
                    let best = t.best().cloned();
                    BaselineResult {
                        method: "bo".into(),
                        best_x: best.as_ref().map(|b| b.x.clone()).unwrap_or_default(),
                        best_y: best.map_or(f64::NAN, |b| b.y),
                        evaluations: t.evaluation_count,
                        converged: t.aborted.is_none(),
                        rows: t.rows,
                    }
                }
            };
            Ok((label, r))
        })
        .collect::<Result<_, Error>>()?;
    let rows = results
        .iter()
        .map(|(label, r)| CompareRow {
            method: label.clone(),
            evaluations: r.evaluations,
            optimality_gap_pct: gap_pct(r.best_y, oracle),
            converged: r.converged,
        })
        .collect();
    Ok(Comparison {
        oracle,
        rows,
        traces: results.into_iter().map(|(l, r)| (l, r.rows)).collect(),
    })
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn run_baseline_suite(cfg: &StudyConfig, _s: &BaselineSuiteStudy, seed: u64, out: &mut Outputs) -> Result<Value, StudyError> {
    let cmp = compare_methods(cfg, seed)?;
    write_compare_csv(&cmp.rows, std::fs::File::create(out.path("compare.csv")).map_err(Error::from)?)?;
    for (label, rows) in &cmp.traces {
        let name = format!("trace_{}.csv", file_safe(label));
        write_trace_csv(rows, std::fs::File::create(out.path(&name)).map_err(Error::from)?)?;
    }
    Ok(json!({ "oracle": cmp.oracle, "methods": cmp.rows }))
}

fn run_exceedance(s: &ExceedanceStudySpec, seed: u64, out: &mut Outputs) -> Result<Value, StudyError> {
    let objective = s.objective.build()?;
    let sweep = match (&s.threshold, objective.dim()) {
        (ThresholdSpecKv::Calibrate { sweep_points, exceed_fraction }, 1) => {
            if !(*exceed_fraction > 0.0 && *exceed_fraction < 1.0) {
                return Err(invalid("study.threshold.calibrate.exceed_fraction must lie in (0, 1)"));
            }
            Some(dense_sweep(&objective, *sweep_points).map_err(invalid)?)
        }
        (ThresholdSpecKv::Calibrate { .. }, _) => {
            return Err(invalid("study.threshold: calibration needs the one-dimensional objective"))
        }
        (ThresholdSpecKv::Kv(_), _) => None,
    };
    let threshold = match &s.threshold {
        ThresholdSpecKv::Kv(v) => *v,
        ThresholdSpecKv::Calibrate { exceed_fraction, .. } => {
            let ys: Vec<f64> = sweep.as_ref().expect("sweep computed").iter().map(|p| p.1).collect();
            threshold_for_exceedance(&ys, *exceed_fraction)
        }
    };
    let mut study = ExceedanceStudy::new(threshold);
    study.n_init = s.n_init;
    study.n_acquire = s.n_acquire;
    study.n_estimate = s.n_estimate;
    study.kernel = s.kernel;
    study.inference = s.inference.clone();
    study.seed = derive_named(seed, "classification");
    study.validate().map_err(invalid)?;

    let scaled = ScaledObjective::new(&objective, s.divisor, Sense::Minimize).map_err(invalid)?;
    let c = run_classification(&study, &scaled)?;
    let est = estimate_exceedance_probability(
        &c.surrogate,
        scaled.scale_output(threshold),
        s.n_estimate,
        derive_named(seed, "estimate"),
    )?;
    c.trace.save_csv(out.path("acquired.csv"))?;

    let concentration = sweep.as_ref().map(|sw| {
        let mut dev: Vec<f64> = sw.iter().map(|(_, y)| (y - threshold).abs()).collect();
        dev.sort_by(f64::total_cmp);
        let band = quantile_sorted(&dev, 0.25);
        let near = c.acquired().iter().filter(|(_, y)| (y - threshold).abs() < band).count();
        json!({ "band_kv": band, "acquired_near_threshold": near, "acquired": c.acquired().len() })
    });
    let oracle = if s.oracle_samples > 0 {
        let r = monte_carlo_oracle(&objective, threshold, s.oracle_samples, derive_named(seed, "oracle"))?;
        r.save_histogram(s.histogram_bin_kv, out.path("histogram.csv"))?;
        Some(json!({
            "probability": r.probability,
            "ci95_half_width": r.ci_half_width,
            "samples": r.values.len(),
            "failures": r.failures,
        }))
    } else {
        None
    };
    Ok(json!({
        "threshold_kv": threshold,
        "simulator_evaluations": scaled.evaluations(),
        "estimate_hard": est.hard,
        "estimate_soft": est.soft,
        "oracle": oracle,
        "concentration": concentration,
    }))
}

fn run_monte_carlo(s: &MonteCarloStudy, seed: u64, out: &mut Outputs) -> Result<Value, StudyError> {
    let objective = s.objective.build()?;
    if s.samples == 0 {
        return Err(invalid("study.samples must be positive"));
    }
    if !(s.histogram_bin_kv > 0.0) {
        return Err(invalid("study.histogram_bin_kv must be positive"));
    }
    let threshold = s.threshold.unwrap_or(f64::INFINITY);
    let r = monte_carlo_oracle(&objective, threshold, s.samples, derive_named(seed, "monte-carlo"))?;
    r.save_histogram(s.histogram_bin_kv, out.path("histogram.csv"))?;
    let mut sorted = r.values.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    Ok(json!({
        "samples": r.values.len(),
        "failures": r.failures,
        "threshold_kv": s.threshold,
        "probability_above": s.threshold.map(|_| r.probability),
        "ci95_half_width": s.threshold.map(|_| r.ci_half_width),
        "quantiles_kv": { "p05": q(0.05), "p50": q(0.5), "p95": q(0.95), "p99": q(0.99), "max": q(1.0) },
    }))
}

/// `frequency_hz,analytic_ohm[,simulated_ohm]` rows for an impedance scan.
pub fn impedance_table(
    params: &CircuitParams,
    fmin: f64,
    fmax: f64,
    points: usize,
    simulate: bool,
    dt: f64,
) -> Result<Vec<(f64, f64, Option<f64>)>, Error> {
    if !(fmin > 0.0 && fmax > fmin && points >= 2) {
        return Err(Error::InvalidConfig(format!(
            "impedance scan needs 0 < fmin < fmax and at least two points (got {fmin}, {fmax}, {points})"
        )));
    }
    (0..points)
        .into_par_iter()
        .map(|i| {
            let f = fmin + (fmax - fmin) * i as f64 / (points - 1) as f64;
            let sim = if simulate {
                Some(emt::simulated_impedance(params, f, dt)?)
            } else {
                None
            };
            Ok((f, emt::input_impedance(params, f), sim))
        })
        .collect()
}

pub fn write_impedance_csv<W: std::io::Write>(rows: &[(f64, f64, Option<f64>)], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let simulated = rows.iter().any(|r| r.2.is_some());
    if simulated {
        w.write_record(["frequency_hz", "analytic_ohm", "simulated_ohm"])?;
    } else {
        w.write_record(["frequency_hz", "analytic_ohm"])?;
    }
    for (f, a, s) in rows {
        let mut rec = vec![f.to_string(), a.to_string()];
        if simulated {
            rec.push(s.map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn run_impedance_scan(s: &ImpedanceScanStudy, out: &mut Outputs) -> Result<Value, StudyError> {
    let params = s.circuit.clone().unwrap_or_default();
    params.validate().map_err(invalid)?;
    if !(s.fmin > 0.0 && s.fmax > s.fmin && s.points >= 2) {
        return Err(invalid("study: impedance scan needs 0 < fmin < fmax and points >= 2"));
    }
    let rows = impedance_table(&params, s.fmin, s.fmax, s.points, s.simulate, s.dt)?;
    write_impedance_csv(&rows, std::fs::File::create(out.path("impedance.csv")).map_err(Error::from)?)?;
    let (f_peak, z_peak) = emt::impedance_peak(&params, s.fmin, s.fmax);
    let worst = rows
        .iter()
        .filter_map(|(_, a, s)| s.map(|s| (s - a).abs() / a))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    Ok(json!({
        "peak_frequency_hz": f_peak,
        "peak_impedance_ohm": z_peak,
        "max_relative_deviation": worst,
    }))
}
