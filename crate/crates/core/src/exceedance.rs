//! Threshold-exceedance classification: sequential design with the Bichon
//! criterion, cheap surrogate-based probability estimates, and the brute
//! force Monte Carlo reference.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{Acquisition, PosteriorEnsemble, ThresholdSpec};
use crate::bo::{
    infer_posteriors, initial_design, maximize_acquisition, BoTrace, Domain, Inference, OutputTransform, Recorder,
    SearchOptions,
};
use crate::gp::{Dataset, GpPosterior, KernelKind, DEFAULT_NOISE};
use crate::hyper::GradAscentConfig;
use crate::objectives::{Objective, ScaledObjective};
use crate::rng::{derive_named, rng_from};
use crate::stats::normal_cdf;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceStudy {
    /// Threshold in the objective's natural units (kV for energization).
    pub threshold: f64,
    pub n_init: usize,
    pub n_acquire: usize,
    /// Input draws used by the surrogate estimate.
    pub n_estimate: usize,
    pub kernel: KernelKind,
    pub inference: Inference,
    pub output_transform: OutputTransform,
    pub delta: f64,
    pub alpha: f64,
    pub search: SearchOptions,
    pub seed: u64,
}

impl ExceedanceStudy {
    /// Five initial samples, ten acquisitions, MAP refits, `δ = α = 1`.
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            n_init: 5,
            n_acquire: 10,
            n_estimate: 100_000,
            kernel: KernelKind::Matern52,
            inference: Inference::Map {
                priors: Inference::default_priors(),
                ascent: GradAscentConfig::default(),
            },
            output_transform: OutputTransform::Standardize,
            delta: 1.0,
            alpha: 1.0,
            search: SearchOptions::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::InvalidConfig("exceedance study needs n_init >= 2".into()));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0 && self.threshold <= 2000.0) {
            return Err(Error::InvalidConfig(format!("threshold {} outside (0, 2000]", self.threshold)));
        }
        if self.n_estimate == 0 {
            return Err(Error::InvalidConfig("n_estimate must be positive".into()));
        }
        ThresholdSpec::new(0.0, self.delta, self.alpha)?;
        self.inference.validate()
    }
}

/// A posterior together with the affine output map it was fitted under,
/// so that predictions come back in the objective's scaled units.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub posterior: GpPosterior,
    pub offset: f64,
    pub scale: f64,
}

impl Surrogate {
    pub fn new(posterior: GpPosterior) -> Self {
        Self {
            posterior,
            offset: 0.0,
            scale: 1.0,
        }
    }

    /// Predictive mean and standard deviation at unit point `u`.
    pub fn predict(&self, u: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.posterior.predict(u)?;
        Ok((self.offset + self.scale * m, self.scale * v.sqrt()))
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub surrogate: Surrogate,
    /// Unit-box inputs and scaled outputs.
    pub data: Dataset,
    pub trace: BoTrace,
}

impl Classification {
    /// Natural-unit inputs of the sequentially acquired (non-initial) points.
    pub fn acquired(&self) -> Vec<(Vec<f64>, f64)> {
        self.trace
            .rows
            .iter()
            .filter(|r| r.iter > 0)
            .map(|r| (r.x.clone(), r.y))
            .collect()
    }
}

fn fit_surrogate(data: &Dataset, study: &ExceedanceStudy, dim: usize, stream: u64) -> Result<(Surrogate, PosteriorEnsemble)> {
    let (offset, scale) = study.output_transform.coefficients(data.outputs());
    let fitted = data.map_outputs(|y| (y - offset) / scale);
    let (ensemble, _) = infer_posteriors(&fitted, study.kernel, &study.inference, dim, DEFAULT_NOISE, false, study.seed, stream)?;
    let posterior = ensemble.posteriors()[0].clone();
    Ok((
        Surrogate {
            posterior,
            offset,
            scale,
        },
        ensemble,
    ))
}

/// Sequential design for the threshold `study.threshold`: `n_init` uniform
/// draws, then `n_acquire` rounds maximizing the Bichon criterion with a
/// hyperparameter refit before each round and a final refit at the end.
///
/// `objective` must not flip the sign (its output divisor is honored).
pub fn run_classification<O: Objective>(study: &ExceedanceStudy, objective: &ScaledObjective<O>) -> Result<Classification> {
    study.validate()?;
    if objective.sense() != crate::acquisition::Sense::Minimize {
        return Err(Error::InvalidConfig("classification needs an objective without sign flip".into()));
    }
    let dim = objective.dim();
    let unit = Domain::unit_box(dim);
    let mut rec = Recorder::new(objective, study.n_init);
    for u in initial_design(&unit, study.n_init, derive_named(study.seed, "design"))? {
        if let Err(e) = rec.evaluate(0, u) {
            return Err(Error::Objective(format!("initial design evaluation failed: {e}")));
        }
    }
    let threshold = objective.scale_output(study.threshold);
    let mut rng = rng_from(derive_named(study.seed, "acquisition"));
    for iter in 1..=study.n_acquire {
        let (surrogate, ensemble) = fit_surrogate(&rec.data, study, dim, iter as u64)?;
        let thr = ThresholdSpec::new((threshold - surrogate.offset) / surrogate.scale, study.delta, study.alpha)?;
        let acq = Acquisition::Bichon(thr);
        let mut attempt = 0;
        loop {
            let (u, _) = maximize_acquisition(|x| ensemble.score(&acq, x), &unit, &rec.visited, &study.search, &mut rng)?;
            match rec.evaluate(iter, u) {
                Ok(()) => break,
                Err(e) if attempt == 0 => {
                    log::warn!("acquisition {iter}: retrying after {e}");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let (surrogate, _) = fit_surrogate(&rec.data, study, dim, 0)?;
    Ok(Classification {
        surrogate,
        data: rec.data,
        trace: rec.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceEstimate {
    /// Fraction of draws whose posterior mean exceeds the threshold.
    pub hard: f64,
    /// Mean exceedance probability `Φ((m − T)/s)` over the draws.
    pub soft: f64,
    pub draws: usize,
}

/// Surrogate estimate of `P(f(X) > threshold)` for `X` uniform on the unit
/// box; `threshold` is in the surrogate's (scaled) output units.
pub fn estimate_exceedance_probability(surrogate: &Surrogate, threshold: f64, draws: usize, seed: u64) -> Result<ExceedanceEstimate> {
    if draws == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    let dim = surrogate.posterior.dim();
    let mut rng = rng_from(seed);
    let (mut above, mut soft) = (0usize, 0.0);
    let mut u = vec![0.0; dim];
    for _ in 0..draws {
        u.iter_mut().for_each(|c| *c = rng.random::<f64>());
        let (m, s) = surrogate.predict(&u)?;
        if m > threshold {
            above += 1;
        }
        soft += if s > 0.0 {
            normal_cdf((m - threshold) / s)
        } else if m > threshold {
            1.0
        } else {
            0.0
        };
    }
    Ok(ExceedanceEstimate {
        hard: above as f64 / draws as f64,
        soft: soft / draws as f64,
        draws,
    })
}

/// Brute-force reference over the objective's natural box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub probability: f64,
    pub requested: usize,
    pub failures: usize,
    /// Half-width of the normal-approximation 95% binomial interval.
    pub ci_half_width: f64,
    /// Successful evaluations in draw order.
    pub values: Vec<f64>,
}

impl OracleResult {
    /// Fraction of the stored values above `threshold`.
    pub fn probability_above(&self, threshold: f64) -> f64 {
        self.values.iter().filter(|v| **v > threshold).count() as f64 / self.values.len() as f64
    }

    /// Histogram with bins of `width` starting at `floor(min/width)·width`,
    /// as CSV `bin_lower,bin_upper,count`.
    pub fn write_histogram<W: Write>(&self, width: f64, out: W) -> Result<()> {
        if !(width > 0.0) {
            return Err(Error::InvalidConfig("histogram bin width must be positive".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lower", "bin_upper", "count"])?;
        for (lo, count) in histogram(&self.values, width) {
            w.write_record([lo.to_string(), (lo + width).to_string(), count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_histogram(&self, width: f64, path: impl AsRef<Path>) -> Result<()> {
        self.write_histogram(width, std::fs::File::create(path)?)
    }
}

/// `(bin lower edge, count)` for consecutive bins covering `values`.
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (min / width).floor() * width;
    let bins = (((max - start) / width).floor() as usize) + 1;
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - start) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(i, c)| (start + i as f64 * width, c)).collect()
}

/// Evaluates `objective` at `n` uniform draws from its natural box (in
/// parallel on the current rayon pool; results do not depend on the pool
/// size) and returns the fraction above `threshold`. Failed evaluations
/// are excluded when they are fewer than 0.1% of `n`, otherwise the call
/// fails.
pub fn monte_carlo_oracle<O: Objective>(objective: &O, threshold: f64, n: usize, seed: u64) -> Result<OracleResult> {
    if n == 0 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least one sample".into()));
    }
    let (lower, upper) = objective.bounds();
    let mut rng = rng_from(seed);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| lower.iter().zip(&upper).map(|(l, u)| l + rng.random::<f64>() * (u - l)).collect())
        .collect();
    let results: Vec<Result<f64>> = inputs.par_iter().map(|x| objective.evaluate(x)).collect();
    let mut values = Vec::with_capacity(n);
    let mut failures = 0;
    for (x, r) in inputs.iter().zip(results) {
        match r {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                log::warn!("Monte Carlo sample at {x:?} returned {v}");
                failures += 1;
            }
            Err(e) => {
                log::warn!("Monte Carlo sample at {x:?} failed: {e}");
                failures += 1;
            }
        }
    }
    if failures as f64 >= 1e-3 * n as f64 && failures > 0 {
        return Err(Error::Objective(format!("{failures} of {n} Monte Carlo samples failed")));
    }
    let m = values.len() as f64;
    let p = values.iter().filter(|v| **v > threshold).count() as f64 / m;
    Ok(OracleResult {
        probability: p,
        requested: n,
        failures,
        ci_half_width: 1.96 * (p * (1.0 - p) / m).sqrt(),
        values,
    })
}

/// Threshold exceeded by the fraction `p` of `values` (its `1 − p` quantile).
pub fn threshold_for_exceedance(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    crate::stats::quantile_sorted(&v, 1.0 - p)
}
