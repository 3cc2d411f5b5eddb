//! Acquisition rules: expected improvement (plug-in and averaged over
//! hyperparameter samples) and the Bichon expected-feasibility criterion for
//! locating a threshold contour.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit_posterior, Dataset, GpPosterior, Hyperparams, KernelKind};
use crate::stats::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

impl Sense {
    /// `true` when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }
}

/// Best observed value under `sense`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incumbent {
    pub y_star: f64,
    pub sense: Sense,
}

impl Incumbent {
    pub fn minimize(y_star: f64) -> Self {
        Self {
            y_star,
            sense: Sense::Minimize,
        }
    }

    pub fn from_outputs(outputs: &[f64], sense: Sense) -> Option<Self> {
        let mut it = outputs.iter().copied();
        let first = it.next()?;
        let y_star = it.fold(first, |best, y| if sense.better(y, best) { y } else { best });
        Some(Self { y_star, sense })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub threshold: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl ThresholdSpec {
    pub fn new(threshold: f64, delta: f64, alpha: f64) -> Result<Self> {
        if !(delta > 0.0 && alpha > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "threshold needs finite T and positive δ, α; got T = {threshold}, δ = {delta}, α = {alpha}"
            )));
        }
        Ok(Self { threshold, delta, alpha })
    }

    /// Classic band `ε = s` for `δ = α = 1`.
    pub fn bichon(threshold: f64) -> Self {
        Self {
            threshold,
            delta: 1.0,
            alpha: 1.0,
        }
    }
}

/// Expected improvement from predictive mean `m` and standard deviation `s`.
pub fn ei_from_moments(m: f64, s: f64, inc: &Incumbent) -> f64 {
    let gain = match inc.sense {
        Sense::Minimize => inc.y_star - m,
        Sense::Maximize => m - inc.y_star,
    };
    if s <= 0.0 || !s.is_finite() {
        return gain.max(0.0);
    }
    let z = gain / s;
    (gain * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
}

/// `E[max(ε − |T − Y|, 0)]` for `Y ~ N(m, s²)` and `ε = δ·α·s`.
pub fn bichon_from_moments(m: f64, s: f64, thr: &ThresholdSpec) -> f64 {
    if s <= 0.0 || !s.is_finite() {
        return 0.0;
    }
    let e = thr.delta * thr.alpha;
    // The criterion is even in t; the negative branch keeps the Φ terms away from 1.
    let t = -((thr.threshold - m) / s).abs();
    let (cp, c0, cm) = (normal_cdf(t + e), normal_cdf(t), normal_cdf(t - e));
    let (pp, p0, pm) = (normal_pdf(t + e), normal_pdf(t), normal_pdf(t - e));
    let value = e * (cp - cm) - 2.0 * p0 + pp + pm + t * (cp - 2.0 * c0 + cm);
    (s * value).max(0.0)
}

pub fn expected_improvement(post: &GpPosterior, x: &[f64], inc: &Incumbent) -> Result<f64> {
    let (m, v) = post.predict(x)?;
    Ok(ei_from_moments(m, v.sqrt(), inc))
}

pub fn bichon_criterion(post: &GpPosterior, x: &[f64], thr: &ThresholdSpec) -> Result<f64> {
    let (m, v) = post.predict(x)?;
    Ok(bichon_from_moments(m, v.sqrt(), thr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionKind {
    ExpectedImprovement,
    Bichon,
}

/// An acquisition rule together with the state it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquisition {
    ExpectedImprovement(Incumbent),
    Bichon(ThresholdSpec),
}

impl Acquisition {
    pub fn kind(&self) -> AcquisitionKind {
        match self {
            Acquisition::ExpectedImprovement(_) => AcquisitionKind::ExpectedImprovement,
            Acquisition::Bichon(_) => AcquisitionKind::Bichon,
        }
    }

    pub fn from_moments(&self, m: f64, s: f64) -> f64 {
        match self {
            Acquisition::ExpectedImprovement(inc) => ei_from_moments(m, s, inc),
            Acquisition::Bichon(thr) => bichon_from_moments(m, s, thr),
        }
    }

    pub fn score(&self, post: &GpPosterior, x: &[f64]) -> Result<f64> {
        let (m, v) = post.predict(x)?;
        Ok(self.from_moments(m, v.sqrt()))
    }
}

/// Posteriors for a set of hyperparameter values, fitted once and reused
/// for every candidate scored in one design iteration.
#[derive(Debug, Clone)]
pub struct PosteriorEnsemble {
    posteriors: Vec<GpPosterior>,
    skipped: usize,
}

impl PosteriorEnsemble {
    /// Fits one posterior per sample. Samples whose factorization fails are
    /// skipped; if none survive the call fails.
    pub fn fit(samples: &[Hyperparams], data: &Dataset, kind: KernelKind) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("no hyperparameter samples".into()));
        }
        let mut posteriors = Vec::with_capacity(samples.len());
        let mut skipped = 0;
        for h in samples {
            match fit_posterior(data, kind, h) {
                Ok(p) => posteriors.push(p),
                Err(Error::IllConditioned { .. }) => {
                    log::warn!("skipping hyperparameter sample {h:?}: ill-conditioned gram matrix");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if posteriors.is_empty() {
            return Err(Error::AllSamplesFailed);
        }
        Ok(Self { posteriors, skipped })
    }

    pub fn single(post: GpPosterior) -> Self {
        Self {
            posteriors: vec![post],
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn posteriors(&self) -> &[GpPosterior] {
        &self.posteriors
    }

    /// Arithmetic mean of `acq` over the ensemble.
    pub fn score(&self, acq: &Acquisition, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.posteriors {
            total += acq.score(p, x)?;
        }
        Ok(total / self.posteriors.len() as f64)
    }
}

/// Acquisition averaged over hyperparameter samples `θ^(i)`.
pub fn marginalized_acquisition(
    samples: &[Hyperparams],
    data: &Dataset,
    kind: KernelKind,
    x: &[f64],
    acq: &Acquisition,
) -> Result<f64> {
    PosteriorEnsemble::fit(samples, data, kind)?.score(acq, x)
}
