//! Kernel hyperparameter inference: maximum likelihood, maximum a
//! posteriori under independent uniform priors, and random-walk Metropolis
//! sampling of the hyperparameter posterior.
//!
//! The observation-noise variance is held fixed by all three backends; only
//! the signal amplitude and the lengthscales are inferred.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, Dataset, Hyperparams, KernelKind};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPrior {
    pub lower: f64,
    pub upper: f64,
}

impl UniformPrior {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let p = Self { lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.lower < self.upper && self.upper.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "uniform prior needs 0 < lower < upper < inf, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn centre(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    fn log_density(&self) -> f64 {
        -self.width().ln()
    }
}

/// Independent uniform priors on σ and on each lengthscale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub signal_amplitude: UniformPrior,
    pub lengthscale: UniformPrior,
}

impl PriorSpec {
    pub fn new(signal_amplitude: UniformPrior, lengthscale: UniformPrior) -> Result<Self> {
        let p = Self {
            signal_amplitude,
            lengthscale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.signal_amplitude.validate()?;
        self.lengthscale.validate()
    }

    pub fn contains(&self, h: &Hyperparams) -> bool {
        self.signal_amplitude.contains(h.signal_amplitude) && h.lengthscales.iter().all(|l| self.lengthscale.contains(*l))
    }

    /// Log prior density, `-inf` outside the support.
    pub fn log_density(&self, h: &Hyperparams) -> f64 {
        if !self.contains(h) {
            return f64::NEG_INFINITY;
        }
        self.signal_amplitude.log_density() + h.dim() as f64 * self.lengthscale.log_density()
    }

    /// Prior centre in every coordinate.
    pub fn centre(&self, dim: usize, noise_variance: f64) -> Hyperparams {
        Hyperparams {
            signal_amplitude: self.signal_amplitude.centre(),
            lengthscales: vec![self.lengthscale.centre(); dim],
            noise_variance,
        }
    }
}

/// Mapping between [`Hyperparams`] and the free parameter vector
/// `[σ, l…]`, where the lengthscale block has one entry when shared.
#[derive(Debug, Clone, Copy)]
struct Layout {
    dim: usize,
    shared: bool,
    noise: f64,
}

impl Layout {
    fn new(dim: usize, shared: bool, noise: f64) -> Self {
        Self { dim, shared, noise }
    }

    fn len(&self) -> usize {
        if self.shared {
            2
        } else {
            1 + self.dim
        }
    }

    fn to_free(self, h: &Hyperparams) -> Vec<f64> {
        let mut v = vec![h.signal_amplitude];
        if self.shared {
            v.push(h.lengthscales[0]);
        } else {
            v.extend_from_slice(&h.lengthscales);
        }
        v
    }

    fn from_free(self, v: &[f64]) -> Hyperparams {
        let lengthscales = if self.shared { vec![v[1]; self.dim] } else { v[1..].to_vec() };
        Hyperparams {
            signal_amplitude: v[0],
            lengthscales,
            noise_variance: self.noise,
        }
    }

    /// Collapses a full gradient `[σ, l_1..l_d, noise]` onto the free vector.
    fn project_gradient(self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![g[0]];
        if self.shared {
            out.push(g[1..=self.dim].iter().sum());
        } else {
            out.extend_from_slice(&g[1..=self.dim]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradAscentConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Take steps on `log θ` (raw gradient scaled by θ) instead of on θ.
    pub log_space: bool,
    /// One lengthscale shared by all input dimensions.
    pub shared_lengthscale: bool,
}

impl Default for GradAscentConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            step_size: 1e-4,
            log_space: true,
            shared_lengthscale: false,
        }
    }
}

impl GradAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("gradient ascent needs at least one step".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub hyper: Hyperparams,
    /// Objective at `hyper` (log likelihood, plus log prior for MAP).
    pub objective: f64,
    /// Set when some trial step produced a non-finite objective and was discarded.
    pub hit_nonfinite: bool,
}

const MAX_HALVINGS: usize = 60;
/// Largest change of any free coordinate per step (in log units when stepping in log space).
const MAX_COORD_STEP: f64 = 0.5;
/// Armijo constant: a step must gain at least this fraction of its first-order prediction.
const SUFFICIENT_INCREASE: f64 = 1e-4;
const STATIONARY_GRADIENT: f64 = 1e-12;

/// Fixed-length ascent with step halving; never accepts a worse iterate.
fn ascend(
    data: &Dataset,
    kind: KernelKind,
    init: &Hyperparams,
    cfg: &GradAscentConfig,
    prior: Option<&PriorSpec>,
) -> Result<Estimate> {
    cfg.validate()?;
    init.validate()?;
    let layout = Layout::new(init.dim(), cfg.shared_lengthscale, init.noise_variance);
    let log_prior = |h: &Hyperparams| prior.map_or(0.0, |p| p.log_density(h));
    let evaluate = |h: &Hyperparams| -> Option<(f64, Vec<f64>)> {
        let ll = log_marginal_likelihood(data, kind, h).ok()?;
        let value = ll.value + log_prior(h);
        value.is_finite().then(|| (value, layout.project_gradient(&ll.gradient)))
    };

    let mut current = init.clone();
    if cfg.shared_lengthscale {
        current.lengthscales = vec![init.lengthscales[0]; init.dim()];
    }
    let (mut value, mut grad) = evaluate(&current).ok_or_else(|| {
        Error::InvalidHyperparams("objective is not finite at the initial hyperparameters".into())
    })?;
    let mut hit_nonfinite = false;

    for _ in 0..cfg.steps {
        let free = layout.to_free(&current);
        let direction: Vec<f64> = if cfg.log_space {
            grad.iter().zip(&free).map(|(g, t)| g * t).collect()
        } else {
            grad.clone()
        };
        if direction.iter().map(|d| d * d).sum::<f64>().sqrt() < STATIONARY_GRADIENT {
            break;
        }
        let mut eta = cfg.step_size;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = if cfg.log_space {
                free.iter()
                    .zip(&direction)
                    .map(|(t, d)| (t.ln() + (eta * d).clamp(-MAX_COORD_STEP, MAX_COORD_STEP)).exp())
                    .collect()
            } else {
                free.iter()
                    .zip(&direction)
                    .map(|(t, d)| t + (eta * d).clamp(-MAX_COORD_STEP * t, MAX_COORD_STEP * t))
                    .collect()
            };
            if let Some(p) = prior {
                trial[0] = trial[0].clamp(p.signal_amplitude.lower, p.signal_amplitude.upper);
                for l in &mut trial[1..] {
                    *l = l.clamp(p.lengthscale.lower, p.lengthscale.upper);
                }
            }
            if trial.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                eta *= 0.5;
                continue;
            }
            let candidate = layout.from_free(&trial);
            let predicted: f64 = if cfg.log_space {
                trial.iter().zip(&free).zip(&direction).map(|((t, f), d)| (t.ln() - f.ln()) * d).sum()
            } else {
                trial.iter().zip(&free).zip(&direction).map(|((t, f), d)| (t - f) * d).sum()
            };
            match evaluate(&candidate) {
                Some((v, g)) if v >= value && v - value >= SUFFICIENT_INCREASE * predicted => {
                    current = candidate;
                    value = v;
                    grad = g;
                    break;
                }
                Some(_) => eta *= 0.5,
                None => {
                    hit_nonfinite = true;
                    eta *= 0.5;
                }
            }
        }
    }
    Ok(Estimate {
        hyper: current,
        objective: value,
        hit_nonfinite,
    })
}

/// Maximum-likelihood hyperparameters by gradient ascent on the log
/// marginal likelihood. Runs exactly `cfg.steps` iterations unless the
/// gradient vanishes.
pub fn ml_estimate(data: &Dataset, kind: KernelKind, init: &Hyperparams, cfg: &GradAscentConfig) -> Result<Estimate> {
    if data.len() < 2 {
        return Err(Error::InvalidData("maximum likelihood needs at least two points".into()));
    }
    ascend(data, kind, init, cfg, None)
}

/// Maximum a posteriori hyperparameters; ascent is projected onto the
/// prior support after every step.
pub fn map_estimate(
    data: &Dataset,
    kind: KernelKind,
    priors: &PriorSpec,
    init: &Hyperparams,
    cfg: &GradAscentConfig,
) -> Result<Estimate> {
    priors.validate()?;
    if !priors.contains(init) {
        return Err(Error::OutsidePriorSupport(format!(
            "initial point σ = {}, l = {:?}",
            init.signal_amplitude, init.lengthscales
        )));
    }
    ascend(data, kind, init, cfg, Some(priors))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Random-walk standard deviation as a fraction of each prior's width.
    pub proposal_fraction: f64,
    pub shared_lengthscale: bool,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            burn_in: 100,
            thinning: 1,
            proposal_fraction: 0.05,
            shared_lengthscale: false,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("MCMC needs at least one sample".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if !(self.proposal_fraction > 0.0 && self.proposal_fraction.is_finite()) {
            return Err(Error::InvalidConfig("proposal fraction must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcChain {
    pub samples: Vec<Hyperparams>,
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Present when nothing was accepted during burn-in.
    pub warning: Option<String>,
}

/// Metropolis acceptance test with probability `min(1, exp(delta))`.
pub fn metropolis_accept(delta_log_target: f64, uniform: f64) -> bool {
    if delta_log_target >= 0.0 {
        return true;
    }
    uniform < delta_log_target.exp()
}

/// Random-walk Metropolis over `(σ, l)` targeting `log p(θ) + log p(y | x, θ)`.
///
/// The chain starts at the prior centre; proposals outside the support are
/// rejected. Identical seeds give identical chains.
pub fn mcmc_sample(
    data: &Dataset,
    kind: KernelKind,
    priors: &PriorSpec,
    dim: usize,
    noise_variance: f64,
    cfg: &McmcConfig,
) -> Result<McmcChain> {
    cfg.validate()?;
    priors.validate()?;
    if let Some(d) = data.dim() {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: d });
        }
    }
    let layout = Layout::new(dim, cfg.shared_lengthscale, noise_variance);
    let bounds: Vec<UniformPrior> = std::iter::once(priors.signal_amplitude)
        .chain(std::iter::repeat_n(priors.lengthscale, layout.len() - 1))
        .collect();
    let scales: Vec<f64> = bounds.iter().map(|b| cfg.proposal_fraction * b.width()).collect();
    let log_target = |v: &[f64]| -> f64 {
        let h = layout.from_free(v);
        let lp = priors.log_density(&h);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match log_marginal_likelihood(data, kind, &h) {
            Ok(ll) if ll.value.is_finite() => lp + ll.value,
            _ => f64::NEG_INFINITY,
        }
    };

    let mut rng = rng_from(cfg.seed);
    let mut state: Vec<f64> = bounds.iter().map(UniformPrior::centre).collect();
    let mut current = log_target(&state);
    let total = cfg.burn_in + cfg.samples * cfg.thinning;
    let mut samples = Vec::with_capacity(cfg.samples);
    let (mut accepted, mut burn_accepted) = (0usize, 0usize);

    for step in 0..total {
        let proposal: Vec<f64> = state
            .iter()
            .zip(&scales)
            .map(|(s, sc)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s + sc * z
            })
            .collect();
        // Always draw the uniform so the stream does not depend on the support test.
        let u: f64 = rng.random();
        let inside = proposal.iter().zip(&bounds).all(|(p, b)| b.contains(*p));
        if inside {
            let candidate = log_target(&proposal);
            if candidate.is_finite() && metropolis_accept(candidate - current, u) {
                state = proposal;
                current = candidate;
                if step < cfg.burn_in {
                    burn_accepted += 1;
                } else {
                    accepted += 1;
                }
            }
        }
        if step >= cfg.burn_in && (step - cfg.burn_in + 1) % cfg.thinning == 0 {
            samples.push(layout.from_free(&state));
        }
    }

    let kept_steps = total - cfg.burn_in;
    let burn_in_acceptance_rate = if cfg.burn_in > 0 {
        burn_accepted as f64 / cfg.burn_in as f64
    } else {
        f64::NAN
    };
    let warning = (cfg.burn_in > 0 && burn_accepted == 0)
        .then(|| format!("no proposal accepted during {} burn-in steps", cfg.burn_in));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(McmcChain {
        samples,
        acceptance_rate: accepted as f64 / kept_steps as f64,
        burn_in_acceptance_rate,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::DEFAULT_NOISE;
    use crate::stats::median;
    use nalgebra::{DMatrix, DVector};
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    /// Draw `n` noiseless GP samples on random 1-D inputs.
    fn gp_draw(kind: KernelKind, sigma: f64, l: f64, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let h = Hyperparams::isotropic(sigma, l, 1, 0.0).unwrap();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = crate::gp::kernel_eval(kind, &h, &[x[i]], &[x[j]]).unwrap();
            }
            k[(i, i)] += 1e-8;
        }
        let chol = k.cholesky().unwrap();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = chol.l() * z;
        Dataset::from_parts(x.into_iter().map(|v| vec![v]).collect(), y.iter().copied().collect()).unwrap()
    }

    fn lml(data: &Dataset, kind: KernelKind, h: &Hyperparams) -> f64 {
        log_marginal_likelihood(data, kind, h).unwrap().value
    }

    fn recovery_cfg() -> GradAscentConfig {
        GradAscentConfig {
            steps: 200,
            step_size: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn ml_recovers_lengthscale_of_synthetic_draws() {
        let kind = KernelKind::SquaredExponential;
        let estimates: Vec<f64> = (0..5)
            .map(|seed| {
                let data = gp_draw(kind, 1.0, 0.3, 30, 100 + seed);
                let init = Hyperparams::isotropic(1.0, 0.6, 1, DEFAULT_NOISE).unwrap();
                let est = ml_estimate(&data, kind, &init, &recovery_cfg()).unwrap();
                assert!(est.objective >= lml(&data, kind, &init));
                est.hyper.lengthscales[0]
            })
            .collect();
        let med = median(&estimates);
        assert!((0.15..=0.6).contains(&med), "median lengthscale {med}, all {estimates:?}");
    }

    #[test]
    fn ml_single_step_never_decreases_likelihood() {
        let kind = KernelKind::Matern52;
        let data = gp_draw(kind, 1.0, 0.3, 12, 4);
        let init = Hyperparams::isotropic(2.0, 0.9, 1, DEFAULT_NOISE).unwrap();
        let cfg = GradAscentConfig {
            steps: 1,
            step_size: 10.0,
            ..Default::default()
        };
        let est = ml_estimate(&data, kind, &init, &cfg).unwrap();
        assert!(est.objective >= lml(&data, kind, &init));
        let zero = GradAscentConfig { steps: 0, ..cfg };
        assert!(ml_estimate(&data, kind, &init, &zero).is_err());
    }

    #[test]
    fn ml_keeps_stationary_point() {
        // Two uncorrelated points with y² equal to the diagonal variance:
        // every gradient component vanishes.
        let v: f64 = 1.0 + 1e-10;
        let data = Dataset::from_parts(vec![vec![0.0], vec![1e6]], vec![v.sqrt(), -v.sqrt()]).unwrap();
        let init = Hyperparams::isotropic(1.0, 1e-3, 1, 0.0).unwrap();
        let ll = log_marginal_likelihood(&data, KernelKind::SquaredExponential, &init).unwrap();
        assert!(ll.gradient.iter().all(|g| g.abs() < 1e-12), "{:?}", ll.gradient);
        let est = ml_estimate(&data, KernelKind::SquaredExponential, &init, &recovery_cfg()).unwrap();
        assert_eq!(est.hyper, init);
    }

    #[test]
    fn ml_never_returns_non_positive_values() {
        let kind = KernelKind::SquaredExponential;
        let data = gp_draw(kind, 0.5, 0.2, 15, 9);
        let init = Hyperparams::isotropic(1.0, 0.5, 1, DEFAULT_NOISE).unwrap();
        for log_space in [true, false] {
            let cfg = GradAscentConfig {
                steps: 50,
                step_size: 1.0,
                log_space,
                ..Default::default()
            };
            let est = ml_estimate(&data, kind, &init, &cfg).unwrap();
            assert!(est.hyper.signal_amplitude > 0.0);
            assert!(est.hyper.lengthscales.iter().all(|l| *l > 0.0));
        }
    }

    fn priors() -> PriorSpec {
        PriorSpec::new(UniformPrior::new(0.1, 6.0).unwrap(), UniformPrior::new(0.1, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn map_equals_ml_for_interior_optimum() {
        let kind = KernelKind::SquaredExponential;
        let data = gp_draw(kind, 1.0, 0.4, 20, 21);
        let init = Hyperparams::isotropic(1.0, 0.5, 1, DEFAULT_NOISE).unwrap();
        let ml = ml_estimate(&data, kind, &init, &recovery_cfg()).unwrap();
        assert!(priors().contains(&ml.hyper), "optimum {:?} not interior", ml.hyper);
        let map = map_estimate(&data, kind, &priors(), &init, &recovery_cfg()).unwrap();
        assert!((map.hyper.signal_amplitude - ml.hyper.signal_amplitude).abs() < 1e-6);
        assert!((map.hyper.lengthscales[0] - ml.hyper.lengthscales[0]).abs() < 1e-6);
    }

    #[test]
    fn map_clips_to_upper_bound() {
        // A smooth quadratic wants a lengthscale far above 1.
        let kind = KernelKind::SquaredExponential;
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] * 0.5).collect();
        let data = Dataset::from_parts(x, y).unwrap();
        let init = Hyperparams::isotropic(1.0, 0.5, 1, DEFAULT_NOISE).unwrap();
        let ml = ml_estimate(&data, kind, &init, &recovery_cfg()).unwrap();
        assert!(ml.hyper.lengthscales[0] > 1.0);
        let map = map_estimate(&data, kind, &priors(), &init, &recovery_cfg()).unwrap();
        assert_eq!(map.hyper.lengthscales[0], 1.0);
        assert!(priors().contains(&map.hyper));
    }

    #[test]
    fn map_recovers_lengthscale() {
        let kind = KernelKind::SquaredExponential;
        let estimates: Vec<f64> = (0..5)
            .map(|seed| {
                let data = gp_draw(kind, 1.0, 0.5, 30, 300 + seed);
                let init = Hyperparams::isotropic(1.0, 0.3, 1, DEFAULT_NOISE).unwrap();
                map_estimate(&data, kind, &priors(), &init, &recovery_cfg())
                    .unwrap()
                    .hyper
                    .lengthscales[0]
            })
            .collect();
        let med = median(&estimates);
        assert!((0.25..=0.9).contains(&med), "median {med}, all {estimates:?}");
    }

    #[test]
    fn map_rejects_init_outside_support() {
        let data = gp_draw(KernelKind::Matern52, 1.0, 0.5, 5, 1);
        let init = Hyperparams::isotropic(10.0, 0.5, 1, DEFAULT_NOISE).unwrap();
        let err = map_estimate(&data, KernelKind::Matern52, &priors(), &init, &recovery_cfg());
        assert!(matches!(err, Err(Error::OutsidePriorSupport(_))));
    }

    #[test]
    fn two_state_chain_matches_target() {
        let target: [f64; 2] = [0.3, 0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut state = 0usize;
        let mut counts = [0usize; 2];
        for _ in 0..100_000 {
            let proposal = 1 - state;
            let delta = target[proposal].ln() - target[state].ln();
            if metropolis_accept(delta, rng.random()) {
                state = proposal;
            }
            counts[state] += 1;
        }
        let p1 = counts[1] as f64 / 100_000.0;
        assert!((p1 - 0.7).abs() < 0.02 * 0.7, "empirical {p1}");
    }

    #[test]
    fn chain_is_deterministic_and_in_support() {
        let kind = KernelKind::SquaredExponential;
        let data = gp_draw(kind, 1.0, 0.4, 10, 2);
        let cfg = McmcConfig {
            seed: 99,
            ..Default::default()
        };
        let a = mcmc_sample(&data, kind, &priors(), 1, DEFAULT_NOISE, &cfg).unwrap();
        let b = mcmc_sample(&data, kind, &priors(), 1, DEFAULT_NOISE, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 100);
        assert!(a.samples.iter().all(|h| priors().contains(h)));
        let c = mcmc_sample(&data, kind, &priors(), 1, DEFAULT_NOISE, &McmcConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn peaked_likelihood_concentrates_chain() {
        let kind = KernelKind::SquaredExponential;
        let data = gp_draw(kind, 1.0, 0.4, 40, 77);

        // Dense-grid posterior median of l (σ marginalized) as the oracle.
        let ls: Vec<f64> = (0..181).map(|i| 0.1 + 0.9 * i as f64 / 180.0).collect();
        let sigmas: Vec<f64> = (0..60).map(|i| 0.1 + 5.9 * (i as f64 + 0.5) / 60.0).collect();
        let log_post: Vec<f64> = ls
            .iter()
            .map(|&l| {
                let terms: Vec<f64> = sigmas
                    .iter()
                    .map(|&s| lml(&data, kind, &Hyperparams::isotropic(s, l, 1, DEFAULT_NOISE).unwrap()))
                    .collect();
                let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
            })
            .collect();
        let m = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_post.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let grid_median = ls
            .iter()
            .zip(&weights)
            .find(|(_, w)| {
                acc += *w / total;
                acc >= 0.5
            })
            .map(|(l, _)| *l)
            .unwrap();
        assert!((0.3..=0.5).contains(&grid_median), "oracle median {grid_median}");

        let cfg = McmcConfig {
            samples: 400,
            burn_in: 200,
            seed: 5,
            ..Default::default()
        };
        let chain = mcmc_sample(&data, kind, &priors(), 1, DEFAULT_NOISE, &cfg).unwrap();
        let l_med = median(&chain.samples.iter().map(|h| h.lengthscales[0]).collect::<Vec<_>>());
        assert!((0.3..=0.5).contains(&l_med), "chain median {l_med}");
    }

    #[test]
    fn shared_lengthscale_chain_ties_dimensions() {
        let cfg = McmcConfig {
            samples: 20,
            shared_lengthscale: true,
            seed: 3,
            ..Default::default()
        };
        let chain = mcmc_sample(&Dataset::new(), KernelKind::Matern52, &priors(), 2, DEFAULT_NOISE, &cfg).unwrap();
        assert!(chain.samples.iter().all(|h| h.lengthscales[0] == h.lengthscales[1]));
    }
}
