//! Gaussian-process regression with a zero prior mean.
//!
//! Inputs are expected on the unit box and outputs already scaled, so the
//! fixed zero mean is adequate. Two stationary kernels are provided, both
//! with one lengthscale per input dimension.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const SQRT5: f64 = 2.236_067_977_499_79;

/// Relative jitter ladder: 1e-10·σ², ×10 per retry, up to 1e-4·σ².
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Default observation-noise variance on scaled outputs.
pub const DEFAULT_NOISE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    SquaredExponential,
    Matern52,
}

impl KernelKind {
    /// Correlation as a function of the scaled distance `r`.
    fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelKind::SquaredExponential => (-0.5 * r2).exp(),
            KernelKind::Matern52 => {
                let r = r2.sqrt();
                (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * (-SQRT5 * r).exp()
            }
        }
    }

    /// `-(d correlation / d r²) * 2`, so that `dk/dl_j = σ²·g(r²)·Δ_j²/l_j³`.
    fn lengthscale_factor(self, r2: f64) -> f64 {
        match self {
            KernelKind::SquaredExponential => (-0.5 * r2).exp(),
            KernelKind::Matern52 => {
                let r = r2.sqrt();
                5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub signal_amplitude: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl Hyperparams {
    pub fn new(signal_amplitude: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let h = Self {
            signal_amplitude,
            lengthscales,
            noise_variance,
        };
        h.validate()?;
        Ok(h)
    }

    /// Same lengthscale on every one of `dim` axes.
    pub fn isotropic(signal_amplitude: f64, lengthscale: f64, dim: usize, noise_variance: f64) -> Result<Self> {
        Self::new(signal_amplitude, vec![lengthscale; dim], noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_amplitude * self.signal_amplitude
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_amplitude.is_finite() && self.signal_amplitude > 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "signal amplitude must be positive, got {}",
                self.signal_amplitude
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidHyperparams("no lengthscales".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidHyperparams(format!("lengthscale must be positive, got {l}")));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "noise variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }
}

/// Covariance `σ²·k(r)` between two points.
pub fn kernel_eval(kind: KernelKind, hyper: &Hyperparams, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(hyper.dim(), x.len())?;
    check_dim(hyper.dim(), y.len())?;
    Ok(hyper.signal_variance() * kind.correlation(hyper.scaled_sq_dist(x, y)))
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Evaluated pairs `(x_i, y_i)`; append-only during a study.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidData(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let mut data = Self::new();
        for (x, y) in inputs.into_iter().zip(outputs) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(first) = self.inputs.first() {
            check_dim(first.len(), x.len())?;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite input {x:?}")));
        }
        if !y.is_finite() {
            return Err(Error::InvalidData(format!("non-finite output {y}")));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Outputs mapped by `f`, inputs unchanged.
    pub fn map_outputs(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            inputs: self.inputs.clone(),
            outputs: self.outputs.iter().map(|&y| f(y)).collect(),
        }
    }
}

/// Lower Cholesky factor of the regularized Gram matrix, with the jitter
/// that was needed to obtain it.
struct Factor {
    lower: DMatrix<f64>,
    jitter: f64,
}

fn gram(data: &Dataset, kind: KernelKind, hyper: &Hyperparams) -> DMatrix<f64> {
    let n = data.len();
    let s2 = hyper.signal_variance();
    let x = data.inputs();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = s2;
        for j in 0..i {
            let v = s2 * kind.correlation(hyper.scaled_sq_dist(&x[i], &x[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn factorize(gram: &DMatrix<f64>, hyper: &Hyperparams) -> Result<Factor> {
    let n = gram.nrows();
    let s2 = hyper.signal_variance();
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * s2;
        let mut reg = gram.clone();
        for i in 0..n {
            reg[(i, i)] += hyper.noise_variance + jitter;
        }
        if let Some(ch) = reg.cholesky() {
            let lower = ch.unpack();
            if lower.diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok(Factor { lower, jitter });
            }
        }
        rel *= 10.0;
    }
    Err(Error::IllConditioned {
        n,
        max_jitter: JITTER_MAX * s2,
    })
}

fn validate_inputs(data: &Dataset, hyper: &Hyperparams) -> Result<()> {
    hyper.validate()?;
    if let Some(d) = data.dim() {
        check_dim(hyper.dim(), d)?;
    }
    Ok(())
}

/// In-place forward substitution `L·v = b`.
fn forward_substitute(lower: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= lower[(i, j)] * b[j];
        }
        b[i] = s / lower[(i, i)];
    }
}

/// In-place back substitution `Lᵀ·v = b`.
fn back_substitute(lower: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= lower[(j, i)] * b[j];
        }
        b[i] = s / lower[(i, i)];
    }
}

const REFINEMENT_STEPS: usize = 20;

/// Weights `(K + noise·I)⁻¹ y`, starting from the jittered solve and
/// refining against the unjittered matrix with the jittered factor as
/// preconditioner. Each step shrinks the residual along every eigenvector,
/// so the jitter no longer biases the mean at the data.
fn refined_weights(k: &DMatrix<f64>, noise: f64, lower: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let solve = |mut v: Vec<f64>| {
        forward_substitute(lower, &mut v);
        back_substitute(lower, &mut v);
        v
    };
    let residual = |w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] - noise * w[i] - (0..n).map(|j| k[(i, j)] * w[j]).sum::<f64>())
            .collect()
    };
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-14 * max_abs(y).max(1.0);
    let mut w = solve(y.to_vec());
    let mut r = residual(&w);
    for _ in 0..REFINEMENT_STEPS {
        let size = max_abs(&r);
        if size <= tol {
            break;
        }
        let d = solve(r.clone());
        let trial: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + b).collect();
        let r_trial = residual(&trial);
        if !(max_abs(&r_trial) < size) {
            break;
        }
        w = trial;
        r = r_trial;
    }
    w
}

/// A GP conditioned on a dataset. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kind: KernelKind,
    hyper: Hyperparams,
    data: Dataset,
    lower: DMatrix<f64>,
    weights: DVector<f64>,
    jitter: f64,
}

pub fn fit_posterior(data: &Dataset, kind: KernelKind, hyper: &Hyperparams) -> Result<GpPosterior> {
    if data.is_empty() {
        return Err(Error::InvalidData("cannot condition on an empty dataset".into()));
    }
    validate_inputs(data, hyper)?;
    let k = gram(data, kind, hyper);
    let Factor { lower, jitter } = factorize(&k, hyper)?;
    let w = refined_weights(&k, hyper.noise_variance, &lower, data.outputs());
    Ok(GpPosterior {
        kind,
        hyper: hyper.clone(),
        data: data.clone(),
        lower,
        weights: DVector::from_vec(w),
        jitter,
    })
}

impl GpPosterior {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Absolute jitter added to the diagonal on top of the noise variance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    /// Predictive mean and latent variance at `x`; variance is clamped to `[0, σ²]`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        let s2 = self.hyper.signal_variance();
        let mut kstar: Vec<f64> = self
            .data
            .inputs()
            .iter()
            .map(|xi| s2 * self.kind.correlation(self.hyper.scaled_sq_dist(x, xi)))
            .collect();
        let mean = kstar.iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum();
        forward_substitute(&self.lower, &mut kstar);
        let explained: f64 = kstar.iter().map(|v| v * v).sum();
        let var = (s2 - explained).clamp(0.0, s2);
        Ok((mean, var))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    /// Partial derivatives ordered `[σ, l_1, …, l_d, noise_variance]`.
    pub gradient: Vec<f64>,
}

/// Log marginal likelihood of the scaled outputs and its analytic gradient.
///
/// An empty dataset has likelihood 1 (value 0, zero gradient), so that
/// posterior sampling reduces to the prior.
pub fn log_marginal_likelihood(data: &Dataset, kind: KernelKind, hyper: &Hyperparams) -> Result<LogLikelihood> {
    validate_inputs(data, hyper)?;
    let d = hyper.dim();
    let n = data.len();
    if n == 0 {
        return Ok(LogLikelihood {
            value: 0.0,
            gradient: vec![0.0; d + 2],
        });
    }
    let k = gram(data, kind, hyper);
    let Factor { lower, jitter } = factorize(&k, hyper)?;
    let y = data.outputs();
    let mut alpha = y.to_vec();
    forward_substitute(&lower, &mut alpha);
    back_substitute(&lower, &mut alpha);

    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let log_det: f64 = lower.diagonal().iter().map(|v| v.ln()).sum();
    let value = -0.5 * fit - log_det - 0.5 * n as f64 * LN_2PI;

    // W = ααᵀ − K⁻¹; ∂L/∂θ = ½ tr(W ∂K/∂θ).
    let mut inv = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        let mut col: Vec<f64> = inv.column(c).iter().copied().collect();
        forward_substitute(&lower, &mut col);
        back_substitute(&lower, &mut col);
        inv.set_column(c, &DVector::from_vec(col));
    }
    let sigma = hyper.signal_amplitude;
    let s2 = hyper.signal_variance();
    let jitter_rel = jitter / s2;
    let x = data.inputs();
    let mut g_sigma = 0.0;
    let mut g_len = vec![0.0; d];
    let mut g_noise = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - inv[(i, j)];
            if i == j {
                // Diagonal carries σ²(1 + jitter_rel) + noise.
                g_sigma += w * 2.0 * sigma * (1.0 + jitter_rel);
                g_noise += w;
                continue;
            }
            let r2 = hyper.scaled_sq_dist(&x[i], &x[j]);
            g_sigma += w * 2.0 * sigma * kind.correlation(r2);
            let factor = s2 * kind.lengthscale_factor(r2);
            for (m, l) in hyper.lengthscales.iter().enumerate() {
                let delta = x[i][m] - x[j][m];
                g_len[m] += w * factor * delta * delta / (l * l * l);
            }
        }
    }
    let mut gradient = Vec::with_capacity(d + 2);
    gradient.push(0.5 * g_sigma);
    gradient.extend(g_len.iter().map(|g| 0.5 * g));
    gradient.push(0.5 * g_noise);
    Ok(LogLikelihood { value, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
        let inputs = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let outputs = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Dataset::from_parts(inputs, outputs).unwrap()
    }

    #[test]
    fn kernel_closed_forms() {
        let h = Hyperparams::isotropic(1.0, 1.0, 1, 0.0).unwrap();
        let se = kernel_eval(KernelKind::SquaredExponential, &h, &[0.3], &[0.3]).unwrap();
        assert_eq!(se, 1.0);
        let se = kernel_eval(KernelKind::SquaredExponential, &h, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(se, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(se, 0.60653, epsilon = 1e-5);
        let m = kernel_eval(KernelKind::Matern52, &h, &[0.0], &[1.0]).unwrap();
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert_relative_eq!(m, expected, epsilon = 1e-15);
        assert_relative_eq!(m, 0.52399, epsilon = 1e-5);
    }

    #[test]
    fn kernel_is_symmetric_and_checks_dimension() {
        let h = Hyperparams::new(1.7, vec![0.3, 0.8], 0.0).unwrap();
        for kind in [KernelKind::SquaredExponential, KernelKind::Matern52] {
            let a = kernel_eval(kind, &h, &[0.1, 0.9], &[0.4, 0.2]).unwrap();
            let b = kernel_eval(kind, &h, &[0.4, 0.2], &[0.1, 0.9]).unwrap();
            assert_eq!(a, b);
            assert!(matches!(
                kernel_eval(kind, &h, &[0.1], &[0.4, 0.2]),
                Err(Error::DimensionMismatch { expected: 2, found: 1 })
            ));
        }
    }

    #[test]
    fn hyperparams_reject_bad_values() {
        assert!(Hyperparams::new(0.0, vec![1.0], 0.0).is_err());
        assert!(Hyperparams::new(1.0, vec![-1.0], 0.0).is_err());
        assert!(Hyperparams::new(1.0, vec![1.0], -1e-3).is_err());
        assert!(Hyperparams::new(1.0, vec![], 0.0).is_err());
    }

    #[test]
    fn single_point_weights() {
        let data = Dataset::from_parts(vec![vec![0.5]], vec![2.0]).unwrap();
        let h = Hyperparams::isotropic(1.0, 1.0, 1, 0.0).unwrap();
        let post = fit_posterior(&data, KernelKind::SquaredExponential, &h).unwrap();
        // The factor carries the jitter, the weights solve the exact system.
        assert_eq!(post.jitter(), 1e-10);
        assert_relative_eq!(post.weights()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_inputs_do_not_crash() {
        let data = Dataset::from_parts(vec![vec![0.5], vec![0.5]], vec![1.0, 1.0]).unwrap();
        let h = Hyperparams::isotropic(1.0, 1.0, 1, 0.0).unwrap();
        match fit_posterior(&data, KernelKind::SquaredExponential, &h) {
            Ok(post) => {
                let (m, v) = post.predict(&[0.5]).unwrap();
                assert!(m.is_finite() && v >= 0.0);
            }
            Err(e) => assert!(matches!(e, Error::IllConditioned { .. })),
        }
    }

    #[test]
    fn factor_reproduces_regularized_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 12, 2);
        let h = Hyperparams::new(1.3, vec![0.4, 0.7], 1e-6).unwrap();
        let post = fit_posterior(&data, KernelKind::Matern52, &h).unwrap();
        let l = post.cholesky_factor();
        let mut k = gram(&data, KernelKind::Matern52, &h);
        for i in 0..data.len() {
            k[(i, i)] += h.noise_variance + post.jitter();
        }
        let diff = (l * l.transpose() - &k).norm() / k.norm();
        assert!(diff < 1e-10, "relative reconstruction error {diff}");
        let resid = (&k * post.weights() - DVector::from_column_slice(data.outputs())).norm()
            / DVector::from_column_slice(data.outputs()).norm();
        assert!(resid < 1e-8);
    }

    #[test]
    fn noiseless_posterior_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_dataset(&mut rng, 5, 1);
        let h = Hyperparams::isotropic(1.0, 0.2, 1, 0.0).unwrap();
        for kind in [KernelKind::SquaredExponential, KernelKind::Matern52] {
            let post = fit_posterior(&data, kind, &h).unwrap();
            for (x, y) in data.inputs().iter().zip(data.outputs()) {
                let (m, v) = post.predict(x).unwrap();
                assert!((m - y).abs() < 1e-6, "{kind:?}: {m} vs {y}");
                assert!(v < 1e-6);
            }
        }
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let data = Dataset::from_parts(vec![vec![0.1], vec![0.6]], vec![1.0, -0.5]).unwrap();
        let h = Hyperparams::isotropic(2.0, 0.3, 1, 0.0).unwrap();
        let post = fit_posterior(&data, KernelKind::SquaredExponential, &h).unwrap();
        let (m, v) = post.predict(&[30.6]).unwrap();
        assert!(m.abs() < 1e-12);
        assert!((v - 4.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_data_gives_zero_mean_at_centre() {
        let data = Dataset::from_parts(vec![vec![-1.0], vec![1.0]], vec![-1.0, 1.0]).unwrap();
        let h = Hyperparams::isotropic(1.0, 0.8, 1, 0.0).unwrap();
        let post = fit_posterior(&data, KernelKind::Matern52, &h).unwrap();
        let (m, _) = post.predict(&[0.0]).unwrap();
        assert!(m.abs() < 1e-12);
        assert!(post.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_point_log_likelihood() {
        let data = Dataset::from_parts(vec![vec![0.2]], vec![0.0]).unwrap();
        // σ² + jitter ≈ 1 with σ = 1 and no noise.
        let h = Hyperparams::isotropic(1.0, 0.5, 1, 0.0).unwrap();
        let ll = log_marginal_likelihood(&data, KernelKind::SquaredExponential, &h).unwrap();
        assert_relative_eq!(ll.value, -0.918_938_533_204_672_7, epsilon = 1e-9);
    }

    #[test]
    fn zero_targets_have_no_data_fit_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_dataset(&mut rng, 6, 1).map_outputs(|_| 0.0);
        for l in [0.2, 0.5, 0.9] {
            let h = Hyperparams::isotropic(1.0, l, 1, 1e-6).unwrap();
            let ll = log_marginal_likelihood(&data, KernelKind::SquaredExponential, &h).unwrap();
            let post = fit_posterior(&data, KernelKind::SquaredExponential, &h).unwrap();
            let log_det: f64 = post.cholesky_factor().diagonal().iter().map(|v| v.ln()).sum();
            assert_relative_eq!(ll.value, -log_det - 3.0 * LN_2PI, epsilon = 1e-12);
            assert!(post.weights().iter().all(|w| *w == 0.0));
        }
    }

    #[test]
    fn empty_dataset_likelihood_is_flat() {
        let h = Hyperparams::isotropic(1.0, 0.5, 2, 1e-6).unwrap();
        let ll = log_marginal_likelihood(&Dataset::new(), KernelKind::Matern52, &h).unwrap();
        assert_eq!(ll.value, 0.0);
        assert_eq!(ll.gradient, vec![0.0; 4]);
        assert!(fit_posterior(&Dataset::new(), KernelKind::Matern52, &h).is_err());
    }

    #[test]
    fn predict_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_dataset(&mut rng, 9, 3);
        let h = Hyperparams::new(0.9, vec![0.3, 0.5, 0.7], 1e-6).unwrap();
        let a = fit_posterior(&data, KernelKind::Matern52, &h).unwrap();
        let b = fit_posterior(&data, KernelKind::Matern52, &h).unwrap();
        let q = [0.25, 0.5, 0.75];
        let (ma, va) = a.predict(&q).unwrap();
        let (mb, vb) = b.predict(&q).unwrap();
        assert_eq!(ma.to_bits(), mb.to_bits());
        assert_eq!(va.to_bits(), vb.to_bits());
    }
}
