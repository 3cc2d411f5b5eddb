//! Property tests for the mathematical core: kernels, posterior, likelihood
//! gradient, acquisitions, hyperparameter inference and the optimizers.

use emtbo::acquisition::{
    bichon_from_moments, ei_from_moments, expected_improvement, marginalized_acquisition, Acquisition, Incumbent,
    PosteriorEnsemble, ThresholdSpec,
};
use emtbo::gp::{fit_posterior, kernel_eval, log_marginal_likelihood, Dataset, Hyperparams, KernelKind, DEFAULT_NOISE};
use emtbo::hyper::{mcmc_sample, metropolis_accept, ml_estimate, GradAscentConfig, McmcConfig, PriorSpec, UniformPrior};
use emtbo::rng::rng_from;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn kernel() -> impl Strategy<Value = KernelKind> {
    prop_oneof![Just(KernelKind::SquaredExponential), Just(KernelKind::Matern52)]
}

fn points(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, d), n)
}

fn gram(kind: KernelKind, h: &Hyperparams, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|a| xs.iter().map(|b| kernel_eval(kind, h, a, b).unwrap()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kernel_matrices_factor_with_small_jitter(
        kind in kernel(),
        d in 1usize..=3,
        seed in any::<u64>(),
        n in 1usize..=50,
        sigma in 0.1..6.0f64,
        l in 0.1..1.0f64,
    ) {
        let mut rng = rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let h = Hyperparams::isotropic(sigma, l, d, DEFAULT_NOISE).unwrap();
        let k = gram(kind, &h, &xs);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(k[i][j], k[j][i]);
            }
        }
        let post = fit_posterior(&Dataset::from_parts(xs.clone(), ys).unwrap(), kind, &h).unwrap();
        prop_assert!(post.jitter() <= 1e-8 * sigma * sigma);

        // L·Lᵀ reproduces K + (noise + jitter)·I.
        let lower = post.cholesky_factor();
        let diag = DEFAULT_NOISE + post.jitter();
        let scale = sigma * sigma;
        for i in 0..n {
            for j in 0..=i {
                let llt: f64 = (0..=j).map(|c| lower[(i, c)] * lower[(j, c)]).sum();
                let want = k[i][j] + if i == j { diag } else { 0.0 };
                prop_assert!((llt - want).abs() <= 1e-10 * scale, "{} vs {}", llt, want);
            }
        }
        for _ in 0..10 {
            let q: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let (m, v) = post.predict(&q).unwrap();
            prop_assert!(m.is_finite());
            prop_assert!(v >= 0.0);
            prop_assert_eq!(post.predict(&q).unwrap(), (m, v));
        }
    }

    #[test]
    fn noiseless_posterior_interpolates(
        kind in kernel(),
        xs in points(5..=5, 2),
        ys in prop::collection::vec(-2.0..2.0f64, 5),
        sigma in 0.5..3.0f64,
        l in 0.1..1.0f64,
    ) {
        let h = Hyperparams::isotropic(sigma, l, 2, 0.0).unwrap();
        let post = fit_posterior(&Dataset::from_parts(xs.clone(), ys.clone()).unwrap(), kind, &h).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, v) = post.predict(x).unwrap();
            prop_assert!((m - y).abs() < 1e-6, "mean {} vs {}", m, y);
            prop_assert!(v < 1e-6, "variance {}", v);
        }
    }

    #[test]
    fn lml_gradient_matches_finite_differences(
        kind in kernel(),
        d in 1usize..=3,
        seed in any::<u64>(),
        n in 3usize..=15,
        sigma in 0.3..3.0f64,
        noise in 1e-3..1e-1f64,
        ls in prop::collection::vec(0.15..1.0f64, 3),
    ) {
        let mut rng = rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (4.0 * x[0]).sin() + 0.3 * rng.random::<f64>()).collect();
        let data = Dataset::from_parts(xs, ys).unwrap();
        let h = Hyperparams::new(sigma, ls[..d].to_vec(), noise).unwrap();
        let ll = log_marginal_likelihood(&data, kind, &h).unwrap();

        // Coordinates [σ, l_1..l_d, noise], perturbed in place.
        let theta: Vec<f64> = std::iter::once(sigma).chain(ls[..d].iter().copied()).chain([noise]).collect();
        let build = |t: &[f64]| Hyperparams::new(t[0], t[1..=d].to_vec(), t[d + 1]).unwrap();
        let mut fd = Vec::new();
        for i in 0..theta.len() {
            let step = 1e-5 * theta[i];
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[i] += step;
            down[i] -= step;
            let f = |t: &[f64]| log_marginal_likelihood(&data, kind, &build(t)).unwrap().value;
            fd.push((f(&up) - f(&down)) / (2.0 * step));
        }
        let diff: f64 = ll.gradient.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(diff / norm.max(1e-8) < 1e-4, "analytic {:?} vs fd {:?}", ll.gradient, fd);
    }

    #[test]
    fn ei_is_nonnegative_and_grows_with_uncertainty(
        m in -5.0..5.0f64,
        y_star in -5.0..5.0f64,
        s in 0.0..5.0f64,
    ) {
        let inc = Incumbent::minimize(y_star);
        prop_assert!(ei_from_moments(m, s, &inc) >= 0.0);
        if m < y_star {
            let mut last = ei_from_moments(m, 0.0, &inc);
            for k in 1..=50 {
                let v = ei_from_moments(m, k as f64 * 0.1, &inc);
                prop_assert!(v >= last - 1e-15);
                last = v;
            }
        }
    }

    #[test]
    fn ensemble_score_ignores_sample_order(seed in any::<u64>(), y_star in -1.0..1.0f64) {
        let mut rng = rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x[0]).cos()).collect();
        let data = Dataset::from_parts(xs, ys).unwrap();
        let mut samples: Vec<Hyperparams> = (0..8)
            .map(|_| Hyperparams::isotropic(0.5 + rng.random::<f64>(), 0.1 + 0.9 * rng.random::<f64>(), 1, DEFAULT_NOISE).unwrap())
            .collect();
        let acq = Acquisition::ExpectedImprovement(Incumbent::minimize(y_star));
        let x = [rng.random::<f64>()];
        let a = marginalized_acquisition(&samples, &data, KernelKind::Matern52, &x, &acq).unwrap();
        samples.reverse();
        samples.swap(0, 3);
        let b = marginalized_acquisition(&samples, &data, KernelKind::Matern52, &x, &acq).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        let ens = PosteriorEnsemble::fit(&samples, &data, KernelKind::Matern52).unwrap();
        prop_assert!((ens.score(&acq, &x).unwrap() - a).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn ml_estimate_stays_positive(seed in any::<u64>(), step in 1e-4..0.5f64) {
        let mut rng = rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] - x[1] * x[1] + rng.random::<f64>()).collect();
        let data = Dataset::from_parts(xs, ys).unwrap();
        let init = Hyperparams::isotropic(1.0, 0.5, 2, DEFAULT_NOISE).unwrap();
        let cfg = GradAscentConfig { step_size: step, ..GradAscentConfig::default() };
        let est = ml_estimate(&data, KernelKind::SquaredExponential, &init, &cfg).unwrap();
        prop_assert!(est.hyper.signal_amplitude > 0.0);
        prop_assert!(est.hyper.lengthscales.iter().all(|l| *l > 0.0));
    }

    #[test]
    fn mcmc_samples_stay_in_support(seed in any::<u64>(), n in 0usize..6) {
        let mut rng = rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * 2.0 - 1.0).collect();
        let data = Dataset::from_parts(xs, ys).unwrap();
        let priors = PriorSpec::new(UniformPrior::new(0.1, 6.0).unwrap(), UniformPrior::new(0.1, 1.0).unwrap()).unwrap();
        let cfg = McmcConfig { samples: 50, burn_in: 20, seed, ..McmcConfig::default() };
        let chain = mcmc_sample(&data, KernelKind::SquaredExponential, &priors, 1, DEFAULT_NOISE, &cfg).unwrap();
        prop_assert_eq!(chain.samples.len(), 50);
        prop_assert!(chain.samples.iter().all(|h| priors.contains(h)));
    }
}

/// Fixed-seed triples for the closed-form vs sampled comparisons.
fn triples(seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = rng_from(seed);
    (0..20)
        .map(|_| {
            let m = rng.random_range(-2.0..2.0);
            let s = rng.random_range(0.05..2.0);
            let c = rng.random_range(-2.0..2.0);
            (m, s, c)
        })
        .collect()
}

/// Mean and standard error of `g(Y)` over `n` draws of `Y ~ N(m, s²)`.
fn sampled(m: f64, s: f64, n: usize, seed: u64, g: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut rng = rng_from(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = g(m + s * z);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

#[test]
fn ei_matches_its_sampled_definition() {
    for (k, (m, s, y_star)) in triples(101).into_iter().enumerate() {
        let closed = ei_from_moments(m, s, &Incumbent::minimize(y_star));
        let (mc, se) = sampled(m, s, 1_000_000, 1000 + k as u64, |y| (y_star - y).max(0.0));
        assert!((closed - mc).abs() <= 3.0 * se.max(1e-12), "m={m} s={s} y*={y_star}: {closed} vs {mc} ± {se}");
    }
}

#[test]
fn bichon_matches_its_sampled_definition() {
    let mut rng = rng_from(7);
    for (k, (m, s, z)) in triples(202).into_iter().enumerate() {
        // Thresholds within three predictive deviations; farther out the
        // sampled band is empty and carries no information.
        let t = m + 1.5 * z * s;
        let (delta, alpha) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let thr = ThresholdSpec::new(t, delta, alpha).unwrap();
        let closed = bichon_from_moments(m, s, &thr);
        let eps = delta * alpha * s;
        let (mc, se) = sampled(m, s, 1_000_000, 2000 + k as u64, |y| (eps - (t - y).abs()).max(0.0));
        assert!((closed - mc).abs() <= 3.0 * se.max(1e-12), "m={m} s={s} T={t}: {closed} vs {mc} ± {se}");
    }
}

#[test]
fn ei_vanishes_at_a_noiseless_incumbent() {
    // Exact moments at an observed point: no spread, mean equal to y*.
    assert_eq!(ei_from_moments(0.3, 0.0, &Incumbent::minimize(0.3)), 0.0);

    // Through a posterior the residual spread comes from the jitter only.
    let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
    let ys = vec![0.4, -0.2, 0.7];
    let h = Hyperparams::isotropic(1.0, 0.3, 1, 0.0).unwrap();
    let post = fit_posterior(&Dataset::from_parts(xs, ys).unwrap(), KernelKind::Matern52, &h).unwrap();
    let ei = expected_improvement(&post, &[0.5], &Incumbent::minimize(-0.2)).unwrap();
    let (_, v) = post.predict(&[0.5]).unwrap();
    assert!(ei <= v.sqrt() * 0.4 + 1e-12, "{ei}");
}

/// Kolmogorov–Smirnov statistic of `xs` against the uniform law on `[a, b]`.
fn ks_uniform(mut xs: Vec<f64>, a: f64, b: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = ((x - a) / (b - a)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn prior_only_chain_reproduces_the_prior() {
    let priors = PriorSpec::new(UniformPrior::new(0.1, 6.0).unwrap(), UniformPrior::new(0.1, 1.0).unwrap()).unwrap();
    // With thinning the retained draws are close to independent.
    let cfg = McmcConfig {
        samples: 10_000,
        burn_in: 1000,
        thinning: 100,
        proposal_fraction: 0.5,
        shared_lengthscale: false,
        seed: 17,
    };
    let chain = mcmc_sample(&Dataset::new(), KernelKind::SquaredExponential, &priors, 1, DEFAULT_NOISE, &cfg).unwrap();
    let sigmas: Vec<f64> = chain.samples.iter().map(|h| h.signal_amplitude).collect();
    let lens: Vec<f64> = chain.samples.iter().map(|h| h.lengthscales[0]).collect();
    // Critical value at the 1% level for n = 10⁴.
    let crit = 1.628 / (10_000f64).sqrt();
    let (ds, dl) = (ks_uniform(sigmas, 0.1, 6.0), ks_uniform(lens, 0.1, 1.0));
    assert!(ds < crit, "σ: D = {ds} ≥ {crit}");
    assert!(dl < crit, "l: D = {dl} ≥ {crit}");
}

#[test]
fn metropolis_rule_has_the_right_stationary_law() {
    // Two states with target weights 0.3 / 0.7, always proposing the other one.
    let target = [0.3f64, 0.7];
    let mut rng = rng_from(3);
    let mut state = 0usize;
    let mut visits = [0usize; 2];
    let steps = 100_000;
    for _ in 0..steps {
        let other = 1 - state;
        if metropolis_accept(target[other].ln() - target[state].ln(), rng.random()) {
            state = other;
        }
        visits[state] += 1;
    }
    let share = visits[1] as f64 / steps as f64;
    assert!((share - 0.7).abs() < 0.02 * 0.7, "{share}");
}
