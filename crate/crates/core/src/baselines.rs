//! Reference optimizers run under the same evaluation accounting as the
//! sequential design loop: random search, bounded Nelder–Mead and a
//! generalized simulated annealer.
//!
//! All of them minimize the scaled output of a [`ScaledObjective`] over its
//! unit box and report in natural units.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bo::TraceRow;
use crate::objectives::{Objective, ScaledObjective};
use crate::rng::rng_from;
use crate::simplex::{self, SimplexOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: String,
    pub best_x: Vec<f64>,
    pub best_y: f64,
    pub evaluations: usize,
    /// One row per evaluation; `iter` is the 1-based evaluation number.
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl BaselineResult {
    pub fn incumbents(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.incumbent).collect()
    }
}

/// Counts evaluations and builds the natural-unit trace. Failed
/// evaluations count against the budget and score as `+∞`.
struct Tracker<'a, O> {
    objective: &'a ScaledObjective<O>,
    budget: usize,
    used: usize,
    rows: Vec<TraceRow>,
    best_u: Vec<f64>,
    best_scaled: f64,
}

impl<'a, O: Objective> Tracker<'a, O> {
    fn new(objective: &'a ScaledObjective<O>, budget: usize) -> Self {
        Self {
            objective,
            budget,
            used: 0,
            rows: Vec::new(),
            best_u: Vec::new(),
            best_scaled: f64::INFINITY,
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.used
    }

    /// Scaled value at unit point `u`, or `None` once the budget is spent.
    fn eval(&mut self, u: &[f64]) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        let y = match self.objective.evaluate_raw(u) {
            Ok(y) if y.is_finite() => y,
            Err(Error::BudgetExhausted { .. }) => {
                self.budget = self.used;
                return None;
            }
            Ok(y) => {
                log::warn!("objective returned {y} at {u:?}");
                self.used += 1;
                return Some(f64::INFINITY);
            }
            Err(e) => {
                log::warn!("objective failed at {u:?}: {e}");
                self.used += 1;
                return Some(f64::INFINITY);
            }
        };
        self.used += 1;
        let s = self.objective.scale_output(y);
        if s < self.best_scaled || self.best_u.is_empty() {
            self.best_scaled = s;
            self.best_u = u.to_vec();
        }
        self.rows.push(TraceRow {
            iter: self.used,
            x: self.objective.to_natural(u),
            y,
            incumbent: self.objective.unscale_output(self.best_scaled),
        });
        Some(s)
    }

    fn finish(self, method: &str, converged: bool) -> BaselineResult {
        BaselineResult {
            method: method.to_string(),
            best_x: self.objective.to_natural(&self.best_u),
            best_y: self.objective.unscale_output(self.best_scaled),
            evaluations: self.used,
            rows: self.rows,
            converged,
        }
    }
}

fn unit_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// `budget` independent uniform draws over the box.
pub fn random_search<O: Objective>(objective: &ScaledObjective<O>, budget: usize, seed: u64) -> Result<BaselineResult> {
    if budget == 0 {
        return Err(Error::InvalidConfig("random search needs a budget of at least 1".into()));
    }
    let mut rng = rng_from(seed);
    let mut t = Tracker::new(objective, budget);
    while t.remaining() > 0 {
        let u = unit_point(&mut rng, objective.dim());
        if t.eval(&u).is_none() {
            break;
        }
    }
    Ok(t.finish("random", true))
}

/// Bounded Nelder–Mead from the natural-unit point `x0`. The initial
/// simplex steps 5% of the box width along each axis; the run stops when
/// every vertex is within 1e-6 of the box width of the best one
/// (`converged`) or when the budget is spent.
pub fn nelder_mead<O: Objective>(objective: &ScaledObjective<O>, x0: &[f64], budget: usize) -> Result<BaselineResult> {
    let d = objective.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: x0.len() });
    }
    if budget < d + 1 {
        return Err(Error::InvalidConfig(format!("Nelder–Mead in {d} dimensions needs a budget of at least {}", d + 1)));
    }
    let u0: Vec<f64> = objective.to_unit(x0).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut t = Tracker::new(objective, budget);
    let outcome = simplex::minimize(|u| t.eval(u), &u0, &unit_simplex(d, budget));
    let method = format!("nelder-mead@{}", fmt_point(x0));
    Ok(t.finish(&method, outcome.converged))
}

fn unit_simplex(d: usize, max_evals: usize) -> SimplexOptions {
    SimplexOptions {
        initial_step: vec![0.05; d],
        max_evals,
        diameter_tol: 1e-6,
        lower: vec![0.0; d],
        upper: vec![1.0; d],
    }
}

fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

/// Generalized simulated annealing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingOptions {
    pub initial_temperature: f64,
    /// Visiting distribution shape `q_v` in (1, 3).
    pub visiting: f64,
    /// Acceptance shape `q_a` (< 1).
    pub acceptance: f64,
    /// Geometric factor applied to the temperature after each level.
    pub cooling: f64,
    /// The schedule ends below `initial_temperature · restart_ratio`.
    pub restart_ratio: f64,
    /// Evaluation cap of the simplex polish after a level improves the best point.
    pub local_evals: usize,
    /// Spend whatever budget remains after the schedule on a final polish.
    pub terminal_refinement: bool,
}

impl Default for AnnealingOptions {
    fn default() -> Self {
        Self {
            initial_temperature: 5230.0,
            visiting: 2.62,
            acceptance: -5.0,
            cooling: 0.9,
            restart_ratio: 2e-5,
            local_evals: 8,
            terminal_refinement: true,
        }
    }
}

impl AnnealingOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.visiting > 1.0 && self.visiting < 3.0) {
            return Err(Error::InvalidConfig("visiting shape must lie in (1, 3)".into()));
        }
        if !(self.acceptance < 1.0) {
            return Err(Error::InvalidConfig("acceptance shape must be below 1".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidConfig("cooling factor must lie in (0, 1)".into()));
        }
        if !(self.initial_temperature > 0.0 && self.restart_ratio > 0.0 && self.restart_ratio < 1.0) {
            return Err(Error::InvalidConfig("temperature settings must be positive".into()));
        }
        Ok(())
    }
}

/// Draws one step of the distorted Cauchy–Lorentz (Tsallis) visiting
/// distribution at temperature `t`.
pub fn visiting_step(rng: &mut ChaCha8Rng, qv: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let f1 = (t.ln() / (qv - 1.0)).exp();
    let f2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
    let f3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
    let f4 = PI.sqrt() * f1 * f2 / (f3 * (3.0 - qv));
    let f5 = 1.0 / (qv - 1.0) - 0.5;
    let d1 = 2.0 - f5;
    let f6 = PI * (1.0 - f5) / (PI * (1.0 - f5)).sin() / libm::lgamma(d1).exp();
    let sigma = (-(qv - 1.0) * (f6 / f4).ln() / (3.0 - qv)).exp();
    let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
    let step = sigma * x / den;
    // Tail cut: oversized steps are redrawn uniformly up to the limit, which
    // after folding into the box amounts to a uniform jump.
    if step.is_finite() && step.abs() <= TAIL_LIMIT {
        step
    } else {
        (TAIL_LIMIT * rng.random::<f64>()).copysign(x)
    }
}

const TAIL_LIMIT: f64 = 1e8;

/// Folds `v` back into `[0, 1]` by reflection at the faces.
fn reflect_unit(v: f64) -> f64 {
    let r = v.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

/// Generalized simulated annealing over the box.
///
/// Each temperature level runs a chain of `2d` visits (all coordinates for
/// the first `d`, one coordinate at a time afterwards) with generalized
/// Metropolis acceptance. When a level improves the best point it is
/// polished by a short bounded simplex search. `converged` is false when
/// the budget runs out before the temperature schedule completes.
pub fn dual_annealing<O: Objective>(
    objective: &ScaledObjective<O>,
    budget: usize,
    seed: u64,
    opts: &AnnealingOptions,
) -> Result<BaselineResult> {
    opts.validate()?;
    if budget == 0 {
        return Err(Error::InvalidConfig("dual annealing needs a budget of at least 1".into()));
    }
    let d = objective.dim();
    let mut rng = rng_from(seed);
    let mut t = Tracker::new(objective, budget);
    let mut current = unit_point(&mut rng, d);
    let Some(mut e_current) = t.eval(&current) else {
        return Ok(t.finish("dual-annealing", false));
    };
    let (qv, qa) = (opts.visiting, opts.acceptance);
    let stop_temperature = opts.initial_temperature * opts.restart_ratio;
    let mut temperature = opts.initial_temperature;
    let mut level = 0usize;
    let mut schedule_done = false;

    'schedule: loop {
        if temperature < stop_temperature {
            schedule_done = true;
            break;
        }
        let accept_temperature = temperature / (level + 1) as f64;
        let best_before = t.best_scaled;
        for step in 0..2 * d {
            let mut candidate = current.clone();
            if step < d {
                for c in candidate.iter_mut() {
                    *c = reflect_unit(*c + visiting_step(&mut rng, qv, temperature));
                }
            } else {
                let i = step - d;
                candidate[i] = reflect_unit(candidate[i] + visiting_step(&mut rng, qv, temperature));
            }
            let Some(e) = t.eval(&candidate) else { break 'schedule };
            let accept = if e <= e_current {
                true
            } else {
                let p = 1.0 - (1.0 - qa) * (e - e_current) / accept_temperature;
                let p = if p <= 0.0 { 0.0 } else { (p.ln() / (1.0 - qa)).exp() };
                rng.random::<f64>() <= p
            };
            if accept {
                current = candidate;
                e_current = e;
            }
        }
        if t.best_scaled < best_before && opts.local_evals > d {
            let cap = opts.local_evals.min(t.remaining());
            if cap <= d {
                break;
            }
            let start = t.best_u.clone();
            simplex::minimize(|u| t.eval(u), &start, &unit_simplex(d, cap));
            if t.best_scaled < e_current {
                current = t.best_u.clone();
                e_current = t.best_scaled;
            }
        }
        temperature *= opts.cooling;
        level += 1;
    }

    let mut converged = schedule_done;
    if schedule_done && opts.terminal_refinement && t.remaining() > d {
        let start = t.best_u.clone();
        let cap = t.remaining();
        let outcome = simplex::minimize(|u| t.eval(u), &start, &unit_simplex(d, cap));
        converged = outcome.converged;
    }
    Ok(t.finish("dual-annealing", converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Sense;
    use crate::objectives::FnObjective;

    fn obj1d<F: Fn(&[f64]) -> f64 + Send + Sync>(lo: f64, hi: f64, f: F) -> ScaledObjective<FnObjective<F>> {
        ScaledObjective::plain(FnObjective::new(vec![lo], vec![hi], f).unwrap()).unwrap()
    }

    #[test]
    fn random_search_single_draw() {
        let o = obj1d(0.0, 1.0, |x| x[0]);
        let r = random_search(&o, 1, 3).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.best_y, r.rows[0].y);
        assert_eq!(r.best_x, r.rows[0].x);
    }

    #[test]
    fn random_search_is_reproducible_and_monotone() {
        let o = obj1d(0.0, 1.0, |x| (x[0] - 0.3).abs());
        let a = random_search(&o, 50, 8).unwrap();
        let b = random_search(&o, 50, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.incumbents().windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(o.evaluations(), 100);
    }

    #[test]
    fn random_search_on_a_concave_peak() {
        for seed in 0..10 {
            let o = ScaledObjective::new(
                FnObjective::new(vec![0.0], vec![1.0], |x| -(x[0] - 0.5).powi(2)).unwrap(),
                1.0,
                Sense::Maximize,
            )
            .unwrap();
            let r = random_search(&o, 1000, seed).unwrap();
            assert!((r.best_x[0] - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn nelder_mead_convex_quadratic() {
        let o = obj1d(-10.0, 10.0, |x| (x[0] - 3.0).powi(2));
        let r = nelder_mead(&o, &[0.0], 50).unwrap();
        assert!((r.best_x[0] - 3.0).abs() < 1e-3, "{:?}", r.best_x);
        assert!(r.evaluations <= 50);
    }

    #[test]
    fn nelder_mead_at_minimum_converges_in_place() {
        let o = obj1d(-10.0, 10.0, |x| (x[0] - 3.0).powi(2));
        let r = nelder_mead(&o, &[3.0], 200).unwrap();
        assert!(r.converged);
        assert!((r.best_x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_rejects_tiny_budget() {
        let o = ScaledObjective::plain(FnObjective::new(vec![0.0; 2], vec![1.0; 2], |x| x[0]).unwrap()).unwrap();
        assert!(nelder_mead(&o, &[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn annealing_single_evaluation() {
        let o = obj1d(0.0, 1.0, |x| x[0]);
        let r = dual_annealing(&o, 1, 4, &AnnealingOptions::default()).unwrap();
        assert_eq!(r.evaluations, 1);
        assert!(!r.converged);
        let mut rng = rng_from(4);
        assert_eq!(r.best_x, unit_point(&mut rng, 1));
    }

    #[test]
    fn annealing_is_reproducible_and_within_budget() {
        let o = obj1d(0.0, 1.0, |x| (10.0 * x[0]).sin());
        let a = dual_annealing(&o, 60, 2, &AnnealingOptions::default()).unwrap();
        let b = dual_annealing(&o, 60, 2, &AnnealingOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluations, 60);
        assert!(!a.converged);
    }

    #[test]
    fn annealing_completes_schedule_with_large_budget() {
        let o = obj1d(0.0, 1.0, |x| (x[0] - 0.2).powi(2));
        let r = dual_annealing(&o, 5000, 1, &AnnealingOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.best_x[0] - 0.2).abs() < 1e-4);
        assert!(r.evaluations < 5000);
    }

    #[test]
    fn reflection_stays_in_unit_interval() {
        for v in [-3.7, -1.0, -0.2, 0.0, 0.4, 1.0, 1.3, 2.0, 7.9, 1e8] {
            let r = reflect_unit(v);
            assert!((0.0..=1.0).contains(&r), "{v} -> {r}");
        }
        assert!((reflect_unit(1.25) - 0.75).abs() < 1e-15);
        assert!((reflect_unit(-0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn visiting_steps_shrink_with_temperature() {
        let mut rng = rng_from(0);
        let spread = |rng: &mut ChaCha8Rng, t: f64| {
            let mut v: Vec<f64> = (0..2001).map(|_| visiting_step(rng, 2.62, t).abs()).collect();
            v.sort_by(f64::total_cmp);
            v[1000]
        };
        let hot = spread(&mut rng, 5230.0);
        let cold = spread(&mut rng, 0.1);
        assert!(hot > 100.0 * cold, "{hot} vs {cold}");
    }
}
