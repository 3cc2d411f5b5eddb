//! Expensive functions behind a common interface.
//!
//! An [`Objective`] works in natural units over a box. [`ScaledObjective`]
//! puts a unit-box view and output scaling in front of it and counts every
//! underlying evaluation, which is the only place budgets are enforced.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acquisition::Sense;
use crate::emt::{self, CircuitParams, StochasticInputs, REMANENT_FLUX_MAX, T_SWITCH_MAX};
use crate::{Error, Result};

/// A deterministic function of a point in natural units.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    /// Lower and upper corners of the natural-unit domain.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).bounds()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).bounds()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<T: Objective + ?Sized> Objective for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).bounds()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

/// Closure-backed objective, mostly for analytic test functions.
pub struct FnObjective<F> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnObjective<F> {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, f: F) -> Result<Self> {
        check_box(&lower, &upper)?;
        Ok(Self { lower, upper, f })
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok((self.f)(x))
    }
}

pub(crate) fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty() || lower.len() != upper.len() {
        return Err(Error::InvalidConfig(format!(
            "box corners must be nonempty and of equal length ({} vs {})",
            lower.len(),
            upper.len()
        )));
    }
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !(l.is_finite() && u.is_finite() && l < u) {
            return Err(Error::InvalidConfig(format!("box dimension {i}: need lower < upper, got [{l}, {u}]")));
        }
    }
    Ok(())
}

/// Lookup table on the Cartesian product of two sorted axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridObjective {
    k: Vec<f64>,
    phi: Vec<f64>,
    /// Row-major: `risk[i * phi.len() + j]` belongs to `(k[i], phi[j])`.
    risk: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    k: f64,
    phi: f64,
    risk: f64,
}

impl GridObjective {
    pub fn new(k: Vec<f64>, phi: Vec<f64>, risk: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("k", &k), ("phi", &phi)] {
            if axis.is_empty() {
                return Err(Error::GridTable(format!("{name} axis is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::GridTable(format!("{name} axis must be finite and strictly increasing")));
            }
        }
        if risk.len() != k.len() * phi.len() {
            return Err(Error::GridTable(format!(
                "table has {} values for a {}x{} grid",
                risk.len(),
                k.len(),
                phi.len()
            )));
        }
        if let Some(pos) = risk.iter().position(|r| !(r.is_finite() && (0.0..=1.0).contains(r))) {
            let (i, j) = (pos / phi.len(), pos % phi.len());
            return Err(Error::GridTable(format!(
                "risk at (k={}, phi={}) is {}; risks must be finite and in [0, 1]",
                k[i], phi[j], risk[pos]
            )));
        }
        Ok(Self { k, phi, risk })
    }

    /// Reads a `k,phi,risk` CSV. Numbers use `.` as decimal separator and
    /// are parsed as Rust `f64` literals; rows may come in any order but the
    /// full Cartesian product of the distinct `k` and `phi` values must be
    /// present exactly once.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["k", "phi", "risk"] {
            return Err(Error::GridTable(format!(
                "header must be `k,phi,risk`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut cells: HashMap<(u64, u64), f64> = HashMap::new();
        let (mut ks, mut phis) = (Vec::new(), Vec::new());
        for (line, row) in rdr.deserialize::<GridRow>().enumerate() {
            let row = row?;
            if !(row.k.is_finite() && row.phi.is_finite()) {
                return Err(Error::GridTable(format!("row {}: non-finite coordinate", line + 2)));
            }
            if !row.risk.is_finite() {
                return Err(Error::GridTable(format!(
                    "row {}: risk at (k={}, phi={}) is not finite",
                    line + 2,
                    row.k,
                    row.phi
                )));
            }
            if cells.insert((key(row.k), key(row.phi)), row.risk).is_some() {
                return Err(Error::GridTable(format!(
                    "row {}: duplicate entry for (k={}, phi={})",
                    line + 2,
                    row.k,
                    row.phi
                )));
            }
            ks.push(row.k);
            phis.push(row.phi);
        }
        let axis = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (k, phi) = (axis(ks), axis(phis));
        let mut risk = Vec::with_capacity(k.len() * phi.len());
        for &kv in &k {
            for &pv in &phi {
                match cells.get(&(key(kv), key(pv))) {
                    Some(&r) => risk.push(r),
                    None => return Err(Error::GridTable(format!("missing grid point (k={kv}, phi={pv})"))),
                }
            }
        }
        Self::new(k, phi, risk)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::GridTable(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, &k) in self.k.iter().enumerate() {
            for (j, &phi) in self.phi.iter().enumerate() {
                w.serialize(GridRow {
                    k,
                    phi,
                    risk: self.value(i, j),
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn k_axis(&self) -> &[f64] {
        &self.k
    }

    pub fn phi_axis(&self) -> &[f64] {
        &self.phi
    }

    pub fn axes(&self) -> Vec<Vec<f64>> {
        vec![self.k.clone(), self.phi.clone()]
    }

    pub fn len(&self) -> usize {
        self.risk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risk.is_empty()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.risk[i * self.phi.len() + j]
    }

    /// Node indices and value of the smallest risk (first in row-major order).
    pub fn argmin(&self) -> ((usize, usize), f64) {
        let pos = (0..self.risk.len())
            .min_by(|&a, &b| self.risk[a].total_cmp(&self.risk[b]))
            .unwrap_or(0);
        ((pos / self.phi.len(), pos % self.phi.len()), self.risk[pos])
    }

    /// Exact lookup; `x` must coincide with a node up to rounding.
    pub fn lookup(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: x.len() });
        }
        match (node_index(&self.k, x[0]), node_index(&self.phi, x[1])) {
            (Some(i), Some(j)) => Ok(self.value(i, j)),
            _ => Err(Error::OffGrid(x.to_vec())),
        }
    }
}

fn key(v: f64) -> u64 {
    // Fold −0.0 onto 0.0 so both spellings name the same node.
    (v + 0.0).to_bits()
}

/// Index of the axis node within rounding distance of `v`.
pub(crate) fn node_index(axis: &[f64], v: f64) -> Option<usize> {
    let span = (axis[axis.len() - 1] - axis[0]).abs().max(1.0);
    let tol = 1e-9 * span;
    let pos = axis.partition_point(|a| *a < v);
    [pos.checked_sub(1), Some(pos)]
        .into_iter()
        .flatten()
        .filter(|&i| i < axis.len())
        .find(|&i| (axis[i] - v).abs() <= tol)
}

impl Objective for GridObjective {
    fn dim(&self) -> usize {
        2
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.k[0], self.phi[0]], vec![self.k[self.k.len() - 1], self.phi[self.phi.len() - 1]])
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.lookup(x)
    }
}

/// Smallest value of the synthetic risk surface.
pub const SYNTHETIC_RISK_MIN: f64 = 0.06488;
/// Largest value of the synthetic risk surface.
pub const SYNTHETIC_RISK_MAX: f64 = 0.09;
/// `(k, phi)` node indices holding [`SYNTHETIC_RISK_MIN`].
pub const SYNTHETIC_OPTIMUM: (usize, usize) = (7, 7);

/// Smooth two-bowl risk surface on the 9×20 grid `k ∈ linspace(0, 2, 9)`,
/// `phi ∈ linspace(0, π, 20)`.
///
/// The deep bowl sits on node (k = 1.75, phi = 7π/19 ≈ 1.157), the node of
/// this spacing closest to phi = 1.09; a shallower bowl around (0.5, 2.5)
/// gives a second local minimum. Values are mapped affinely onto
/// `[SYNTHETIC_RISK_MIN, SYNTHETIC_RISK_MAX]`.
pub fn synthetic_risk_surface() -> GridObjective {
    let k: Vec<f64> = (0..9).map(|i| 2.0 * i as f64 / 8.0).collect();
    let phi: Vec<f64> = (0..20).map(|j| PI * j as f64 / 19.0).collect();
    let (k0, p0) = (k[SYNTHETIC_OPTIMUM.0], phi[SYNTHETIC_OPTIMUM.1]);
    let raw: Vec<f64> = k
        .iter()
        .flat_map(|&kv| phi.iter().map(move |&pv| (kv, pv)))
        .map(|(kv, pv)| {
            let deep = (-((kv - k0) / 0.45).powi(2) - ((pv - p0) / 0.6).powi(2)).exp();
            let shallow = (-((kv - 0.5) / 0.4).powi(2) - ((pv - 2.5) / 0.5).powi(2)).exp();
            1.0 - deep - 0.7 * shallow
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let risk = raw
        .iter()
        .map(|r| SYNTHETIC_RISK_MIN + (r - lo) / (hi - lo) * (SYNTHETIC_RISK_MAX - SYNTHETIC_RISK_MIN))
        .collect();
    GridObjective::new(k, phi, risk).expect("synthetic surface is a valid table")
}

/// Which stochastic inputs of the energization are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergizationInputs {
    /// `t_switch` only, no remanence.
    SwitchingTime,
    /// `(t_switch, λ₀, φ_flux)`.
    SwitchingAndRemanence,
}

/// Maximum transformer-terminal overvoltage (kV) of one energization.
#[derive(Debug, Clone)]
pub struct EnergizationObjective {
    pub params: CircuitParams,
    pub inputs: EnergizationInputs,
    pub dt: f64,
    pub duration: f64,
}

impl EnergizationObjective {
    pub fn new(params: CircuitParams, inputs: EnergizationInputs) -> Self {
        Self {
            params,
            inputs,
            dt: emt::DEFAULT_DT,
            duration: emt::DEFAULT_DURATION,
        }
    }

    pub fn stochastic_inputs(&self, x: &[f64]) -> Result<StochasticInputs> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self.inputs {
            EnergizationInputs::SwitchingTime => StochasticInputs::switching_only(x[0]),
            EnergizationInputs::SwitchingAndRemanence => StochasticInputs {
                t_switch: x[0],
                remanent_flux: x[1],
                remanence_angle: x[2],
            },
        })
    }
}

impl Objective for EnergizationObjective {
    fn dim(&self) -> usize {
        match self.inputs {
            EnergizationInputs::SwitchingTime => 1,
            EnergizationInputs::SwitchingAndRemanence => 3,
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self.inputs {
            EnergizationInputs::SwitchingTime => (vec![0.0], vec![T_SWITCH_MAX]),
            EnergizationInputs::SwitchingAndRemanence => {
                (vec![0.0, 0.0, 0.0], vec![T_SWITCH_MAX, REMANENT_FLUX_MAX, TAU])
            }
        }
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let inputs = self.stochastic_inputs(x)?;
        let w = emt::simulate(&self.params, &inputs, self.dt, self.duration)?;
        emt::max_overvoltage(&w)
    }
}

/// Unit-box, output-scaled and counted view of an objective.
///
/// Outputs are divided by `divisor` and negated for [`Sense::Maximize`], so
/// the optimizers behind it always minimize.
pub struct ScaledObjective<O> {
    inner: O,
    lower: Vec<f64>,
    upper: Vec<f64>,
    divisor: f64,
    sense: Sense,
    budget: Option<usize>,
    count: AtomicUsize,
}

impl<O: Objective> ScaledObjective<O> {
    pub fn new(inner: O, divisor: f64, sense: Sense) -> Result<Self> {
        if !(divisor.is_finite() && divisor != 0.0) {
            return Err(Error::InvalidConfig(format!("output divisor must be finite and nonzero, got {divisor}")));
        }
        let (lower, upper) = inner.bounds();
        check_box(&lower, &upper)?;
        Ok(Self {
            inner,
            lower,
            upper,
            divisor,
            sense,
            budget: None,
            count: AtomicUsize::new(0),
        })
    }

    /// Identity output scaling, minimization.
    pub fn plain(inner: O) -> Result<Self> {
        Self::new(inner, 1.0, Sense::Minimize)
    }

    /// Hard cap on underlying evaluations; further calls fail with
    /// [`Error::BudgetExhausted`] without touching the objective.
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn evaluations(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> Option<usize> {
        self.budget.map(|b| b.saturating_sub(self.evaluations()))
    }

    pub fn natural_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (l, h))| l + u * (h - l))
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, h))| (x - l) / (h - l))
            .collect()
    }

    pub fn scale_output(&self, y: f64) -> f64 {
        match self.sense {
            Sense::Minimize => y / self.divisor,
            Sense::Maximize => -y / self.divisor,
        }
    }

    pub fn unscale_output(&self, s: f64) -> f64 {
        match self.sense {
            Sense::Minimize => s * self.divisor,
            Sense::Maximize => -s * self.divisor,
        }
    }

    /// Evaluates at a unit-box point and returns the scaled output.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        self.evaluate_raw(u).map(|y| self.scale_output(y))
    }

    /// Evaluates at a unit-box point and returns the natural output.
    pub fn evaluate_raw(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        if let Some(c) = u.iter().find(|c| !(-1e-12..=1.0 + 1e-12).contains(*c)) {
            return Err(Error::InvalidData(format!("coordinate {c} outside the unit box")));
        }
        let reserved = self.count.fetch_add(1, Ordering::SeqCst);
        if let Some(budget) = self.budget {
            if reserved >= budget {
                self.count.fetch_sub(1, Ordering::SeqCst);
                return Err(Error::BudgetExhausted { budget });
            }
        }
        let x: Vec<f64> = self
            .to_natural(u)
            .into_iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect();
        self.inner.evaluate(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_csv() -> &'static str {
        "k,phi,risk\n0,0,0.1\n0,1.5,0.2\n1,0,0.3\n1,1.5,0.4\n"
    }

    #[test]
    fn toy_table_lookup() {
        let g = GridObjective::from_reader(toy_csv().as_bytes()).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.lookup(&[1.0, 0.0]).unwrap(), 0.3);
        assert_eq!(g.lookup(&[0.0, 1.5]).unwrap(), 0.2);
        assert!(matches!(g.lookup(&[0.5, 0.0]), Err(Error::OffGrid(_))));
        assert!(g.lookup(&[1.0]).is_err());
    }

    #[test]
    fn rows_may_come_in_any_order() {
        let g = GridObjective::from_reader("k,phi,risk\n1,1.5,0.4\n0,0,0.1\n1,0,0.3\n0,1.5,0.2\n".as_bytes()).unwrap();
        assert_eq!(g, GridObjective::from_reader(toy_csv().as_bytes()).unwrap());
    }

    #[test]
    fn missing_point_is_named() {
        let err = GridObjective::from_reader("k,phi,risk\n0,0,0.1\n0,1.5,0.2\n1,0,0.3\n".as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("k=1") && msg.contains("phi=1.5"), "{msg}");
    }

    #[test]
    fn rejects_bad_tables() {
        let dup = "k,phi,risk\n0,0,0.1\n0,0,0.1\n";
        assert!(GridObjective::from_reader(dup.as_bytes()).unwrap_err().to_string().contains("duplicate"));
        let nan = "k,phi,risk\n0,0,NaN\n";
        assert!(GridObjective::from_reader(nan.as_bytes()).is_err());
        let big = "k,phi,risk\n0,0,1.5\n";
        assert!(GridObjective::from_reader(big.as_bytes()).is_err());
        let header = "a,b,c\n0,0,0.1\n";
        assert!(GridObjective::from_reader(header.as_bytes()).is_err());
        let comma_decimal = "k,phi,risk\n0,0,\"0,1\"\n";
        assert!(GridObjective::from_reader(comma_decimal.as_bytes()).is_err());
    }

    #[test]
    fn synthetic_surface_shape() {
        let g = synthetic_risk_surface();
        assert_eq!((g.k_axis().len(), g.phi_axis().len()), (9, 20));
        let ((i, j), min) = g.argmin();
        assert_eq!((i, j), SYNTHETIC_OPTIMUM);
        assert_eq!(g.k_axis()[i], 1.75);
        assert!((min - SYNTHETIC_RISK_MIN).abs() < 1e-15);
        // Unique minimum.
        assert_eq!(g.risk.iter().filter(|r| **r < SYNTHETIC_RISK_MIN + 1e-9).count(), 1);
        let max = g.risk.iter().copied().fold(0.0, f64::max);
        assert!((max - SYNTHETIC_RISK_MAX).abs() < 1e-15);
        // Closest node of the phi axis to 1.09.
        let nearest = (0..20)
            .min_by(|&a, &b| (g.phi_axis()[a] - 1.09).abs().total_cmp(&(g.phi_axis()[b] - 1.09).abs()))
            .unwrap();
        assert_eq!(nearest, j);
        assert!((g.lookup(&[1.75, g.phi_axis()[7]]).unwrap() - 0.06488).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let g = synthetic_risk_surface();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(GridObjective::from_reader(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn scaling_arithmetic() {
        let constant = FnObjective::new(vec![0.0], vec![1.0], |_| 5.0).unwrap();
        let s = ScaledObjective::plain(constant).unwrap();
        assert_eq!(s.evaluate(&[0.3]).unwrap(), 5.0);
        assert_eq!(s.evaluations(), 1);

        let kv = FnObjective::new(vec![0.0], vec![0.01], |_| 780.0).unwrap();
        let s = ScaledObjective::new(kv, 800.0, Sense::Minimize).unwrap();
        assert_eq!(s.evaluate(&[0.5]).unwrap(), 0.975);
        let kv = FnObjective::new(vec![0.0], vec![0.01], |_| 780.0).unwrap();
        let s = ScaledObjective::new(kv, 800.0, Sense::Maximize).unwrap();
        assert_eq!(s.evaluate(&[0.5]).unwrap(), -0.975);
        assert_eq!(s.unscale_output(-0.975), 780.0);
    }

    #[test]
    fn inputs_are_mapped_to_natural_units() {
        let id = FnObjective::new(vec![2.0, -1.0], vec![4.0, 1.0], |x| 10.0 * x[0] + x[1]).unwrap();
        let s = ScaledObjective::plain(id).unwrap();
        assert_eq!(s.to_natural(&[0.5, 0.25]), vec![3.0, -0.5]);
        assert_eq!(s.evaluate(&[0.5, 0.25]).unwrap(), 29.5);
        assert!(s.evaluate(&[1.5, 0.0]).is_err());
        assert_eq!(s.evaluations(), 1);
    }

    #[test]
    fn budget_is_a_hard_cap() {
        let f = FnObjective::new(vec![0.0], vec![1.0], |x| x[0]).unwrap();
        let s = ScaledObjective::plain(f).unwrap().with_budget(2);
        s.evaluate(&[0.1]).unwrap();
        s.evaluate(&[0.2]).unwrap();
        assert!(matches!(s.evaluate(&[0.3]), Err(Error::BudgetExhausted { budget: 2 })));
        assert_eq!(s.evaluations(), 2);
        assert_eq!(s.remaining(), Some(0));
    }

    #[test]
    fn grid_through_unit_box() {
        let g = synthetic_risk_surface();
        let s = ScaledObjective::plain(&g).unwrap();
        let u = [7.0 / 8.0, 7.0 / 19.0];
        assert!((s.evaluate(&u).unwrap() - SYNTHETIC_RISK_MIN).abs() < 1e-15);
    }

    #[test]
    fn energization_dimensions() {
        let one = EnergizationObjective::new(CircuitParams::default(), EnergizationInputs::SwitchingTime);
        assert_eq!(one.dim(), 1);
        assert_eq!(one.bounds().1, vec![T_SWITCH_MAX]);
        let three = EnergizationObjective::new(CircuitParams::default(), EnergizationInputs::SwitchingAndRemanence);
        assert_eq!(three.dim(), 3);
        let inputs = three.stochastic_inputs(&[0.001, 0.5, 1.0]).unwrap();
        assert_eq!(inputs.remanent_flux, 0.5);
        assert!(three.stochastic_inputs(&[0.001]).is_err());
    }
}
