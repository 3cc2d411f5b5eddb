//! Desk-scale electromagnetic-transient solver for transformer energization.
//!
//! Single-phase equivalent circuit: an ideal sinusoidal source feeds a
//! breaker, a series R–L branch and a shunt capacitor; the transformer
//! terminal sits on the capacitor node and is represented by a saturable
//! magnetizing inductance in parallel with a core-loss resistance.
//!
//! Integration is fixed-step trapezoidal. Every linear branch is replaced by
//! its companion model (conductance plus history current), which leaves one
//! scalar nonlinear nodal equation per step for the magnetizing branch. That
//! equation is strictly increasing in the node voltage and is solved by a
//! bracketed Newton–Raphson iteration.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 10e-6;
pub const DEFAULT_DURATION: f64 = 1.0;
pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Odd-symmetric piecewise-linear flux–current characteristic.
///
/// Stored as the breakpoints of the positive half, starting at the origin;
/// beyond the last breakpoint the final slope is extended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct MagnetizingCurve {
    /// `(flux [Wb-turn], current [A])`, strictly increasing in both.
    points: Vec<(f64, f64)>,
}

impl MagnetizingCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 || points[0] != (0.0, 0.0) {
            return Err(Error::InvalidConfig(
                "magnetizing curve needs the origin and at least one more breakpoint".into(),
            ));
        }
        let monotone = points
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1 && w[1].0.is_finite() && w[1].1.is_finite());
        if !monotone {
            return Err(Error::InvalidConfig("magnetizing curve must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// A single linear inductance.
    pub fn linear(inductance: f64) -> Self {
        Self {
            points: vec![(0.0, 0.0), (1.0, 1.0 / inductance)],
        }
    }

    /// Unsaturated inductance up to `knee_flux`, then the saturated slope.
    pub fn two_slope(knee_flux: f64, unsaturated: f64, saturated: f64) -> Result<Self> {
        let knee_current = knee_flux / unsaturated;
        Self::new(vec![
            (0.0, 0.0),
            (knee_flux, knee_current),
            (2.0 * knee_flux, knee_current + knee_flux / saturated),
        ])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Segment index and its slope `di/dλ` for `|flux|`.
    fn segment(&self, flux_abs: f64) -> usize {
        let last = self.points.len() - 2;
        (0..=last).find(|&k| flux_abs <= self.points[k + 1].0).unwrap_or(last)
    }

    fn slope_of(&self, k: usize) -> f64 {
        let (a, b) = (self.points[k], self.points[k + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }

    pub fn current(&self, flux: f64) -> f64 {
        let x = flux.abs();
        let k = self.segment(x);
        let (f0, i0) = self.points[k];
        (i0 + self.slope_of(k) * (x - f0)).copysign(flux)
    }

    /// Incremental slope `di/dλ` at `flux`.
    pub fn slope(&self, flux: f64) -> f64 {
        self.slope_of(self.segment(flux.abs()))
    }

    /// Stored magnetic energy `∫₀^λ i dλ`.
    pub fn energy(&self, flux: f64) -> f64 {
        let x = flux.abs();
        let mut e = 0.0;
        for k in 0..self.points.len() - 1 {
            let (f0, i0) = self.points[k];
            let is_last = k == self.points.len() - 2;
            let f1 = if is_last { x.max(f0) } else { self.points[k + 1].0.min(x) };
            if f1 <= f0 {
                break;
            }
            let i1 = i0 + self.slope_of(k) * (f1 - f0);
            e += 0.5 * (i0 + i1) * (f1 - f0);
        }
        e
    }
}

impl TryFrom<Vec<(f64, f64)>> for MagnetizingCurve {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<MagnetizingCurve> for Vec<(f64, f64)> {
    fn from(c: MagnetizingCurve) -> Self {
        c.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerParams {
    /// Peak flux at rated voltage, Wb-turn.
    pub rated_flux: f64,
    pub magnetizing: MagnetizingCurve,
    pub core_loss_resistance: f64,
}

impl TransformerParams {
    /// Per-unit style construction around a rated peak phase voltage.
    ///
    /// `magnetizing_current_pu` is the magnetizing current at rated voltage,
    /// `saturated_pu` the air-core reactance, both on `rating_va`.
    pub fn from_ratings(
        rated_peak_voltage: f64,
        frequency: f64,
        rating_va: f64,
        magnetizing_current_pu: f64,
        knee_flux_pu: f64,
        saturated_pu: f64,
        core_loss_pu: f64,
    ) -> Result<Self> {
        let omega = 2.0 * PI * frequency;
        let rated_flux = rated_peak_voltage / omega;
        let v_rms = rated_peak_voltage / SQRT_2;
        let z_base = v_rms * v_rms / rating_va;
        let unsaturated = z_base / (magnetizing_current_pu * omega);
        let saturated = saturated_pu * z_base / omega;
        Ok(Self {
            rated_flux,
            magnetizing: MagnetizingCurve::two_slope(knee_flux_pu * rated_flux, unsaturated, saturated)?,
            core_loss_resistance: core_loss_pu * z_base,
        })
    }
}

/// Source and network data of the energization circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
    /// Peak source voltage, V.
    pub source_amplitude: f64,
    pub source_frequency: f64,
    pub transformer: TransformerParams,
}

/// 400 kV line-to-line, as a peak phase voltage.
pub const SOURCE_PEAK_VOLTAGE: f64 = 400e3 * SQRT_2 / 1.732_050_807_568_877_2;

impl Default for CircuitParams {
    fn default() -> Self {
        let transformer = TransformerParams::from_ratings(SOURCE_PEAK_VOLTAGE, 50.0, 100e6, 0.003, 1.15, 0.15, 5000.0)
            .expect("default transformer data is valid");
        Self {
            resistance: 1.32,
            inductance: 50e-3,
            capacitance: 50.6e-6,
            source_amplitude: SOURCE_PEAK_VOLTAGE,
            source_frequency: 50.0,
            transformer,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("resistance", self.resistance),
            ("inductance", self.inductance),
            ("capacitance", self.capacitance),
            ("source_frequency", self.source_frequency),
            ("rated_flux", self.transformer.rated_flux),
            ("core_loss_resistance", self.transformer.core_loss_resistance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.source_amplitude.is_finite() && self.source_amplitude >= 0.0) {
            return Err(Error::InvalidConfig("source amplitude must be non-negative".into()));
        }
        Ok(())
    }

    /// Undamped series resonance `1/(2π√(LC))`.
    pub fn resonance_frequency(&self) -> f64 {
        1.0 / (2.0 * PI * (self.inductance * self.capacitance).sqrt())
    }
}

/// Switching instant and remanence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticInputs {
    /// Breaker closing time, s, in `[0, 10 ms]`.
    pub t_switch: f64,
    /// Remanent flux amplitude, per unit of rated flux, in `[0, 0.8]`.
    pub remanent_flux: f64,
    /// Remanence angle, rad, in `[0, 2π]`.
    pub remanence_angle: f64,
}

pub const T_SWITCH_MAX: f64 = 0.010;
pub const REMANENT_FLUX_MAX: f64 = 0.8;

impl StochasticInputs {
    pub fn switching_only(t_switch: f64) -> Self {
        Self {
            t_switch,
            remanent_flux: 0.0,
            remanence_angle: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eps = 1e-12;
        if !(-eps..=T_SWITCH_MAX + eps).contains(&self.t_switch) {
            return Err(Error::InvalidConfig(format!("t_switch {} outside [0, 10 ms]", self.t_switch)));
        }
        if !(-eps..=REMANENT_FLUX_MAX + eps).contains(&self.remanent_flux) {
            return Err(Error::InvalidConfig(format!(
                "remanent flux {} outside [0, 0.8]",
                self.remanent_flux
            )));
        }
        if !(-eps..=2.0 * PI + eps).contains(&self.remanence_angle) {
            return Err(Error::InvalidConfig(format!(
                "remanence angle {} outside [0, 2π]",
                self.remanence_angle
            )));
        }
        Ok(())
    }

    /// Initial magnetizing flux folded onto one phase.
    pub fn initial_flux(&self, rated_flux: f64) -> f64 {
        self.remanent_flux * rated_flux * self.remanence_angle.cos()
    }
}

/// Transformer-terminal voltage samples at `k·dt`, `k = 0..=floor(duration/dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub dt: f64,
    pub duration: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 * self.dt)
    }

    /// Two-column CSV `time_s,voltage_V`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "voltage_V"])?;
        for (t, v) in self.times().zip(&self.samples) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

pub fn sample_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub steps: usize,
    pub max_newton_iterations: usize,
    pub total_newton_iterations: usize,
}

/// Branch states carried between steps.
#[derive(Debug, Clone, Copy, Default)]
struct State {
    /// Series R–L current toward the capacitor node.
    i_series: f64,
    v_node: f64,
    i_cap: f64,
    flux: f64,
}

/// What drives the network during a run.
struct Drive<'a> {
    source: &'a dyn Fn(f64) -> f64,
    injection: &'a dyn Fn(f64) -> f64,
    transformer: bool,
}

struct Stepper<'a> {
    p: &'a CircuitParams,
    h: f64,
    g_series: f64,
    r_series_hist: f64,
    g_cap: f64,
    g_loss: f64,
}

impl<'a> Stepper<'a> {
    fn new(p: &'a CircuitParams, h: f64, transformer: bool) -> Self {
        let two_l_over_h = 2.0 * p.inductance / h;
        Self {
            p,
            h,
            g_series: 1.0 / (two_l_over_h + p.resistance),
            r_series_hist: two_l_over_h - p.resistance,
            g_cap: 2.0 * p.capacitance / h,
            g_loss: if transformer {
                1.0 / p.transformer.core_loss_resistance
            } else {
                0.0
            },
        }
    }

    /// Advances one step from `t` to `t + h`.
    fn step(&self, s: &State, t: f64, drive: &Drive<'_>, step_index: usize) -> Result<(State, usize)> {
        let h = self.h;
        let curve = &self.p.transformer.magnetizing;
        let vs0 = (drive.source)(t);
        let vs1 = (drive.source)(t + h);
        // Series R–L companion: i' = G·(vs' − v') + hist.
        let hist_series = self.g_series * ((vs0 - s.v_node) + self.r_series_hist * s.i_series);
        // Capacitor companion: i' = Gc·v' + hist.
        let hist_cap = -self.g_cap * s.v_node - s.i_cap;
        let inj = (drive.injection)(t + h);
        let a = self.g_series + self.g_cap + self.g_loss;
        let b = self.g_series * vs1 + hist_series + inj - hist_cap;

        let (v, iterations) = if drive.transformer {
            let flux_hist = s.flux + 0.5 * h * s.v_node;
            let residual = |v: f64| a * v + curve.current(flux_hist + 0.5 * h * v) - b;
            let derivative = |v: f64| a + 0.5 * h * curve.slope(flux_hist + 0.5 * h * v);
            solve_monotone(residual, derivative, s.v_node).ok_or(Error::NonConvergence {
                step: step_index,
                iterations: MAX_NEWTON_ITERATIONS,
            })?
        } else {
            (b / a, 0)
        };

        let i_series = self.g_series * (vs1 - v) + hist_series;
        let i_cap = self.g_cap * v + hist_cap;
        let flux = if drive.transformer {
            s.flux + 0.5 * h * (s.v_node + v)
        } else {
            s.flux
        };
        Ok((
            State {
                i_series,
                v_node: v,
                i_cap,
                flux,
            },
            iterations,
        ))
    }

    fn energy(&self, s: &State, transformer: bool) -> f64 {
        let core = if transformer {
            self.p.transformer.magnetizing.energy(s.flux)
        } else {
            0.0
        };
        0.5 * self.p.inductance * s.i_series * s.i_series + 0.5 * self.p.capacitance * s.v_node * s.v_node + core
    }
}

/// Newton–Raphson on a strictly increasing residual. Once a sign change is
/// bracketed, iterates that leave the bracket are replaced by the
/// false-position point, which resolves the two-segment cycling Newton can
/// fall into around a kink of the piecewise-linear characteristic.
fn solve_monotone(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64) -> Option<(f64, usize)> {
    let mut x = x0;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut f_lo, mut f_hi) = (f64::NAN, f64::NAN);
    let mut last_side = 0i8;
    for it in 1..=MAX_NEWTON_ITERATIONS {
        let fx = f(x);
        if fx == 0.0 {
            return Some((x, it));
        }
        let side = if fx > 0.0 { 1 } else { -1 };
        if side > 0 {
            hi = x;
            f_hi = fx;
        } else {
            lo = x;
            f_lo = fx;
        }
        let mut next = x - fx / df(x);
        if lo.is_finite() && hi.is_finite() && !(next > lo && next < hi) {
            // Illinois-weighted false position keeps both ends moving.
            let (mut a, mut b) = (f_lo, f_hi);
            if side == last_side {
                if side > 0 {
                    a *= 0.5;
                } else {
                    b *= 0.5;
                }
            }
            next = lo - a * (hi - lo) / (b - a);
            if !(next > lo && next < hi) {
                // One end already has a residual negligible against the other.
                let root = if f_lo.abs() < f_hi.abs() { lo } else { hi };
                return Some((root, it));
            }
        }
        last_side = side;
        if (next - x).abs() <= 1e-12 * (1.0 + x.abs()) {
            return Some((next, it));
        }
        x = next;
    }
    None
}

fn run(
    p: &CircuitParams,
    dt: f64,
    duration: f64,
    first_active_step: usize,
    initial: State,
    drive: &Drive<'_>,
    mut observe: impl FnMut(&State, &Stepper<'_>),
) -> Result<(Waveform, SolverStats)> {
    p.validate()?;
    if !(dt > 0.0 && dt.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidConfig(format!("bad time grid: dt = {dt}, duration = {duration}")));
    }
    let n = sample_count(duration, dt);
    let stepper = Stepper::new(p, dt, drive.transformer);
    let mut samples = vec![0.0; n];
    let mut state = initial;
    let mut stats = SolverStats::default();
    observe(&state, &stepper);
    for k in first_active_step..n.saturating_sub(1) {
        let (next, its) = stepper.step(&state, k as f64 * dt, drive, k)?;
        if !next.v_node.is_finite() {
            return Err(Error::NonConvergence {
                step: k,
                iterations: its,
            });
        }
        state = next;
        samples[k + 1] = state.v_node;
        stats.steps += 1;
        stats.max_newton_iterations = stats.max_newton_iterations.max(its);
        stats.total_newton_iterations += its;
        observe(&state, &stepper);
    }
    Ok((Waveform { dt, duration, samples }, stats))
}

fn energization_setup(p: &CircuitParams, inputs: &StochasticInputs, dt: f64) -> Result<(usize, State)> {
    inputs.validate()?;
    let switch_step = (inputs.t_switch / dt).round() as usize;
    let initial = State {
        flux: inputs.initial_flux(p.transformer.rated_flux),
        ..State::default()
    };
    Ok((switch_step, initial))
}

/// Energizes the transformer at `t_switch` (rounded to the step grid) and
/// returns the terminal voltage.
pub fn simulate(p: &CircuitParams, inputs: &StochasticInputs, dt: f64, duration: f64) -> Result<Waveform> {
    simulate_with_stats(p, inputs, dt, duration).map(|(w, _)| w)
}

pub fn simulate_with_stats(
    p: &CircuitParams,
    inputs: &StochasticInputs,
    dt: f64,
    duration: f64,
) -> Result<(Waveform, SolverStats)> {
    let (switch_step, initial) = energization_setup(p, inputs, dt)?;
    let omega = 2.0 * PI * p.source_frequency;
    let amp = p.source_amplitude;
    let source = move |t: f64| amp * (omega * t).sin();
    let drive = Drive {
        source: &source,
        injection: &|_| 0.0,
        transformer: true,
    };
    run(p, dt, duration, switch_step, initial, &drive, |_, _| {})
}

/// Stored energy (series inductor, capacitor, core) after every step when
/// the circuit is energized with the source switched off.
pub fn free_response_energy(p: &CircuitParams, inputs: &StochasticInputs, dt: f64, duration: f64) -> Result<Vec<f64>> {
    let (switch_step, initial) = energization_setup(p, inputs, dt)?;
    let drive = Drive {
        source: &|_| 0.0,
        injection: &|_| 0.0,
        transformer: true,
    };
    let mut energy = Vec::new();
    run(p, dt, duration, switch_step, initial, &drive, |s, st| energy.push(st.energy(s, true)))?;
    Ok(energy)
}

/// Largest `|v(t)|` in kV.
pub fn max_overvoltage(w: &Waveform) -> Result<f64> {
    if w.samples.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    Ok(w.samples.iter().fold(0.0f64, |m, v| m.max(v.abs())) / 1e3)
}

/// Driving-point impedance magnitude at the capacitor node with the source
/// shorted and the transformer disconnected: `(R + jωL) ∥ 1/(jωC)`.
pub fn input_impedance(p: &CircuitParams, f: f64) -> f64 {
    let w = 2.0 * PI * f;
    let (r, x_l) = (p.resistance, w * p.inductance);
    let b_c = w * p.capacitance;
    // Z = (r + j x_l) / (1 + j b_c (r + j x_l)) = (r + j x_l) / ((1 − b_c x_l) + j b_c r)
    let num = (r * r + x_l * x_l).sqrt();
    let den = ((1.0 - b_c * x_l).powi(2) + (b_c * r).powi(2)).sqrt();
    num / den
}

/// Frequency of the largest analytic `|Z|` in `[fmin, fmax]` by a fine scan
/// refined with golden-section search.
pub fn impedance_peak(p: &CircuitParams, fmin: f64, fmax: f64) -> (f64, f64) {
    let n = 2000;
    let grid: Vec<f64> = (0..=n).map(|i| fmin + (fmax - fmin) * i as f64 / n as f64).collect();
    let k = (0..=n)
        .max_by(|&a, &b| input_impedance(p, grid[a]).total_cmp(&input_impedance(p, grid[b])))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
    let g = 0.618_033_988_749_894_8;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if input_impedance(p, c) > input_impedance(p, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let f = 0.5 * (a + b);
    (f, input_impedance(p, f))
}

/// Small-signal impedance at `f` measured by simulation: a unit sinusoidal
/// current is injected at the capacitor node with the source shorted and
/// the transformer disconnected, and the steady-state voltage amplitude is
/// extracted by Fourier projection over whole periods.
pub fn simulated_impedance(p: &CircuitParams, f: f64, dt: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::InvalidConfig(format!("frequency must be positive, got {f}")));
    }
    let omega = 2.0 * PI * f;
    // Transients decay with time constant 2L/R; wait fifteen of them.
    let settle = 15.0 * 2.0 * p.inductance / p.resistance;
    let period = 1.0 / f;
    let window_periods = (0.2 / period).ceil().max(4.0);
    let window = window_periods * period;
    let duration = settle + window;
    let injection = move |t: f64| (omega * t).sin();
    let drive = Drive {
        source: &|_| 0.0,
        injection: &injection,
        transformer: false,
    };
    let (w, _) = run(p, dt, duration, 0, State::default(), &drive, |_, _| {})?;
    let n = w.samples.len();
    let window_samples = (window / dt).round() as usize;
    let start = n - window_samples;
    let (mut re, mut im) = (0.0, 0.0);
    for k in start..n - 1 {
        let t = k as f64 * dt;
        re += w.samples[k] * (omega * t).cos();
        im += w.samples[k] * (omega * t).sin();
    }
    let count = (n - 1 - start) as f64;
    Ok(2.0 * (re * re + im * im).sqrt() / count)
}
