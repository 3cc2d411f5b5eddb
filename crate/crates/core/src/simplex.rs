//! Bounded Nelder–Mead simplex minimizer shared by the baseline optimizer
//! and the local refinement of acquisition maxima.

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Offset of each non-base vertex along its axis.
    pub initial_step: Vec<f64>,
    pub max_evals: usize,
    /// Stop once every vertex lies within this (∞-norm) distance of the best.
    pub diameter_tol: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each evaluation.
    pub trace: Vec<f64>,
    /// Set when the objective asked to stop.
    pub aborted: bool,
}

struct Counter<'a, F> {
    f: F,
    evals: usize,
    max: usize,
    best: f64,
    best_x: Vec<f64>,
    trace: &'a mut Vec<f64>,
    aborted: bool,
}

impl<F: FnMut(&[f64]) -> Option<f64>> Counter<'_, F> {
    fn call(&mut self, x: &[f64]) -> Option<f64> {
        if self.evals >= self.max || self.aborted {
            return None;
        }
        let Some(v) = (self.f)(x) else {
            self.aborted = true;
            return None;
        };
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.evals += 1;
        if v < self.best || self.best_x.is_empty() {
            self.best = v;
            self.best_x = x.to_vec();
        }
        self.trace.push(self.best);
        Some(v)
    }
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimizes `f` from `x0`. `f` returning `None` aborts the search.
pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut trace = Vec::new();
    let mut c = Counter {
        f,
        evals: 0,
        max: opts.max_evals,
        best: f64::INFINITY,
        best_x: Vec::new(),
        trace: &mut trace,
        aborted: false,
    };
    let converged = run(&mut c, x0, n, opts);
    let Counter {
        evals,
        best,
        best_x,
        aborted,
        ..
    } = c;
    SimplexOutcome {
        best_x: if best_x.is_empty() { x0.to_vec() } else { best_x },
        best_f: best,
        evaluations: evals,
        converged,
        trace,
        aborted,
    }
}

fn run<F: FnMut(&[f64]) -> Option<f64>>(c: &mut Counter<'_, F>, x0: &[f64], n: usize, opts: &SimplexOptions) -> bool {
    let (lo, hi) = (&opts.lower, &opts.upper);
    let mut base = x0.to_vec();
    clamp_into(&mut base, lo, hi);
    let mut verts: Vec<Vec<f64>> = vec![base.clone()];
    for i in 0..n {
        let mut v = base.clone();
        v[i] += opts.initial_step[i];
        if v[i] > hi[i] {
            v[i] = base[i] - opts.initial_step[i];
        }
        clamp_into(&mut v, lo, hi);
        verts.push(v);
    }
    let mut fs = Vec::with_capacity(n + 1);
    for v in &verts {
        match c.call(v) {
            Some(f) => fs.push(f),
            None => return false,
        }
    }

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        verts = order.iter().map(|&i| verts[i].clone()).collect();
        fs = order.iter().map(|&i| fs[i]).collect();

        let diameter = verts[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            return true;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| verts[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&verts[n]).map(|(c, w)| c + t * (c - w)).collect();
            clamp_into(&mut p, lo, hi);
            p
        };

        let xr = along(REFLECT);
        let Some(fr) = c.call(&xr) else { return false };
        if fr < fs[0] {
            let xe = along(REFLECT * EXPAND);
            let Some(fe) = c.call(&xe) else { return false };
            if fe < fr {
                verts[n] = xe;
                fs[n] = fe;
            } else {
                verts[n] = xr;
                fs[n] = fr;
            }
            continue;
        }
        if fr < fs[n - 1] {
            verts[n] = xr;
            fs[n] = fr;
            continue;
        }
        let (xc, outside) = if fr < fs[n] {
            (along(REFLECT * CONTRACT), true)
        } else {
            (along(-CONTRACT), false)
        };
        let Some(fc) = c.call(&xc) else { return false };
        if (outside && fc <= fr) || (!outside && fc < fs[n]) {
            verts[n] = xc;
            fs[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = verts[i].iter().zip(&verts[0]).map(|(v, b)| b + SHRINK * (v - b)).collect();
            let Some(f) = c.call(&shrunk) else { return false };
            verts[i] = shrunk;
            fs[i] = f;
        }
    }
}
