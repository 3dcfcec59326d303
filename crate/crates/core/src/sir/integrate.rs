//! Adaptive Dormand–Prince 5(4) integration of the controlled SIR model.
//!
//! Each accepted step contributes four samples: dense output at a quarter,
//! half and three quarters of the step, and the step end. Trajectories
//! therefore carry an even number of sub-intervals per smooth run, which is
//! what the Simpson quadrature in [`crate::sir::cost`] expects, and the
//! quadrature error stays well below the integration tolerance.
//!
//! Control discontinuities (piecewise-constant signals, policy phase
//! switches) are represented by two consecutive samples at the same time, the
//! first carrying the left limit of the lockdown and the second the right
//! limit. Within a run, times are strictly increasing.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dynamics::rhs;
use super::params::{EpidemicParams, State, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::numerics::{minimize_scalar_with_scan, solve_scalar_root, Bracket};

/// Samples recorded per accepted step.
const SAMPLES_PER_STEP: usize = 4;

/// Default relative tolerance of the integrator.
pub const DEFAULT_RTOL: f64 = 1e-9;

/// A lockdown schedule or feedback law.
///
/// Returned values are clamped to `[0, l_max]` by the integrator.
pub trait ControlSignal {
    fn lockdown(&self, t: f64, state: &State) -> f64;

    /// First time strictly after `t` at which the signal may jump, if any.
    fn next_switch(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl<F> ControlSignal for F
where
    F: Fn(f64, &State) -> f64,
{
    fn lockdown(&self, t: f64, state: &State) -> f64 {
        self(t, state)
    }
}

/// `L = 0` everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLockdown;

impl ControlSignal for NoLockdown {
    fn lockdown(&self, _t: f64, _state: &State) -> f64 {
        0.0
    }
}

/// A constant lockdown level.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLockdown(pub f64);

impl ControlSignal for ConstantLockdown {
    fn lockdown(&self, _t: f64, _state: &State) -> f64 {
        self.0
    }
}

/// Lockdown held constant on `values.len()` uniform intervals starting at
/// `t_start`. Outside the grid the lockdown is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub t_start: f64,
    pub interval: f64,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(t_start: f64, t_end: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(t_end > t_start) {
            return Err(Error::InvalidInput("piecewise control needs values and t_end > t_start".into()));
        }
        let interval = (t_end - t_start) / values.len() as f64;
        Ok(Self { t_start, interval, values })
    }

    pub fn t_end(&self) -> f64 {
        self.boundary(self.values.len())
    }

    /// Start time of interval `k` (the end of the grid for `k = len`).
    pub fn boundary(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.interval
    }

    fn index(&self, t: f64) -> Option<usize> {
        if t < self.t_start {
            return None;
        }
        let k = ((t - self.t_start) / self.interval).floor() as usize;
        (k < self.values.len()).then_some(k)
    }
}

impl ControlSignal for PiecewiseConstant {
    fn lockdown(&self, t: f64, _state: &State) -> f64 {
        self.index(t).map_or(0.0, |k| self.values[k])
    }

    fn next_switch(&self, t: f64) -> Option<f64> {
        let n = self.values.len();
        if t < self.t_start {
            return Some(self.t_start);
        }
        let k = ((t - self.t_start) / self.interval).floor() as usize + 1;
        (k..=n).map(|j| self.boundary(j)).find(|&b| b > t + time_slack(t))
    }
}

/// One recorded point of a controlled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: State,
    pub lockdown: f64,
}

/// Time-ordered samples of a controlled SIR path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    params: EpidemicParams,
    samples: Vec<Sample>,
}

impl Trajectory {
    /// Builds a trajectory after checking ordering and state invariants.
    pub fn from_samples(params: EpidemicParams, samples: Vec<Sample>) -> Result<Self> {
        let traj = Self { params, samples };
        traj.check_ordering()?;
        for smp in &traj.samples {
            smp.state.validate()?;
        }
        Ok(traj)
    }

    pub(crate) fn from_raw(params: EpidemicParams, samples: Vec<Sample>) -> Self {
        debug_assert!(!samples.is_empty());
        Self { params, samples }
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.params
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn final_state(&self) -> State {
        self.last().state
    }

    pub fn start_time(&self) -> f64 {
        self.first().state.t
    }

    pub fn end_time(&self) -> f64 {
        self.last().state.t
    }

    /// Index ranges of maximal runs with strictly increasing time.
    pub fn runs(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..self.samples.len() {
            if self.samples[k].state.t <= self.samples[k - 1].state.t {
                out.push(start..k);
                start = k;
            }
        }
        out.push(start..self.samples.len());
        out
    }

    /// Largest infected fraction. Between samples where `di/dt` changes
    /// sign, the maximum of the cubic Hermite interpolant is used.
    pub fn peak_infected(&self) -> f64 {
        let mut best = self.samples.iter().map(|s| s.state.i).fold(f64::NEG_INFINITY, f64::max);
        let slope = |smp: &Sample| {
            let u = self.params.transmission_factor(smp.lockdown);
            rhs(smp.state.to_vec(), u, &self.params)[1]
        };
        for run in self.runs() {
            for w in self.samples[run].windows(2) {
                let (d0, d1) = (slope(&w[0]), slope(&w[1]));
                if d0 > 0.0 && d1 <= 0.0 {
                    let (t0, t1) = (w[0].state.t, w[1].state.t);
                    let h = t1 - t0;
                    let (y0, y1) = (w[0].state.i, w[1].state.i);
                    let hermite = |x: f64| {
                        let x2 = x * x;
                        let x3 = x2 * x;
                        (2.0 * x3 - 3.0 * x2 + 1.0) * y0
                            + (x3 - 2.0 * x2 + x) * h * d0
                            + (-2.0 * x3 + 3.0 * x2) * y1
                            + (x3 - x2) * h * d1
                    };
                    let m = minimize_scalar_with_scan(|x| -hermite(x), Bracket { lo: 0.0, hi: 1.0 }, 8, 1e-10);
                    best = best.max(-m.f);
                }
            }
        }
        best
    }

    pub fn min_susceptible(&self) -> f64 {
        self.samples.iter().map(|s| s.state.s).fold(f64::INFINITY, f64::min)
    }

    pub fn max_lockdown(&self) -> f64 {
        self.samples.iter().map(|s| s.lockdown).fold(0.0, f64::max)
    }

    /// Appends `other`, which must start where `self` ends. The junction
    /// becomes a run break.
    pub fn concat(&self, other: &Trajectory) -> Result<Trajectory> {
        let end = self.final_state();
        let start = other.first().state;
        if end.t != start.t || (end.s - start.s).abs() > 1e-12 || (end.i - start.i).abs() > 1e-12 {
            return Err(Error::InvalidInput("trajectories do not join".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Self { params: self.params, samples })
    }

    /// Interpolated lockdown at `t` (right limit at a discontinuity).
    pub fn lockdown_at(&self, t: f64) -> f64 {
        let smp = &self.samples;
        if t <= smp[0].state.t {
            return smp[0].lockdown;
        }
        // first index with time > t
        let k = smp.partition_point(|s| s.state.t <= t);
        if k == smp.len() {
            return smp[k - 1].lockdown;
        }
        let (a, b) = (&smp[k - 1], &smp[k]);
        let w = (t - a.state.t) / (b.state.t - a.state.t);
        a.lockdown + w * (b.lockdown - a.lockdown)
    }

    /// Verifies mass conservation, monotonicity of `s` and `r`, positivity of
    /// `i` and time ordering.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_ordering()?;
        for (k, smp) in self.samples.iter().enumerate() {
            let st = smp.state;
            if st.mass_defect().abs() > MASS_TOLERANCE || st.i < 0.0 || st.s < 0.0 {
                return Err(Error::InvalidInput(format!("sample {k} violates state invariants: {st:?}")));
            }
        }
        for w in self.samples.windows(2) {
            if w[1].state.s > w[0].state.s || w[1].state.r < w[0].state.r {
                return Err(Error::InvalidInput(format!(
                    "non-monotone s or r between t = {} and t = {}",
                    w[0].state.t, w[1].state.t
                )));
            }
        }
        Ok(())
    }

    fn check_ordering(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidInput("empty trajectory".into()));
        }
        // Repeated times are allowed only as isolated pairs marking a jump.
        for k in 1..self.samples.len() {
            let (t0, t1) = (self.samples[k - 1].state.t, self.samples[k].state.t);
            if t1 < t0 || (t1 == t0 && k >= 2 && self.samples[k - 2].state.t == t0) {
                return Err(Error::InvalidInput(format!("sample times out of order at index {k}")));
            }
        }
        Ok(())
    }
}

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    /// Largest step in days.
    pub h_max: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: DEFAULT_RTOL, h_max: 2.0 }
    }
}

impl IntegratorOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self { rtol, ..Self::default() }
    }
}

/// Integrates the controlled dynamics from `init` to `t_end` with relative
/// tolerance `tol`.
pub fn integrate<C: ControlSignal + ?Sized>(
    p: &EpidemicParams,
    control: &C,
    init: State,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_with(p, control, init, t_end, IntegratorOptions::with_rtol(tol))
}

pub fn integrate_with<C: ControlSignal + ?Sized>(
    p: &EpidemicParams,
    control: &C,
    init: State,
    t_end: f64,
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    p.validate()?;
    init.validate()?;
    if !(t_end > init.t) {
        return Err(Error::InvalidInput(format!("t_end = {t_end} must exceed the initial time {}", init.t)));
    }
    if !(opts.rtol > 0.0 && opts.h_max > 0.0) {
        return Err(Error::InvalidInput("integrator tolerances must be positive".into()));
    }
    let engine = Engine::new(p, opts);
    let mut samples = Vec::new();
    let mut state = init;
    while state.t < t_end {
        let seg_end = control.next_switch(state.t).map_or(t_end, |s| s.min(t_end));
        let (lo, hi) = (state.t, seg_end);
        let law = |t: f64, y: &[f64; 3]| {
            let tq = clamp_into_segment(t, lo, hi);
            control.lockdown(tq, &State::from_vec(*y, tq))
        };
        state = engine.run_segment(&law, state, seg_end, None, &mut samples)?.state;
    }
    Ok(Trajectory::from_raw(*p, samples))
}

fn time_slack(t: f64) -> f64 {
    1e-10 * (1.0 + t.abs())
}

/// Evaluation time for a control inside `[lo, hi)`: keeps stage times at the
/// segment ends from picking up the neighbouring interval's value.
fn clamp_into_segment(t: f64, lo: f64, hi: f64) -> f64 {
    let d = time_slack(hi).min(0.25 * (hi - lo));
    t.clamp(lo + d, hi - d)
}

/// Event function on `(s, i, r)`; a segment stops where it reaches zero.
pub(crate) type EventFn<'a> = &'a dyn Fn(&[f64; 3]) -> f64;

pub(crate) struct SegmentEnd {
    pub state: State,
    pub event: bool,
}

/// Fixed-configuration Dormand–Prince stepper.
pub(crate) struct Engine<'a> {
    p: &'a EpidemicParams,
    opts: IntegratorOptions,
}

struct Step {
    y: [f64; 3],
    err: [f64; 3],
    dense: [[f64; 3]; 5],
}

impl<'a> Engine<'a> {
    pub(crate) fn new(p: &'a EpidemicParams, opts: IntegratorOptions) -> Self {
        Self { p, opts }
    }

    fn field(&self, law: &dyn Fn(f64, &[f64; 3]) -> f64, t: f64, y: &[f64; 3]) -> [f64; 3] {
        let l = self.p.clamp_lockdown(law(t, y));
        rhs(*y, self.p.transmission_factor(l), self.p)
    }

    fn step(&self, law: &dyn Fn(f64, &[f64; 3]) -> f64, t: f64, y: &[f64; 3], h: f64) -> Step {
        let f = |t: f64, y: &[f64; 3]| self.field(law, t, y);
        let comb = |ks: &[(&[f64; 3], f64)]| {
            let mut out = *y;
            for (k, a) in ks {
                for j in 0..3 {
                    out[j] += h * a * k[j];
                }
            }
            out
        };
        let k1 = f(t, y);
        let k2 = f(t + C2 * h, &comb(&[(&k1, A21)]));
        let k3 = f(t + C3 * h, &comb(&[(&k1, A31), (&k2, A32)]));
        let k4 = f(t + C4 * h, &comb(&[(&k1, A41), (&k2, A42), (&k3, A43)]));
        let k5 = f(t + C5 * h, &comb(&[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
        let k6 = f(t + h, &comb(&[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]));
        let y1 = comb(&[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)]);
        let k7 = f(t + h, &y1);
        let mut err = [0.0; 3];
        let mut dense = [[0.0; 3]; 5];
        for j in 0..3 {
            err[j] = h * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
            let ydiff = y1[j] - y[j];
            let bspl = h * k1[j] - ydiff;
            dense[0][j] = y[j];
            dense[1][j] = ydiff;
            dense[2][j] = bspl;
            dense[3][j] = -h * k7[j] + ydiff - bspl;
            dense[4][j] = h * (D1 * k1[j] + D3 * k3[j] + D4 * k4[j] + D5 * k5[j] + D6 * k6[j] + D7 * k7[j]);
        }
        Step { y: y1, err, dense }
    }

    fn error_norm(&self, y0: &[f64; 3], st: &Step) -> f64 {
        let atol = self.opts.rtol * 1e-6;
        let sum: f64 = (0..3)
            .map(|j| {
                let sk = atol + self.opts.rtol * y0[j].abs().max(st.y[j].abs());
                (st.err[j] / sk).powi(2)
            })
            .sum();
        (sum / 3.0).sqrt()
    }

    /// Integrates from `y0` to `t_end`, appending samples to `out`. With an
    /// event function `g`, integration stops at the first point where `g`
    /// changes from positive to non-positive; that point is located by a
    /// root solve on the one-step map, so it is an exact integrator output.
    pub(crate) fn run_segment(
        &self,
        law: &dyn Fn(f64, &[f64; 3]) -> f64,
        y0: State,
        t_end: f64,
        event: Option<EventFn<'_>>,
        out: &mut Vec<Sample>,
    ) -> Result<SegmentEnd> {
        let mut t = y0.t;
        let mut y = y0.to_vec();
        self.push(out, law, t, y);
        if let Some(g) = event {
            if g(&y) <= 0.0 {
                return Ok(SegmentEnd { state: y0, event: true });
            }
        }
        let span = t_end - t;
        let mut h = self.opts.h_max.min(0.01).min(span);
        let h_min = 1e-10 * (1.0 + t_end.abs());
        let mut steps = 0usize;
        while t < t_end {
            let remaining = t_end - t;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let st = self.step(law, t, &y, h);
            let err = self.error_norm(&y, &st);
            if err <= 1.0 {
                steps += 1;
                if steps > 50_000_000 {
                    return Err(Error::StepSizeUnderflow { t });
                }
                if let Some(g) = event {
                    if g(&tidy(&y, st.y)) <= 0.0 {
                        let phi = |tau: f64| {
                            if tau <= 0.0 {
                                g(&y)
                            } else {
                                g(&tidy(&y, self.step(law, t, &y, tau).y))
                            }
                        };
                        let tau = solve_scalar_root(phi, Bracket { lo: 0.0, hi: h }, 1e-15)?;
                        let st = self.step(law, t, &y, tau);
                        let y_end = tidy(&y, st.y);
                        self.push_step(out, law, t, tau, &y, &y_end, &st);
                        return Ok(SegmentEnd { state: State::from_vec(y_end, t + tau), event: true });
                    }
                }
                let y1 = tidy(&y, st.y);
                let t1 = if last { t_end } else { t + h };
                self.push_step(out, law, t, t1 - t, &y, &y1, &st);
                t = t1;
                y = y1;
            } else if h <= h_min {
                return Err(Error::StepSizeUnderflow { t });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if err > 1.0 { fac.min(1.0) } else { fac };
            h = (h * fac).clamp(h_min, self.opts.h_max);
        }
        Ok(SegmentEnd { state: State::from_vec(y, t), event: false })
    }

    /// Interior dense-output samples of a step, then its end point.
    #[allow(clippy::too_many_arguments)]
    fn push_step(
        &self,
        out: &mut Vec<Sample>,
        law: &dyn Fn(f64, &[f64; 3]) -> f64,
        t: f64,
        h: f64,
        y0: &[f64; 3],
        y1: &[f64; 3],
        st: &Step,
    ) {
        let mut prev = *y0;
        for q in 1..SAMPLES_PER_STEP {
            let theta = q as f64 / SAMPLES_PER_STEP as f64;
            let y = dense(theta, &prev, y1, st);
            self.push(out, law, t + theta * h, y);
            prev = y;
        }
        self.push(out, law, t + h, *y1);
    }

    fn push(&self, out: &mut Vec<Sample>, law: &dyn Fn(f64, &[f64; 3]) -> f64, t: f64, y: [f64; 3]) {
        let lockdown = self.p.clamp_lockdown(law(t, &y));
        let state = State::from_vec(y, t);
        if let Some(prev) = out.last() {
            if prev.state == state && prev.lockdown == lockdown {
                return;
            }
        }
        out.push(Sample { state, lockdown });
    }
}

/// Enforces `s` non-increasing, `r` non-decreasing and `i >= 0`; rescales if
/// rounding has moved the total mass.
fn tidy(prev: &[f64; 3], y: [f64; 3]) -> [f64; 3] {
    let mut s = y[0].clamp(0.0, prev[0]);
    let mut i = y[1].max(0.0);
    let mut r = y[2].max(prev[2]);
    let total = s + i + r;
    if (total - 1.0).abs() > 1e-12 {
        s /= total;
        i /= total;
        r /= total;
        s = s.min(prev[0]);
        r = r.max(prev[2]);
    }
    [s, i, r]
}

/// Dense output at fraction `theta` of the step, kept between the previous
/// sample and the step end so that `s` and `r` stay monotone.
fn dense(theta: f64, prev: &[f64; 3], y1: &[f64; 3], st: &Step) -> [f64; 3] {
    let theta1 = 1.0 - theta;
    let c = &st.dense;
    let mut m = [0.0; 3];
    for j in 0..3 {
        m[j] = c[0][j] + theta * (c[1][j] + theta1 * (c[2][j] + theta * (c[3][j] + theta1 * c[4][j])));
    }
    [m[0].clamp(y1[0], prev[0]), m[1].max(0.0), m[2].clamp(prev[2], y1[2])]
}

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sir::params::reference;

    #[test]
    fn zero_infected_gives_constant_path() {
        let p = reference::epidemic();
        let init = State::initial(0.98, 0.0, 0.02).unwrap();
        let traj = integrate(&p, &ConstantLockdown(0.3), init, 100.0, 1e-9).unwrap();
        assert_eq!(traj.end_time(), 100.0);
        for smp in traj.samples() {
            assert_eq!((smp.state.s, smp.state.i, smp.state.r), (0.98, 0.0, 0.02));
            assert_eq!(smp.lockdown, 0.3);
        }
    }

    #[test]
    fn pure_decay_without_susceptibles() {
        let p = reference::epidemic();
        let init = State::initial(0.0, 0.2, 0.8).unwrap();
        let traj = integrate(&p, &NoLockdown, init, 50.0, 1e-10).unwrap();
        let expected = 0.2 * (-p.gamma * 50.0).exp();
        assert!((traj.final_state().i - expected).abs() < 1e-10 * 0.2);
    }

    #[test]
    fn rejects_bad_horizon() {
        let p = reference::epidemic();
        let init = reference::initial_state();
        assert!(integrate(&p, &NoLockdown, init, 0.0, 1e-9).is_err());
        assert!(integrate(&p, &NoLockdown, init, 10.0, 0.0).is_err());
    }

    #[test]
    fn piecewise_constant_switches_are_breaks() {
        let p = reference::epidemic();
        let ctrl = PiecewiseConstant::new(0.0, 30.0, vec![0.2, 0.8, 0.0]).unwrap();
        let traj = integrate(&p, &ctrl, reference::initial_state(), 30.0, 1e-9).unwrap();
        let runs = traj.runs();
        assert_eq!(runs.len(), 3);
        for (run, want) in runs.iter().zip([0.2, 0.8, 0.0]) {
            for smp in &traj.samples()[run.clone()] {
                assert_eq!(smp.lockdown, want);
            }
        }
        assert_eq!(traj.samples()[runs[1].start].state.t, 10.0);
        traj.check_invariants().unwrap();
    }

    #[test]
    fn piecewise_next_switch_is_strictly_later() {
        let ctrl = PiecewiseConstant::new(0.0, 3.0, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ctrl.next_switch(0.0), Some(1.0));
        assert_eq!(ctrl.next_switch(1.0), Some(2.0));
        assert_eq!(ctrl.next_switch(2.5), Some(3.0));
        assert_eq!(ctrl.next_switch(3.0), None);
        assert_eq!(ctrl.lockdown(3.5, &reference::initial_state()), 0.0);
    }

    #[test]
    fn clamps_control_output() {
        let p = EpidemicParams::new(0.2, 0.1, 1.0, 0.5).unwrap();
        let traj = integrate(&p, &ConstantLockdown(2.0), reference::initial_state(), 5.0, 1e-9).unwrap();
        assert!(traj.samples().iter().all(|s| s.lockdown == 0.5));
    }

    #[test]
    fn event_stops_on_threshold() {
        let p = reference::epidemic();
        let engine = Engine::new(&p, IntegratorOptions::default());
        let law = |_t: f64, _y: &[f64; 3]| 0.0;
        let g = |y: &[f64; 3]| 0.1 - y[1];
        let mut out = Vec::new();
        let end = engine.run_segment(&law, reference::initial_state(), 500.0, Some(&g), &mut out).unwrap();
        assert!(end.event);
        assert!((end.state.i - 0.1).abs() < 1e-13);
    }

    #[test]
    fn concat_and_lockdown_lookup() {
        let p = reference::epidemic();
        let a = integrate(&p, &ConstantLockdown(0.5), reference::initial_state(), 10.0, 1e-9).unwrap();
        let b = integrate(&p, &NoLockdown, a.final_state(), 20.0, 1e-9).unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.runs().len(), 2);
        assert_eq!(ab.lockdown_at(5.0), 0.5);
        assert_eq!(ab.lockdown_at(10.0), 0.0);
        assert!(b.concat(&a).is_err());
    }
}
