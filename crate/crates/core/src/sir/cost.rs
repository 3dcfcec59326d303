//! Running cost `L + kappa (gamma0 + gamma1 i) i` and its integrals.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::closed_form::infected_squared_to_final_size;
use super::integrate::{Sample, Trajectory};
use super::params::{CostParams, EpidemicParams, State};
use crate::error::Result;

/// Integrated cost split into its economic and epidemic parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `∫ L dt` in days.
    pub economic: f64,
    /// `kappa gamma0 ∫ i dt`.
    pub infected_linear: f64,
    /// `kappa gamma1 ∫ i^2 dt`.
    pub infected_quadratic: f64,
    /// `∫ (gamma0 + gamma1 i) i dt`, fraction of the population.
    pub deaths: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(economic: f64, infected_linear: f64, infected_quadratic: f64, deaths: f64) -> Self {
        Self {
            economic,
            infected_linear,
            infected_quadratic,
            deaths,
            total: economic + infected_linear + infected_quadratic,
        }
    }

    /// Epidemic part of the cost, `kappa ∫ (gamma0 + gamma1 i) i dt`.
    pub fn epidemic(&self) -> f64 {
        self.infected_linear + self.infected_quadratic
    }

    /// Economic cost as a fraction of `horizon` days of full lockdown.
    pub fn normalized_economic(&self, horizon: f64) -> f64 {
        self.economic / horizon
    }
}

impl Add for CostBreakdown {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(
            self.economic + o.economic,
            self.infected_linear + o.infected_linear,
            self.infected_quadratic + o.infected_quadratic,
            self.deaths + o.deaths,
        )
    }
}

impl AddAssign for CostBreakdown {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Composite Simpson quadrature of the cost components over each run of the
/// trajectory.
pub fn trajectory_cost(traj: &Trajectory, c: &CostParams) -> CostBreakdown {
    let parts = |smp: &Sample| {
        let i = smp.state.i;
        [smp.lockdown, c.kappa * c.gamma0 * i, c.kappa * c.gamma1 * i * i, c.mortality(i) * i]
    };
    let mut acc = [0.0; 4];
    let smp = traj.samples();
    for run in traj.runs() {
        let ts: Vec<f64> = smp[run.clone()].iter().map(|s| s.state.t).collect();
        let values: Vec<[f64; 4]> = smp[run].iter().map(parts).collect();
        for (k, total) in acc.iter_mut().enumerate() {
            let ys: Vec<f64> = values.iter().map(|v| v[k]).collect();
            *total += simpson(&ts, &ys);
        }
    }
    CostBreakdown::new(acc[0], acc[1], acc[2], acc[3])
}

/// Running total cost at every sample.
pub fn cumulative_cost(traj: &Trajectory, c: &CostParams) -> Vec<f64> {
    let smp = traj.samples();
    let mut out = Vec::with_capacity(smp.len());
    let mut offset = 0.0;
    for run in traj.runs() {
        let ts: Vec<f64> = smp[run.clone()].iter().map(|s| s.state.t).collect();
        let ys: Vec<f64> = smp[run].iter().map(|s| s.lockdown + c.kappa * c.mortality(s.state.i) * s.state.i).collect();
        let cum = cumulative_simpson(&ts, &ys);
        out.extend(cum.iter().map(|v| v + offset));
        offset += cum.last().copied().unwrap_or(0.0);
    }
    out
}

/// Cost of leaving the epidemic uncontrolled forever from `state`,
/// evaluated with the final-size and orbit-integral closed forms.
pub fn uncontrolled_tail_cost(state: &State, p: &EpidemicParams, c: &CostParams) -> Result<CostBreakdown> {
    let (int_i2, fs) = infected_squared_to_final_size(state, p)?;
    let int_i = (fs.r_inf - state.r) / p.gamma;
    Ok(CostBreakdown::new(
        0.0,
        c.kappa * c.gamma0 * int_i,
        c.kappa * c.gamma1 * int_i2,
        c.gamma0 * int_i + c.gamma1 * int_i2,
    ))
}

/// Composite Simpson rule on a possibly non-uniform grid.
pub fn simpson(ts: &[f64], ys: &[f64]) -> f64 {
    cumulative_simpson(ts, ys).last().copied().unwrap_or(0.0)
}

/// Cumulative integral at every node. Pairs of intervals are integrated with
/// the three-point rule; the first node of a pair gets the integral of the
/// same interpolating parabola over its first half, and a trailing unpaired
/// interval uses the parabola through the last three nodes.
pub fn cumulative_simpson(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (ts[1] - ts[0]) * (ys[0] + ys[1]);
        return out;
    }
    let mut k = 0;
    while k + 2 < n {
        let (first, whole) = parabola_parts(&ts[k..k + 3], &ys[k..k + 3]);
        out[k + 1] = out[k] + first;
        out[k + 2] = out[k] + whole;
        k += 2;
    }
    if k + 1 < n {
        let (first, whole) = parabola_parts(&ts[n - 3..], &ys[n - 3..]);
        out[n - 1] = out[n - 2] + (whole - first);
    }
    out
}

/// Integrals of the parabola through three nodes over `[t0, t1]` and `[t0, t2]`.
fn parabola_parts(t: &[f64], y: &[f64]) -> (f64, f64) {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    let h = h1 + h2;
    let first = h1 * (3.0 * h - h1) / (6.0 * h) * y[0] + h1 * (3.0 * h - 2.0 * h1) / (6.0 * h2) * y[1]
        - h1 * h1 * h1 / (6.0 * h * h2) * y[2];
    let whole = h / 6.0 * ((2.0 - h2 / h1) * y[0] + h * h / (h1 * h2) * y[1] + (2.0 - h1 / h2) * y[2]);
    (first, whole)
}
