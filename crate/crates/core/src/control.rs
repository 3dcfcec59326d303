//! Numerical optimal lockdown.
//!
//! The lockdown is piecewise constant on `N` uniform intervals of `[0, T]`.
//! Each interval is integrated with a fixed number of fifth-order
//! Dormand–Prince substeps, with the running integrals `∫ i` and `∫ i^2`
//! carried as extra states, so the discrete cost is a smooth function of the
//! `N` lockdown levels. Its exact gradient comes from the reverse sweep
//! through the same Runge–Kutta stages. Projected gradient descent with
//! Barzilai–Borwein steps and an Armijo safeguard then minimizes the cost
//! from several starting controls.

use serde::{Deserialize, Serialize};

use crate::analytic::{iota_bracket, optimize_iota, optimize_rho, rho_bracket};
use crate::error::{Error, Result};
use crate::policies::{simulate_policy_a, simulate_policy_b};
use crate::sir::integrate::Sample;
use crate::sir::{
    final_size, integrate, trajectory_cost, uncontrolled_tail_cost, CostBreakdown, CostParams, EpidemicParams,
    PiecewiseConstant, State, Trajectory,
};

/// Longest Runge–Kutta substep of the discrete model, days.
pub const MAX_SUBSTEP: f64 = 0.25;

/// Smallest accepted number of control intervals.
pub const MIN_INTERVALS: usize = 50;

/// What happens after the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    /// The cost stops at `T`.
    Free,
    /// The lockdown is lifted at `T` and the exact cost of the uncontrolled
    /// remainder is added.
    UncontrolledTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Herd immunity is never reached within the horizon.
    Suppression,
    /// Susceptibles fall to the herd-immunity threshold.
    Mitigation,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Suppression => "suppression",
            Regime::Mitigation => "mitigation",
        })
    }
}

/// Mitigation iff `s` gets down to `gamma / beta` at some sample.
pub fn classify_regime(traj: &Trajectory, p: &EpidemicParams) -> Regime {
    if traj.min_susceptible() <= p.herd_immunity_threshold() {
        Regime::Mitigation
    } else {
        Regime::Suppression
    }
}

type X = [f64; 4];

const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];

/// The discretized cost as a function of the control levels.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteModel {
    p: EpidemicParams,
    c: CostParams,
    init: State,
    horizon: f64,
    n: usize,
    substeps: usize,
    terminal: Terminal,
}

/// Cost of one control together with the state at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteCost {
    pub cost: CostBreakdown,
    pub final_state: State,
}

/// Tail integrals `∫ i`, `∫ i^2` after the horizon and their derivatives in
/// `(s_T, i_T)`.
struct Tail {
    int_i: f64,
    int_i2: f64,
    d_int_i: [f64; 2],
    d_int_i2: [f64; 2],
}

impl DiscreteModel {
    pub fn new(
        p: &EpidemicParams,
        c: &CostParams,
        init: State,
        horizon: f64,
        n_intervals: usize,
        terminal: Terminal,
    ) -> Result<Self> {
        p.validate()?;
        c.validate()?;
        init.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive; got {horizon}")));
        }
        if n_intervals == 0 {
            return Err(Error::InvalidInput("need at least one control interval".into()));
        }
        let dt = horizon / n_intervals as f64;
        let substeps = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
        Ok(Self { p: *p, c: *c, init, horizon, n: n_intervals, substeps, terminal })
    }

    pub fn n_intervals(&self) -> usize {
        self.n
    }

    pub fn interval(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.p
    }

    pub fn grid(&self, values: Vec<f64>) -> Result<PiecewiseConstant> {
        PiecewiseConstant::new(self.init.t, self.init.t + self.horizon, values)
    }

    fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::InvalidInput(format!("expected {} control values, got {}", self.n, values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=self.p.l_max).contains(*v)) {
            return Err(Error::InvalidInput(format!("control value {v} outside [0, {}]", self.p.l_max)));
        }
        Ok(())
    }

    fn h(&self) -> f64 {
        self.interval() / self.substeps as f64
    }

    fn field(&self, x: &X, u: f64) -> X {
        let (s, i) = (x[0], x[1]);
        let force = self.p.beta * u * s * i;
        [-force, force - self.p.gamma * i, i, i * i]
    }

    fn stages(&self, x: &X, u: f64, h: f64) -> ([X; 6], [X; 6]) {
        let mut xs = [[0.0; 4]; 6];
        let mut ks = [[0.0; 4]; 6];
        for j in 0..6 {
            let mut xj = *x;
            for (l, kl) in ks.iter().enumerate().take(j) {
                let a = A[j][l];
                if a != 0.0 {
                    for d in 0..4 {
                        xj[d] += h * a * kl[d];
                    }
                }
            }
            xs[j] = xj;
            ks[j] = self.field(&xj, u);
        }
        (xs, ks)
    }

    fn step(&self, x: &X, u: f64, h: f64) -> X {
        let (_, ks) = self.stages(x, u, h);
        let mut out = *x;
        for (b, k) in B.iter().zip(&ks) {
            for d in 0..4 {
                out[d] += h * b * k[d];
            }
        }
        out
    }

    fn tail(&self, s: f64, i: f64) -> Result<Tail> {
        let zero = Tail { int_i: 0.0, int_i2: 0.0, d_int_i: [0.0; 2], d_int_i2: [0.0; 2] };
        if self.terminal == Terminal::Free || i <= 0.0 {
            return Ok(zero);
        }
        let (beta, gamma) = (self.p.beta, self.p.gamma);
        let herd = self.p.herd_immunity_threshold();
        let r = (1.0 - s - i).max(0.0);
        let fs = final_size(&State { s, i, r, t: 0.0 }, &self.p)?;
        let s_inf = fs.s_inf;
        let d = s + i - s_inf;
        let q = s + i - herd * s.ln();
        let q_s = 1.0 - herd / s;
        let denom = 1.0 - herd / s_inf;
        let sinf_s = q_s / denom;
        let sinf_i = 1.0 / denom;
        let (ls, linf) = (s.ln(), s_inf.ln());
        let int_i2 = gamma * (ls * ls - linf * linf) / (2.0 * beta * beta) - (s - s_inf) / beta + q * d / gamma;
        let g_s = gamma / (beta * beta) * (ls / s - linf * sinf_s / s_inf) - (1.0 - sinf_s) / beta
            + (q_s * d + q * (1.0 - sinf_s)) / gamma;
        let g_i = -gamma / (beta * beta) * linf * sinf_i / s_inf + sinf_i / beta + (d + q * (1.0 - sinf_i)) / gamma;
        Ok(Tail {
            int_i: d / gamma,
            int_i2,
            d_int_i: [(1.0 - sinf_s) / gamma, (1.0 - sinf_i) / gamma],
            d_int_i2: [g_s, g_i],
        })
    }

    fn breakdown(&self, values: &[f64], x: &X, tail: &Tail) -> CostBreakdown {
        let c = &self.c;
        let economic: f64 = values.iter().sum::<f64>() * self.interval();
        let int_i = x[2] + tail.int_i;
        let int_i2 = x[3] + tail.int_i2;
        CostBreakdown::new(
            economic,
            c.kappa * c.gamma0 * int_i,
            c.kappa * c.gamma1 * int_i2,
            c.gamma0 * int_i + c.gamma1 * int_i2,
        )
    }

    fn initial(&self) -> X {
        [self.init.s, self.init.i, 0.0, 0.0]
    }

    /// Cost of `values` under the discrete model.
    pub fn evaluate(&self, values: &[f64]) -> Result<DiscreteCost> {
        self.check(values)?;
        let h = self.h();
        let mut x = self.initial();
        for &l in values {
            let u = self.p.transmission_factor(l);
            for _ in 0..self.substeps {
                x = self.step(&x, u, h);
            }
        }
        let tail = self.tail(x[0], x[1])?;
        let t = self.init.t + self.horizon;
        let (s, i) = (x[0], x[1].max(0.0));
        Ok(DiscreteCost { cost: self.breakdown(values, &x, &tail), final_state: State { s, i, r: 1.0 - s - i, t } })
    }

    /// Cost and its exact gradient with respect to every control level.
    pub fn cost_and_gradient(&self, values: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
        self.check(values)?;
        let (h, m) = (self.h(), self.substeps);
        let mut xs = Vec::with_capacity(self.n * m);
        let mut x = self.initial();
        for &l in values {
            let u = self.p.transmission_factor(l);
            for _ in 0..m {
                xs.push(x);
                x = self.step(&x, u, h);
            }
        }
        let tail = self.tail(x[0], x[1])?;
        let cost = self.breakdown(values, &x, &tail);

        let (kg0, kg1) = (self.c.kappa * self.c.gamma0, self.c.kappa * self.c.gamma1);
        let mut lam =
            [kg0 * tail.d_int_i[0] + kg1 * tail.d_int_i2[0], kg0 * tail.d_int_i[1] + kg1 * tail.d_int_i2[1], kg0, kg1];
        let (beta, gamma) = (self.p.beta, self.p.gamma);
        let dt = self.interval();
        let mut grad = vec![0.0; self.n];
        for k in (0..self.n).rev() {
            let u = self.p.transmission_factor(values[k]);
            let mut ubar = 0.0;
            for step in (0..m).rev() {
                let (stage_x, _) = self.stages(&xs[k * m + step], u, h);
                let mut xbar = [[0.0; 4]; 6];
                for j in (0..6).rev() {
                    let mut kbar = [0.0; 4];
                    for d in 0..4 {
                        kbar[d] = h * B[j] * lam[d];
                    }
                    for (mm, xb) in xbar.iter().enumerate().skip(j + 1) {
                        let a = A[mm][j];
                        if a != 0.0 {
                            for d in 0..4 {
                                kbar[d] += h * a * xb[d];
                            }
                        }
                    }
                    let (s, i) = (stage_x[j][0], stage_x[j][1]);
                    let diff = kbar[1] - kbar[0];
                    xbar[j] = [
                        beta * u * i * diff,
                        beta * u * s * diff - gamma * kbar[1] + kbar[2] + 2.0 * i * kbar[3],
                        0.0,
                        0.0,
                    ];
                    ubar += beta * s * i * diff;
                }
                for xb in &xbar {
                    lam[0] += xb[0];
                    lam[1] += xb[1];
                }
            }
            let du = -2.0 * self.p.theta * (1.0 - self.p.theta * values[k]);
            grad[k] = dt + ubar * du;
        }
        Ok((cost, grad))
    }

    /// Path of the discrete model, one sample per substep. Interval
    /// boundaries where the lockdown jumps are run breaks.
    pub fn trajectory(&self, values: &[f64]) -> Result<Trajectory> {
        self.check(values)?;
        let (h, m) = (self.h(), self.substeps);
        let mut x = self.initial();
        let mut r = self.init.r;
        let t0 = self.init.t;
        let dt = self.interval();
        let mut samples = Vec::with_capacity(self.n * (m + 1));
        let sample = |x: &X, r: f64, t: f64, l: f64| {
            let i = x[1].max(0.0);
            let s = x[0];
            // rounding in r must not break mass conservation
            let scale = s + i + r;
            Sample { state: State { s: s / scale, i: i / scale, r: r / scale, t }, lockdown: l }
        };
        for (k, &l) in values.iter().enumerate() {
            let u = self.p.transmission_factor(l);
            let start = t0 + k as f64 * dt;
            if k == 0 || values[k - 1] != l {
                samples.push(sample(&x, r, start, l));
            }
            for step in 0..m {
                let (_, ks) = self.stages(&x, u, h);
                x = self.step(&x, u, h);
                r += h * gamma_weighted(&ks, self.p.gamma);
                let t = if step + 1 == m { t0 + (k + 1) as f64 * dt } else { start + (step + 1) as f64 * h };
                samples.push(sample(&x, r, t, l));
            }
        }
        Ok(Trajectory::from_raw(self.p, samples))
    }
}

fn gamma_weighted(ks: &[X; 6], gamma: f64) -> f64 {
    // dr/dt = gamma i, and d(∫i)/dt = i is the third state
    gamma * B.iter().zip(ks).map(|(b, k)| b * k[2]).sum::<f64>()
}

/// Gradient of the discrete cost with respect to each interval's lockdown.
pub fn cost_gradient(
    control: &PiecewiseConstant,
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    horizon: f64,
    terminal: Terminal,
) -> Result<Vec<f64>> {
    let model = DiscreteModel::new(p, c, init, horizon, control.values.len(), terminal)?;
    Ok(model.cost_and_gradient(&control.values)?.1)
}

/// Starting control of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WarmStart {
    /// `L = 0`.
    Zero,
    /// `L = l_max`.
    Full,
    /// Policy A at its cost-minimizing target.
    PolicyA,
    /// Policy B at its cost-minimizing target.
    PolicyB,
    /// Explicit levels, one per interval.
    Values(Vec<f64>),
}

impl WarmStart {
    pub fn defaults() -> Vec<WarmStart> {
        vec![WarmStart::Zero, WarmStart::Full, WarmStart::PolicyA, WarmStart::PolicyB]
    }

    pub fn label(&self) -> &'static str {
        match self {
            WarmStart::Zero => "zero",
            WarmStart::Full => "full",
            WarmStart::PolicyA => "policy-a",
            WarmStart::PolicyB => "policy-b",
            WarmStart::Values(_) => "values",
        }
    }
}

/// Stopping rules and limits of the descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative cost change counted as stagnation.
    pub rel_tol: f64,
    /// Consecutive stagnating iterations that end the run.
    pub stall_iterations: usize,
    /// Sup norm of the projected gradient, per unit time, that ends the run.
    pub pg_tol: f64,
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, rel_tol: 1e-8, stall_iterations: 3, pg_tol: 1e-6, armijo: 1e-4 }
    }
}

/// Outcome of one descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub values: Vec<f64>,
    pub cost: CostBreakdown,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted costs in order, starting with the initial one.
    pub history: Vec<f64>,
}

fn project(x: &mut [f64], l_max: f64) {
    for v in x {
        *v = v.clamp(0.0, l_max);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], dt: f64, l_max: f64) -> f64 {
    x.iter().zip(g).map(|(&xi, &gi)| (xi - (xi - gi / dt).clamp(0.0, l_max)).abs()).fold(0.0, f64::max)
}

/// Projected gradient descent from `start`.
pub fn descend(model: &DiscreteModel, start: &[f64], opts: &SolverOptions) -> Result<Descent> {
    let l_max = model.params().l_max;
    let dt = model.interval();
    let mut x = start.to_vec();
    project(&mut x, l_max);
    let (mut cost, mut g) = model.cost_and_gradient(&x)?;
    let mut history = vec![cost.total];
    let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut alpha = if g_max > 0.0 { 0.1 * l_max / g_max } else { 1.0 };
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if projected_gradient_norm(&x, &g, dt, l_max) < opts.pg_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
            project(&mut trial, l_max);
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| gi * (t - xi)).sum();
            if decrease == 0.0 {
                break;
            }
            let trial_cost = model.evaluate(&trial)?.cost;
            if trial_cost.total <= cost.total + opts.armijo * decrease {
                accepted = Some((trial, trial_cost));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, _)) = accepted else {
            // no descent possible along the projected arc
            converged = projected_gradient_norm(&x, &g, dt, l_max) < 1e3 * opts.pg_tol;
            break;
        };
        let (c_new, g_new) = model.cost_and_gradient(&x_new)?;
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..x.len() {
            let s = x_new[k] - x[k];
            ss += s * s;
            sy += s * (g_new[k] - g[k]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (alpha * 4.0).min(1e12) };
        let change = (cost.total - c_new.total).abs() / cost.total.abs().max(1e-300);
        stalled = if change < opts.rel_tol { stalled + 1 } else { 0 };
        x = x_new;
        g = g_new;
        cost = c_new;
        history.push(cost.total);
        if stalled >= opts.stall_iterations {
            converged = true;
            break;
        }
    }
    Ok(Descent { values: x, cost, iterations, converged, history })
}

/// Numerical optimal control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OCResult {
    pub control_grid: PiecewiseConstant,
    pub trajectory: Trajectory,
    /// Cost under the discrete model, including the tail if any.
    pub cost: CostBreakdown,
    pub regime: Regime,
    pub converged: bool,
    pub starts_tried: usize,
    pub best_start: String,
    pub iterations: usize,
    pub terminal: Terminal,
    /// Spearman rank correlation between the lockdown and the force of
    /// infection `beta s i` at interval midpoints. A diagnostic only.
    pub force_correlation: f64,
}

/// Problem description for [`solve_optimal_control`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcSettings {
    pub horizon: f64,
    pub n_intervals: usize,
    pub terminal: Terminal,
    pub solver: SolverOptions,
}

impl OcSettings {
    pub fn new(horizon: f64, n_intervals: usize, terminal: Terminal) -> Self {
        Self { horizon, n_intervals, terminal, solver: SolverOptions::default() }
    }
}

/// Levels of a warm start at interval midpoints, or `None` if the policy's
/// optimal target is unavailable for these parameters.
pub fn warm_start_values(
    start: &WarmStart,
    model: &DiscreteModel,
    init: State,
    c: &CostParams,
) -> Result<Option<Vec<f64>>> {
    let p = model.params();
    let n = model.n_intervals();
    let dt = model.interval();
    let sample = |traj: &Trajectory| -> Vec<f64> {
        (0..n).map(|k| p.clamp_lockdown(traj.lockdown_at(init.t + (k as f64 + 0.5) * dt))).collect()
    };
    let t_end = init.t + model.horizon();
    Ok(match start {
        WarmStart::Zero => Some(vec![0.0; n]),
        WarmStart::Full => Some(vec![p.l_max; n]),
        WarmStart::PolicyA => {
            let Ok(b) = rho_bracket(&init, p) else { return Ok(None) };
            match optimize_rho(init, p, c, b) {
                Ok((rho, _)) => Some(sample(&simulate_policy_a(rho, init, p, c, t_end)?.trajectory)),
                Err(_) => None,
            }
        }
        WarmStart::PolicyB => {
            let Ok(b) = iota_bracket(&init, p) else { return Ok(None) };
            match optimize_iota(init, p, c, b) {
                Ok((iota, _)) => Some(sample(&simulate_policy_b(iota, init, p, c, t_end)?.trajectory)),
                Err(_) => None,
            }
        }
        WarmStart::Values(v) => {
            if v.len() != n {
                return Err(Error::InvalidInput(format!("warm start has {} values, expected {n}", v.len())));
            }
            Some(v.clone())
        }
    })
}

/// Minimizes the discrete cost from each warm start and keeps the best.
pub fn solve_optimal_control(
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    settings: &OcSettings,
    warm_starts: &[WarmStart],
) -> Result<OCResult> {
    if settings.n_intervals < MIN_INTERVALS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_INTERVALS} control intervals; got {}",
            settings.n_intervals
        )));
    }
    let model = DiscreteModel::new(p, c, init, settings.horizon, settings.n_intervals, settings.terminal)?;
    let mut best: Option<(Descent, &WarmStart)> = None;
    let mut tried = 0;
    for start in warm_starts {
        let Some(values) = warm_start_values(start, &model, init, c)? else { continue };
        tried += 1;
        let run = descend(&model, &values, &settings.solver)?;
        if best.as_ref().is_none_or(|(b, _)| run.cost.total < b.cost.total) {
            best = Some((run, start));
        }
    }
    let Some((run, start)) = best else {
        return Err(Error::InvalidInput("no usable warm start".into()));
    };
    let trajectory = model.trajectory(&run.values)?;
    let force_correlation = force_correlation(&model, &run.values, &trajectory);
    Ok(OCResult {
        control_grid: model.grid(run.values)?,
        regime: classify_regime(&trajectory, p),
        trajectory,
        cost: run.cost,
        converged: run.converged,
        starts_tried: tried,
        best_start: start.label().to_string(),
        iterations: run.iterations,
        terminal: settings.terminal,
        force_correlation,
    })
}

/// Re-simulates a control grid with the adaptive integrator, adding the
/// uncontrolled tail when requested.
pub fn resimulate(
    grid: &PiecewiseConstant,
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    terminal: Terminal,
) -> Result<(Trajectory, CostBreakdown)> {
    let traj = integrate(p, grid, init, grid.t_end(), 1e-10)?;
    let mut cost = trajectory_cost(&traj, c);
    if terminal == Terminal::UncontrolledTail {
        cost += uncontrolled_tail_cost(&traj.final_state(), p, c)?;
    }
    Ok((traj, cost))
}

fn force_correlation(model: &DiscreteModel, values: &[f64], traj: &Trajectory) -> f64 {
    let p = model.params();
    let dt = model.interval();
    let t0 = traj.start_time();
    let smp = traj.samples();
    let force: Vec<f64> = (0..values.len())
        .map(|k| {
            let t = t0 + (k as f64 + 0.5) * dt;
            let j = smp.partition_point(|s| s.state.t <= t).min(smp.len() - 1);
            let st = smp[j].state;
            p.beta * st.s * st.i
        })
        .collect();
    spearman(values, &force)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut j = k;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[k]] {
            j += 1;
        }
        let rank = 0.5 * (k + j) as f64;
        for &i in &idx[k..=j] {
            out[i] = rank;
        }
        k = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sir::{reference, ConstantLockdown, NoLockdown};

    fn model(horizon: f64, n: usize, terminal: Terminal) -> DiscreteModel {
        DiscreteModel::new(
            &reference::epidemic(),
            &reference::costs(),
            reference::initial_state(),
            horizon,
            n,
            terminal,
        )
        .unwrap()
    }

    #[test]
    fn discrete_cost_matches_adaptive_integration() {
        let m = model(365.0, 73, Terminal::Free);
        let values: Vec<f64> = (0..73).map(|k| 0.5 * (1.0 + (k as f64 * 0.3).sin()) * 0.8).collect();
        let discrete = m.evaluate(&values).unwrap().cost;
        let grid = m.grid(values).unwrap();
        let (_, adaptive) =
            resimulate(&grid, reference::initial_state(), m.params(), &reference::costs(), Terminal::Free).unwrap();
        assert!((discrete.total - adaptive.total).abs() <= 1e-6 * adaptive.total, "{discrete:?} {adaptive:?}");
    }

    #[test]
    fn tail_matches_closed_form() {
        let m = model(100.0, 50, Terminal::UncontrolledTail);
        let free = model(100.0, 50, Terminal::Free);
        let values = vec![0.0; 50];
        let head = free.evaluate(&values).unwrap();
        let tail = uncontrolled_tail_cost(&head.final_state, &reference::epidemic(), &reference::costs()).unwrap();
        let whole = m.evaluate(&values).unwrap().cost;
        assert!((whole.total - (head.cost.total + tail.total)).abs() < 1e-9 * whole.total);
    }

    #[test]
    fn gradient_at_zero_infection_is_interval_length() {
        let p = reference::epidemic();
        let init = State::initial(0.98, 0.0, 0.02).unwrap();
        let m = DiscreteModel::new(&p, &reference::costs(), init, 100.0, 50, Terminal::UncontrolledTail).unwrap();
        let (_, g) = m.cost_and_gradient(&[0.3; 50]).unwrap();
        assert!(g.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for terminal in [Terminal::Free, Terminal::UncontrolledTail] {
            let m = model(400.0, 50, terminal);
            let values: Vec<f64> = (0..50).map(|k| 0.2 + 0.5 * ((k as f64) * 0.7).cos().abs()).collect();
            let (_, g) = m.cost_and_gradient(&values).unwrap();
            let h = 1e-6;
            for k in [0, 7, 23, 49] {
                let mut up = values.clone();
                let mut down = values.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (m.evaluate(&up).unwrap().cost.total - m.evaluate(&down).unwrap().cost.total) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1e-3), "{terminal:?} {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn zero_kappa_lifts_lockdown() {
        let p = reference::epidemic();
        let c = reference::costs().with_kappa(0.0);
        let settings = OcSettings::new(365.0, 50, Terminal::Free);
        let res = solve_optimal_control(reference::initial_state(), &p, &c, &settings, &[WarmStart::Full]).unwrap();
        assert!(res.control_grid.values.iter().all(|&v| v == 0.0));
        assert_eq!(res.cost.total, 0.0);
        assert!(res.converged);
        let m = DiscreteModel::new(&p, &c, reference::initial_state(), 365.0, 50, Terminal::Free).unwrap();
        let (_, g) = m.cost_and_gradient(&[1.0; 50]).unwrap();
        assert!(g.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn descent_is_monotone_and_projected() {
        let m = model(200.0, 50, Terminal::Free);
        let run = descend(&m, &[0.5; 50], &SolverOptions { max_iterations: 200, ..Default::default() }).unwrap();
        assert!(run.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(run.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(run.cost.total <= m.evaluate(&[0.5; 50]).unwrap().cost.total);
    }

    #[test]
    fn regimes_of_simple_controls() {
        let p = reference::epidemic();
        let init = reference::initial_state();
        let free = integrate(&p, &NoLockdown, init, 365.0, 1e-9).unwrap();
        assert_eq!(classify_regime(&free, &p), Regime::Mitigation);
        let locked = integrate(&p, &ConstantLockdown(1.0), init, 365.0, 1e-9).unwrap();
        assert_eq!(classify_regime(&locked, &p), Regime::Suppression);
    }

    #[test]
    fn discrete_trajectory_is_valid() {
        let m = model(300.0, 60, Terminal::Free);
        let values: Vec<f64> = (0..60).map(|k| if k % 7 < 3 { 0.6 } else { 0.1 }).collect();
        let traj = m.trajectory(&values).unwrap();
        traj.check_invariants().unwrap();
        let fin = m.evaluate(&values).unwrap().final_state;
        assert!((traj.final_state().s - fin.s).abs() < 1e-12);
        assert_eq!(traj.end_time(), 300.0);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }
}
