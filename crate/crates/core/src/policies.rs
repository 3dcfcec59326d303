//! Feedback lockdown policies.
//!
//! Policy A holds the controlled reproduction number at a target `rho` until
//! the uncontrolled one falls below it. Policy B lets the infected fraction
//! reach a target `iota`, holds it there until herd immunity and then
//! releases the lockdown. Both are simulated phase by phase; every phase
//! boundary is an event located by the integrator, and phases never repeat.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{minimize_scalar_with_scan, Bracket, Minimum};
use crate::sir::integrate::{Engine, Sample};
use crate::sir::{
    trajectory_cost, uncontrolled_tail_cost, CostBreakdown, CostParams, EpidemicParams, IntegratorOptions, State,
    Trajectory,
};

/// Slack used when deciding whether a feedback law had to be clamped.
const SATURATION_SLACK: f64 = 1e-12;

/// Phases of a feedback policy, in the order they occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    I,
    II,
    III,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::I => "I",
            Phase::II => "II",
            Phase::III => "III",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Reproduction-number target `rho`.
    A,
    /// Infected-fraction target `iota`.
    B,
}

/// Time interval spent in one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub start: f64,
    pub end: f64,
}

impl PhaseSpan {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A simulated feedback policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub trajectory: Trajectory,
    /// Non-empty phases in order. Consecutive spans share their boundary.
    pub phase_times: Vec<PhaseSpan>,
    /// Cost over the simulated horizon.
    pub cost: CostBreakdown,
    /// `rho` or `iota`.
    pub parameter: f64,
    /// True when the feedback law asked for more than `l_max` somewhere, so
    /// the target was not tracked exactly.
    pub saturated: bool,
}

impl PolicyRun {
    pub fn span(&self, phase: Phase) -> Option<&PhaseSpan> {
        self.phase_times.iter().find(|s| s.phase == phase)
    }

    /// Phase active at the end of the horizon.
    pub fn final_phase(&self) -> Phase {
        self.phase_times.last().map_or(Phase::I, |s| s.phase)
    }

    /// Whether the policy applies no lockdown from the end of the horizon on.
    pub fn ends_uncontrolled(&self) -> bool {
        match self.policy {
            PolicyKind::A => self.final_phase() == Phase::II,
            PolicyKind::B => self.final_phase() == Phase::III,
        }
    }

    /// Horizon cost plus the exact cost of the uncontrolled remainder.
    pub fn cost_with_tail(&self, c: &CostParams) -> Result<CostBreakdown> {
        if !self.ends_uncontrolled() {
            return Err(Error::Regime(format!(
                "policy is still in phase {} at the horizon; no uncontrolled tail",
                self.final_phase()
            )));
        }
        Ok(self.cost + uncontrolled_tail_cost(&self.trajectory.final_state(), self.trajectory.params(), c)?)
    }
}

/// Lockdown solving `beta (1 - theta L)^2 s = target * gamma`, before clamping.
fn tracking_lockdown(s: f64, target: f64, p: &EpidemicParams) -> f64 {
    if p.beta * s <= target * p.gamma {
        return 0.0;
    }
    (1.0 - (target * p.gamma / (p.beta * s)).sqrt()) / p.theta
}

/// Policy A: the lockdown that brings the controlled reproduction number to
/// `rho`, or zero once the uncontrolled one is already at most `rho`.
pub fn policy_a_lockdown(state: &State, rho: f64, p: &EpidemicParams) -> f64 {
    p.clamp_lockdown(tracking_lockdown(state.s, rho, p))
}

/// Policy B lockdown in a given phase: full lockdown while `i > iota` in
/// Phase I, holding `i` constant in Phase II, nothing in Phase III.
pub fn policy_b_lockdown(state: &State, iota: f64, p: &EpidemicParams, phase: Phase) -> Result<f64> {
    match phase {
        Phase::I => Ok(if state.i < iota { 0.0 } else { p.l_max }),
        Phase::II => {
            if state.s < p.herd_immunity_threshold() {
                return Err(Error::Domain(format!(
                    "phase II needs s >= gamma / beta = {}; got s = {}",
                    p.herd_immunity_threshold(),
                    state.s
                )));
            }
            Ok(p.clamp_lockdown(tracking_lockdown(state.s, 1.0, p)))
        }
        Phase::III => Ok(0.0),
    }
}

/// Lockdown that holds the force of infection `beta s i` at `phi`.
pub fn force_of_infection_lockdown(state: &State, phi: f64, p: &EpidemicParams) -> f64 {
    let force = p.beta * state.s * state.i;
    if force <= phi {
        return 0.0;
    }
    p.clamp_lockdown((1.0 - (phi / force).sqrt()) / p.theta)
}

/// Drives the engine through successive phases and collects the pieces.
struct PhaseRunner<'a> {
    engine: Engine<'a>,
    p: &'a EpidemicParams,
    t_end: f64,
    state: State,
    samples: Vec<Sample>,
    spans: Vec<PhaseSpan>,
}

type Law<'l> = &'l dyn Fn(f64, &[f64; 3]) -> f64;
type Event<'l> = &'l dyn Fn(&[f64; 3]) -> f64;

impl<'a> PhaseRunner<'a> {
    fn new(p: &'a EpidemicParams, init: State, t_end: f64) -> Result<Self> {
        p.validate()?;
        init.validate()?;
        if !(t_end > init.t) {
            return Err(Error::InvalidInput(format!("t_end = {t_end} must exceed the initial time {}", init.t)));
        }
        Ok(Self {
            engine: Engine::new(p, IntegratorOptions::default()),
            p,
            t_end,
            state: init,
            samples: Vec::new(),
            spans: Vec::new(),
        })
    }

    fn done(&self) -> bool {
        self.state.t >= self.t_end
    }

    /// Runs `phase` until `event` fires or the horizon ends. Returns whether
    /// the event fired. A phase whose event holds at entry is skipped.
    fn run(&mut self, phase: Phase, law: Law<'_>, event: Option<Event<'_>>) -> Result<bool> {
        if let Some(g) = event {
            if g(&[self.state.s, self.state.i, self.state.r]) <= 0.0 {
                return Ok(true);
            }
        }
        if self.done() {
            return Ok(false);
        }
        let start = self.state.t;
        let end = self.engine.run_segment(law, self.state, self.t_end, event, &mut self.samples)?;
        self.state = end.state;
        self.spans.push(PhaseSpan { phase, start, end: end.state.t });
        Ok(end.event)
    }

    fn finish(self, policy: PolicyKind, parameter: f64, c: &CostParams, saturated: bool) -> PolicyRun {
        let trajectory = Trajectory::from_raw(*self.p, self.samples);
        let cost = trajectory_cost(&trajectory, c);
        PolicyRun { policy, trajectory, phase_times: self.spans, cost, parameter, saturated }
    }
}

/// Simulates Policy A with target `rho` up to `t_end`.
pub fn simulate_policy_a(rho: f64, init: State, p: &EpidemicParams, c: &CostParams, t_end: f64) -> Result<PolicyRun> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidInput(format!("rho must be positive; got {rho}")));
    }
    let mut runner = PhaseRunner::new(p, init, t_end)?;
    let s_switch = rho * p.herd_immunity_threshold();
    let law = |_t: f64, y: &[f64; 3]| p.clamp_lockdown(tracking_lockdown(y[0], rho, p));
    let event = |y: &[f64; 3]| y[0] - s_switch;
    let mut saturated = false;
    if runner.run(Phase::I, &law, Some(&event))? || runner.spans.is_empty() {
        let free = |_t: f64, _y: &[f64; 3]| 0.0;
        runner.run(Phase::II, &free, None)?;
    }
    if let Some(span) = runner.spans.iter().find(|s| s.phase == Phase::I) {
        saturated = runner
            .samples
            .iter()
            .filter(|smp| smp.state.t <= span.end)
            .any(|smp| tracking_lockdown(smp.state.s, rho, p) > p.l_max + SATURATION_SLACK);
    }
    Ok(runner.finish(PolicyKind::A, rho, c, saturated))
}

/// Simulates Policy B with target `iota` up to `t_end`.
pub fn simulate_policy_b(iota: f64, init: State, p: &EpidemicParams, c: &CostParams, t_end: f64) -> Result<PolicyRun> {
    if !(iota > 0.0 && iota < 1.0) {
        return Err(Error::InvalidInput(format!("iota must lie in (0, 1); got {iota}")));
    }
    let mut runner = PhaseRunner::new(p, init, t_end)?;
    let herd = p.herd_immunity_threshold();
    let mut saturated = false;
    let mut next = if init.s > herd { Some(Phase::I) } else { Some(Phase::III) };

    if next == Some(Phase::I) {
        // Phase I ends when i reaches iota, or at herd immunity if it never does.
        let from_above = init.i > iota;
        let level = if from_above { p.l_max } else { 0.0 };
        let law = move |_t: f64, _y: &[f64; 3]| level;
        let event = |y: &[f64; 3]| {
            let gap = if from_above { y[1] - iota } else { iota - y[1] };
            gap.min(y[0] - herd)
        };
        next = if runner.run(Phase::I, &law, Some(&event))? {
            let st = runner.state;
            Some(if (st.i - iota).abs() <= st.s - herd { Phase::II } else { Phase::III })
        } else {
            // a weak full lockdown may never push i down to iota
            saturated = from_above;
            None
        };
    }
    if next == Some(Phase::II) {
        let law = |_t: f64, y: &[f64; 3]| p.clamp_lockdown(tracking_lockdown(y[0], 1.0, p));
        let event = |y: &[f64; 3]| y[0] - herd;
        let start = runner.state.t;
        next = runner.run(Phase::II, &law, Some(&event))?.then_some(Phase::III);
        saturated |= runner
            .samples
            .iter()
            .filter(|smp| smp.state.t >= start)
            .any(|smp| tracking_lockdown(smp.state.s, 1.0, p) > p.l_max + SATURATION_SLACK);
    }
    if next == Some(Phase::III) && (!runner.done() || runner.spans.is_empty()) {
        let free = |_t: f64, _y: &[f64; 3]| 0.0;
        runner.run(Phase::III, &free, None)?;
    }
    Ok(runner.finish(PolicyKind::B, iota, c, saturated))
}

/// Best `rho` for Policy A by direct simulation over `horizon` days.
pub fn optimize_rho_simulated(
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    horizon: f64,
    bracket: Bracket,
    tol: f64,
) -> Result<Minimum> {
    simulate_policy_a(bracket.lo, init, p, c, horizon)?;
    let m = minimize_scalar_with_scan(
        |rho| simulate_policy_a(rho, init, p, c, horizon).map_or(f64::NAN, |run| run.cost.total),
        bracket,
        32,
        tol,
    );
    Ok(m)
}
