//! Closed-form facts about uncontrolled SIR orbits: final size, peak
//! prevalence and the exact integral of `i^2`.

use serde::{Deserialize, Serialize};

use super::dynamics::conserved_quantity_raw;
use super::params::{EpidemicParams, State};
use crate::error::{Error, Result};
use crate::numerics::{solve_scalar_root, Bracket};

/// Maximum disagreement of the conserved quantity between two states for
/// them to count as points of the same uncontrolled orbit.
pub const ORBIT_TOLERANCE: f64 = 1e-8;

/// Asymptotic state of an uncontrolled epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalSize {
    pub s_inf: f64,
    pub r_inf: f64,
}

impl FinalSize {
    /// Absorbing state reached as `t -> inf`.
    pub fn as_state(&self) -> State {
        State { s: self.s_inf, i: 0.0, r: self.r_inf, t: f64::INFINITY }
    }
}

/// Residual of `r = 1 - s_a exp(-(beta/gamma)(r - r_a))`.
pub fn final_size_residual(r_inf: f64, state_a: &State, p: &EpidemicParams) -> f64 {
    r_inf - 1.0 + state_a.s * (-p.basic_reproduction_number() * (r_inf - state_a.r)).exp()
}

/// Solves the final-size fixed point for an epidemic left uncontrolled from
/// `state_a` on.
///
/// For `i_a > 0` the residual is negative at `r_a`, positive at 1 and
/// convex in between, so the root in `(r_a, 1]` is unique. With `i_a = 0` the
/// state is already absorbing.
pub fn final_size(state_a: &State, p: &EpidemicParams) -> Result<FinalSize> {
    if state_a.i == 0.0 {
        return Ok(FinalSize { s_inf: state_a.s, r_inf: state_a.r });
    }
    if !(state_a.i > 0.0 && state_a.s >= 0.0 && state_a.r <= 1.0 && state_a.r < 1.0) {
        return Err(Error::Domain(format!("final size undefined for state {state_a:?}")));
    }
    // In x = r - r_a the residual is x - i_a + s_a expm1(-k x), which keeps
    // its sign at x = 0 however small i_a is.
    let k = p.basic_reproduction_number();
    let residual = |x: f64| x - state_a.i + state_a.s * (-k * x).exp_m1();
    let x = solve_scalar_root(residual, Bracket::new(0.0, 1.0 - state_a.r)?, 1e-17)?;
    let r_inf = state_a.r + x;
    Ok(FinalSize { s_inf: 1.0 - r_inf, r_inf })
}

/// Peak prevalence of the uncontrolled epidemic started at `init`.
pub fn uncontrolled_peak(init: &State, p: &EpidemicParams) -> f64 {
    let herd = p.herd_immunity_threshold();
    if p.basic_reproduction_number() * init.s <= 1.0 {
        return init.i;
    }
    init.i + init.s - herd * (1.0 - (herd / init.s).ln())
}

/// Exact `∫ i^2 dt` between two states of the same uncontrolled orbit.
///
/// `state_b` may be the absorbing state of [`FinalSize::as_state`].
pub fn integral_infected_squared_uncontrolled(state_a: &State, state_b: &State, p: &EpidemicParams) -> Result<f64> {
    if !(state_a.s > 0.0 && state_b.s > 0.0) {
        return Err(Error::Domain("orbit integral needs s > 0 at both ends".into()));
    }
    let qa = conserved_quantity_raw(state_a.s, state_a.i, p);
    let qb = conserved_quantity_raw(state_b.s, state_b.i, p);
    if (qa - qb).abs() > ORBIT_TOLERANCE {
        return Err(Error::Domain(format!(
            "states are not on the same uncontrolled orbit (conserved quantities {qa} vs {qb})"
        )));
    }
    Ok(infected_squared_between(state_a, state_b.s, state_b.r, p))
}

/// Orbit integral without the precondition check.
pub(crate) fn infected_squared_between(state_a: &State, s_b: f64, r_b: f64, p: &EpidemicParams) -> f64 {
    let (beta, gamma) = (p.beta, p.gamma);
    // differences first: the three terms nearly cancel on short segments
    let ds = state_a.s - s_b;
    let dl = (ds / s_b).ln_1p();
    let lsum = state_a.s.ln() + s_b.ln();
    gamma * dl * lsum / (2.0 * beta * beta) - ds / beta
        + conserved_quantity_raw(state_a.s, state_a.i, p) * (r_b - state_a.r) / gamma
}

/// `∫ i^2 dt` from `state_a` to the end of the uncontrolled epidemic.
pub fn infected_squared_to_final_size(state_a: &State, p: &EpidemicParams) -> Result<(f64, FinalSize)> {
    let fs = final_size(state_a, p)?;
    if state_a.i == 0.0 {
        return Ok((0.0, fs));
    }
    if !(state_a.s > 0.0 && fs.s_inf > 0.0) {
        return Err(Error::Domain("orbit integral needs s > 0".into()));
    }
    Ok((infected_squared_between(state_a, fs.s_inf, fs.r_inf, p), fs))
}
