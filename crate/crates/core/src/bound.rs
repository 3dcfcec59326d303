//! Lower bound on the cost of any lockdown that is lifted once herd
//! immunity is reached, and the optimality gaps it certifies for the two
//! feedback policies.
//!
//! Writing `i*` for the prevalence at the herd-immunity time, the bound is
//! `U(i*) = 2 U12 + U22 + U3` minimized over `0 <= i* <= i_max`. `U12`
//! bounds the cost of steering `s` from `s0` down to `gamma / beta`,
//! `U22` is the exact quadratic cost of the uncontrolled remainder and `U3`
//! the linear mortality cost of the whole epidemic.

use serde::{Deserialize, Serialize};

use crate::analytic::{iota_bracket, optimize_iota, optimize_rho, rho_bracket};
use crate::error::{Error, Result};
use crate::numerics::{minimize_scalar_with_scan, Bracket};
use crate::sir::{
    final_size_residual, infected_squared_to_final_size, uncontrolled_peak, CostParams, EpidemicParams, State,
};

/// Scan size of [`lower_bound`].
pub const BOUND_SCAN_POINTS: usize = 256;

/// Class of controls the bound applies to.
pub const ADMISSIBLE_CONTROLS: &str = "lockdowns with L(t) = 0 from the first time s(t) <= gamma / beta on";

/// `sqrt(27 / 32)`, the largest `eps` with `1 - sqrt(y) >= eps^2 (1 - y)^2`
/// on `[0, 1]`. Equality holds at `y = 1 / 9`.
pub fn epsilon_constant() -> f64 {
    (27.0f64 / 32.0).sqrt()
}

/// Terms of the bound at one value of `i*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub i_star: f64,
    pub u: f64,
    pub u12: f64,
    pub u22: f64,
    pub u3: f64,
    pub s_inf: f64,
    pub r_inf: f64,
}

/// Evaluates `U(i*)`.
pub fn bound_objective(i_star: f64, init: State, p: &EpidemicParams, c: &CostParams) -> Result<BoundTerms> {
    let herd = p.herd_immunity_threshold();
    if init.s <= herd {
        return Err(Error::Regime(format!("herd immunity already reached: s0 = {} <= {herd}", init.s)));
    }
    let i_max = uncontrolled_peak(&init, p);
    if !(0.0..=i_max).contains(&i_star) {
        return Err(Error::Domain(format!("i* = {i_star} outside [0, {i_max}]")));
    }
    let (beta, gamma) = (p.beta, p.gamma);
    let u12 = epsilon_constant()
        * (c.kappa * c.gamma1).sqrt()
        * ((-i_star + init.i - herd + init.s) / gamma + (herd.ln() - init.s.ln()) / beta);
    let at_herd = State { s: herd, i: i_star, r: 1.0 - herd - i_star, t: 0.0 };
    let (int_i2, fs) = infected_squared_to_final_size(&at_herd, p)?;
    let u22 = c.kappa * c.gamma1 * int_i2;
    let u3 = c.kappa * c.gamma0 / gamma * (fs.r_inf - init.r);
    Ok(BoundTerms { i_star, u: 2.0 * u12 + u22 + u3, u12, u22, u3, s_inf: fs.s_inf, r_inf: fs.r_inf })
}

/// The bound `C* = min U(i*)` with the data needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub c_star: f64,
    pub i_star: f64,
    pub i_max: f64,
    pub u12: f64,
    pub u22: f64,
    pub u3: f64,
    pub s_inf: f64,
    pub r_inf: f64,
    /// Residual of the final-size equation at `r_inf`.
    pub fixed_point_residual: f64,
    /// Controls the bound is valid for.
    pub admissible: String,
}

/// Minimizes [`bound_objective`] over `[0, i_max]`.
pub fn lower_bound(init: State, p: &EpidemicParams, c: &CostParams) -> Result<BoundResult> {
    let herd = p.herd_immunity_threshold();
    if p.beta * init.s / p.gamma <= 1.0 {
        return Err(Error::Regime(format!("herd immunity already reached: s0 = {} <= {herd}", init.s)));
    }
    let i_max = uncontrolled_peak(&init, p);
    let m = minimize_scalar_with_scan(
        |x| bound_objective(x, init, p, c).map_or(f64::NAN, |t| t.u),
        Bracket::new(0.0, i_max)?,
        BOUND_SCAN_POINTS,
        1e-8,
    );
    let t = bound_objective(m.x, init, p, c)?;
    let seed = State { s: herd, i: t.i_star, r: 1.0 - herd - t.i_star, t: 0.0 };
    Ok(BoundResult {
        c_star: t.u,
        i_star: t.i_star,
        i_max,
        u12: t.u12,
        u22: t.u22,
        u3: t.u3,
        s_inf: t.s_inf,
        r_inf: t.r_inf,
        fixed_point_residual: final_size_residual(t.r_inf, &seed, p).abs(),
        admissible: ADMISSIBLE_CONTROLS.to_string(),
    })
}

/// Upper bounds on how far each optimized policy is from the best admissible
/// control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityGaps {
    pub gap_a: f64,
    pub gap_b: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub rho_star: f64,
    pub iota_star: f64,
    pub bound: BoundResult,
}

pub fn optimality_gaps(init: State, p: &EpidemicParams, c: &CostParams) -> Result<OptimalityGaps> {
    let bound = lower_bound(init, p, c)?;
    let (rho_star, a) = optimize_rho(init, p, c, rho_bracket(&init, p)?)?;
    let (iota_star, b) = optimize_iota(init, p, c, iota_bracket(&init, p)?)?;
    Ok(OptimalityGaps {
        gap_a: a.cost.total - bound.c_star,
        gap_b: b.cost.total - bound.c_star,
        cost_a: a.cost.total,
        cost_b: b.cost.total,
        rho_star,
        iota_star,
        bound,
    })
}
