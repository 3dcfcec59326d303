//! Closed-form infinite-horizon costs of the two feedback policies.
//!
//! Both formulas assume a fully effective lockdown (`theta = 1`,
//! `l_max = 1`). Policy A needs `rho > 1` and an initial reproduction
//! number above `rho`; Policy B needs `i0 <= iota < i_max`. Outside these
//! regimes the functions return [`Error::Regime`] and the simulated policies
//! should be used instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{minimize_scalar, solve_scalar_root, Bracket};
use crate::sir::closed_form::infected_squared_between;
use crate::sir::{infected_squared_to_final_size, uncontrolled_peak, CostBreakdown, CostParams, EpidemicParams, State};

/// Initial prevalence below which the Policy A lockdown phase, and with it
/// the economic cost, is treated as infinite.
pub const MIN_INITIAL_INFECTED: f64 = 1e-12;

/// Minimizer tolerance in `rho` and `iota`.
pub const PARAMETER_TOL: f64 = 1e-6;

/// Intermediate quantities of the Policy A cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyACertificate {
    pub rho: f64,
    /// Duration of the lockdown phase.
    pub t_star: f64,
    /// `∫ sqrt(u) dt` over the lockdown phase, `u` the transmission factor.
    pub t1: f64,
    pub s_tstar: f64,
    pub i_tstar: f64,
    /// `r(t*)` from mass conservation.
    pub r_tstar: f64,
    /// `r(t*)` from the lockdown-phase orbit `s + nu i = nu_tilde`.
    pub r_tstar_orbit: f64,
    pub nu: f64,
    pub nu_tilde: f64,
    pub s_inf: f64,
    pub r_inf: f64,
    pub cost: CostBreakdown,
}

/// Intermediate quantities of the Policy B cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyBCertificate {
    pub iota: f64,
    /// Susceptibles when `i` first reaches `iota`.
    pub s_tau1: f64,
    /// Duration of the uncontrolled growth phase.
    pub tau1: f64,
    /// Duration of the holding phase.
    pub delta_tau: f64,
    pub s_inf: f64,
    pub r_inf: f64,
    pub cost: CostBreakdown,
}

fn require_ideal_lockdown(p: &EpidemicParams) -> Result<()> {
    if p.has_ideal_lockdown() {
        Ok(())
    } else {
        Err(Error::Regime("closed-form policy costs need theta = 1 and l_max = 1".into()))
    }
}

fn breakdown(t_econ: f64, r_inf: f64, r0: f64, int_i2: f64, p: &EpidemicParams, c: &CostParams) -> CostBreakdown {
    let int_i = (r_inf - r0) / p.gamma;
    CostBreakdown::new(
        t_econ,
        c.kappa * c.gamma0 * int_i,
        c.kappa * c.gamma1 * int_i2,
        c.gamma0 * int_i + c.gamma1 * int_i2,
    )
}

/// Infinite-horizon cost of Policy A with target `rho`.
pub fn cost_policy_a(rho: f64, init: State, p: &EpidemicParams, c: &CostParams) -> Result<PolicyACertificate> {
    require_ideal_lockdown(p)?;
    let (beta, gamma) = (p.beta, p.gamma);
    let (s0, i0, r0) = (init.s, init.i, init.r);
    if !(rho > 1.0) {
        return Err(Error::Regime(format!("closed-form Policy A cost needs rho > 1; got {rho}")));
    }
    if beta * s0 / gamma <= rho {
        return Err(Error::Regime(format!(
            "no lockdown phase: initial reproduction number {} <= rho = {rho}",
            beta * s0 / gamma
        )));
    }
    if i0 < MIN_INITIAL_INFECTED {
        return Err(Error::Divergent(format!("lockdown phase never ends for i0 = {i0}")));
    }
    let nu = rho / (rho - 1.0);
    let nu_tilde = s0 + nu * i0;
    let s_tstar = gamma * rho / beta;
    let i_tstar = i0 + (s0 - s_tstar) / nu;
    let growth = (rho - 1.0) * gamma;
    let t_star = (i_tstar / i0).ln() / growth;
    let t1 = 2.0 / (rho - 1.0)
        * (rho / (beta * nu_tilde * gamma)).sqrt()
        * ((s0 / nu_tilde).sqrt().atanh() - (s_tstar / nu_tilde).sqrt().atanh());
    let r_tstar = 1.0 - s_tstar - i_tstar;
    let r_tstar_orbit = 1.0 - s_tstar - (nu_tilde - s_tstar) / nu;
    let at_tstar = State { s: s_tstar, i: i_tstar, r: r_tstar, t: t_star };
    let (tail_i2, fs) = infected_squared_to_final_size(&at_tstar, p)?;
    let int_i2 = (i_tstar * i_tstar - i0 * i0) / (2.0 * growth) + tail_i2;
    Ok(PolicyACertificate {
        rho,
        t_star,
        t1,
        s_tstar,
        i_tstar,
        r_tstar,
        r_tstar_orbit,
        nu,
        nu_tilde,
        s_inf: fs.s_inf,
        r_inf: fs.r_inf,
        cost: breakdown(t_star - t1, fs.r_inf, r0, int_i2, p, c),
    })
}

/// Residual of `ln(s / s0) = (beta / gamma)(s - s0 + iota - i0)`, whose root
/// is the susceptible fraction when the uncontrolled epidemic reaches `iota`.
pub fn s_tau1_residual(s: f64, iota: f64, init: &State, p: &EpidemicParams) -> f64 {
    (s / init.s).ln() - p.basic_reproduction_number() * (s - init.s + iota - init.i)
}

/// Infinite-horizon cost of Policy B with target `iota`.
pub fn cost_policy_b(iota: f64, init: State, p: &EpidemicParams, c: &CostParams) -> Result<PolicyBCertificate> {
    require_ideal_lockdown(p)?;
    let (beta, gamma) = (p.beta, p.gamma);
    let herd = p.herd_immunity_threshold();
    let (s0, i0) = (init.s, init.i);
    if s0 <= herd {
        return Err(Error::Regime(format!("herd immunity already reached: s0 = {s0} <= {herd}")));
    }
    if !(iota >= i0) {
        return Err(Error::Regime(format!("closed-form Policy B cost needs iota >= i0; got {iota} < {i0}")));
    }
    let peak = uncontrolled_peak(&init, p);
    if !(iota < peak) {
        return Err(Error::Regime(format!("iota = {iota} is never reached; the uncontrolled peak is {peak}")));
    }
    // The residual decreases on (herd, s0), is negative at s0 and positive at herd.
    let s_tau1 = if iota == i0 {
        s0
    } else {
        solve_scalar_root(|s| s_tau1_residual(s, iota, &init, p), Bracket::new(herd, s0)?, 1e-15)?
    };
    let delta_tau = (s_tau1 - herd) / (gamma * iota);
    let tau1 = growth_phase_duration(&init, s_tau1, p);

    let hold_start_r = 1.0 - s_tau1 - iota;
    let release = State { s: herd, i: iota, r: 1.0 - herd - iota, t: 0.0 };
    let phase_one = infected_squared_between(&init, s_tau1, hold_start_r, p);
    let (phase_three, fs) = infected_squared_to_final_size(&release, p)?;
    let int_i2 = phase_one + delta_tau * iota * iota + phase_three;
    let econ = ((s_tau1 / gamma).sqrt() - (1.0 / beta).sqrt()).powi(2) / iota;
    Ok(PolicyBCertificate {
        iota,
        s_tau1,
        tau1,
        delta_tau,
        s_inf: fs.s_inf,
        r_inf: fs.r_inf,
        cost: breakdown(econ, fs.r_inf, init.r, int_i2, p, c),
    })
}

/// Time for the uncontrolled epidemic to move from `init.s` down to `s_b`,
/// `∫ ds / (beta s i(s))` along the orbit, by Gauss–Legendre quadrature.
fn growth_phase_duration(init: &State, s_b: f64, p: &EpidemicParams) -> f64 {
    if s_b >= init.s {
        return 0.0;
    }
    let q = init.s + init.i - p.herd_immunity_threshold() * init.s.ln();
    let rate = |s: f64| 1.0 / (p.beta * s * (q - s + p.herd_immunity_threshold() * s.ln()));
    // i(s) stays away from zero between s_b and s0, so the integrand is smooth.
    let pieces = 64;
    let h = (init.s - s_b) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let mid = s_b + (k as f64 + 0.5) * h;
        for (x, w) in GAUSS_5 {
            total += w * 0.5 * h * rate(mid + 0.5 * h * x);
        }
    }
    total
}

const GAUSS_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Widest admissible `rho` interval, `(1, beta s0 / gamma)` with a small
/// margin at both ends.
pub fn rho_bracket(init: &State, p: &EpidemicParams) -> Result<Bracket> {
    let hi = p.beta * init.s / p.gamma;
    Bracket::new(1.0 + 1e-6, hi * (1.0 - 1e-9))
}

/// Widest admissible `iota` interval, `[i0, i_max)`.
pub fn iota_bracket(init: &State, p: &EpidemicParams) -> Result<Bracket> {
    let peak = uncontrolled_peak(init, p);
    Bracket::new(init.i, init.i + (peak - init.i) * (1.0 - 1e-9))
}

/// Minimizes the Policy A cost over `rho` in `bracket`.
pub fn optimize_rho(
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    bracket: Bracket,
) -> Result<(f64, PolicyACertificate)> {
    let m = minimize_scalar(
        |rho| cost_policy_a(rho, init, p, c).map_or(f64::NAN, |cert| cert.cost.total),
        bracket,
        PARAMETER_TOL,
    );
    Ok((m.x, cost_policy_a(m.x, init, p, c)?))
}

/// Minimizes the Policy B cost over `iota` in `bracket`.
pub fn optimize_iota(
    init: State,
    p: &EpidemicParams,
    c: &CostParams,
    bracket: Bracket,
) -> Result<(f64, PolicyBCertificate)> {
    let m = minimize_scalar(
        |iota| cost_policy_b(iota, init, p, c).map_or(f64::NAN, |cert| cert.cost.total),
        bracket,
        PARAMETER_TOL,
    );
    Ok((m.x, cost_policy_b(m.x, init, p, c)?))
}
