//! Right-hand side of the controlled SIR model and its pointwise invariants.

use serde::{Deserialize, Serialize};

use super::params::{EpidemicParams, State};
use crate::error::{Error, Result};

/// Slack allowed on a lockdown level before it is reported as out of range.
pub const LOCKDOWN_SLACK: f64 = 1e-12;

/// Time derivatives of `(s, i, r)` in 1/day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub ds: f64,
    pub di: f64,
    pub dr: f64,
}

/// Evaluates the controlled SIR vector field at `state` under lockdown `lockdown`.
pub fn derivative(state: &State, lockdown: f64, p: &EpidemicParams) -> Result<Rates> {
    if !(-LOCKDOWN_SLACK..=p.l_max + LOCKDOWN_SLACK).contains(&lockdown) {
        return Err(Error::Domain(format!("lockdown {lockdown} outside [0, {}]", p.l_max)));
    }
    let y = rhs([state.s, state.i, state.r], p.transmission_factor(p.clamp_lockdown(lockdown)), p);
    Ok(Rates { ds: y[0], di: y[1], dr: y[2] })
}

/// Vector field for a given transmission factor `u = (1 - theta L)^2`.
#[inline]
pub(crate) fn rhs(y: [f64; 3], u: f64, p: &EpidemicParams) -> [f64; 3] {
    let infection = p.beta * u * y[0] * y[1];
    let recovery = p.gamma * y[1];
    [-infection, infection - recovery, recovery]
}

/// Uncontrolled and controlled reproduction numbers at a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionNumbers {
    /// `beta s / gamma`.
    pub uncontrolled: f64,
    /// `beta (1 - theta L)^2 s / gamma`.
    pub controlled: f64,
}

pub fn reproduction_numbers(state: &State, lockdown: f64, p: &EpidemicParams) -> ReproductionNumbers {
    let uncontrolled = p.basic_reproduction_number() * state.s;
    ReproductionNumbers { uncontrolled, controlled: uncontrolled * p.transmission_factor(p.clamp_lockdown(lockdown)) }
}

/// `s + i - (gamma / beta) ln s`, which is constant along uncontrolled orbits.
pub fn conserved_quantity(state: &State, p: &EpidemicParams) -> Result<f64> {
    if !(state.s > 0.0) {
        return Err(Error::Domain(format!("conserved quantity needs s > 0, got {}", state.s)));
    }
    Ok(conserved_quantity_raw(state.s, state.i, p))
}

#[inline]
pub(crate) fn conserved_quantity_raw(s: f64, i: f64, p: &EpidemicParams) -> f64 {
    s + i - p.herd_immunity_threshold() * s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sir::params::reference;

    fn st(s: f64, i: f64, r: f64) -> State {
        State { s, i, r, t: 0.0 }
    }

    #[test]
    fn no_infected_no_dynamics() {
        let d = derivative(&st(0.98, 0.0, 0.02), 0.0, &reference::epidemic()).unwrap();
        assert_eq!((d.ds, d.di, d.dr), (0.0, 0.0, 0.0));
    }

    #[test]
    fn full_lockdown_stops_transmission() {
        let p = reference::epidemic();
        let d = derivative(&st(0.98, 0.01, 0.01), 1.0, &p).unwrap();
        assert_eq!(d.ds, 0.0);
        assert!((d.di + p.gamma * 0.01).abs() < 1e-18);
        assert!((d.dr - p.gamma * 0.01).abs() < 1e-18);
    }

    #[test]
    fn uncontrolled_rate_matches_direct_evaluation() {
        let d = derivative(&st(0.98, 0.01, 0.01), 0.0, &reference::epidemic()).unwrap();
        // -0.2 * 0.98 * 0.01
        assert!((d.ds + 1.96e-3).abs() < 1e-15);
        assert!((d.ds + d.di + d.dr).abs() < 1e-18);
    }

    #[test]
    fn lockdown_out_of_range_is_rejected() {
        let p = EpidemicParams::new(0.2, 0.1, 1.0, 0.6).unwrap();
        assert!(derivative(&st(0.9, 0.1, 0.0), 0.7, &p).is_err());
        assert!(derivative(&st(0.9, 0.1, 0.0), -0.1, &p).is_err());
        assert!(derivative(&st(0.9, 0.1, 0.0), 0.6 + 1e-13, &p).is_ok());
    }

    #[test]
    fn reproduction_numbers_cases() {
        let p = reference::epidemic();
        let r = reproduction_numbers(&st(p.gamma / p.beta, 0.0, 1.0 - p.gamma / p.beta), 0.0, &p);
        assert!((r.uncontrolled - 1.0).abs() < 1e-15);

        let r = reproduction_numbers(&st(0.98, 0.01, 0.01), 0.0, &p);
        assert!((r.uncontrolled - 3.528).abs() < 1e-12);
        assert_eq!(r.uncontrolled, r.controlled);

        let r = reproduction_numbers(&st(0.98, 0.01, 0.01), 1.0, &p);
        assert_eq!(r.controlled, 0.0);
    }

    #[test]
    fn conserved_quantity_values() {
        let p = reference::epidemic();
        assert!((conserved_quantity(&st(1.0, 0.0, 0.0), &p).unwrap() - 1.0).abs() < 1e-15);
        let v = conserved_quantity(&reference::initial_state(), &p).unwrap();
        let expected = 0.99 - (1.0 / 3.6) * 0.98f64.ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.99561).abs() < 1e-5);
        assert!(conserved_quantity(&st(0.0, 0.5, 0.5), &p).is_err());
    }
}
