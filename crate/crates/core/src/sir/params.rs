use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of `s + i + r` from one accepted for a state.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Transmission, recovery and lockdown parameters of the controlled SIR model.
///
/// Rates are per day. A lockdown level `L` scales transmission by
/// `(1 - theta * L)^2`, with `L` restricted to `[0, l_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub l_max: f64,
}

impl EpidemicParams {
    pub fn new(beta: f64, gamma: f64, theta: f64, l_max: f64) -> Result<Self> {
        let p = Self { beta, gamma, theta, l_max };
        p.validate()?;
        Ok(p)
    }

    /// Fully effective lockdown that may cover the whole population.
    pub fn with_full_lockdown(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(beta, gamma, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta.is_finite()
            && self.beta > 0.0
            && self.gamma.is_finite()
            && self.gamma > 0.0
            && self.theta > 0.0
            && self.theta <= 1.0
            && self.l_max > 0.0
            && self.l_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "epidemic parameters require beta > 0, gamma > 0, 0 < theta <= 1, 0 < l_max <= 1; got {self:?}"
            )))
        }
    }

    /// Susceptible fraction `gamma / beta` below which infections decline
    /// without any lockdown.
    pub fn herd_immunity_threshold(&self) -> f64 {
        self.gamma / self.beta
    }

    /// `beta / gamma`, the reproduction number of a fully susceptible population.
    pub fn basic_reproduction_number(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Whether the model is the `theta = 1`, `l_max = 1` case for which the
    /// closed-form costs are derived.
    pub fn has_ideal_lockdown(&self) -> bool {
        self.theta == 1.0 && self.l_max == 1.0
    }

    /// Transmission multiplier `(1 - theta * L)^2`.
    pub fn transmission_factor(&self, lockdown: f64) -> f64 {
        let x = 1.0 - self.theta * lockdown;
        x * x
    }

    /// Clamps a lockdown level to `[0, l_max]`.
    pub fn clamp_lockdown(&self, lockdown: f64) -> f64 {
        if lockdown.is_nan() {
            0.0
        } else {
            lockdown.clamp(0.0, self.l_max)
        }
    }
}

/// Weights of the running cost `L + kappa * (gamma0 + gamma1 * i) * i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Trade-off between economic and epidemic cost.
    pub kappa: f64,
    /// Baseline mortality rate (1/day).
    pub gamma0: f64,
    /// Congestion mortality coefficient (1/day).
    pub gamma1: f64,
}

impl CostParams {
    pub fn new(kappa: f64, gamma0: f64, gamma1: f64) -> Result<Self> {
        let c = Self { kappa, gamma0, gamma1 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.kappa, self.gamma0, self.gamma1].iter().all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("cost parameters must be finite and non-negative; got {self:?}")))
        }
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    /// Mortality rate `gamma_d(i) = gamma0 + gamma1 * i`.
    pub fn mortality(&self, i: f64) -> f64 {
        self.gamma0 + self.gamma1 * i
    }
}

/// Population fractions at a time `t` (days).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub t: f64,
}

impl State {
    pub fn new(s: f64, i: f64, r: f64, t: f64) -> Result<Self> {
        let st = Self { s, i, r, t };
        st.validate()?;
        Ok(st)
    }

    /// State at `t = 0`.
    pub fn initial(s: f64, i: f64, r: f64) -> Result<Self> {
        Self::new(s, i, r, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(in_unit(self.s) && in_unit(self.i) && in_unit(self.r)) {
            return Err(Error::InvalidInput(format!("fractions must lie in [0, 1]; got {self:?}")));
        }
        if self.mass_defect().abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "s + i + r must equal 1 within {MASS_TOLERANCE}; got {}",
                self.s + self.i + self.r
            )));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::InvalidInput(format!("time must be finite and non-negative; got {}", self.t)));
        }
        Ok(())
    }

    /// `s + i + r - 1`.
    pub fn mass_defect(&self) -> f64 {
        self.s + self.i + self.r - 1.0
    }

    pub fn at_time(self, t: f64) -> Self {
        Self { t, ..self }
    }

    pub(crate) fn from_vec(y: [f64; 3], t: f64) -> Self {
        Self { s: y[0], i: y[1], r: y[2], t }
    }

    pub(crate) fn to_vec(self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }
}

/// Parameter values used throughout the reference experiments: a COVID-19
/// like epidemic with `R0 = 3.6`, time measured in days.
pub mod reference {
    use super::{CostParams, EpidemicParams, State};

    pub const BETA: f64 = 0.2;
    pub const GAMMA: f64 = 1.0 / 18.0;
    pub const GAMMA0: f64 = 5.6e-4;
    pub const GAMMA1: f64 = 5.6e-3;
    pub const S0: f64 = 0.98;
    pub const I0: f64 = 0.01;
    pub const R0: f64 = 0.01;
    pub const DAYS_PER_YEAR: f64 = 365.0;
    pub const KAPPA: f64 = 40.0 * DAYS_PER_YEAR;
    pub const HORIZON_DAYS: f64 = 5.0 * DAYS_PER_YEAR;

    pub fn epidemic() -> EpidemicParams {
        EpidemicParams { beta: BETA, gamma: GAMMA, theta: 1.0, l_max: 1.0 }
    }

    pub fn costs() -> CostParams {
        CostParams { kappa: KAPPA, gamma0: GAMMA0, gamma1: GAMMA1 }
    }

    pub fn initial_state() -> State {
        State { s: S0, i: I0, r: R0, t: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_epidemic_params() {
        assert!(EpidemicParams::new(0.0, 0.1, 1.0, 1.0).is_err());
        assert!(EpidemicParams::new(0.2, -0.1, 1.0, 1.0).is_err());
        assert!(EpidemicParams::new(0.2, 0.1, 0.0, 1.0).is_err());
        assert!(EpidemicParams::new(0.2, 0.1, 1.0, 1.5).is_err());
        assert!(EpidemicParams::new(0.2, 0.1, 0.7, 0.8).is_ok());
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(CostParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(CostParams::new(1.0, f64::NAN, 0.0).is_err());
        assert!(CostParams::new(0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn state_mass_check() {
        assert!(State::initial(0.98, 0.01, 0.01).is_ok());
        assert!(State::initial(0.98, 0.01, 0.02).is_err());
        assert!(State::initial(1.2, -0.1, -0.1).is_err());
        assert!(State::new(0.5, 0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn reference_values_are_valid() {
        reference::epidemic().validate().unwrap();
        reference::costs().validate().unwrap();
        reference::initial_state().validate().unwrap();
        assert!((reference::epidemic().basic_reproduction_number() - 3.6).abs() < 1e-12);
    }
}
