//! Run configuration: built-in defaults, then a flat TOML file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use lockdown::numerics::Bracket;
use lockdown::sir::reference::{self, DAYS_PER_YEAR};
use lockdown::sir::{CostParams, EpidemicParams, State};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Control intervals of every optimal-control solve unless overridden.
pub const DEFAULT_INTERVALS: usize = 1000;

/// One layer of settings. Used both as the config file schema and as the
/// global flags, so every key has a flag of the same name.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigLayer {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lmax: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub i0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub r0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub horizon_days: Option<f64>,
    #[arg(long, global = true)]
    pub n_intervals: Option<usize>,
    /// Comma separated kappa values of the kappa sweep.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub kappa_grid: Option<Vec<f64>>,
    /// Comma separated horizons (days) of the horizon sweep.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub horizon_grid: Option<Vec<f64>>,
    /// Comma separated kappa values of `compare`.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub compare_kappa_grid: Option<Vec<f64>>,
    /// `lo,hi` searched for rho.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub rho_bracket: Option<Vec<f64>>,
    /// `lo,hi` searched for iota.
    #[arg(long, global = true, allow_negative_numbers = true, value_delimiter = ',')]
    pub iota_bracket: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        ConfigLayer { $($field: $top.$field.or($base.$field)),* }
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values of `top` win over values of `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        overlay!(
            self,
            top,
            beta,
            gamma,
            gamma0,
            gamma1,
            kappa,
            theta,
            lmax,
            s0,
            i0,
            r0,
            horizon_days,
            n_intervals,
            kappa_grid,
            horizon_grid,
            compare_kappa_grid,
            rho_bracket,
            iota_bracket,
            output_dir
        )
    }
}

/// Fully resolved and validated settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub epidemic: EpidemicParams,
    pub costs: CostParams,
    pub init: State,
    pub horizon: f64,
    pub n_intervals: usize,
    pub kappa_grid: Vec<f64>,
    pub horizon_grid: Vec<f64>,
    pub compare_kappa_grid: Vec<f64>,
    pub rho_bracket: Option<Bracket>,
    pub iota_bracket: Option<Bracket>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(ConfigLayer::default()).expect("built-in defaults are valid")
    }
}

fn years(multiples: impl IntoIterator<Item = f64>) -> Vec<f64> {
    multiples.into_iter().map(|k| k * DAYS_PER_YEAR).collect()
}

fn bracket(name: &str, v: Option<Vec<f64>>) -> CliResult<Option<Bracket>> {
    match v.as_deref() {
        None => Ok(None),
        Some(&[lo, hi]) => Bracket::new(lo, hi).map(Some).map_err(|e| CliError::Config(format!("{name}: {e}"))),
        Some(other) => Err(CliError::Config(format!("{name} needs two values, got {}", other.len()))),
    }
}

fn grid(name: &str, v: Option<Vec<f64>>, default: Vec<f64>) -> CliResult<Vec<f64>> {
    let g = v.unwrap_or(default);
    if g.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    if let Some(bad) = g.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(CliError::Config(format!("{name} has invalid entry {bad}")));
    }
    Ok(g)
}

impl RunConfig {
    /// Fills unset keys with the reference values and validates the result.
    pub fn resolve(layer: ConfigLayer) -> CliResult<Self> {
        let cfg_err = |e: lockdown::Error| CliError::Config(e.to_string());
        let epidemic = EpidemicParams::new(
            layer.beta.unwrap_or(reference::BETA),
            layer.gamma.unwrap_or(reference::GAMMA),
            layer.theta.unwrap_or(1.0),
            layer.lmax.unwrap_or(1.0),
        )
        .map_err(cfg_err)?;
        let costs = CostParams::new(
            layer.kappa.unwrap_or(reference::KAPPA),
            layer.gamma0.unwrap_or(reference::GAMMA0),
            layer.gamma1.unwrap_or(reference::GAMMA1),
        )
        .map_err(cfg_err)?;
        let init = State::initial(
            layer.s0.unwrap_or(reference::S0),
            layer.i0.unwrap_or(reference::I0),
            layer.r0.unwrap_or(reference::R0),
        )
        .map_err(cfg_err)?;
        let horizon = layer.horizon_days.unwrap_or(reference::HORIZON_DAYS);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(CliError::Config(format!("horizon-days must be positive; got {horizon}")));
        }
        let n_intervals = layer.n_intervals.unwrap_or(DEFAULT_INTERVALS);
        if n_intervals == 0 {
            return Err(CliError::Config("n-intervals must be positive".into()));
        }
        Ok(RunConfig {
            epidemic,
            costs,
            init,
            horizon,
            n_intervals,
            kappa_grid: grid("kappa-grid", layer.kappa_grid, years((1..=100).map(f64::from)))?,
            horizon_grid: grid("horizon-grid", layer.horizon_grid, years((1..=30).map(|k| f64::from(k) / 10.0)))?,
            compare_kappa_grid: grid(
                "compare-kappa-grid",
                layer.compare_kappa_grid,
                years([5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0]),
            )?,
            rho_bracket: bracket("rho-bracket", layer.rho_bracket)?,
            iota_bracket: bracket("iota-bracket", layer.iota_bracket)?,
            output_dir: layer.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    /// Defaults, then the file at `path` if given, then `flags`.
    pub fn load(path: Option<&Path>, flags: ConfigLayer) -> CliResult<Self> {
        let file = match path {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        Self::resolve(file.overlay(flags))
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { costs: self.costs.with_kappa(kappa), ..self.clone() }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_values() {
        let c = RunConfig::default();
        assert_eq!(c.epidemic, reference::epidemic());
        assert_eq!(c.costs, reference::costs());
        assert_eq!(c.init, reference::initial_state());
        assert_eq!(c.horizon, 1825.0);
        assert_eq!(c.kappa_grid.len(), 100);
        assert_eq!(c.kappa_grid[0], 365.0);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigLayer::from_toml("beta = 0.3\nkappa = 100.0\nhorizon-days = 365\n").unwrap();
        let flags = ConfigLayer { kappa: Some(5.0), ..Default::default() };
        let c = RunConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(c.epidemic.beta, 0.3);
        assert_eq!(c.costs.kappa, 5.0);
        assert_eq!(c.horizon, 365.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigLayer::from_toml("bogus = 1").is_err());
        assert!(ConfigLayer::from_toml("beta = \"x\"").is_err());
        let bad = [
            ConfigLayer { s0: Some(0.5), ..Default::default() },
            ConfigLayer { beta: Some(-1.0), ..Default::default() },
            ConfigLayer { kappa_grid: Some(vec![]), ..Default::default() },
            ConfigLayer { rho_bracket: Some(vec![2.0, 1.0]), ..Default::default() },
            ConfigLayer { iota_bracket: Some(vec![0.1]), ..Default::default() },
            ConfigLayer { horizon_days: Some(0.0), ..Default::default() },
        ];
        for layer in bad {
            let e = RunConfig::resolve(layer.clone()).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{layer:?}");
        }
    }
}
