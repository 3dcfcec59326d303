//! CSV and JSON exports.
//!
//! Numbers in CSV files carry 12 significant digits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bound::BoundResult;
use crate::control::{OCResult, Regime, Terminal};
use crate::error::{Error, Result};
use crate::policies::{PhaseSpan, PolicyRun};
use crate::sir::{cumulative_cost, reproduction_numbers, CostBreakdown, CostParams, PiecewiseConstant, Trajectory};

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Shortest of fixed or scientific notation with [`SIGNIFICANT_DIGITS`]
/// digits, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One row per sample: `t,s,i,r,L,R,R_L,cost_cum`.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory, c: &CostParams) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "s", "i", "r", "L", "R", "R_L", "cost_cum"])?;
    let cum = cumulative_cost(traj, c);
    for (smp, total) in traj.samples().iter().zip(cum) {
        let st = smp.state;
        let rn = reproduction_numbers(&st, smp.lockdown, traj.params());
        let row = [st.t, st.s, st.i, st.r, smp.lockdown, rn.uncontrolled, rn.controlled, total];
        out.write_record(row.iter().map(|v| format_sig(*v)))?;
    }
    out.flush()?;
    Ok(())
}

/// One row per interval: `t_start,t_end,L`.
pub fn write_control_grid_csv<W: Write>(w: W, grid: &PiecewiseConstant) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_start", "t_end", "L"])?;
    for (k, v) in grid.values.iter().enumerate() {
        out.write_record([format_sig(grid.boundary(k)), format_sig(grid.boundary(k + 1)), format_sig(*v)])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct GridRow {
    t_start: f64,
    t_end: f64,
    #[serde(rename = "L")]
    l: f64,
}

/// Reads a control grid written by [`write_control_grid_csv`]. Intervals
/// must be contiguous and of equal length.
pub fn read_control_grid_csv<R: Read>(r: R) -> Result<PiecewiseConstant> {
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(r).deserialize() {
        let row: GridRow = rec?;
        rows.push(row);
    }
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Err(Error::InvalidInput("control grid file has no rows".into()));
    };
    let grid = PiecewiseConstant::new(first.t_start, last.t_end, rows.iter().map(|r| r.l).collect())?;
    for (k, row) in rows.iter().enumerate() {
        let tol = 1e-9 * (1.0 + row.t_end.abs());
        if (row.t_start - grid.boundary(k)).abs() > tol || (row.t_end - grid.boundary(k + 1)).abs() > tol {
            return Err(Error::InvalidInput(format!("control grid row {k} is not on a uniform grid")));
        }
    }
    Ok(grid)
}

/// JSON summary of a simulated policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub parameter: f64,
    pub phase_times: Vec<PhaseSpan>,
    pub cost: CostBreakdown,
    pub saturated: bool,
    /// Horizon cost plus the uncontrolled tail, when the policy ends uncontrolled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_with_tail: Option<CostBreakdown>,
}

impl PolicySummary {
    pub fn new(run: &PolicyRun, c: &CostParams) -> Self {
        Self {
            parameter: run.parameter,
            phase_times: run.phase_times.clone(),
            cost: run.cost,
            saturated: run.saturated,
            cost_with_tail: run.cost_with_tail(c).ok(),
        }
    }
}

/// JSON summary of a numerical optimal control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSummary {
    pub cost: CostBreakdown,
    pub regime: Regime,
    pub converged: bool,
    pub terminal: Terminal,
    pub n_intervals: usize,
    pub horizon: f64,
    pub starts_tried: usize,
    pub best_start: String,
    pub iterations: usize,
    pub force_correlation: f64,
}

impl From<&OCResult> for OcSummary {
    fn from(r: &OCResult) -> Self {
        Self {
            cost: r.cost,
            regime: r.regime,
            converged: r.converged,
            terminal: r.terminal,
            n_intervals: r.control_grid.values.len(),
            horizon: r.control_grid.t_end() - r.control_grid.t_start,
            starts_tried: r.starts_tried,
            best_start: r.best_start.clone(),
            iterations: r.iterations,
            force_correlation: r.force_correlation,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn bound_json(b: &BoundResult) -> Result<String> {
    to_json(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sir::{integrate, reference, ConstantLockdown};

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(0.98), "0.98");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(14600.0), "14600");
        assert_eq!(format_sig(1.23456789012345e-9), "1.23456789012e-9");
        assert_eq!(format_sig(-2.5e15), "-2.5e15");
        let x = 0.123456789012345;
        assert!((format_sig(x).parse::<f64>().unwrap() - x).abs() <= 1e-11 * x);
    }

    #[test]
    fn trajectory_csv_schema() {
        let p = reference::epidemic();
        let traj = integrate(&p, &ConstantLockdown(0.3), reference::initial_state(), 20.0, 1e-9).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj, &reference::costs()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,s,i,r,L,R,R_L,cost_cum");
        assert_eq!(lines.count(), traj.len());
    }

    #[test]
    fn control_grid_round_trip() {
        let grid = PiecewiseConstant::new(0.0, 547.5, (0..50).map(|k| (k as f64 / 49.0).powi(2)).collect()).unwrap();
        let mut buf = Vec::new();
        write_control_grid_csv(&mut buf, &grid).unwrap();
        let back = read_control_grid_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values.len(), 50);
        for (a, b) in back.values.iter().zip(&grid.values) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
        }
        assert!((back.interval - grid.interval).abs() < 1e-12);
    }

    #[test]
    fn rejects_irregular_grid() {
        let text = "t_start,t_end,L\n0,1,0.5\n1,3,0.2\n";
        assert!(read_control_grid_csv(text.as_bytes()).is_err());
        assert!(read_control_grid_csv("t_start,t_end,L\n".as_bytes()).is_err());
    }
}
