//! The experiments behind each subcommand. Every function returns its data
//! so it can be checked directly; the `write_*` helpers put it on disk.

use std::fs::File;

use lockdown::analytic::{
    cost_policy_a, cost_policy_b, iota_bracket, optimize_iota, optimize_rho, rho_bracket, PolicyACertificate,
    PolicyBCertificate,
};
use lockdown::bound::{lower_bound, optimality_gaps, BoundResult, OptimalityGaps};
use lockdown::control::{classify_regime, solve_optimal_control, OCResult, OcSettings, Regime, Terminal, WarmStart};
use lockdown::export::{format_sig, read_control_grid_csv, write_control_grid_csv, write_trajectory_csv, OcSummary};
use lockdown::numerics::Bracket;
use lockdown::policies::{optimize_rho_simulated, simulate_policy_a, simulate_policy_b, PhaseSpan, PolicyRun};
use lockdown::sir::reference::DAYS_PER_YEAR;
use lockdown::sir::{
    integrate, trajectory_cost, uncontrolled_tail_cost, CostBreakdown, CostParams, NoLockdown, State, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{gnuplot_script, Curve, OutputDir, Panel};

/// Tolerance of plain simulations and control-grid replays.
pub const SIMULATION_RTOL: f64 = 1e-10;

/// Horizon of the proxy for infinite-horizon comparisons.
pub const INFINITE_HORIZON_PROXY: f64 = 5.0 * DAYS_PER_YEAR;

/// Economic loss of the horizon sweep is reported per 1.5 years.
pub const HORIZON_SWEEP_NORMALIZATION: f64 = 1.5 * DAYS_PER_YEAR;

/// Lockdown rule of `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyChoice {
    None,
    A(f64),
    B(f64),
    /// A control grid CSV.
    File(std::path::PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub policy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    pub horizon: f64,
    pub phase_times: Vec<PhaseSpan>,
    pub cost: CostBreakdown,
    /// Cost with the uncontrolled continuation after the horizon added.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_with_tail: Option<CostBreakdown>,
    pub saturated: bool,
    pub regime: Regime,
    pub peak_infected: f64,
    pub final_state: State,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub summary: SimulationSummary,
}

fn summarize_run(run: PolicyRun, label: &str, cfg: &RunConfig) -> Simulation {
    let summary = SimulationSummary {
        policy: label.into(),
        parameter: Some(run.parameter),
        horizon: run.trajectory.end_time() - run.trajectory.start_time(),
        phase_times: run.phase_times.clone(),
        cost: run.cost,
        cost_with_tail: run.cost_with_tail(&cfg.costs).ok(),
        saturated: run.saturated,
        regime: classify_regime(&run.trajectory, run.trajectory.params()),
        peak_infected: run.trajectory.peak_infected(),
        final_state: run.trajectory.final_state(),
    };
    Simulation { trajectory: run.trajectory, summary }
}

fn summarize_free(trajectory: Trajectory, label: &str, cfg: &RunConfig) -> CliResult<Simulation> {
    let cost = trajectory_cost(&trajectory, &cfg.costs);
    let tail = uncontrolled_tail_cost(&trajectory.final_state(), &cfg.epidemic, &cfg.costs)?;
    let summary = SimulationSummary {
        policy: label.into(),
        parameter: None,
        horizon: trajectory.end_time() - trajectory.start_time(),
        phase_times: Vec::new(),
        cost,
        cost_with_tail: Some(cost + tail),
        saturated: false,
        regime: classify_regime(&trajectory, &cfg.epidemic),
        peak_infected: trajectory.peak_infected(),
        final_state: trajectory.final_state(),
    };
    Ok(Simulation { trajectory, summary })
}

/// Simulates `choice` over the configured horizon, or over the grid's span
/// for a control file.
pub fn simulate(cfg: &RunConfig, choice: &PolicyChoice) -> CliResult<Simulation> {
    let t_end = cfg.init.t + cfg.horizon;
    match choice {
        PolicyChoice::None => {
            let traj = integrate(&cfg.epidemic, &NoLockdown, cfg.init, t_end, SIMULATION_RTOL)?;
            summarize_free(traj, "none", cfg)
        }
        PolicyChoice::A(rho) => {
            let run = simulate_policy_a(*rho, cfg.init, &cfg.epidemic, &cfg.costs, t_end)?;
            Ok(summarize_run(run, "a", cfg))
        }
        PolicyChoice::B(iota) => {
            let run = simulate_policy_b(*iota, cfg.init, &cfg.epidemic, &cfg.costs, t_end)?;
            Ok(summarize_run(run, "b", cfg))
        }
        PolicyChoice::File(path) => {
            let file =
                File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let grid = read_control_grid_csv(file)?;
            if let Some(bad) = grid.values.iter().find(|v| !(0.0..=cfg.epidemic.l_max).contains(*v)) {
                return Err(CliError::Config(format!("control level {bad} outside [0, {}]", cfg.epidemic.l_max)));
            }
            let init = cfg.init.at_time(grid.t_start);
            let traj = integrate(&cfg.epidemic, &grid, init, grid.t_end(), SIMULATION_RTOL)?;
            summarize_free(traj, "file", cfg)
        }
    }
}

pub fn write_simulation(out: &mut OutputDir, name: &str, sim: &Simulation, c: &CostParams) -> CliResult<()> {
    out.csv(&format!("{name}.csv"), |w| write_trajectory_csv(w, &sim.trajectory, c))?;
    out.json(&format!("{name}.json"), &sim.summary)
}

/// Closed-form Policy A cost next to the simulated one.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyAReport {
    pub analytic: PolicyACertificate,
    pub simulated: SimulationSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyBReport {
    pub analytic: PolicyBCertificate,
    pub simulated: SimulationSummary,
}

pub fn policy_a(cfg: &RunConfig, rho: f64) -> CliResult<PolicyAReport> {
    let analytic = cost_policy_a(rho, cfg.init, &cfg.epidemic, &cfg.costs)?;
    let simulated = simulate(cfg, &PolicyChoice::A(rho))?.summary;
    Ok(PolicyAReport { analytic, simulated })
}

pub fn policy_b(cfg: &RunConfig, iota: f64) -> CliResult<PolicyBReport> {
    let analytic = cost_policy_b(iota, cfg.init, &cfg.epidemic, &cfg.costs)?;
    let simulated = simulate(cfg, &PolicyChoice::B(iota))?.summary;
    Ok(PolicyBReport { analytic, simulated })
}

fn rho_search(cfg: &RunConfig) -> CliResult<Bracket> {
    Ok(cfg.rho_bracket.map_or_else(|| rho_bracket(&cfg.init, &cfg.epidemic), Ok)?)
}

fn iota_search(cfg: &RunConfig) -> CliResult<Bracket> {
    Ok(cfg.iota_bracket.map_or_else(|| iota_bracket(&cfg.init, &cfg.epidemic), Ok)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoOptimum {
    pub rho_star: f64,
    pub certificate: PolicyACertificate,
    /// Minimizer of the simulated cost over the configured horizon alone.
    pub rho_star_simulated: f64,
    pub cost_simulated: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IotaOptimum {
    pub iota_star: f64,
    pub certificate: PolicyBCertificate,
}

pub fn optimize_rho_cmd(cfg: &RunConfig) -> CliResult<RhoOptimum> {
    let b = rho_search(cfg)?;
    let (rho_star, certificate) = optimize_rho(cfg.init, &cfg.epidemic, &cfg.costs, b)?;
    let sim = optimize_rho_simulated(cfg.init, &cfg.epidemic, &cfg.costs, cfg.horizon, b, 1e-6)?;
    Ok(RhoOptimum { rho_star, certificate, rho_star_simulated: sim.x, cost_simulated: sim.f })
}

pub fn optimize_iota_cmd(cfg: &RunConfig) -> CliResult<IotaOptimum> {
    let (iota_star, certificate) = optimize_iota(cfg.init, &cfg.epidemic, &cfg.costs, iota_search(cfg)?)?;
    Ok(IotaOptimum { iota_star, certificate })
}

pub fn optimal_control(cfg: &RunConfig, terminal: Terminal) -> CliResult<OCResult> {
    let settings = OcSettings::new(cfg.horizon, cfg.n_intervals, terminal);
    Ok(solve_optimal_control(cfg.init, &cfg.epidemic, &cfg.costs, &settings, &WarmStart::defaults())?)
}

pub fn write_optimal_control(out: &mut OutputDir, name: &str, oc: &OCResult, c: &CostParams) -> CliResult<()> {
    out.csv(&format!("{name}_control.csv"), |w| write_control_grid_csv(w, &oc.control_grid))?;
    out.csv(&format!("{name}_trajectory.csv"), |w| write_trajectory_csv(w, &oc.trajectory, c))?;
    out.json(&format!("{name}.json"), &OcSummary::from(oc))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound: BoundResult,
    /// Absent when one of the policies has no optimum for these parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaps: Option<OptimalityGaps>,
}

pub fn lower_bound_cmd(cfg: &RunConfig) -> CliResult<BoundReport> {
    let bound = lower_bound(cfg.init, &cfg.epidemic, &cfg.costs)?;
    let gaps = optimality_gaps(cfg.init, &cfg.epidemic, &cfg.costs).ok();
    Ok(BoundReport { bound, gaps })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Kappa,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub econ_loss: f64,
    pub deaths: f64,
    pub regime: Regime,
    pub total_cost: f64,
    pub converged: bool,
}

/// Finite-horizon optimal control at every grid point of `axis`. Points run in
/// parallel; rows come back in grid order.
pub fn sweep(cfg: &RunConfig, axis: Axis) -> CliResult<Vec<SweepRow>> {
    let grid = match axis {
        Axis::Kappa => &cfg.kappa_grid,
        Axis::Horizon => &cfg.horizon_grid,
    };
    grid.par_iter()
        .map(|&v| {
            let (point, norm) = match axis {
                Axis::Kappa => (cfg.with_kappa(v), cfg.horizon),
                Axis::Horizon => (cfg.with_horizon(v), HORIZON_SWEEP_NORMALIZATION),
            };
            let oc = optimal_control(&point, Terminal::Free)?;
            Ok(SweepRow {
                axis_value: v,
                econ_loss: oc.cost.normalized_economic(norm),
                deaths: oc.cost.deaths,
                regime: oc.regime,
                total_cost: oc.cost.total,
                converged: oc.converged,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, rows: &[SweepRow]) -> lockdown::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["axis_value", "econ_loss", "deaths", "regime", "total_cost", "converged"])?;
    for r in rows {
        out.write_record([
            format_sig(r.axis_value),
            format_sig(r.econ_loss),
            format_sig(r.deaths),
            r.regime.to_string(),
            format_sig(r.total_cost),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub kappa: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_oc: f64,
    pub c_star: f64,
    pub rho_star: f64,
    pub iota_star: f64,
}

/// Infinite-horizon costs of both policies, the numerical optimum and the
/// lower bound for each kappa of the compare grid.
pub fn compare(cfg: &RunConfig) -> CliResult<Vec<CompareRow>> {
    if cfg.horizon < INFINITE_HORIZON_PROXY {
        return Err(CliError::Config(format!(
            "compare needs horizon-days >= {INFINITE_HORIZON_PROXY}; got {}",
            cfg.horizon
        )));
    }
    cfg.compare_kappa_grid
        .par_iter()
        .map(|&kappa| {
            let point = cfg.with_kappa(kappa);
            let (p, c, init) = (&point.epidemic, &point.costs, point.init);
            let (rho_star, a) = optimize_rho(init, p, c, rho_search(&point)?)?;
            let (iota_star, b) = optimize_iota(init, p, c, iota_search(&point)?)?;
            let bound = lower_bound(init, p, c)?;
            let oc = optimal_control(&point, Terminal::UncontrolledTail)?;
            Ok(CompareRow {
                kappa,
                cost_a: a.cost.total,
                cost_b: b.cost.total,
                cost_oc: oc.cost.total,
                c_star: bound.c_star,
                rho_star,
                iota_star,
            })
        })
        .collect()
}

pub fn write_compare_csv<W: std::io::Write>(w: W, rows: &[CompareRow]) -> lockdown::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kappa", "cost_a", "cost_b", "cost_oc", "c_star", "rho_star", "iota_star"])?;
    for r in rows {
        let vals = [r.kappa, r.cost_a, r.cost_b, r.cost_oc, r.c_star, r.rho_star, r.iota_star];
        out.write_record(vals.iter().map(|v| format_sig(*v)))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScanRow {
    parameter: f64,
    cost_analytic: f64,
    cost_simulated: f64,
}

const SCAN_POINTS: usize = 60;

fn write_scan_csv<W: std::io::Write>(w: W, name: &str, rows: &[ScanRow]) -> lockdown::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([name, "cost_analytic", "cost_simulated"])?;
    for r in rows {
        out.write_record([r.parameter, r.cost_analytic, r.cost_simulated].iter().map(|v| format_sig(*v)))?;
    }
    out.flush()?;
    Ok(())
}

fn scan<F, G>(b: Bracket, analytic: F, simulated: G) -> Vec<ScanRow>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    b.grid(SCAN_POINTS)
        .into_par_iter()
        .map(|x| ScanRow { parameter: x, cost_analytic: analytic(x), cost_simulated: simulated(x) })
        .collect()
}

fn tail_total(sim: CliResult<Simulation>) -> f64 {
    sim.ok().and_then(|s| s.summary.cost_with_tail).map_or(f64::NAN, |c| c.total)
}

/// Writes the data of figure `n` (1 to 5) and, if asked, a gnuplot script.
pub fn figure(cfg: &RunConfig, n: u8, out: &mut OutputDir, gnuplot: bool) -> CliResult<()> {
    let traj_panel = |name: &str, file: &str| {
        Panel::lines(
            name,
            "t (days)",
            "fraction",
            vec![
                Curve::new(file, 1, 2, "s"),
                Curve::new(file, 1, 3, "i"),
                Curve::new(file, 1, 5, "L"),
                Curve::new(file, 1, 7, "R_L"),
            ],
        )
    };
    let panels = match n {
        1 => {
            let sim = simulate(cfg, &PolicyChoice::A(1.2))?;
            write_simulation(out, "fig1_dynamics", &sim, &cfg.costs)?;
            let best = optimize_rho_cmd(cfg)?;
            out.json("fig1_optimum.json", &best)?;
            let rows = scan(
                rho_search(cfg)?,
                |rho| cost_policy_a(rho, cfg.init, &cfg.epidemic, &cfg.costs).map_or(f64::NAN, |c| c.cost.total),
                |rho| tail_total(simulate(cfg, &PolicyChoice::A(rho))),
            );
            out.csv("fig1_cost_vs_rho.csv", |w| write_scan_csv(w, "rho", &rows))?;
            vec![
                traj_panel("fig1_dynamics", "fig1_dynamics.csv"),
                Panel::lines(
                    "fig1_cost_vs_rho",
                    "rho",
                    "total cost",
                    vec![
                        Curve::new("fig1_cost_vs_rho.csv", 1, 2, "analytic"),
                        Curve::new("fig1_cost_vs_rho.csv", 1, 3, "simulated"),
                    ],
                ),
            ]
        }
        2 => {
            let sim = simulate(cfg, &PolicyChoice::B(0.06))?;
            write_simulation(out, "fig2_dynamics", &sim, &cfg.costs)?;
            let best = optimize_iota_cmd(cfg)?;
            out.json("fig2_optimum.json", &best)?;
            let rows = scan(
                iota_search(cfg)?,
                |iota| cost_policy_b(iota, cfg.init, &cfg.epidemic, &cfg.costs).map_or(f64::NAN, |c| c.cost.total),
                |iota| tail_total(simulate(cfg, &PolicyChoice::B(iota))),
            );
            out.csv("fig2_cost_vs_iota.csv", |w| write_scan_csv(w, "iota", &rows))?;
            vec![
                traj_panel("fig2_dynamics", "fig2_dynamics.csv"),
                Panel::lines(
                    "fig2_cost_vs_iota",
                    "iota",
                    "total cost",
                    vec![
                        Curve::new("fig2_cost_vs_iota.csv", 1, 2, "analytic"),
                        Curve::new("fig2_cost_vs_iota.csv", 1, 3, "simulated"),
                    ],
                ),
            ]
        }
        3 => {
            let by_kappa = sweep(&cfg.with_horizon(HORIZON_SWEEP_NORMALIZATION), Axis::Kappa)?;
            out.csv("fig3_kappa.csv", |w| write_sweep_csv(w, &by_kappa))?;
            let by_horizon = sweep(&cfg.with_kappa(20.0 * DAYS_PER_YEAR), Axis::Horizon)?;
            out.csv("fig3_horizon.csv", |w| write_sweep_csv(w, &by_horizon))?;
            vec![
                Panel::lines(
                    "fig3_kappa",
                    "deaths",
                    "economic loss",
                    vec![Curve::new("fig3_kappa.csv", 3, 2, "kappa")],
                )
                .with_points(),
                Panel::lines(
                    "fig3_horizon",
                    "deaths",
                    "economic loss",
                    vec![Curve::new("fig3_horizon.csv", 3, 2, "horizon")],
                )
                .with_points(),
            ]
        }
        4 => {
            let mut panels = Vec::new();
            let mut summary = Vec::new();
            for years in [1.0, 3.0] {
                let point = cfg.with_horizon(years * DAYS_PER_YEAR);
                let tag = format!("fig4_T{years}y");
                let oc = optimal_control(&point, Terminal::Free)?;
                write_optimal_control(out, &format!("{tag}_oc"), &oc, &point.costs)?;
                let rho = optimize_rho(point.init, &point.epidemic, &point.costs, rho_search(&point)?)?.0;
                let iota = optimize_iota(point.init, &point.epidemic, &point.costs, iota_search(&point)?)?.0;
                let a = simulate(&point, &PolicyChoice::A(rho))?;
                let b = simulate(&point, &PolicyChoice::B(iota))?;
                write_simulation(out, &format!("{tag}_policy_a"), &a, &point.costs)?;
                write_simulation(out, &format!("{tag}_policy_b"), &b, &point.costs)?;
                summary.push(serde_json::json!({
                    "horizon": point.horizon,
                    "kappa": point.costs.kappa,
                    "oc": OcSummary::from(&oc),
                    "policy_a": a.summary,
                    "policy_b": b.summary,
                }));
                let curves = |col: usize| {
                    vec![
                        Curve::new(&format!("{tag}_oc_trajectory.csv"), 1, col, "optimal"),
                        Curve::new(&format!("{tag}_policy_a.csv"), 1, col, "policy A"),
                        Curve::new(&format!("{tag}_policy_b.csv"), 1, col, "policy B"),
                    ]
                };
                panels.push(Panel::lines(&format!("{tag}_infected"), "t (days)", "i", curves(3)));
                panels.push(Panel::lines(&format!("{tag}_lockdown"), "t (days)", "L", curves(5)));
            }
            out.json("fig4_summary.json", &summary)?;
            panels
        }
        5 => {
            let rows = compare(&cfg.with_horizon(cfg.horizon.max(INFINITE_HORIZON_PROXY)))?;
            out.csv("fig5_compare.csv", |w| write_compare_csv(w, &rows))?;
            let f = "fig5_compare.csv";
            vec![Panel::lines(
                "fig5_compare",
                "kappa",
                "total cost",
                vec![
                    Curve::new(f, 1, 2, "policy A"),
                    Curve::new(f, 1, 3, "policy B"),
                    Curve::new(f, 1, 4, "optimal (numerical)"),
                    Curve::new(f, 1, 5, "lower bound"),
                ],
            )
            .with_points()]
        }
        other => return Err(CliError::Config(format!("no figure {other}; expected 1 to 5"))),
    };
    if gnuplot {
        out.text(&format!("fig{n}.gp"), &gnuplot_script(&panels))?;
    }
    Ok(())
}
