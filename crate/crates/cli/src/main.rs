use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lockdown::control::Terminal;
use lockdown_cli::commands::{self, Axis, PolicyChoice};
use lockdown_cli::output::OutputDir;
use lockdown_cli::{CliError, CliResult, ConfigLayer, RunConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lockdown", version, about = "Lockdown control experiments on a SIR epidemic")]
struct Cli {
    /// Flat TOML file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    params: ConfigLayer,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    None,
    A,
    B,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum TerminalArg {
    Free,
    Tail,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a policy and write its trajectory and summary.
    Simulate {
        #[arg(long, value_enum, default_value = "none")]
        policy: PolicyArg,
        #[arg(long, required_if_eq("policy", "a"))]
        rho: Option<f64>,
        #[arg(long, required_if_eq("policy", "b"))]
        iota: Option<f64>,
        /// Control grid CSV for `--policy file`.
        #[arg(long, required_if_eq("policy", "file"))]
        control: Option<PathBuf>,
        #[arg(long, default_value = "simulate")]
        name: String,
    },
    /// Closed-form and simulated cost of Policy A.
    PolicyA {
        #[arg(long)]
        rho: f64,
    },
    /// Closed-form and simulated cost of Policy B.
    PolicyB {
        #[arg(long)]
        iota: f64,
    },
    /// Best target of Policy A.
    OptimizeRho,
    /// Best target of Policy B.
    OptimizeIota,
    /// Solve the optimal control problem numerically.
    OptimalControl {
        #[arg(long, value_enum, default_value = "tail")]
        terminal: TerminalArg,
        #[arg(long, default_value = "optimal_control")]
        name: String,
    },
    /// Lower bound on the optimal cost and the policies' gaps to it.
    LowerBound,
    /// Finite-horizon optimal control over a kappa or horizon grid.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Policies, numerical optimum and bound over the compare grid.
    Compare,
    /// Data for one of the figures 1 to 5.
    Figures {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        figure: u8,
        /// Also write a gnuplot script.
        #[arg(long)]
        gnuplot: bool,
    },
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    writeln!(std::io::stdout(), "{text}")?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.params)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    match cli.command {
        Command::Simulate { policy, rho, iota, control, name } => {
            let choice = match policy {
                PolicyArg::None => PolicyChoice::None,
                PolicyArg::A => PolicyChoice::A(rho.expect("required by clap")),
                PolicyArg::B => PolicyChoice::B(iota.expect("required by clap")),
                PolicyArg::File => PolicyChoice::File(control.expect("required by clap")),
            };
            let sim = commands::simulate(&cfg, &choice)?;
            commands::write_simulation(&mut out, &name, &sim, &cfg.costs)?;
            print_json(&sim.summary)?;
        }
        Command::PolicyA { rho } => {
            let report = commands::policy_a(&cfg, rho)?;
            out.json("policy_a.json", &report)?;
            print_json(&report)?;
        }
        Command::PolicyB { iota } => {
            let report = commands::policy_b(&cfg, iota)?;
            out.json("policy_b.json", &report)?;
            print_json(&report)?;
        }
        Command::OptimizeRho => {
            let best = commands::optimize_rho_cmd(&cfg)?;
            out.json("optimize_rho.json", &best)?;
            print_json(&best)?;
        }
        Command::OptimizeIota => {
            let best = commands::optimize_iota_cmd(&cfg)?;
            out.json("optimize_iota.json", &best)?;
            print_json(&best)?;
        }
        Command::OptimalControl { terminal, name } => {
            let terminal = match terminal {
                TerminalArg::Free => Terminal::Free,
                TerminalArg::Tail => Terminal::UncontrolledTail,
            };
            let oc = commands::optimal_control(&cfg, terminal)?;
            commands::write_optimal_control(&mut out, &name, &oc, &cfg.costs)?;
            print_json(&lockdown::export::OcSummary::from(&oc))?;
        }
        Command::LowerBound => {
            let report = commands::lower_bound_cmd(&cfg)?;
            out.json("lower_bound.json", &report)?;
            print_json(&report)?;
        }
        Command::Sweep { axis } => {
            let rows = commands::sweep(&cfg, axis)?;
            let name = match axis {
                Axis::Kappa => "sweep_kappa.csv",
                Axis::Horizon => "sweep_horizon.csv",
            };
            out.csv(name, |w| commands::write_sweep_csv(w, &rows))?;
        }
        Command::Compare => {
            let rows = commands::compare(&cfg)?;
            out.csv("compare.csv", |w| commands::write_compare_csv(w, &rows))?;
        }
        Command::Figures { figure, gnuplot } => commands::figure(&cfg, figure, &mut out, gnuplot)?,
    }
    for path in out.written() {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
