//! Acceptance suite. Runs without the libtest harness so that every check
//! prints exactly one PASS/FAIL line; the process fails if any check does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lockdown::analytic::{cost_policy_a, cost_policy_b, iota_bracket, optimize_iota, optimize_rho, rho_bracket};
use lockdown::bound::{epsilon_constant, lower_bound};
use lockdown::control::{cost_gradient, DiscreteModel, Regime, Terminal};
use lockdown::numerics::{minimize_scalar, Bracket};
use lockdown::policies::{optimize_rho_simulated, simulate_policy_a, simulate_policy_b, Phase};
use lockdown::sir::cost::simpson;
use lockdown::sir::reference::{self, DAYS_PER_YEAR};
use lockdown::sir::{
    conserved_quantity, integral_infected_squared_uncontrolled, integrate, trajectory_cost, uncontrolled_peak,
    uncontrolled_tail_cost, ControlSignal, EpidemicParams, NoLockdown, PiecewiseConstant, State,
};
use lockdown_cli::commands::{compare, optimal_control, sweep, Axis};
use lockdown_cli::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUADRATIC_INTEGRAL_TOL: f64 = 1e-6;
const POLICY_COST_TOL: f64 = 1e-3;
const PHASE_DURATION_TOL: f64 = 1e-4;
const EPS_VALUE_TOL: f64 = 1e-6;
const EPS_ARGMIN_TOL: f64 = 1e-4;
const DEATHS_RATIO_MIN: f64 = 10.0;
const ECON_JUMP_MIN: f64 = 0.3;
const COST_JUMP_MAX: f64 = 0.10;
const GRADIENT_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;
const MASS_TOL: f64 = 1e-9;
const CONSERVED_DRIFT_TOL: f64 = 1e-8;
const PEAK_TOL: f64 = 1e-4;

/// Slack for cost orderings that hold with equality up to rounding.
const ORDER_SLACK: f64 = 1e-9;

const SEED: u64 = 20_201_014;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn years(k: f64) -> f64 {
    k * DAYS_PER_YEAR
}

fn quadratic_integral_closed_form() -> Outcome {
    let (p, init) = (reference::epidemic(), reference::initial_state());
    let traj = integrate(&p, &NoLockdown, init, 4000.0, 1e-9).unwrap();
    let ts: Vec<f64> = traj.samples().iter().map(|s| s.state.t).collect();
    let i2: Vec<f64> = traj.samples().iter().map(|s| s.state.i * s.state.i).collect();
    let quad = simpson(&ts, &i2);
    let closed = integral_infected_squared_uncontrolled(&init, &traj.final_state(), &p).unwrap();
    let err = rel(quad, closed);
    Outcome::new(
        err <= QUADRATIC_INTEGRAL_TOL,
        format!("closed {closed:.10e}, Simpson {quad:.10e}, rel err {err:.2e} (tol {QUADRATIC_INTEGRAL_TOL:e})"),
    )
}

fn policy_a_closed_form() -> Outcome {
    let (p, c, init) = (reference::epidemic(), reference::costs(), reference::initial_state());
    let mut worst: f64 = 0.0;
    for rho in [1.1, 1.2, 1.5, 2.0, 3.0] {
        let analytic = cost_policy_a(rho, init, &p, &c).unwrap().cost.total;
        let run = simulate_policy_a(rho, init, &p, &c, years(20.0)).unwrap();
        worst = worst.max(rel(run.cost_with_tail(&c).unwrap().total, analytic));
    }
    Outcome::new(
        worst <= POLICY_COST_TOL,
        format!("worst rel err over 5 targets {worst:.2e} (tol {POLICY_COST_TOL:e})"),
    )
}

fn policy_b_closed_form() -> Outcome {
    let (p, c, init) = (reference::epidemic(), reference::costs(), reference::initial_state());
    let (mut worst_cost, mut worst_phase): (f64, f64) = (0.0, 0.0);
    for iota in [0.01, 0.03, 0.06, 0.10] {
        let cert = cost_policy_b(iota, init, &p, &c).unwrap();
        let run = simulate_policy_b(iota, init, &p, &c, years(20.0)).unwrap();
        worst_cost = worst_cost.max(rel(run.cost_with_tail(&c).unwrap().total, cert.cost.total));
        let held = run.span(Phase::II).map_or(0.0, |s| s.duration());
        worst_phase = worst_phase.max(rel(held, cert.delta_tau));
    }
    Outcome::new(
        worst_cost <= POLICY_COST_TOL && worst_phase <= PHASE_DURATION_TOL,
        format!(
            "worst cost rel err {worst_cost:.2e} (tol {POLICY_COST_TOL:e}), held-phase duration rel err {worst_phase:.2e} (tol {PHASE_DURATION_TOL:e})"
        ),
    )
}

fn epsilon_minimization() -> Outcome {
    let m = minimize_scalar(|y| (1.0 - y.sqrt()) / (1.0 - y).powi(2), Bracket::new(0.0, 1.0).unwrap(), 1e-10);
    let (dv, dy) = ((m.f - 27.0 / 32.0).abs(), (m.x - 1.0 / 9.0).abs());
    let consistent = (epsilon_constant().powi(2) - m.f).abs() <= EPS_VALUE_TOL;
    Outcome::new(
        dv <= EPS_VALUE_TOL && dy <= EPS_ARGMIN_TOL && consistent,
        format!("min {:.9} at y = {:.7}; |f - 27/32| = {dv:.1e}, |y - 1/9| = {dy:.1e}", m.f, m.x),
    )
}

/// A piecewise-constant lockdown that is switched off once `s <= gamma / beta`.
struct Admissible {
    grid: PiecewiseConstant,
    herd: f64,
}

impl ControlSignal for Admissible {
    fn lockdown(&self, t: f64, state: &State) -> f64 {
        if state.s <= self.herd {
            0.0
        } else {
            self.grid.lockdown(t, state)
        }
    }

    fn next_switch(&self, t: f64) -> Option<f64> {
        self.grid.next_switch(t)
    }
}

fn random_admissible_cost(rng: &mut ChaCha8Rng, p: &EpidemicParams, c: &lockdown::sir::CostParams) -> f64 {
    let n = rng.gen_range(1..=40);
    let on = rng.gen_range(0.2..1.0);
    let levels = (0..n).map(|_| if rng.gen_bool(on) { rng.gen_range(0.0..=p.l_max) } else { 0.0 }).collect();
    let grid = PiecewiseConstant::new(0.0, years(5.0), levels).unwrap();
    let ctrl = Admissible { grid, herd: p.herd_immunity_threshold() };
    let traj = integrate(p, &ctrl, reference::initial_state(), years(5.0), 1e-9).unwrap();
    (trajectory_cost(&traj, c) + uncontrolled_tail_cost(&traj.final_state(), p, c).unwrap()).total
}

fn bound_dominance() -> Outcome {
    let (p, init) = (reference::epidemic(), reference::initial_state());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for k in [5.0, 10.0, 20.0, 40.0] {
        let c = reference::costs().with_kappa(years(k));
        let c_star = lower_bound(init, &p, &c).unwrap().c_star;
        let (_, a) = optimize_rho(init, &p, &c, rho_bracket(&init, &p).unwrap()).unwrap();
        let (_, b) = optimize_iota(init, &p, &c, iota_bracket(&init, &p).unwrap()).unwrap();
        let oc = optimal_control(&RunConfig::default().with_kappa(c.kappa), Terminal::UncontrolledTail).unwrap();
        let (ca, cb, co) = (a.cost.total, b.cost.total, oc.cost.total);
        if !(c_star <= cb && cb <= ca && c_star <= co) {
            failures.push(format!("kappa {k}*365: C* {c_star:.4}, C_B {cb:.4}, C_A {ca:.4}, OC {co:.4}"));
        }
        for _ in 0..25 {
            let cost = random_admissible_cost(&mut rng, &p, &c);
            min_margin = min_margin.min(cost / c_star - 1.0);
            if cost < c_star {
                failures.push(format!("kappa {k}*365: random control cost {cost:.4} < C* {c_star:.4}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "4 kappa values and 100 random controls; smallest random-control margin over C* {:.1}%",
            100.0 * min_margin
        )
    } else {
        failures.join("; ")
    };
    Outcome::new(failures.is_empty(), detail)
}

fn compare_ordering() -> Outcome {
    let rows = compare(&RunConfig::default()).unwrap();
    let le = |a: f64, b: f64| a <= b + ORDER_SLACK * b.abs();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| {
            !(le(r.c_star, r.cost_oc) && le(r.cost_oc, r.cost_b) && le(r.cost_b, r.cost_a))
                || r.cost_b - r.c_star >= r.cost_a - r.c_star
        })
        .map(|r| format!("kappa {}", r.kappa))
        .collect();
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("all {} rows ordered and gap_B < gap_A", rows.len())
        } else {
            format!("violations at {}", bad.join(", "))
        },
    )
}

fn rho_star_above_one() -> Outcome {
    let (p, c, init) = (reference::epidemic(), reference::costs(), reference::initial_state());
    let (rho, _) = optimize_rho(init, &p, &c, rho_bracket(&init, &p).unwrap()).unwrap();
    let sim = optimize_rho_simulated(init, &p, &c, years(5.0), Bracket::new(0.5, 3.5).unwrap(), 1e-6).unwrap();
    Outcome::new(rho > 1.0 && sim.x > 1.0, format!("rho* = {rho:.6} (closed form), {:.6} (simulated 5y scan)", sim.x))
}

fn phase_transition() -> Outcome {
    let cfg = RunConfig::default().with_horizon(years(1.5));
    let rows = sweep(&cfg, Axis::Kappa).unwrap();
    let both =
        rows.iter().any(|r| r.regime == Regime::Suppression) && rows.iter().any(|r| r.regime == Regime::Mitigation);
    let ratio = rows[0].deaths / rows[rows.len() - 1].deaths;
    let jumps: Vec<(usize, f64, f64)> = rows
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1].econ_loss - w[0].econ_loss).abs() >= ECON_JUMP_MIN)
        .map(|(k, w)| (k, (w[1].econ_loss - w[0].econ_loss).abs(), rel(w[1].total_cost, w[0].total_cost)))
        .collect();
    let continuous = !jumps.is_empty() && jumps.iter().all(|j| j.2 <= COST_JUMP_MAX);
    let converged = rows.iter().filter(|r| r.converged).count();
    let at = jumps
        .iter()
        .map(|(k, de, dc)| format!("kappa {}->{}*365: econ jump {de:.3}, cost jump {:.2}%", k + 1, k + 2, 100.0 * dc))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(
        both && ratio >= DEATHS_RATIO_MIN && continuous,
        format!(
            "both regimes: {both}; deaths ratio {ratio:.1} (min {DEATHS_RATIO_MIN}); {at}; {converged}/{} converged",
            rows.len()
        ),
    )
}

fn adjoint_gradient() -> Outcome {
    let (p, init) = (reference::epidemic(), reference::initial_state());
    let c = reference::costs();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let n = 50;
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let terminal = if trial % 2 == 0 { Terminal::UncontrolledTail } else { Terminal::Free };
        let horizon = if trial % 2 == 0 { years(5.0) } else { years(1.5) };
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
        let control = PiecewiseConstant::new(0.0, horizon, values.clone()).unwrap();
        let grad = cost_gradient(&control, init, &p, &c, horizon, terminal).unwrap();
        let model = DiscreteModel::new(&p, &c, init, horizon, n, terminal).unwrap();
        for k in 0..n {
            let mut up = values.clone();
            let mut down = values.clone();
            up[k] += FD_STEP;
            down[k] -= FD_STEP;
            let fd =
                (model.evaluate(&up).unwrap().cost.total - model.evaluate(&down).unwrap().cost.total) / (2.0 * FD_STEP);
            let err = rel(grad[k], fd);
            worst = worst.max(err);
        }
    }
    Outcome::new(
        worst <= GRADIENT_TOL,
        format!("worst componentwise rel err {worst:.2e} over 10 controls x {n} intervals (tol {GRADIENT_TOL:e})"),
    )
}

fn invariant_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let draws = 10_000;
    let (mut mass, mut drift, mut peak_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut monotone = true;
    let mut peaks_checked = 0;
    for _ in 0..draws {
        let beta = rng.gen_range(0.05..0.6);
        let gamma = rng.gen_range(0.02..0.3);
        let p = EpidemicParams::new(beta, gamma, rng.gen_range(0.2..=1.0), rng.gen_range(0.2..=1.0)).unwrap();
        let s0 = rng.gen_range(0.3..0.999);
        let i0 = (1.0 - s0) * rng.gen_range(1e-4..1.0);
        let init = State { s: s0, i: i0, r: (1.0 - s0 - i0).max(0.0), t: 0.0 };
        let horizon = rng.gen_range(10.0..300.0);
        let n = rng.gen_range(1..8);
        let levels = (0..n).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..=p.l_max) }).collect();
        let ctrl = PiecewiseConstant::new(0.0, horizon, levels).unwrap();
        let traj = integrate(&p, &ctrl, init, horizon, 1e-9).unwrap();
        let smp = traj.samples();
        for w in smp.windows(2) {
            monotone &= w[1].state.s <= w[0].state.s && w[1].state.r >= w[0].state.r;
        }
        for s in smp {
            mass = mass.max(s.state.mass_defect());
        }
        for run in traj.runs() {
            if smp[run.start].lockdown != 0.0 {
                continue;
            }
            let q0 = conserved_quantity(&smp[run.start].state, &p).unwrap();
            for s in &smp[run.clone()] {
                drift = drift.max((conserved_quantity(&s.state, &p).unwrap() - q0).abs());
            }
        }
        let free = integrate(&p, &NoLockdown, init, 3000.0, 1e-9).unwrap();
        if free.final_state().s < p.herd_immunity_threshold() || init.s <= p.herd_immunity_threshold() {
            peaks_checked += 1;
            peak_err = peak_err.max(rel(free.peak_infected(), uncontrolled_peak(&init, &p)));
        }
    }
    let pass = mass <= MASS_TOL && monotone && drift <= CONSERVED_DRIFT_TOL && peak_err <= PEAK_TOL;
    Outcome::new(
        pass,
        format!(
            "{draws} draws: max |s+i+r-1| {mass:.1e}, monotone s and r: {monotone}, max conserved drift {drift:.1e}, max peak rel err {peak_err:.1e} over {peaks_checked} peaks"
        ),
    )
}

fn main() {
    let checks: [Check; 10] = [
        ("closed-form quadratic infection integral matches quadrature", quadratic_integral_closed_form),
        ("closed-form Policy A cost matches simulation", policy_a_closed_form),
        ("closed-form Policy B cost and held-phase length match simulation", policy_b_closed_form),
        ("epsilon constant from numerical minimization", epsilon_minimization),
        ("lower bound dominated by policies, optimum and random controls", bound_dominance),
        ("compare rows ordered bound <= optimum <= B <= A", compare_ordering),
        ("optimal Policy A target exceeds one", rho_star_above_one),
        ("suppression to mitigation transition in kappa sweep", phase_transition),
        ("adjoint gradient matches central differences", adjoint_gradient),
        ("SIR invariants over random parameters and controls", invariant_suite),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1}s)", outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
