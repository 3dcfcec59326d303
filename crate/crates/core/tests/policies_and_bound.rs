use lockdown::analytic::{cost_policy_a, cost_policy_b, iota_bracket, optimize_iota, optimize_rho, rho_bracket};
use lockdown::bound::{bound_objective, lower_bound};
use lockdown::policies::{simulate_policy_a, simulate_policy_b, Phase};
use lockdown::sir::{reference, uncontrolled_peak, CostParams, EpidemicParams, State};
use proptest::prelude::*;

const LONG: f64 = 20.0 * 365.0;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Epidemics with `R0 s0` comfortably above one and an ideal lockdown.
fn epidemic_strategy() -> impl Strategy<Value = (EpidemicParams, State, CostParams)> {
    (0.1f64..0.4, 2.0f64..5.0, 0.85f64..0.99, 1e-3f64..0.05, 1.0f64..60.0).prop_map(|(beta, r0, s0, i0, k)| {
        let p = EpidemicParams::with_full_lockdown(beta, beta / r0).unwrap();
        let i0 = i0.min(0.5 * (1.0 - s0));
        let init = State::initial(s0, i0, 1.0 - s0 - i0).unwrap();
        (p, init, reference::costs().with_kappa(k * 365.0))
    })
}

#[test]
fn reference_optima_are_interior() {
    let (p, c, init) = (reference::epidemic(), reference::costs(), reference::initial_state());
    let rb = rho_bracket(&init, &p).unwrap();
    let ib = iota_bracket(&init, &p).unwrap();
    let (rho, a) = optimize_rho(init, &p, &c, rb).unwrap();
    let (iota, b) = optimize_iota(init, &p, &c, ib).unwrap();
    assert!(rho > rb.lo + 1e-3 && rho < rb.hi - 1e-3);
    assert!(iota > ib.lo + 1e-3 && iota < ib.hi - 1e-3);
    for d in [-1e-2, 1e-2] {
        assert!(cost_policy_a(rho + d, init, &p, &c).unwrap().cost.total >= a.cost.total);
        assert!(cost_policy_b(iota + d, init, &p, &c).unwrap().cost.total >= b.cost.total);
    }
}

#[test]
fn bound_reduces_to_mortality_term_without_congestion() {
    let (p, init) = (reference::epidemic(), reference::initial_state());
    let c = CostParams::new(14600.0, 5.6e-4, 0.0).unwrap();
    let b = lower_bound(init, &p, &c).unwrap();
    assert!(b.u12.abs() < 1e-12 && b.u22.abs() < 1e-12);
    let herd = p.herd_immunity_threshold();
    assert!(rel(b.c_star, c.kappa * c.gamma0 / p.gamma * (1.0 - herd - init.r)) < 1e-9, "{b:?}");
}

#[test]
fn bound_scan_agrees_with_dense_grid() {
    let (p, c, init) = (reference::epidemic(), reference::costs().with_kappa(5.0 * 365.0), reference::initial_state());
    let b = lower_bound(init, &p, &c).unwrap();
    let i_max = uncontrolled_peak(&init, &p);
    let n = 20_000;
    let grid_min = (0..=n)
        .map(|k| bound_objective(i_max * k as f64 / n as f64, init, &p, &c).unwrap().u)
        .fold(f64::INFINITY, f64::min);
    assert!(b.c_star <= grid_min + 1e-9, "{} vs {grid_min}", b.c_star);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn policy_a_closed_form_matches_simulation((p, init, c) in epidemic_strategy(), frac in 0.05f64..0.95) {
        let b = rho_bracket(&init, &p).unwrap();
        let rho = b.lo + frac * (b.hi - b.lo);
        let cert = cost_policy_a(rho, init, &p, &c).unwrap();
        let run = simulate_policy_a(rho, init, &p, &c, LONG).unwrap();
        prop_assert!(rel(run.cost_with_tail(&c).unwrap().total, cert.cost.total) <= 1e-3);
        let switch = run.span(Phase::I).unwrap().end;
        prop_assert!(rel(switch, cert.t_star) <= 1e-4, "{} vs {}", switch, cert.t_star);
    }

    #[test]
    fn policy_b_closed_form_matches_simulation((p, init, c) in epidemic_strategy(), frac in 0.05f64..0.95) {
        let b = iota_bracket(&init, &p).unwrap();
        let iota = b.lo + frac * (b.hi - b.lo);
        let cert = cost_policy_b(iota, init, &p, &c).unwrap();
        let run = simulate_policy_b(iota, init, &p, &c, LONG).unwrap();
        prop_assert!(rel(run.cost_with_tail(&c).unwrap().total, cert.cost.total) <= 1e-3);
        let held = run.span(Phase::II).unwrap();
        prop_assert!(rel(held.start, cert.tau1) <= 1e-4, "{} vs {}", held.start, cert.tau1);
        prop_assert!(rel(held.duration(), cert.delta_tau) <= 1e-4);
    }

    #[test]
    fn bound_below_both_policies((p, init, c) in epidemic_strategy()) {
        let bound = lower_bound(init, &p, &c).unwrap();
        let (_, a) = optimize_rho(init, &p, &c, rho_bracket(&init, &p).unwrap()).unwrap();
        let (_, b) = optimize_iota(init, &p, &c, iota_bracket(&init, &p).unwrap()).unwrap();
        prop_assert!(bound.c_star <= b.cost.total + 1e-9);
        prop_assert!(bound.c_star <= a.cost.total + 1e-9);
        prop_assert!(bound.fixed_point_residual <= 1e-10);
    }
}
