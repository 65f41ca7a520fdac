//! Worked instances for the solvers, the analysis checks and the
//! environments, each against an independent oracle.

mod common;

use safevi::analysis::{
    check_p1, check_p2, check_p3, run_solver, sweep_theta, SolverConfig, Status,
};
use safevi::env::{
    build_cliffworld, build_counter_mdp, CliffworldParams, CounterParams, SlipMode, LEFT, RIGHT,
};
use safevi::exact::{
    bounded_reachability, closed_form_counter, enumerate_policies, evaluate_policy,
    DEFAULT_POLICY_CAP,
};
use safevi::mdp::{monte_carlo, validate, DEFAULT_MAX_STEPS};
use safevi::naive::{naive_policy_iteration, naive_value_iteration, InitP};
use safevi::recursive::{recursive_value_iteration, stabilization_horizon};
use safevi::{Error, MdpBuilder, MdpSpec, Policy};

fn counter() -> MdpSpec {
    build_counter_mdp(CounterParams::default()).unwrap()
}

#[test]
fn recursive_vi_settles_on_the_safe_policy() {
    let spec = counter();
    let sol = recursive_value_iteration(&spec, 0.85, 15, 15).unwrap();
    assert_eq!(sol.policy, Policy::uniform(&spec, RIGHT));
    assert!(sol.report.converged);
    let p = evaluate_policy(&spec, &sol.policy).unwrap().p[0];
    assert!((p - 1.0 / 1.7).abs() < 1e-12 && p <= 0.85);
}

#[test]
fn stabilization_horizon_matches_hand_computation() {
    // P^n(s1, L) for n = 1..5 under the stage policies: 0.7, 0.7, 0.847,
    // 0.847, 0.8779 -- L first exceeds 0.85 at stage 5.
    let spec = counter();
    let sol = recursive_value_iteration(&spec, 0.85, 15, 15).unwrap();
    let expected = [0.7, 0.7, 0.847, 0.847, 0.87787];
    for (n, e) in expected.iter().enumerate() {
        assert!((sol.stack.p_hat(n + 1, 0, LEFT) - e).abs() < 1e-5, "stage {}", n + 1);
    }
    assert_eq!(stabilization_horizon(&sol.report), 5);
    // theta = 0: s2 carries no one-step risk, so it is only cut at stage 2.
    let zero = recursive_value_iteration(&spec, 0.0, 15, 15).unwrap();
    assert_eq!(stabilization_horizon(&zero.report), 2);
    let loose = recursive_value_iteration(&spec, 0.999, 15, 15).unwrap();
    assert_eq!(stabilization_horizon(&loose.report), 1);
}

#[test]
fn near_one_threshold_is_the_unconstrained_optimum() {
    let spec = counter();
    let cf = closed_form_counter(0.7, 0.95).unwrap();
    let pl = Policy::uniform(&spec, LEFT);

    let naive = sweep_theta(&spec, SolverConfig::naive_default(), &[0.999], 0).unwrap();
    let r = naive[0].as_ref().unwrap();
    assert_eq!(r.policy, pl);
    assert!((r.p_true - r.p_est).abs() < 1e-6 && (r.p_true - cf.p_ll).abs() < 1e-12);
    assert!((r.v_est - cf.q_ll).abs() < 1e-6);

    // The recursive estimate is the 15-bounded reachability of the same policy.
    let rec = sweep_theta(&spec, SolverConfig::recursive_default(), &[0.999], 0).unwrap();
    let r = rec[0].as_ref().unwrap();
    assert_eq!(r.policy, pl);
    let p15 = bounded_reachability(&spec, &pl, 15).unwrap().p_n[0];
    assert!((r.p_est - p15).abs() < 1e-12);
    assert!((r.p_true - cf.p_ll).abs() < 1e-12);
}

#[test]
fn naive_vi_limits() {
    let spec = counter();
    let cf = closed_form_counter(0.7, 0.95).unwrap();
    let lo = naive_value_iteration(&spec, 0.5, 50, InitP::default()).unwrap();
    assert!(lo.trace.converged);
    assert!(lo.trace.snapshots.last().unwrap().feasible.get(0).is_empty());
    assert_eq!(lo.policy, Policy::uniform(&spec, RIGHT));
    assert!(cf.p_rr < cf.p_lr);

    let chatter = naive_value_iteration(&spec, 0.85, 50, InitP::default()).unwrap();
    assert!(!chatter.trace.converged);

    // Any initial estimate in [0, 1] is accepted; out of range is not.
    assert!(naive_value_iteration(&spec, 0.5, 5, InitP::SeededUniform { seed: 1 }).is_ok());
    assert!(naive_value_iteration(&spec, 0.5, 5, InitP::Constant(1.5)).is_err());
}

#[test]
fn naive_policy_iteration_limits() {
    let spec = counter();
    let (pl, pr) = (Policy::uniform(&spec, LEFT), Policy::uniform(&spec, RIGHT));
    let hi = naive_policy_iteration(&spec, 0.95, &pr, 10).unwrap();
    assert!(hi.converged && hi.final_policy == pl);
    assert!(hi.snapshots.iter().skip(1).all(|s| s.policy == pl));
    let lo = naive_policy_iteration(&spec, 0.5, &pl, 10).unwrap();
    assert!(lo.converged && lo.final_policy == pr);
}

#[test]
fn naive_pi_oscillates_exactly_between_the_two_reachabilities() {
    // Oscillation needs P_LR <= theta < P_LL, i.e. 0.8235 <= theta < 0.8861.
    let spec = counter();
    let pr = Policy::uniform(&spec, RIGHT);
    for i in 75..=88 {
        let theta = i as f64 / 100.0;
        let t = naive_policy_iteration(&spec, theta, &pr, 20).unwrap();
        let expected = (0.83..=0.88).contains(&theta);
        assert_eq!(t.oscillation_period == Some(2), expected, "theta = {theta}");
        assert_eq!(t.converged, !expected, "theta = {theta}");
    }
}

#[test]
fn p1_examples() {
    let spec = counter();
    let pr = Policy::uniform(&spec, RIGHT);
    let out = check_p1(&spec, 0.85, &pr).unwrap();
    assert!(out.iter().all(|o| o.status.is_pass()), "{out:?}");

    // Single-action MDP: the only policy is its own competitor.
    let mut b = MdpBuilder::new(0.9);
    let s = b.state("s", false, false);
    let g = b.state("G", true, false);
    let x = b.state("X", true, true);
    let a = b.action("go");
    b.transition(s, a, g, 0.5, -1.0).transition(s, a, x, 0.5, -1.0);
    b.terminal_reward(g, a, 0.0).terminal_reward(x, a, 0.0);
    let single = b.build().unwrap();
    let only = Policy::first_available(&single);
    for theta in [0.1, 0.9] {
        assert!(check_p1(&single, theta, &only).unwrap().iter().all(|o| o.status.is_pass()));
    }
}

#[test]
fn p1_witnesses_recheck() {
    // Whatever P1 reports, a failure's witness must violate the implication.
    let spec = counter();
    for theta in [0.5, 0.85, 0.95] {
        for a in [LEFT, RIGHT] {
            let cand = Policy::uniform(&spec, a);
            for o in check_p1(&spec, theta, &cand).unwrap() {
                let Some(w) = &o.witness else { continue };
                assert_eq!(o.status, Status::Fail);
                let vals: std::collections::HashMap<_, _> = w.values.iter().cloned().collect();
                match o.property.as_str() {
                    "P1:performance" => {
                        assert!(vals["P_other"] <= vals["P_candidate"] + 1e-12);
                        assert!(vals["V_other"] > vals["V_candidate"] + 1e-12);
                    }
                    "P1:safety" => {
                        assert!(vals["V_candidate"] <= vals["V_other"] + 1e-12);
                        assert!(vals["P_candidate"] > vals["P_other"] + 1e-12);
                    }
                    _ => assert!(vals["Q_action"] > vals["Q_candidate"] + 1e-12),
                }
            }
        }
    }
}

#[test]
fn p2_examples() {
    let spec = counter();
    let ok = check_p2(&spec, 0.5, &Policy::uniform(&spec, RIGHT)).unwrap();
    assert_eq!(ok.status, Status::Pass);
    let bad = check_p2(&spec, 0.5, &Policy::uniform(&spec, LEFT)).unwrap();
    assert_eq!(bad.status, Status::Fail);
    assert_eq!(bad.witness.as_ref().unwrap().state, 0);
    // Everything safe: no unsafe non-terminal to quantify over.
    let vacuous = check_p2(&spec, 0.95, &Policy::uniform(&spec, LEFT)).unwrap();
    assert_eq!(vacuous.status, Status::VacuousPass);
}

#[test]
fn p3_examples() {
    let spec = counter();
    let out = check_p3(&spec, &[(0.5, 0.95), (0.6, 0.6)], SolverConfig::recursive_default()).unwrap();
    assert!(out.iter().all(|o| o.status == Status::Pass), "{out:?}");
    let a = run_solver(&spec, SolverConfig::recursive_default(), 0.5).unwrap();
    let b = run_solver(&spec, SolverConfig::recursive_default(), 0.95).unwrap();
    assert_eq!(a.policy, Policy::uniform(&spec, RIGHT));
    assert_eq!(b.policy, Policy::uniform(&spec, LEFT));

    let gated = check_p3(&spec, &[(0.5, 0.85)], SolverConfig::naive_default()).unwrap();
    assert!(matches!(&gated[0].status, Status::NotEvaluable(m) if m.contains("did not converge")));
    assert!(check_p3(&spec, &[(0.9, 0.5)], SolverConfig::naive_default()).is_err());
}

#[test]
fn property_checks_respect_the_cap() {
    let big = build_cliffworld(&CliffworldParams::with_size(6, 4)).unwrap();
    assert!(big.policy_count() > DEFAULT_POLICY_CAP);
    let pi = Policy::first_available(&big);
    let out = check_p1(&big, 0.5, &pi).unwrap();
    assert!(out.iter().all(|o| matches!(o.status, Status::NotChecked(_))));
    assert!(matches!(enumerate_policies(&big, DEFAULT_POLICY_CAP), Err(Error::PolicySpaceTooLarge { .. })));
}

#[test]
fn cliffworld_shape() {
    let params = CliffworldParams::default();
    let spec = build_cliffworld(&params).unwrap();
    assert!(validate(&spec).is_empty());
    assert_eq!(spec.num_states(), 11);
    assert_eq!(spec.policy_count(), 4u128.pow(9));
    let mut ex = params.clone();
    ex.slip_mode = SlipMode::Exclude;
    assert!(validate(&build_cliffworld(&ex).unwrap()).is_empty());
    // Zero slip: walking right from the start falls straight off the cliff.
    let mut det = params;
    det.slip = 0.0;
    let spec = build_cliffworld(&det).unwrap();
    let start = spec.state_id(&det.start_name()).unwrap();
    let right = spec.action_id("right").unwrap();
    assert_eq!(spec.one_step_failure_mass(start, right), 1.0);
}

#[test]
fn monte_carlo_agrees_with_exact_on_cliffworld() {
    let params = CliffworldParams::default();
    let spec = build_cliffworld(&params).unwrap();
    let start = spec.state_id(&params.start_name()).unwrap();
    let pi = common::random_policy(&spec, 11);
    let exact = evaluate_policy(&spec, &pi).unwrap();
    let mc = monte_carlo(&spec, &pi, start, 20_000, 99, DEFAULT_MAX_STEPS).unwrap();
    assert!((mc.failure_rate - exact.p[start]).abs() < 4.0 * mc.failure_std_error);
    assert!((mc.mean_return - exact.v[start]).abs() < 4.0 * mc.return_std_error);
}

#[test]
fn sweeps_are_reproducible() {
    let params = CliffworldParams::default();
    let spec = build_cliffworld(&params).unwrap();
    let start = spec.state_id(&params.start_name()).unwrap();
    let thetas: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let run = || -> Vec<_> {
        sweep_theta(&spec, SolverConfig::recursive_default(), &thetas, start)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect()
    };
    let first = run();
    assert_eq!(first, run());
    for r in &first {
        assert_eq!(evaluate_policy(&spec, &r.policy).unwrap().p[start], r.p_true);
        assert_eq!(r.violation, r.p_est <= r.theta && r.theta < r.p_true);
    }
}
