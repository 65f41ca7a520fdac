//! Machine checks for the solvers: threshold sweeps comparing each solver's
//! own estimate at the start state with exact re-evaluation, and the
//! optimality properties P1–P4 decided by brute-force policy enumeration.
//!
//! Every property report checks *solver outputs* (or a caller-supplied
//! candidate), never the existence of an ideal optimal policy.

use std::fmt::{self, Write as _};
use std::thread;

use crate::error::{Error, Result};
use crate::exact::{enumerate_policies, evaluate_policy, ExactEvaluation, DEFAULT_POLICY_CAP};
use crate::mdp::{ActionId, MdpSpec, Policy, StateId, ValueTables};
use crate::naive::{bellman_step, naive_value_iteration, InitP};
use crate::numfmt::f9;
use crate::recursive::recursive_value_iteration;

/// Slack for comparing exactly evaluated quantities of different policies.
pub const COMPARE_TOLERANCE: f64 = 1e-12;

/// Value-iteration solver and its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverConfig {
    Naive { k: usize, init: InitP },
    Recursive { k: usize, horizon: usize },
}

impl SolverConfig {
    /// Naive VI with 50 sweeps and zero-initialized reachability.
    pub fn naive_default() -> Self {
        SolverConfig::Naive { k: 50, init: InitP::default() }
    }

    /// Recursive VI with 15 outer iterations over a 15-stage stack.
    pub fn recursive_default() -> Self {
        SolverConfig::Recursive { k: 15, horizon: 15 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Naive { .. } => "naive",
            SolverConfig::Recursive { .. } => "recursive",
        }
    }
}

/// What a solver returns, reduced to the parts the analysis needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutput {
    pub policy: Policy,
    /// The solver's own `(Q, P)` estimate: the iterated tables for naive VI,
    /// the last stage of the stack for recursive VI.
    pub estimate: ValueTables,
    pub converged: bool,
    /// Actions admissible at each state when the solve finished.
    pub admissible: Vec<Vec<ActionId>>,
}

pub fn run_solver(spec: &MdpSpec, solver: SolverConfig, theta: f64) -> Result<SolverOutput> {
    match solver {
        SolverConfig::Naive { k, init } => {
            let sol = naive_value_iteration(spec, theta, k, init)?;
            let sets = crate::naive::ConstrainedActionSets::from_threshold(spec, &sol.values, theta);
            Ok(SolverOutput {
                admissible: spec.states().map(|s| sets.get(s).to_vec()).collect(),
                policy: sol.policy,
                estimate: sol.values,
                converged: sol.trace.converged,
            })
        }
        SolverConfig::Recursive { k, horizon } => {
            let sol = recursive_value_iteration(spec, theta, k, horizon)?;
            Ok(SolverOutput {
                admissible: spec
                    .states()
                    .map(|s| sol.report.final_admissible(s).to_vec())
                    .collect(),
                estimate: sol.stack.stage(horizon).clone(),
                policy: sol.policy,
                converged: sol.report.converged,
            })
        }
    }
}

/// One threshold of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub theta: f64,
    pub p_true: f64,
    pub p_est: f64,
    pub v_true: f64,
    pub v_est: f64,
    pub converged: bool,
    /// The solver believed the start state safe while it is not:
    /// `p_est <= theta < p_true`.
    pub violation: bool,
    /// Some action passed the constraint at the start state.
    pub admissible_at_start: bool,
    pub policy: Policy,
}

fn sweep_one(spec: &MdpSpec, solver: SolverConfig, theta: f64, start: StateId) -> Result<SweepRecord> {
    let out = run_solver(spec, solver, theta)?;
    let exact = evaluate_policy(spec, &out.policy)?;
    let a = out.policy.action(start);
    let p_est = out.estimate.p(start, a);
    let p_true = exact.p[start];
    Ok(SweepRecord {
        theta,
        p_true,
        p_est,
        v_true: exact.v[start],
        v_est: out.estimate.q(start, a),
        converged: out.converged,
        violation: p_est <= theta && theta < p_true,
        admissible_at_start: !out.admissible[start].is_empty(),
        policy: out.policy,
    })
}

fn check_start(spec: &MdpSpec, start: StateId) -> Result<()> {
    if start >= spec.num_states() || spec.is_terminal(start) {
        return Err(Error::InvalidParameter(format!(
            "start state {start} must be an existing non-terminal state"
        )));
    }
    Ok(())
}

/// Independent solve and exact re-evaluation per threshold. Errors are kept
/// per threshold; the output order follows `thetas`.
pub fn sweep_theta(
    spec: &MdpSpec,
    solver: SolverConfig,
    thetas: &[f64],
    start: StateId,
) -> Result<Vec<Result<SweepRecord>>> {
    sweep_theta_parallel(spec, solver, thetas, start, 1)
}

/// [`sweep_theta`] spread over `jobs` threads.
pub fn sweep_theta_parallel(
    spec: &MdpSpec,
    solver: SolverConfig,
    thetas: &[f64],
    start: StateId,
    jobs: usize,
) -> Result<Vec<Result<SweepRecord>>> {
    check_start(spec, start)?;
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("thresholds must be ascending".into()));
    }
    let jobs = jobs.max(1).min(thetas.len().max(1));
    if jobs == 1 {
        return Ok(thetas.iter().map(|&t| sweep_one(spec, solver, t, start)).collect());
    }
    let chunk = thetas.len().div_ceil(jobs);
    let results = thread::scope(|scope| {
        let handles: Vec<_> = thetas
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter().map(|&t| sweep_one(spec, solver, t, start)).collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    Ok(results)
}

/// CSV with the fixed header, one row per successful record.
pub fn render_sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("threshold,P-values-true,P-values-est,V-values-true,V-values-est\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            f9(r.theta),
            f9(r.p_true),
            f9(r.p_est),
            f9(r.v_true),
            f9(r.v_est)
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Property checks

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    /// Passed, but no premise was ever satisfied.
    VacuousPass,
    Fail,
    NotChecked(String),
    NotEvaluable(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => f.write_str("pass"),
            Status::VacuousPass => f.write_str("pass (vacuous)"),
            Status::Fail => f.write_str("FAIL"),
            Status::NotChecked(why) => write!(f, "not checked: {why}"),
            Status::NotEvaluable(why) => write!(f, "not evaluable: {why}"),
        }
    }
}

impl Status {
    pub fn is_pass(&self) -> bool {
        matches!(self, Status::Pass | Status::VacuousPass)
    }
}

/// Concrete counterexample: re-checking `holds` on these numbers in
/// isolation reproduces the failure.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub state: StateId,
    pub action: Option<ActionId>,
    pub candidate: Policy,
    pub other: Option<Policy>,
    /// Named quantities entering the violated comparison.
    pub values: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyOutcome {
    pub property: String,
    pub status: Status,
    /// Number of (policy, state) implications whose premise held.
    pub premises_met: usize,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub theta: f64,
    pub outcomes: Vec<PropertyOutcome>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.status.is_pass())
    }

    pub fn outcome(&self, property: &str) -> Option<&PropertyOutcome> {
        self.outcomes.iter().find(|o| o.property == property)
    }

    pub fn render(&self, spec: &MdpSpec) -> String {
        let mut out = String::from(
            "# checks solver outputs (or the given candidate), not an assumed optimal policy\n",
        );
        let _ = writeln!(out, "theta\t{}", f9(self.theta));
        for o in &self.outcomes {
            let _ = write!(out, "{}\t{}", o.property, o.status);
            if let Some(w) = &o.witness {
                let _ = write!(
                    out,
                    "\tstate={}\tcandidate={}",
                    spec.state_name(w.state),
                    w.candidate.describe(spec)
                );
                if let Some(a) = w.action {
                    let _ = write!(out, "\taction={}", spec.action_name(a));
                }
                if let Some(p) = &w.other {
                    let _ = write!(out, "\tother={}", p.describe(spec));
                }
                for (name, v) in &w.values {
                    let _ = write!(out, "\t{name}={}", f9(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + COMPARE_TOLERANCE
}

fn enumerate_all(spec: &MdpSpec) -> Result<Vec<(Policy, ExactEvaluation)>> {
    enumerate_policies(spec, DEFAULT_POLICY_CAP)?
        .map(|p| {
            let e = evaluate_policy(spec, &p)?;
            Ok((p, e))
        })
        .collect()
}

fn not_checked(properties: &[&str], err: Error) -> Result<Vec<PropertyOutcome>> {
    match err {
        Error::PolicySpaceTooLarge { .. } => Ok(properties
            .iter()
            .map(|name| PropertyOutcome {
                property: (*name).into(),
                status: Status::NotChecked(err.to_string()),
                premises_met: 0,
                witness: None,
            })
            .collect()),
        other => Err(other),
    }
}

fn implication_outcome(property: &str, premises_met: usize, witness: Option<Witness>) -> PropertyOutcome {
    let status = match (&witness, premises_met) {
        (Some(_), _) => Status::Fail,
        (None, 0) => Status::VacuousPass,
        (None, _) => Status::Pass,
    };
    PropertyOutcome { property: property.into(), status, premises_met, witness }
}

/// P1 (performance and safety parts) plus the argmax condition it implies,
/// decided against every deterministic policy.
pub fn check_p1(spec: &MdpSpec, theta: f64, candidate: &Policy) -> Result<Vec<PropertyOutcome>> {
    let all = match enumerate_all(spec) {
        Ok(all) => all,
        Err(e) => {
            return not_checked(&["P1:performance", "P1:safety", "P1:argmax"], e)
        }
    };
    let hat = evaluate_policy(spec, candidate)?;
    let safe = |s: StateId| hat.p[s] <= theta;

    let mut perf = (0usize, None);
    let mut safety = (0usize, None);
    for (pi, e) in &all {
        for s in spec.non_terminal_states() {
            if safe(s) {
                if leq(e.p[s], hat.p[s]) {
                    perf.0 += 1;
                    if perf.1.is_none() && !leq(e.v[s], hat.v[s]) {
                        perf.1 = Some(Witness {
                            state: s,
                            action: None,
                            candidate: candidate.clone(),
                            other: Some(pi.clone()),
                            values: vec![
                                ("P_other".into(), e.p[s]),
                                ("P_candidate".into(), hat.p[s]),
                                ("V_other".into(), e.v[s]),
                                ("V_candidate".into(), hat.v[s]),
                            ],
                        });
                    }
                }
            } else if leq(hat.v[s], e.v[s]) {
                safety.0 += 1;
                if safety.1.is_none() && !leq(hat.p[s], e.p[s]) {
                    safety.1 = Some(Witness {
                        state: s,
                        action: None,
                        candidate: candidate.clone(),
                        other: Some(pi.clone()),
                        values: vec![
                            ("V_candidate".into(), hat.v[s]),
                            ("V_other".into(), e.v[s]),
                            ("P_candidate".into(), hat.p[s]),
                            ("P_other".into(), e.p[s]),
                        ],
                    });
                }
            }
        }
    }

    // The candidate's action must be the best among actions no riskier than
    // the candidate itself at every safe state.
    let mut argmax = (0usize, None);
    for s in spec.non_terminal_states().filter(|&s| safe(s)) {
        argmax.0 += 1;
        let chosen = candidate.action(s);
        let best = spec
            .actions(s)
            .iter()
            .filter(|&&a| leq(hat.p_action(s, a), hat.p[s]))
            .copied()
            .find(|&a| !leq(hat.q(s, a), hat.q(s, chosen)));
        if let (Some(a), None) = (best, &argmax.1) {
            argmax.1 = Some(Witness {
                state: s,
                action: Some(a),
                candidate: candidate.clone(),
                other: None,
                values: vec![
                    ("Q_action".into(), hat.q(s, a)),
                    ("Q_candidate".into(), hat.q(s, chosen)),
                    ("P_action".into(), hat.p_action(s, a)),
                    ("P_candidate".into(), hat.p[s]),
                ],
            });
        }
    }

    Ok(vec![
        implication_outcome("P1:performance", perf.0, perf.1),
        implication_outcome("P1:safety", safety.0, safety.1),
        implication_outcome("P1:argmax", argmax.0, argmax.1),
    ])
}

/// P2: among policies agreeing with the candidate on its safe region, the
/// candidate is least unsafe at every unsafe non-terminal state.
pub fn check_p2(spec: &MdpSpec, theta: f64, candidate: &Policy) -> Result<PropertyOutcome> {
    let all = match enumerate_all(spec) {
        Ok(all) => all,
        Err(e) => return Ok(not_checked(&["P2"], e)?.remove(0)),
    };
    let hat = evaluate_policy(spec, candidate)?;
    let safe: Vec<StateId> = spec.non_terminal_states().filter(|&s| hat.p[s] <= theta).collect();
    let unsafe_states: Vec<StateId> =
        spec.non_terminal_states().filter(|&s| hat.p[s] > theta).collect();
    let mut premises = 0;
    let mut witness = None;
    for (pi, e) in &all {
        if !safe.iter().all(|&s| pi.action(s) == candidate.action(s)) {
            continue;
        }
        for &s in &unsafe_states {
            premises += 1;
            if witness.is_none() && !leq(hat.p[s], e.p[s]) {
                witness = Some(Witness {
                    state: s,
                    action: None,
                    candidate: candidate.clone(),
                    other: Some(pi.clone()),
                    values: vec![("P_candidate".into(), hat.p[s]), ("P_other".into(), e.p[s])],
                });
            }
        }
    }
    Ok(implication_outcome("P2", premises, witness))
}

/// P3 monotonicity measured on solver outputs for each `(lo, hi)` pair.
pub fn check_p3(
    spec: &MdpSpec,
    pairs: &[(f64, f64)],
    solver: SolverConfig,
) -> Result<Vec<PropertyOutcome>> {
    let mut outcomes = Vec::with_capacity(pairs.len());
    for &(lo, hi) in pairs {
        if lo > hi {
            return Err(Error::InvalidParameter(format!("P3 pair ({lo}, {hi}) is not ordered")));
        }
        let name = format!("P3({},{})", f9(lo), f9(hi));
        let a = run_solver(spec, solver, lo)?;
        let b = run_solver(spec, solver, hi)?;
        if !(a.converged && b.converged) {
            outcomes.push(PropertyOutcome {
                property: name,
                status: Status::NotEvaluable("solver did not converge".into()),
                premises_met: 0,
                witness: None,
            });
            continue;
        }
        let ea = evaluate_policy(spec, &a.policy)?;
        let eb = evaluate_policy(spec, &b.policy)?;
        let mut witness = None;
        for s in spec.states() {
            let v_bad = eb.p[s] <= hi && !leq(ea.v[s], eb.v[s]);
            let p_bad = !leq(ea.p[s], eb.p[s]);
            if v_bad || p_bad {
                witness = Some(Witness {
                    state: s,
                    action: None,
                    candidate: a.policy.clone(),
                    other: Some(b.policy.clone()),
                    values: vec![
                        ("V_lo".into(), ea.v[s]),
                        ("V_hi".into(), eb.v[s]),
                        ("P_lo".into(), ea.p[s]),
                        ("P_hi".into(), eb.p[s]),
                    ],
                });
                break;
            }
        }
        outcomes.push(PropertyOutcome {
            property: name,
            status: if witness.is_some() { Status::Fail } else { Status::Pass },
            premises_met: spec.num_states(),
            witness,
        });
    }
    Ok(outcomes)
}

/// One application of the threshold Bellman operator to a table pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    /// `|T(Q, P) - (Q, P)|_sup`.
    pub residual: f64,
    /// Policy the operator selects from the given tables.
    pub induced: Policy,
    /// Whether `induced` differs from the reference policy, if one was given.
    pub policy_changed: Option<bool>,
}

/// P4 fixed-point residual of `values`, optionally against the policy whose
/// tables they are.
pub fn check_p4_residual(
    spec: &MdpSpec,
    theta: f64,
    values: &ValueTables,
    reference: Option<&Policy>,
) -> Result<Residual> {
    crate::naive::check_theta(theta)?;
    let (next, induced) = bellman_step(spec, theta, values);
    Ok(Residual {
        residual: next.sup_distance(values),
        policy_changed: reference.map(|r| r != &induced),
        induced,
    })
}

/// P4 as a report line: pass when the tables are a fixed point within
/// `tolerance` and the induced policy matches the reference.
pub fn p4_outcome(
    spec: &MdpSpec,
    theta: f64,
    values: &ValueTables,
    reference: &Policy,
    tolerance: f64,
) -> Result<PropertyOutcome> {
    let r = check_p4_residual(spec, theta, values, Some(reference))?;
    let ok = r.residual < tolerance && r.policy_changed == Some(false);
    let witness = (!ok).then(|| {
        let s = spec
            .states()
            .find(|&s| r.induced.action(s) != reference.action(s))
            .unwrap_or(0);
        Witness {
            state: s,
            action: Some(r.induced.action(s)),
            candidate: reference.clone(),
            other: Some(r.induced.clone()),
            values: vec![("residual".into(), r.residual)],
        }
    });
    Ok(PropertyOutcome {
        property: "P4".into(),
        status: if ok { Status::Pass } else { Status::Fail },
        premises_met: 1,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_counter_mdp, CounterParams, LEFT, RIGHT};

    fn counter() -> MdpSpec {
        build_counter_mdp(CounterParams::default()).unwrap()
    }

    #[test]
    fn violation_predicate_is_exact() {
        let spec = counter();
        let recs = sweep_theta(&spec, SolverConfig::naive_default(), &[0.5, 0.95], 0).unwrap();
        for r in recs {
            let r = r.unwrap();
            assert_eq!(r.violation, r.p_est <= r.theta && r.theta < r.p_true);
        }
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let spec = counter();
        let thetas: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let solver = SolverConfig::recursive_default();
        let ok = |v: Vec<Result<SweepRecord>>| -> Vec<SweepRecord> {
            v.into_iter().map(|r| r.unwrap()).collect()
        };
        let a = ok(sweep_theta(&spec, solver, &thetas, 0).unwrap());
        let b = ok(sweep_theta_parallel(&spec, solver, &thetas, 0, 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let spec = counter();
        assert!(sweep_theta(&spec, SolverConfig::naive_default(), &[0.5, 0.4], 0).is_err());
        assert!(sweep_theta(&spec, SolverConfig::naive_default(), &[0.5], 2).is_err());
        let recs = sweep_theta(&spec, SolverConfig::naive_default(), &[1.0], 0).unwrap();
        assert!(recs[0].is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let spec = counter();
        let recs: Vec<_> = sweep_theta(&spec, SolverConfig::naive_default(), &[0.95], 0)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let csv = render_sweep_csv(&recs);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("threshold,P-values-true,P-values-est,V-values-true,V-values-est")
        );
        assert!(lines.next().unwrap().starts_with("0.95,0.886075949,0.886075949,"));
    }

    #[test]
    fn p4_fixed_point_when_constraint_inactive() {
        let spec = counter();
        let pl = Policy::uniform(&spec, LEFT);
        let e = evaluate_policy(&spec, &pl).unwrap();
        let r = check_p4_residual(&spec, 0.95, &e.tables, Some(&pl)).unwrap();
        assert!(r.residual < 1e-10);
        assert_eq!(r.policy_changed, Some(false));
    }

    #[test]
    fn p4_rejects_both_candidates_at_085() {
        let spec = counter();
        for a in [LEFT, RIGHT] {
            let pi = Policy::uniform(&spec, a);
            let e = evaluate_policy(&spec, &pi).unwrap();
            let r = check_p4_residual(&spec, 0.85, &e.tables, Some(&pi)).unwrap();
            assert_eq!(r.policy_changed, Some(true));
            assert!(r.residual > 0.0);
            let o = p4_outcome(&spec, 0.85, &e.tables, &pi, 1e-8).unwrap();
            assert_eq!(o.status, Status::Fail);
        }
    }
}
