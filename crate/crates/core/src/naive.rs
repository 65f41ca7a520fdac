//! Memoryless constrained dynamic programming: the greedy-within-threshold
//! selection rule, the joint Bellman operator on `(Q, P)`, naive value
//! iteration and naive policy iteration.
//!
//! These solvers keep no record of past constraint outcomes, so on the
//! counter-MDP they chatter between policies for thresholds that fall
//! between the true and the estimated reachability of the risky action.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::evaluate_policy;
use crate::mdp::{terminal_reach, ActionId, MdpSpec, Policy, StateId, ValueTables};
use crate::numfmt::f9;

/// Sup-norm change below which consecutive value tables count as settled.
/// Matches the fixed-point residual bound used by the property checks.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;

/// Longest policy cycle the oscillation detector looks for.
pub const MAX_DETECTED_PERIOD: usize = 8;

/// Per-state subsets of available actions currently deemed safe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstrainedActionSets {
    sets: Vec<Vec<ActionId>>,
}

impl ConstrainedActionSets {
    /// `A(s)` everywhere.
    pub fn full(spec: &MdpSpec) -> Self {
        Self { sets: spec.states().map(|s| spec.actions(s).to_vec()).collect() }
    }

    /// `{a in A(s) | P(s, a) <= theta}`.
    pub fn from_threshold(spec: &MdpSpec, values: &ValueTables, theta: f64) -> Self {
        let mut sets = Self::full(spec);
        sets.retain_within(values, theta);
        sets
    }

    /// Drops every action whose reachability entry exceeds `theta`.
    pub fn retain_within(&mut self, values: &ValueTables, theta: f64) {
        for (s, set) in self.sets.iter_mut().enumerate() {
            set.retain(|&a| values.p(s, a) <= theta);
        }
    }

    /// Keeps only actions present in both `self` and `other`.
    pub fn intersect(&mut self, other: &ConstrainedActionSets) {
        for (set, keep) in self.sets.iter_mut().zip(&other.sets) {
            set.retain(|a| keep.contains(a));
        }
    }

    pub fn get(&self, s: StateId) -> &[ActionId] {
        &self.sets[s]
    }

    pub fn contains(&self, s: StateId, a: ActionId) -> bool {
        self.sets[s].contains(&a)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn num_states(&self) -> usize {
        self.sets.len()
    }

    pub fn is_subset_of(&self, other: &ConstrainedActionSets) -> bool {
        self.sets.iter().zip(&other.sets).all(|(a, b)| a.iter().all(|x| b.contains(x)))
    }
}

/// Lowest-index argmax of `Q(s, .)` over the safe set, or, when it is empty,
/// lowest-index argmin of `P(s, .)` over all of `A(s)`.
pub fn get_policy(spec: &MdpSpec, sets: &ConstrainedActionSets, values: &ValueTables) -> Policy {
    let choice = spec
        .states()
        .map(|s| {
            let safe = sets.get(s);
            if safe.is_empty() {
                lowest_arg(spec.actions(s), |a| -values.p(s, a))
            } else {
                lowest_arg(safe, |a| values.q(s, a))
            }
        })
        .collect();
    Policy::from_raw(choice)
}

/// First action attaining the maximum of `score`.
fn lowest_arg(actions: &[ActionId], score: impl Fn(ActionId) -> f64) -> ActionId {
    let mut best = actions[0];
    let mut best_score = score(best);
    for &a in &actions[1..] {
        let v = score(a);
        if v > best_score {
            best = a;
            best_score = v;
        }
    }
    best
}

/// Synchronous expected backup of both tables under `policy`. Terminal rows
/// are reset to `R(s, a, s)` and `1(s in F)`.
pub fn backup_under(spec: &MdpSpec, policy: &Policy, values: &ValueTables) -> ValueTables {
    let gamma = spec.gamma();
    let mut next = ValueTables::zeros(spec);
    for s in spec.states() {
        for &a in spec.actions(s) {
            if spec.is_terminal(s) {
                next.set(s, a, spec.terminal_reward(s, a), terminal_reach(spec, s));
                continue;
            }
            let (q, p) = spec.transitions(s, a).iter().fold((0.0, 0.0), |(q, p), o| {
                let a1 = policy.action(o.next);
                (
                    q + o.prob * (o.reward + gamma * values.q(o.next, a1)),
                    p + o.prob * values.p(o.next, a1),
                )
            });
            next.set(s, a, q, p);
        }
    }
    next
}

/// One application of the threshold Bellman operator, returning the new
/// tables and the selection policy it used.
pub fn bellman_step(spec: &MdpSpec, theta: f64, values: &ValueTables) -> (ValueTables, Policy) {
    let sets = ConstrainedActionSets::from_threshold(spec, values, theta);
    let policy = get_policy(spec, &sets, values);
    (backup_under(spec, &policy, values), policy)
}

/// One iteration of a traced solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Policy in force during this iteration.
    pub policy: Policy,
    /// Tables produced by this iteration (VI) or exact tables of `policy` (PI).
    pub values: ValueTables,
    /// Actions whose constraint held at this iteration.
    pub feasible: ConstrainedActionSets,
    /// Sup-norm change against the previous tables.
    pub value_change: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub snapshots: Vec<Snapshot>,
    pub final_policy: Policy,
    pub converged: bool,
    /// Eventual period of the policy sequence when it cycles with period
    /// 2..=8; `None` when it settles or shows no short cycle.
    pub oscillation_period: Option<usize>,
}

impl SolveTrace {
    pub fn policies(&self) -> impl Iterator<Item = &Policy> {
        self.snapshots.iter().map(|s| &s.policy)
    }
}

/// Smallest `L <= MAX_DETECTED_PERIOD` such that the second half of the
/// sequence repeats with period `L`. Returns `None` for `L = 1` (settled)
/// and when no such period exists.
pub fn detect_period<T: PartialEq>(seq: &[T]) -> Option<usize> {
    let n = seq.len();
    for period in 1..=MAX_DETECTED_PERIOD {
        let from = period.max(n / 2);
        if n < from + 2 * period {
            break;
        }
        if (from..n).all(|i| seq[i] == seq[i - period]) {
            return (period > 1).then_some(period);
        }
    }
    None
}

/// Initial reachability estimate for non-terminal entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitP {
    Constant(f64),
    /// Independent uniform draws in `[0, 1]` from a seeded generator.
    SeededUniform { seed: u64 },
}

impl Default for InitP {
    fn default() -> Self {
        InitP::Constant(0.0)
    }
}

fn initial_tables(spec: &MdpSpec, init: InitP) -> Result<ValueTables> {
    match init {
        InitP::Constant(p0) => {
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::InvalidParameter(format!("initial P {p0} outside [0, 1]")));
            }
            Ok(ValueTables::initial(spec, 0.0, p0))
        }
        InitP::SeededUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = ValueTables::initial(spec, 0.0, 0.0);
            for s in spec.non_terminal_states() {
                for &a in spec.actions(s) {
                    t.set_p(s, a, rng.gen_range(0.0..=1.0));
                }
            }
            Ok(t)
        }
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1)")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveSolution {
    pub policy: Policy,
    pub values: ValueTables,
    pub trace: SolveTrace,
}

/// Naive value iteration: `k` synchronous sweeps of the threshold Bellman
/// operator followed by a final policy refresh.
pub fn naive_value_iteration(
    spec: &MdpSpec,
    theta: f64,
    k: usize,
    init: InitP,
) -> Result<NaiveSolution> {
    check_theta(theta)?;
    if k == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    let mut values = initial_tables(spec, init)?;
    let mut snapshots = Vec::with_capacity(k);
    for _ in 0..k {
        let feasible = ConstrainedActionSets::from_threshold(spec, &values, theta);
        let policy = get_policy(spec, &feasible, &values);
        let next = backup_under(spec, &policy, &values);
        let value_change = next.sup_distance(&values);
        values = next;
        snapshots.push(Snapshot { policy, values: values.clone(), feasible, value_change });
    }
    let feasible = ConstrainedActionSets::from_threshold(spec, &values, theta);
    let policy = get_policy(spec, &feasible, &values);
    let last = snapshots.last().expect("k >= 1");
    let converged = last.policy == policy && last.value_change < CONVERGENCE_TOLERANCE;
    let seq: Vec<&Policy> = snapshots.iter().map(|s| &s.policy).collect();
    let trace = SolveTrace {
        oscillation_period: detect_period(&seq),
        snapshots,
        final_policy: policy.clone(),
        converged,
    };
    Ok(NaiveSolution { policy, values, trace })
}

/// Policy iteration with exact evaluation and memoryless constraints.
pub fn naive_policy_iteration(
    spec: &MdpSpec,
    theta: f64,
    initial: &Policy,
    iterations: usize,
) -> Result<SolveTrace> {
    policy_iteration(spec, theta, initial, iterations, false)
}

/// Shared driver for naive and recursive policy iteration. With
/// `accumulate`, an action stays feasible only while every evaluation so
/// far has satisfied its constraint.
pub(crate) fn policy_iteration(
    spec: &MdpSpec,
    theta: f64,
    initial: &Policy,
    iterations: usize,
    accumulate: bool,
) -> Result<SolveTrace> {
    check_theta(theta)?;
    if iterations == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    let mut policy = Policy::new(spec, initial.as_slice().to_vec())?;
    let mut memory = ConstrainedActionSets::full(spec);
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let eval = evaluate_policy(spec, &policy)?;
        let mut feasible = ConstrainedActionSets::from_threshold(spec, &eval.tables, theta);
        if accumulate {
            feasible.intersect(&memory);
            memory = feasible.clone();
        }
        let value_change = snapshots
            .last()
            .map_or(f64::INFINITY, |prev| prev.values.sup_distance(&eval.tables));
        let next = get_policy(spec, &feasible, &eval.tables);
        snapshots.push(Snapshot {
            policy: std::mem::replace(&mut policy, next),
            values: eval.tables,
            feasible,
            value_change,
        });
    }
    let last = snapshots.last().expect("iterations >= 1");
    let converged = last.policy == policy;
    let seq: Vec<&Policy> = snapshots.iter().map(|s| &s.policy).collect();
    Ok(SolveTrace {
        oscillation_period: detect_period(&seq),
        snapshots,
        final_policy: policy,
        converged,
    })
}

/// Renders a trace as tab-separated rows for one state:
/// `iteration<TAB>policy<TAB>constraint:<a>=<bool>...<TAB>P:<a>=<value>...`.
pub fn render_trace_tsv(spec: &MdpSpec, trace: &SolveTrace, state: StateId) -> String {
    let mut out = String::new();
    for (i, snap) in trace.snapshots.iter().enumerate() {
        let _ = write!(out, "{}\t{}", i + 1, snap.policy.describe(spec));
        for &a in spec.actions(state) {
            let _ = write!(
                out,
                "\tconstraint:{}={}",
                spec.action_name(a),
                snap.feasible.contains(state, a)
            );
        }
        for &a in spec.actions(state) {
            let _ = write!(out, "\tP:{}={}", spec.action_name(a), f9(snap.values.p(state, a)));
        }
        out.push('\n');
    }
    out
}
