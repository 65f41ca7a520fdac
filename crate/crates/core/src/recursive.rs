//! Recursive constraints over a bounded-reachability horizon stack.
//!
//! Stage `n` of the stack holds an estimate of `n`-step failure
//! reachability `P^n(s, a)` together with its own infinite-horizon action
//! value table `Q^n(s, a)`. Stage 1 is the one-step failure mass and never
//! depends on a policy. Each later stage is propagated from the one before
//! under the policy selected at that stage, and an action is admissible at
//! stage `n` only if it passed the threshold at every stage `m <= n`. The
//! admissible sets therefore shrink monotonically along the horizon and
//! stop changing after finitely many stages.

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpSpec, Policy, StateId, ValueTables};
use crate::naive::{
    check_theta, get_policy, policy_iteration, ConstrainedActionSets, SolveTrace,
    CONVERGENCE_TOLERANCE,
};

/// Per-horizon tables `(Q^n, P^n)` for `n = 1..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachStack {
    theta: f64,
    stages: Vec<ValueTables>,
}

impl ReachStack {
    /// Fresh stack: `Q^n = 0` and `P^n = 0` on non-terminals except `P^1`,
    /// which is the one-step failure mass; terminal rows fixed.
    pub fn new(spec: &MdpSpec, theta: f64, horizon: usize) -> Self {
        let mut stages = vec![ValueTables::initial(spec, 0.0, 0.0); horizon];
        for s in spec.non_terminal_states() {
            for &a in spec.actions(s) {
                stages[0].set_p(s, a, spec.one_step_failure_mass(s, a));
            }
        }
        Self { theta, stages }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Tables of stage `n` (1-based).
    pub fn stage(&self, n: usize) -> &ValueTables {
        &self.stages[n - 1]
    }

    pub fn p_hat(&self, n: usize, s: StateId, a: ActionId) -> f64 {
        self.stages[n - 1].p(s, a)
    }

    pub fn q_hat(&self, n: usize, s: StateId, a: ActionId) -> f64 {
        self.stages[n - 1].q(s, a)
    }

    /// `C_a(n; s)`: the threshold held at every stage up to `n`. `n = 0`
    /// is the empty conjunction.
    pub fn constraint(&self, n: usize, s: StateId, a: ActionId) -> bool {
        self.stages[..n].iter().all(|t| t.p(s, a) <= self.theta)
    }

    /// Admissible sets after each stage, `result[n - 1]` for stage `n`.
    pub fn admissible_sets(&self, spec: &MdpSpec) -> Vec<ConstrainedActionSets> {
        let mut sets = ConstrainedActionSets::full(spec);
        self.stages
            .iter()
            .map(|t| {
                sets.retain_within(t, self.theta);
                sets.clone()
            })
            .collect()
    }
}

/// Bookkeeping of one outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterIteration {
    /// Policy selected at each stage.
    pub stage_policies: Vec<Policy>,
    /// `|A^n(s)|` indexed `[stage - 1][state]`.
    pub set_sizes: Vec<Vec<usize>>,
    /// Policy obtained from the stack as it stands after this iteration.
    pub policy: Policy,
    /// Sup-norm change of `Q^N` over this iteration.
    pub q_change: f64,
    /// Sup-norm change over all `P^n` tables during this iteration.
    pub p_change: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveSolveReport {
    pub policy: Policy,
    pub iterations: Vec<OuterIteration>,
    /// Admissible sets after each stage of the final outer iteration.
    pub final_sets: Vec<ConstrainedActionSets>,
    /// Stage after which the admissible sets stop shrinking.
    pub stabilization_horizon: usize,
    /// The final two outer iterations selected identical policies at every
    /// stage and left the reachability stack unchanged.
    pub converged: bool,
}

impl RecursiveSolveReport {
    /// Admissible set at `s` after the final stage.
    pub fn final_admissible(&self, s: StateId) -> &[ActionId] {
        self.final_sets.last().expect("horizon >= 1").get(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveSolution {
    pub policy: Policy,
    pub stack: ReachStack,
    pub report: RecursiveSolveReport,
}

/// Value iteration with recursive constraints: `k` outer iterations, each
/// sweeping stages `1..=N` once.
pub fn recursive_value_iteration(
    spec: &MdpSpec,
    theta: f64,
    k: usize,
    horizon: usize,
) -> Result<RecursiveSolution> {
    check_theta(theta)?;
    if k == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let gamma = spec.gamma();
    let mut stack = ReachStack::new(spec, theta, horizon);
    let mut iterations = Vec::with_capacity(k);

    for _ in 0..k {
        let before = stack.clone();
        let mut sets = ConstrainedActionSets::full(spec);
        let mut stage_policies = Vec::with_capacity(horizon);
        let mut set_sizes = Vec::with_capacity(horizon);
        for n in 0..horizon {
            sets.retain_within(&stack.stages[n], theta);
            set_sizes.push(sets.sizes());
            let policy = get_policy(spec, &sets, &stack.stages[n]);

            let current = &stack.stages[n];
            let mut q_next = Vec::new();
            let mut p_next = Vec::new();
            for s in spec.non_terminal_states() {
                for &a in spec.actions(s) {
                    let (q, p) = spec.transitions(s, a).iter().fold((0.0, 0.0), |(q, p), o| {
                        let a1 = policy.action(o.next);
                        (
                            q + o.prob * (o.reward + gamma * current.q(o.next, a1)),
                            p + o.prob * current.p(o.next, a1),
                        )
                    });
                    q_next.push((s, a, q));
                    p_next.push((s, a, p));
                }
            }
            if n + 1 < horizon {
                let upper = &mut stack.stages[n + 1];
                for (s, a, p) in p_next {
                    upper.set_p(s, a, p);
                }
            }
            let tables = &mut stack.stages[n];
            for (s, a, q) in q_next {
                tables.set_q(s, a, q);
            }
            stage_policies.push(policy);
        }
        let policy = get_policy(spec, &sets, &stack.stages[horizon - 1]);
        let q_change = stack.stages[horizon - 1].q_distance(&before.stages[horizon - 1]);
        let p_change = stack
            .stages
            .iter()
            .zip(&before.stages)
            .map(|(a, b)| a.p_distance(b))
            .fold(0.0, f64::max);
        iterations.push(OuterIteration { stage_policies, set_sizes, policy, q_change, p_change });
    }

    let final_sets = stack.admissible_sets(spec);
    let policy = get_policy(spec, final_sets.last().expect("horizon >= 1"), stack.stage(horizon));
    let converged = match iterations.as_slice() {
        [.., prev, last] => {
            prev.stage_policies == last.stage_policies
                && prev.policy == last.policy
                && last.policy == policy
                && last.p_change < CONVERGENCE_TOLERANCE
        }
        _ => false,
    };
    let sizes: Vec<Vec<usize>> = final_sets.iter().map(|s| s.sizes()).collect();
    let report = RecursiveSolveReport {
        policy: policy.clone(),
        iterations,
        stabilization_horizon: first_stable_stage(&sizes),
        final_sets,
        converged,
    };
    Ok(RecursiveSolution { policy, stack, report })
}

/// Smallest 1-based stage `n` with identical sets for every stage `m >= n`.
fn first_stable_stage(sizes: &[Vec<usize>]) -> usize {
    let last = sizes.len();
    let mut n = last;
    while n > 1 && sizes[n - 2] == sizes[last - 1] {
        n -= 1;
    }
    n
}

/// Stabilization horizon `M` of a completed solve: the first stage after
/// which the admissible sets of the final outer iteration no longer shrink.
pub fn stabilization_horizon(report: &RecursiveSolveReport) -> usize {
    report.stabilization_horizon
}

/// Policy iteration with recursive constraints: an action stays feasible
/// only while every exact evaluation so far has kept it under `theta`.
pub fn recursive_policy_iteration(
    spec: &MdpSpec,
    theta: f64,
    initial: &Policy,
    iterations: usize,
) -> Result<SolveTrace> {
    policy_iteration(spec, theta, initial, iterations, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_counter_mdp, CounterParams, LEFT, RIGHT};

    fn counter() -> MdpSpec {
        build_counter_mdp(CounterParams::default()).unwrap()
    }

    #[test]
    fn stack_initialization() {
        let spec = counter();
        let stack = ReachStack::new(&spec, 0.85, 3);
        assert_eq!(stack.p_hat(1, 0, LEFT), 0.7);
        assert!((stack.p_hat(1, 0, RIGHT) - 0.3).abs() < 1e-15);
        assert_eq!(stack.p_hat(1, 1, RIGHT), 0.0);
        for n in 1..=3 {
            assert_eq!(stack.p_hat(n, 2, 0), 1.0);
            assert_eq!(stack.p_hat(n, 3, 0), 0.0);
        }
        assert!(stack.constraint(0, 0, LEFT));
    }

    #[test]
    fn stable_stage_scan() {
        assert_eq!(first_stable_stage(&[vec![2], vec![2], vec![2]]), 1);
        assert_eq!(first_stable_stage(&[vec![2], vec![1], vec![1]]), 2);
        assert_eq!(first_stable_stage(&[vec![2], vec![2], vec![1]]), 3);
    }

    #[test]
    fn rejects_bad_arguments() {
        let spec = counter();
        assert!(recursive_value_iteration(&spec, 0.5, 0, 3).is_err());
        assert!(recursive_value_iteration(&spec, 0.5, 3, 0).is_err());
        assert!(recursive_value_iteration(&spec, -0.1, 3, 3).is_err());
    }

    #[test]
    fn single_stage_is_one_step_lookahead() {
        let spec = counter();
        let sol = recursive_value_iteration(&spec, 0.85, 15, 1).unwrap();
        assert_eq!(sol.report.final_admissible(0), &[LEFT, RIGHT]);
        assert_eq!(sol.policy.action(0), LEFT);
    }
}
