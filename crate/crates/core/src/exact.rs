//! Ground truth: exact policy evaluation, bounded reachability by backward
//! induction, the counter-MDP closed forms and policy enumeration.
//!
//! Reachability is never discounted.

use crate::error::{Error, Result};
use crate::mdp::{terminal_reach, ActionId, MdpSpec, Policy, StateId, ValueTables};

/// Default cap on the number of enumerated policies.
pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// How the policy-evaluation linear systems are solved.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum SolveMethod {
    /// Dense Gaussian elimination with partial pivoting.
    #[default]
    Direct,
    /// Jacobi iteration to the given sup-norm tolerance.
    FixedPoint { tolerance: f64, max_sweeps: usize },
}

impl SolveMethod {
    pub fn fixed_point() -> Self {
        SolveMethod::FixedPoint { tolerance: 1e-12, max_sweeps: 1_000_000 }
    }
}

/// Exact values of a fixed policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactEvaluation {
    /// `V(s; pi)`.
    pub v: Vec<f64>,
    /// `P(s; pi)`, unbounded failure reachability.
    pub p: Vec<f64>,
    /// `Q(s, a; pi)` and `P(s, a; pi)`.
    pub tables: ValueTables,
}

impl ExactEvaluation {
    pub fn q(&self, s: StateId, a: ActionId) -> f64 {
        self.tables.q(s, a)
    }

    pub fn p_action(&self, s: StateId, a: ActionId) -> f64 {
        self.tables.p(s, a)
    }
}

/// States that cannot reach any terminal state under `policy`.
pub fn non_absorbing_states(spec: &MdpSpec, policy: &Policy) -> Vec<StateId> {
    let n = spec.num_states();
    let mut preds = vec![Vec::new(); n];
    for s in spec.non_terminal_states() {
        for o in spec.transitions(s, policy.action(s)) {
            if o.prob > 0.0 {
                preds[o.next].push(s);
            }
        }
    }
    let mut reaches = vec![false; n];
    let mut stack: Vec<StateId> = spec.states().filter(|&s| spec.is_terminal(s)).collect();
    for &s in &stack {
        reaches[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &u in &preds[s] {
            if !reaches[u] {
                reaches[u] = true;
                stack.push(u);
            }
        }
    }
    spec.states().filter(|&s| !reaches[s]).collect()
}

pub fn evaluate_policy(spec: &MdpSpec, policy: &Policy) -> Result<ExactEvaluation> {
    evaluate_policy_with(spec, policy, SolveMethod::Direct)
}

pub fn evaluate_policy_with(
    spec: &MdpSpec,
    policy: &Policy,
    method: SolveMethod,
) -> Result<ExactEvaluation> {
    let stuck = non_absorbing_states(spec, policy);
    if !stuck.is_empty() {
        return Err(Error::NonAbsorbing {
            states: stuck.iter().map(|&s| spec.state_name(s).to_string()).collect(),
        });
    }

    let inner: Vec<StateId> = spec.non_terminal_states().collect();
    let mut pos = vec![usize::MAX; spec.num_states()];
    for (i, &s) in inner.iter().enumerate() {
        pos[s] = i;
    }
    let m = inner.len();
    let gamma = spec.gamma();

    // Boundary values on terminals.
    let v_term = |s: StateId| spec.terminal_reward(s, policy.action(s));
    let p_term = |s: StateId| terminal_reach(spec, s);

    let mut coupling = vec![0.0; m * m];
    let mut v_rhs = vec![0.0; m];
    let mut p_rhs = vec![0.0; m];
    for (i, &s) in inner.iter().enumerate() {
        for o in spec.transitions(s, policy.action(s)) {
            v_rhs[i] += o.prob * o.reward;
            if spec.is_terminal(o.next) {
                v_rhs[i] += o.prob * gamma * v_term(o.next);
                p_rhs[i] += o.prob * p_term(o.next);
            } else {
                coupling[i * m + pos[o.next]] += o.prob;
            }
        }
    }

    let solve = |scale: f64, rhs: &[f64]| -> Result<Vec<f64>> {
        match method {
            SolveMethod::Direct => {
                let mut a = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        a[i * m + j] = -scale * coupling[i * m + j];
                    }
                    a[i * m + i] += 1.0;
                }
                solve_dense(m, a, rhs.to_vec())
            }
            SolveMethod::FixedPoint { tolerance, max_sweeps } => {
                fixed_point(m, &coupling, scale, rhs, tolerance, max_sweeps)
            }
        }
    };
    let v_inner = solve(gamma, &v_rhs)?;
    let p_inner = solve(1.0, &p_rhs)?;

    let mut w_v = vec![0.0; spec.num_states()];
    let mut w_p = vec![0.0; spec.num_states()];
    for s in spec.states() {
        if spec.is_terminal(s) {
            w_v[s] = v_term(s);
            w_p[s] = p_term(s);
        } else {
            w_v[s] = v_inner[pos[s]];
            w_p[s] = p_inner[pos[s]];
        }
    }

    let mut tables = ValueTables::zeros(spec);
    for s in spec.states() {
        for &a in spec.actions(s) {
            if spec.is_terminal(s) {
                tables.set(s, a, spec.terminal_reward(s, a), p_term(s));
            } else {
                let (q, p) = backup(spec, s, a, &w_v, &w_p);
                tables.set(s, a, q, p);
            }
        }
    }
    let v = spec.states().map(|s| tables.q(s, policy.action(s))).collect();
    let p = spec.states().map(|s| tables.p(s, policy.action(s))).collect();
    Ok(ExactEvaluation { v, p, tables })
}

/// One-step expansion `(sum T (R + gamma v'), sum T p')` at a non-terminal.
fn backup(spec: &MdpSpec, s: StateId, a: ActionId, v: &[f64], p: &[f64]) -> (f64, f64) {
    let gamma = spec.gamma();
    spec.transitions(s, a).iter().fold((0.0, 0.0), |(q, r), o| {
        (q + o.prob * (o.reward + gamma * v[o.next]), r + o.prob * p[o.next])
    })
}

/// Solves `a x = b` for a dense row-major `n x n` matrix.
pub(crate) fn solve_dense(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-13 {
            return Err(Error::Singular);
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            b.swap(pivot, col);
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - tail) / a[i * n + i];
    }
    Ok(x)
}

fn fixed_point(
    n: usize,
    coupling: &[f64],
    scale: f64,
    rhs: &[f64],
    tolerance: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; n];
    for _ in 0..max_sweeps {
        let next: Vec<f64> = (0..n)
            .map(|i| rhs[i] + scale * (0..n).map(|j| coupling[i * n + j] * x[j]).sum::<f64>())
            .collect();
        let change = crate::mdp::sup_diff(&next, &x);
        x = next;
        if change < tolerance {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { sweeps: max_sweeps })
}

/// `n`-bounded failure reachability of a fixed policy.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedReach {
    pub horizon: usize,
    /// `P^n(s; pi)`.
    pub p_n: Vec<f64>,
    /// `P^n(s, a; pi)`, stored in the `p` table.
    pub p_n_action: ValueTables,
}

impl BoundedReach {
    pub fn action(&self, s: StateId, a: ActionId) -> f64 {
        self.p_n_action.p(s, a)
    }
}

/// Backward induction from `P^0(s) = 1(s in F)`.
pub fn bounded_reachability(spec: &MdpSpec, policy: &Policy, n: usize) -> Result<BoundedReach> {
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut prev: Vec<f64> = spec.states().map(|s| terminal_reach(spec, s)).collect();
    let mut table = ValueTables::zeros(spec);
    for _ in 0..n {
        for s in spec.states() {
            for &a in spec.actions(s) {
                let value = if spec.is_terminal(s) {
                    terminal_reach(spec, s)
                } else {
                    spec.transitions(s, a).iter().map(|o| o.prob * prev[o.next]).sum()
                };
                table.set_p(s, a, value);
            }
        }
        prev = spec.states().map(|s| table.p(s, policy.action(s))).collect();
    }
    Ok(BoundedReach { horizon: n, p_n: prev, p_n_action: table })
}

/// The eight closed-form values at `s1` of the counter-MDP. The first letter
/// is the action taken at `s1`, the second the policy followed afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterClosedForm {
    pub q_ll: f64,
    pub q_rl: f64,
    pub q_lr: f64,
    pub q_rr: f64,
    pub p_ll: f64,
    pub p_rl: f64,
    pub p_lr: f64,
    pub p_rr: f64,
}

impl CounterClosedForm {
    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("Q_LL", self.q_ll),
            ("Q_RL", self.q_rl),
            ("Q_LR", self.q_lr),
            ("Q_RR", self.q_rr),
            ("P_LL", self.p_ll),
            ("P_RL", self.p_rl),
            ("P_LR", self.p_lr),
            ("P_RR", self.p_rr),
        ]
    }
}

pub fn closed_form_counter(p: f64, gamma: f64) -> Result<CounterClosedForm> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} outside [0, 1)")));
    }
    let q = 1.0 - p;
    let g = gamma;
    let denom_l = 1.0 - g * g * p * q;
    Ok(CounterClosedForm {
        p_ll: p / (1.0 - p * q),
        q_ll: -(1.0 + g * q) / denom_l,
        p_rl: 1.0 - p * q / (1.0 - p * q),
        q_rl: -(1.0 + g * p + g * g * p * (p - q)) / denom_l,
        p_lr: 2.0 * p / (p + 1.0),
        q_lr: -(1.0 + g * (1.0 - 2.0 * p)) / (1.0 - g * p),
        p_rr: 1.0 / (p + 1.0),
        q_rr: -1.0 / (1.0 - g * p),
    })
}

/// Same eight quantities read off [`evaluate_policy`] on the built MDP.
pub fn counter_values_by_evaluation(spec: &MdpSpec) -> Result<CounterClosedForm> {
    use crate::env::{LEFT, RIGHT};
    let s1 = spec.state_id(crate::env::COUNTER_S1)?;
    let pi_l = Policy::uniform(spec, LEFT);
    let pi_r = Policy::uniform(spec, RIGHT);
    let el = evaluate_policy(spec, &pi_l)?;
    let er = evaluate_policy(spec, &pi_r)?;
    Ok(CounterClosedForm {
        q_ll: el.q(s1, LEFT),
        q_rl: el.q(s1, RIGHT),
        q_lr: er.q(s1, LEFT),
        q_rr: er.q(s1, RIGHT),
        p_ll: el.p_action(s1, LEFT),
        p_rl: el.p_action(s1, RIGHT),
        p_lr: er.p_action(s1, LEFT),
        p_rr: er.p_action(s1, RIGHT),
    })
}

/// Iterator over every deterministic policy in lexicographic order of the
/// per-state action indices (the last state varies fastest).
#[derive(Clone, Debug)]
pub struct PolicyEnumeration<'a> {
    spec: &'a MdpSpec,
    cursor: Option<Vec<usize>>,
    remaining: u128,
}

impl Iterator for PolicyEnumeration<'_> {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let cursor = self.cursor.as_mut()?;
        let policy = Policy::from_raw(
            cursor.iter().enumerate().map(|(s, &k)| self.spec.actions(s)[k]).collect(),
        );
        self.remaining -= 1;
        let mut s = cursor.len();
        loop {
            if s == 0 {
                self.cursor = None;
                break;
            }
            s -= 1;
            cursor[s] += 1;
            if cursor[s] < self.spec.actions(s).len() {
                break;
            }
            cursor[s] = 0;
        }
        Some(policy)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

pub fn enumerate_policies(spec: &MdpSpec, cap: u128) -> Result<PolicyEnumeration<'_>> {
    let count = spec.policy_count();
    if count > cap {
        return Err(Error::PolicySpaceTooLarge { count, cap });
    }
    if count == 0 {
        return Err(Error::InvalidParameter("some state has no available action".into()));
    }
    Ok(PolicyEnumeration { spec, cursor: Some(vec![0; spec.num_states()]), remaining: count })
}
