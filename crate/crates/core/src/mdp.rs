//! Finite MDP data model shared by every solver.
//!
//! States and actions are dense `usize` indices with a side table of names.
//! Terminal states carry no transition rows; their only semantics is the
//! terminal self-reward `R(s, a, s)` collected when an episode ends there.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

/// Absolute tolerance on the total mass of a transition distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default episode cap for [`simulate_episode`].
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// One entry of a transition distribution `T(s, a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
}

/// A finite MDP with terminal and failure state sets.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpSpec {
    state_names: Vec<String>,
    action_names: Vec<String>,
    terminal: Vec<bool>,
    failure: Vec<bool>,
    available: Vec<Vec<ActionId>>,
    transitions: Vec<Vec<Vec<Outcome>>>,
    terminal_rewards: Vec<Vec<f64>>,
    gamma: f64,
}

impl MdpSpec {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownName { kind: "state", name: name.to_string() })
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId> {
        self.action_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownName { kind: "action", name: name.to_string() })
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn is_failure(&self, s: StateId) -> bool {
        self.failure[s]
    }

    /// Available actions `A(s)`, in ascending index order.
    pub fn actions(&self, s: StateId) -> &[ActionId] {
        &self.available[s]
    }

    pub fn is_available(&self, s: StateId, a: ActionId) -> bool {
        self.available[s].binary_search(&a).is_ok()
    }

    /// Transition distribution `T(s, a)`; empty for terminal states.
    pub fn transitions(&self, s: StateId, a: ActionId) -> &[Outcome] {
        &self.transitions[s][a]
    }

    /// Terminal self-reward `R(s, a, s)`.
    pub fn terminal_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.terminal_rewards[s][a]
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.num_states()
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states().filter(move |&s| !self.terminal[s])
    }

    /// Probability mass that `T(s, a)` puts directly on failure states.
    pub fn one_step_failure_mass(&self, s: StateId, a: ActionId) -> f64 {
        self.transitions(s, a)
            .iter()
            .filter(|o| self.failure[o.next])
            .map(|o| o.prob)
            .sum()
    }

    /// Number of deterministic policies, `prod_s |A(s)|`, saturating.
    pub fn policy_count(&self) -> u128 {
        self.available
            .iter()
            .fold(1u128, |acc, acts| acc.saturating_mul(acts.len() as u128))
    }
}

/// Incremental constructor for [`MdpSpec`].
///
/// `build` only checks that indices are in range; semantic invariants are
/// reported by [`validate`].
#[derive(Debug, Default)]
pub struct MdpBuilder {
    state_names: Vec<String>,
    action_names: Vec<String>,
    terminal: Vec<bool>,
    failure: Vec<bool>,
    allowed: Vec<(StateId, ActionId)>,
    transitions: Vec<(StateId, ActionId, Outcome)>,
    terminal_rewards: Vec<(StateId, ActionId, f64)>,
    gamma: f64,
}

impl MdpBuilder {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, ..Self::default() }
    }

    pub fn gamma(&mut self, gamma: f64) -> &mut Self {
        self.gamma = gamma;
        self
    }

    pub fn state(&mut self, name: impl Into<String>, terminal: bool, failure: bool) -> StateId {
        self.state_names.push(name.into());
        self.terminal.push(terminal);
        self.failure.push(failure);
        self.state_names.len() - 1
    }

    pub fn action(&mut self, name: impl Into<String>) -> ActionId {
        self.action_names.push(name.into());
        self.action_names.len() - 1
    }

    /// Marks `a` as available in `s` without adding transitions.
    pub fn allow(&mut self, s: StateId, a: ActionId) -> &mut Self {
        self.allowed.push((s, a));
        self
    }

    /// Adds mass to `T(s, a)(next)`; repeated targets are merged.
    pub fn transition(
        &mut self,
        s: StateId,
        a: ActionId,
        next: StateId,
        prob: f64,
        reward: f64,
    ) -> &mut Self {
        self.allowed.push((s, a));
        self.transitions.push((s, a, Outcome { next, prob, reward }));
        self
    }

    /// Sets `R(s, a, s)` for a terminal state and makes `a` available there.
    pub fn terminal_reward(&mut self, s: StateId, a: ActionId, reward: f64) -> &mut Self {
        self.allowed.push((s, a));
        self.terminal_rewards.push((s, a, reward));
        self
    }

    pub fn build(&self) -> Result<MdpSpec> {
        let ns = self.state_names.len();
        let na = self.action_names.len();
        let check = |s: StateId, a: ActionId| -> Result<()> {
            if s >= ns {
                return Err(Error::InvalidParameter(format!("state index {s} out of range")));
            }
            if a >= na {
                return Err(Error::InvalidParameter(format!("action index {a} out of range")));
            }
            Ok(())
        };

        let mut available = vec![Vec::new(); ns];
        for &(s, a) in &self.allowed {
            check(s, a)?;
            available[s].push(a);
        }
        for acts in &mut available {
            acts.sort_unstable();
            acts.dedup();
        }

        let mut transitions = vec![vec![Vec::<Outcome>::new(); na]; ns];
        for &(s, a, o) in &self.transitions {
            check(s, a)?;
            if o.next >= ns {
                return Err(Error::InvalidParameter(format!("state index {} out of range", o.next)));
            }
            let row = &mut transitions[s][a];
            match row.iter_mut().find(|e| e.next == o.next) {
                Some(e) if e.reward == o.reward => e.prob += o.prob,
                Some(_) => {
                    return Err(Error::InvalidParameter(format!(
                        "conflicting rewards for ({}, {}) -> {}",
                        self.state_names[s], self.action_names[a], self.state_names[o.next]
                    )))
                }
                None => row.push(o),
            }
        }
        for acts in &mut transitions {
            for row in acts {
                row.sort_by_key(|o| o.next);
            }
        }

        let mut terminal_rewards = vec![vec![0.0; na]; ns];
        for &(s, a, r) in &self.terminal_rewards {
            check(s, a)?;
            terminal_rewards[s][a] = r;
        }

        Ok(MdpSpec {
            state_names: self.state_names.clone(),
            action_names: self.action_names.clone(),
            terminal: self.terminal.clone(),
            failure: self.failure.clone(),
            available,
            transitions,
            terminal_rewards,
            gamma: self.gamma,
        })
    }
}

/// A single invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InvalidGamma { gamma: f64 },
    FailureNotTerminal { state: String },
    EmptyActionSet { state: String },
    BadMass { state: String, action: String, sum: f64 },
    NegativeMass { state: String, action: String, next: String, prob: f64 },
    MissingTransition { state: String, action: String },
    TerminalTransition { state: String, action: String },
    UnavailableTransition { state: String, action: String },
    DuplicateName { kind: &'static str, name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidGamma { gamma } => write!(f, "discount {gamma} outside [0, 1)"),
            Violation::FailureNotTerminal { state } => {
                write!(f, "failure state {state} is not terminal")
            }
            Violation::EmptyActionSet { state } => write!(f, "empty action set at {state}"),
            Violation::BadMass { state, action, sum } => {
                write!(f, "distribution sums to {sum} at ({state}, {action})")
            }
            Violation::NegativeMass { state, action, next, prob } => {
                write!(f, "negative mass {prob} on {next} at ({state}, {action})")
            }
            Violation::MissingTransition { state, action } => {
                write!(f, "missing transition distribution at ({state}, {action})")
            }
            Violation::TerminalTransition { state, action } => {
                write!(f, "terminal state {state} has outgoing transitions under {action}")
            }
            Violation::UnavailableTransition { state, action } => {
                write!(f, "transition defined for unavailable action ({state}, {action})")
            }
            Violation::DuplicateName { kind, name } => write!(f, "duplicate {kind} name {name}"),
        }
    }
}

/// Lists every invariant violation of `spec`; an empty list means valid.
pub fn validate(spec: &MdpSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(0.0..1.0).contains(&spec.gamma) {
        out.push(Violation::InvalidGamma { gamma: spec.gamma });
    }
    for (kind, names) in [("state", &spec.state_names), ("action", &spec.action_names)] {
        let mut seen = HashMap::new();
        for n in names {
            if seen.insert(n.as_str(), ()).is_some() {
                out.push(Violation::DuplicateName { kind, name: n.clone() });
            }
        }
    }
    for s in spec.states() {
        let state = || spec.state_names[s].clone();
        if spec.failure[s] && !spec.terminal[s] {
            out.push(Violation::FailureNotTerminal { state: state() });
        }
        if spec.available[s].is_empty() {
            out.push(Violation::EmptyActionSet { state: state() });
        }
        for a in 0..spec.num_actions() {
            let action = || spec.action_names[a].clone();
            let row = &spec.transitions[s][a];
            if spec.terminal[s] {
                if !row.is_empty() {
                    out.push(Violation::TerminalTransition { state: state(), action: action() });
                }
                continue;
            }
            if !spec.is_available(s, a) {
                if !row.is_empty() {
                    out.push(Violation::UnavailableTransition { state: state(), action: action() });
                }
                continue;
            }
            if row.is_empty() {
                out.push(Violation::MissingTransition { state: state(), action: action() });
                continue;
            }
            for o in row.iter().filter(|o| o.prob < 0.0) {
                out.push(Violation::NegativeMass {
                    state: state(),
                    action: action(),
                    next: spec.state_names[o.next].clone(),
                    prob: o.prob,
                });
            }
            let sum: f64 = row.iter().map(|o| o.prob).sum();
            if (sum - 1.0).abs() > MASS_TOLERANCE {
                out.push(Violation::BadMass { state: state(), action: action(), sum });
            }
        }
    }
    out
}

/// Deterministic policy: one available action per state, terminals included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    choice: Vec<ActionId>,
}

impl Policy {
    pub fn new(spec: &MdpSpec, choice: Vec<ActionId>) -> Result<Self> {
        if choice.len() != spec.num_states() {
            return Err(Error::InvalidPolicy(format!(
                "expected {} entries, got {}",
                spec.num_states(),
                choice.len()
            )));
        }
        for (s, &a) in choice.iter().enumerate() {
            if !spec.is_available(s, a) {
                return Err(Error::InvalidPolicy(format!(
                    "action {a} not available at {}",
                    spec.state_name(s)
                )));
            }
        }
        Ok(Self { choice })
    }

    /// Builds a policy from per-state choices without checking availability.
    pub(crate) fn from_raw(choice: Vec<ActionId>) -> Self {
        Self { choice }
    }

    /// Lowest-index available action everywhere.
    pub fn first_available(spec: &MdpSpec) -> Self {
        Self::from_raw(spec.states().map(|s| spec.actions(s)[0]).collect())
    }

    /// Uses `a` wherever available and the lowest-index action elsewhere.
    pub fn uniform(spec: &MdpSpec, a: ActionId) -> Self {
        Self::from_raw(
            spec.states()
                .map(|s| if spec.is_available(s, a) { a } else { spec.actions(s)[0] })
                .collect(),
        )
    }

    pub fn action(&self, s: StateId) -> ActionId {
        self.choice[s]
    }

    pub fn set(&mut self, s: StateId, a: ActionId) {
        self.choice[s] = a;
    }

    pub fn as_slice(&self) -> &[ActionId] {
        &self.choice
    }

    /// `state=action` pairs over non-terminal states, comma-separated.
    pub fn describe(&self, spec: &MdpSpec) -> String {
        spec.non_terminal_states()
            .map(|s| format!("{}={}", spec.state_name(s), spec.action_name(self.choice[s])))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Paired action-value tables: expected discounted return `q` and failure
/// reachability `p`, addressed by `(state, action)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTables {
    num_actions: usize,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl ValueTables {
    /// Non-terminal entries set to `q0`/`p0`; terminal rows fixed to
    /// `R(s, a, s)` and `1(s in F)`.
    pub fn initial(spec: &MdpSpec, q0: f64, p0: f64) -> Self {
        let mut t = Self::zeros(spec);
        for s in spec.states() {
            for &a in spec.actions(s) {
                if spec.is_terminal(s) {
                    t.set(s, a, spec.terminal_reward(s, a), terminal_reach(spec, s));
                } else {
                    t.set(s, a, q0, p0);
                }
            }
        }
        t
    }

    pub fn zeros(spec: &MdpSpec) -> Self {
        let n = spec.num_states() * spec.num_actions();
        Self { num_actions: spec.num_actions(), q: vec![0.0; n], p: vec![0.0; n] }
    }

    #[inline]
    fn idx(&self, s: StateId, a: ActionId) -> usize {
        s * self.num_actions + a
    }

    #[inline]
    pub fn q(&self, s: StateId, a: ActionId) -> f64 {
        self.q[self.idx(s, a)]
    }

    #[inline]
    pub fn p(&self, s: StateId, a: ActionId) -> f64 {
        self.p[self.idx(s, a)]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, q: f64, p: f64) {
        let i = self.idx(s, a);
        self.q[i] = q;
        self.p[i] = p;
    }

    pub fn set_q(&mut self, s: StateId, a: ActionId, q: f64) {
        let i = self.idx(s, a);
        self.q[i] = q;
    }

    pub fn set_p(&mut self, s: StateId, a: ActionId, p: f64) {
        let i = self.idx(s, a);
        self.p[i] = p;
    }

    /// Sup-norm distance over both tables.
    pub fn sup_distance(&self, other: &ValueTables) -> f64 {
        self.q_distance(other).max(self.p_distance(other))
    }

    pub fn q_distance(&self, other: &ValueTables) -> f64 {
        sup_diff(&self.q, &other.q)
    }

    pub fn p_distance(&self, other: &ValueTables) -> f64 {
        sup_diff(&self.p, &other.p)
    }
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `1(s in F)` as a float.
#[inline]
pub(crate) fn terminal_reach(spec: &MdpSpec, s: StateId) -> f64 {
    if spec.is_failure(s) {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
}

/// A sampled path. When the episode terminates, the last step is the
/// terminal `(s_T, a_T, r_T)` entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub trajectory: Vec<Step>,
    pub discounted_return: f64,
    pub hit_failure: bool,
    /// First hitting time `T` of a terminal state; `None` when truncated.
    pub length: Option<usize>,
    pub truncated: bool,
}

/// Samples one episode from `start` under `policy`. A non-terminating run is
/// cut after `max_steps` transitions and flagged `truncated`.
pub fn simulate_episode(
    spec: &MdpSpec,
    policy: &Policy,
    start: StateId,
    rng_seed: u64,
    max_steps: usize,
) -> Result<EpisodeOutcome> {
    if max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
    }
    if start >= spec.num_states() {
        return Err(Error::InvalidParameter(format!("start state {start} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let gamma = spec.gamma();
    let mut trajectory = Vec::new();
    let mut discounted_return = 0.0;
    let mut discount = 1.0;
    let mut s = start;
    for t in 0..=max_steps {
        let a = policy.action(s);
        if spec.is_terminal(s) {
            let r = spec.terminal_reward(s, a);
            trajectory.push(Step { state: s, action: a, reward: r });
            discounted_return += discount * r;
            return Ok(EpisodeOutcome {
                trajectory,
                discounted_return,
                hit_failure: spec.is_failure(s),
                length: Some(t),
                truncated: false,
            });
        }
        if t == max_steps {
            break;
        }
        let row = spec.transitions(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = row[row.len() - 1];
        for o in row {
            acc += o.prob;
            if u < acc {
                pick = *o;
                break;
            }
        }
        trajectory.push(Step { state: s, action: a, reward: pick.reward });
        discounted_return += discount * pick.reward;
        discount *= gamma;
        s = pick.next;
    }
    Ok(EpisodeOutcome {
        trajectory,
        discounted_return,
        hit_failure: false,
        length: None,
        truncated: true,
    })
}

/// Aggregate of many seeded episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloSummary {
    pub episodes: usize,
    pub truncated: usize,
    pub failure_rate: f64,
    pub failure_std_error: f64,
    pub mean_return: f64,
    pub return_std_error: f64,
}

/// Runs `episodes` episodes, episode `i` seeded with `seed + i`. Truncated
/// episodes are excluded from both estimates.
pub fn monte_carlo(
    spec: &MdpSpec,
    policy: &Policy,
    start: StateId,
    episodes: usize,
    seed: u64,
    max_steps: usize,
) -> Result<MonteCarloSummary> {
    let mut n = 0usize;
    let mut truncated = 0usize;
    let mut failures = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..episodes {
        let ep = simulate_episode(spec, policy, start, seed.wrapping_add(i as u64), max_steps)?;
        if ep.truncated {
            truncated += 1;
            continue;
        }
        n += 1;
        failures += ep.hit_failure as usize;
        sum += ep.discounted_return;
        sum_sq += ep.discounted_return * ep.discounted_return;
    }
    let nf = n.max(1) as f64;
    let rate = failures as f64 / nf;
    let mean = sum / nf;
    let var = if n > 1 { (sum_sq - nf * mean * mean) / (nf - 1.0) } else { 0.0 };
    Ok(MonteCarloSummary {
        episodes: n,
        truncated,
        failure_rate: rate,
        failure_std_error: (rate * (1.0 - rate) / nf).sqrt(),
        mean_return: mean,
        return_std_error: (var.max(0.0) / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MdpBuilder {
        let mut b = MdpBuilder::new(0.9);
        let s = b.state("s", false, false);
        let x = b.state("x", true, true);
        let g = b.state("g", true, false);
        let go = b.action("go");
        b.transition(s, go, x, 0.25, -1.0)
            .transition(s, go, g, 0.75, -1.0)
            .terminal_reward(x, go, 0.0)
            .terminal_reward(g, go, 5.0);
        b
    }

    #[test]
    fn tiny_is_valid() {
        assert!(validate(&tiny().build().unwrap()).is_empty());
    }

    #[test]
    fn duplicate_targets_merge() {
        let mut b = tiny();
        b.transition(0, 0, 1, 0.0, -1.0);
        let spec = b.build().unwrap();
        assert_eq!(spec.transitions(0, 0).len(), 2);
    }

    #[test]
    fn reports_terminal_rows_and_bad_gamma() {
        let mut b = tiny();
        b.gamma(1.0).transition(1, 0, 2, 1.0, 0.0);
        let v = validate(&b.build().unwrap());
        assert!(v.contains(&Violation::InvalidGamma { gamma: 1.0 }));
        assert!(v.iter().any(|x| matches!(x, Violation::TerminalTransition { .. })));
    }

    #[test]
    fn negative_mass_is_reported() {
        let mut b = MdpBuilder::new(0.5);
        let s = b.state("s", false, false);
        let t = b.state("t", true, false);
        let a = b.action("a");
        b.transition(s, a, t, 1.5, 0.0).transition(s, a, s, -0.5, 0.0).terminal_reward(t, a, 0.0);
        let v = validate(&b.build().unwrap());
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::NegativeMass { .. }));
    }

    #[test]
    fn failure_must_be_terminal() {
        let mut b = MdpBuilder::new(0.5);
        let s = b.state("s", false, true);
        let a = b.action("a");
        b.transition(s, a, s, 1.0, 0.0);
        let v = validate(&b.build().unwrap());
        assert_eq!(v, vec![Violation::FailureNotTerminal { state: "s".into() }]);
    }

    #[test]
    fn policy_rejects_unavailable_action() {
        let mut b = tiny();
        b.action("other");
        let spec = b.build().unwrap();
        assert!(Policy::new(&spec, vec![1, 0, 0]).is_err());
        assert!(Policy::new(&spec, vec![0, 0]).is_err());
        assert!(Policy::new(&spec, vec![0, 0, 0]).is_ok());
    }

    #[test]
    fn episode_return_matches_trajectory() {
        let spec = tiny().build().unwrap();
        let pi = Policy::first_available(&spec);
        for seed in 0..50 {
            let ep = simulate_episode(&spec, &pi, 0, seed, 10).unwrap();
            let recomputed: f64 = ep
                .trajectory
                .iter()
                .enumerate()
                .map(|(t, st)| 0.9f64.powi(t as i32) * st.reward)
                .sum();
            assert!((recomputed - ep.discounted_return).abs() < 1e-12);
            let last = ep.trajectory.last().unwrap();
            assert_eq!(ep.hit_failure, spec.is_failure(last.state));
            assert_eq!(ep.length, Some(1));
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let mut b = MdpBuilder::new(0.5);
        let s = b.state("loop", false, false);
        b.state("t", true, false);
        let a = b.action("stay");
        b.transition(s, a, s, 1.0, -1.0).terminal_reward(1, a, 0.0);
        let spec = b.build().unwrap();
        let pi = Policy::first_available(&spec);
        let ep = simulate_episode(&spec, &pi, s, 3, 7).unwrap();
        assert!(ep.truncated);
        assert_eq!(ep.length, None);
        assert_eq!(ep.trajectory.len(), 7);
        assert!(!ep.hit_failure);
        assert!(simulate_episode(&spec, &pi, s, 3, 0).is_err());
    }
}
