#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safevi::{MdpBuilder, MdpSpec, Policy};

/// Random absorbing MDP: `states` non-terminals, `actions` actions, a goal
/// terminal and (optionally) a failure terminal. Every available action
/// puts at least 10% of its mass on a terminal, so every policy absorbs.
pub fn random_mdp(seed: u64, states: usize, actions: usize, with_failure: bool) -> MdpSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = MdpBuilder::new(rng.gen_range(0.5..0.99));
    let nt: Vec<_> = (0..states).map(|i| b.state(format!("s{i}"), false, false)).collect();
    let goal = b.state("G", true, false);
    let fail = with_failure.then(|| b.state("X", true, true));
    let acts: Vec<_> = (0..actions).map(|i| b.action(format!("a{i}"))).collect();
    let terminals: Vec<_> = std::iter::once(goal).chain(fail).collect();
    let targets: Vec<_> = nt.iter().chain(&terminals).copied().collect();
    for &s in &nt {
        let forced = rng.gen_range(0..actions);
        for (i, &a) in acts.iter().enumerate() {
            if i != forced && rng.gen_bool(0.3) {
                continue;
            }
            let mut w: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            let exit = states + rng.gen_range(0..terminals.len());
            let total: f64 = w.iter().sum();
            for x in &mut w {
                *x = 0.9 * *x / total;
            }
            w[exit] += 0.1;
            for (&next, &p) in targets.iter().zip(&w) {
                let reward = (rng.gen_range(-2.0..1.0f64) * 1000.0).round() / 1000.0;
                b.transition(s, a, next, p, reward);
            }
        }
    }
    for &t in &terminals {
        b.terminal_reward(t, acts[0], 0.0);
    }
    b.build().unwrap()
}

pub fn random_policy(spec: &MdpSpec, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choice = spec
        .states()
        .map(|s| {
            let acts = spec.actions(s);
            acts[rng.gen_range(0..acts.len())]
        })
        .collect();
    Policy::new(spec, choice).unwrap()
}
