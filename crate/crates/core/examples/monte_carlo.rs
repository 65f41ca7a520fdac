//! Seeded simulation of the safe counter-MDP policy against its exact
//! failure probability and value.

use safevi::env::{build_counter_mdp, CounterParams, RIGHT};
use safevi::exact::evaluate_policy;
use safevi::mdp::{monte_carlo, simulate_episode, DEFAULT_MAX_STEPS};
use safevi::Policy;

fn main() -> safevi::Result<()> {
    let spec = build_counter_mdp(CounterParams::default())?;
    let pi = Policy::uniform(&spec, RIGHT);

    let ep = simulate_episode(&spec, &pi, 0, 1, DEFAULT_MAX_STEPS)?;
    let path: Vec<&str> = ep.trajectory.iter().map(|s| spec.state_name(s.state)).collect();
    println!("episode 1: {} (return {:.3})", path.join(" -> "), ep.discounted_return);

    let exact = evaluate_policy(&spec, &pi)?;
    let mc = monte_carlo(&spec, &pi, 0, 100_000, 0, DEFAULT_MAX_STEPS)?;
    println!("failure  {:.5} +- {:.5}  exact {:.5}", mc.failure_rate, mc.failure_std_error, exact.p[0]);
    println!("return   {:.5} +- {:.5}  exact {:.5}", mc.mean_return, mc.return_std_error, exact.v[0]);
    Ok(())
}
