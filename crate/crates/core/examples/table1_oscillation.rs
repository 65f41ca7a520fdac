//! Memoryless policy iteration on the counter-MDP chatters between the
//! risky and the safe policy forever.

use safevi::env::{build_counter_mdp, CounterParams, RIGHT};
use safevi::naive::{naive_policy_iteration, render_trace_tsv};
use safevi::Policy;

fn main() -> safevi::Result<()> {
    let spec = build_counter_mdp(CounterParams { p: 0.7, gamma: 0.95 })?;
    let trace = naive_policy_iteration(&spec, 0.85, &Policy::uniform(&spec, RIGHT), 8)?;
    print!("{}", render_trace_tsv(&spec, &trace, 0));
    println!("converged: {}, period: {:?}", trace.converged, trace.oscillation_period);
    Ok(())
}
