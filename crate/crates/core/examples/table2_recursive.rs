//! Policy iteration that remembers every failed constraint: once the risky
//! action is seen to exceed the threshold it stays excluded.

use safevi::env::{build_counter_mdp, CounterParams, RIGHT};
use safevi::naive::render_trace_tsv;
use safevi::recursive::recursive_policy_iteration;
use safevi::Policy;

fn main() -> safevi::Result<()> {
    let spec = build_counter_mdp(CounterParams { p: 0.7, gamma: 0.95 })?;
    let trace = recursive_policy_iteration(&spec, 0.85, &Policy::uniform(&spec, RIGHT), 6)?;
    print!("{}", render_trace_tsv(&spec, &trace, 0));
    println!("converged: {}, final: {}", trace.converged, trace.final_policy.describe(&spec));
    Ok(())
}
