//! n-step failure probability approaching the unbounded one.

use safevi::env::{build_cliffworld, CliffworldParams};
use safevi::exact::{bounded_reachability, evaluate_policy};
use safevi::Policy;

fn main() -> safevi::Result<()> {
    let params = CliffworldParams::default();
    let spec = build_cliffworld(&params)?;
    let start = spec.state_id(&params.start_name())?;
    let up = spec.action_id("up")?;
    let pi = Policy::uniform(&spec, up);
    let exact = evaluate_policy(&spec, &pi)?.p[start];
    for n in [1, 2, 5, 10, 15, 30, 100, 200] {
        let p = bounded_reachability(&spec, &pi, n)?.p_n[start];
        println!("P^{n:<3} = {p:.9}   gap {:.2e}", exact - p);
    }
    println!("P     = {exact:.9}");
    Ok(())
}
