//! Value iteration at one threshold: the naive solver keeps switching,
//! the recursive one settles and reports where its constraint sets stop
//! shrinking.
//!
//! Usage: naive_vs_recursive_vi [theta]

use safevi::env::{build_counter_mdp, CounterParams};
use safevi::exact::evaluate_policy;
use safevi::naive::{naive_value_iteration, InitP};
use safevi::recursive::recursive_value_iteration;

fn main() -> safevi::Result<()> {
    let theta: f64 = std::env::args().nth(1).map_or(0.85, |s| s.parse().expect("theta"));
    let spec = build_counter_mdp(CounterParams::default())?;

    let naive = naive_value_iteration(&spec, theta, 50, InitP::default())?;
    let tail: Vec<String> = naive.trace.policies().skip(40).map(|p| p.describe(&spec)).collect();
    println!("naive:     converged={} last policies {tail:?}", naive.trace.converged);

    let rec = recursive_value_iteration(&spec, theta, 15, 15)?;
    let exact = evaluate_policy(&spec, &rec.policy)?;
    println!(
        "recursive: converged={} policy {} M={} P(s1)={:.6}",
        rec.report.converged,
        rec.policy.describe(&spec),
        rec.report.stabilization_horizon,
        exact.p[0]
    );
    for n in 1..=6 {
        println!("  P^{n}(s1, L) = {:.6}", rec.stack.p_hat(n, 0, 0));
    }
    Ok(())
}
