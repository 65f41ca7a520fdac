//! Closed-form values of the counter-MDP next to exact linear-system
//! evaluation, over a few (p, gamma) settings.

use safevi::env::{build_counter_mdp, CounterParams};
use safevi::exact::{closed_form_counter, counter_values_by_evaluation};

fn main() -> safevi::Result<()> {
    for (p, gamma) in [(0.6, 0.9), (0.7, 0.95), (0.9, 0.99)] {
        let spec = build_counter_mdp(CounterParams { p, gamma })?;
        let closed = closed_form_counter(p, gamma)?;
        let exact = counter_values_by_evaluation(&spec)?;
        println!("p = {p}, gamma = {gamma}");
        for ((name, c), (_, e)) in closed.named().into_iter().zip(exact.named()) {
            println!("  {name}  closed {c:>12.9}  exact {e:>12.9}  |diff| {:.1e}", (c - e).abs());
        }
    }
    Ok(())
}
