//! Brute-force checks of P1-P4 on the counter-MDP for both uniform
//! policies at a few thresholds.

use safevi::analysis::{check_p1, check_p2, check_p3, p4_outcome, PropertyReport, SolverConfig};
use safevi::env::{build_counter_mdp, CounterParams, LEFT, RIGHT};
use safevi::exact::evaluate_policy;
use safevi::Policy;

fn main() -> safevi::Result<()> {
    let spec = build_counter_mdp(CounterParams::default())?;
    for theta in [0.5, 0.85, 0.95] {
        for a in [LEFT, RIGHT] {
            let cand = Policy::uniform(&spec, a);
            let tables = evaluate_policy(&spec, &cand)?.tables;
            let mut report = PropertyReport { theta, outcomes: check_p1(&spec, theta, &cand)? };
            report.outcomes.push(check_p2(&spec, theta, &cand)?);
            report.outcomes.push(p4_outcome(&spec, theta, &tables, &cand, 1e-8)?);
            println!("candidate {}", cand.describe(&spec));
            print!("{}", report.render(&spec));
        }
    }
    let p3 = check_p3(&spec, &[(0.5, 0.95), (0.5, 0.85)], SolverConfig::recursive_default())?;
    for o in p3 {
        println!("{}\t{}", o.property, o.status);
    }
    Ok(())
}
