//! Threshold sweep on the default cliffworld for both solvers, printing
//! where the estimate at the start state hides a violation and where the
//! solve did not settle.
//!
//! Usage: cliffworld_sweep [k N]   (recursive hyperparameters, default 15 15)

use safevi::analysis::{sweep_theta, SolverConfig};
use safevi::cli::parse_theta_grid;
use safevi::env::{build_cliffworld, CliffworldParams};

fn main() -> safevi::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let (k, horizon) = match args.as_slice() {
        [k, n] => (*k, *n),
        _ => (15, 15),
    };
    let params = CliffworldParams::default();
    let spec = build_cliffworld(&params)?;
    let start = spec.state_id(&params.start_name())?;
    let thetas = parse_theta_grid("0:1:0.01,0.999")?;

    for solver in [SolverConfig::naive_default(), SolverConfig::Recursive { k, horizon }] {
        let records: Vec<_> = sweep_theta(&spec, solver, &thetas, start)?
            .into_iter()
            .collect::<safevi::Result<_>>()?;
        let violations: Vec<f64> = records.iter().filter(|r| r.violation).map(|r| r.theta).collect();
        let unsettled = records.iter().filter(|r| !r.converged).count();
        println!("{solver:?}");
        println!("  violations at {violations:?}");
        println!("  {unsettled} of {} thresholds not converged", records.len());
    }
    Ok(())
}
