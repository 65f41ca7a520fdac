//! Builds a small custom MDP, validates it, writes it in the text format
//! and solves the parsed copy.

use safevi::format::{read_mdp, write_mdp};
use safevi::mdp::validate;
use safevi::recursive::recursive_value_iteration;
use safevi::MdpBuilder;

fn main() -> safevi::Result<()> {
    // A bridge: crossing is quick but may drop you in the river.
    let mut b = MdpBuilder::new(0.9);
    let bank = b.state("bank", false, false);
    let ford = b.state("ford", false, false);
    let river = b.state("river", true, true);
    let home = b.state("home", true, false);
    let cross = b.action("cross");
    let walk = b.action("walk");
    b.transition(bank, cross, home, 0.8, 1.0)
        .transition(bank, cross, river, 0.2, 0.0)
        .transition(bank, walk, ford, 1.0, -0.2)
        .transition(ford, walk, home, 0.95, 1.0)
        .transition(ford, walk, river, 0.05, 0.0)
        .terminal_reward(river, cross, 0.0)
        .terminal_reward(home, cross, 0.0);
    let spec = b.build()?;
    assert!(validate(&spec).is_empty());

    let text = write_mdp(&spec);
    print!("{text}");
    let parsed = read_mdp(&text)?;
    for theta in [0.1, 0.3] {
        let sol = recursive_value_iteration(&parsed, theta, 30, 5)?;
        println!("theta {theta}: {}", sol.policy.describe(&parsed));
    }
    Ok(())
}
