//! Line-oriented text format for [`MdpSpec`].
//!
//! ```text
//! # comment
//! gamma 0.95
//! states
//! s1
//! X T F
//! G T
//! actions
//! L
//! R
//! transition s1 L X 0.7 -1
//! terminal_reward X L 0
//! ```
//!
//! `states` and `actions` open a section whose entries follow one per line;
//! any directive line closes it. State flags are `T` (terminal) and `F`
//! (failure). Available actions are implied by `transition` lines for
//! non-terminal states and by `terminal_reward` lines for terminal ones.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{MdpBuilder, MdpSpec};

pub fn write_mdp(spec: &MdpSpec) -> String {
    let mut out = String::new();
    // writing into a String cannot fail
    let _ = writeln!(out, "gamma {}", spec.gamma());
    out.push_str("states\n");
    for s in spec.states() {
        let mut line = spec.state_name(s).to_string();
        if spec.is_terminal(s) {
            line.push_str(" T");
        }
        if spec.is_failure(s) {
            line.push_str(" F");
        }
        let _ = writeln!(out, "{line}");
    }
    out.push_str("actions\n");
    for a in 0..spec.num_actions() {
        let _ = writeln!(out, "{}", spec.action_name(a));
    }
    for s in spec.states() {
        for &a in spec.actions(s) {
            if spec.is_terminal(s) {
                let _ = writeln!(
                    out,
                    "terminal_reward {} {} {}",
                    spec.state_name(s),
                    spec.action_name(a),
                    spec.terminal_reward(s, a)
                );
                continue;
            }
            for o in spec.transitions(s, a) {
                let _ = writeln!(
                    out,
                    "transition {} {} {} {} {}",
                    spec.state_name(s),
                    spec.action_name(a),
                    spec.state_name(o.next),
                    o.prob,
                    o.reward
                );
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    States,
    Actions,
}

pub fn read_mdp(text: &str) -> Result<MdpSpec> {
    let mut b = MdpBuilder::new(0.0);
    let mut section = Section::None;
    let mut states: Vec<String> = Vec::new();
    let mut actions: Vec<String> = Vec::new();
    let mut saw_gamma = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let lookup = |names: &[String], name: &str, kind: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| err(format!("unknown {kind} `{name}`")))
        };
        let number = |tok: &str| tok.parse::<f64>().map_err(|_| err(format!("bad number `{tok}`")));

        match tokens[0] {
            "states" if tokens.len() == 1 => section = Section::States,
            "actions" if tokens.len() == 1 => section = Section::Actions,
            "gamma" => {
                section = Section::None;
                if tokens.len() != 2 {
                    return Err(err("expected `gamma <value>`".into()));
                }
                b.gamma(number(tokens[1])?);
                saw_gamma = true;
            }
            "transition" => {
                section = Section::None;
                if tokens.len() != 6 {
                    return Err(err("expected `transition s a s' prob reward`".into()));
                }
                let s = lookup(&states, tokens[1], "state")?;
                let a = lookup(&actions, tokens[2], "action")?;
                let next = lookup(&states, tokens[3], "state")?;
                b.transition(s, a, next, number(tokens[4])?, number(tokens[5])?);
            }
            "terminal_reward" => {
                section = Section::None;
                if tokens.len() != 4 {
                    return Err(err("expected `terminal_reward s a r`".into()));
                }
                let s = lookup(&states, tokens[1], "state")?;
                let a = lookup(&actions, tokens[2], "action")?;
                b.terminal_reward(s, a, number(tokens[3])?);
            }
            name => match section {
                Section::States => {
                    let mut terminal = false;
                    let mut failure = false;
                    for flag in &tokens[1..] {
                        for c in flag.chars() {
                            match c {
                                'T' => terminal = true,
                                'F' => failure = true,
                                _ => return Err(err(format!("unknown state flag `{c}`"))),
                            }
                        }
                    }
                    if states.iter().any(|n| n == name) {
                        return Err(err(format!("duplicate state `{name}`")));
                    }
                    states.push(name.to_string());
                    b.state(name, terminal, failure);
                }
                Section::Actions => {
                    if tokens.len() != 1 {
                        return Err(err("action entries take no flags".into()));
                    }
                    if actions.iter().any(|n| n == name) {
                        return Err(err(format!("duplicate action `{name}`")));
                    }
                    actions.push(name.to_string());
                    b.action(name);
                }
                Section::None => return Err(err(format!("unexpected `{name}`"))),
            },
        }
    }
    if !saw_gamma {
        return Err(Error::Parse { line: 0, message: "missing `gamma`".into() });
    }
    b.build()
}
