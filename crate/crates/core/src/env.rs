//! Benchmark environments: the two-state counter-MDP and a slippery
//! cliffworld.
//!
//! Terminal states expose a single action (index 0) so that the number of
//! deterministic policies is the product over non-terminal states only.

use crate::error::{Error, Result};
use crate::mdp::{MdpBuilder, MdpSpec};

pub const COUNTER_S1: &str = "s1";
pub const COUNTER_S2: &str = "s2";
pub const COUNTER_FAIL: &str = "X";
pub const COUNTER_GOAL: &str = "G";
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterParams {
    /// Probability of moving in the chosen direction.
    pub p: f64,
    pub gamma: f64,
}

impl Default for CounterParams {
    fn default() -> Self {
        Self { p: 0.7, gamma: 0.95 }
    }
}

/// States `s1, s2, X, G` (indices 0..4), actions `L, R`.
///
/// From `s1`, `L` reaches `X` with probability `p` and `s2` otherwise; `R`
/// reaches `s2` with probability `p` and `X` otherwise. In `s2` only `R` is
/// available: `G` with probability `1 - p`, back to `s1` with `p`. Every
/// transition costs 1.
pub fn build_counter_mdp(params: CounterParams) -> Result<MdpSpec> {
    let CounterParams { p, gamma } = params;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} outside [0, 1)")));
    }
    let q = 1.0 - p;
    let mut b = MdpBuilder::new(gamma);
    let s1 = b.state(COUNTER_S1, false, false);
    let s2 = b.state(COUNTER_S2, false, false);
    let x = b.state(COUNTER_FAIL, true, true);
    let g = b.state(COUNTER_GOAL, true, false);
    let l = b.action("L");
    let r = b.action("R");
    b.transition(s1, l, x, p, -1.0)
        .transition(s1, l, s2, q, -1.0)
        .transition(s1, r, s2, p, -1.0)
        .transition(s1, r, x, q, -1.0)
        .transition(s2, r, g, q, -1.0)
        .transition(s2, r, s1, p, -1.0)
        .terminal_reward(x, l, 0.0)
        .terminal_reward(g, l, 0.0);
    b.build()
}

/// Grid coordinate; row 0 is the top row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    pub fn name(&self) -> String {
        format!("r{}c{}", self.row, self.col)
    }
}

/// How slipped moves pick their direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SlipMode {
    /// Uniform over all four directions, the chosen one included.
    #[default]
    Include,
    /// Uniform over the three other directions.
    Exclude,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffworldParams {
    pub width: usize,
    pub height: usize,
    pub slip: f64,
    pub slip_mode: SlipMode,
    pub gamma: f64,
    pub start: Cell,
    pub goal: Cell,
    pub cliff: Vec<Cell>,
}

impl Default for CliffworldParams {
    /// 4 x 3 grid, start bottom-left, goal bottom-right, cliff between them.
    fn default() -> Self {
        Self::with_size(4, 3)
    }
}

impl CliffworldParams {
    pub fn with_size(width: usize, height: usize) -> Self {
        let bottom = height.saturating_sub(1);
        Self {
            width,
            height,
            slip: 0.5,
            slip_mode: SlipMode::Include,
            gamma: 0.95,
            start: Cell::new(0, bottom),
            goal: Cell::new(width.saturating_sub(1), bottom),
            cliff: (1..width.saturating_sub(1)).map(|c| Cell::new(c, bottom)).collect(),
        }
    }

    pub fn start_name(&self) -> String {
        self.start.name()
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width < 2 || self.height < 2 {
            return bad(format!("grid {}x{} smaller than 2x2", self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return bad(format!("slip = {} outside [0, 1]", self.slip));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} outside [0, 1)", self.gamma));
        }
        let inside = |c: &Cell| c.col < self.width && c.row < self.height;
        for c in std::iter::once(&self.start).chain([&self.goal]).chain(&self.cliff) {
            if !inside(c) {
                return bad(format!("cell {} outside the grid", c.name()));
            }
        }
        if self.cliff.contains(&self.goal) {
            return bad("goal lies on the cliff".into());
        }
        if self.cliff.contains(&self.start) || self.start == self.goal {
            return bad("start lies on the cliff or the goal".into());
        }
        Ok(())
    }
}

pub const CLIFF_ACTIONS: [&str; 4] = ["up", "down", "left", "right"];
pub const CLIFF_STATE: &str = "cliff";
pub const GOAL_STATE: &str = "goal";

/// Builds the cliffworld MDP. Non-terminal states are the free cells in
/// row-major order, followed by the `cliff` (failure) and `goal` terminals.
pub fn build_cliffworld(params: &CliffworldParams) -> Result<MdpSpec> {
    params.check()?;
    let mut b = MdpBuilder::new(params.gamma);
    let mut index = vec![vec![usize::MAX; params.width]; params.height];
    let mut free = Vec::new();
    for row in 0..params.height {
        for col in 0..params.width {
            let cell = Cell::new(col, row);
            if cell != params.goal && !params.cliff.contains(&cell) {
                index[row][col] = b.state(cell.name(), false, false);
                free.push(cell);
            }
        }
    }
    let cliff = b.state(CLIFF_STATE, true, true);
    let goal = b.state(GOAL_STATE, true, false);
    for name in CLIFF_ACTIONS {
        b.action(name);
    }

    let target = |cell: Cell, dir: usize| -> usize {
        let (c, r) = (cell.col as isize, cell.row as isize);
        let (nc, nr) = match dir {
            0 => (c, r - 1),
            1 => (c, r + 1),
            2 => (c - 1, r),
            _ => (c + 1, r),
        };
        let moved = if nc < 0 || nr < 0 || nc >= params.width as isize || nr >= params.height as isize
        {
            cell
        } else {
            Cell::new(nc as usize, nr as usize)
        };
        if moved == params.goal {
            goal
        } else if params.cliff.contains(&moved) {
            cliff
        } else {
            index[moved.row][moved.col]
        }
    };

    for &cell in &free {
        let s = index[cell.row][cell.col];
        for a in 0..4 {
            for dir in 0..4 {
                let mass = match (params.slip_mode, dir == a) {
                    (SlipMode::Include, true) => 1.0 - params.slip + params.slip / 4.0,
                    (SlipMode::Include, false) => params.slip / 4.0,
                    (SlipMode::Exclude, true) => 1.0 - params.slip,
                    (SlipMode::Exclude, false) => params.slip / 3.0,
                };
                if mass > 0.0 {
                    b.transition(s, a, target(cell, dir), mass, -1.0);
                }
            }
        }
    }
    b.terminal_reward(cliff, 0, 0.0).terminal_reward(goal, 0, 0.0);
    b.build()
}
