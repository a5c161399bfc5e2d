//! Zero-sum Dynkin stopping game with randomized stopping.
//!
//! Player 1 (maximizer) and player 2 (minimizer) watch the same chain. If
//! player 1 stops alone the payoff is `X`, if both stop together it is `W`,
//! if player 2 stops alone it is `Y`. Each stage is a 2x2 zero-sum matrix
//! game
//!
//! ```text
//!                  P2 stop   P2 continue
//!   P1 stop      [   W          X      ]
//!   P1 continue  [   Y      E[value']  ]
//! ```
//!
//! solved in mixed strategies, so an equilibrium in randomized stopping
//! times exists whether or not `X <= W <= Y` holds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MarkovChain, StateFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynkinError {
    #[error("payoff {name} has {got} values, chain has {expected} states")]
    PayoffLength { name: &'static str, expected: usize, got: usize },
    #[error("payoff {name} is not finite")]
    NonFinite { name: &'static str },
}

/// Solution of one 2x2 stage game. Probabilities are of choosing "stop".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub value: f64,
    pub row_stop: f64,
    pub col_stop: f64,
    pub pure: bool,
}

/// Solves `[[a11, a12], [a21, a22]]` with the row player maximizing.
/// Index 0 is "stop", index 1 is "continue". Among pure saddle points the
/// lexicographically smallest `(row, column)` is returned.
pub fn stage_value(a11: f64, a12: f64, a21: f64, a22: f64) -> StageSolution {
    let a = [[a11, a12], [a21, a22]];
    for r in 0..2 {
        for c in 0..2 {
            let v = a[r][c];
            let row_min = v <= a[r][1 - c];
            let col_max = v >= a[1 - r][c];
            if row_min && col_max {
                return StageSolution {
                    value: v,
                    row_stop: if r == 0 { 1.0 } else { 0.0 },
                    col_stop: if c == 0 { 1.0 } else { 0.0 },
                    pure: true,
                };
            }
        }
    }
    // Without a saddle point the diagonal and anti-diagonal sums differ.
    let denom = a11 + a22 - a12 - a21;
    StageSolution {
        value: (a11 * a22 - a12 * a21) / denom,
        row_stop: (a22 - a21) / denom,
        col_stop: (a22 - a12) / denom,
        pure: false,
    }
}

/// Payoff processes as functions of the current state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffTriple {
    /// Player 1 stops first.
    pub x: StateFunction,
    /// Simultaneous stop.
    pub w: StateFunction,
    /// Player 2 stops first.
    pub y: StateFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeveuCheck {
    pub ordered: bool,
    /// First state violating `X <= W <= Y`.
    pub witness: Option<usize>,
}

impl PayoffTriple {
    pub fn new(x: StateFunction, w: StateFunction, y: StateFunction) -> Result<Self, DynkinError> {
        for (name, f) in [("X", &x), ("W", &w), ("Y", &y)] {
            if f.len() != x.len() {
                return Err(DynkinError::PayoffLength {
                    name,
                    expected: x.len(),
                    got: f.len(),
                });
            }
            if !f.is_finite() {
                return Err(DynkinError::NonFinite { name });
            }
        }
        Ok(Self { x, w, y })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn neveu_ordered(&self) -> bool {
        check_neveu(self).ordered
    }
}

pub fn check_neveu(triple: &PayoffTriple) -> NeveuCheck {
    let witness = (0..triple.len()).find(|&s| !(triple.x[s] <= triple.w[s] && triple.w[s] <= triple.y[s]));
    NeveuCheck {
        ordered: witness.is_none(),
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynkinSolution {
    /// `value[n]` with `n` steps to go.
    pub value: Vec<StateFunction>,
    /// `stop_prob[n][player][state]`, player 0 maximizes.
    pub stop_prob: Vec<[Vec<f64>; 2]>,
    /// `pure[n][state]`: whether the stage game had a pure saddle point.
    pub pure: Vec<Vec<bool>>,
}

impl DynkinSolution {
    pub fn horizon(&self) -> usize {
        self.value.len() - 1
    }
}

/// Backward induction over `horizon` stages; at the horizon both players
/// are forced to stop and receive `W`.
pub fn solve_finite_dynkin(
    chain: &MarkovChain,
    triple: &PayoffTriple,
    horizon: usize,
) -> Result<DynkinSolution, DynkinError> {
    if triple.len() != chain.len() {
        return Err(DynkinError::PayoffLength {
            name: "W",
            expected: chain.len(),
            got: triple.len(),
        });
    }
    let states = chain.len();
    let mut value = vec![triple.w.clone()];
    let mut stop_prob = vec![[vec![1.0; states], vec![1.0; states]]];
    let mut pure = vec![vec![true; states]];
    for _ in 1..=horizon {
        let cont = chain.expect(value.last().unwrap());
        let stage: Vec<StageSolution> = (0..states)
            .map(|s| stage_value(triple.w[s], triple.x[s], triple.y[s], cont[s]))
            .collect();
        value.push(stage.iter().map(|g| g.value).collect::<Vec<_>>().into());
        stop_prob.push([
            stage.iter().map(|g| g.row_stop).collect(),
            stage.iter().map(|g| g.col_stop).collect(),
        ]);
        pure.push(stage.iter().map(|g| g.pure).collect());
    }
    Ok(DynkinSolution {
        value,
        stop_prob,
        pure,
    })
}
