//! Finite-state homogeneous Markov chains.
//!
//! Transition rows are stored sparsely (`(target, probability)` pairs in
//! increasing target order) so that product chains built from many small
//! factors stay cheap.

use std::ops::{Deref, DerefMut};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, sample_discrete};

/// Tolerance on row sums of a stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("chain has no states")]
    Empty,
    #[error("expected {expected} labels or rows, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("row {row} sums to 1{deviation:+e}")]
    RowSum { row: usize, deviation: f64 },
    #[error("negative transition probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite transition probability at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
}

/// A real function on the states of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateFunction(pub Vec<f64>);

impl StateFunction {
    pub fn constant(len: usize, c: f64) -> Self {
        Self(vec![c; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Sup-norm distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for StateFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for StateFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    labels: Vec<String>,
    rows: Vec<SparseRow>,
}

impl MarkovChain {
    /// Validates a dense row-major transition matrix.
    pub fn new(labels: Vec<String>, matrix: &[Vec<f64>]) -> Result<Self, MarkovError> {
        let n = labels.len();
        if matrix.len() != n {
            return Err(MarkovError::Dimension {
                expected: n,
                got: matrix.len(),
            });
        }
        let mut rows = Vec::with_capacity(n);
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(MarkovError::RowLength {
                    row: r,
                    expected: n,
                    got: row.len(),
                });
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(c, &p)| (c, p))
                    .collect(),
            );
        }
        Self::from_sparse(labels, rows)
    }

    /// Chain with states labelled `s1..sn`.
    pub fn unlabelled(matrix: &[Vec<f64>]) -> Result<Self, MarkovError> {
        let labels = (1..=matrix.len()).map(|i| format!("s{i}")).collect();
        Self::new(labels, matrix)
    }

    /// Validates sparse rows. Entries may come in any order and may repeat a
    /// target; they are merged and sorted.
    pub fn from_sparse(labels: Vec<String>, rows: Vec<SparseRow>) -> Result<Self, MarkovError> {
        let n = labels.len();
        if n == 0 {
            return Err(MarkovError::Empty);
        }
        if rows.len() != n {
            return Err(MarkovError::Dimension {
                expected: n,
                got: rows.len(),
            });
        }
        let mut clean = Vec::with_capacity(n);
        for (r, mut row) in rows.into_iter().enumerate() {
            for &(c, p) in &row {
                if c >= n {
                    return Err(MarkovError::StateOutOfRange(c));
                }
                if !p.is_finite() {
                    return Err(MarkovError::NonFinite { row: r, col: c });
                }
                if p < 0.0 {
                    return Err(MarkovError::NegativeEntry {
                        row: r,
                        col: c,
                        value: p,
                    });
                }
            }
            row.sort_by_key(|&(c, _)| c);
            let mut merged: SparseRow = Vec::with_capacity(row.len());
            for (c, p) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += p,
                    _ => merged.push((c, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let deviation = merged.iter().map(|e| e.1).sum::<f64>() - 1.0;
            if deviation.abs() > STOCHASTIC_TOL {
                return Err(MarkovError::RowSum { row: r, deviation });
            }
            clean.push(merged);
        }
        Ok(Self { labels, rows: clean })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from]
            .binary_search_by_key(&to, |e| e.0)
            .map_or(0.0, |k| self.rows[from][k].1)
    }

    /// One-step conditional expectation `(Pg)(x) = sum_y P(x,y) g(y)`.
    pub fn expect(&self, g: &[f64]) -> StateFunction {
        assert_eq!(g.len(), self.len(), "state function length mismatch");
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(y, p)| p * g[y]).sum())
            .collect::<Vec<_>>()
            .into()
    }

    /// Same as [`expect`](Self::expect) for a single starting state.
    pub fn expect_from(&self, x: usize, g: &[f64]) -> f64 {
        self.rows[x].iter().map(|&(y, p)| p * g[y]).sum()
    }

    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        sample_discrete(rng, &self.rows[x])
    }

    /// Path `x0, X_1, ..., X_horizon` drawn with the given generator.
    pub fn simulate_with<R: Rng + ?Sized>(&self, x0: usize, horizon: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(horizon + 1);
        path.push(x0);
        let mut x = x0;
        for _ in 0..horizon {
            x = self.step(x, rng);
            path.push(x);
        }
        path
    }

    pub fn simulate(&self, x0: usize, horizon: usize, seed: u64) -> Result<Vec<usize>, MarkovError> {
        if x0 >= self.len() {
            return Err(MarkovError::StateOutOfRange(x0));
        }
        Ok(self.simulate_with(x0, horizon, &mut rng::stream(seed, 0)))
    }
}
