//! Simple games: coalition families with a 0/1 characteristic function.
//!
//! Players are numbered `0..p` internally and a coalition is a bitmask with
//! bit `i` set when player `i` belongs to it. A validated [`SimpleGame`]
//! keeps its winning family closed under supersets, so membership of the
//! yes-voters in the family is the aggregated decision.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the number of players; keeps `2^p` coalitions enumerable.
pub const MAX_PLAYERS: usize = 16;

/// A set of players encoded as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub const fn full(players: usize) -> Self {
        Self(((1u64 << players) - 1) as u32)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        Self(members.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub const fn contains(self, player: usize) -> bool {
        self.0 & (1 << player) != 0
    }

    pub const fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn size(self) -> u32 {
        self.0.count_ones()
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

/// Prints members 1-based, e.g. `{1,3}`.
impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimpleGameError {
    #[error("a simple game needs at least one player")]
    NoPlayers,
    #[error("{0} players exceeds the supported maximum of {MAX_PLAYERS}")]
    TooManyPlayers(usize),
    #[error("coalition {coalition:#b} names players outside 1..={players}")]
    CoalitionOutOfRange { coalition: u32, players: usize },
    #[error("majority level {level} must lie in 1..={players}")]
    BadMajorityLevel { level: usize, players: usize },
    #[error("monotonicity violated: {subset} is winning but its superset {superset} is losing")]
    MonotonicityViolation { subset: Coalition, superset: Coalition },
    #[error("the grand coalition must be winning")]
    GrandCoalitionLosing,
    #[error("the empty coalition must be losing")]
    EmptyCoalitionWinning,
    #[error("vote vector has {got} entries, game has {expected} players")]
    VoteLength { expected: usize, got: usize },
}

/// Declarations of the players at one stage; bit `i` set means player `i`
/// votes to stop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VoteVector {
    bits: u32,
    len: usize,
}

impl VoteVector {
    pub fn new(bits: u32, len: usize) -> Self {
        debug_assert!(len <= MAX_PLAYERS && bits >> len == 0);
        Self { bits, len }
    }

    pub fn from_slice(votes: &[bool]) -> Self {
        let bits = votes
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| acc | (u32::from(v) << i));
        Self::new(bits, votes.len())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, player: usize) -> bool {
        self.bits & (1 << player) != 0
    }

    pub fn with(self, player: usize, vote: bool) -> Self {
        let bits = if vote {
            self.bits | (1 << player)
        } else {
            self.bits & !(1 << player)
        };
        Self { bits, len: self.len }
    }

    /// The coalition of players voting to stop.
    pub fn yes_coalition(&self) -> Coalition {
        Coalition(self.bits)
    }

    /// All `2^len` vote vectors in increasing bit order.
    pub fn all(len: usize) -> impl Iterator<Item = VoteVector> {
        (0..1u32 << len).map(move |bits| VoteVector { bits, len })
    }
}

/// A validated simple game on `players` players.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGame {
    players: usize,
    // Indexed by coalition bitmask; closed under supersets.
    winning: Vec<bool>,
}

impl SimpleGame {
    /// Checks the three axioms against `winning` taken as the complete
    /// winning family.
    pub fn validate<I>(players: usize, winning: I) -> Result<Self, SimpleGameError>
    where
        I: IntoIterator<Item = Coalition>,
    {
        let table = Self::table(players, winning)?;
        if table[0] {
            return Err(SimpleGameError::EmptyCoalitionWinning);
        }
        let full = Coalition::full(players).0;
        for s in 0..=full {
            if !table[s as usize] {
                continue;
            }
            // Checking single-player extensions is enough: any losing superset
            // is reached through a chain of one-player additions.
            for i in 0..players {
                let t = s | (1 << i);
                if !table[t as usize] {
                    return Err(SimpleGameError::MonotonicityViolation {
                        subset: Coalition(s),
                        superset: Coalition(t),
                    });
                }
            }
        }
        if !table[full as usize] {
            return Err(SimpleGameError::GrandCoalitionLosing);
        }
        Ok(Self {
            players,
            winning: table,
        })
    }

    /// Builds the game whose winning coalitions are all supersets of the
    /// given (minimal) coalitions.
    pub fn from_minimal<I>(players: usize, minimal: I) -> Result<Self, SimpleGameError>
    where
        I: IntoIterator<Item = Coalition>,
    {
        let mut table = Self::table(players, minimal)?;
        let full = Coalition::full(players).0 as usize;
        for s in 0..=full {
            if table[s] {
                continue;
            }
            table[s] = (0..players).any(|i| s & (1 << i) != 0 && table[s & !(1 << i)]);
        }
        let winning = (0..=full).filter(|&s| table[s]).map(|s| Coalition(s as u32));
        Self::validate(players, winning)
    }

    /// The `r`-majority game: a coalition wins iff it has at least `r` members.
    pub fn majority(players: usize, level: usize) -> Result<Self, SimpleGameError> {
        if level == 0 || level > players {
            return Err(SimpleGameError::BadMajorityLevel { level, players });
        }
        Self::check_players(players)?;
        let full = Coalition::full(players).0;
        Self::validate(
            players,
            (0..=full)
                .map(Coalition)
                .filter(|c| c.size() as usize >= level),
        )
    }

    pub fn unanimity(players: usize) -> Result<Self, SimpleGameError> {
        Self::majority(players, players)
    }

    /// Player `dictator` alone decides.
    pub fn dictator(players: usize, dictator: usize) -> Result<Self, SimpleGameError> {
        Self::from_minimal(players, [Coalition::from_members([dictator])])
    }

    fn check_players(players: usize) -> Result<(), SimpleGameError> {
        match players {
            0 => Err(SimpleGameError::NoPlayers),
            p if p > MAX_PLAYERS => Err(SimpleGameError::TooManyPlayers(p)),
            _ => Ok(()),
        }
    }

    fn table<I>(players: usize, family: I) -> Result<Vec<bool>, SimpleGameError>
    where
        I: IntoIterator<Item = Coalition>,
    {
        Self::check_players(players)?;
        let full = Coalition::full(players).0;
        let mut table = vec![false; full as usize + 1];
        for c in family {
            if c.0 & !full != 0 {
                return Err(SimpleGameError::CoalitionOutOfRange {
                    coalition: c.0,
                    players,
                });
            }
            table[c.0 as usize] = true;
        }
        Ok(table)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn is_winning(&self, coalition: Coalition) -> bool {
        self.winning[coalition.0 as usize]
    }

    pub fn winning_coalitions(&self) -> impl Iterator<Item = Coalition> + '_ {
        self.winning
            .iter()
            .enumerate()
            .filter(|(_, &w)| w)
            .map(|(s, _)| Coalition(s as u32))
    }

    /// Winning coalitions none of whose proper subsets win.
    pub fn minimal_winning(&self) -> Vec<Coalition> {
        self.winning_coalitions()
            .filter(|c| c.members().all(|i| !self.winning[(c.0 & !(1 << i)) as usize]))
            .collect()
    }

    /// The aggregated decision: 1 iff the yes-voters form a winning coalition.
    pub fn aggregate(&self, votes: VoteVector) -> bool {
        debug_assert_eq!(votes.len(), self.players);
        self.winning[votes.bits as usize]
    }

    pub fn try_aggregate(&self, votes: VoteVector) -> Result<bool, SimpleGameError> {
        if votes.len() != self.players {
            return Err(SimpleGameError::VoteLength {
                expected: self.players,
                got: votes.len(),
            });
        }
        Ok(self.aggregate(votes))
    }

    /// Literal sum-of-products evaluation of the aggregation function,
    /// `sum_{C in W} prod_{i in C} x_i prod_{i not in C} (1 - x_i)`.
    pub fn aggregate_sum_form(&self, votes: VoteVector) -> bool {
        let x: Vec<u32> = (0..self.players).map(|i| u32::from(votes.get(i))).collect();
        let total: u32 = self
            .winning_coalitions()
            .map(|c| {
                (0..self.players)
                    .map(|i| if c.contains(i) { x[i] } else { 1 - x[i] })
                    .product::<u32>()
            })
            .sum();
        debug_assert!(total <= 1);
        total == 1
    }

    /// Relabels players: player `i` of `self` becomes player `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.players);
        let mut winning = vec![false; self.winning.len()];
        for c in self.winning_coalitions() {
            let image = Coalition::from_members(c.members().map(|i| perm[i]));
            winning[image.0 as usize] = true;
        }
        Self {
            players: self.players,
            winning,
        }
    }
}
