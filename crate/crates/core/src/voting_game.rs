//! Multilateral stopping of a Markov chain by sequential voting.
//!
//! At every stage `n = 1..N` each of the `p` players declares stop or
//! continue from the current state; the declarations are aggregated by a
//! [`SimpleGame`] and the process stops at the first stage whose yes-voters
//! form a winning coalition. At the horizon every player is forced to stop,
//! so a finite game always pays `f_i(X_t)` with `t <= N`.
//!
//! [`solve_finite`] builds the equilibrium by backward induction: with `k`
//! steps to go a player stops in state `x` iff `f_i(x) >= v_{i,k}(x)`, and
//! the values obey
//!
//! ```text
//! v_{i,n}(x) = E_x[ (f_i - v')^+ 1{stop if i votes yes}
//!                 - (f_i - v')^- 1{stop if i votes no} + v' ](X_1),   v' = v_{i,n-1}
//! ```
//!
//! with `a^+ = max(0, a)` and `a^- = max(0, -a)`. The infinite-horizon
//! game iterates the same one-stage operator to a fixed point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MarkovChain, StateFunction};
use crate::rng;
use crate::simple_game::{Coalition, SimpleGame};

/// Above this many candidate deviations `deviation_gap` refuses to run.
pub const MAX_DEVIATION_CANDIDATES: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("simple game has {game} players but {utilities} utility functions were given")]
    PlayerCount { game: usize, utilities: usize },
    #[error("utility of player {player} has {got} values, chain has {expected} states")]
    UtilityLength { player: usize, expected: usize, got: usize },
    #[error("utility of player {player} is not finite")]
    NonFiniteUtility { player: usize },
    #[error("operation needs a {0} horizon")]
    HorizonMismatch(&'static str),
    #[error("stopping profile shape does not match the game")]
    ProfileShape,
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("{candidates:.3e} deviation candidates exceed the limit of {MAX_DEVIATION_CANDIDATES:e}")]
    TooManyDeviations { candidates: f64 },
    #[error("value iteration did not converge in {iterations} iterations (last residual {last:e})", last = residual_history.last().copied().unwrap_or(f64::NAN))]
    NotConverged {
        iterations: usize,
        residual_history: Vec<f64>,
    },
}

pub fn positive_part(a: f64) -> f64 {
    a.max(0.0)
}

pub fn negative_part(a: f64) -> f64 {
    (-a).max(0.0)
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    pub chain: MarkovChain,
    pub utilities: Vec<StateFunction>,
    pub game: SimpleGame,
    pub horizon: Horizon,
}

impl GameSpec {
    pub fn new(
        chain: MarkovChain,
        utilities: Vec<StateFunction>,
        game: SimpleGame,
        horizon: Horizon,
    ) -> Result<Self, GameError> {
        if utilities.len() != game.players() {
            return Err(GameError::PlayerCount {
                game: game.players(),
                utilities: utilities.len(),
            });
        }
        for (player, f) in utilities.iter().enumerate() {
            if f.len() != chain.len() {
                return Err(GameError::UtilityLength {
                    player,
                    expected: chain.len(),
                    got: f.len(),
                });
            }
            if !f.is_finite() {
                return Err(GameError::NonFiniteUtility { player });
            }
        }
        Ok(Self {
            chain,
            utilities,
            game,
            horizon,
        })
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn players(&self) -> usize {
        self.game.players()
    }

    pub fn states(&self) -> usize {
        self.chain.len()
    }

    fn finite_horizon(&self) -> Result<usize, GameError> {
        match self.horizon {
            Horizon::Finite(n) => Ok(n),
            Horizon::Infinite => Err(GameError::HorizonMismatch("finite")),
        }
    }
}

/// Stopping sets of all players at one stage, indexed `[player][state]`.
pub type StageSets = Vec<Vec<bool>>;

fn votes_at(sets: &StageSets, state: usize) -> Coalition {
    Coalition(
        sets.iter()
            .enumerate()
            .fold(0, |acc, (j, s)| acc | (u32::from(s[state]) << j)),
    )
}

/// Whether the net stops when player `i` votes yes, and when `i` votes no,
/// with everyone else voting according to `sets`.
fn pivot_outcomes(game: &SimpleGame, sets: &StageSets, state: usize, player: usize) -> (bool, bool) {
    let others = votes_at(sets, state).0 & !(1 << player);
    (
        game.is_winning(Coalition(others | (1 << player))),
        game.is_winning(Coalition(others)),
    )
}

/// Markov stopping strategy: a stopping set per stage `n = 1..N` and player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingProfile {
    /// `stages[n - 1][player][state]`
    pub stages: Vec<StageSets>,
}

impl StoppingProfile {
    pub fn constant(horizon: usize, players: usize, states: usize, stop: bool) -> Self {
        Self {
            stages: vec![vec![vec![stop; states]; players]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Whether the aggregated declarations at stage `n` (1-based) stop in `state`.
    pub fn stops(&self, game: &SimpleGame, n: usize, state: usize) -> bool {
        game.is_winning(votes_at(&self.stages[n - 1], state))
    }

    fn check_shape(&self, spec: &GameSpec, horizon: usize) -> Result<(), GameError> {
        let ok = self.stages.len() == horizon
            && self.stages.iter().all(|stage| {
                stage.len() == spec.players() && stage.iter().all(|s| s.len() == spec.states())
            });
        if ok {
            Ok(())
        } else {
            Err(GameError::ProfileShape)
        }
    }
}

/// `inf{1 <= n <= N : pi(sigma_n) = 1}` along a state path; `None` when no
/// stage aggregates to stop. The forced stop at the horizon is not applied.
pub fn stop_time(profile: &StoppingProfile, game: &SimpleGame, path: &[usize]) -> Option<usize> {
    let horizon = profile.horizon();
    assert!(path.len() > horizon, "path shorter than horizon + 1");
    (1..=horizon).find(|&n| profile.stops(game, n, path[n]))
}

/// One step of the backward induction: given continuation values `v'` of all
/// players, returns the stop sets `{f_j >= v'_j}` and the new values.
pub fn stage_operator(spec: &GameSpec, continuation: &[StateFunction]) -> (Vec<StateFunction>, StageSets) {
    let sets: StageSets = spec
        .utilities
        .iter()
        .zip(continuation)
        .map(|(f, c)| f.iter().zip(c.iter()).map(|(a, b)| a - b >= 0.0).collect())
        .collect();
    let values = (0..spec.players())
        .map(|i| {
            let f = &spec.utilities[i];
            let c = &continuation[i];
            let integrand: Vec<f64> = (0..spec.states())
                .map(|y| {
                    let (stop_if_yes, stop_if_no) = pivot_outcomes(&spec.game, &sets, y, i);
                    let gain = f[y] - c[y];
                    let mut g = c[y];
                    if stop_if_yes {
                        g += positive_part(gain);
                    }
                    if stop_if_no {
                        g -= negative_part(gain);
                    }
                    g
                })
                .collect();
            spec.chain.expect(&integrand)
        })
        .collect();
    (values, sets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// `values[i][n]` is `v_{i,n}`, player `i` with `n` steps to go.
    pub values: Vec<Vec<StateFunction>>,
    pub profile: StoppingProfile,
}

impl EquilibriumSolution {
    pub fn horizon(&self) -> usize {
        self.profile.horizon()
    }

    /// Equilibrium payoff of every player from `x0` at time 0.
    pub fn initial_values(&self, x0: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[self.horizon()][x0]).collect()
    }
}

pub fn solve_finite(spec: &GameSpec) -> Result<EquilibriumSolution, GameError> {
    let horizon = spec.finite_horizon()?;
    let mut values: Vec<Vec<StateFunction>> =
        spec.utilities.iter().map(|f| vec![f.clone()]).collect();
    // sets_by_steps[k] = {f >= v_k}, the stage with k steps to go.
    let mut sets_by_steps = Vec::with_capacity(horizon);
    for _ in 1..=horizon {
        let continuation: Vec<StateFunction> = values.iter().map(|v| v.last().unwrap().clone()).collect();
        let (next, sets) = stage_operator(spec, &continuation);
        sets_by_steps.push(sets);
        for (v, nv) in values.iter_mut().zip(next) {
            v.push(nv);
        }
    }
    sets_by_steps.reverse();
    Ok(EquilibriumSolution {
        values,
        profile: StoppingProfile {
            stages: sets_by_steps,
        },
    })
}

/// Exact expected payoffs `E_x f_i(X_t)` of a profile for every starting
/// state, indexed `[player][x0]`.
pub fn evaluate_profile_all(spec: &GameSpec, profile: &StoppingProfile) -> Result<Vec<StateFunction>, GameError> {
    let horizon = spec.finite_horizon()?;
    profile.check_shape(spec, horizon)?;
    if horizon == 0 {
        return Ok(spec.utilities.clone());
    }
    let mut payoff: Vec<StateFunction> = spec.utilities.clone();
    for n in (1..horizon).rev() {
        let stop: Vec<bool> = (0..spec.states()).map(|y| profile.stops(&spec.game, n, y)).collect();
        for (u, f) in payoff.iter_mut().zip(&spec.utilities) {
            let cont = spec.chain.expect(u);
            for y in 0..spec.states() {
                u[y] = if stop[y] { f[y] } else { cont[y] };
            }
        }
    }
    Ok(payoff.iter().map(|u| spec.chain.expect(u)).collect())
}

pub fn evaluate_profile(spec: &GameSpec, profile: &StoppingProfile, x0: usize) -> Result<Vec<f64>, GameError> {
    if x0 >= spec.states() {
        return Err(GameError::StateOutOfRange(x0));
    }
    Ok(evaluate_profile_all(spec, profile)?
        .iter()
        .map(|u| u[x0])
        .collect())
}

/// Distribution of the effective stop time from `x0`; entry `n` is
/// `P(t = n)`, with the horizon absorbing the forced stop.
pub fn stop_time_distribution(spec: &GameSpec, profile: &StoppingProfile, x0: usize) -> Result<Vec<f64>, GameError> {
    let horizon = spec.finite_horizon()?;
    profile.check_shape(spec, horizon)?;
    if x0 >= spec.states() {
        return Err(GameError::StateOutOfRange(x0));
    }
    let mut dist = vec![0.0; horizon + 1];
    if horizon == 0 {
        dist[0] = 1.0;
        return Ok(dist);
    }
    let mut alive = vec![0.0; spec.states()];
    alive[x0] = 1.0;
    for (n, slot) in dist.iter_mut().enumerate().skip(1) {
        let mut next = vec![0.0; spec.states()];
        for (x, &m) in alive.iter().enumerate() {
            if m > 0.0 {
                for &(y, p) in spec.chain.row(x) {
                    next[y] += m * p;
                }
            }
        }
        for (y, m) in next.iter_mut().enumerate() {
            if n == horizon || profile.stops(&spec.game, n, y) {
                *slot += *m;
                *m = 0.0;
            }
        }
        alive = next;
    }
    Ok(dist)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    pub payoff: Vec<f64>,
    pub best_response: Vec<f64>,
    pub gap: Vec<f64>,
}

impl DeviationGap {
    pub fn max_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Best unilateral Markov deviation value of `player` against `profile`,
/// for every starting state.
pub fn best_response_values(spec: &GameSpec, profile: &StoppingProfile, player: usize) -> Result<StateFunction, GameError> {
    let horizon = spec.finite_horizon()?;
    profile.check_shape(spec, horizon)?;
    let f = &spec.utilities[player];
    if horizon == 0 {
        return Ok(f.clone());
    }
    let mut best = f.clone();
    for n in (1..horizon).rev() {
        let cont = spec.chain.expect(&best);
        for y in 0..spec.states() {
            let (yes, no) = pivot_outcomes(&spec.game, &profile.stages[n - 1], y, player);
            let pick = |stops: bool| if stops { f[y] } else { cont[y] };
            best[y] = pick(yes).max(pick(no));
        }
    }
    Ok(spec.chain.expect(&best))
}

/// Largest gain each player can obtain by a unilateral change of their own
/// stopping sets, starting from `x0`.
pub fn deviation_gap(spec: &GameSpec, profile: &StoppingProfile, x0: usize) -> Result<DeviationGap, GameError> {
    let horizon = spec.finite_horizon()?;
    profile.check_shape(spec, horizon)?;
    if x0 >= spec.states() {
        return Err(GameError::StateOutOfRange(x0));
    }
    let log_candidates = (spec.states() * horizon) as f64 * std::f64::consts::LN_2
        + (spec.players() as f64).ln();
    if log_candidates > MAX_DEVIATION_CANDIDATES.ln() {
        return Err(GameError::TooManyDeviations {
            candidates: log_candidates.exp(),
        });
    }
    let payoff = evaluate_profile(spec, profile, x0)?;
    let best_response = (0..spec.players())
        .into_par_iter()
        .map(|i| best_response_values(spec, profile, i).map(|b| b[x0]))
        .collect::<Result<Vec<_>, _>>()?;
    let gap = best_response.iter().zip(&payoff).map(|(b, v)| b - v).collect();
    Ok(DeviationGap {
        payoff,
        best_response,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteSolution {
    pub values: Vec<StateFunction>,
    /// `{x : f_i(x) >= w_i(x)}` per player, used at every stage.
    pub stop_sets: StageSets,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Value iteration for the stationary equilibrium equations, started from
/// `w = f`. Converged when the sup-norm change drops below `tol`.
pub fn solve_infinite(spec: &GameSpec, tol: f64, max_iter: usize) -> Result<InfiniteSolution, GameError> {
    if spec.horizon != Horizon::Infinite {
        return Err(GameError::HorizonMismatch("infinite"));
    }
    if !(tol > 0.0) {
        return Err(GameError::BadTolerance(tol));
    }
    let mut w = spec.utilities.clone();
    let mut history = Vec::new();
    for iteration in 1..=max_iter {
        let (next, _) = stage_operator(spec, &w);
        let residual = next
            .iter()
            .zip(&w)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        history.push(residual);
        w = next;
        if residual < tol {
            let stop_sets = spec
                .utilities
                .iter()
                .zip(&w)
                .map(|(f, v)| f.iter().zip(v.iter()).map(|(a, b)| a >= b).collect())
                .collect();
            return Ok(InfiniteSolution {
                values: w,
                stop_sets,
                residual,
                iterations: iteration,
                residual_history: history,
            });
        }
    }
    Err(GameError::NotConverged {
        iterations: max_iter,
        residual_history: history,
    })
}

impl InfiniteSolution {
    /// Monte Carlo payoffs of the stationary strategy from `x0`, returned
    /// as `(mean, stderr)` per player. Paths that have not stopped by
    /// `truncation` pay the utility of their last state.
    pub fn monte_carlo_payoffs(
        &self,
        spec: &GameSpec,
        x0: usize,
        truncation: usize,
        reps: usize,
        seed: u64,
    ) -> Vec<(f64, f64)> {
        let samples: Vec<Vec<f64>> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(seed, r);
                let mut x = x0;
                for _ in 1..=truncation {
                    x = spec.chain.step(x, &mut rng);
                    if spec.game.is_winning(votes_at(&self.stop_sets, x)) {
                        break;
                    }
                }
                spec.utilities.iter().map(|f| f[x]).collect()
            })
            .collect();
        (0..spec.players())
            .map(|i| mean_and_stderr(samples.iter().map(|s| s[i])))
            .collect()
    }
}

pub(crate) fn mean_and_stderr<I: Iterator<Item = f64> + Clone>(xs: I) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> MarkovChain {
        MarkovChain::unlabelled(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn swap() -> MarkovChain {
        MarkovChain::unlabelled(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn dictator_spec(horizon: Horizon) -> GameSpec {
        GameSpec::new(
            uniform2(),
            vec![vec![0.0, 1.0].into()],
            SimpleGame::dictator(1, 0).unwrap(),
            horizon,
        )
        .unwrap()
    }

    fn opposed_unanimity(chain: MarkovChain, f1: Vec<f64>, f2: Vec<f64>, horizon: Horizon) -> GameSpec {
        GameSpec::new(
            chain,
            vec![f1.into(), f2.into()],
            SimpleGame::unanimity(2).unwrap(),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn sign_parts_reconstruct() {
        for a in [-2.5, -0.0, 0.0, 1e-300, 3.0] {
            assert_eq!(positive_part(a) - negative_part(a), a);
            assert!(positive_part(a) >= 0.0 && negative_part(a) >= 0.0);
        }
    }

    #[test]
    fn spec_validation() {
        let g = SimpleGame::unanimity(2).unwrap();
        assert!(matches!(
            GameSpec::new(uniform2(), vec![vec![0.0, 1.0].into()], g.clone(), Horizon::Finite(1)),
            Err(GameError::PlayerCount { .. })
        ));
        assert!(matches!(
            GameSpec::new(uniform2(), vec![vec![0.0].into(), vec![0.0, 1.0].into()], g.clone(), Horizon::Finite(1)),
            Err(GameError::UtilityLength { player: 0, .. })
        ));
        assert!(matches!(
            GameSpec::new(uniform2(), vec![vec![f64::NAN, 0.0].into(), vec![0.0, 1.0].into()], g, Horizon::Finite(1)),
            Err(GameError::NonFiniteUtility { player: 0 })
        ));
    }

    #[test]
    fn zero_horizon_returns_utilities() {
        let spec = dictator_spec(Horizon::Finite(0));
        let sol = solve_finite(&spec).unwrap();
        assert_eq!(sol.values[0], vec![spec.utilities[0].clone()]);
        assert_eq!(sol.horizon(), 0);
        let payoff = evaluate_profile(&spec, &sol.profile, 1).unwrap();
        assert_eq!(payoff, vec![1.0]);
    }

    #[test]
    fn dictator_worked_example() {
        let spec = dictator_spec(Horizon::Finite(2));
        let sol = solve_finite(&spec).unwrap();
        assert_eq!(sol.values[0][1].0, vec![0.5, 0.5]);
        assert_eq!(sol.values[0][2].0, vec![0.75, 0.75]);
        // Stage 1 has one further step after it.
        assert_eq!(sol.profile.stages[0][0], vec![false, true]);
        assert_eq!(sol.profile.stages[1][0], vec![true, true]);
        assert_eq!(evaluate_profile(&spec, &sol.profile, 0).unwrap(), vec![0.75]);
    }

    #[test]
    fn opposed_unanimity_worked_example() {
        let spec = opposed_unanimity(uniform2(), vec![0.0, 1.0], vec![1.0, 0.0], Horizon::Finite(2));
        let sol = solve_finite(&spec).unwrap();
        for i in 0..2 {
            assert_eq!(sol.values[i][1].0, vec![0.5, 0.5]);
            assert_eq!(sol.values[i][2].0, vec![0.5, 0.5]);
        }
        assert_eq!(sol.profile.stages[0], vec![vec![false, true], vec![true, false]]);
        let gaps = deviation_gap(&spec, &sol.profile, 0).unwrap();
        assert!(gaps.max_gap() <= 1e-12);
    }

    #[test]
    fn stop_time_examples() {
        let g = SimpleGame::majority(2, 1).unwrap();
        let all = StoppingProfile::constant(3, 2, 2, true);
        let none = StoppingProfile::constant(3, 2, 2, false);
        assert_eq!(stop_time(&all, &g, &[0, 1, 0, 1]), Some(1));
        assert_eq!(stop_time(&none, &g, &[0, 1, 0, 1]), None);
        let u = SimpleGame::unanimity(2).unwrap();
        let disjoint = StoppingProfile {
            stages: vec![vec![vec![true, false], vec![false, true]]; 3],
        };
        for path in [[0, 0, 0, 0], [0, 1, 0, 1], [1, 1, 1, 1]] {
            assert_eq!(stop_time(&disjoint, &u, &path), None);
        }
    }

    #[test]
    fn evaluate_profile_examples() {
        let spec = dictator_spec(Horizon::Finite(2));
        let all = StoppingProfile::constant(2, 1, 2, true);
        assert_eq!(evaluate_profile(&spec, &all, 0).unwrap(), vec![0.5]);
        let never = StoppingProfile::constant(2, 1, 2, false);
        for x0 in 0..2 {
            assert_eq!(evaluate_profile(&spec, &never, x0).unwrap(), vec![0.5]);
        }
        let bad = StoppingProfile::constant(3, 1, 2, false);
        assert_eq!(evaluate_profile(&spec, &bad, 0), Err(GameError::ProfileShape));
    }

    #[test]
    fn never_stop_dictator_gap() {
        let spec = dictator_spec(Horizon::Finite(2));
        let never = StoppingProfile::constant(2, 1, 2, false);
        let gap = deviation_gap(&spec, &never, 1).unwrap();
        assert_eq!(gap.payoff, vec![0.5]);
        assert_eq!(gap.best_response, vec![0.75]);
        assert_eq!(gap.gap, vec![0.25]);
    }

    #[test]
    fn constant_utilities_have_zero_gaps() {
        let spec = GameSpec::new(
            uniform2(),
            vec![StateFunction::constant(2, 3.0), StateFunction::constant(2, 3.0)],
            SimpleGame::majority(2, 1).unwrap(),
            Horizon::Finite(3),
        )
        .unwrap();
        for stop in [true, false] {
            let profile = StoppingProfile::constant(3, 2, 2, stop);
            assert_eq!(deviation_gap(&spec, &profile, 0).unwrap().gap, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn deviation_guard() {
        let chain = MarkovChain::unlabelled(&vec![vec![1.0 / 24.0; 24]; 24]).unwrap();
        let spec = GameSpec::new(
            chain,
            vec![StateFunction::zeros(24)],
            SimpleGame::dictator(1, 0).unwrap(),
            Horizon::Finite(1),
        )
        .unwrap();
        let profile = StoppingProfile::constant(1, 1, 24, true);
        assert!(matches!(
            deviation_gap(&spec, &profile, 0),
            Err(GameError::TooManyDeviations { .. })
        ));
    }

    #[test]
    fn stop_time_distribution_sums_to_one() {
        let spec = dictator_spec(Horizon::Finite(3));
        let sol = solve_finite(&spec).unwrap();
        let dist = stop_time_distribution(&spec, &sol.profile, 0).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(dist[0], 0.0);
        // Stages 1 and 2 stop in the high state only.
        assert_eq!(dist[1], 0.5);
        assert_eq!(dist[2], 0.25);
        assert_eq!(dist[3], 0.25);
    }

    #[test]
    fn infinite_constant_utilities_fixed_after_one_iteration() {
        let spec = GameSpec::new(
            uniform2(),
            vec![StateFunction::constant(2, 2.0); 3],
            SimpleGame::majority(3, 2).unwrap(),
            Horizon::Infinite,
        )
        .unwrap();
        let sol = solve_infinite(&spec, 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.residual, 0.0);
        assert!(sol.stop_sets.iter().flatten().all(|&s| s));
        assert_eq!(sol.values, spec.utilities);
    }

    #[test]
    fn infinite_dictator_matches_long_horizon() {
        let spec = dictator_spec(Horizon::Infinite);
        let w = solve_infinite(&spec, 1e-13, 10_000).unwrap();
        let v = solve_finite(&spec.clone().with_horizon(Horizon::Finite(200))).unwrap();
        assert!(w.values[0].max_abs_diff(&v.values[0][200]) <= 1e-6);
        assert!((w.values[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_chain_unanimity_cycles() {
        let spec = opposed_unanimity(swap(), vec![1.0, 0.0], vec![0.0, 1.0], Horizon::Infinite);
        match solve_infinite(&spec, 1e-10, 50) {
            Err(GameError::NotConverged { iterations, residual_history }) => {
                assert_eq!(iterations, 50);
                assert!(residual_history.iter().all(|&r| r == 1.0));
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        // Finite-horizon values alternate with the parity of the horizon.
        let sol = solve_finite(&spec.with_horizon(Horizon::Finite(4))).unwrap();
        assert_eq!(sol.values[0][3].0, vec![0.0, 1.0]);
        assert_eq!(sol.values[0][4].0, vec![1.0, 0.0]);
    }

    #[test]
    fn infinite_requires_positive_tolerance_and_horizon() {
        let spec = dictator_spec(Horizon::Infinite);
        assert_eq!(solve_infinite(&spec, 0.0, 5).unwrap_err(), GameError::BadTolerance(0.0));
        assert!(solve_finite(&spec).is_err());
        assert!(solve_infinite(&dictator_spec(Horizon::Finite(1)), 1e-3, 5).is_err());
    }

    #[test]
    fn monte_carlo_matches_infinite_value() {
        let spec = dictator_spec(Horizon::Infinite);
        let w = solve_infinite(&spec, 1e-13, 10_000).unwrap();
        let est = w.monte_carlo_payoffs(&spec, 0, 200, 2000, 3);
        assert!((est[0].0 - w.values[0][0]).abs() <= 3.0 * est[0].1 + 1e-12);
    }
}
