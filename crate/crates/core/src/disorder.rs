//! Bayesian disorder detection at a single sensor.
//!
//! Observations form a Markov chain on a finite alphabet whose transition
//! kernel switches from `F0` to `F1` at an unobserved geometric time
//! `theta` with `P(theta = j) = (1-q)^(j-1) q`, `j >= 1`. The transition
//! into `X_theta` is the first one drawn from `F1`. The detector wants a
//! stopping time `tau` maximizing `P(|theta - tau| <= d)`.
//!
//! The sufficient statistic is the lagged posterior: `P(theta = n - k | F_n)`
//! for `k = 0..=d` together with `P(theta <= n | F_n)`. At a stopping time
//! the conditional success probability is a function of this state only,
//! which makes the detection problem an optimal stopping problem on a
//! Markov process. [`build_detection_chain`] discretizes it to a finite
//! chain that the voting-game solver can handle.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MarkovChain, MarkovError, SparseRow, StateFunction};
use crate::rng::{self, StreamRng};
use crate::simple_game::SimpleGame;
use crate::voting_game::{self, EquilibriumSolution, GameError, GameSpec, Horizon, StoppingProfile};

/// Largest discretized chain [`build_detection_chain`] will build.
pub const MAX_CHAIN_STATES: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DisorderError {
    #[error("{which} kernel: {source}")]
    Kernel {
        which: &'static str,
        #[source]
        source: MarkovError,
    },
    #[error("pre- and post-change kernels have different alphabets")]
    AlphabetMismatch,
    #[error("change hazard must lie in (0, 1), got {0}")]
    Hazard(f64),
    #[error("initial observation {0} is not in the alphabet")]
    InitialObservation(usize),
    #[error("observation {to} after {from} is impossible under both regimes")]
    ZeroLikelihood { from: usize, to: usize },
    #[error("posterior state has {got} lags, model window needs {expected}")]
    StateShape { expected: usize, got: usize },
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("discretized chain would have {states} states (limit {MAX_CHAIN_STATES})")]
    GridTooLarge { states: u128 },
    #[error("simulation horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderModel {
    pre: MarkovChain,
    post: MarkovChain,
    hazard: f64,
    window: usize,
    initial_obs: usize,
}

/// Posterior information after `n` observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    pub prev_obs: usize,
    /// `lags[k] = P(theta = n - k | F_n)` for `k = 0..=d`.
    pub lags: Vec<f64>,
    /// `P(theta <= n | F_n)`.
    pub changed: f64,
}

impl PosteriorState {
    pub fn satisfies_invariants(&self, tol: f64) -> bool {
        let lag_sum: f64 = self.lags.iter().sum();
        self.lags.iter().all(|&l| l >= -tol)
            && lag_sum <= self.changed + tol
            && self.changed <= 1.0 + tol
    }
}

/// One simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderPath {
    /// `X_0, ..., X_horizon`.
    pub observations: Vec<usize>,
    pub change_time: u64,
}

impl DisorderModel {
    pub fn new(
        alphabet: Vec<String>,
        pre_change: &[Vec<f64>],
        post_change: &[Vec<f64>],
        hazard: f64,
        window: usize,
        initial_obs: usize,
    ) -> Result<Self, DisorderError> {
        let pre = MarkovChain::new(alphabet.clone(), pre_change)
            .map_err(|source| DisorderError::Kernel { which: "pre-change", source })?;
        let post = MarkovChain::new(alphabet, post_change)
            .map_err(|source| DisorderError::Kernel { which: "post-change", source })?;
        Self::from_chains(pre, post, hazard, window, initial_obs)
    }

    pub fn from_chains(
        pre: MarkovChain,
        post: MarkovChain,
        hazard: f64,
        window: usize,
        initial_obs: usize,
    ) -> Result<Self, DisorderError> {
        if pre.labels() != post.labels() {
            return Err(DisorderError::AlphabetMismatch);
        }
        if !(hazard > 0.0 && hazard < 1.0) {
            return Err(DisorderError::Hazard(hazard));
        }
        if initial_obs >= pre.len() {
            return Err(DisorderError::InitialObservation(initial_obs));
        }
        Ok(Self {
            pre,
            post,
            hazard,
            window,
            initial_obs,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        self.pre.labels()
    }

    pub fn hazard(&self) -> f64 {
        self.hazard
    }

    /// `p = 1 - q`, the per-step probability that no change happens.
    pub fn survival(&self) -> f64 {
        1.0 - self.hazard
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn initial_obs(&self) -> usize {
        self.initial_obs
    }

    pub fn pre_change(&self) -> &MarkovChain {
        &self.pre
    }

    pub fn post_change(&self) -> &MarkovChain {
        &self.post
    }

    /// Nothing observed yet: no change can have happened at time 0.
    pub fn initial_state(&self) -> PosteriorState {
        PosteriorState {
            prev_obs: self.initial_obs,
            lags: vec![0.0; self.window + 1],
            changed: 0.0,
        }
    }

    fn check_state(&self, state: &PosteriorState) -> Result<(), DisorderError> {
        if state.lags.len() != self.window + 1 {
            return Err(DisorderError::StateShape {
                expected: self.window + 1,
                got: state.lags.len(),
            });
        }
        if state.prev_obs >= self.pre.len() {
            return Err(DisorderError::InitialObservation(state.prev_obs));
        }
        Ok(())
    }

    /// Weights of the next transition coming from the post- and pre-change
    /// kernels: `(Pi + (1 - Pi) q, (1 - Pi) p)`.
    fn regime_weights(&self, state: &PosteriorState) -> (f64, f64) {
        let not_changed = 1.0 - state.changed;
        (
            state.changed + not_changed * self.hazard,
            not_changed * self.survival(),
        )
    }

    /// Predictive law of the next observation, in alphabet order, zero
    /// entries omitted.
    pub fn predictive(&self, state: &PosteriorState) -> Vec<(usize, f64)> {
        let (w1, w0) = self.regime_weights(state);
        let a = state.prev_obs;
        (0..self.pre.len())
            .map(|b| (b, w1 * self.post.prob(a, b) + w0 * self.pre.prob(a, b)))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    /// Bayes update of the posterior after observing `obs`.
    pub fn posterior_step(&self, state: &PosteriorState, obs: usize) -> Result<PosteriorState, DisorderError> {
        self.check_state(state)?;
        if obs >= self.pre.len() {
            return Err(DisorderError::InitialObservation(obs));
        }
        let a = state.prev_obs;
        let l1 = self.post.prob(a, obs);
        let l0 = self.pre.prob(a, obs);
        let (w1, w0) = self.regime_weights(state);
        let change = w1 * l1;
        let denom = change + w0 * l0;
        if !(denom > 0.0) {
            return Err(DisorderError::ZeroLikelihood { from: a, to: obs });
        }
        let mut lags = Vec::with_capacity(self.window + 1);
        lags.push((1.0 - state.changed) * self.hazard * l1 / denom);
        lags.extend(state.lags[..self.window].iter().map(|l| l * l1 / denom));
        Ok(PosteriorState {
            prev_obs: obs,
            lags,
            changed: change / denom,
        })
    }

    /// `P(|theta - n| <= d | F_n)` when stopping now: mass of the last
    /// `d + 1` change times plus the chance the change is still to come
    /// within `d` steps.
    pub fn window_payoff(&self, state: &PosteriorState) -> f64 {
        let past: f64 = state.lags.iter().sum();
        let future = (1.0 - state.changed) * (1.0 - self.survival().powi(self.window as i32));
        past + future
    }

    /// Draws `theta` by inversion; saturates far beyond any usable horizon.
    pub fn sample_change_time<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.gen::<f64>();
        let k = (u.ln() / self.survival().ln()).floor();
        if k.is_finite() {
            1 + k as u64
        } else {
            1
        }
    }

    /// A live trajectory fed one observation at a time.
    pub fn process<'a>(&'a self, rng: &mut StreamRng) -> DisorderProcess<'a> {
        DisorderProcess {
            model: self,
            change_time: self.sample_change_time(rng),
            time: 0,
            obs: self.initial_obs,
        }
    }

    pub fn simulate(&self, horizon: usize, seed: u64) -> Result<DisorderPath, DisorderError> {
        if horizon == 0 {
            return Err(DisorderError::ZeroHorizon);
        }
        let mut rng = rng::stream(seed, 0);
        let mut proc = self.process(&mut rng);
        let mut observations = vec![self.initial_obs];
        for _ in 0..horizon {
            observations.push(proc.advance(&mut rng));
        }
        Ok(DisorderPath {
            observations,
            change_time: proc.change_time,
        })
    }
}

pub struct DisorderProcess<'a> {
    model: &'a DisorderModel,
    change_time: u64,
    time: u64,
    obs: usize,
}

impl DisorderProcess<'_> {
    pub fn change_time(&self) -> u64 {
        self.change_time
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Draws `X_{n+1}` from `X_n`.
    pub fn advance(&mut self, rng: &mut StreamRng) -> usize {
        self.time += 1;
        let kernel = if self.time < self.change_time {
            &self.model.pre
        } else {
            &self.model.post
        };
        self.obs = kernel.step(self.obs, rng);
        self.obs
    }
}

/// A posterior snapped onto the uniform grid `{0, 1/(G-1), ..., 1}`; the
/// coordinates are grid indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub obs: usize,
    pub lags: Vec<u32>,
    pub changed: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PosteriorGrid {
    pub size: usize,
}

impl PosteriorGrid {
    fn step(&self) -> f64 {
        1.0 / (self.size - 1) as f64
    }

    fn index(&self, v: f64) -> u32 {
        (v.clamp(0.0, 1.0) * (self.size - 1) as f64).round() as u32
    }

    /// Nearest-point projection followed by repair of `sum(lags) <= changed`.
    pub fn snap(&self, state: &PosteriorState) -> GridPoint {
        let top = (self.size - 1) as u32;
        let mut lags: Vec<u32> = state.lags.iter().map(|&l| self.index(l)).collect();
        let mut changed = self.index(state.changed);
        let mut total: u32 = lags.iter().sum();
        if total > changed {
            changed = total.min(top);
        }
        while total > changed {
            // Trim the largest lag, the oldest one on ties.
            let k = (0..lags.len()).max_by_key(|&k| lags[k]).unwrap();
            lags[k] -= 1;
            total -= 1;
        }
        GridPoint {
            obs: state.prev_obs,
            lags,
            changed,
        }
    }

    pub fn state(&self, point: &GridPoint) -> PosteriorState {
        let h = self.step();
        PosteriorState {
            prev_obs: point.obs,
            lags: point.lags.iter().map(|&l| l as f64 * h).collect(),
            changed: point.changed as f64 * h,
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of valid grid points for an alphabet of `obs` symbols.
pub fn grid_point_count(obs: usize, window: usize, grid: usize) -> u128 {
    let dims = window as u128 + 1;
    // Compositions of at most `c` into `dims` parts, summed over c.
    let per_obs: u128 = (0..grid as u128).map(|c| binomial(c + dims, dims)).sum();
    per_obs * obs as u128
}

fn compositions(parts: usize, max_total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == parts {
        out.push(prefix.clone());
        return;
    }
    let used: u32 = prefix.iter().sum();
    for v in 0..=max_total - used {
        prefix.push(v);
        compositions(parts, max_total, prefix, out);
        prefix.pop();
    }
}

/// The discretized detection problem as a finite Markov chain.
#[derive(Clone, Debug)]
pub struct DetectionChain {
    pub chain: MarkovChain,
    /// Window payoff at each grid point.
    pub utility: StateFunction,
    pub grid: PosteriorGrid,
    pub points: Vec<GridPoint>,
    index: HashMap<GridPoint, usize>,
    pub initial: usize,
}

impl DetectionChain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, point: &GridPoint) -> Option<usize> {
        self.index.get(point).copied()
    }

    /// Chain state for a continuous posterior.
    pub fn locate(&self, state: &PosteriorState) -> usize {
        let point = self.grid.snap(state);
        self.index[&point]
    }
}

pub fn build_detection_chain(model: &DisorderModel, grid_size: usize) -> Result<DetectionChain, DisorderError> {
    if grid_size < 2 {
        return Err(DisorderError::GridTooSmall(grid_size));
    }
    let count = grid_point_count(model.alphabet().len(), model.window(), grid_size);
    if count > MAX_CHAIN_STATES {
        return Err(DisorderError::GridTooLarge { states: count });
    }
    let grid = PosteriorGrid { size: grid_size };
    let mut points = Vec::with_capacity(count as usize);
    for obs in 0..model.alphabet().len() {
        for changed in 0..grid_size as u32 {
            let mut lag_sets = Vec::new();
            compositions(model.window() + 1, changed, &mut Vec::new(), &mut lag_sets);
            points.extend(lag_sets.into_iter().map(|lags| GridPoint { obs, lags, changed }));
        }
    }
    let index: HashMap<GridPoint, usize> = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let mut rows: Vec<SparseRow> = Vec::with_capacity(points.len());
    let mut utility = Vec::with_capacity(points.len());
    for point in &points {
        let state = grid.state(point);
        utility.push(model.window_payoff(&state));
        let mut row = SparseRow::new();
        for (b, p) in model.predictive(&state) {
            let next = model.posterior_step(&state, b)?;
            row.push((index[&grid.snap(&next)], p));
        }
        rows.push(row);
    }
    let labels = points
        .iter()
        .map(|p| {
            let lags: Vec<String> = p.lags.iter().map(u32::to_string).collect();
            format!("{}|{}|{}", model.alphabet()[p.obs], p.changed, lags.join(","))
        })
        .collect();
    let chain = MarkovChain::from_sparse(labels, rows)
        .map_err(|source| DisorderError::Kernel { which: "detection", source })?;
    let initial = index[&grid.snap(&model.initial_state())];
    Ok(DetectionChain {
        chain,
        utility: utility.into(),
        grid,
        points,
        index,
        initial,
    })
}

/// Solves the discretized single-sensor problem as a one-player game.
pub fn solve_detection(
    model: &DisorderModel,
    grid_size: usize,
    horizon: usize,
) -> Result<(DetectionChain, GameSpec, EquilibriumSolution), DisorderError> {
    let det = build_detection_chain(model, grid_size)?;
    let spec = GameSpec::new(
        det.chain.clone(),
        vec![det.utility.clone()],
        SimpleGame::dictator(1, 0).expect("one-player dictator game is valid"),
        Horizon::Finite(horizon),
    )?;
    let solution = voting_game::solve_finite(&spec)?;
    Ok((det, spec, solution))
}

/// A detection rule driven by the posterior; `stage` counts observations.
pub trait StoppingPolicy: Sync {
    fn should_stop(&self, stage: usize, state: &PosteriorState) -> bool;
}

impl<F> StoppingPolicy for F
where
    F: Fn(usize, &PosteriorState) -> bool + Sync,
{
    fn should_stop(&self, stage: usize, state: &PosteriorState) -> bool {
        self(stage, state)
    }
}

/// Replays one player's stopping sets of a solved detection chain on
/// continuous posteriors, snapping to the grid at decision time.
pub struct GridPolicy<'a> {
    pub chain: &'a DetectionChain,
    pub profile: &'a StoppingProfile,
    pub player: usize,
}

impl StoppingPolicy for GridPolicy<'_> {
    fn should_stop(&self, stage: usize, state: &PosteriorState) -> bool {
        if stage >= self.profile.horizon() {
            return true;
        }
        self.profile.stages[stage - 1][self.player][self.chain.locate(state)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEstimate {
    pub reps: usize,
    /// Fraction of runs with `|theta - tau| <= d`.
    pub estimate: f64,
    pub stderr: f64,
    /// Average of the posterior window payoff at `tau`.
    pub mean_window_payoff: f64,
    /// Standard error of the per-run difference between the detection
    /// indicator and the window payoff.
    pub paired_stderr: f64,
    pub mean_stop_time: f64,
}

/// Monte Carlo estimate of `P(|theta - tau| <= d)` for `policy`, forcing a
/// stop at `horizon`. Replication `r` uses stream `r` of `seed`.
pub fn evaluate_policy_mc<P: StoppingPolicy + ?Sized>(
    model: &DisorderModel,
    policy: &P,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<PolicyEstimate, DisorderError> {
    if horizon == 0 {
        return Err(DisorderError::ZeroHorizon);
    }
    let runs: Vec<(f64, f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r);
            let mut proc = model.process(&mut rng);
            let mut state = model.initial_state();
            for n in 1..=horizon {
                let obs = proc.advance(&mut rng);
                state = model.posterior_step(&state, obs)?;
                if n == horizon || policy.should_stop(n, &state) {
                    let hit = proc.change_time().abs_diff(n as u64) <= model.window() as u64;
                    return Ok((f64::from(u8::from(hit)), model.window_payoff(&state), n as f64));
                }
            }
            unreachable!("loop always stops at the horizon")
        })
        .collect::<Result<_, DisorderError>>()?;
    let (estimate, stderr) = voting_game::mean_and_stderr(runs.iter().map(|r| r.0));
    let (mean_window_payoff, _) = voting_game::mean_and_stderr(runs.iter().map(|r| r.1));
    let (_, paired_stderr) = voting_game::mean_and_stderr(runs.iter().map(|r| r.0 - r.1));
    let (mean_stop_time, _) = voting_game::mean_and_stderr(runs.iter().map(|r| r.2));
    Ok(PolicyEstimate {
        reps,
        estimate,
        stderr,
        mean_window_payoff,
        paired_stderr,
        mean_stop_time,
    })
}
