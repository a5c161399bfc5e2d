//! A network of disorder detectors fused by a simple game.
//!
//! Each sensor runs its own discretized detection chain; channels are
//! independent, so the network state is the product of the sensor states
//! and its kernel is the product kernel. Sensor `i` is player `i` with the
//! window payoff of its own channel as utility, and the fusion game decides
//! when the network raises the alarm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{self, DetectionChain, DisorderError, DisorderModel, PosteriorState, MAX_CHAIN_STATES};
use crate::markov::{MarkovChain, SparseRow, StateFunction};
use crate::rng;
use crate::simple_game::SimpleGame;
use crate::voting_game::{self, mean_and_stderr, EquilibriumSolution, GameError, GameSpec, Horizon};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("a sensor network needs at least one sensor")]
    NoSensors,
    #[error("fusion game has {game} players but the network has {sensors} sensors")]
    FusionSize { game: usize, sensors: usize },
    #[error("product chain would have {states} states (limit {MAX_CHAIN_STATES})")]
    GridTooLarge { states: u128 },
    #[error("network horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Clone, Debug)]
pub struct NetSpec {
    pub sensors: Vec<DisorderModel>,
    pub fusion: SimpleGame,
    pub grid_size: usize,
    pub horizon: usize,
}

/// The network stopping game together with the per-sensor chains needed to
/// map continuous posteriors onto product states.
#[derive(Clone, Debug)]
pub struct NetGame {
    pub spec: GameSpec,
    pub sensors: Vec<DetectionChain>,
    strides: Vec<usize>,
    pub initial: usize,
}

impl NetGame {
    /// Product index with sensor 0 as the most significant digit.
    pub fn product_index(&self, components: &[usize]) -> usize {
        components.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn components(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.sensors)
            .map(|(s, d)| (index / s) % d.len())
            .collect()
    }

    pub fn locate(&self, posteriors: &[PosteriorState]) -> usize {
        let comps: Vec<usize> = self
            .sensors
            .iter()
            .zip(posteriors)
            .map(|(d, s)| d.locate(s))
            .collect();
        self.product_index(&comps)
    }
}

fn product_rows(factors: &[&MarkovChain], strides: &[usize], total: usize) -> Vec<SparseRow> {
    (0..total)
        .map(|index| {
            let mut row: SparseRow = vec![(0, 1.0)];
            for (chain, &stride) in factors.iter().zip(strides) {
                let comp = (index / stride) % chain.len();
                row = row
                    .iter()
                    .flat_map(|&(base, p)| chain.row(comp).iter().map(move |&(y, q)| (base + y * stride, p * q)))
                    .collect();
            }
            row
        })
        .collect()
}

pub fn build_net_game(spec: &NetSpec) -> Result<NetGame, NetError> {
    if spec.sensors.is_empty() {
        return Err(NetError::NoSensors);
    }
    if spec.fusion.players() != spec.sensors.len() {
        return Err(NetError::FusionSize {
            game: spec.fusion.players(),
            sensors: spec.sensors.len(),
        });
    }
    if spec.horizon == 0 {
        return Err(NetError::ZeroHorizon);
    }
    let mut total: u128 = 1;
    for m in &spec.sensors {
        total *= disorder::grid_point_count(m.alphabet().len(), m.window(), spec.grid_size);
        if total > MAX_CHAIN_STATES {
            return Err(NetError::GridTooLarge { states: total });
        }
    }
    let sensors = spec
        .sensors
        .iter()
        .map(|m| disorder::build_detection_chain(m, spec.grid_size))
        .collect::<Result<Vec<_>, _>>()?;
    let total = total as usize;
    let mut strides = vec![1; sensors.len()];
    for i in (0..sensors.len() - 1).rev() {
        strides[i] = strides[i + 1] * sensors[i + 1].len();
    }
    let factors: Vec<&MarkovChain> = sensors.iter().map(|d| &d.chain).collect();
    let rows = product_rows(&factors, &strides, total);
    let labels = (0..total)
        .map(|index| {
            sensors
                .iter()
                .zip(&strides)
                .map(|(d, s)| d.chain.labels()[(index / s) % d.len()].as_str())
                .collect::<Vec<_>>()
                .join(" & ")
        })
        .collect();
    let chain = MarkovChain::from_sparse(labels, rows).map_err(|source| DisorderError::Kernel {
        which: "product",
        source,
    })?;
    let utilities = sensors
        .iter()
        .zip(&strides)
        .map(|(d, &s)| StateFunction((0..total).map(|index| d.utility[(index / s) % d.len()]).collect()))
        .collect();
    let initial = sensors.iter().zip(&strides).map(|(d, s)| d.initial * s).sum();
    let game = GameSpec::new(chain, utilities, spec.fusion.clone(), Horizon::Finite(spec.horizon))?;
    Ok(NetGame {
        spec: game,
        sensors,
        strides,
        initial,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetMonteCarlo {
    pub reps: usize,
    pub seed: u64,
    /// `P(|theta_i - t| <= d_i)` per sensor.
    pub detection_frequency: Vec<f64>,
    pub detection_stderr: Vec<f64>,
    /// Counts of the network stop time; index `n` for stage `n`, index 0 unused.
    pub stop_time_histogram: Vec<u64>,
    pub mean_stop_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub sensors: usize,
    pub horizon: usize,
    pub grid_size: usize,
    pub product_states: usize,
    /// Equilibrium value of each sensor at the initial network state.
    pub initial_values: Vec<f64>,
    /// Exact law of the stop time on the discretized chain.
    pub dp_stop_time_distribution: Vec<f64>,
    pub monte_carlo: Option<NetMonteCarlo>,
}

/// Solves the network game and, when `mc_reps > 0`, replays the equilibrium
/// on simulated sensor trajectories.
pub fn run_pipeline(spec: &NetSpec, mc_reps: usize, seed: u64) -> Result<(NetReport, NetGame, EquilibriumSolution), NetError> {
    let net = build_net_game(spec)?;
    let solution = voting_game::solve_finite(&net.spec)?;
    let dp_stop_time_distribution = voting_game::stop_time_distribution(&net.spec, &solution.profile, net.initial)?;
    let monte_carlo = if mc_reps > 0 {
        Some(simulate_equilibrium(spec, &net, &solution, mc_reps, seed)?)
    } else {
        None
    };
    let report = NetReport {
        sensors: spec.sensors.len(),
        horizon: spec.horizon,
        grid_size: spec.grid_size,
        product_states: net.spec.states(),
        initial_values: solution.initial_values(net.initial),
        dp_stop_time_distribution,
        monte_carlo,
    };
    Ok((report, net, solution))
}

fn simulate_equilibrium(
    spec: &NetSpec,
    net: &NetGame,
    solution: &EquilibriumSolution,
    reps: usize,
    seed: u64,
) -> Result<NetMonteCarlo, NetError> {
    let horizon = spec.horizon;
    let runs: Vec<(usize, Vec<bool>)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r);
            let mut procs: Vec<_> = spec.sensors.iter().map(|m| m.process(&mut rng)).collect();
            let mut posts: Vec<PosteriorState> = spec.sensors.iter().map(DisorderModel::initial_state).collect();
            for n in 1..=horizon {
                for ((m, proc), post) in spec.sensors.iter().zip(procs.iter_mut()).zip(posts.iter_mut()) {
                    let obs = proc.advance(&mut rng);
                    *post = m.posterior_step(post, obs)?;
                }
                if n == horizon || solution.profile.stops(&spec.fusion, n, net.locate(&posts)) {
                    let hits = spec
                        .sensors
                        .iter()
                        .zip(&procs)
                        .map(|(m, p)| p.change_time().abs_diff(n as u64) <= m.window() as u64)
                        .collect();
                    return Ok((n, hits));
                }
            }
            unreachable!("loop always stops at the horizon")
        })
        .collect::<Result<_, DisorderError>>()?;
    let mut histogram = vec![0u64; horizon + 1];
    for (n, _) in &runs {
        histogram[*n] += 1;
    }
    let (frequency, stderr): (Vec<f64>, Vec<f64>) = (0..spec.sensors.len())
        .map(|i| mean_and_stderr(runs.iter().map(|(_, h)| f64::from(u8::from(h[i])))))
        .unzip();
    Ok(NetMonteCarlo {
        reps,
        seed,
        detection_frequency: frequency,
        detection_stderr: stderr,
        stop_time_histogram: histogram,
        mean_stop_time: runs.iter().map(|r| r.0 as f64).sum::<f64>() / reps as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(hazard: f64, window: usize) -> DisorderModel {
        DisorderModel::new(
            vec!["lo".into(), "hi".into()],
            &[vec![0.8, 0.2], vec![0.6, 0.4]],
            &[vec![0.3, 0.7], vec![0.2, 0.8]],
            hazard,
            window,
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_sensor_net_is_the_detection_chain() {
        let m = sensor(0.2, 1);
        let spec = NetSpec {
            sensors: vec![m.clone()],
            fusion: SimpleGame::dictator(1, 0).unwrap(),
            grid_size: 5,
            horizon: 6,
        };
        let net = build_net_game(&spec).unwrap();
        let det = disorder::build_detection_chain(&m, 5).unwrap();
        assert_eq!(net.spec.chain, det.chain);
        assert_eq!(net.spec.utilities, vec![det.utility.clone()]);
        assert_eq!(net.initial, det.initial);
    }

    #[test]
    fn identical_sensors_are_symmetric() {
        let m = sensor(0.25, 0);
        let spec = NetSpec {
            sensors: vec![m.clone(), m],
            fusion: SimpleGame::unanimity(2).unwrap(),
            grid_size: 4,
            horizon: 5,
        };
        let net = build_net_game(&spec).unwrap();
        let single = net.sensors[0].len();
        assert_eq!(net.spec.states(), single * single);
        let sol = voting_game::solve_finite(&net.spec).unwrap();
        for a in 0..single {
            for b in 0..single {
                let x = net.product_index(&[a, b]);
                let y = net.product_index(&[b, a]);
                assert_eq!(net.components(x), vec![a, b]);
                assert_eq!(net.spec.utilities[0][x], net.spec.utilities[1][y]);
                for n in 0..=5 {
                    assert!((sol.values[0][n][x] - sol.values[1][n][y]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn validation() {
        let m = sensor(0.2, 0);
        let mut spec = NetSpec {
            sensors: vec![m.clone()],
            fusion: SimpleGame::unanimity(2).unwrap(),
            grid_size: 3,
            horizon: 2,
        };
        assert!(matches!(build_net_game(&spec), Err(NetError::FusionSize { .. })));
        spec.fusion = SimpleGame::dictator(1, 0).unwrap();
        spec.horizon = 0;
        assert_eq!(build_net_game(&spec).unwrap_err(), NetError::ZeroHorizon);
        spec.horizon = 2;
        spec.sensors = vec![m.clone(), m.clone(), m];
        spec.fusion = SimpleGame::majority(3, 2).unwrap();
        spec.grid_size = 41;
        assert!(matches!(build_net_game(&spec), Err(NetError::GridTooLarge { .. })));
    }

    #[test]
    fn zero_reps_skips_monte_carlo() {
        let spec = NetSpec {
            sensors: vec![sensor(0.2, 0)],
            fusion: SimpleGame::dictator(1, 0).unwrap(),
            grid_size: 5,
            horizon: 4,
        };
        let (report, _, _) = run_pipeline(&spec, 0, 1).unwrap();
        assert!(report.monte_carlo.is_none());
        assert_eq!(report.initial_values.len(), 1);
        assert!((report.dp_stop_time_distribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pipeline_is_deterministic_given_seed() {
        let spec = NetSpec {
            sensors: vec![sensor(0.2, 0), sensor(0.3, 1)],
            fusion: SimpleGame::majority(2, 1).unwrap(),
            grid_size: 4,
            horizon: 6,
        };
        let (a, _, _) = run_pipeline(&spec, 500, 8).unwrap();
        let (b, _, _) = run_pipeline(&spec, 500, 8).unwrap();
        assert_eq!(a, b);
        let mc = a.monte_carlo.unwrap();
        assert_eq!(mc.stop_time_histogram.iter().sum::<u64>(), 500);
        assert!(mc.detection_frequency.iter().all(|f| (0.0..=1.0).contains(f)));
    }
}
