//! Serializable reports and their CSV/JSON renderings.
//!
//! Floats are written with Rust's `Display`, which prints the shortest
//! decimal string that parses back to the same value.

use serde::{Deserialize, Serialize};
use stopgame::disorder::PolicyEstimate;
use stopgame::dynkin::{DynkinSolution, NeveuCheck};
use stopgame::markov::MarkovChain;
use stopgame::sensor_net::NetReport;
use stopgame::voting_game::{EquilibriumSolution, GameSpec, InfiniteSolution};

pub trait Table {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
    fn to_json(&self) -> Result<String, String>;

    fn to_csv(&self) -> Result<String, String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).map_err(|e| e.to_string())?;
        for row in self.rows() {
            w.write_record(&row).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        String::from_utf8(bytes).map_err(|e| e.to_string())
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub labels: Vec<String>,
    pub players: usize,
    /// `None` for the infinite-horizon (stationary) solution.
    pub horizon: Option<usize>,
    pub initial_state: String,
    pub initial_values: Vec<f64>,
    /// `values[player][steps_to_go][state]`; a single stationary entry when
    /// the horizon is infinite.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `stops[player][steps_to_go][state]`: `f(x) >= v_k(x)`, the player's
    /// vote when `k` steps remain after the current one.
    pub stops: Vec<Vec<Vec<bool>>>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

impl GameReport {
    pub fn finite(spec: &GameSpec, sol: &EquilibriumSolution, x0: usize) -> Self {
        let stops = spec
            .utilities
            .iter()
            .zip(&sol.values)
            .map(|(f, vs)| vs.iter().map(|v| f.iter().zip(v.iter()).map(|(a, b)| a >= b).collect()).collect())
            .collect();
        Self {
            labels: spec.chain.labels().to_vec(),
            players: spec.players(),
            horizon: Some(sol.horizon()),
            initial_state: spec.chain.labels()[x0].clone(),
            initial_values: sol.initial_values(x0),
            values: sol.values.iter().map(|vs| vs.iter().map(|v| v.0.clone()).collect()).collect(),
            stops,
            iterations: None,
            residual: None,
        }
    }

    pub fn infinite(spec: &GameSpec, sol: &InfiniteSolution, x0: usize) -> Self {
        Self {
            labels: spec.chain.labels().to_vec(),
            players: spec.players(),
            horizon: None,
            initial_state: spec.chain.labels()[x0].clone(),
            initial_values: sol.values.iter().map(|v| v[x0]).collect(),
            values: sol.values.iter().map(|v| vec![v.0.clone()]).collect(),
            stops: sol.stop_sets.iter().map(|s| vec![s.clone()]).collect(),
            iterations: Some(sol.iterations),
            residual: Some(sol.residual),
        }
    }
}

impl Table for GameReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["player", "steps_to_go", "state", "value", "stops"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (i, (vs, ss)) in self.values.iter().zip(&self.stops).enumerate() {
            for (k, (v, s)) in vs.iter().zip(ss).enumerate() {
                let steps = match self.horizon {
                    Some(_) => k.to_string(),
                    None => "inf".to_string(),
                };
                for (x, label) in self.labels.iter().enumerate() {
                    rows.push(vec![(i + 1).to_string(), steps.clone(), label.clone(), v[x].to_string(), flag(s[x])]);
                }
            }
        }
        rows
    }

    fn to_json(&self) -> Result<String, String> {
        json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub state: String,
    pub player: usize,
    pub payoff: f64,
    pub best_response: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub initial_state: String,
    pub tol: f64,
    pub max_gap: f64,
    pub rows: Vec<VerifyRow>,
}

impl Table for VerifyReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["state", "player", "payoff", "best_response", "gap"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.state.clone(),
                    r.player.to_string(),
                    r.payoff.to_string(),
                    r.best_response.to_string(),
                    r.gap.to_string(),
                ]
            })
            .collect()
    }

    fn to_json(&self) -> Result<String, String> {
        json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynkinReport {
    pub labels: Vec<String>,
    pub horizon: usize,
    /// Whether `X <= W <= Y` holds everywhere.
    pub ordered: bool,
    /// First state violating the ordering.
    pub witness: Option<String>,
    /// `value[steps_to_go][state]`.
    pub value: Vec<Vec<f64>>,
    pub p1_stop_prob: Vec<Vec<f64>>,
    pub p2_stop_prob: Vec<Vec<f64>>,
    pub pure: Vec<Vec<bool>>,
}

impl DynkinReport {
    pub fn new(chain: &MarkovChain, check: &NeveuCheck, sol: &DynkinSolution) -> Self {
        Self {
            labels: chain.labels().to_vec(),
            horizon: sol.horizon(),
            ordered: check.ordered,
            witness: check.witness.map(|s| chain.labels()[s].clone()),
            value: sol.value.iter().map(|v| v.0.clone()).collect(),
            p1_stop_prob: sol.stop_prob.iter().map(|p| p[0].clone()).collect(),
            p2_stop_prob: sol.stop_prob.iter().map(|p| p[1].clone()).collect(),
            pure: sol.pure.clone(),
        }
    }
}

impl Table for DynkinReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["steps_to_go", "state", "value", "p1_stop_prob", "p2_stop_prob"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for k in 0..self.value.len() {
            for (s, label) in self.labels.iter().enumerate() {
                rows.push(vec![
                    k.to_string(),
                    label.clone(),
                    self.value[k][s].to_string(),
                    self.p1_stop_prob[k][s].to_string(),
                    self.p2_stop_prob[k][s].to_string(),
                ]);
            }
        }
        rows
    }

    fn to_json(&self) -> Result<String, String> {
        json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub reps: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl PolicyRow {
    pub fn from_estimate(policy: &str, est: &PolicyEstimate) -> Self {
        Self {
            policy: policy.to_string(),
            reps: est.reps,
            estimate: est.estimate,
            stderr: est.stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub grid_size: usize,
    pub chain_states: usize,
    pub horizon: usize,
    pub seed: u64,
    /// `dp` is the exact value on the grid chain; the other rows are
    /// simulated on the continuous posterior.
    pub rows: Vec<PolicyRow>,
}

impl Table for DetectReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["policy", "reps", "estimate", "stderr"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![r.policy.clone(), r.reps.to_string(), r.estimate.to_string(), r.stderr.to_string()])
            .collect()
    }

    fn to_json(&self) -> Result<String, String> {
        json(self)
    }
}

impl Table for NetReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["kind", "index", "value", "stderr"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        let mut push = |kind: &str, index: usize, value: f64, stderr: Option<f64>| {
            rows.push(vec![
                kind.to_string(),
                index.to_string(),
                value.to_string(),
                stderr.map(|s| s.to_string()).unwrap_or_default(),
            ]);
        };
        for (i, v) in self.initial_values.iter().enumerate() {
            push("dp_value", i + 1, *v, None);
        }
        for (n, p) in self.dp_stop_time_distribution.iter().enumerate().skip(1) {
            push("dp_stop_time", n, *p, None);
        }
        if let Some(mc) = &self.monte_carlo {
            for (i, (f, s)) in mc.detection_frequency.iter().zip(&mc.detection_stderr).enumerate() {
                push("mc_detection", i + 1, *f, Some(*s));
            }
            for (n, c) in mc.stop_time_histogram.iter().enumerate().skip(1) {
                push("mc_stop_time", n, *c as f64 / mc.reps as f64, None);
            }
        }
        rows
    }

    fn to_json(&self) -> Result<String, String> {
        json(self)
    }
}
