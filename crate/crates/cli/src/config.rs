//! TOML configuration and its translation into solver inputs.
//!
//! Every validation failure carries the `section.key` it came from so the
//! user can find the offending line.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use stopgame::disorder::DisorderModel;
use stopgame::dynkin::PayoffTriple;
use stopgame::markov::MarkovChain;
use stopgame::simple_game::{Coalition, SimpleGame};
use stopgame::voting_game::{GameSpec, Horizon};

#[derive(Debug, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub chain: Option<ChainSection>,
    pub game: Option<GameSection>,
    #[serde(default)]
    pub solver: SolverSection,
    pub dynkin: Option<DynkinSection>,
    pub disorder: Option<DisorderSection>,
    pub net: Option<NetSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub states: Option<Vec<String>>,
    pub transition: Vec<Vec<f64>>,
}

/// A horizon written as a positive integer or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonValue {
    Finite(usize),
    Infinite,
}

impl HorizonValue {
    pub fn parse(text: &str) -> Result<Self, String> {
        match text.trim() {
            "inf" | "infinite" => Ok(Self::Infinite),
            t => t
                .parse()
                .map(Self::Finite)
                .map_err(|_| format!("expected a non-negative integer or \"inf\", got {t:?}")),
        }
    }

    pub fn into_horizon(self) -> Horizon {
        match self {
            Self::Finite(n) => Horizon::Finite(n),
            Self::Infinite => Horizon::Infinite,
        }
    }
}

impl<'de> Deserialize<'de> for HorizonValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) if n >= 0 => Ok(Self::Finite(n as usize)),
            Raw::Int(n) => Err(serde::de::Error::custom(format!("horizon must be non-negative, got {n}"))),
            Raw::Text(t) => Self::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// A state or symbol referenced by label or by 0-based index.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Label(String),
}

impl StateRef {
    fn resolve(&self, labels: &[String], key: &str) -> Result<usize, ConfigError> {
        match self {
            Self::Index(i) if *i < labels.len() => Ok(*i),
            Self::Index(i) => Err(ConfigError::new(key, format!("index {i} out of range 0..{}", labels.len()))),
            Self::Label(l) => labels
                .iter()
                .position(|s| s == l)
                .ok_or_else(|| ConfigError::new(key, format!("unknown label {l:?}"))),
        }
    }
}

/// How a simple game is written: a majority level or a coalition list.
#[derive(Debug, Default)]
pub struct RuleFields {
    pub majority: Option<usize>,
    pub winning: Option<Vec<Vec<usize>>>,
    /// `"minimal"` (default): `winning` lists minimal winning coalitions.
    /// `"exact"`: `winning` is the whole winning family.
    pub closure: Option<String>,
}

impl RuleFields {
    pub fn build(&self, players: usize, section: &str) -> Result<SimpleGame, ConfigError> {
        match (self.majority, &self.winning) {
            (Some(_), Some(_)) => Err(ConfigError::new(
                format!("{section}.winning"),
                "give either `majority` or `winning`, not both",
            )),
            (None, None) => Err(ConfigError::new(format!("{section}.majority"), "missing; give `majority` or `winning`")),
            (Some(r), None) => {
                SimpleGame::majority(players, r).map_err(|e| ConfigError::new(format!("{section}.majority"), e))
            }
            (None, Some(list)) => {
                let key = format!("{section}.winning");
                let mut coalitions = Vec::with_capacity(list.len());
                for members in list {
                    if let Some(&bad) = members.iter().find(|&&m| m == 0 || m > players) {
                        return Err(ConfigError::new(
                            &key,
                            format!("player {bad} outside 1..={players}"),
                        ));
                    }
                    coalitions.push(Coalition::from_members(members.iter().map(|m| m - 1)));
                }
                let result = match self.closure.as_deref().unwrap_or("minimal") {
                    "minimal" => SimpleGame::from_minimal(players, coalitions),
                    "exact" => SimpleGame::validate(players, coalitions),
                    other => {
                        return Err(ConfigError::new(
                            format!("{section}.closure"),
                            format!("expected \"minimal\" or \"exact\", got {other:?}"),
                        ))
                    }
                };
                result.map_err(|e| ConfigError::new(key, e))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub majority: Option<usize>,
    pub winning: Option<Vec<Vec<usize>>>,
    pub closure: Option<String>,
    pub utilities: Vec<Vec<f64>>,
    pub horizon: Option<HorizonValue>,
    pub initial_state: Option<StateRef>,
}

/// Value-iteration tolerance used when neither `--tol` nor `solver.tol` is set.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Deviation gain accepted by `verify` by default.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: default_max_iter(),
        }
    }
}

fn default_max_iter() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynkinSection {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub alphabet: Vec<String>,
    pub f0: Vec<Vec<f64>>,
    pub f1: Vec<Vec<f64>>,
    pub q: f64,
    #[serde(default)]
    pub d: usize,
    pub x0: Option<StateRef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub alphabet: Vec<String>,
    pub f0: Vec<Vec<f64>>,
    pub f1: Vec<Vec<f64>>,
    pub q: f64,
    #[serde(default)]
    pub d: usize,
    pub x0: Option<StateRef>,
    pub grid: usize,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub mc_reps: usize,
    pub seed: Option<u64>,
    /// Extra posterior-threshold rules to evaluate alongside the DP policy.
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub majority: Option<usize>,
    pub winning: Option<Vec<Vec<usize>>>,
    pub closure: Option<String>,
    pub grid: usize,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub mc_reps: usize,
    pub seed: Option<u64>,
    pub sensors: Vec<SensorSection>,
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let span = e.span();
        let key = match span {
            Some(s) => locate_key(text, s.start),
            None => "config".to_string(),
        };
        ConfigError::new(key, e.message())
    })
}

/// Best-effort `section.key` for a byte offset into the TOML text.
fn locate_key(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        if pos > offset {
            break;
        }
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("[[").and_then(|t| t.strip_suffix("]]")) {
            section = name.trim().to_string();
            key.clear();
        } else if let Some(name) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            section = name.trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            if !trimmed.starts_with('#') {
                key = k.trim().to_string();
            }
        }
        pos += line.len() + 1;
    }
    match (section.is_empty(), key.is_empty()) {
        (true, true) => "config".into(),
        (true, false) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    section
        .as_ref()
        .ok_or_else(|| ConfigError::new(name, "section is required for this command"))
}

impl Config {
    pub fn chain(&self) -> Result<MarkovChain, ConfigError> {
        let c = require(&self.chain, "chain")?;
        let states = c.transition.len();
        let labels = match &c.states {
            Some(l) if l.len() != states => {
                return Err(ConfigError::new(
                    "chain.states",
                    format!("{} labels for a {states}-row transition matrix", l.len()),
                ))
            }
            Some(l) => l.clone(),
            None => (1..=states).map(|i| format!("s{i}")).collect(),
        };
        MarkovChain::new(labels, &c.transition).map_err(|e| ConfigError::new("chain.transition", e))
    }

    /// The voting game, with `horizon` overriding `game.horizon` when set.
    pub fn game_spec(&self, horizon: Option<HorizonValue>) -> Result<(GameSpec, usize), ConfigError> {
        let chain = self.chain()?;
        let g = require(&self.game, "game")?;
        let players = g.utilities.len();
        if players == 0 {
            return Err(ConfigError::new("game.utilities", "need one utility row per player"));
        }
        for (i, u) in g.utilities.iter().enumerate() {
            if u.len() != chain.len() {
                return Err(ConfigError::new(
                    "game.utilities",
                    format!("row {} has {} values, chain has {} states", i + 1, u.len(), chain.len()),
                ));
            }
        }
        let rule = RuleFields {
            majority: g.majority,
            winning: g.winning.clone(),
            closure: g.closure.clone(),
        };
        let game = rule.build(players, "game")?;
        let horizon = horizon
            .or(g.horizon)
            .ok_or_else(|| ConfigError::new("game.horizon", "missing; set it in the config or pass --horizon"))?;
        let x0 = match &g.initial_state {
            Some(r) => r.resolve(chain.labels(), "game.initial_state")?,
            None => 0,
        };
        let utilities = g.utilities.iter().map(|u| u.clone().into()).collect();
        let spec = GameSpec::new(chain, utilities, game, horizon.into_horizon())
            .map_err(|e| ConfigError::new("game.utilities", e))?;
        Ok((spec, x0))
    }

    pub fn dynkin(&self, horizon: Option<usize>) -> Result<(MarkovChain, PayoffTriple, usize), ConfigError> {
        let chain = self.chain()?;
        let d = require(&self.dynkin, "dynkin")?;
        for (name, v) in [("x", &d.x), ("w", &d.w), ("y", &d.y)] {
            if v.len() != chain.len() {
                return Err(ConfigError::new(
                    format!("dynkin.{name}"),
                    format!("{} values, chain has {} states", v.len(), chain.len()),
                ));
            }
        }
        let triple = PayoffTriple::new(d.x.clone().into(), d.w.clone().into(), d.y.clone().into())
            .map_err(|e| ConfigError::new("dynkin", e))?;
        let horizon = horizon
            .or(d.horizon)
            .ok_or_else(|| ConfigError::new("dynkin.horizon", "missing; set it in the config or pass --horizon"))?;
        Ok((chain, triple, horizon))
    }

    pub fn disorder(&self) -> Result<(&DisorderSection, DisorderModel), ConfigError> {
        let d = require(&self.disorder, "disorder")?;
        let model = sensor_model(&d.alphabet, &d.f0, &d.f1, d.q, d.d, d.x0.as_ref(), "disorder")?;
        for (k, t) in d.thresholds.iter().enumerate() {
            if !(0.0..=1.0).contains(t) {
                return Err(ConfigError::new("disorder.thresholds", format!("entry {} = {t} is not a probability", k + 1)));
            }
        }
        Ok((d, model))
    }

    pub fn net(&self) -> Result<(&NetSection, Vec<DisorderModel>, SimpleGame), ConfigError> {
        let n = require(&self.net, "net")?;
        if n.sensors.is_empty() {
            return Err(ConfigError::new("net.sensors", "at least one [[net.sensors]] table is required"));
        }
        let models = n
            .sensors
            .iter()
            .enumerate()
            .map(|(i, s)| sensor_model(&s.alphabet, &s.f0, &s.f1, s.q, s.d, s.x0.as_ref(), &format!("net.sensors[{}]", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let rule = RuleFields {
            majority: n.majority,
            winning: n.winning.clone(),
            closure: n.closure.clone(),
        };
        let fusion = rule.build(models.len(), "net")?;
        Ok((n, models, fusion))
    }
}

fn sensor_model(
    alphabet: &[String],
    f0: &[Vec<f64>],
    f1: &[Vec<f64>],
    q: f64,
    d: usize,
    x0: Option<&StateRef>,
    section: &str,
) -> Result<DisorderModel, ConfigError> {
    use stopgame::disorder::DisorderError;
    let mut seen = BTreeMap::new();
    for (i, a) in alphabet.iter().enumerate() {
        if let Some(j) = seen.insert(a.as_str(), i) {
            return Err(ConfigError::new(
                format!("{section}.alphabet"),
                format!("symbol {a:?} appears at positions {} and {}", j + 1, i + 1),
            ));
        }
    }
    let x0 = match x0 {
        Some(r) => r.resolve(alphabet, &format!("{section}.x0"))?,
        None => 0,
    };
    DisorderModel::new(alphabet.to_vec(), f0, f1, q, d, x0).map_err(|e| {
        let key = match &e {
            DisorderError::Kernel { which: "pre-change", .. } => "f0",
            DisorderError::Kernel { .. } => "f1",
            DisorderError::Hazard(_) => "q",
            DisorderError::InitialObservation(_) => "x0",
            _ => "alphabet",
        };
        ConfigError::new(format!("{section}.{key}"), e)
    })
}
