use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stopgame::sensor_net::NetReport;
use stopgame_cli::report::{DetectReport, DynkinReport, GameReport, VerifyReport};
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stopgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stopgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_NET: &str = r#"
[net]
winning = [[1], [2, 3]]
grid = 4
horizon = 6
mc_reps = 2000
seed = 5

[[net.sensors]]
alphabet = ["lo", "hi"]
f0 = [[0.8, 0.2], [0.6, 0.4]]
f1 = [[0.3, 0.7], [0.2, 0.8]]
q = 0.2
d = 1

[[net.sensors]]
alphabet = ["lo", "hi"]
f0 = [[0.9, 0.1], [0.7, 0.3]]
f1 = [[0.4, 0.6], [0.3, 0.7]]
q = 0.25

[[net.sensors]]
alphabet = ["a", "b", "c"]
f0 = [[0.6, 0.3, 0.1], [0.5, 0.3, 0.2], [0.4, 0.4, 0.2]]
f1 = [[0.1, 0.3, 0.6], [0.1, 0.2, 0.7], [0.2, 0.2, 0.6]]
q = 0.15
x0 = "b"
"#;

const SMALL_DETECT: &str = r#"
[disorder]
alphabet = ["0", "1"]
f0 = [[0.9, 0.1], [0.9, 0.1]]
f1 = [[0.1, 0.9], [0.1, 0.9]]
q = 0.2
d = 1
grid = 6
horizon = 10
mc_reps = 3000
thresholds = [0.6]
"#;

#[test]
fn solve_game_writes_one_row_per_player_stage_and_state() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v.csv");
    let res = stopgame(&["solve-game", "--config", &config("majority3.toml"), "--horizon", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("player,steps_to_go,state,value,stops"));
    assert_eq!(lines.count(), 3 * 6 * 4);
}

#[test]
fn csv_values_round_trip_to_the_json_values() {
    let cfg = config("majority3.toml");
    let csv = stopgame(&["solve-game", "--config", &cfg]);
    let json = stopgame(&["solve-game", "--config", &cfg, "--format", "json"]);
    let report: GameReport = serde_json::from_slice(&json.stdout).unwrap();
    let text = String::from_utf8(csv.stdout).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let player: usize = f[0].parse().unwrap();
        let k: usize = f[1].parse().unwrap();
        let x = report.labels.iter().position(|l| l == f[2]).unwrap();
        let value: f64 = f[3].parse().unwrap();
        assert_eq!(value.to_bits(), report.values[player - 1][k][x].to_bits());
        assert_eq!(f[4] == "1", report.stops[player - 1][k][x]);
    }
}

#[test]
fn non_monotone_family_is_rejected_with_the_witness_pair() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(configs().join("majority3.toml"))
        .unwrap()
        .replace("majority = 2", "winning = [[1], [1, 2, 3]]\nclosure = \"exact\"");
    fs::write(&path, text).unwrap();
    let res = stopgame(&["solve-game", "--config", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr(&res);
    assert!(err.contains("game.winning"), "{err}");
    assert!(err.contains("{1} is winning but its superset {1,2} is losing"), "{err}");
}

#[test]
fn cycling_instance_exits_2_with_residual_history() {
    let res = stopgame(&["solve-game", "--config", &config("cycling.toml"), "--horizon", "inf", "--tol", "1e-10"]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr(&res);
    assert!(err.contains("did not converge in 50 iterations"), "{err}");
    let history: Vec<f64> = err
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(_, r)| r.parse().unwrap())
        .collect();
    assert_eq!(history, vec![1.0; 50]);
    assert!(res.stdout.is_empty());
}

#[test]
fn infinite_horizon_converges_on_a_positive_chain() {
    let res = stopgame(&["solve-game", "--config", &config("majority3.toml"), "--horizon", "inf", "--format", "json"]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let report: GameReport = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report.horizon, None);
    assert!(report.residual.unwrap() < 1e-10);
    let csv = stopgame(&["solve-game", "--config", &config("majority3.toml"), "--horizon", "inf"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 1 + 3 * 4);
}

#[test]
fn verify_reports_zero_gain_and_fails_on_an_impossible_tolerance() {
    let cfg = config("majority3.toml");
    let res = stopgame(&["verify", "--config", &cfg, "--format", "json"]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let report: VerifyReport = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report.rows.len(), 3 * 4);
    assert!(report.max_gap <= 1e-9);
    let res = stopgame(&["verify", "--config", &cfg, "--tol=-1"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("exceeds tolerance"));
    let res = stopgame(&["verify", "--config", &config("cycling.toml")]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn dynkin_report() {
    let cfg = config("dynkin.toml");
    let res = stopgame(&["solve-dynkin", "--config", &cfg, "--format", "json"]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let report: DynkinReport = serde_json::from_slice(&res.stdout).unwrap();
    assert!(report.ordered);
    assert_eq!(report.value.len(), 5);
    assert!(report.pure.iter().flatten().all(|&p| p));
    let csv = stopgame(&["solve-dynkin", "--config", &cfg, "--horizon", "2"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("steps_to_go,state,value,p1_stop_prob,p2_stop_prob"));
    assert_eq!(text.lines().count(), 1 + 3 * 3);
}

#[test]
fn missing_section_names_it() {
    let res = stopgame(&["solve-dynkin", "--config", &config("majority3.toml")]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("dynkin: section is required"), "{}", stderr(&res));
}

#[test]
fn usage_errors_exit_1() {
    let res = stopgame(&["solve-game"]);
    assert_eq!(res.status.code(), Some(1));
    let res = stopgame(&["detect", "--config", &config("detect.toml"), "--horizon", "inf"]);
    assert_eq!(res.status.code(), Some(1));
    let res = stopgame(&["solve-game", "--config", "/nonexistent/config.toml"]);
    assert_eq!(res.status.code(), Some(1));
    for sub in ["solve-game", "verify", "solve-dynkin", "detect", "simulate-net"] {
        let res = stopgame(&[sub, "--help"]);
        assert_eq!(res.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&res.stdout).contains("--config"));
    }
}

#[test]
fn detect_is_byte_identical_per_seed_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("detect.toml");
    fs::write(&cfg, SMALL_DETECT).unwrap();
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str, name: &str, format: &str| {
        let out = dir.path().join(name);
        let res = stopgame(&["detect", "--config", cfg, "--seed", seed, "--format", format, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        fs::read(out).unwrap()
    };
    let a = run("1", "a.csv", "csv");
    assert_eq!(a, run("1", "b.csv", "csv"));
    assert_ne!(a, run("2", "c.csv", "csv"));
    let json = run("1", "a.json", "json");
    let report: DetectReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.rows[0].policy, "dp");
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", String::from_utf8(json).unwrap());
}

#[test]
fn net_is_byte_identical_per_seed_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("net.toml");
    fs::write(&cfg, SMALL_NET).unwrap();
    let cfg = cfg.to_str().unwrap();
    let run = |format: &str| {
        let res = stopgame(&["simulate-net", "--config", cfg, "--format", format]);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        res.stdout
    };
    assert_eq!(run("csv"), run("csv"));
    let json = run("json");
    assert_eq!(json, run("json"));
    let report: NetReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(report.sensors, 3);
    let mc = report.monte_carlo.unwrap();
    assert_eq!(mc.reps, 2000);
    assert_eq!(mc.seed, 5);
    assert_eq!(mc.stop_time_histogram.iter().sum::<u64>(), 2000);
}

#[test]
fn bad_sensor_kernel_names_the_sensor() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("net.toml");
    fs::write(&cfg, SMALL_NET.replace("q = 0.25", "q = 1.5")).unwrap();
    let res = stopgame(&["simulate-net", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("net.sensors[2].q"), "{}", stderr(&res));
}
