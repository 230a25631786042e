use std::f64::consts::PI;

use ssh_lindblad::experiments::SweepPlan;
use ssh_lindblad::io::{write_series, write_sweep, ConfigError, ConfigSource, RunManifest};
use ssh_lindblad::prelude::*;

#[test]
fn empty_config_gives_the_reference_setup() {
    let cfg = ConfigSource::parse_str("").unwrap().resolve().unwrap();
    let p = cfg.params;
    assert_eq!(p.n_sites(), 200);
    assert_eq!(p.hopping(), 1.0);
    assert_eq!(p.dimerization(), 0.3);
    assert_eq!(p.gamma(), 0.1);
    assert_eq!(cfg.grid.t_end(), 25000.0);
}

#[test]
fn later_values_override_the_file() {
    let mut src = ConfigSource::parse_str("gamma = 0.1\nn_sites = 20\n").unwrap();
    src.set("gamma", "0.0").unwrap();
    assert_eq!(src.resolve().unwrap().params.gamma(), 0.0);
}

#[test]
fn invalid_values_name_the_key() {
    let err = ConfigSource::parse_str("n_sites = 7").unwrap().resolve().unwrap_err();
    assert!(matches!(err, ConfigError::Range { key: "n_sites", .. }));
    let err = ConfigSource::parse_str("colour = red").unwrap_err();
    assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }));
}

#[test]
fn gap_closing_angle_is_rejected() {
    let cfg = ConfigSource::parse_str("theta = 1.5707963").unwrap().resolve().unwrap();
    let err = cfg.require_gap("theta").unwrap_err();
    assert!(matches!(err, ConfigError::GapClosed { .. }));
    assert!(err.to_string().contains("pi/2"));
}

#[test]
fn manifest_round_trips_exactly() {
    let m = RunManifest {
        command: "evolve".into(),
        params: ModelParams::new(6, 1.0, 0.3, 0.1 * PI, 0.1).unwrap(),
        grid: TimeGrid::new(100.0, 0.05, 200).unwrap(),
        engine: "trajectories".into(),
        seed: u64::MAX,
        n_traj: 5000,
        code_version: "0.1.0".into(),
        wall_time_s: 0.1 + 0.2,
        output_paths: vec!["a/series.csv".into(), "a/profile.csv".into()],
    };
    assert_eq!(RunManifest::from_json(&m.to_json().unwrap()).unwrap(), m);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.write(&path).unwrap();
    assert_eq!(RunManifest::read(&path).unwrap(), m);
}

#[test]
fn vacuum_run_writes_zero_occupations() {
    let p = ModelParams::new(4, 1.0, 0.3, 0.1 * PI, 0.0).unwrap();
    let grid = TimeGrid::new(1.0, 0.05, 2).unwrap();
    let model = build_truncated_lindblad(&p);
    let series = evolve_master_rk4(&DensityMatrix::vacuum(4), &model, &grid).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    write_series(&series, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3 * 4);
    assert_eq!(rows[0], "0.0,1,0.0,0.0,1.0");
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("0.0")));
}

#[test]
fn seeded_trajectory_files_are_byte_identical() {
    let p = ModelParams::new(6, 1.0, 0.3, 0.1 * PI, 0.1).unwrap();
    let grid = TimeGrid::new(20.0, 0.05, 40).unwrap();
    let psi = FockState::site(6, 1).unwrap();
    let model = build_truncated_lindblad(&p);
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let series = sample_trajectories(&psi, &model, &grid, 200, 5).unwrap();
        let path = dir.path().join(format!("run{k}.csv"));
        write_series(&series, &path).unwrap();
        texts.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

fn small_sweep(thetas: Vec<f64>) -> SweepResult {
    let p = ModelParams::new(12, 1.0, 0.3, 0.1 * PI, 0.0).unwrap();
    let grid = TimeGrid::new(20.0, 0.05, 20).unwrap();
    let plan = SweepPlan::new(thetas, vec![1, 3]);
    run_theta_sweep(
        &p,
        &plan,
        &InitialStateSpec::edge_right(),
        &grid,
        Engine::Spectral,
        &EngineSettings::default(),
    )
    .unwrap()
}

#[test]
fn single_angle_sweep_has_null_kink() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_sweep(&small_sweep(vec![0.2 * PI]), &dir.path().join("sweep.csv")).unwrap();
    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert!(json["kink_estimate"].is_null());
}

#[test]
fn default_grid_sweep_has_one_row_per_angle_and_window() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_sweep(&small_sweep(SweepPlan::default_thetas()), &dir.path().join("sweep.csv")).unwrap();
    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(csv.lines().count(), 1 + 41 * 2);
    assert_eq!(csv.lines().next(), Some("theta,window,edge_occ"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert!(json["kink_estimate"].is_f64());
}
