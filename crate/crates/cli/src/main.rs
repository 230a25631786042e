use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ssh_lindblad::experiments::EngineSettings;
use ssh_lindblad::io::{
    write_profile, write_series, write_spectrum, write_sweep, ConfigSource, RunConfig, RunManifest,
};
use ssh_lindblad::lindblad::covariance_evolve_with;
use ssh_lindblad::prelude::*;

#[derive(Parser)]
#[command(name = "ssh-lindblad", version, about = "SSH chain with balanced gain and loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues with edge and PT-breaking labels.
    Spectrum(Common),
    /// Bulk Zak phase and winding number.
    Zak {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1024)]
        k_samples: usize,
    },
    /// Time evolution from one initial state.
    Evolve(Common),
    /// Edge occupation against theta.
    Sweep(Common),
    /// Trajectories and covariance oracle against the master equation.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SSH_LINDBLAD_THREADS")]
    threads: Option<usize>,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n_sites: Option<String>,
    #[arg(long)]
    hopping: Option<String>,
    #[arg(long)]
    dimerization: Option<String>,
    /// Radians; `0.1pi` style is accepted.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    n_traj: Option<String>,
    /// auto, spectral, trajectories or master.
    #[arg(long)]
    engine: Option<String>,
    /// edge_right, edge_left, bulk, site or vacuum.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    site_index: Option<String>,
    #[arg(long)]
    theta_ref: Option<String>,
    /// Comma-separated window sizes.
    #[arg(long)]
    windows: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut src = match &self.config {
            Some(path) => ConfigSource::from_file(path)?,
            None => ConfigSource::default(),
        };
        for pair in &self.overrides {
            src.set_pair(pair)?;
        }
        let flags = [
            ("n_sites", &self.n_sites),
            ("hopping", &self.hopping),
            ("dimerization", &self.dimerization),
            ("theta", &self.theta),
            ("gamma", &self.gamma),
            ("t_end", &self.t_end),
            ("dt", &self.dt),
            ("samples", &self.samples),
            ("n_traj", &self.n_traj),
            ("engine", &self.engine),
            ("initial", &self.initial),
            ("site_index", &self.site_index),
            ("theta_ref", &self.theta_ref),
            ("windows", &self.windows),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                src.set(key, v)?;
            }
        }
        if let Some(seed) = self.seed {
            src.set("seed", &seed.to_string())?;
        }
        Ok(src.resolve()?)
    }

    fn settings(&self, cfg: &RunConfig) -> EngineSettings {
        cfg.engine_settings(self.threads)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Collects output files and writes the manifest last.
struct Run {
    command: &'static str,
    out: PathBuf,
    start: Instant,
    paths: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str, out: &Path) -> Result<Self, Error> {
        std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
        Ok(Run {
            command,
            out: out.to_path_buf(),
            start: Instant::now(),
            paths: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.paths.push(p.clone());
        p
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), Error> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))
    }

    fn finish(self, cfg: &RunConfig, engine: &str) -> Result<PathBuf, Error> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            params: cfg.params,
            grid: cfg.grid,
            engine: engine.to_string(),
            seed: cfg.seed,
            n_traj: cfg.n_traj,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            output_paths: self.paths.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = self.out.join("manifest.json");
        manifest.write(&path)?;
        Ok(path)
    }
}

fn spectrum(common: &Common) -> Result<PathBuf, Error> {
    let cfg = common.resolve()?;
    let mut run = Run::new("spectrum", &common.out)?;
    let p = &cfg.params;
    let raw = if p.gamma() > 0.0 {
        eigendecompose_general(&build_pt_hamiltonian(p).to_complex())?
    } else {
        eigendecompose_hermitian(build_ssh_hamiltonian(p).as_real().expect("real chain"))?
    };
    let report = classify_edge_states(&raw, p, &EdgeCriteria::default())?;
    let pt = pt_breaking_report(&report, 1e-8);
    let path = run.path("spectrum.csv");
    write_spectrum(&report, &path)?;
    run.write_json(
        "spectrum.json",
        &json!({
            "n_midgap": report.midgap_indices().map(|m| m.len()),
            "n_complex_pairs": pt.n_complex_pairs,
            "max_imag": pt.max_imag,
        }),
    )?;
    run.finish(&cfg, "spectral")
}

fn zak(common: &Common, k_samples: usize) -> Result<PathBuf, Error> {
    let cfg = common.resolve()?;
    cfg.require_gap("theta")?;
    let mut run = Run::new("zak", &common.out)?;
    let inv = zak_phase(&cfg.params, k_samples)?;
    run.write_json("zak.json", &json!({ "theta": cfg.params.theta(), "invariant": inv }))?;
    run.finish(&cfg, "spectral")
}

fn evolve(common: &Common) -> Result<PathBuf, Error> {
    let cfg = common.resolve()?;
    let mut run = Run::new("evolve", &common.out)?;
    let snap = run_snapshot_experiment(&cfg.initial, &cfg.params, &cfg.grid, cfg.engine, &common.settings(&cfg))?;
    write_series(&snap.series, &run.path("series.csv"))?;
    write_profile(&snap.initial_profile, &snap.final_profile, &run.path("profile.csv"))?;
    run.finish(&cfg, snap.engine.name())
}

fn sweep(common: &Common) -> Result<PathBuf, Error> {
    let cfg = common.resolve()?;
    cfg.require_gap("theta_ref")?;
    let mut run = Run::new("sweep", &common.out)?;
    let engine = cfg.engine.resolve(cfg.params.gamma());
    let result = run_theta_sweep(
        &cfg.params,
        &cfg.sweep_plan(),
        &cfg.initial,
        &cfg.grid,
        engine,
        &common.settings(&cfg),
    )?;
    let written = write_sweep(&result, &common.out.join("sweep.csv"))?;
    run.paths.extend(written);
    run.finish(&cfg, engine.name())
}

fn oracle_check(common: &Common) -> Result<PathBuf, Error> {
    let cfg = common.resolve()?;
    let mut run = Run::new("oracle-check", &common.out)?;
    let p = &cfg.params;
    let psi = prepare_initial_state(&cfg.initial, p)?;
    let model = build_truncated_lindblad(p);
    let mut opts = TrajectoryOptions::new(cfg.n_traj, cfg.seed);
    opts.threads = common.threads;
    let traj = ssh_lindblad::lindblad::run_ensemble(&psi, &model, &cfg.grid, &opts)?.series;
    let master = evolve_master_rk4(&DensityMatrix::from_pure(&psi), &model, &cfg.grid)?;
    let within = traj
        .per_site_mean
        .iter()
        .zip(master.per_site_mean.iter())
        .zip(traj.per_site_stderr.iter())
        .filter(|((a, b), se)| (*a - *b).abs() <= 3.0 * **se)
        .count();
    let fraction = within as f64 / traj.per_site_mean.len() as f64;

    let layout = ChannelLayout::standard(p.n_sites()).without_gain();
    let gainless = TruncatedLindbladModel::with_layout(p, layout)?;
    let m = evolve_master_rk4(&DensityMatrix::from_pure(&psi), &gainless, &cfg.grid)?;
    let c = covariance_evolve_with(&CovarianceMatrix::from_state(&psi), p, layout, &cfg.grid)?;
    let cov_dev = (&c.per_site_mean - &m.per_site_mean).amax();

    write_series(&master, &run.path("master_series.csv"))?;
    write_series(&traj, &run.path("trajectory_series.csv"))?;
    run.write_json(
        "oracle.json",
        &json!({
            "fraction_within_3se": fraction,
            "covariance_max_deviation": cov_dev,
            "pass": fraction >= 0.99 && cov_dev < 1e-8,
        }),
    )?;
    run.finish(&cfg, "trajectories+master+covariance")
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print().ok();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let threads = match &cli.command {
        Command::Spectrum(c) | Command::Evolve(c) | Command::Sweep(c) | Command::OracleCheck(c) => c.threads,
        Command::Zak { common, .. } => common.threads,
    };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("{}", error_line("usage", "--threads must be at least 1"));
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let result = match &cli.command {
        Command::Spectrum(c) => spectrum(c),
        Command::Zak { common, k_samples } => zak(common, *k_samples),
        Command::Evolve(c) => evolve(c),
        Command::Sweep(c) => sweep(c),
        Command::OracleCheck(c) => oracle_check(c),
    };
    match result {
        Ok(manifest) => {
            println!("{}", json!({ "manifest": manifest.display().to_string() }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
