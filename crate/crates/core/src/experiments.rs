//! Drivers for the snapshot and Θ-sweep studies: initial-state preparation,
//! engine dispatch, time averaging and kink location.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{
    evolve_closed_spectral, evolve_master_taylor, run_ensemble, DensityMatrix, FockState, TimeGrid,
    TrajectoryOptions,
};
use crate::model::{build_ssh_hamiltonian, ChannelLayout, ModelParams, TruncatedLindbladModel};
use crate::observables::{edge_occupation, time_average, OccupationSeries, Side, TimeAveragedProfile};
use crate::spectral::{classify_edge_states, eigendecompose_hermitian, EdgeCriteria};
use crate::{Error, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("no midgap pair at theta_ref = {theta_ref} (found {found} midgap states); edge states need a reference angle in the nontrivial phase")]
    NoMidgapPair { theta_ref: f64, found: usize },
    #[error("bulk_index {index} is invalid: {reason}")]
    BulkIndex { index: usize, reason: &'static str },
    #[error("initial kind 'site' needs site_index in 1..={n_sites}")]
    SiteIndex { n_sites: usize },
    #[error("the spectral engine needs gamma = 0, got {gamma}")]
    EngineMismatch { gamma: f64 },
    #[error("theta grid must be non-empty and strictly increasing")]
    ThetaGrid,
    #[error("edge window {window} outside 1..={max}")]
    Window { window: usize, max: usize },
    #[error("at least one edge window is required")]
    NoWindows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    EdgeRight,
    EdgeLeft,
    Bulk,
    Site,
    Vacuum,
}

/// Which state to start from and where its eigenbasis is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub kind: InitialKind,
    /// 0-based index into the ascending Θ_ref spectrum.
    pub bulk_index: Option<usize>,
    /// 1-based site for [`InitialKind::Site`].
    pub site_index: Option<usize>,
    pub theta_ref: f64,
    /// Seed of the draw used when `bulk_index` is absent.
    pub bulk_seed: u64,
}

impl InitialStateSpec {
    pub fn new(kind: InitialKind) -> Self {
        InitialStateSpec {
            kind,
            bulk_index: None,
            site_index: None,
            theta_ref: 0.1 * PI,
            bulk_seed: 42,
        }
    }

    pub fn edge_right() -> Self {
        Self::new(InitialKind::EdgeRight)
    }

    pub fn edge_left() -> Self {
        Self::new(InitialKind::EdgeLeft)
    }

    pub fn bulk() -> Self {
        Self::new(InitialKind::Bulk)
    }

    pub fn site(site: usize) -> Self {
        InitialStateSpec {
            site_index: Some(site),
            ..Self::new(InitialKind::Site)
        }
    }

    pub fn vacuum() -> Self {
        Self::new(InitialKind::Vacuum)
    }
}

/// Top eigenvector of the 2×2 Gram matrix of `proj` in the span of `a`, `b`.
fn localized_combination(a: &[f64], b: &[f64], proj: std::ops::Range<usize>) -> Vec<f64> {
    let dot = |x: &[f64], y: &[f64]| -> f64 { proj.clone().map(|i| x[i] * y[i]).sum() };
    let m = Matrix2::new(dot(a, a), dot(a, b), dot(b, a), dot(b, b));
    let eig = SymmetricEigen::new(m);
    let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let (ca, cb) = (eig.eigenvectors[(0, top)], eig.eigenvectors[(1, top)]);
    let mut v: Vec<f64> = a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // fix the overall sign by the largest component
    let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let s = pivot.signum() / norm;
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Builds the initial state described by `spec` for a chain of `params`.
///
/// Edge states are the combinations of the two midgap eigenvectors at
/// Θ_ref with the largest weight on the right (left) half of the chain.
pub fn prepare_initial_state(spec: &InitialStateSpec, params: &ModelParams) -> Result<FockState, Error> {
    let n = params.n_sites();
    match spec.kind {
        InitialKind::Vacuum => return Ok(FockState::vacuum(n)),
        InitialKind::Site => {
            let site = spec.site_index.filter(|&s| (1..=n).contains(&s));
            let site = site.ok_or(ExperimentError::SiteIndex { n_sites: n })?;
            return Ok(FockState::site(n, site)?);
        }
        _ => {}
    }

    let reference = params.with_theta(spec.theta_ref)?;
    let h = build_ssh_hamiltonian(&reference);
    let report = eigendecompose_hermitian(h.as_real().expect("hermitian flavor"))?;
    let report = classify_edge_states(&report, &reference, &EdgeCriteria::default())?;
    let midgap = report.midgap_indices().unwrap_or_default();
    let column = |k: usize| -> Vec<f64> { report.eigenvectors.column(k).iter().map(|z| z.re).collect() };

    let sites: Vec<f64> = match spec.kind {
        InitialKind::EdgeRight | InitialKind::EdgeLeft => {
            if midgap.len() != 2 {
                return Err(ExperimentError::NoMidgapPair {
                    theta_ref: spec.theta_ref,
                    found: midgap.len(),
                }
                .into());
            }
            let half = if spec.kind == InitialKind::EdgeRight {
                n / 2..n
            } else {
                0..n / 2
            };
            localized_combination(&column(midgap[0]), &column(midgap[1]), half)
        }
        InitialKind::Bulk => {
            let index = match spec.bulk_index {
                Some(k) if k >= n => {
                    return Err(ExperimentError::BulkIndex {
                        index: k,
                        reason: "beyond the spectrum",
                    }
                    .into())
                }
                Some(k) if midgap.contains(&k) => {
                    return Err(ExperimentError::BulkIndex {
                        index: k,
                        reason: "names a midgap state",
                    }
                    .into())
                }
                Some(k) => k,
                None => {
                    let bulk: Vec<usize> = (0..n).filter(|k| !midgap.contains(k)).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.bulk_seed);
                    bulk[rng.random_range(0..bulk.len())]
                }
            };
            column(index)
        }
        InitialKind::Site | InitialKind::Vacuum => unreachable!(),
    };
    let amplitudes: Vec<C64> = sites.iter().map(|&x| C64::new(x, 0.0)).collect();
    Ok(FockState::from_single_particle(&amplitudes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Spectral when γ = 0, trajectories otherwise.
    Auto,
    Spectral,
    Trajectories,
    Master,
}

impl Engine {
    pub fn resolve(self, gamma: f64) -> Engine {
        match self {
            Engine::Auto if gamma == 0.0 => Engine::Spectral,
            Engine::Auto => Engine::Trajectories,
            e => e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Auto => "auto",
            Engine::Spectral => "spectral",
            Engine::Trajectories => "trajectories",
            Engine::Master => "master",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Engine::Auto),
            "spectral" => Ok(Engine::Spectral),
            "trajectories" => Ok(Engine::Trajectories),
            "master" => Ok(Engine::Master),
            other => Err(format!(
                "unknown engine '{other}', expected one of auto, spectral, trajectories, master"
            )),
        }
    }
}

/// Knobs shared by the open-system engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineSettings {
    pub trajectories: TrajectoryOptions,
    /// Channel placement; `None` means loss at 1 and gain at N.
    pub layout: Option<ChannelLayout>,
    /// Taylor order of the master-equation step; 4 is RK4.
    pub master_order: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            trajectories: TrajectoryOptions::default(),
            layout: None,
            master_order: 8,
        }
    }
}

impl EngineSettings {
    pub fn with_trajectories(n_traj: usize, seed: u64) -> Self {
        EngineSettings {
            trajectories: TrajectoryOptions::new(n_traj, seed),
            ..Self::default()
        }
    }
}

/// Evolves `psi0` with the chosen engine.
pub fn evolve_state(
    psi0: &FockState,
    params: &ModelParams,
    grid: &TimeGrid,
    engine: Engine,
    settings: &EngineSettings,
) -> Result<OccupationSeries, Error> {
    let layout = settings
        .layout
        .unwrap_or_else(|| ChannelLayout::standard(params.n_sites()));
    match engine.resolve(params.gamma()) {
        Engine::Spectral => {
            if params.gamma() != 0.0 {
                return Err(ExperimentError::EngineMismatch {
                    gamma: params.gamma(),
                }
                .into());
            }
            Ok(evolve_closed_spectral(psi0, params, grid)?)
        }
        Engine::Trajectories => {
            let model = TruncatedLindbladModel::with_layout(params, layout)?;
            Ok(run_ensemble(psi0, &model, grid, &settings.trajectories)?.series)
        }
        Engine::Master => {
            let model = TruncatedLindbladModel::with_layout(params, layout)?;
            let rho0 = DensityMatrix::from_pure(psi0);
            Ok(evolve_master_taylor(&rho0, &model, grid, settings.master_order)?)
        }
        Engine::Auto => unreachable!("resolved above"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotResult {
    pub engine: Engine,
    /// |ψ₀|² on sites 1…N.
    pub initial_profile: Vec<f64>,
    pub final_profile: TimeAveragedProfile,
    pub series: OccupationSeries,
}

pub fn run_snapshot_experiment(
    spec: &InitialStateSpec,
    params: &ModelParams,
    grid: &TimeGrid,
    engine: Engine,
    settings: &EngineSettings,
) -> Result<SnapshotResult, Error> {
    let psi0 = prepare_initial_state(spec, params)?;
    let series = evolve_state(&psi0, params, grid, engine, settings)?;
    Ok(SnapshotResult {
        engine: engine.resolve(params.gamma()),
        initial_profile: psi0.site_weights(),
        final_profile: time_average(&series),
        series,
    })
}

/// Θ values and edge windows of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub thetas: Vec<f64>,
    pub windows: Vec<usize>,
    pub side: Side,
    /// Re-prepare the initial state at each Θ instead of once at Θ_ref.
    pub recompute_initial: bool,
}

impl SweepPlan {
    pub fn new(thetas: Vec<f64>, windows: Vec<usize>) -> Self {
        SweepPlan {
            thetas,
            windows,
            side: Side::Right,
            recompute_initial: false,
        }
    }

    /// `points` uniformly spaced values on [lo, hi].
    pub fn uniform_thetas(points: usize, lo: f64, hi: f64) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..points)
                .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                .collect(),
        }
    }

    /// 41 points on [0.05π, 0.95π].
    pub fn default_thetas() -> Vec<f64> {
        Self::uniform_thetas(41, 0.05 * PI, 0.95 * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    /// One entry per window, in [`SweepResult::windows`] order.
    pub edge_occ: Vec<f64>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub windows: Vec<usize>,
    pub side: Side,
    /// Θ of the largest second difference of the window-averaged curve.
    pub kink_estimate: Option<f64>,
    pub kink_by_window: Vec<Option<f64>>,
    /// Largest second difference per window.
    pub curvature_by_window: Vec<Option<f64>>,
}

impl SweepResult {
    pub fn thetas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.theta).collect()
    }

    /// Edge occupation curve for window position `w`.
    pub fn curve(&self, w: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.edge_occ[w]).collect()
    }
}

/// Second-derivative estimates at interior points of a possibly
/// non-uniform grid.
pub fn second_differences(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    (1..x.len().saturating_sub(1))
        .map(|i| {
            let hl = x[i] - x[i - 1];
            let hr = x[i + 1] - x[i];
            2.0 * ((y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl) / (hl + hr)
        })
        .collect()
}

/// Location and value of the largest second difference; `None` below three
/// points.
pub fn locate_kink(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    second_differences(x, y)
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, d)| (x[i + 1], d))
}

/// Evolves a fixed initial state at every Θ of the plan and records the
/// time-averaged edge occupation for each window.
pub fn run_theta_sweep(
    template: &ModelParams,
    plan: &SweepPlan,
    spec: &InitialStateSpec,
    grid: &TimeGrid,
    engine: Engine,
    settings: &EngineSettings,
) -> Result<SweepResult, Error> {
    let n = template.n_sites();
    if plan.thetas.is_empty() || plan.thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::ThetaGrid.into());
    }
    if plan.windows.is_empty() {
        return Err(ExperimentError::NoWindows.into());
    }
    if let Some(&window) = plan.windows.iter().find(|&&a| a == 0 || a > n / 2) {
        return Err(ExperimentError::Window { window, max: n / 2 }.into());
    }
    let fixed = if plan.recompute_initial {
        None
    } else {
        Some(prepare_initial_state(spec, template)?)
    };

    let rows: Vec<SweepRow> = plan
        .thetas
        .par_iter()
        .map(|&theta| -> Result<SweepRow, Error> {
            let start = Instant::now();
            let params = template.with_theta(theta)?;
            let psi0 = match &fixed {
                Some(psi) => psi.clone(),
                None => prepare_initial_state(&InitialStateSpec { theta_ref: theta, ..*spec }, &params)?,
            };
            let series = evolve_state(&psi0, &params, grid, engine, settings)?;
            let profile = time_average(&series);
            let edge_occ = plan
                .windows
                .iter()
                .map(|&a| edge_occupation(&profile, a, plan.side))
                .collect();
            Ok(SweepRow {
                theta,
                edge_occ,
                runtime_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_, _>>()?;

    let thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    let per_window: Vec<Option<(f64, f64)>> = (0..plan.windows.len())
        .map(|w| {
            let y: Vec<f64> = rows.iter().map(|r| r.edge_occ[w]).collect();
            locate_kink(&thetas, &y)
        })
        .collect();
    let mean: Vec<f64> = rows
        .iter()
        .map(|r| r.edge_occ.iter().sum::<f64>() / r.edge_occ.len() as f64)
        .collect();

    Ok(SweepResult {
        kink_estimate: locate_kink(&thetas, &mean).map(|k| k.0),
        kink_by_window: per_window.iter().map(|k| k.map(|k| k.0)).collect(),
        curvature_by_window: per_window.iter().map(|k| k.map(|k| k.1)).collect(),
        rows,
        windows: plan.windows.clone(),
        side: plan.side,
    })
}

/// Fraction of the state's weight on the sites in `range` (0-based).
pub fn weight_in(psi: &FockState, range: std::ops::Range<usize>) -> f64 {
    psi.site_weights()[range].iter().sum()
}
