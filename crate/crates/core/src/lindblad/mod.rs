//! Time evolution on the truncated {vacuum} ⊕ {single particle} space, plus a
//! full-Fock-space covariance-matrix integrator for cross-checks.

mod closed;
mod covariance;
mod master;
mod trajectories;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

pub use closed::{evolve_closed_matrix, evolve_closed_spectral};
pub use covariance::{covariance_evolve, covariance_evolve_with};
pub use master::{evolve_master_observed, evolve_master_rk4, evolve_master_taylor, lindblad_rhs};
pub use trajectories::{run_ensemble, sample_trajectories, Ensemble, NoJumpPropagator, TrajectoryOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("the spectral engine needs gamma = 0, got {gamma}; use an open-system engine")]
    OpenSystem { gamma: f64 },
    #[error("initial state has vacuum amplitude {amplitude:e}; the closed engine needs a single-particle state")]
    VacuumAmplitude { amplitude: f64 },
    #[error("state norm^2 {norm_sqr} differs from 1")]
    NotNormalized { norm_sqr: f64 },
    #[error("initial density matrix has trace {trace}")]
    InitialTrace { trace: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hamiltonian rejected: {0}")]
    InvalidHamiltonian(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("site {site} outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("trace drift {drift:e} at t = {time}; reduce the step (dt = {dt})")]
    TraceDrift { time: f64, drift: f64, dt: f64 },
    #[error("density matrix lost positivity (min eigenvalue {min_eigenvalue:e}) at t = {time}; reduce the step (dt = {dt})")]
    Negativity {
        time: f64,
        min_eigenvalue: f64,
        dt: f64,
    },
    #[error("covariance eigenvalues left [0, 1] ({value:e}) at t = {time}; reduce the step (dt = {dt})")]
    OccupationBound { time: f64, value: f64, dt: f64 },
    #[error("forced jump at t = {time} found every channel empty; the integrator step is too large")]
    DegenerateJump { time: f64 },
    #[error("at least one trajectory is required")]
    NoTrajectories,
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

/// Pure state on the truncated Fock space; index 0 is the vacuum, index j a
/// particle on site j.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amplitudes: Vec<C64>,
}

impl FockState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, EvolutionError> {
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if amplitudes.len() < 2 || norm_sqr > 1.0 + 1e-9 || !norm_sqr.is_finite() {
            return Err(EvolutionError::NotNormalized { norm_sqr });
        }
        Ok(FockState { amplitudes })
    }

    pub fn vacuum(n_sites: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_sites + 1];
        amplitudes[0] = C64::new(1.0, 0.0);
        FockState { amplitudes }
    }

    pub fn site(n_sites: usize, site: usize) -> Result<Self, EvolutionError> {
        if site == 0 || site > n_sites {
            return Err(EvolutionError::SiteOutOfRange { site, n_sites });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); n_sites + 1];
        amplitudes[site] = C64::new(1.0, 0.0);
        Ok(FockState { amplitudes })
    }

    /// Normalized single-particle state from site amplitudes 1…N.
    pub fn from_single_particle(sites: &[C64]) -> Self {
        let norm = sites.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut amplitudes = Vec::with_capacity(sites.len() + 1);
        amplitudes.push(C64::new(0.0, 0.0));
        amplitudes.extend(sites.iter().map(|z| z / norm));
        FockState { amplitudes }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn vacuum_amplitude(&self) -> C64 {
        self.amplitudes[0]
    }

    /// |ψ_i|² for sites 1…N.
    pub fn site_weights(&self) -> Vec<f64> {
        self.amplitudes[1..].iter().map(|z| z.norm_sqr()).collect()
    }

    /// Site reversal i → N + 1 − i; the vacuum is fixed.
    pub fn reflected(&self) -> Self {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len());
        amplitudes.push(self.amplitudes[0]);
        amplitudes.extend(self.amplitudes[1..].iter().rev().copied());
        FockState { amplitudes }
    }

    pub(crate) fn check_normalized(&self) -> Result<(), EvolutionError> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > 1e-9 {
            return Err(EvolutionError::NotNormalized { norm_sqr });
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, n_sites: usize) -> Result<(), EvolutionError> {
        if self.n_sites() != n_sites {
            return Err(EvolutionError::DimensionMismatch {
                expected: n_sites + 1,
                found: self.amplitudes.len(),
            });
        }
        Ok(())
    }
}

/// Density operator on the (N+1)-dimensional truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self, EvolutionError> {
        if entries.nrows() != entries.ncols() {
            return Err(EvolutionError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let deviation = hermiticity_deviation(&entries);
        if deviation > 1e-10 {
            return Err(EvolutionError::NotHermitian { deviation });
        }
        Ok(DensityMatrix { entries })
    }

    pub fn from_pure(psi: &FockState) -> Self {
        let a = psi.amplitudes();
        let n = a.len();
        DensityMatrix {
            entries: DMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj()),
        }
    }

    pub fn vacuum(n_sites: usize) -> Self {
        Self::from_pure(&FockState::vacuum(n_sites))
    }

    /// I / (N + 1).
    pub fn maximally_mixed(n_sites: usize) -> Self {
        let d = n_sites + 1;
        DensityMatrix {
            entries: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_deviation(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.entries)
    }
}

pub(crate) fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// True when every eigenvalue of the Hermitian part of `m` exceeds `-margin`,
/// decided by attempting a Cholesky factorization of that part plus margin·I.
pub(crate) fn bounded_below(m: &DMatrix<C64>, margin: f64) -> bool {
    let n = m.nrows();
    let mut l = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re + margin;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in j + 1..n {
            let mut s = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }
    true
}

/// Observation grid t_j = j·T/s, j = 0…s, with integrator step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    dt: f64,
    sample_count: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, dt: f64, sample_count: usize) -> Result<Self, EvolutionError> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(EvolutionError::InvalidGrid(format!("t_end must be > 0, got {t_end}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EvolutionError::InvalidGrid(format!("dt must be > 0, got {dt}")));
        }
        if sample_count == 0 {
            return Err(EvolutionError::InvalidGrid("sample_count must be >= 1".into()));
        }
        let interval = t_end / sample_count as f64;
        if dt > interval * (1.0 + 1e-12) {
            return Err(EvolutionError::InvalidGrid(format!(
                "dt = {dt} exceeds the sample interval {interval}"
            )));
        }
        Ok(TimeGrid {
            t_end,
            dt,
            sample_count,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn sample_time(&self, j: usize) -> f64 {
        j as f64 * self.t_end / self.sample_count as f64
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.sample_count).map(|j| self.sample_time(j)).collect()
    }

    /// Number of integrator steps per sample interval and the step length;
    /// the step never exceeds `dt` and lands exactly on every sample time.
    pub fn substeps(&self) -> (usize, f64) {
        let interval = self.t_end / self.sample_count as f64;
        let n = ((interval / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, interval / n as f64)
    }
}

/// Two-point correlators C_ij = ⟨c_i† c_j⟩ on N sites.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<C64>,
}

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self, EvolutionError> {
        let deviation = hermiticity_deviation(&entries);
        if deviation > 1e-10 {
            return Err(EvolutionError::NotHermitian { deviation });
        }
        let n = entries.nrows();
        if !bounded_below(&entries, 1e-8)
            || !bounded_below(&(DMatrix::identity(n, n) - &entries), 1e-8)
        {
            return Err(EvolutionError::OccupationBound {
                time: 0.0,
                value: min_hermitian_eigenvalue(&entries),
                dt: 0.0,
            });
        }
        Ok(CovarianceMatrix { entries })
    }

    /// C = ψ̄ ψᵀ restricted to the single-particle block.
    pub fn from_state(psi: &FockState) -> Self {
        let a = &psi.amplitudes()[1..];
        let n = a.len();
        CovarianceMatrix {
            entries: DMatrix::from_fn(n, n, |i, j| a[i].conj() * a[j]),
        }
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn n_sites(&self) -> usize {
        self.entries.nrows()
    }
}
