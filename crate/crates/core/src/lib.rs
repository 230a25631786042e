//! Su-Schrieffer-Heeger chain with balanced particle gain and loss.
//!
//! The crate builds the single-particle SSH Hamiltonian and its complex
//! PT-symmetric counterpart, computes spectra, edge-state labels and the bulk
//! Zak phase, and evolves the single-particle Lindblad master equation with
//! loss at site 1 and gain at site N. Three open-system engines are provided:
//! quantum trajectories (waiting-time Monte Carlo wave function), direct
//! fourth-order Runge-Kutta integration of the density matrix, and a
//! fermionic covariance-matrix integrator used as an independent oracle.
//!
//! Site indices are 1-based; index 0 of every Fock-space object is the
//! vacuum.

pub mod error;
pub mod experiments;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod observables;
pub mod sparse;
pub mod spectral;

pub use error::Error;

/// Complex double used throughout.
pub type C64 = nalgebra::Complex<f64>;

/// Ready-made imports for drivers and tests.
pub mod prelude {
    pub use crate::error::Error;
    pub use crate::experiments::{
        prepare_initial_state, run_snapshot_experiment, run_theta_sweep, Engine, EngineSettings,
        InitialKind, InitialStateSpec, SnapshotResult, SweepResult,
    };
    pub use crate::lindblad::{
        covariance_evolve, evolve_closed_spectral, evolve_master_rk4, lindblad_rhs,
        sample_trajectories, CovarianceMatrix, DensityMatrix, FockState, TimeGrid,
        TrajectoryOptions,
    };
    pub use crate::model::{
        build_pt_hamiltonian, build_ssh_hamiltonian, build_truncated_lindblad, hopping_amplitudes,
        ChannelLayout, HamiltonianMatrix, HoppingPair, ModelParams, TruncatedLindbladModel,
    };
    pub use crate::observables::{
        edge_occupation, site_occupations, time_average, OccupationSeries, Side,
        TimeAveragedProfile,
    };
    pub use crate::spectral::{
        classify_edge_states, eigendecompose_general, eigendecompose_hermitian,
        pt_breaking_report, zak_phase, EdgeCriteria, SpectrumReport, TopologicalInvariant,
    };
    pub use crate::C64;
}
