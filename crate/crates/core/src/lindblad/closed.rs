//! Exact closed-system propagation in the SSH eigenbasis.

use nalgebra::DMatrix;

use super::{EvolutionError, FockState, TimeGrid};
use crate::model::{build_ssh_hamiltonian, ModelParams};
use crate::observables::OccupationSeries;
use crate::spectral::eigendecompose_hermitian;

/// ⟨n_i(t_j)⟩ = |Σ_k v_ik e^{−iE_k t_j} ⟨v_k|ψ₀⟩|² for γ = 0.
pub fn evolve_closed_spectral(
    psi0: &FockState,
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<OccupationSeries, EvolutionError> {
    if params.gamma() != 0.0 {
        return Err(EvolutionError::OpenSystem {
            gamma: params.gamma(),
        });
    }
    let h = build_ssh_hamiltonian(params);
    evolve_closed_matrix(psi0, h.as_real().expect("hermitian flavor"), grid)
}

/// Same propagation under an arbitrary real symmetric single-particle
/// Hamiltonian (any chain length, the dimer included).
pub fn evolve_closed_matrix(
    psi0: &FockState,
    hamiltonian: &DMatrix<f64>,
    grid: &TimeGrid,
) -> Result<OccupationSeries, EvolutionError> {
    let n = hamiltonian.nrows();
    psi0.check_dim(n)?;
    psi0.check_normalized()?;
    let amplitude = psi0.vacuum_amplitude().norm();
    if amplitude > 1e-12 {
        return Err(EvolutionError::VacuumAmplitude { amplitude });
    }

    let report = eigendecompose_hermitian(hamiltonian).map_err(|e| {
        EvolutionError::InvalidHamiltonian(e.to_string())
    })?;
    let energies: Vec<f64> = report.eigenvalues.iter().map(|e| e.re).collect();
    let vectors = report.eigenvectors.map(|z| z.re);

    let sites = &psi0.amplitudes()[1..];
    let coeff: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let col = vectors.column(k);
            sites
                .iter()
                .zip(col.iter())
                .fold((0.0, 0.0), |(re, im), (z, v)| (re + v * z.re, im + v * z.im))
        })
        .collect();

    let times = grid.sample_times();
    let samples = times.len();
    // phased eigen-coefficients, one column per sample time
    let mut w_re = DMatrix::<f64>::zeros(n, samples);
    let mut w_im = DMatrix::<f64>::zeros(n, samples);
    for (j, &t) in times.iter().enumerate() {
        for k in 0..n {
            let (s, c) = (-energies[k] * t).sin_cos();
            let (a, b) = coeff[k];
            w_re[(k, j)] = a * c - b * s;
            w_im[(k, j)] = a * s + b * c;
        }
    }
    let amp_re = &vectors * w_re;
    let amp_im = &vectors * w_im;
    let per_site_mean = DMatrix::from_fn(samples, n, |j, i| {
        amp_re[(i, j)] * amp_re[(i, j)] + amp_im[(i, j)] * amp_im[(i, j)]
    });

    Ok(OccupationSeries {
        sample_times: times,
        per_site_stderr: DMatrix::zeros(samples, n),
        vacuum_prob: vec![0.0; samples],
        per_site_mean,
        time_average_stderr: None,
    })
}
