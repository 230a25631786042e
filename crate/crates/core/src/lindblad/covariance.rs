//! Two-point correlator dynamics of the quadratic Lindbladian on the full
//! fermionic Fock space. No single-particle truncation is applied, so this
//! serves as an independent reference for the truncated engines.

use nalgebra::DMatrix;

use super::{bounded_below, min_hermitian_eigenvalue, CovarianceMatrix, EvolutionError, TimeGrid};
use crate::model::{hopping_amplitudes, ssh_chain, ChannelLayout, ModelParams};
use crate::observables::OccupationSeries;
use crate::C64;

const BOUND_TOL: f64 = 1e-6;

/// dC/dt = i(hC − Ch) − (κ_l/2){P_l, C} − (κ_g/2){P_g, C} + κ_g P_g
/// with 0-based channel sites.
pub(crate) struct CorrelatorFlow {
    h: DMatrix<C64>,
    loss: Option<(usize, f64)>,
    gain: Option<(usize, f64)>,
}

impl CorrelatorFlow {
    pub(crate) fn new(h: &DMatrix<f64>, loss: Option<(usize, f64)>, gain: Option<(usize, f64)>) -> Self {
        CorrelatorFlow {
            h: h.map(|x| C64::new(x, 0.0)),
            loss,
            gain,
        }
    }

    fn rhs(&self, c: &DMatrix<C64>) -> DMatrix<C64> {
        let hc = &self.h * c;
        // hC − Ch = hC − (hC)† for Hermitian h and C
        let mut out = (&hc - hc.adjoint()) * C64::new(0.0, 1.0);
        let n = c.nrows();
        for &(site, rate) in self.loss.iter().chain(self.gain.iter()) {
            let half = 0.5 * rate;
            for k in 0..n {
                out[(site, k)] -= c[(site, k)] * half;
                out[(k, site)] -= c[(k, site)] * half;
            }
        }
        if let Some((site, rate)) = self.gain {
            out[(site, site)] += C64::new(rate, 0.0);
        }
        out
    }

    pub(crate) fn integrate(
        &self,
        c0: &DMatrix<C64>,
        grid: &TimeGrid,
    ) -> Result<OccupationSeries, EvolutionError> {
        let n = c0.nrows();
        let times = grid.sample_times();
        let samples = times.len();
        let (substeps, h) = grid.substeps();
        let identity = DMatrix::<C64>::identity(n, n);
        let mut per_site_mean = DMatrix::zeros(samples, n);
        let mut vacuum_prob = vec![0.0; samples];
        let mut c = c0.clone();

        for (j, &t) in times.iter().enumerate() {
            if j > 0 {
                for _ in 0..substeps {
                    let k1 = self.rhs(&c);
                    let k2 = self.rhs(&(&c + &k1 * C64::new(0.5 * h, 0.0)));
                    let k3 = self.rhs(&(&c + &k2 * C64::new(0.5 * h, 0.0)));
                    let k4 = self.rhs(&(&c + &k3 * C64::new(h, 0.0)));
                    c += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
                }
            }
            let hole = &identity - &c;
            if !bounded_below(&c, BOUND_TOL) {
                return Err(EvolutionError::OccupationBound {
                    time: t,
                    value: min_hermitian_eigenvalue(&c),
                    dt: h,
                });
            }
            if !bounded_below(&hole, BOUND_TOL) {
                return Err(EvolutionError::OccupationBound {
                    time: t,
                    value: 1.0 - min_hermitian_eigenvalue(&hole),
                    dt: h,
                });
            }
            for i in 0..n {
                per_site_mean[(j, i)] = c[(i, i)].re;
            }
            vacuum_prob[j] = hole.determinant().re;
        }

        Ok(OccupationSeries {
            sample_times: times,
            per_site_stderr: DMatrix::zeros(samples, n),
            vacuum_prob,
            per_site_mean,
            time_average_stderr: None,
        })
    }
}

/// Correlator evolution with loss at site 1 and gain at site N.
///
/// `vacuum_prob` holds det(I − C), the full-Fock-space vacuum probability.
pub fn covariance_evolve(
    c0: &CovarianceMatrix,
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<OccupationSeries, EvolutionError> {
    covariance_evolve_with(c0, params, ChannelLayout::standard(params.n_sites()), grid)
}

pub fn covariance_evolve_with(
    c0: &CovarianceMatrix,
    params: &ModelParams,
    layout: ChannelLayout,
    grid: &TimeGrid,
) -> Result<OccupationSeries, EvolutionError> {
    let n = params.n_sites();
    if c0.n_sites() != n {
        return Err(EvolutionError::DimensionMismatch {
            expected: n,
            found: c0.n_sites(),
        });
    }
    for site in [layout.loss_site, layout.gain_site] {
        if site == 0 || site > n {
            return Err(EvolutionError::SiteOutOfRange { site, n_sites: n });
        }
    }
    let h = ssh_chain(n, hopping_amplitudes(params));
    let gamma = params.gamma();
    let loss = (gamma > 0.0).then_some((layout.loss_site - 1, gamma));
    let gain = (gamma > 0.0 && layout.gain_enabled).then_some((layout.gain_site - 1, gamma));
    CorrelatorFlow::new(&h, loss, gain).integrate(c0.entries(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{evolve_master_rk4, DensityMatrix, FockState};
    use crate::model::TruncatedLindbladModel;

    #[test]
    fn single_site_gain_fills_exponentially() {
        let flow = CorrelatorFlow::new(&DMatrix::zeros(1, 1), None, Some((0, 0.3)));
        let grid = TimeGrid::new(10.0, 0.01, 20).unwrap();
        let s = flow.integrate(&DMatrix::zeros(1, 1), &grid).unwrap();
        for (j, t) in s.sample_times.iter().enumerate() {
            let want = 1.0 - (-0.3 * t).exp();
            assert!((s.per_site_mean[(j, 0)] - want).abs() < 1e-10);
            assert!((s.vacuum_prob[j] - (1.0 - want)).abs() < 1e-10);
        }
    }

    #[test]
    fn gainless_matches_truncated_master() {
        let p = ModelParams::new(6, 1.0, 0.3, 0.1 * std::f64::consts::PI, 0.1).unwrap();
        let layout = ChannelLayout::standard(6).without_gain();
        let grid = TimeGrid::new(20.0, 0.01, 40).unwrap();
        let psi = FockState::site(6, 2).unwrap();
        let cov = covariance_evolve_with(&CovarianceMatrix::from_state(&psi), &p, layout, &grid)
            .unwrap();
        let model = TruncatedLindbladModel::with_layout(&p, layout).unwrap();
        let master = evolve_master_rk4(&DensityMatrix::from_pure(&psi), &model, &grid).unwrap();
        let dev = (&cov.per_site_mean - &master.per_site_mean).amax();
        assert!(dev < 1e-8, "deviation {dev}");
    }

    #[test]
    fn rejects_wrong_size() {
        let p = ModelParams::new(6, 1.0, 0.3, 0.0, 0.1).unwrap();
        let grid = TimeGrid::new(1.0, 0.1, 10).unwrap();
        let c = CovarianceMatrix::from_state(&FockState::site(4, 1).unwrap());
        assert!(matches!(
            covariance_evolve(&c, &p, &grid),
            Err(EvolutionError::DimensionMismatch { .. })
        ));
    }
}
