//! Eigenanalysis of chain Hamiltonians: dense eigendecompositions, edge-state
//! labels, PT-breaking counts and the bulk Zak phase.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{hopping_amplitudes, ModelParams};
use crate::C64;

const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |H - H^T| = {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigensolver did not converge within {max_iter} iterations (dim {dim}, Frobenius norm {norm:e})")]
    NonConvergence { dim: usize, norm: f64, max_iter: usize },
    #[error("eigenpair {index} residual {residual:e} exceeds bound {bound:e}")]
    Residual {
        index: usize,
        residual: f64,
        bound: f64,
    },
    #[error("bulk gap |t- - t+| = {gap:e} is closed; the Zak phase is undefined")]
    DegenerateBulk { gap: f64 },
    #[error("k_samples must be >= 64, got {0}")]
    TooFewSamples(usize),
    #[error("report dimension {report} does not match n_sites {n_sites}")]
    DimensionMismatch { report: usize, n_sites: usize },
}

/// Per-eigenpair classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenLabel {
    pub is_midgap: bool,
    pub edge_weight_left: f64,
    pub edge_weight_right: f64,
    pub is_pt_broken: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Unlabeled,
    Classified,
    /// Bulk gap below the floor; midgap flags are not assigned.
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    /// Unit-norm eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<C64>,
    pub labels: Vec<EigenLabel>,
    pub status: LabelStatus,
}

impl SpectrumReport {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Midgap eigenpair indices, `None` unless classified.
    pub fn midgap_indices(&self) -> Option<Vec<usize>> {
        (self.status == LabelStatus::Classified).then(|| {
            self.labels
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_midgap)
                .map(|(i, _)| i)
                .collect()
        })
    }

    pub fn eigenvector(&self, index: usize) -> DVector<C64> {
        self.eigenvectors.column(index).into_owned()
    }
}

/// Operational definition of an edge state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCriteria {
    /// An eigenvalue is midgap when |Re E| < factor · gap, gap = 2|t₊ − t₋|.
    pub midgap_factor: f64,
    /// Edge windows span ⌈N / divisor⌉ sites at each end.
    pub window_divisor: usize,
    /// |Im E| above this marks an eigenpair PT-broken.
    pub pt_tol: f64,
    /// Below this bulk gap the classification is indeterminate.
    pub gap_floor: f64,
}

impl Default for EdgeCriteria {
    fn default() -> Self {
        EdgeCriteria {
            midgap_factor: 0.5,
            window_divisor: 20,
            pt_tol: 1e-8,
            gap_floor: 1e-6,
        }
    }
}

impl EdgeCriteria {
    pub fn window(&self, n_sites: usize) -> usize {
        n_sites.div_ceil(self.window_divisor)
    }
}

fn check_square_finite<T>(rows: usize, cols: usize, finite: T) -> Result<(), SpectralError>
where
    T: FnOnce() -> bool,
{
    if rows != cols {
        return Err(SpectralError::NotSquare { rows, cols });
    }
    if !finite() {
        return Err(SpectralError::NonFinite);
    }
    Ok(())
}

fn unlabeled(eigenvalues: Vec<C64>, eigenvectors: DMatrix<C64>) -> SpectrumReport {
    SpectrumReport {
        eigenvalues,
        eigenvectors,
        labels: Vec::new(),
        status: LabelStatus::Unlabeled,
    }
}

/// Real symmetric eigendecomposition, eigenvalues ascending.
pub fn eigendecompose_hermitian(matrix: &DMatrix<f64>) -> Result<SpectrumReport, SpectralError> {
    let n = matrix.nrows();
    check_square_finite(n, matrix.ncols(), || matrix.iter().all(|x| x.is_finite()))?;
    let scale = matrix.amax().max(1.0);
    let asymmetry = (matrix - matrix.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(SpectralError::NotSymmetric { asymmetry });
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(
        SpectralError::NonConvergence {
            dim: n,
            norm: matrix.norm(),
            max_iter: MAX_SWEEPS,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order
        .iter()
        .map(|&k| C64::new(eig.eigenvalues[k], 0.0))
        .collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| C64::new(eig.eigenvectors[(i, order[j])], 0.0));
    Ok(unlabeled(eigenvalues, eigenvectors))
}

/// General complex eigendecomposition via a complex Schur form followed by
/// triangular back-substitution. Pairs are ordered by real part, then
/// imaginary part.
pub fn eigendecompose_general(matrix: &DMatrix<C64>) -> Result<SpectrumReport, SpectralError> {
    let n = matrix.nrows();
    check_square_finite(n, matrix.ncols(), || {
        matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    })?;
    let norm = matrix.norm();
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(
        SpectralError::NonConvergence {
            dim: n,
            norm,
            max_iter: MAX_SWEEPS,
        },
    )?;
    let (q, t) = schur.unpack();
    let small = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);

    let mut pairs: Vec<(C64, DVector<C64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<C64>::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            y[j] = -s / d;
        }
        let mut v = &q * y;
        let nv = v.norm();
        v /= C64::new(nv, 0.0);
        pairs.push((lambda, v));
    }
    pairs.sort_by(|a, b| match a.0.re.total_cmp(&b.0.re) {
        Ordering::Equal => a.0.im.total_cmp(&b.0.im),
        o => o,
    });

    let bound = 1e-8 * norm.max(f64::MIN_POSITIVE);
    for (index, (lambda, v)) in pairs.iter().enumerate() {
        let residual = (matrix * v - v * *lambda).norm();
        if residual > bound {
            return Err(SpectralError::Residual {
                index,
                residual,
                bound,
            });
        }
    }
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(unlabeled(eigenvalues, eigenvectors))
}

/// Fills midgap, edge-weight and PT-broken labels.
pub fn classify_edge_states(
    report: &SpectrumReport,
    params: &ModelParams,
    criteria: &EdgeCriteria,
) -> Result<SpectrumReport, SpectralError> {
    let n = params.n_sites();
    if report.dim() != n {
        return Err(SpectralError::DimensionMismatch {
            report: report.dim(),
            n_sites: n,
        });
    }
    let gap = params.bulk_gap();
    let gapped = gap >= criteria.gap_floor;
    let w = criteria.window(n);
    let labels = report
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let col = report.eigenvectors.column(k);
            let left: f64 = col.rows(0, w).iter().map(|z| z.norm_sqr()).sum();
            let right: f64 = col.rows(n - w, w).iter().map(|z| z.norm_sqr()).sum();
            EigenLabel {
                is_midgap: gapped && e.re.abs() < criteria.midgap_factor * gap,
                edge_weight_left: left,
                edge_weight_right: right,
                is_pt_broken: e.im.abs() > criteria.pt_tol,
            }
        })
        .collect();
    Ok(SpectrumReport {
        eigenvalues: report.eigenvalues.clone(),
        eigenvectors: report.eigenvectors.clone(),
        labels,
        status: if gapped {
            LabelStatus::Classified
        } else {
            LabelStatus::Indeterminate
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtBreaking {
    pub n_complex_pairs: usize,
    pub max_imag: f64,
}

/// Counts complex-conjugate eigenvalue pairs with Im E > `tol`.
///
/// Each eigenvalue above the axis is greedily matched to the nearest unused
/// conjugate candidate below it; floating-point spectra are only conjugate
/// up to solver error, so the match radius is √tol.
pub fn pt_breaking_report(report: &SpectrumReport, tol: f64) -> PtBreaking {
    let max_imag = report
        .eigenvalues
        .iter()
        .map(|e| e.im)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let radius = tol.sqrt();
    let mut upper: Vec<C64> = report.eigenvalues.iter().copied().filter(|e| e.im > tol).collect();
    upper.sort_by(|a, b| b.im.total_cmp(&a.im));
    let mut lower: Vec<Option<C64>> = report
        .eigenvalues
        .iter()
        .copied()
        .filter(|e| e.im < -tol)
        .map(Some)
        .collect();
    let mut n_complex_pairs = 0;
    for e in upper {
        let target = e.conj();
        let best = lower
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, (c - target).norm())))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, dist)) = best {
            if dist <= radius {
                lower[i] = None;
                n_complex_pairs += 1;
            }
        }
    }
    PtBreaking {
        n_complex_pairs,
        max_imag,
    }
}

/// Bulk topological data of the two-band Bloch Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologicalInvariant {
    /// In (−π/2, 3π/2]; quantized to 0 or π.
    pub zak_phase: f64,
    pub winding_number: u8,
    pub k_samples: usize,
}

/// Lower-band Bloch vector of h(k) = [[0, q*], [q, 0]] with
/// q = t₋ + t₊ e^{ik}.
fn lower_band_state(t_minus: f64, t_plus: f64, k: f64) -> [C64; 2] {
    let q = C64::new(t_minus + t_plus * k.cos(), t_plus * k.sin());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(s, 0.0), -q / q.norm() * s]
}

/// Zak phase of the lower band from the discrete Wilson loop
/// −arg ∏ ⟨u(k_m)|u(k_{m+1})⟩ over a closed uniform grid on [−π, π).
pub fn zak_phase(params: &ModelParams, k_samples: usize) -> Result<TopologicalInvariant, SpectralError> {
    zak_phase_with_gauge(params, k_samples, |_| 0.0)
}

/// As [`zak_phase`], with each Bloch vector multiplied by e^{i·gauge(m)}.
pub fn zak_phase_with_gauge<G>(
    params: &ModelParams,
    k_samples: usize,
    gauge: G,
) -> Result<TopologicalInvariant, SpectralError>
where
    G: Fn(usize) -> f64,
{
    if k_samples < 64 {
        return Err(SpectralError::TooFewSamples(k_samples));
    }
    let hops = hopping_amplitudes(params);
    let gap = (hops.t_minus - hops.t_plus).abs();
    if gap <= 1e-6 {
        return Err(SpectralError::DegenerateBulk { gap });
    }
    let states: Vec<[C64; 2]> = (0..k_samples)
        .map(|m| {
            let k = -PI + 2.0 * PI * m as f64 / k_samples as f64;
            let phase = C64::from_polar(1.0, gauge(m));
            let u = lower_band_state(hops.t_minus, hops.t_plus, k);
            [u[0] * phase, u[1] * phase]
        })
        .collect();
    let mut product = C64::new(1.0, 0.0);
    for m in 0..k_samples {
        let a = &states[m];
        let b = &states[(m + 1) % k_samples];
        let overlap = a[0].conj() * b[0] + a[1].conj() * b[1];
        product *= overlap / overlap.norm();
    }
    let mut zak = (-product.arg()).rem_euclid(2.0 * PI);
    if zak > 1.5 * PI {
        zak -= 2.0 * PI;
    }
    let winding_number = ((zak / PI).round() as i64).rem_euclid(2) as u8;
    Ok(TopologicalInvariant {
        zak_phase: zak,
        winding_number,
        k_samples,
    })
}
