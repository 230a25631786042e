//! Model construction: SSH hopping pattern, the complex PT-symmetric
//! potential variant, and the truncated Fock-space Lindblad model.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("n_sites must be even, got {0}")]
    OddSites(usize),
    #[error("n_sites must be at least 4, got {0}")]
    TooFewSites(usize),
    #[error("hopping must be finite and > 0, got {0}")]
    Hopping(f64),
    #[error("dimerization must lie in [0, 1), got {0}")]
    Dimerization(f64),
    #[error("theta must lie in [0, pi], got {0}")]
    Theta(f64),
    #[error("gamma must be finite and >= 0, got {0}")]
    Gamma(f64),
    #[error("site {site} outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
}

/// Physical parameters of one chain instance.
///
/// Units: hbar = 1 and energies in units of the bare hopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    n_sites: usize,
    hopping: f64,
    dimerization: f64,
    theta: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n_sites: usize,
    hopping: f64,
    dimerization: f64,
    theta: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ModelError;
    fn try_from(r: RawParams) -> Result<Self, ModelError> {
        ModelParams::new(r.n_sites, r.hopping, r.dimerization, r.theta, r.gamma)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            n_sites: p.n_sites,
            hopping: p.hopping,
            dimerization: p.dimerization,
            theta: p.theta,
            gamma: p.gamma,
        }
    }
}

impl Default for ModelParams {
    /// N = 200, t = 1, Δ = 0.3, Θ = 0.1π, γ = 0.1.
    fn default() -> Self {
        ModelParams {
            n_sites: 200,
            hopping: 1.0,
            dimerization: 0.3,
            theta: 0.1 * PI,
            gamma: 0.1,
        }
    }
}

impl ModelParams {
    pub fn new(
        n_sites: usize,
        hopping: f64,
        dimerization: f64,
        theta: f64,
        gamma: f64,
    ) -> Result<Self, ModelError> {
        if !n_sites.is_multiple_of(2) {
            return Err(ModelError::OddSites(n_sites));
        }
        if n_sites < 4 {
            return Err(ModelError::TooFewSites(n_sites));
        }
        if !(hopping.is_finite() && hopping > 0.0) {
            return Err(ModelError::Hopping(hopping));
        }
        if !(dimerization.is_finite() && (0.0..1.0).contains(&dimerization)) {
            return Err(ModelError::Dimerization(dimerization));
        }
        if !(theta.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(ModelError::Theta(theta));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ModelError::Gamma(gamma));
        }
        Ok(ModelParams {
            n_sites,
            hopping,
            dimerization,
            theta,
            gamma,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn hopping(&self) -> f64 {
        self.hopping
    }
    pub fn dimerization(&self) -> f64 {
        self.dimerization
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self, ModelError> {
        Self::new(self.n_sites, self.hopping, self.dimerization, theta, self.gamma)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        Self::new(self.n_sites, self.hopping, self.dimerization, self.theta, gamma)
    }

    pub fn with_n_sites(&self, n_sites: usize) -> Result<Self, ModelError> {
        Self::new(n_sites, self.hopping, self.dimerization, self.theta, self.gamma)
    }

    /// Bulk gap 2|t₊ − t₋| of the two-band dispersion.
    pub fn bulk_gap(&self) -> f64 {
        let h = hopping_amplitudes(self);
        2.0 * (h.t_plus - h.t_minus).abs()
    }
}

/// Intracell (`t_minus`, bond 2n−1 ↔ 2n) and intercell (`t_plus`, bond
/// 2n ↔ 2n+1) amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoppingPair {
    pub t_minus: f64,
    pub t_plus: f64,
}

pub fn hopping_amplitudes(params: &ModelParams) -> HoppingPair {
    let d = params.dimerization * params.theta.cos();
    HoppingPair {
        t_minus: params.hopping * (1.0 - d),
        t_plus: params.hopping * (1.0 + d),
    }
}

impl HoppingPair {
    /// Amplitude on the bond between 1-based sites `site` and `site + 1`.
    #[inline]
    pub fn bond(&self, site: usize) -> f64 {
        if site % 2 == 1 {
            self.t_minus
        } else {
            self.t_plus
        }
    }
}

/// Open-boundary SSH chain of arbitrary length (the dimer case included).
pub fn ssh_chain(n_sites: usize, hops: HoppingPair) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n_sites, n_sites);
    for site in 1..n_sites {
        let t = hops.bond(site);
        h[(site - 1, site)] = t;
        h[(site, site - 1)] = t;
    }
    h
}

/// SSH chain plus −iγ on site 1 and +iγ on site N.
pub fn pt_chain(n_sites: usize, hops: HoppingPair, gamma: f64) -> DMatrix<C64> {
    let mut h = ssh_chain(n_sites, hops).map(|x| C64::new(x, 0.0));
    if n_sites > 0 {
        h[(0, 0)] += C64::new(0.0, -gamma);
        h[(n_sites - 1, n_sites - 1)] += C64::new(0.0, gamma);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    HermitianSsh,
    PtComplexPotential,
}

/// Dense single-particle Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianMatrix {
    HermitianSsh(DMatrix<f64>),
    PtComplexPotential(DMatrix<C64>),
}

impl HamiltonianMatrix {
    pub fn flavor(&self) -> Flavor {
        match self {
            HamiltonianMatrix::HermitianSsh(_) => Flavor::HermitianSsh,
            HamiltonianMatrix::PtComplexPotential(_) => Flavor::PtComplexPotential,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            HamiltonianMatrix::HermitianSsh(m) => m.nrows(),
            HamiltonianMatrix::PtComplexPotential(m) => m.nrows(),
        }
    }

    pub fn as_real(&self) -> Option<&DMatrix<f64>> {
        match self {
            HamiltonianMatrix::HermitianSsh(m) => Some(m),
            HamiltonianMatrix::PtComplexPotential(_) => None,
        }
    }

    pub fn to_complex(&self) -> DMatrix<C64> {
        match self {
            HamiltonianMatrix::HermitianSsh(m) => m.map(|x| C64::new(x, 0.0)),
            HamiltonianMatrix::PtComplexPotential(m) => m.clone(),
        }
    }
}

pub fn build_ssh_hamiltonian(params: &ModelParams) -> HamiltonianMatrix {
    HamiltonianMatrix::HermitianSsh(ssh_chain(params.n_sites, hopping_amplitudes(params)))
}

pub fn build_pt_hamiltonian(params: &ModelParams) -> HamiltonianMatrix {
    HamiltonianMatrix::PtComplexPotential(pt_chain(
        params.n_sites,
        hopping_amplitudes(params),
        params.gamma,
    ))
}

/// Single-entry jump operator `amplitude · |target⟩⟨source|` on the
/// truncated Fock space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub source: usize,
    pub target: usize,
    pub amplitude: f64,
}

impl JumpOperator {
    /// ‖L ψ‖².
    #[inline]
    pub fn weight(&self, psi: &[C64]) -> f64 {
        self.amplitude * self.amplitude * psi[self.source].norm_sqr()
    }

    /// Replaces `psi` with L ψ (unnormalized).
    pub fn apply_in_place(&self, psi: &mut [C64]) {
        let moved = psi[self.source] * self.amplitude;
        psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        psi[self.target] = moved;
    }

    pub fn to_dense(&self, dim: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(dim, dim);
        m[(self.target, self.source)] = C64::new(self.amplitude, 0.0);
        m
    }

    /// L†L, which is diagonal: amplitude² on `source`.
    pub fn dagger_product(&self, dim: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(dim, dim);
        m[(self.source, self.source)] = C64::new(self.amplitude * self.amplitude, 0.0);
        m
    }
}

/// Placement of the dissipative channels. The default is loss at site 1 and
/// gain at site N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub loss_site: usize,
    pub gain_site: usize,
    pub gain_enabled: bool,
}

impl ChannelLayout {
    pub fn standard(n_sites: usize) -> Self {
        ChannelLayout {
            loss_site: 1,
            gain_site: n_sites,
            gain_enabled: true,
        }
    }

    /// Loss at site N, gain at site 1.
    pub fn mirrored(n_sites: usize) -> Self {
        ChannelLayout {
            loss_site: n_sites,
            gain_site: 1,
            gain_enabled: true,
        }
    }

    pub fn without_gain(self) -> Self {
        ChannelLayout {
            gain_enabled: false,
            ..self
        }
    }
}

/// SSH chain embedded in {vacuum} ⊕ {single particle}, with the loss jump
/// |loss site⟩ → |vac⟩ and the vacuum-projected gain jump |vac⟩ → |gain site⟩.
#[derive(Debug, Clone)]
pub struct TruncatedLindbladModel {
    params: ModelParams,
    layout: ChannelLayout,
    h_fock: DMatrix<f64>,
    jump_loss: JumpOperator,
    jump_gain: JumpOperator,
    h_eff: CsrMatrix,
}

pub fn build_truncated_lindblad(params: &ModelParams) -> TruncatedLindbladModel {
    TruncatedLindbladModel::with_layout(params, ChannelLayout::standard(params.n_sites))
        .expect("standard layout is always in range")
}

impl TruncatedLindbladModel {
    pub fn with_layout(params: &ModelParams, layout: ChannelLayout) -> Result<Self, ModelError> {
        let n = params.n_sites;
        for site in [layout.loss_site, layout.gain_site] {
            if site == 0 || site > n {
                return Err(ModelError::SiteOutOfRange { site, n_sites: n });
            }
        }
        let hops = hopping_amplitudes(params);
        let mut h_fock = DMatrix::zeros(n + 1, n + 1);
        for site in 1..n {
            let t = hops.bond(site);
            h_fock[(site, site + 1)] = t;
            h_fock[(site + 1, site)] = t;
        }
        let rate = params.gamma.sqrt();
        let jump_loss = JumpOperator {
            source: layout.loss_site,
            target: 0,
            amplitude: rate,
        };
        let jump_gain = JumpOperator {
            source: 0,
            target: layout.gain_site,
            amplitude: if layout.gain_enabled { rate } else { 0.0 },
        };

        let mut triplets = Vec::with_capacity(3 * n + 2);
        for site in 1..n {
            let t = C64::new(hops.bond(site), 0.0);
            triplets.push((site, site + 1, t));
            triplets.push((site + 1, site, t));
        }
        for jump in [&jump_loss, &jump_gain] {
            let rate = jump.amplitude * jump.amplitude;
            if rate != 0.0 {
                triplets.push((jump.source, jump.source, C64::new(0.0, -0.5 * rate)));
            }
        }
        let h_eff = CsrMatrix::from_triplets(n + 1, &triplets);

        Ok(TruncatedLindbladModel {
            params: *params,
            layout,
            h_fock,
            jump_loss,
            jump_gain,
            h_eff,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }
    /// N + 1.
    pub fn dim(&self) -> usize {
        self.params.n_sites + 1
    }
    pub fn h_fock(&self) -> &DMatrix<f64> {
        &self.h_fock
    }
    pub fn jump_loss(&self) -> &JumpOperator {
        &self.jump_loss
    }
    pub fn jump_gain(&self) -> &JumpOperator {
        &self.jump_gain
    }
    pub fn jumps(&self) -> [&JumpOperator; 2] {
        [&self.jump_loss, &self.jump_gain]
    }
    /// Sparse h_fock − (i/2) Σ L†L.
    pub fn h_eff(&self) -> &CsrMatrix {
        &self.h_eff
    }
    pub fn h_eff_dense(&self) -> DMatrix<C64> {
        self.h_eff.to_dense()
    }
}
