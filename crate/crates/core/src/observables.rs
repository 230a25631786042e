//! Site occupations, temporal means and edge-window sums.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::lindblad::DensityMatrix;

/// Occupations ⟨n_i(t_j)⟩ sampled on a time grid.
///
/// `per_site_mean` and `per_site_stderr` are `(s + 1) × N`, row `j` holding
/// sample time `t_j` and column `i − 1` holding site `i`. Deterministic engines
/// report zero standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSeries {
    pub sample_times: Vec<f64>,
    pub per_site_mean: DMatrix<f64>,
    pub per_site_stderr: DMatrix<f64>,
    pub vacuum_prob: Vec<f64>,
    /// Standard error of the per-trajectory time averages, for stochastic
    /// engines only.
    pub time_average_stderr: Option<Vec<f64>>,
}

impl OccupationSeries {
    pub fn n_sites(&self) -> usize {
        self.per_site_mean.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_times.len()
    }

    pub fn occupations_at(&self, sample: usize) -> Vec<f64> {
        self.per_site_mean.row(sample).iter().copied().collect()
    }

    /// max_j |vacuum_prob_j + Σ_i ⟨n_i(t_j)⟩ − 1|
    pub fn completeness_error(&self) -> f64 {
        (0..self.n_samples())
            .map(|j| (self.vacuum_prob[j] + self.per_site_mean.row(j).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

/// ⟨n_i⟩_T for every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAveragedProfile {
    pub per_site: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub vacuum: f64,
    pub window: AveragingWindow,
}

impl TimeAveragedProfile {
    pub fn n_sites(&self) -> usize {
        self.per_site.len()
    }

    pub fn total(&self) -> f64 {
        self.per_site.iter().sum()
    }

    /// 1-based site with the largest mean occupation.
    pub fn argmax_site(&self) -> usize {
        self.per_site
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1)
            .unwrap_or(0)
    }
}

/// Normalization of the temporal mean over the `s + 1` samples t_0 … t_s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prefactor {
    /// Divide by the number of samples, s + 1.
    #[default]
    Normalized,
    /// Divide by the number of intervals, s.
    PerInterval,
}

/// ⟨n_i⟩ = ρ_ii for i = 1…N.
pub fn site_occupations(rho: &DensityMatrix) -> Vec<f64> {
    let m = rho.entries();
    (1..m.nrows()).map(|i| m[(i, i)].re).collect()
}

pub fn time_average(series: &OccupationSeries) -> TimeAveragedProfile {
    time_average_with(series, Prefactor::Normalized)
}

pub fn time_average_with(series: &OccupationSeries, prefactor: Prefactor) -> TimeAveragedProfile {
    let samples = series.n_samples();
    assert!(samples > 0, "time average of an empty series");
    let divisor = match prefactor {
        Prefactor::Normalized => samples as f64,
        Prefactor::PerInterval => (samples.max(2) - 1) as f64,
    };
    let per_site = series
        .per_site_mean
        .column_iter()
        .map(|c| c.iter().sum::<f64>() / divisor)
        .collect();
    let rescale = samples as f64 / divisor;
    let stderr = series
        .time_average_stderr
        .as_ref()
        .map(|s| s.iter().map(|x| x * rescale).collect());
    TimeAveragedProfile {
        per_site,
        stderr,
        vacuum: series.vacuum_prob.iter().sum::<f64>() / divisor,
        window: AveragingWindow {
            t_start: series.sample_times[0],
            t_end: *series.sample_times.last().unwrap(),
            samples,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Sum over the first (left) or last (right) `a` sites; requires a ≤ N/2.
pub fn edge_occupation(profile: &TimeAveragedProfile, a: usize, side: Side) -> f64 {
    let n = profile.n_sites();
    assert!(a >= 1 && a <= n / 2, "edge window {a} outside 1..={}", n / 2);
    match side {
        Side::Left => profile.per_site[..a].iter().sum(),
        Side::Right => profile.per_site[n - a..].iter().sum(),
    }
}
