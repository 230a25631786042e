use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiments::{SweepResult, SweepRow};
use crate::lindblad::TimeGrid;
use crate::model::ModelParams;
use crate::observables::{OccupationSeries, Side, TimeAveragedProfile};
use crate::spectral::SpectrumReport;
use crate::Error;

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `time,site,mean_occ,stderr,vacuum_prob`, rows ordered by (time, site).
/// Floats use the shortest representation that parses back exactly.
pub fn write_series(series: &OccupationSeries, path: &Path) -> Result<(), Error> {
    let mut out = String::from("time,site,mean_occ,stderr,vacuum_prob\n");
    for (j, t) in series.sample_times.iter().enumerate() {
        for i in 0..series.n_sites() {
            writeln!(
                out,
                "{:?},{},{:?},{:?},{:?}",
                t,
                i + 1,
                series.per_site_mean[(j, i)],
                series.per_site_stderr[(j, i)],
                series.vacuum_prob[j]
            )
            .unwrap();
        }
    }
    write_text(path, &out)
}

/// `site,initial,time_avg,stderr`; stderr is empty for deterministic engines.
pub fn write_profile(initial: &[f64], profile: &TimeAveragedProfile, path: &Path) -> Result<(), Error> {
    let mut out = String::from("site,initial,time_avg,stderr\n");
    for (i, avg) in profile.per_site.iter().enumerate() {
        let se = profile
            .stderr
            .as_ref()
            .map(|s| format!("{:?}", s[i]))
            .unwrap_or_default();
        writeln!(out, "{},{:?},{:?},{}", i + 1, initial[i], avg, se).unwrap();
    }
    write_text(path, &out)
}

/// `index,re,im,is_midgap,edge_weight_left,edge_weight_right,is_pt_broken`;
/// label columns are empty for unlabeled reports.
pub fn write_spectrum(report: &SpectrumReport, path: &Path) -> Result<(), Error> {
    let mut out = String::from("index,re,im,is_midgap,edge_weight_left,edge_weight_right,is_pt_broken\n");
    for (k, e) in report.eigenvalues.iter().enumerate() {
        match report.labels.get(k) {
            Some(l) => writeln!(
                out,
                "{k},{:?},{:?},{},{:?},{:?},{}",
                e.re, e.im, l.is_midgap, l.edge_weight_left, l.edge_weight_right, l.is_pt_broken
            ),
            None => writeln!(out, "{k},{:?},{:?},,,,", e.re, e.im),
        }
        .unwrap();
    }
    write_text(path, &out)
}

/// Companion JSON of a sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub windows: Vec<usize>,
    pub side: Side,
    pub kink_estimate: Option<f64>,
    pub kink_by_window: Vec<Option<f64>>,
    pub curvature_by_window: Vec<Option<f64>>,
    pub rows: Vec<SweepRow>,
}

/// `theta,window,edge_occ` at `path` plus a JSON summary next to it with
/// the kink estimate (null when undefined). Returns both paths.
pub fn write_sweep(result: &SweepResult, path: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut out = String::from("theta,window,edge_occ\n");
    for row in &result.rows {
        for (w, occ) in result.windows.iter().zip(&row.edge_occ) {
            writeln!(out, "{:?},{},{:?}", row.theta, w, occ).unwrap();
        }
    }
    write_text(path, &out)?;
    let summary = SweepSummary {
        windows: result.windows.clone(),
        side: result.side,
        kink_estimate: result.kink_estimate,
        kink_by_window: result.kink_by_window.clone(),
        curvature_by_window: result.curvature_by_window.clone(),
        rows: result.rows.clone(),
    };
    let json_path = path.with_extension("json");
    write_text(&json_path, &serde_json::to_string_pretty(&summary)?)?;
    Ok(vec![path.to_path_buf(), json_path])
}

/// Record of one CLI invocation, listing every file it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub engine: String,
    pub seed: u64,
    pub n_traj: usize,
    pub code_version: String,
    pub wall_time_s: f64,
    pub output_paths: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        write_text(path, &self.to_json()?)
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
