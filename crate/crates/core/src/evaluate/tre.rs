//! Target registration error over paired landmark tracks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::geometry::CANONICAL_SPACING_MM;

#[derive(Debug, Error)]
pub enum TreError {
    #[error("unmatched tracks: {0:?}")]
    UnmatchedTracks(Vec<String>),
    #[error("track {label}: unmatched time indices {indices:?}")]
    UnmatchedTimePoints { label: String, indices: Vec<usize> },
    #[error("no data points to aggregate")]
    Empty,
}

/// Per-time-point 2D position of one tracked vessel cross-section,
/// in continuous voxel coordinates of the 128×128 slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkTrack {
    pub label: String,
    pub plane_offset_mm: f64,
    /// (time index, row, column) triples.
    pub positions: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    fn from_points(points: &[f64]) -> Self {
        let n = points.len();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = points.iter().sum::<f64>() / n as f64;
        let var = points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n as f64;
        MeanStd { mean, std: var.sqrt(), n }
    }

    pub fn mean_mm(&self) -> f64 {
        self.mean * CANONICAL_SPACING_MM
    }
    pub fn std_mm(&self) -> f64 {
        self.std * CANONICAL_SPACING_MM
    }
}

/// TRE aggregates in voxel units; mm values are voxel × 1.8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreReport {
    /// Keyed by (subject, plane offset in tenths of a millimetre).
    pub per_subject_offset: BTreeMap<String, MeanStd>,
    pub per_subject: BTreeMap<String, MeanStd>,
    /// Pooled over every point (the primary aggregate).
    pub overall: MeanStd,
    /// Mean of the per-(subject, offset) means, reported for comparison.
    pub overall_mean_of_means: f64,
    pub n_points: usize,
}

pub fn offset_key(subject: &str, plane_offset_mm: f64) -> String {
    format!("{subject}/{:+.1}mm", plane_offset_mm)
}

/// Computes the TRE between ground-truth and predicted tracks of one
/// subject. Tracks pair by label; time points pair by index.
pub fn compute_tre(
    subject: &str,
    ground: &[LandmarkTrack],
    predicted: &[LandmarkTrack],
) -> Result<TreReport, TreError> {
    compute_tre_multi(&[(subject.to_string(), ground.to_vec(), predicted.to_vec())])
}

/// Multi-subject TRE; produces the per-subject and pooled aggregates.
pub fn compute_tre_multi(
    subjects: &[(String, Vec<LandmarkTrack>, Vec<LandmarkTrack>)],
) -> Result<TreReport, TreError> {
    let mut per_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_subject: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::new();

    for (subject, ground, predicted) in subjects {
        let mut unmatched = Vec::new();
        for g in ground {
            let Some(p) = predicted
                .iter()
                .find(|p| p.label == g.label && p.plane_offset_mm == g.plane_offset_mm)
            else {
                unmatched.push(g.label.clone());
                continue;
            };
            let mut missing = Vec::new();
            for &(t, gr, gc) in &g.positions {
                let Some(&(_, pr, pc)) = p.positions.iter().find(|&&(pt, _, _)| pt == t) else {
                    missing.push(t);
                    continue;
                };
                let err = ((gr - pr).powi(2) + (gc - pc).powi(2)).sqrt();
                per_group.entry(offset_key(subject, g.plane_offset_mm)).or_default().push(err);
                per_subject.entry(subject.clone()).or_default().push(err);
                all.push(err);
            }
            if !missing.is_empty() {
                return Err(TreError::UnmatchedTimePoints { label: g.label.clone(), indices: missing });
            }
        }
        if !unmatched.is_empty() {
            return Err(TreError::UnmatchedTracks(unmatched));
        }
    }

    if all.is_empty() {
        return Err(TreError::Empty);
    }

    let per_subject_offset: BTreeMap<String, MeanStd> =
        per_group.iter().map(|(k, v)| (k.clone(), MeanStd::from_points(v))).collect();
    let overall_mean_of_means = per_subject_offset.values().map(|m| m.mean).sum::<f64>()
        / per_subject_offset.len() as f64;

    Ok(TreReport {
        per_subject_offset,
        per_subject: per_subject.iter().map(|(k, v)| (k.clone(), MeanStd::from_points(v))).collect(),
        overall: MeanStd::from_points(&all),
        overall_mean_of_means,
        n_points: all.len(),
    })
}
