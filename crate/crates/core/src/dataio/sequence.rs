//! Interleaved navigator/data sequences and frame pairing.

use thiserror::Error;

use super::image::Slice2D;

/// Nominal frame period of the cine acquisition, milliseconds per slice.
pub const FRAME_PERIOD_MS: f64 = 166.0;
/// Timing tolerance for real acquisitions (±10% of the frame period).
pub const FRAME_PERIOD_TOL: f64 = 0.10;
/// Two frames within this distance along the slice normal are treated as
/// lying in the same plane (scanner metadata jitters slightly).
pub const PLANE_TOL_MM: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("sequence needs at least 2 frames, got {0}")]
    TooShort(usize),
    #[error("frame {index} at plane {got_mm:.2} mm does not alternate (expected near {expected_mm:.2} mm)")]
    NotAlternating { index: usize, got_mm: f64, expected_mm: f64 },
    #[error("timestamps not strictly increasing at frame {0}")]
    NonMonotonicTime(usize),
    #[error("frame {index} period {got_ms:.1} ms outside {nominal_ms:.0} ms ±{tol_pct:.0}%")]
    BadFramePeriod { index: usize, got_ms: f64, nominal_ms: f64, tol_pct: f64 },
    #[error("frame {0} carries no timestamp")]
    MissingTimestamp(usize),
}

/// An ordered alternating navigator/data acquisition at one data-plane
/// offset. Offsets are absolute scanner positions along the sagittal axis.
#[derive(Debug, Clone)]
pub struct InterleavedSequence {
    pub frames: Vec<Slice2D>,
    pub navigator_offset_mm: f64,
    pub data_offset_mm: f64,
}

impl InterleavedSequence {
    /// Number of (navigator, data) pairs.
    pub fn n_pairs(&self) -> usize {
        self.frames.len() / 2
    }

    /// Validates alternation, timestamp monotonicity and frame period.
    /// `strict_timing` enforces the exact 166 ms period (phantom data);
    /// otherwise ±10% is allowed.
    pub fn validate(&self, strict_timing: bool) -> Result<(), SequenceError> {
        if self.frames.len() < 2 {
            return Err(SequenceError::TooShort(self.frames.len()));
        }
        let mut prev_t = f64::NEG_INFINITY;
        for (i, frame) in self.frames.iter().enumerate() {
            let expected = if i % 2 == 0 { self.navigator_offset_mm } else { self.data_offset_mm };
            let got = frame.plane_position_mm();
            if (got - expected).abs() > PLANE_TOL_MM {
                return Err(SequenceError::NotAlternating { index: i, got_mm: got, expected_mm: expected });
            }
            let t = frame.timestamp_ms().ok_or(SequenceError::MissingTimestamp(i))?;
            if t <= prev_t {
                return Err(SequenceError::NonMonotonicTime(i));
            }
            if i > 0 {
                let period = t - prev_t;
                let tol = if strict_timing { 1e-9 } else { FRAME_PERIOD_MS * FRAME_PERIOD_TOL };
                if (period - FRAME_PERIOD_MS).abs() > tol {
                    return Err(SequenceError::BadFramePeriod {
                        index: i,
                        got_ms: period,
                        nominal_ms: FRAME_PERIOD_MS,
                        tol_pct: FRAME_PERIOD_TOL * 100.0,
                    });
                }
            }
            prev_t = t;
        }
        Ok(())
    }
}

/// Splits an interleaved sequence into (navigator, label) pairs in temporal
/// order: pair `i` is `(frames[2i], frames[2i+1])`. A trailing unpaired
/// navigator is dropped with a warning.
pub fn pair_frames(seq: &InterleavedSequence) -> Result<Vec<(Slice2D, Slice2D)>, SequenceError> {
    seq.validate(false)?;
    if seq.frames.len() % 2 != 0 {
        log::warn!(
            "interleaved sequence has odd frame count {}; dropping trailing navigator",
            seq.frames.len()
        );
    }
    Ok(seq
        .frames
        .chunks_exact(2)
        .map(|pair| (pair[0].clone(), pair[1].clone()))
        .collect())
}
