//! Scanner-coordinate geometry of slices and volumes.
//!
//! All images carry their physical placement in a common scanner coordinate
//! system (millimetres). An image axis `a` with index `i_a` contributes
//! `direction[.., a] * spacing[a] * i_a` to the position of a sample, so
//!
//! `position(idx) = origin + D * (spacing ∘ idx)`
//!
//! with `D` orthonormal (columns are the image axes expressed in scanner
//! coordinates). Volumes are stored as (sagittal index, row, column); the
//! sagittal index increases toward the subject's left, so "4 mm to the
//! left" is a monotone index step. For 2D slices axis 0 is the plane
//! normal and axes 1/2 are rows/columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical in-plane slice shape after resampling: 128×128 pixels.
pub const CANONICAL_SLICE_SHAPE: [usize; 2] = [128, 128];
/// Canonical volume shape after resampling: 209 sagittal slices of 128×128.
pub const CANONICAL_VOLUME_SHAPE: [usize; 3] = [209, 128, 128];
/// Canonical isotropic voxel spacing in millimetres.
pub const CANONICAL_SPACING_MM: f64 = 1.8;

/// Tolerance for the orthonormality check of direction matrices.
pub const DIRECTION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("direction matrix is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("spacing must be positive, got {0:?}")]
    NonPositiveSpacing([f64; 3]),
}

/// Physical placement of an image grid in scanner coordinates.
///
/// `direction` is row-major: `direction[r][c]` is the scanner component `r`
/// of image axis `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub origin_mm: [f64; 3],
    pub spacing_mm: [f64; 3],
    pub direction: [[f64; 3]; 3],
    pub timestamp_ms: Option<f64>,
}

impl Geometry {
    /// Axis-aligned geometry (identity direction).
    pub fn axis_aligned(origin_mm: [f64; 3], spacing_mm: [f64; 3]) -> Self {
        Geometry {
            origin_mm,
            spacing_mm,
            direction: IDENTITY,
            timestamp_ms: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp_ms: f64) -> Self {
        self.timestamp_ms = Some(timestamp_ms);
        self
    }

    /// Checks orthonormality of the direction matrix and positivity of the
    /// spacing.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.spacing_mm.iter().any(|&s| s <= 0.0) {
            return Err(GeometryError::NonPositiveSpacing(self.spacing_mm));
        }
        let mut max_dev = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|r| self.direction[r][a] * self.direction[r][b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                max_dev = max_dev.max((dot - expect).abs());
            }
        }
        if max_dev > DIRECTION_TOL {
            return Err(GeometryError::NotOrthonormal(max_dev));
        }
        Ok(())
    }

    /// Scanner position (mm) of the sample at a continuous index.
    pub fn index_to_mm(&self, idx: [f64; 3]) -> [f64; 3] {
        let mut p = self.origin_mm;
        for (axis, &i) in idx.iter().enumerate() {
            let step = self.spacing_mm[axis] * i;
            for r in 0..3 {
                p[r] += self.direction[r][axis] * step;
            }
        }
        p
    }

    /// Continuous index of a scanner position. Inverse of [`index_to_mm`]
    /// for orthonormal directions (`D⁻¹ = Dᵀ`).
    ///
    /// [`index_to_mm`]: Geometry::index_to_mm
    pub fn mm_to_index(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [
            p[0] - self.origin_mm[0],
            p[1] - self.origin_mm[1],
            p[2] - self.origin_mm[2],
        ];
        let mut idx = [0.0f64; 3];
        for (axis, i) in idx.iter_mut().enumerate() {
            let proj: f64 = (0..3).map(|r| self.direction[r][axis] * d[r]).sum();
            *i = proj / self.spacing_mm[axis];
        }
        idx
    }

    /// Direction flattened row-major, the sidecar encoding.
    pub fn direction_flat(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.direction[r][c];
            }
        }
        out
    }

    pub fn direction_from_flat(flat: &[f64; 9]) -> [[f64; 3]; 3] {
        let mut d = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                d[r][c] = flat[r * 3 + c];
            }
        }
        d
    }
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Target grid for 2D resampling: shape plus placement.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGrid {
    pub shape: [usize; 2],
    pub geometry: Geometry,
}

impl SliceGrid {
    /// The canonical 128×128 / 1.8 mm grid in the sagittal plane `x_mm`,
    /// centred on `(center_y, center_z)`. Axis 0 of the geometry is the
    /// plane normal.
    pub fn canonical(x_mm: f64, center_yz: [f64; 2]) -> Self {
        let half = (CANONICAL_SLICE_SHAPE[0] as f64 - 1.0) / 2.0 * CANONICAL_SPACING_MM;
        SliceGrid {
            shape: CANONICAL_SLICE_SHAPE,
            geometry: Geometry::axis_aligned(
                [x_mm, center_yz[0] - half, center_yz[1] - half],
                [CANONICAL_SPACING_MM, CANONICAL_SPACING_MM, CANONICAL_SPACING_MM],
            ),
        }
    }
}

/// Target grid for 3D resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub shape: [usize; 3],
    pub geometry: Geometry,
}

impl VolumeGrid {
    /// The canonical 209×128×128 / 1.8 mm isotropic grid centred on
    /// `center_mm`.
    pub fn canonical(center_mm: [f64; 3]) -> Self {
        let half = |n: usize| (n as f64 - 1.0) / 2.0 * CANONICAL_SPACING_MM;
        VolumeGrid {
            shape: CANONICAL_VOLUME_SHAPE,
            geometry: Geometry::axis_aligned(
                [
                    center_mm[0] - half(CANONICAL_VOLUME_SHAPE[0]),
                    center_mm[1] - half(CANONICAL_VOLUME_SHAPE[1]),
                    center_mm[2] - half(CANONICAL_VOLUME_SHAPE[2]),
                ],
                [CANONICAL_SPACING_MM; 3],
            ),
        }
    }
}
