//! In-memory image types: 2D slices and 3D volumes with scanner geometry.

use ndarray::{Array2, Array3};

use super::geometry::Geometry;

/// A 2D image with physical placement. `plane_offset_mm` is the signed
/// sagittal distance of the slice plane from the subject's navigator plane,
/// when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub pixels: Array2<f32>,
    pub geometry: Geometry,
    pub plane_offset_mm: Option<f64>,
}

impl Slice2D {
    pub fn new(pixels: Array2<f32>, geometry: Geometry) -> Self {
        Slice2D { pixels, geometry, plane_offset_mm: None }
    }

    pub fn with_plane_offset(mut self, offset_mm: f64) -> Self {
        self.plane_offset_mm = Some(offset_mm);
        self
    }

    pub fn timestamp_ms(&self) -> Option<f64> {
        self.geometry.timestamp_ms
    }

    /// Scanner position of the slice plane along its normal (image axis 0).
    pub fn plane_position_mm(&self) -> f64 {
        let o = self.geometry.origin_mm;
        (0..3).map(|r| self.geometry.direction[r][0] * o[r]).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.pixels.iter().all(|v| v.is_finite())
    }
}

/// A 3D image with scanner geometry, stored as (sagittal index, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    pub voxels: Array3<f32>,
    pub geometry: Geometry,
}

impl Volume3D {
    pub fn new(voxels: Array3<f32>, geometry: Geometry) -> Self {
        Volume3D { voxels, geometry }
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.voxels.shape();
        [s[0], s[1], s[2]]
    }

    pub fn all_finite(&self) -> bool {
        self.voxels.iter().all(|v| v.is_finite())
    }
}
