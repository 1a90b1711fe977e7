//! Resampling onto target grids in scanner coordinates.
//!
//! Interpolation is bilinear (2D) / trilinear (3D); samples falling outside
//! the source support are set to 0. Every output pixel centre keeps its
//! scanner-coordinate definition: the source is evaluated exactly at the
//! physical position of the target sample.

use ndarray::{Array2, Array3};
use thiserror::Error;

use super::geometry::{Geometry, GeometryError, SliceGrid, VolumeGrid, CANONICAL_SPACING_MM};
use super::image::{Slice2D, Volume3D};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("plane offset {offset_mm} mm is outside the volume extent [{min_mm}, {max_mm}] mm")]
    PlaneOutOfBounds { offset_mm: f64, min_mm: f64, max_mm: f64 },
}

fn bilinear(pixels: &ndarray::ArrayView2<f32>, u: f64, v: f64) -> f32 {
    let (rows, cols) = pixels.dim();
    if u < 0.0 || v < 0.0 || u > (rows - 1) as f64 || v > (cols - 1) as f64 {
        return 0.0;
    }
    let i0 = (u.floor() as usize).min(rows.saturating_sub(2));
    let j0 = (v.floor() as usize).min(cols.saturating_sub(2));
    let du = (u - i0 as f64) as f32;
    let dv = (v - j0 as f64) as f32;
    let i1 = (i0 + 1).min(rows - 1);
    let j1 = (j0 + 1).min(cols - 1);
    let p00 = pixels[[i0, j0]];
    let p01 = pixels[[i0, j1]];
    let p10 = pixels[[i1, j0]];
    let p11 = pixels[[i1, j1]];
    p00 * (1.0 - du) * (1.0 - dv) + p01 * (1.0 - du) * dv + p10 * du * (1.0 - dv) + p11 * du * dv
}

fn trilinear(voxels: &Array3<f32>, u: f64, v: f64, w: f64) -> f32 {
    let (ns, nr, nc) = voxels.dim();
    if u < 0.0 || v < 0.0 || w < 0.0
        || u > (ns - 1) as f64 || v > (nr - 1) as f64 || w > (nc - 1) as f64
    {
        return 0.0;
    }
    let i0 = (u.floor() as usize).min(ns.saturating_sub(2));
    let j0 = (v.floor() as usize).min(nr.saturating_sub(2));
    let k0 = (w.floor() as usize).min(nc.saturating_sub(2));
    let du = (u - i0 as f64) as f32;
    let dv = (v - j0 as f64) as f32;
    let dw = (w - k0 as f64) as f32;
    let i1 = (i0 + 1).min(ns - 1);
    let j1 = (j0 + 1).min(nr - 1);
    let k1 = (k0 + 1).min(nc - 1);
    let mut acc = 0.0f32;
    for (i, wi) in [(i0, 1.0 - du), (i1, du)] {
        for (j, wj) in [(j0, 1.0 - dv), (j1, dv)] {
            for (k, wk) in [(k0, 1.0 - dw), (k1, dw)] {
                acc += voxels[[i, j, k]] * wi * wj * wk;
            }
        }
    }
    acc
}

/// Resamples a slice onto `target`. The source is sampled in-plane: the
/// out-of-plane component of each target position is projected away, so the
/// target grid is expected to lie in the source plane.
pub fn resample_slice(slice: &Slice2D, target: &SliceGrid) -> Result<Slice2D, ResampleError> {
    slice.geometry.validate()?;
    target.geometry.validate()?;
    let [rows, cols] = target.shape;
    let src = slice.pixels.view();
    let mut out = Array2::<f32>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let p = target.geometry.index_to_mm([0.0, r as f64, c as f64]);
            let idx = slice.geometry.mm_to_index(p);
            out[[r, c]] = bilinear(&src, idx[1], idx[2]);
        }
    }
    let mut geometry = target.geometry.clone();
    geometry.timestamp_ms = slice.geometry.timestamp_ms;
    Ok(Slice2D { pixels: out, geometry, plane_offset_mm: slice.plane_offset_mm })
}

/// Resamples a volume onto `target` (trilinear).
pub fn resample_volume(volume: &Volume3D, target: &VolumeGrid) -> Result<Volume3D, ResampleError> {
    volume.geometry.validate()?;
    target.geometry.validate()?;
    let [ns, nr, nc] = target.shape;
    let mut out = Array3::<f32>::zeros((ns, nr, nc));
    for s in 0..ns {
        for r in 0..nr {
            for c in 0..nc {
                let p = target.geometry.index_to_mm([s as f64, r as f64, c as f64]);
                let idx = volume.geometry.mm_to_index(p);
                out[[s, r, c]] = trilinear(&volume.voxels, idx[0], idx[1], idx[2]);
            }
        }
    }
    Ok(Volume3D { voxels: out, geometry: target.geometry.clone() })
}

/// Extracts the sagittal slice of a canonical volume nearest to
/// `navigator_x_mm + plane_offset_mm`, snapping to the slice lattice.
/// The returned slice records `plane_offset_mm`.
pub fn extract_volume_slice(
    volume: &Volume3D,
    navigator_x_mm: f64,
    plane_offset_mm: f64,
) -> Result<Slice2D, ResampleError> {
    let x = navigator_x_mm + plane_offset_mm;
    let idx = volume_slice_index(volume, x).ok_or_else(|| {
        let ns = volume.shape()[0];
        let min = volume.geometry.index_to_mm([0.0, 0.0, 0.0])[0];
        ResampleError::PlaneOutOfBounds {
            offset_mm: plane_offset_mm,
            min_mm: min,
            max_mm: min + (ns - 1) as f64 * volume.geometry.spacing_mm[0],
        }
    })?;
    let pixels = volume.voxels.index_axis(ndarray::Axis(0), idx).to_owned();
    let geometry = Geometry {
        origin_mm: volume.geometry.index_to_mm([idx as f64, 0.0, 0.0]),
        spacing_mm: volume.geometry.spacing_mm,
        direction: volume.geometry.direction,
        timestamp_ms: None,
    };
    Ok(Slice2D { pixels, geometry, plane_offset_mm: Some(plane_offset_mm) })
}

/// Nearest slice index of the sagittal plane at scanner position `x_mm`,
/// or `None` when it falls outside the volume.
pub fn volume_slice_index(volume: &Volume3D, x_mm: f64) -> Option<usize> {
    // Project the requested plane position onto image axis 0.
    let g = &volume.geometry;
    let o_proj: f64 = (0..3).map(|r| g.direction[r][0] * g.origin_mm[r]).sum();
    let idx = ((x_mm - o_proj) / g.spacing_mm[0]).round();
    if idx < 0.0 || idx >= volume.shape()[0] as f64 {
        None
    } else {
        Some(idx as usize)
    }
}

/// Snaps a scanner x position to the canonical slice lattice step (1.8 mm).
pub fn snap_to_canonical_step(offset_mm: f64) -> f64 {
    (offset_mm / CANONICAL_SPACING_MM).round() * CANONICAL_SPACING_MM
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::geometry::{CANONICAL_SLICE_SHAPE, CANONICAL_VOLUME_SHAPE};
    use ndarray::Array2;

    fn canonical_slice_with(f: impl Fn(usize, usize) -> f32) -> Slice2D {
        let grid = SliceGrid::canonical(0.0, [0.0, 0.0]);
        let pixels = Array2::from_shape_fn((128, 128), |(r, c)| f(r, c));
        Slice2D::new(pixels, grid.geometry)
    }

    #[test]
    fn identity_resample_is_exact() {
        let slice = canonical_slice_with(|r, c| (r * 131 + c * 17 % 97) as f32);
        let target = SliceGrid::canonical(0.0, [0.0, 0.0]);
        let out = resample_slice(&slice, &target).unwrap();
        assert_eq!(out.pixels, slice.pixels);
    }

    #[test]
    fn constant_field_stays_constant_inside_support() {
        let slice = canonical_slice_with(|_, _| 7.25);
        // A smaller centred target grid lies strictly inside the support.
        let mut target = SliceGrid::canonical(0.0, [0.0, 0.0]);
        target.shape = [64, 64];
        let mut g = target.geometry.clone();
        g.origin_mm[1] += 32.0 * 1.8;
        g.origin_mm[2] += 32.0 * 1.8;
        target.geometry = g;
        let out = resample_slice(&slice, &target).unwrap();
        for v in out.pixels.iter() {
            assert!((v - 7.25).abs() < 1e-6);
        }
    }

    // 176×176 grid at 1.8 mm whose origin is shifted by one row spacing:
    // resampling onto it reproduces the input shifted by exactly one pixel.
    #[test]
    fn one_pixel_shift_matches_index_shift_oracle() {
        let n = 176usize;
        let geometry = Geometry::axis_aligned([0.0, 0.0, 0.0], [1.8, 1.8, 1.8]);
        let pixels =
            Array2::from_shape_fn((n, n), |(r, c)| ((r as f32 * 0.37).sin() + (c as f32 * 0.23).cos()));
        let slice = Slice2D::new(pixels.clone(), geometry.clone());

        let mut shifted = geometry.clone();
        shifted.origin_mm[1] += 1.8;
        let target = SliceGrid { shape: [n, n], geometry: shifted };
        let out = resample_slice(&slice, &target).unwrap();

        let range = 2.0f32;
        for r in 0..n - 1 {
            for c in 0..n {
                let expect = pixels[[r + 1, c]];
                let got = out.pixels[[r, c]];
                assert!(
                    (expect - got).abs() < 1e-5 * range,
                    "({r},{c}): {expect} vs {got}"
                );
            }
        }
        // The final row has no source support and must be zero-filled.
        for c in 0..n {
            assert_eq!(out.pixels[[n - 1, c]], 0.0);
        }
    }

    #[test]
    fn volume_identity_resample_is_exact() {
        let grid = VolumeGrid::canonical([0.0; 3]);
        let voxels = ndarray::Array3::from_shape_fn((209, 128, 128), |(s, r, c)| {
            (s as f32 * 0.11).sin() + (r as f32 * 0.07).cos() + c as f32 * 1e-3
        });
        let vol = Volume3D::new(voxels.clone(), grid.geometry.clone());
        let out = resample_volume(&vol, &grid).unwrap();
        assert_eq!(out.voxels, voxels);
    }

    // A 320×320×72 axial-style volume at 1.19×1.19×3.0 mm resamples to the
    // exact canonical shape, and a linear ramp stays linear in the interior.
    #[test]
    fn star_vibe_like_volume_resamples_to_canonical_shape_with_ramp_oracle() {
        // Input axes permuted relative to canonical: axis 0 = rows (y),
        // axis 1 = cols (z), axis 2 = slice (x). Direction columns map image
        // axes to scanner axes.
        let direction = [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        let spacing = [1.19, 1.19, 3.0];
        let shape_in = (320usize, 320usize, 72usize);
        let origin = [
            -(shape_in.2 as f64 - 1.0) / 2.0 * spacing[2],
            -(shape_in.0 as f64 - 1.0) / 2.0 * spacing[0],
            -(shape_in.1 as f64 - 1.0) / 2.0 * spacing[1],
        ];
        let geometry = Geometry { origin_mm: origin, spacing_mm: spacing, direction, timestamp_ms: None };
        // Ramp along scanner y: value = y position in mm.
        let voxels = ndarray::Array3::from_shape_fn(shape_in, |(i, _j, _k)| {
            (origin[1] + i as f64 * spacing[0]) as f32
        });
        let vol = Volume3D::new(voxels, geometry);
        let target = VolumeGrid::canonical([0.0; 3]);
        let out = resample_volume(&vol, &target).unwrap();
        assert_eq!(out.shape(), CANONICAL_VOLUME_SHAPE);

        // Interior oracle: resampled value equals the analytic ramp.
        let range = 320.0 * 1.19;
        let mut max_err = 0.0f64;
        for s in (20..190).step_by(23) {
            for r in 8..120 {
                for c in (8..120).step_by(7) {
                    let p = target.geometry.index_to_mm([s as f64, r as f64, c as f64]);
                    // Stay inside the input support.
                    let idx = vol.geometry.mm_to_index(p);
                    if idx[0] < 1.0 || idx[0] > 318.0 || idx[1] < 1.0 || idx[1] > 318.0
                        || idx[2] < 1.0 || idx[2] > 70.0 {
                        continue;
                    }
                    let got = out.voxels[[s, r, c]] as f64;
                    max_err = max_err.max((got - p[1]).abs());
                }
            }
        }
        assert!(max_err / range < 1e-4, "interior ramp error {max_err}");
    }

    #[test]
    fn double_resample_is_idempotent() {
        let slice = canonical_slice_with(|r, c| ((r * 7 + c * 13) % 61) as f32);
        // Off-lattice target exercises actual interpolation.
        let mut target = SliceGrid::canonical(0.0, [0.45, -0.913]);
        target.shape = CANONICAL_SLICE_SHAPE;
        let once = resample_slice(&slice, &target).unwrap();
        let twice = resample_slice(&once, &target).unwrap();
        let range = 60.0f32;
        let max = once
            .pixels
            .iter()
            .zip(twice.pixels.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max / range < 1e-6, "second pass changed data by {max}");
    }

    #[test]
    fn extract_slice_index_arithmetic() {
        let grid = VolumeGrid::canonical([0.0; 3]);
        let voxels = ndarray::Array3::from_shape_fn((209, 128, 128), |(s, _, _)| s as f32);
        let vol = Volume3D::new(voxels, grid.geometry.clone());
        let nav_x = 0.0;

        let at_nav = extract_volume_slice(&vol, nav_x, 0.0).unwrap();
        let origin_x = vol.geometry.origin_mm[0];
        let expect = ((nav_x - origin_x) / 1.8).round() as usize;
        assert_eq!(at_nav.pixels[[0, 0]] as usize, expect);
        assert_eq!(at_nav.plane_offset_mm, Some(0.0));

        // ±3 cm are round(60/1.8) = 33 slices apart. Each plane snaps to its
        // nearest index, so the delta depends on the navigator's phase on the
        // 1.8 mm lattice; at fractional index .4 both roundings cooperate.
        let nav_between = origin_x + 104.4 * 1.8;
        let left = extract_volume_slice(&vol, nav_between, 30.0).unwrap();
        let right = extract_volume_slice(&vol, nav_between, -30.0).unwrap();
        let delta = left.pixels[[0, 0]] - right.pixels[[0, 0]];
        assert_eq!(delta as i64, (60.0f64 / 1.8).round() as i64);

        assert!(extract_volume_slice(&vol, nav_x, 1e4).is_err());
    }
}
