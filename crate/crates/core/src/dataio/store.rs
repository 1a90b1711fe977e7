//! On-disk array format: raw little-endian float32 (C order) plus a JSON
//! sidecar describing shape and scanner geometry.
//!
//! An image `name` is stored as `name.raw` + `name.json`. The sidecar
//! fields are `shape`, `spacing_mm`, `origin_mm`, `direction` (9 floats,
//! row-major), `timestamp_ms` (number or null) and `plane_offset_mm`
//! (number or null).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Geometry;
use super::image::{Slice2D, Volume3D};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("sidecar parse error on {path}: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
    #[error("{path}: raw payload holds {got} values but sidecar shape {shape:?} needs {want}")]
    ShapeMismatch { path: PathBuf, got: usize, want: usize, shape: Vec<usize> },
    #[error("{path}: non-finite pixel values")]
    NonFinite { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Vec<usize>,
    pub spacing_mm: Vec<f64>,
    pub origin_mm: Vec<f64>,
    pub direction: Vec<f64>,
    pub timestamp_ms: Option<f64>,
    pub plane_offset_mm: Option<f64>,
}

impl Sidecar {
    fn from_geometry(shape: &[usize], g: &Geometry, plane_offset_mm: Option<f64>) -> Self {
        Sidecar {
            shape: shape.to_vec(),
            spacing_mm: g.spacing_mm.to_vec(),
            origin_mm: g.origin_mm.to_vec(),
            direction: g.direction_flat().to_vec(),
            timestamp_ms: g.timestamp_ms,
            plane_offset_mm,
        }
    }

    fn geometry(&self) -> Geometry {
        let mut flat = [0.0f64; 9];
        flat.copy_from_slice(&self.direction);
        let mut spacing = [1.0f64; 3];
        spacing.copy_from_slice(&self.spacing_mm);
        let mut origin = [0.0f64; 3];
        origin.copy_from_slice(&self.origin_mm);
        Geometry {
            origin_mm: origin,
            spacing_mm: spacing,
            direction: Geometry::direction_from_flat(&flat),
            timestamp_ms: self.timestamp_ms,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn write_raw(path: &Path, data: &[f32]) -> Result<(), StoreError> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))
}

fn read_raw(path: &Path) -> Result<Vec<f32>, StoreError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), StoreError> {
    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|source| StoreError::Sidecar { path: path.to_path_buf(), source })?;
    fs::write(path, json).map_err(io_err(path))
}

fn read_sidecar(path: &Path) -> Result<Sidecar, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| StoreError::Sidecar { path: path.to_path_buf(), source })
}

/// Writes `stem.raw` and `stem.json` for a slice.
pub fn write_slice(stem: &Path, slice: &Slice2D) -> Result<(), StoreError> {
    if !slice.all_finite() {
        return Err(StoreError::NonFinite { path: stem.to_path_buf() });
    }
    let shape = [slice.pixels.nrows(), slice.pixels.ncols()];
    let sidecar = Sidecar::from_geometry(&shape, &slice.geometry, slice.plane_offset_mm);
    write_raw(&stem.with_extension("raw"), slice.pixels.as_slice().unwrap())?;
    write_sidecar(&stem.with_extension("json"), &sidecar)
}

pub fn read_slice(stem: &Path) -> Result<Slice2D, StoreError> {
    let sidecar = read_sidecar(&stem.with_extension("json"))?;
    let data = read_raw(&stem.with_extension("raw"))?;
    let want: usize = sidecar.shape.iter().product();
    if sidecar.shape.len() != 2 || data.len() != want {
        return Err(StoreError::ShapeMismatch {
            path: stem.to_path_buf(),
            got: data.len(),
            want,
            shape: sidecar.shape.clone(),
        });
    }
    let pixels = Array2::from_shape_vec((sidecar.shape[0], sidecar.shape[1]), data).unwrap();
    Ok(Slice2D {
        pixels,
        geometry: sidecar.geometry(),
        plane_offset_mm: sidecar.plane_offset_mm,
    })
}

/// Writes `stem.raw` and `stem.json` for a volume.
pub fn write_volume(stem: &Path, volume: &Volume3D) -> Result<(), StoreError> {
    if !volume.all_finite() {
        return Err(StoreError::NonFinite { path: stem.to_path_buf() });
    }
    let shape = volume.shape();
    let sidecar = Sidecar::from_geometry(&shape, &volume.geometry, None);
    write_raw(&stem.with_extension("raw"), volume.voxels.as_slice().unwrap())?;
    write_sidecar(&stem.with_extension("json"), &sidecar)
}

pub fn read_volume(stem: &Path) -> Result<Volume3D, StoreError> {
    let sidecar = read_sidecar(&stem.with_extension("json"))?;
    let data = read_raw(&stem.with_extension("raw"))?;
    let want: usize = sidecar.shape.iter().product();
    if sidecar.shape.len() != 3 || data.len() != want {
        return Err(StoreError::ShapeMismatch {
            path: stem.to_path_buf(),
            got: data.len(),
            want,
            shape: sidecar.shape.clone(),
        });
    }
    let voxels =
        Array3::from_shape_vec((sidecar.shape[0], sidecar.shape[1], sidecar.shape[2]), data).unwrap();
    Ok(Volume3D { voxels, geometry: sidecar.geometry() })
}
