//! On-disk dataset layout.
//!
//! ```text
//! <root>/subject/<id>/
//!   subject.json                  subject metadata (navigator position, seed)
//!   stats.json                    per-subject whitening stats (written by preprocess)
//!   volume/volume.{raw,json}      static volume
//!   reference/frame_#####.{raw,json}
//!   interleaved/<offset_mm>/frame_#####.{raw,json}
//!   groundtruth/{signal,tracks,deformation}.json   phantom subjects only
//! ```
//!
//! `<offset_mm>` is the signed data-plane offset relative to the navigator
//! plane, formatted with one decimal (`+4.0`, `-12.0`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::image::{Slice2D, Volume3D};
use super::sequence::InterleavedSequence;
use super::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad metadata in {path}: {source}")]
    Meta { path: PathBuf, source: serde_json::Error },
    #[error("cannot parse plane offset from directory name {0:?}")]
    BadOffsetDir(String),
    #[error("subject {0} not found")]
    MissingSubject(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub id: String,
    pub navigator_x_mm: f64,
    pub seed: u64,
}

/// Paths of one subject inside a dataset root.
#[derive(Debug, Clone)]
pub struct SubjectPaths {
    pub dir: PathBuf,
}

pub fn offset_dir_name(offset_mm: f64) -> String {
    format!("{offset_mm:+.1}")
}

pub fn parse_offset_dir_name(name: &str) -> Result<f64, LayoutError> {
    name.parse::<f64>().map_err(|_| LayoutError::BadOffsetDir(name.to_string()))
}

impl SubjectPaths {
    pub fn new(root: &Path, id: &str) -> Self {
        SubjectPaths { dir: root.join("subject").join(id) }
    }

    pub fn meta(&self) -> PathBuf {
        self.dir.join("subject.json")
    }
    pub fn stats(&self) -> PathBuf {
        self.dir.join("stats.json")
    }
    pub fn volume_stem(&self) -> PathBuf {
        self.dir.join("volume").join("volume")
    }
    pub fn reference_dir(&self) -> PathBuf {
        self.dir.join("reference")
    }
    pub fn interleaved_root(&self) -> PathBuf {
        self.dir.join("interleaved")
    }
    pub fn interleaved_dir(&self, offset_mm: f64) -> PathBuf {
        self.interleaved_root().join(offset_dir_name(offset_mm))
    }
    pub fn groundtruth_dir(&self) -> PathBuf {
        self.dir.join("groundtruth")
    }

    pub fn write_meta(&self, meta: &SubjectMeta) -> Result<(), LayoutError> {
        fs::create_dir_all(&self.dir).map_err(|source| LayoutError::Io { path: self.dir.clone(), source })?;
        let path = self.meta();
        let json = serde_json::to_string_pretty(meta)
            .map_err(|source| LayoutError::Meta { path: path.clone(), source })?;
        fs::write(&path, json).map_err(|source| LayoutError::Io { path, source })
    }

    pub fn read_meta(&self) -> Result<SubjectMeta, LayoutError> {
        let path = self.meta();
        let text = fs::read_to_string(&path).map_err(|source| LayoutError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| LayoutError::Meta { path, source })
    }
}

pub fn frame_stem(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:05}"))
}

/// Writes an ordered frame list into `dir` as `frame_#####` stems.
pub fn write_frames(dir: &Path, frames: &[Slice2D]) -> Result<(), LayoutError> {
    fs::create_dir_all(dir).map_err(|source| LayoutError::Io { path: dir.to_path_buf(), source })?;
    for (i, f) in frames.iter().enumerate() {
        store::write_slice(&frame_stem(dir, i), f)?;
    }
    Ok(())
}

/// Reads all `frame_#####` stems of a directory in index order.
pub fn read_frames(dir: &Path) -> Result<Vec<Slice2D>, LayoutError> {
    let mut stems: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| LayoutError::Io { path: dir.to_path_buf(), source })?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .map(|p| p.with_extension(""))
        .collect();
    stems.sort();
    stems.iter().map(|stem| Ok(store::read_slice(stem)?)).collect()
}

pub fn write_subject_volume(paths: &SubjectPaths, volume: &Volume3D) -> Result<(), LayoutError> {
    let stem = paths.volume_stem();
    let dir = stem.parent().unwrap();
    fs::create_dir_all(dir).map_err(|source| LayoutError::Io { path: dir.to_path_buf(), source })?;
    Ok(store::write_volume(&stem, volume)?)
}

pub fn read_subject_volume(paths: &SubjectPaths) -> Result<Volume3D, LayoutError> {
    Ok(store::read_volume(&paths.volume_stem())?)
}

pub fn write_interleaved(paths: &SubjectPaths, seq: &InterleavedSequence) -> Result<(), LayoutError> {
    let rel = seq.data_offset_mm - seq.navigator_offset_mm;
    write_frames(&paths.interleaved_dir(rel), &seq.frames)
}

/// Loads one interleaved sequence given its offset directory.
pub fn read_interleaved(
    paths: &SubjectPaths,
    navigator_x_mm: f64,
    offset_dir: &Path,
) -> Result<InterleavedSequence, LayoutError> {
    let name = offset_dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| LayoutError::BadOffsetDir(offset_dir.display().to_string()))?;
    let rel = parse_offset_dir_name(name)?;
    let frames = read_frames(offset_dir)?;
    let _ = paths;
    Ok(InterleavedSequence {
        frames,
        navigator_offset_mm: navigator_x_mm,
        data_offset_mm: navigator_x_mm + rel,
    })
}

/// All interleaved plane offsets (relative, mm) present for a subject,
/// sorted ascending.
pub fn list_interleaved_offsets(paths: &SubjectPaths) -> Result<Vec<f64>, LayoutError> {
    let root = paths.interleaved_root();
    let mut offsets = Vec::new();
    for entry in fs::read_dir(&root).map_err(|source| LayoutError::Io { path: root.clone(), source })? {
        let entry = entry.map_err(|source| LayoutError::Io { path: root.clone(), source })?;
        if entry.path().is_dir() {
            offsets.push(parse_offset_dir_name(&entry.file_name().to_string_lossy())?);
        }
    }
    offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(offsets)
}

/// Subject ids present under `<root>/subject/`, sorted.
pub fn list_subjects(root: &Path) -> Result<Vec<String>, LayoutError> {
    let dir = root.join("subject");
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|source| LayoutError::Io { path: dir.clone(), source })? {
        let entry = entry.map_err(|source| LayoutError::Io { path: dir.clone(), source })?;
        if entry.path().is_dir() {
            ids.push(entry.file_name().to_string_lossy().to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

/// A fully loaded subject.
#[derive(Debug, Clone)]
pub struct Subject {
    pub meta: SubjectMeta,
    pub volume: Volume3D,
    pub reference: Vec<Slice2D>,
    pub interleaved: Vec<InterleavedSequence>,
}

pub fn load_subject(root: &Path, id: &str) -> Result<Subject, LayoutError> {
    let paths = SubjectPaths::new(root, id);
    if !paths.dir.is_dir() {
        return Err(LayoutError::MissingSubject(id.to_string()));
    }
    let meta = paths.read_meta()?;
    let volume = read_subject_volume(&paths)?;
    let reference = read_frames(&paths.reference_dir())?;
    let mut interleaved = Vec::new();
    for offset in list_interleaved_offsets(&paths)? {
        let dir = paths.interleaved_dir(offset);
        interleaved.push(read_interleaved(&paths, meta.navigator_x_mm, &dir)?);
    }
    Ok(Subject { meta, volume, reference, interleaved })
}
