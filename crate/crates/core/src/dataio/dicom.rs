//! DICOM series import.
//!
//! Reads one series from a directory of DICOM files, classifies it as a
//! volume stack, a navigator-only reference sequence or an interleaved
//! navigator/data sequence, and converts geometry from the standard tags:
//! ImagePositionPatient (0020,0032), ImageOrientationPatient (0020,0037),
//! PixelSpacing (0028,0030), SliceThickness (0018,0050), AcquisitionTime
//! (0008,0032), SeriesInstanceUID (0020,000E).
//!
//! Our image axes are (plane normal, rows, columns); the normal is the
//! cross product of the row-axis and column-axis cosines.

use std::path::{Path, PathBuf};

use dicom_core::Tag;
use dicom_object::open_file;
use ndarray::Array2;
use thiserror::Error;

use super::geometry::Geometry;
use super::image::{Slice2D, Volume3D};
use super::sequence::{InterleavedSequence, PLANE_TOL_MM};

pub const TAG_IMAGE_POSITION: Tag = Tag(0x0020, 0x0032);
pub const TAG_IMAGE_ORIENTATION: Tag = Tag(0x0020, 0x0037);
pub const TAG_PIXEL_SPACING: Tag = Tag(0x0028, 0x0030);
pub const TAG_SLICE_THICKNESS: Tag = Tag(0x0018, 0x0050);
pub const TAG_ACQUISITION_TIME: Tag = Tag(0x0008, 0x0032);
pub const TAG_SERIES_UID: Tag = Tag(0x0020, 0x000E);
pub const TAG_ROWS: Tag = Tag(0x0028, 0x0010);
pub const TAG_COLUMNS: Tag = Tag(0x0028, 0x0011);
pub const TAG_PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

#[derive(Debug, Error)]
pub enum DicomImportError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: missing or malformed tag {tag_name} {tag}")]
    MissingTag { path: PathBuf, tag: Tag, tag_name: &'static str },
    #[error("directory {0} holds no DICOM files")]
    EmptyDirectory(PathBuf),
    #[error("mixed series: found series UIDs {0:?}")]
    MixedSeries(Vec<String>),
    #[error("series has {n_planes} distinct planes but repeated time points; cannot classify")]
    Unclassifiable { n_planes: usize },
    #[error("series alternates between more than two planes")]
    TooManyPlanes,
}

/// A classified DICOM series.
#[derive(Debug)]
pub enum ImportedSeries {
    Volume(Volume3D),
    /// All frames in one plane, ordered by acquisition time.
    Reference(Vec<Slice2D>),
    Interleaved(InterleavedSequence),
}

struct RawFrame {
    slice: Slice2D,
    time_ms: f64,
    plane_pos: f64,
}

fn parse_tm_to_ms(text: &str) -> Option<f64> {
    // TM format HHMMSS.FFFFFF
    let text = text.trim();
    if text.len() < 6 {
        return None;
    }
    let h: f64 = text.get(0..2)?.parse().ok()?;
    let m: f64 = text.get(2..4)?.parse().ok()?;
    let s: f64 = text.get(4..)?.parse().ok()?;
    Some(((h * 60.0 + m) * 60.0 + s) * 1000.0)
}

fn read_frame(path: &Path) -> Result<(RawFrame, String), DicomImportError> {
    let obj = open_file(path).map_err(|e| DicomImportError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;

    let missing = |tag: Tag, tag_name: &'static str| DicomImportError::MissingTag {
        path: path.to_path_buf(),
        tag,
        tag_name,
    };

    let multi_f64 = |tag: Tag, tag_name: &'static str, n: usize| -> Result<Vec<f64>, DicomImportError> {
        let v = obj
            .element(tag)
            .map_err(|_| missing(tag, tag_name))?
            .to_multi_float64()
            .map_err(|_| missing(tag, tag_name))?;
        if v.len() != n {
            return Err(missing(tag, tag_name));
        }
        Ok(v)
    };

    let ipp = multi_f64(TAG_IMAGE_POSITION, "ImagePositionPatient", 3)?;
    let iop = multi_f64(TAG_IMAGE_ORIENTATION, "ImageOrientationPatient", 6)?;
    let spacing = multi_f64(TAG_PIXEL_SPACING, "PixelSpacing", 2)?;
    let thickness = obj
        .element(TAG_SLICE_THICKNESS)
        .map_err(|_| missing(TAG_SLICE_THICKNESS, "SliceThickness"))?
        .to_float64()
        .map_err(|_| missing(TAG_SLICE_THICKNESS, "SliceThickness"))?;
    let time_ms = obj
        .element(TAG_ACQUISITION_TIME)
        .ok()
        .and_then(|e| e.to_str().ok().map(|s| s.to_string()))
        .and_then(|s| parse_tm_to_ms(&s))
        .ok_or_else(|| missing(TAG_ACQUISITION_TIME, "AcquisitionTime"))?;
    let series_uid = obj
        .element(TAG_SERIES_UID)
        .map_err(|_| missing(TAG_SERIES_UID, "SeriesInstanceUID"))?
        .to_str()
        .map_err(|_| missing(TAG_SERIES_UID, "SeriesInstanceUID"))?
        .trim_end_matches('\0')
        .trim()
        .to_string();

    let rows = obj
        .element(TAG_ROWS)
        .map_err(|_| missing(TAG_ROWS, "Rows"))?
        .uint16()
        .map_err(|_| missing(TAG_ROWS, "Rows"))? as usize;
    let cols = obj
        .element(TAG_COLUMNS)
        .map_err(|_| missing(TAG_COLUMNS, "Columns"))?
        .uint16()
        .map_err(|_| missing(TAG_COLUMNS, "Columns"))? as usize;
    let pixels_u16 = obj
        .element(TAG_PIXEL_DATA)
        .map_err(|_| missing(TAG_PIXEL_DATA, "PixelData"))?
        .to_multi_int::<u16>()
        .map_err(|_| missing(TAG_PIXEL_DATA, "PixelData"))?;
    if pixels_u16.len() != rows * cols {
        return Err(missing(TAG_PIXEL_DATA, "PixelData"));
    }
    let pixels = Array2::from_shape_vec((rows, cols), pixels_u16.iter().map(|&v| v as f32).collect())
        .unwrap();

    // DICOM: IOP = (row cosines, column cosines); the row cosines point
    // along increasing column index. Our axis 1 is rows, axis 2 columns.
    let row_cos = [iop[0], iop[1], iop[2]];
    let col_cos = [iop[3], iop[4], iop[5]];
    let normal = cross(col_cos, row_cos);
    let direction = [
        [normal[0], col_cos[0], row_cos[0]],
        [normal[1], col_cos[1], row_cos[1]],
        [normal[2], col_cos[2], row_cos[2]],
    ];
    let geometry = Geometry {
        origin_mm: [ipp[0], ipp[1], ipp[2]],
        spacing_mm: [thickness, spacing[0], spacing[1]],
        direction,
        timestamp_ms: Some(time_ms),
    };
    let plane_pos = (0..3).map(|r| normal[r] * ipp[r]).sum();
    Ok((
        RawFrame { slice: Slice2D::new(pixels, geometry), time_ms, plane_pos },
        series_uid,
    ))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Imports the single series stored in `directory`.
pub fn import_dicom_series(directory: &Path) -> Result<ImportedSeries, DicomImportError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(directory)
        .map_err(|e| DicomImportError::Read { path: directory.to_path_buf(), message: e.to_string() })?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DicomImportError::EmptyDirectory(directory.to_path_buf()));
    }

    let mut frames = Vec::new();
    let mut uids: Vec<String> = Vec::new();
    for path in &paths {
        let (frame, uid) = read_frame(path)?;
        if !uids.contains(&uid) {
            uids.push(uid);
        }
        frames.push(frame);
    }
    if uids.len() > 1 {
        return Err(DicomImportError::MixedSeries(uids));
    }

    frames.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms));

    // Cluster plane positions with a 0.5 mm tolerance.
    let mut planes: Vec<f64> = Vec::new();
    let mut assignment = Vec::with_capacity(frames.len());
    for f in &frames {
        match planes.iter().position(|&p| (p - f.plane_pos).abs() <= PLANE_TOL_MM) {
            Some(i) => assignment.push(i),
            None => {
                planes.push(f.plane_pos);
                assignment.push(planes.len() - 1);
            }
        }
    }

    match planes.len() {
        1 => Ok(ImportedSeries::Reference(frames.into_iter().map(|f| f.slice).collect())),
        2 => {
            let alternating = assignment.windows(2).all(|w| w[0] != w[1]);
            if !alternating {
                return Err(DicomImportError::Unclassifiable { n_planes: 2 });
            }
            let nav = planes[assignment[0]];
            let data = planes[1 - assignment[0]];
            Ok(ImportedSeries::Interleaved(InterleavedSequence {
                frames: frames.into_iter().map(|f| f.slice).collect(),
                navigator_offset_mm: nav,
                data_offset_mm: data,
            }))
        }
        _ => {
            // A stack: every plane visited exactly once.
            let mut seen = vec![0usize; planes.len()];
            for &a in &assignment {
                seen[a] += 1;
            }
            if seen.iter().any(|&c| c != 1) {
                return Err(DicomImportError::Unclassifiable { n_planes: planes.len() });
            }
            let mut ordered = frames;
            ordered.sort_by(|a, b| a.plane_pos.total_cmp(&b.plane_pos));
            Ok(ImportedSeries::Volume(stack_to_volume(ordered)))
        }
    }
}

fn stack_to_volume(ordered: Vec<RawFrame>) -> Volume3D {
    let n = ordered.len();
    let (rows, cols) = ordered[0].slice.pixels.dim();
    let mut voxels = ndarray::Array3::<f32>::zeros((n, rows, cols));
    for (i, f) in ordered.iter().enumerate() {
        voxels.index_axis_mut(ndarray::Axis(0), i).assign(&f.slice.pixels);
    }
    let first = &ordered[0].slice.geometry;
    let mut geometry = first.clone();
    geometry.timestamp_ms = None;
    if n > 1 {
        // Inter-slice pitch from the positions, not SliceThickness.
        let pitch = (ordered[n - 1].plane_pos - ordered[0].plane_pos) / (n as f64 - 1.0);
        geometry.spacing_mm[0] = pitch;
    }
    Volume3D { voxels, geometry }
}

/// Minimal synthetic MR series writer used to verify the importer by a
/// write-then-read round trip. Not a general DICOM writer.
pub mod synthetic {
    use super::*;
    use dicom_core::value::PrimitiveValue;
    use dicom_core::{DataElement, VR};
    use dicom_object::{FileMetaTableBuilder, InMemDicomObject};

    pub struct SyntheticFrame {
        pub pixels: Array2<u16>,
        pub position_mm: [f64; 3],
        /// (row cosines, column cosines), DICOM order.
        pub orientation: [f64; 6],
        /// (between-rows, between-columns) spacing in mm.
        pub pixel_spacing_mm: [f64; 2],
        pub slice_thickness_mm: f64,
        pub acquisition_time: String,
    }

    fn ds(values: &[f64]) -> String {
        values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join("\\")
    }

    /// Writes `frames` as `IM_####.dcm` files of one series into `dir`.
    pub fn write_series(
        dir: &Path,
        series_uid: &str,
        frames: &[SyntheticFrame],
    ) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            let path = dir.join(format!("IM_{i:04}.dcm"));
            let (rows, cols) = f.pixels.dim();
            let mut bytes = Vec::with_capacity(rows * cols * 2);
            for v in f.pixels.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }

            let mut obj = InMemDicomObject::new_empty();
            let put_str = |obj: &mut InMemDicomObject, tag, vr, s: String| {
                obj.put(DataElement::new(tag, vr, PrimitiveValue::from(s)));
            };
            put_str(&mut obj, Tag(0x0008, 0x0016), VR::UI, "1.2.840.10008.5.1.4.1.1.4".into());
            put_str(&mut obj, Tag(0x0008, 0x0018), VR::UI, format!("{series_uid}.{i}"));
            put_str(&mut obj, TAG_SERIES_UID, VR::UI, series_uid.into());
            put_str(&mut obj, TAG_ACQUISITION_TIME, VR::TM, f.acquisition_time.clone());
            put_str(&mut obj, TAG_IMAGE_POSITION, VR::DS, ds(&f.position_mm));
            put_str(&mut obj, TAG_IMAGE_ORIENTATION, VR::DS, ds(&f.orientation));
            put_str(&mut obj, TAG_PIXEL_SPACING, VR::DS, ds(&f.pixel_spacing_mm));
            put_str(&mut obj, TAG_SLICE_THICKNESS, VR::DS, ds(&[f.slice_thickness_mm]));
            obj.put(DataElement::new(Tag(0x0020, 0x0013), VR::IS, PrimitiveValue::from(format!("{}", i + 1))));
            obj.put(DataElement::new(TAG_ROWS, VR::US, PrimitiveValue::from(rows as u16)));
            obj.put(DataElement::new(TAG_COLUMNS, VR::US, PrimitiveValue::from(cols as u16)));
            obj.put(DataElement::new(Tag(0x0028, 0x0002), VR::US, PrimitiveValue::from(1u16)));
            put_str(&mut obj, Tag(0x0028, 0x0004), VR::CS, "MONOCHROME2".into());
            obj.put(DataElement::new(Tag(0x0028, 0x0100), VR::US, PrimitiveValue::from(16u16)));
            obj.put(DataElement::new(Tag(0x0028, 0x0101), VR::US, PrimitiveValue::from(16u16)));
            obj.put(DataElement::new(Tag(0x0028, 0x0102), VR::US, PrimitiveValue::from(15u16)));
            obj.put(DataElement::new(Tag(0x0028, 0x0103), VR::US, PrimitiveValue::from(0u16)));
            obj.put(DataElement::new(TAG_PIXEL_DATA, VR::OW, PrimitiveValue::from(bytes)));

            let meta = FileMetaTableBuilder::new()
                .transfer_syntax("1.2.840.10008.1.2.1")
                .media_storage_sop_class_uid("1.2.840.10008.5.1.4.1.1.4")
                .media_storage_sop_instance_uid(format!("{series_uid}.{i}"));
            let file_obj = obj
                .with_meta(meta)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            file_obj
                .write_to_file(&path)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            out.push(path);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::{write_series, SyntheticFrame};
    use super::*;
    use tempfile::tempdir;

    // Sagittal frame: rows along +y (anterior), columns along +z (superior)
    // in DICOM order IOP = (row cosines = column axis, col cosines = row axis).
    fn sagittal_frame(x_mm: f64, t: &str, fill: u16) -> SyntheticFrame {
        SyntheticFrame {
            pixels: ndarray::Array2::from_elem((16, 16), fill),
            position_mm: [x_mm, -10.0, 20.0],
            orientation: [0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            pixel_spacing_mm: [1.8, 1.8],
            slice_thickness_mm: 4.0,
            acquisition_time: t.into(),
        }
    }

    #[test]
    fn alternating_two_frame_series_is_interleaved_with_one_pair() {
        let dir = tempdir().unwrap();
        let frames = vec![
            sagittal_frame(0.0, "120000.000000", 10),
            sagittal_frame(4.0, "120000.166000", 20),
        ];
        write_series(dir.path(), "1.2.3.4", &frames).unwrap();
        match import_dicom_series(dir.path()).unwrap() {
            ImportedSeries::Interleaved(seq) => {
                assert_eq!(seq.n_pairs(), 1);
                assert_eq!(seq.navigator_offset_mm, 0.0);
                assert_eq!(seq.data_offset_mm, 4.0);
            }
            other => panic!("expected interleaved, got {other:?}"),
        }
    }

    #[test]
    fn constant_plane_series_is_reference() {
        let dir = tempdir().unwrap();
        let frames: Vec<_> = (0..4)
            .map(|i| sagittal_frame(0.0, &format!("1200{:02}.000000", i), i as u16))
            .collect();
        write_series(dir.path(), "1.2.3.5", &frames).unwrap();
        match import_dicom_series(dir.path()).unwrap() {
            ImportedSeries::Reference(frames) => {
                assert_eq!(frames.len(), 4);
                // Ordered by acquisition time.
                assert_eq!(frames[0].pixels[[0, 0]], 0.0);
                assert_eq!(frames[3].pixels[[0, 0]], 3.0);
            }
            other => panic!("expected reference, got {other:?}"),
        }
    }

    #[test]
    fn geometry_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let frame = SyntheticFrame {
            pixels: ndarray::Array2::from_elem((8, 12), 7u16),
            position_mm: [-13.75, 21.0625, -4.5],
            orientation: [0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            pixel_spacing_mm: [1.8, 1.8],
            slice_thickness_mm: 4.0,
            acquisition_time: "090102.500000".into(),
        };
        write_series(dir.path(), "1.2.3.6", &[frame]).unwrap();
        match import_dicom_series(dir.path()).unwrap() {
            ImportedSeries::Reference(frames) => {
                let g = &frames[0].geometry;
                assert_eq!(g.origin_mm, [-13.75, 21.0625, -4.5]);
                assert_eq!(g.spacing_mm, [4.0, 1.8, 1.8]);
                // normal = col_cos × row_cos = (0,1,0)×(0,0,1) = (1,0,0)
                assert_eq!(g.direction, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
                let t = ((9.0 * 60.0 + 1.0) * 60.0 + 2.5) * 1000.0;
                assert_eq!(g.timestamp_ms, Some(t));
                assert_eq!(frames[0].pixels.dim(), (8, 12));
                assert_eq!(frames[0].pixels[[0, 0]], 7.0);
            }
            other => panic!("expected reference, got {other:?}"),
        }
    }

    #[test]
    fn stack_series_is_volume_ordered_by_position() {
        let dir = tempdir().unwrap();
        let frames: Vec<_> = [8.0, 0.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| sagittal_frame(x, &format!("1200{:02}.000000", i), x as u16))
            .collect();
        write_series(dir.path(), "1.2.3.7", &frames).unwrap();
        match import_dicom_series(dir.path()).unwrap() {
            ImportedSeries::Volume(vol) => {
                assert_eq!(vol.shape(), [3, 16, 16]);
                assert_eq!(vol.voxels[[0, 0, 0]], 0.0);
                assert_eq!(vol.voxels[[2, 0, 0]], 8.0);
                assert_eq!(vol.geometry.spacing_mm[0], 4.0);
                assert_eq!(vol.geometry.origin_mm[0], 0.0);
            }
            other => panic!("expected volume, got {other:?}"),
        }
    }

    #[test]
    fn missing_tag_is_named() {
        let dir = tempdir().unwrap();
        write_series(dir.path(), "1.2.3.8", &[sagittal_frame(0.0, "120000.000000", 1)]).unwrap();
        // Strip PixelSpacing by rewriting the file without it.
        let path = dir.path().join("IM_0000.dcm");
        let mut obj = open_file(&path).unwrap();
        obj.remove_element(TAG_PIXEL_SPACING);
        obj.write_to_file(&path).unwrap();
        let err = import_dicom_series(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("PixelSpacing"), "error should name the tag: {msg}");
    }

    #[test]
    fn mixed_series_is_rejected() {
        let dir = tempdir().unwrap();
        write_series(dir.path(), "1.2.3.9", &[sagittal_frame(0.0, "120000.000000", 1)]).unwrap();
        let extra = dir.path().join("extra");
        write_series(&extra, "1.2.4.0", &[sagittal_frame(4.0, "120001.000000", 1)]).unwrap();
        std::fs::rename(extra.join("IM_0000.dcm"), dir.path().join("IM_0001.dcm")).unwrap();
        assert!(matches!(
            import_dicom_series(dir.path()),
            Err(DicomImportError::MixedSeries(_))
        ));
    }
}
