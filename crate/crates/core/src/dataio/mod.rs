//! Dataset model: geometry, canonical grids, resampling, the on-disk
//! layout and DICOM import.

pub mod dicom;
pub mod geometry;
pub mod image;
pub mod layout;
pub mod resample;
pub mod sequence;
pub mod store;

pub use geometry::{
    Geometry, GeometryError, SliceGrid, VolumeGrid, CANONICAL_SLICE_SHAPE, CANONICAL_SPACING_MM,
    CANONICAL_VOLUME_SHAPE,
};
pub use image::{Slice2D, Volume3D};
pub use layout::{Subject, SubjectMeta, SubjectPaths};
pub use resample::{extract_volume_slice, resample_slice, resample_volume, ResampleError};
pub use sequence::{pair_frames, InterleavedSequence, SequenceError, FRAME_PERIOD_MS};
pub use store::{read_slice, read_volume, write_slice, write_volume, StoreError};
