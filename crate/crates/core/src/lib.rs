//! Prediction of 3D liver MRI volumes from a single live 2D navigator slice,
//! and retrospective 4D reconstruction from navigator sequences.
//!
//! The pipeline is organised as:
//!
//! - [`dataio`] — scanner-coordinate geometry, canonical resampling grids,
//!   the on-disk dataset layout and DICOM import.
//! - [`phantom`] — a synthetic breathing-motion subject generator with
//!   analytic ground truth, used as the oracle for desk-scale verification.
//! - [`preprocess`] — per-subject intensity whitening, spatial augmentation
//!   and assembly of the 3-channel training samples.
//! - [`model`] — the U-Net slice predictor (CPU, f32, BLAS-backed).
//! - [`training`] — the per-subject training loop (MSE loss, Adam).
//! - [`reconstruct`] — batched volume inference and 4D export.
//! - [`evaluate`] — target registration error, breathing-cycle selection,
//!   loss-vs-distance profiles and the training-size ablation harness.

// Pull in the BLAS implementation for ndarray's matrix products.
extern crate blas_src;

pub mod dataio;
pub mod evaluate;
pub mod model;
pub mod phantom;
pub mod preprocess;
pub mod reconstruct;
pub mod training;

pub use dataio::{Geometry, InterleavedSequence, Slice2D, Volume3D};
