//! lsdefect — a defect inspection toolkit for line/space SEM imagery.
//!
//! The pipeline stages are:
//!
//! 1. **synth** – synthetic line/space pattern generation with injected
//!    defect instances and exact ground-truth polygons.
//! 2. **annot** – polygon annotations: Labelme ingestion, rasterization,
//!    COCO export, augmentation.
//! 3. **segment** – pattern estimation plus a rule-based reference segmentor
//!    for the six defect classes; also reads/writes the prediction-file
//!    format so an external model can plug in.
//! 4. **eval** – COCO-style AP50 per class (box and mask) and mAP.
//! 5. **report** – per-instance morphometry, the central CSV, and per-class
//!    segregated image folders.
//!
//! The `kernels` module holds the geometry primitives these stages share:
//! box/mask IoU, NMS, ROI-Align and ROI-Pool.

pub mod annot;
pub mod defect;
pub mod error;
pub mod eval;
pub mod image;
pub mod kernels;
pub mod mask;
pub mod report;
pub mod rules;
pub mod segment;
pub mod synth;

pub use defect::DefectClass;
pub use error::{Error, Result};
pub use image::GrayImage;
pub use mask::{rle_decode, rle_encode, BinaryMask, RleMask};
