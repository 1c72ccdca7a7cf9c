//! Reconstruction of complete lumbar vertebrae from vertebral-body meshes:
//! endplate landmarks, landmark-frame affine registration of an atlas,
//! rigid ICP baselines, facet-joint alignment and evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anatomy;
pub mod cli;
pub mod config;
pub mod evaluation;
pub mod facet;
pub mod level;
pub mod mesh;
pub mod registration;
pub mod spine;
pub mod synthetic;
pub mod transform;
