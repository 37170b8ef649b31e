//! Core library: segmented scenes, point-set metrics, the stability oracle,
//! the two-stage placement pipeline, synthetic dataset generation, antipodal
//! grasping, and manipulation-graph construction.

pub mod metrics;
pub mod primitives;
pub mod stability;
pub mod scene;
