//! Synthesis and evaluation engine for 3D myotube microscopy.
//!
//! The crate is organized along the data flow of a synthetic dataset:
//!
//! * [`geometry`] samples parametric myotube models and assembles scenes.
//! * [`voxelize`] rasterizes a scene into instance labels and a centerline
//!   (skeleton) channel.
//! * [`render`] turns labels into a degraded fluorescence stack.
//! * [`watershed`] separates instances from foreground/centerline
//!   probability volumes.
//! * [`metrics`] scores predictions against sparse annotations.
//! * [`io`] persists volumes, manifests and configs.
//!
//! All randomness flows through [`rng::Stream`], a counter-based generator
//! keyed by purpose and index, so results never depend on thread count.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod render;
pub mod rng;
pub mod vec3;
pub mod volume;
pub mod voxelize;
pub mod watershed;

pub use error::{Error, Result};
pub use vec3::Vec3;
pub use volume::{LabelVolume, ProbabilityVolume, Volume};
