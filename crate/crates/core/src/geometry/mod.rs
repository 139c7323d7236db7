//! Parametric myotube models and scene assembly.

pub mod chebyshev;
pub mod config;
pub mod model;
pub mod scene;
pub mod thickness;

pub use chebyshev::{chebyshev_t, ChebyshevSeries};
pub use config::{DatasetConfig, GeometryRanges, IntRange, Range, SceneConfig};
pub use model::{Branch, EllipsoidFeature, EllipsoidKind, MyotubeModel};
pub use scene::{add_branch, build_scene, place_ellipsoids, sample_model, Scene};
pub use thickness::ThicknessProfile;
