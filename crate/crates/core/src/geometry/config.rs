//! Scene and dataset configuration, including the built-in presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::RenderConfig;
use crate::rng::StreamKey;
use crate::volume::{Shape, Spacing};
use crate::voxelize::OverlapPolicy;

/// Closed real interval, written as `[min, max]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

impl From<[f64; 2]> for Range {
    fn from(a: [f64; 2]) -> Self {
        Range::new(a[0], a[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.min, r.max]
    }
}

/// Closed integer interval, written as `[min, max]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

impl From<[usize; 2]> for IntRange {
    fn from(a: [usize; 2]) -> Self {
        IntRange::new(a[0], a[1])
    }
}

impl From<IntRange> for [usize; 2] {
    fn from(r: IntRange) -> Self {
        [r.min, r.max]
    }
}

/// Sampling ranges for every parameter of a myotube model.
///
/// Lengths are in world units (voxels at unit spacing); angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRanges {
    /// Chebyshev degree `K` of the lateral centerline series.
    pub degree: IntRange,
    /// Damping exponent; coefficient `k` is scaled by `(k+1)^-alpha`.
    pub alpha: Range,
    /// In-plane lateral deviation scale.
    pub amp_scale: Range,
    /// Out-of-plane (z) lateral deviation scale.
    pub amp_scale_z: Range,
    pub half_length: Range,
    /// Largest |z| component of the principal axis.
    pub axis_z_max: f64,
    /// Baseline radius (constant Chebyshev term of the thickness profile).
    pub radius: Range,
    pub radius_degree: IntRange,
    /// Scale of the non-constant thickness terms.
    pub radius_variation: Range,
    /// Sinusoid amplitude.
    pub gamma: Range,
    /// Sinusoid cycles per tube.
    pub delta: Range,
    pub r_min: f64,
    pub r_max: f64,
    /// Probability that a model carries branches at all.
    pub branch_probability: f64,
    pub branch_count: IntRange,
    /// Cone half-angle around the parent tangent, degrees.
    pub branch_angle_deg: Range,
    pub branch_length: Range,
    /// Radius fraction at the branch tip.
    pub branch_taper: Range,
    /// Number of hollow shaft bulges.
    pub hollow_count: IntRange,
    /// Minimum parametric gap between bulge centres.
    pub hollow_min_gap: f64,
    /// Bulge cross-section as a multiple of the local radius.
    pub bulge: Range,
    /// Bulge length `a` as a multiple of its cross-section `b`.
    pub hollow_aspect: Range,
    pub shell_fraction: Range,
    /// Cap length `a` as a multiple of the end radius.
    pub cap_a: Range,
    /// Cap cross-section `b = c` as a multiple of the end radius.
    pub cap_b: Range,
}

/// Everything needed to build and rasterize one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_instances: usize,
    /// `(Z, Y, X)`.
    pub grid_shape: Shape,
    /// `(sz, sy, sx)`.
    pub spacing: Spacing,
    pub overlap_policy: OverlapPolicy,
    /// Centerline channel radius `rho_c`, in world units.
    pub skeleton_radius: f64,
    pub geometry: GeometryRanges,
}

/// A dataset: `n_volumes` scenes sharing geometry, with `total_instances`
/// spread as evenly as possible over the volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub seed: u64,
    pub n_volumes: usize,
    pub total_instances: usize,
    pub grid_shape: Shape,
    pub spacing: Spacing,
    pub overlap_policy: OverlapPolicy,
    pub skeleton_radius: f64,
    pub geometry: GeometryRanges,
    pub render: RenderConfig,
}

fn check_range(path: &str, r: Range, positive: bool) -> Result<()> {
    if !(r.min.is_finite() && r.max.is_finite()) {
        return Err(Error::schema(path, "range bounds must be finite"));
    }
    if r.min > r.max {
        return Err(Error::schema(
            path,
            format!("minimum {} exceeds maximum {}", r.min, r.max),
        ));
    }
    if positive && r.min <= 0.0 {
        return Err(Error::schema(
            path,
            format!("range must be strictly positive, got [{}, {}]", r.min, r.max),
        ));
    }
    if !positive && r.min < 0.0 {
        return Err(Error::schema(
            path,
            format!("range must be non-negative, got [{}, {}]", r.min, r.max),
        ));
    }
    Ok(())
}

fn check_int_range(path: &str, r: IntRange) -> Result<()> {
    if r.min > r.max {
        return Err(Error::schema(
            path,
            format!("minimum {} exceeds maximum {}", r.min, r.max),
        ));
    }
    Ok(())
}

fn check(path: &str, ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::schema(path, message))
    }
}

impl GeometryRanges {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let p = |f: &str| format!("{prefix}.{f}");
        check_int_range(&p("degree"), self.degree)?;
        check_range(&p("alpha"), self.alpha, false)?;
        check_range(&p("amp_scale"), self.amp_scale, true)?;
        check_range(&p("amp_scale_z"), self.amp_scale_z, true)?;
        check_range(&p("half_length"), self.half_length, true)?;
        check(
            &p("axis_z_max"),
            (0.0..1.0).contains(&self.axis_z_max),
            "must lie in [0, 1)",
        )?;
        check_range(&p("radius"), self.radius, true)?;
        check_int_range(&p("radius_degree"), self.radius_degree)?;
        check_range(&p("radius_variation"), self.radius_variation, false)?;
        check_range(&p("gamma"), self.gamma, false)?;
        check_range(&p("delta"), self.delta, false)?;
        check(&p("r_min"), self.r_min > 0.0, "must be positive")?;
        check(
            &p("r_max"),
            self.r_max >= self.r_min,
            format!("must be at least r_min = {}", self.r_min),
        )?;
        check(
            &p("branch_probability"),
            (0.0..=1.0).contains(&self.branch_probability),
            "must lie in [0, 1]",
        )?;
        check_int_range(&p("branch_count"), self.branch_count)?;
        check_range(&p("branch_angle_deg"), self.branch_angle_deg, false)?;
        check(
            &p("branch_angle_deg"),
            self.branch_angle_deg.max < 90.0,
            "cone angle must stay below 90 degrees",
        )?;
        check_range(&p("branch_length"), self.branch_length, true)?;
        check_range(&p("branch_taper"), self.branch_taper, true)?;
        check(
            &p("branch_taper"),
            self.branch_taper.max <= 1.0,
            "taper fraction must lie in (0, 1]",
        )?;
        check_int_range(&p("hollow_count"), self.hollow_count)?;
        check(
            &p("hollow_min_gap"),
            self.hollow_min_gap >= 0.0 && self.hollow_min_gap.is_finite(),
            "must be non-negative",
        )?;
        check_range(&p("bulge"), self.bulge, true)?;
        check(&p("bulge"), self.bulge.max > 1.0, "bulges must exceed the local radius")?;
        check_range(&p("hollow_aspect"), self.hollow_aspect, true)?;
        check_range(&p("shell_fraction"), self.shell_fraction, true)?;
        check(
            &p("shell_fraction"),
            self.shell_fraction.max < 1.0,
            "shell fraction must lie in (0, 1)",
        )?;
        check_range(&p("cap_a"), self.cap_a, true)?;
        check_range(&p("cap_b"), self.cap_b, true)?;
        check(&p("cap_b"), self.cap_b.min >= 1.0, "caps must be at least as wide as the tube end")?;
        Ok(())
    }
}

fn check_grid(shape: Shape, spacing: Spacing, skeleton_radius: f64) -> Result<()> {
    check(
        "grid_shape",
        shape.iter().all(|&n| n > 0),
        "all extents must be positive",
    )?;
    check(
        "spacing",
        spacing.0.iter().all(|s| s.is_finite() && *s > 0.0),
        "all components must be positive",
    )?;
    check(
        "skeleton_radius",
        skeleton_radius > 0.0 && skeleton_radius.is_finite(),
        "must be positive",
    )
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(self.grid_shape, self.spacing, self.skeleton_radius)?;
        self.geometry.validate("geometry")
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        check("n_volumes", self.n_volumes > 0, "must be at least 1")?;
        check_grid(self.grid_shape, self.spacing, self.skeleton_radius)?;
        self.geometry.validate("geometry")?;
        self.render.validate("render")
    }

    /// Instances assigned to volume `v`; the counts sum to `total_instances`.
    pub fn instances_in_volume(&self, v: usize) -> usize {
        let t = self.total_instances;
        let n = self.n_volumes;
        (v + 1) * t / n - v * t / n
    }

    pub fn volume_seed(&self, v: usize) -> u64 {
        StreamKey::new(self.seed, "volume", v as u64).derive_seed()
    }

    pub fn volume_scene(&self, v: usize) -> SceneConfig {
        SceneConfig {
            seed: self.volume_seed(v),
            n_instances: self.instances_in_volume(v),
            grid_shape: self.grid_shape,
            spacing: self.spacing,
            overlap_policy: self.overlap_policy,
            skeleton_radius: self.skeleton_radius,
            geometry: self.geometry.clone(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(desk()),
            "paper-train" => Ok(paper_train()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            ))),
        }
    }
}

pub const PRESETS: &[&str] = &["desk", "paper-train"];

/// Geometry tuned for 1024 x 1024 fields of view.
pub fn full_scale_geometry() -> GeometryRanges {
    GeometryRanges {
        degree: IntRange::new(3, 6),
        alpha: Range::new(1.5, 2.5),
        amp_scale: Range::new(20.0, 60.0),
        amp_scale_z: Range::new(2.0, 8.0),
        half_length: Range::new(200.0, 450.0),
        axis_z_max: 0.1,
        radius: Range::new(7.0, 14.0),
        radius_degree: IntRange::new(1, 3),
        radius_variation: Range::new(1.0, 3.0),
        gamma: Range::new(0.5, 2.5),
        delta: Range::new(1.0, 4.0),
        r_min: 3.0,
        r_max: 22.0,
        branch_probability: 0.3,
        branch_count: IntRange::new(1, 2),
        branch_angle_deg: Range::new(10.0, 40.0),
        branch_length: Range::new(40.0, 150.0),
        branch_taper: Range::new(0.4, 0.9),
        hollow_count: IntRange::new(1, 4),
        hollow_min_gap: 0.3,
        bulge: Range::new(1.2, 1.8),
        hollow_aspect: Range::new(1.5, 3.0),
        shell_fraction: Range::new(0.5, 0.8),
        cap_a: Range::new(1.0, 1.8),
        cap_b: Range::new(1.0, 1.3),
    }
}

/// Geometry scaled down for CI-sized 32 x 128 x 128 volumes.
pub fn desk_geometry() -> GeometryRanges {
    GeometryRanges {
        degree: IntRange::new(2, 5),
        alpha: Range::new(1.5, 2.5),
        amp_scale: Range::new(3.0, 10.0),
        amp_scale_z: Range::new(0.5, 2.0),
        half_length: Range::new(30.0, 55.0),
        axis_z_max: 0.08,
        radius: Range::new(3.0, 4.5),
        radius_degree: IntRange::new(1, 2),
        radius_variation: Range::new(0.2, 0.6),
        gamma: Range::new(0.2, 0.6),
        delta: Range::new(1.0, 3.0),
        r_min: 2.0,
        r_max: 6.0,
        branch_probability: 0.3,
        branch_count: IntRange::new(1, 1),
        branch_angle_deg: Range::new(10.0, 40.0),
        branch_length: Range::new(10.0, 25.0),
        branch_taper: Range::new(0.5, 0.9),
        hollow_count: IntRange::new(1, 2),
        hollow_min_gap: 0.3,
        bulge: Range::new(1.2, 1.5),
        hollow_aspect: Range::new(1.5, 2.5),
        shell_fraction: Range::new(0.5, 0.7),
        cap_a: Range::new(1.0, 1.5),
        cap_b: Range::new(1.0, 1.2),
    }
}

pub fn paper_train() -> DatasetConfig {
    DatasetConfig {
        name: "paper-train".into(),
        seed: 2026,
        n_volumes: 30,
        total_instances: 200,
        grid_shape: [128, 1024, 1024],
        spacing: Spacing::ISOTROPIC,
        overlap_policy: OverlapPolicy::ClosestNormalized,
        skeleton_radius: 1.0,
        geometry: full_scale_geometry(),
        render: RenderConfig::default(),
    }
}

pub fn desk() -> DatasetConfig {
    DatasetConfig {
        name: "desk".into(),
        seed: 7,
        n_volumes: 4,
        total_instances: 16,
        grid_shape: [32, 128, 128],
        spacing: Spacing::ISOTROPIC,
        overlap_policy: OverlapPolicy::ClosestNormalized,
        skeleton_radius: 1.0,
        geometry: desk_geometry(),
        render: RenderConfig::default(),
    }
}
