//! Random sampling of myotube models and whole scenes.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chebyshev::{damping, ChebyshevSeries};
use super::config::{GeometryRanges, Range, SceneConfig};
use super::model::{Branch, EllipsoidFeature, EllipsoidKind, MyotubeModel};
use super::thickness::ThicknessProfile;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::vec3::{Frame, Vec3};

/// Parametric range over which branches attach and bulges are placed.
pub const INTERIOR_T: f64 = 0.8;
const TANGENT_PROBES: usize = 65;
const MODEL_RETRIES: usize = 16;
const PLACEMENT_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub config: SceneConfig,
    pub models: Vec<MyotubeModel>,
}

impl Scene {
    pub fn empty(config: SceneConfig) -> Self {
        Self {
            config,
            models: Vec::new(),
        }
    }
}

fn draw(stream: &mut Stream, r: Range) -> f64 {
    stream.uniform(r.min, r.max)
}

impl Branch {
    /// Branch leaving the centerline at `t_attach`, tilted by `theta`
    /// (radians) from the parent tangent towards `toward`.
    pub fn with_angle(
        model: &MyotubeModel,
        t_attach: f64,
        theta: f64,
        toward: Vec3,
        length: f64,
        taper_end: f64,
    ) -> Result<Self> {
        if !(0.0..PI / 2.0).contains(&theta) {
            return Err(Error::Config(format!(
                "branch angle {theta} rad must lie in [0, pi/2)"
            )));
        }
        let tangent = model.tangent_at(t_attach)?;
        let perp = toward - tangent * toward.dot(tangent);
        let direction = if theta == 0.0 {
            tangent
        } else {
            if perp.norm() < 1e-12 {
                return Err(Error::Degenerate(
                    "branch tilt direction is parallel to the tangent".into(),
                ));
            }
            (tangent + perp.normalized() * theta.tan()).normalized()
        };
        Ok(Branch {
            t_attach,
            direction,
            length,
            taper_end,
        })
    }
}

/// Append one straight branch inside the configured cone around the parent
/// tangent. The junction lies on the centerline and the branch starts with
/// the parent radius.
pub fn add_branch(model: &mut MyotubeModel, stream: &mut Stream, ranges: &GeometryRanges) -> Result<()> {
    let theta_max = ranges.branch_angle_deg.max.to_radians();
    if theta_max >= PI / 2.0 {
        return Err(Error::Config(format!(
            "branch cone angle {} deg must stay below 90 deg",
            ranges.branch_angle_deg.max
        )));
    }
    if model.branches.len() >= ranges.branch_count.max {
        return Err(Error::Config(format!(
            "instance {} already carries the maximum of {} branches",
            model.instance_id, ranges.branch_count.max
        )));
    }
    let t_attach = stream.uniform(-INTERIOR_T, INTERIOR_T);
    let theta = draw(stream, ranges.branch_angle_deg).to_radians();
    let frame = Frame::from_tangent(model.tangent_at(t_attach)?);
    let phi = stream.uniform(0.0, TAU);
    let toward = frame.axes[1] * phi.cos() + frame.axes[2] * phi.sin();
    let length = draw(stream, ranges.branch_length);
    let taper = draw(stream, ranges.branch_taper);
    let branch = Branch::with_angle(model, t_attach, theta, toward, length, taper)?;
    model.branches.push(branch);
    Ok(())
}

/// Largest number of points in `[-INTERIOR_T, INTERIOR_T]` with pairwise gap
/// at least `gap`.
fn max_packable(gap: f64) -> usize {
    if gap <= 0.0 {
        usize::MAX
    } else {
        ((2.0 * INTERIOR_T) / gap).floor() as usize + 1
    }
}

/// Place the two end caps and a random number of hollow shaft bulges.
///
/// Bulges are rejection-sampled with a bounded number of attempts; if the
/// gap constraint cannot be met the model keeps fewer bulges and records the
/// shortfall. A configuration whose minimum count can never fit is an error.
pub fn place_ellipsoids(model: &mut MyotubeModel, stream: &mut Stream, ranges: &GeometryRanges) -> Result<()> {
    let gap = ranges.hollow_min_gap;
    if ranges.hollow_count.min > max_packable(gap) {
        return Err(Error::Placement(format!(
            "{} bulges cannot keep a parametric gap of {gap} on [-{INTERIOR_T}, {INTERIOR_T}]",
            ranges.hollow_count.min
        )));
    }
    model.ellipsoids.clear();
    for t in [-1.0, 1.0] {
        let r = model.radius_at(t)?;
        let a = draw(stream, ranges.cap_a) * r;
        let b = draw(stream, ranges.cap_b) * r;
        model.ellipsoids.push(EllipsoidFeature {
            t_center: t,
            semi_axes: [a, b, b],
            kind: EllipsoidKind::SolidCap,
            shell_fraction: 0.0,
        });
    }

    let wanted = stream.uniform_int(ranges.hollow_count.min as u64, ranges.hollow_count.max as u64) as usize;
    let mut centers: Vec<f64> = Vec::with_capacity(wanted);
    'features: for _ in 0..wanted {
        for _ in 0..PLACEMENT_RETRIES {
            let t = stream.uniform(-INTERIOR_T, INTERIOR_T);
            if centers.iter().all(|c| (c - t).abs() >= gap) {
                centers.push(t);
                continue 'features;
            }
        }
        break;
    }
    model.placement_shortfall = wanted - centers.len();
    centers.sort_by(f64::total_cmp);

    // bulges strictly exceed the local radius
    let bulge = Range::new(ranges.bulge.min.max(1.0 + 1e-6), ranges.bulge.max);
    for t in centers {
        let r = model.radius_at(t)?;
        let b = draw(stream, bulge) * r;
        let a = draw(stream, ranges.hollow_aspect) * b;
        let shell = draw(stream, ranges.shell_fraction);
        model.ellipsoids.push(EllipsoidFeature {
            t_center: t,
            semi_axes: [a, b, b],
            kind: EllipsoidKind::HollowShaft,
            shell_fraction: shell,
        });
    }
    Ok(())
}

fn sample_thickness(stream: &mut Stream, g: &GeometryRanges) -> ThicknessProfile {
    let degree = stream.uniform_int(g.radius_degree.min as u64, g.radius_degree.max as u64) as usize;
    let alpha = draw(stream, g.alpha);
    let variation = draw(stream, g.radius_variation);
    let mut coeffs = Vec::with_capacity(degree + 1);
    coeffs.push(draw(stream, g.radius));
    for k in 1..=degree {
        coeffs.push(variation * stream.uniform(-1.0, 1.0) * damping(k, alpha));
    }
    ThicknessProfile {
        poly: ChebyshevSeries::new(coeffs, alpha, 1.0),
        gamma: draw(stream, g.gamma),
        delta: draw(stream, g.delta),
        phase: stream.uniform(0.0, TAU),
        r_min: g.r_min,
        r_max: g.r_max,
    }
}

fn has_regular_tangents(model: &MyotubeModel) -> bool {
    (0..TANGENT_PROBES).all(|i| {
        let t = -1.0 + 2.0 * i as f64 / (TANGENT_PROBES - 1) as f64;
        model.tangent_at(t).is_ok()
    })
}

/// Sample the centerline, thickness, branches and ellipsoids of one
/// instance. Every draw comes from streams keyed by `(seed, purpose, id)`.
pub fn sample_model(instance_id: u32, cfg: &SceneConfig) -> Result<MyotubeModel> {
    let g = &cfg.geometry;
    let id = u64::from(instance_id);
    let mut stream = Stream::keyed(cfg.seed, "model", id);
    let extent = Vec3::new(
        (cfg.grid_shape[2] - 1) as f64 * cfg.spacing.0[2],
        (cfg.grid_shape[1] - 1) as f64 * cfg.spacing.0[1],
        (cfg.grid_shape[0] - 1) as f64 * cfg.spacing.0[0],
    );

    let mut model = None;
    for _ in 0..MODEL_RETRIES {
        let anchor = Vec3::new(
            stream.unit() * extent.x,
            stream.unit() * extent.y,
            stream.unit() * extent.z,
        );
        let phi = stream.uniform(0.0, TAU);
        let az = stream.uniform(-g.axis_z_max, g.axis_z_max);
        let planar = (1.0 - az * az).sqrt();
        let axis = Vec3::new(planar * phi.cos(), planar * phi.sin(), az);
        let degree = stream.uniform_int(g.degree.min as u64, g.degree.max as u64) as usize;
        let alpha = draw(&mut stream, g.alpha);
        let amp_xy = draw(&mut stream, g.amp_scale);
        let amp_z = draw(&mut stream, g.amp_scale_z);
        let lateral_xy = ChebyshevSeries::sample_damped(degree, alpha, amp_xy, &mut stream);
        let lateral_z = ChebyshevSeries::sample_damped(degree, alpha, amp_z, &mut stream);
        let half_length = draw(&mut stream, g.half_length);
        let thickness = sample_thickness(&mut stream, g);
        let candidate = MyotubeModel {
            instance_id,
            anchor,
            axis,
            half_length,
            lateral_xy,
            lateral_z,
            thickness,
            branches: Vec::new(),
            ellipsoids: Vec::new(),
            placement_shortfall: 0,
        };
        if has_regular_tangents(&candidate) {
            model = Some(candidate);
            break;
        }
    }
    let mut model = model.ok_or_else(|| {
        Error::Degenerate(format!(
            "instance {instance_id}: no regular centerline after {MODEL_RETRIES} attempts"
        ))
    })?;

    let mut branch_stream = Stream::keyed(cfg.seed, "branch", id);
    if branch_stream.unit() < g.branch_probability {
        let n = branch_stream.uniform_int(g.branch_count.min as u64, g.branch_count.max as u64);
        for _ in 0..n {
            add_branch(&mut model, &mut branch_stream, g)?;
        }
    }

    let mut ellipsoid_stream = Stream::keyed(cfg.seed, "ellipsoid", id);
    place_ellipsoids(&mut model, &mut ellipsoid_stream, g)?;
    Ok(model)
}

/// Build all instances of a scene, ids `1..=n_instances`.
pub fn build_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate().map_err(|e| match e {
        Error::Schema { path, message, .. } => Error::Config(format!("{path}: {message}")),
        other => other,
    })?;
    let n = u32::try_from(cfg.n_instances)
        .map_err(|_| Error::Config("too many instances".into()))?;
    let models = (1..=n)
        .into_par_iter()
        .map(|id| sample_model(id, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        config: cfg.clone(),
        models,
    })
}
