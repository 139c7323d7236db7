use serde::{Deserialize, Serialize};

use super::chebyshev::{check_domain, ChebyshevSeries};
use super::thickness::ThicknessProfile;
use crate::error::{Error, Result};
use crate::vec3::{Frame, Vec3};

/// Straight side branch leaving the parent centerline at `t_attach`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub t_attach: f64,
    pub direction: Vec3,
    pub length: f64,
    /// Radius at the tip as a fraction of the junction radius.
    pub taper_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllipsoidKind {
    SolidCap,
    HollowShaft,
}

/// Ellipsoid aligned with the centerline tangent at `t_center`.
///
/// `semi_axes[0]` runs along the tangent. Hollow shaft features are filled
/// in the label volume and only dimmed inside when rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidFeature {
    pub t_center: f64,
    pub semi_axes: [f64; 3],
    pub kind: EllipsoidKind,
    pub shell_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MyotubeModel {
    pub instance_id: u32,
    /// World position of `t = 0`.
    pub anchor: Vec3,
    /// Principal elongation direction (unit).
    pub axis: Vec3,
    pub half_length: f64,
    pub lateral_xy: ChebyshevSeries,
    pub lateral_z: ChebyshevSeries,
    pub thickness: ThicknessProfile,
    pub branches: Vec<Branch>,
    pub ellipsoids: Vec<EllipsoidFeature>,
    /// Shaft bulges requested but not placed because of the gap constraint.
    #[serde(default)]
    pub placement_shortfall: usize,
}

impl MyotubeModel {
    /// Straight constant-radius tube without branches or ellipsoids.
    pub fn straight(instance_id: u32, anchor: Vec3, axis: Vec3, half_length: f64, radius: f64) -> Self {
        Self {
            instance_id,
            anchor,
            axis: axis.normalized(),
            half_length,
            lateral_xy: ChebyshevSeries::zero(0),
            lateral_z: ChebyshevSeries::zero(0),
            thickness: ThicknessProfile::constant(radius),
            branches: Vec::new(),
            ellipsoids: Vec::new(),
            placement_shortfall: 0,
        }
    }

    /// In-plane normal `n1` and re-orthogonalized z direction `n2`.
    pub fn normals(&self) -> (Vec3, Vec3) {
        let a = self.axis;
        let n1 = Vec3::new(-a.y, a.x, 0.0);
        let n1 = if n1.norm() > 1e-12 { n1.normalized() } else { Vec3::Y };
        let n2 = (Vec3::Z - a * a.z).normalized();
        let n2 = if n2.norm() > 1e-12 { n2 } else { a.cross(n1).normalized() };
        (n1, n2)
    }

    pub fn centerline_point(&self, t: f64) -> Result<Vec3> {
        let t = check_domain(t)?;
        let (n1, n2) = self.normals();
        Ok(self.anchor
            + self.axis * (self.half_length * t)
            + n1 * self.lateral_xy.eval(t)?
            + n2 * self.lateral_z.eval(t)?)
    }

    /// Unnormalized derivative `p'(t)`.
    pub fn velocity(&self, t: f64) -> Result<Vec3> {
        let (n1, n2) = self.normals();
        Ok(self.axis * self.half_length
            + n1 * self.lateral_xy.derivative(t)?
            + n2 * self.lateral_z.derivative(t)?)
    }

    pub fn tangent_at(&self, t: f64) -> Result<Vec3> {
        let v = self.velocity(t)?;
        let n = v.norm();
        if n < 1e-9 {
            return Err(Error::Degenerate(format!(
                "centerline of instance {} has zero speed at t = {t}",
                self.instance_id
            )));
        }
        Ok(v / n)
    }

    pub fn radius_at(&self, t: f64) -> Result<f64> {
        self.thickness.radius_at(t)
    }

    pub fn branch_start(&self, b: &Branch) -> Result<Vec3> {
        self.centerline_point(b.t_attach)
    }

    pub fn branch_tip(&self, b: &Branch) -> Result<Vec3> {
        Ok(self.branch_start(b)? + b.direction * b.length)
    }

    /// Branch radius at arc length `s` from the junction.
    pub fn branch_radius(&self, b: &Branch, s: f64) -> Result<f64> {
        let r0 = self.radius_at(b.t_attach)?;
        let u = (s / b.length).clamp(0.0, 1.0);
        Ok(r0 * (1.0 - (1.0 - b.taper_end) * u))
    }

    pub fn ellipsoid_center(&self, e: &EllipsoidFeature) -> Result<Vec3> {
        self.centerline_point(e.t_center)
    }

    pub fn ellipsoid_frame(&self, e: &EllipsoidFeature) -> Result<Frame> {
        Ok(Frame::from_tangent(self.tangent_at(e.t_center)?))
    }
}
