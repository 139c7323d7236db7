//! Dense 3D grids stored z-major, then y, then x.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Grid extent in `(Z, Y, X)` order.
pub type Shape = [usize; 3];

/// Voxel size in `(sz, sy, sx)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Spacing(pub [f64; 3]);

impl Spacing {
    pub const ISOTROPIC: Spacing = Spacing([1.0, 1.0, 1.0]);

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "spacing components must be positive, got {:?}",
                self.0
            )))
        }
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// World position of the centre of voxel `(z, y, x)`.
    #[inline]
    pub fn world(&self, z: usize, y: usize, x: usize) -> Vec3 {
        Vec3::new(
            x as f64 * self.0[2],
            y as f64 * self.0[1],
            z as f64 * self.0[0],
        )
    }

    /// Per-axis spacing as a world vector (x, y, z).
    pub fn as_world(&self) -> Vec3 {
        Vec3::new(self.0[2], self.0[1], self.0[0])
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::ISOTROPIC
    }
}

impl From<[f64; 3]> for Spacing {
    fn from(a: [f64; 3]) -> Self {
        Spacing(a)
    }
}

impl From<Spacing> for [f64; 3] {
    fn from(s: Spacing) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    shape: Shape,
    spacing: Spacing,
    data: Vec<T>,
}

pub type LabelVolume = Volume<u32>;
pub type SkeletonVolume = Volume<u32>;
pub type IntensityVolume = Volume<f32>;
pub type ProbabilityVolume = Volume<f32>;
pub type Mask = Volume<bool>;

pub fn voxel_count(shape: Shape) -> usize {
    shape[0] * shape[1] * shape[2]
}

impl<T: Clone> Volume<T> {
    pub fn filled(shape: Shape, spacing: Spacing, value: T) -> Self {
        Self {
            shape,
            spacing,
            data: vec![value; voxel_count(shape)],
        }
    }
}

impl<T: Clone + Default> Volume<T> {
    pub fn zeros(shape: Shape, spacing: Spacing) -> Self {
        Self::filled(shape, spacing, T::default())
    }
}

impl<T> Volume<T> {
    pub fn from_vec(shape: Shape, spacing: Spacing, data: Vec<T>) -> Result<Self> {
        let expected = voxel_count(shape);
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected: expected as u64,
                found: data.len() as u64,
            });
        }
        if shape.contains(&0) {
            return Err(Error::Domain(format!("shape {shape:?} has a zero extent")));
        }
        Ok(Self {
            shape,
            spacing,
            data,
        })
    }

    pub fn from_fn(shape: Shape, spacing: Spacing, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(voxel_count(shape));
        for z in 0..shape[0] {
            for y in 0..shape[1] {
                for x in 0..shape[2] {
                    data.push(f(z, y, x));
                }
            }
        }
        Self {
            shape,
            spacing,
            data,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn set_spacing(&mut self, spacing: Spacing) {
        self.spacing = spacing;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.shape[1] + y) * self.shape[2] + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.shape[2];
        let rest = idx / self.shape[2];
        (rest / self.shape[1], rest % self.shape[1], x)
    }

    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> &T {
        &self.data[self.index(z, y, x)]
    }

    #[inline]
    pub fn get_mut(&mut self, z: usize, y: usize, x: usize) -> &mut T {
        let i = self.index(z, y, x);
        &mut self.data[i]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            shape: self.shape,
            spacing: self.spacing,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_shape<U>(&self, other: &Volume<U>) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape,
                found: other.shape,
            })
        }
    }

    /// One z-slice as a row-major `(Y, X)` slice.
    pub fn slice_z(&self, z: usize) -> Result<&[T]> {
        if z >= self.shape[0] {
            return Err(Error::Domain(format!(
                "slice {z} out of range for depth {}",
                self.shape[0]
            )));
        }
        let plane = self.shape[1] * self.shape[2];
        Ok(&self.data[z * plane..(z + 1) * plane])
    }
}

impl Volume<f32> {
    /// Validate that every value lies in `[0, 1]`.
    pub fn check_probability(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            None => Ok(()),
            Some(i) => {
                let (z, y, x) = self.coords(i);
                Err(Error::Domain(format!(
                    "probability {} at voxel ({z}, {y}, {x}) is outside [0, 1]",
                    self.data[i]
                )))
            }
        }
    }
}
