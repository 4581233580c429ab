//! Point-cloud container, ray angles and invertible rigid augmentations.
//!
//! Frame convention: x forward, y left, z up, sensor at the origin. All
//! angles are radians.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::error::{Error, Result};

/// A scan: coordinates, per-point intensity and optional semantic labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    coords: Vec<[f64; 3]>,
    intensity: Vec<f32>,
    labels: Option<Vec<ClassId>>,
}

impl PointCloud {
    pub fn new(
        coords: Vec<[f64; 3]>,
        intensity: Vec<f32>,
        labels: Option<Vec<ClassId>>,
    ) -> Result<Self> {
        if coords.len() != intensity.len() {
            return Err(Error::Data(format!(
                "{} coordinates but {} intensities",
                coords.len(),
                intensity.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != coords.len() {
                return Err(Error::LabelMismatch(format!(
                    "{} labels for {} points",
                    l.len(),
                    coords.len()
                )));
            }
        }
        if let Some(i) = coords.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data(format!("non-finite coordinate at point {i}")));
        }
        if let Some(i) = intensity.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite intensity at point {i}")));
        }
        Ok(Self {
            coords,
            intensity,
            labels,
        })
    }

    pub fn empty(labeled: bool) -> Self {
        Self {
            coords: Vec::new(),
            intensity: Vec::new(),
            labels: labeled.then(Vec::new),
        }
    }

    pub(crate) fn with_capacity(n: usize, labeled: bool) -> Self {
        Self {
            coords: Vec::with_capacity(n),
            intensity: Vec::with_capacity(n),
            labels: labeled.then(|| Vec::with_capacity(n)),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Attaches (or replaces) labels.
    pub fn with_labels(mut self, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LabelMismatch(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn into_parts(self) -> (Vec<[f64; 3]>, Vec<f32>, Option<Vec<ClassId>>) {
        (self.coords, self.intensity, self.labels)
    }

    /// Appends point `i` of `src`. Label presence must already agree.
    #[inline]
    pub(crate) fn push_from(&mut self, src: &PointCloud, i: usize) {
        self.coords.push(src.coords[i]);
        self.intensity.push(src.intensity[i]);
        if let (Some(dst), Some(l)) = (self.labels.as_mut(), src.labels.as_ref()) {
            dst.push(l[i]);
        }
    }

    /// Appends point `i` of `src` with replaced coordinates.
    #[inline]
    pub(crate) fn push_moved(&mut self, src: &PointCloud, i: usize, xyz: [f64; 3]) {
        self.coords.push(xyz);
        self.intensity.push(src.intensity[i]);
        if let (Some(dst), Some(l)) = (self.labels.as_mut(), src.labels.as_ref()) {
            dst.push(l[i]);
        }
    }

    /// Canonical sorted record list; two clouds are equal as labeled
    /// multisets iff their records are equal.
    pub fn multiset_records(&self) -> Vec<([u64; 3], u32, u32)> {
        let mut recs: Vec<_> = (0..self.len())
            .map(|i| {
                let c = self.coords[i];
                (
                    [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()],
                    self.intensity[i].to_bits(),
                    self.labels.as_ref().map_or(u32::MAX, |l| l[i].0),
                )
            })
            .collect();
        recs.sort_unstable();
        recs
    }

    /// Equality ignoring point order.
    pub fn multiset_eq(&self, other: &PointCloud) -> bool {
        self.len() == other.len()
            && self.is_labeled() == other.is_labeled()
            && self.multiset_records() == other.multiset_records()
    }
}

/// Angle of the point's ray above the horizontal plane, in [-π/2, π/2].
#[inline]
pub fn inclination_of(p: [f64; 3]) -> f64 {
    p[2].atan2((p[0] * p[0] + p[1] * p[1]).sqrt())
}

/// Angle of the point's ray around the vertical axis, in [0, 2π).
/// Points on the z-axis map to 0.
#[inline]
pub fn azimuth_of(p: [f64; 3]) -> f64 {
    let (x, y) = (p[0], p[1]);
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let a = y.atan2(x);
    let a = if a < 0.0 { a + TAU } else { a };
    // tiny negative angles round up to exactly TAU
    if a >= TAU {
        0.0
    } else {
        a
    }
}

pub fn inclination(coords: &[[f64; 3]]) -> Vec<f64> {
    coords.iter().map(|&p| inclination_of(p)).collect()
}

pub fn azimuth(coords: &[[f64; 3]]) -> Vec<f64> {
    coords.iter().map(|&p| azimuth_of(p)).collect()
}

/// Wraps an angle into [0, 2π).
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Rotates a point about the z-axis given precomputed `(sin, cos)`.
#[inline]
pub(crate) fn rotate_z(p: [f64; 3], sin: f64, cos: f64) -> [f64; 3] {
    [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1], p[2]]
}

/// Yaw rotation, uniform scale, axis flips and translation, composed as
/// flip → scale → rotate → shift.
///
/// `flip_x` mirrors across the x-z plane (negates y); `flip_y` mirrors
/// across the y-z plane (negates x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidAugmentation {
    pub yaw: f64,
    pub scale: f64,
    pub flip_x: bool,
    pub flip_y: bool,
    pub shift: [f64; 3],
}

impl Default for RigidAugmentation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidAugmentation {
    pub const IDENTITY: RigidAugmentation = RigidAugmentation {
        yaw: 0.0,
        scale: 1.0,
        flip_x: false,
        flip_y: false,
        shift: [0.0; 3],
    };

    pub fn yaw(yaw: f64) -> Self {
        Self {
            yaw: wrap_angle(yaw),
            ..Self::IDENTITY
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidAugmentation(format!(
                "scale must be finite and > 0, got {}",
                self.scale
            )));
        }
        if !self.yaw.is_finite() {
            return Err(Error::InvalidAugmentation(format!(
                "yaw must be finite, got {}",
                self.yaw
            )));
        }
        if self.shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAugmentation(format!(
                "shift must be finite, got {:?}",
                self.shift
            )));
        }
        Ok(())
    }

    /// Linear part (flip, scale, rotate) without the shift.
    #[inline]
    fn apply_linear(&self, p: [f64; 3], sin: f64, cos: f64) -> [f64; 3] {
        let mut q = p;
        if self.flip_x {
            q[1] = -q[1];
        }
        if self.flip_y {
            q[0] = -q[0];
        }
        let q = [q[0] * self.scale, q[1] * self.scale, q[2] * self.scale];
        rotate_z(q, sin, cos)
    }

    #[inline]
    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let (sin, cos) = self.yaw.sin_cos();
        let q = self.apply_linear(p, sin, cos);
        [
            q[0] + self.shift[0],
            q[1] + self.shift[1],
            q[2] + self.shift[2],
        ]
    }

    /// The exact inverse, expressed in the same composition order.
    pub fn inverse(&self) -> RigidAugmentation {
        // A single mirror M satisfies M·R(φ) = R(-φ)·M, so undoing R(yaw)
        // after the mirror keeps the angle; zero or two mirrors commute
        // with rotation and the angle is negated.
        let single_flip = self.flip_x != self.flip_y;
        let yaw = if single_flip {
            self.yaw
        } else {
            wrap_angle(-self.yaw)
        };
        let mut inv = RigidAugmentation {
            yaw,
            scale: 1.0 / self.scale,
            flip_x: self.flip_x,
            flip_y: self.flip_y,
            shift: [0.0; 3],
        };
        let (sin, cos) = inv.yaw.sin_cos();
        let t = inv.apply_linear(self.shift, sin, cos);
        inv.shift = [-t[0], -t[1], -t[2]];
        inv
    }
}

/// Transforms every point; order, intensity and labels are preserved.
pub fn apply_augmentation(cloud: &PointCloud, aug: &RigidAugmentation) -> Result<PointCloud> {
    aug.validate()?;
    if aug.is_identity() {
        return Ok(cloud.clone());
    }
    let (sin, cos) = aug.yaw.sin_cos();
    let coords = cloud
        .coords
        .iter()
        .map(|&p| {
            let q = aug.apply_linear(p, sin, cos);
            [
                q[0] + aug.shift[0],
                q[1] + aug.shift[1],
                q[2] + aug.shift[2],
            ]
        })
        .collect();
    Ok(PointCloud {
        coords,
        intensity: cloud.intensity.clone(),
        labels: cloud.labels.clone(),
    })
}

pub fn invert_augmentation(aug: &RigidAugmentation) -> Result<RigidAugmentation> {
    aug.validate()?;
    Ok(aug.inverse())
}

/// Parameter ranges for randomly drawn global augmentations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationRanges {
    /// Maximum |yaw| in degrees; 180 draws a full turn.
    pub yaw_deg: f64,
    pub scale: [f64; 2],
    pub flip_probability: f64,
    /// Per-axis shift bound in meters.
    pub shift: [f64; 3],
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        Self {
            yaw_deg: 180.0,
            scale: [0.95, 1.05],
            flip_probability: 0.5,
            shift: [0.2, 0.2, 0.2],
        }
    }
}

impl AugmentationRanges {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.scale;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Validation(format!(
                "scale range must satisfy 0 < lo <= hi, got {:?}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::Validation(format!(
                "flip probability {} outside [0, 1]",
                self.flip_probability
            )));
        }
        if !(self.yaw_deg.is_finite() && self.yaw_deg >= 0.0) {
            return Err(Error::Validation(format!(
                "invalid yaw bound {}",
                self.yaw_deg
            )));
        }
        if self.shift.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Validation(format!(
                "invalid shift bound {:?}",
                self.shift
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RigidAugmentation {
        let yaw_max = self.yaw_deg.to_radians();
        let yaw = if yaw_max > 0.0 {
            rng.random_range(-yaw_max..=yaw_max)
        } else {
            0.0
        };
        let scale = if self.scale[1] > self.scale[0] {
            rng.random_range(self.scale[0]..=self.scale[1])
        } else {
            self.scale[0]
        };
        let flip_x = rng.random_bool(self.flip_probability);
        let flip_y = rng.random_bool(self.flip_probability);
        let mut shift = [0.0; 3];
        for (s, &b) in shift.iter_mut().zip(&self.shift) {
            if b > 0.0 {
                *s = rng.random_range(-b..=b);
            }
        }
        RigidAugmentation {
            yaw: wrap_angle(yaw),
            scale,
            flip_x,
            flip_y,
            shift,
        }
    }
}
