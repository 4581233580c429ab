//! Azimuth-sector scene swapping and instance rotate-pasting.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{default_instance_classes, ClassId};
use crate::error::{Error, Result};
use crate::geometry::{azimuth_of, rotate_z, wrap_angle, PointCloud};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarMixConfig {
    /// Sector width bounds in degrees; the width is drawn uniformly.
    pub sector_width_deg: [f64; 2],
    pub instance_classes: Vec<ClassId>,
    /// Number of rotated copies pasted per mix.
    pub paste_count: usize,
}

impl Default for PolarMixConfig {
    fn default() -> Self {
        Self {
            sector_width_deg: [30.0, 180.0],
            instance_classes: default_instance_classes(),
            paste_count: 2,
        }
    }
}

impl PolarMixConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.sector_width_deg;
        if !(lo > 0.0 && lo <= hi && hi <= 360.0) {
            return Err(Error::Validation(format!(
                "sector width bounds must satisfy 0 < lo <= hi <= 360, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Resolved randomness of one PolarMix call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarMixPlan {
    pub sector_start: f64,
    pub sector_width: f64,
    pub instance_classes: Vec<ClassId>,
    pub paste_angles: Vec<f64>,
}

impl PolarMixPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.sector_start.is_finite() && (0.0..TAU).contains(&self.sector_start)) {
            return Err(Error::InvalidArgument(format!(
                "sector start {} outside [0, 2π)",
                self.sector_start
            )));
        }
        if !(self.sector_width > 0.0 && self.sector_width <= TAU) {
            return Err(Error::InvalidArgument(format!(
                "sector width {} outside (0, 2π]",
                self.sector_width
            )));
        }
        if self.paste_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite paste angle".into()));
        }
        for (i, a) in self.paste_angles.iter().enumerate() {
            if self.paste_angles[..i].contains(a) {
                return Err(Error::InvalidArgument(format!("duplicate paste angle {a}")));
            }
        }
        Ok(())
    }

    /// Half-open membership in `[start, start + width)` modulo 2π.
    #[inline]
    pub fn in_sector(&self, azimuth: f64) -> bool {
        self.sector_width >= TAU || wrap_angle(azimuth - self.sector_start) < self.sector_width
    }

    fn is_instance(&self, label: ClassId) -> bool {
        self.instance_classes.contains(&label)
    }
}

pub fn sample_plan<R: Rng + ?Sized>(config: &PolarMixConfig, rng: &mut R) -> Result<PolarMixPlan> {
    config.validate()?;
    let sector_start = rng.random_range(0.0..TAU);
    let [lo, hi] = config.sector_width_deg;
    let width_deg = if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    };
    let mut paste_angles: Vec<f64> = Vec::with_capacity(config.paste_count);
    while paste_angles.len() < config.paste_count {
        let a = rng.random_range(0.0..TAU);
        if !paste_angles.contains(&a) {
            paste_angles.push(a);
        }
    }
    let plan = PolarMixPlan {
        sector_start,
        sector_width: width_deg.to_radians().min(TAU),
        instance_classes: config.instance_classes.clone(),
        paste_angles,
    };
    plan.validate()?;
    Ok(plan)
}

/// A's points outside the sector followed by B's points inside it.
pub fn scene_swap(a: &PointCloud, b: &PointCloud, plan: &PolarMixPlan) -> Result<PointCloud> {
    plan.validate()?;
    if a.is_labeled() != b.is_labeled() {
        return Err(Error::LabelMismatch(
            "either both scans or neither must carry labels".into(),
        ));
    }
    let in_a: Vec<bool> = a
        .coords()
        .iter()
        .map(|&p| plan.in_sector(azimuth_of(p)))
        .collect();
    let in_b: Vec<bool> = b
        .coords()
        .iter()
        .map(|&p| plan.in_sector(azimuth_of(p)))
        .collect();
    let n = in_a.iter().filter(|&&s| !s).count() + in_b.iter().filter(|&&s| s).count();
    let mut out = PointCloud::with_capacity(n, a.is_labeled());
    for (i, _) in in_a.iter().enumerate().filter(|(_, &s)| !s) {
        out.push_from(a, i);
    }
    for (i, _) in in_b.iter().enumerate().filter(|(_, &s)| s) {
        out.push_from(b, i);
    }
    Ok(out)
}

/// A followed by one yaw-rotated copy of B's instance-class points per
/// paste angle.
pub fn instance_paste(a: &PointCloud, b: &PointCloud, plan: &PolarMixPlan) -> Result<PointCloud> {
    plan.validate()?;
    let Some(b_labels) = b.labels() else {
        return Err(Error::LabelMismatch(
            "instance pasting needs a labeled source scan".into(),
        ));
    };
    if !a.is_labeled() {
        return Err(Error::LabelMismatch(
            "instance pasting needs a labeled target scan".into(),
        ));
    }
    let picked: Vec<usize> = b_labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| plan.is_instance(l))
        .map(|(i, _)| i)
        .collect();
    let mut out = PointCloud::with_capacity(a.len() + picked.len() * plan.paste_angles.len(), true);
    for i in 0..a.len() {
        out.push_from(a, i);
    }
    for &angle in &plan.paste_angles {
        let (sin, cos) = angle.sin_cos();
        for &i in &picked {
            out.push_moved(b, i, rotate_z(b.coords()[i], sin, cos));
        }
    }
    Ok(out)
}

/// Sector swap, then instance paste from B.
pub fn polar_mix(a: &PointCloud, b: &PointCloud, plan: &PolarMixPlan) -> Result<PointCloud> {
    let swapped = scene_swap(a, b, plan)?;
    if plan.paste_angles.is_empty() {
        return Ok(swapped);
    }
    instance_paste(&swapped, b, plan)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::inclination_of;

    fn at(alpha: f64) -> [f64; 3] {
        [alpha.cos() * 5.0, alpha.sin() * 5.0, -1.0]
    }

    fn cloud(alphas: &[f64], labels: &[ClassId]) -> PointCloud {
        PointCloud::new(
            alphas.iter().map(|&a| at(a)).collect(),
            (0..alphas.len()).map(|i| i as f32 * 0.1).collect(),
            Some(labels.to_vec()),
        )
        .unwrap()
    }

    fn plan(start: f64, width: f64, angles: Vec<f64>) -> PolarMixPlan {
        PolarMixPlan {
            sector_start: start,
            sector_width: width,
            instance_classes: vec![ClassId::CAR],
            paste_angles: angles,
        }
    }

    #[test]
    fn full_circle_swap_yields_b() {
        let a = cloud(&[0.1, 1.0], &[ClassId::ROAD; 2]);
        let b = cloud(&[2.0, 5.0, 6.2], &[ClassId::CAR; 3]);
        let out = polar_mix(&a, &b, &plan(1.3, TAU, vec![])).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn self_swap_identity() {
        let a = cloud(&[0.1, 1.0, 3.0, 6.0], &[ClassId::ROAD; 4]);
        let out = scene_swap(&a, &a, &plan(5.5, 2.0, vec![])).unwrap();
        assert!(out.multiset_eq(&a));
    }

    #[test]
    fn hand_checked_swap() {
        let a = cloud(&[0.1, 1.0, 3.0], &[ClassId::ROAD; 3]);
        let b = cloud(&[0.5, 4.0], &[ClassId::CAR; 2]);
        let out = scene_swap(&a, &b, &plan(0.4, 1.0, vec![])).unwrap();
        let expected = PointCloud::new(
            vec![at(0.1), at(3.0), at(0.5)],
            vec![0.0, 0.2, 0.0],
            Some(vec![ClassId::ROAD, ClassId::ROAD, ClassId::CAR]),
        )
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn sector_wraps_through_zero() {
        let p = plan(6.0, 1.0, vec![]);
        assert!(p.in_sector(6.1));
        assert!(p.in_sector(0.7));
        assert!(!p.in_sector(0.72));
        assert!(p.in_sector(6.0));
        assert!(!p.in_sector(5.99));
    }

    #[test]
    fn paste_rotates_instance_points() {
        let a = cloud(&[0.3], &[ClassId::ROAD]);
        let mut labels = vec![ClassId::CAR; 4];
        labels.extend([ClassId::ROAD; 6]);
        let alphas: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let b = cloud(&alphas, &labels);
        let out = instance_paste(&a, &b, &plan(0.0, 1.0, vec![PI])).unwrap();
        assert_eq!(out.len(), 1 + 4);
        for k in 0..4 {
            let src = b.coords()[k];
            let got = out.coords()[1 + k];
            // yaw by π negates x and y
            assert!((got[0] + src[0]).abs() < 1e-12);
            assert!((got[1] + src[1]).abs() < 1e-12);
            assert_eq!(got[2], src[2]);
            assert_eq!(out.labels().unwrap()[1 + k], ClassId::CAR);
            assert_eq!(out.intensity()[1 + k], b.intensity()[k]);
            assert!((inclination_of(got) - inclination_of(src)).abs() < 1e-12);
        }
    }

    #[test]
    fn paste_with_zero_angle_copies_verbatim() {
        let a = PointCloud::empty(true);
        let b = cloud(
            &[0.2, 1.2, 2.2],
            &[ClassId::CAR, ClassId::ROAD, ClassId::CAR],
        );
        let out = instance_paste(&a, &b, &plan(0.0, 1.0, vec![0.0])).unwrap();
        let expected = PointCloud::new(
            vec![b.coords()[0], b.coords()[2]],
            vec![b.intensity()[0], b.intensity()[2]],
            Some(vec![ClassId::CAR; 2]),
        )
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn no_angles_returns_a() {
        let a = cloud(&[0.3, 2.0], &[ClassId::ROAD; 2]);
        let b = cloud(&[0.2], &[ClassId::CAR]);
        assert_eq!(instance_paste(&a, &b, &plan(0.0, 1.0, vec![])).unwrap(), a);
    }

    #[test]
    fn counting_formula() {
        // A: two points inside [0.5, 2.0), B: one inside, one instance point
        let a = cloud(&[0.1, 0.6, 1.5, 3.0, 4.0], &[ClassId::ROAD; 5]);
        let b = cloud(
            &[0.7, 2.5, 3.5, 4.5, 5.5],
            &[
                ClassId::ROAD,
                ClassId::CAR,
                ClassId::ROAD,
                ClassId::ROAD,
                ClassId::ROAD,
            ],
        );
        let out = polar_mix(&a, &b, &plan(0.5, 1.5, vec![1.0, 2.0])).unwrap();
        assert_eq!(out.len(), 5 - 2 + 1 + 2);
    }

    #[test]
    fn invalid_plans() {
        let a = cloud(&[0.1], &[ClassId::ROAD]);
        for p in [
            plan(0.0, 0.0, vec![]),
            plan(0.0, -1.0, vec![]),
            plan(0.0, 7.0, vec![]),
            plan(-0.1, 1.0, vec![]),
            plan(0.0, 1.0, vec![1.0, 1.0]),
        ] {
            assert!(matches!(
                polar_mix(&a, &a, &p),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn sampled_plans_respect_config() {
        let cfg = PolarMixConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = sample_plan(&cfg, &mut rng).unwrap();
            assert!(p.sector_width >= PI / 6.0 - 1e-12 && p.sector_width <= PI + 1e-12);
            assert_eq!(p.paste_angles.len(), 2);
            assert!((0.0..TAU).contains(&p.sector_start));
        }
        let p1 = sample_plan(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let p2 = sample_plan(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(p1, p2);
    }
}
