//! Inclination-partition mixing of two scans.
//!
//! The joint inclination range of both scans is cut into `B` uniform
//! half-open bins `[lo, hi)`. The first output takes scan A's points from
//! bins whose index has the plan's parity and scan B's points from the
//! others; the second output is the mirror assembly.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{inclination_of, PointCloud};

/// Nudge applied to the upper edge so the max-inclination point is inside.
pub const EDGE_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserMixConfig {
    /// Candidate bin counts; one is drawn uniformly per mix.
    pub bin_choices: Vec<usize>,
    /// Optional fixed inclination range in degrees (e.g. a sensor's
    /// vertical field of view). It is widened when the data exceeds it.
    pub inclination_range_deg: Option<[f64; 2]>,
}

impl Default for LaserMixConfig {
    fn default() -> Self {
        Self {
            bin_choices: vec![3, 4, 5, 6],
            inclination_range_deg: None,
        }
    }
}

impl LaserMixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_choices.is_empty() {
            return Err(Error::Validation("lasermix bin_choices is empty".into()));
        }
        if self.bin_choices.contains(&0) {
            return Err(Error::Validation(
                "lasermix bin counts must be positive".into(),
            ));
        }
        if let Some([lo, hi]) = self.inclination_range_deg {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= -90.0 && hi <= 90.0) {
                return Err(Error::Validation(format!(
                    "invalid inclination range [{lo}, {hi}] degrees"
                )));
            }
        }
        Ok(())
    }
}

/// Resolved randomness of one LaserMix call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserMixPlan {
    /// `B + 1` strictly increasing edges, radians.
    pub bin_edges: Vec<f64>,
    /// Bins with `index % 2 == parity_offset` come from the first scan.
    pub parity_offset: u8,
}

impl LaserMixPlan {
    pub fn new(bin_edges: Vec<f64>, parity_offset: u8) -> Result<Self> {
        let plan = Self {
            bin_edges,
            parity_offset,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_edges.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a plan needs at least 2 bin edges, got {}",
                self.bin_edges.len()
            )));
        }
        if self.bin_edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("non-finite bin edge".into()));
        }
        if self.bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly increasing".into(),
            ));
        }
        if self.parity_offset > 1 {
            return Err(Error::InvalidArgument(format!(
                "parity offset must be 0 or 1, got {}",
                self.parity_offset
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Index of the half-open bin containing `theta`, if covered.
    #[inline]
    pub fn bin_of(&self, theta: f64) -> Option<usize> {
        let k = self.bin_edges.partition_point(|&e| e <= theta);
        (k >= 1 && k < self.bin_edges.len()).then(|| k - 1)
    }

    /// Whether bin `bin` is supplied by the first scan in the first output.
    #[inline]
    pub fn takes_first(&self, bin: usize) -> bool {
        bin % 2 == self.parity_offset as usize
    }
}

fn inclination_bounds(cloud: &PointCloud, lo: &mut f64, hi: &mut f64) {
    for &p in cloud.coords() {
        let t = inclination_of(p);
        if t < *lo {
            *lo = t;
        }
        if t > *hi {
            *hi = t;
        }
    }
}

/// Draws a plan covering the joint inclination range of both scans.
pub fn make_plan<R: Rng + ?Sized>(
    a: &PointCloud,
    b: &PointCloud,
    config: &LaserMixConfig,
    rng: &mut R,
) -> Result<LaserMixPlan> {
    config.validate()?;
    if a.is_empty() && b.is_empty() {
        return Err(Error::DegenerateInput(
            "lasermix needs at least one non-empty scan".into(),
        ));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    inclination_bounds(a, &mut lo, &mut hi);
    inclination_bounds(b, &mut lo, &mut hi);
    if let Some([rlo, rhi]) = config.inclination_range_deg {
        lo = lo.min(rlo.to_radians());
        hi = hi.max(rhi.to_radians());
    }

    let choices: Vec<usize> = config
        .bin_choices
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let bins = choices[rng.random_range(0..choices.len())];
    let parity_offset = rng.random_range(0..2u8);

    LaserMixPlan::new(uniform_edges(lo, hi + EDGE_EPSILON, bins), parity_offset)
}

/// `bins + 1` evenly spaced edges with exact endpoints.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + step * i as f64).collect();
    edges.push(hi);
    edges
}

/// Mixes two scans along inclination. Returns `(first, second)`, where
/// `second` equals `laser_mix(b, a, plan).0`.
pub fn laser_mix(
    a: &PointCloud,
    b: &PointCloud,
    plan: &LaserMixPlan,
) -> Result<(PointCloud, PointCloud)> {
    plan.validate()?;
    if a.is_labeled() != b.is_labeled() {
        return Err(Error::LabelMismatch(
            "either both scans or neither must carry labels".into(),
        ));
    }
    let side_a = first_side_mask(a, plan)?;
    let side_b = first_side_mask(b, plan)?;
    let labeled = a.is_labeled();

    let a_first = side_a.iter().filter(|&&s| s).count();
    let b_first = side_b.iter().filter(|&&s| s).count();
    let mut out1 = PointCloud::with_capacity(a_first + (b.len() - b_first), labeled);
    let mut out2 = PointCloud::with_capacity(b_first + (a.len() - a_first), labeled);

    for (i, &s) in side_a.iter().enumerate() {
        if s {
            out1.push_from(a, i);
        }
    }
    for (i, &s) in side_b.iter().enumerate() {
        if s {
            out2.push_from(b, i);
        } else {
            out1.push_from(b, i);
        }
    }
    for (i, &s) in side_a.iter().enumerate() {
        if !s {
            out2.push_from(a, i);
        }
    }
    Ok((out1, out2))
}

/// Per point: does it fall in a bin the plan assigns to the first slot?
fn first_side_mask(cloud: &PointCloud, plan: &LaserMixPlan) -> Result<Vec<bool>> {
    cloud
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let t = inclination_of(p);
            plan.bin_of(t)
                .map(|bin| plan.takes_first(bin))
                .ok_or_else(|| Error::PlanMismatch {
                    index: i,
                    inclination: t,
                    lo: plan.bin_edges[0],
                    hi: *plan.bin_edges.last().unwrap(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::classes::ClassId;

    /// A point at unit horizontal range with the given inclination.
    fn at(theta: f64) -> [f64; 3] {
        [1.0, 0.0, theta.tan()]
    }

    fn cloud(thetas: &[f64], label: u32) -> PointCloud {
        let n = thetas.len();
        PointCloud::new(
            thetas.iter().map(|&t| at(t)).collect(),
            (0..n).map(|i| i as f32).collect(),
            Some(vec![ClassId(label); n]),
        )
        .unwrap()
    }

    #[test]
    fn single_bin_plan_spans_range() {
        let a = cloud(&[-0.2, 0.3], 0);
        let b = cloud(&[0.1], 1);
        let cfg = LaserMixConfig {
            bin_choices: vec![1],
            ..Default::default()
        };
        let plan = make_plan(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(plan.bin_edges.len(), 2);
        assert!((plan.bin_edges[0] - (-0.2)).abs() < 1e-12);
        assert!(plan.bin_edges[1] > 0.3);
    }

    #[test]
    fn plan_is_deterministic() {
        let a = cloud(&[-0.2, 0.0, 0.25], 0);
        let b = cloud(&[-0.1, 0.15], 1);
        let cfg = LaserMixConfig::default();
        let p1 = make_plan(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let p2 = make_plan(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(p1, p2);
        assert!((3..=6).contains(&p1.num_bins()));
    }

    #[test]
    fn plan_edges_follow_linspace() {
        let a = cloud(&[-0.4, 0.1], 0);
        let b = cloud(&[-0.3, 0.2], 1);
        let cfg = LaserMixConfig {
            bin_choices: vec![5],
            ..Default::default()
        };
        let plan = make_plan(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let e = &plan.bin_edges;
        assert_eq!(e.len(), 6);
        // inclination of [1, 0, tan t] recovers t to a few ulps
        assert!((e[0] + 0.4).abs() < 1e-12);
        assert!(e[5] > 0.2);
        let width = (0.2 + EDGE_EPSILON + 0.4) / 5.0;
        for w in e.windows(2) {
            assert!((w[1] - w[0] - width).abs() < 1e-12);
        }
    }

    #[test]
    fn override_range_is_widened_to_data() {
        let a = cloud(&[-0.5, 0.0], 0);
        let b = cloud(&[0.05], 1);
        let cfg = LaserMixConfig {
            bin_choices: vec![2],
            inclination_range_deg: Some([-10.0, 10.0]),
        };
        let plan = make_plan(&a, &b, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((plan.bin_edges[0] + 0.5).abs() < 1e-12);
        assert!((plan.bin_edges[2] - (10f64.to_radians() + EDGE_EPSILON)).abs() < 1e-15);
    }

    #[test]
    fn both_empty_is_degenerate() {
        let e = PointCloud::empty(true);
        let err = make_plan(
            &e,
            &e,
            &LaserMixConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(err, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn hand_checked_assignment() {
        let a = cloud(&[-0.2, 0.0, 0.2], 0);
        let b = cloud(&[-0.1, 0.15], 1);
        let plan = LaserMixPlan::new(vec![-0.25, 0.05, 0.25], 0).unwrap();
        let (o1, o2) = laser_mix(&a, &b, &plan).unwrap();
        // bin 0 = [-0.25, 0.05) from A, bin 1 from B
        let expected1 = PointCloud::new(
            vec![a.coords()[0], a.coords()[1], b.coords()[1]],
            vec![0.0, 1.0, 1.0],
            Some(vec![ClassId(0), ClassId(0), ClassId(1)]),
        )
        .unwrap();
        let expected2 = PointCloud::new(
            vec![b.coords()[0], a.coords()[2]],
            vec![0.0, 2.0],
            Some(vec![ClassId(1), ClassId(0)]),
        )
        .unwrap();
        assert_eq!(o1, expected1);
        assert_eq!(o2, expected2);
    }

    #[test]
    fn single_bin_returns_inputs() {
        let a = cloud(&[-0.2, 0.0, 0.2], 0);
        let b = cloud(&[-0.1, 0.15], 1);
        let plan = LaserMixPlan::new(vec![-1.0, 1.0], 0).unwrap();
        let (o1, o2) = laser_mix(&a, &b, &plan).unwrap();
        assert_eq!(o1, a);
        assert_eq!(o2, b);
    }

    #[test]
    fn self_mix_identity() {
        let a = cloud(&[-0.3, -0.1, 0.0, 0.1, 0.29], 3);
        let plan = LaserMixPlan::new(uniform_edges(-0.3, 0.3, 4), 1).unwrap();
        let (o1, o2) = laser_mix(&a, &a, &plan).unwrap();
        assert!(o1.multiset_eq(&a));
        assert!(o2.multiset_eq(&a));
    }

    #[test]
    fn boundary_point_goes_to_upper_bin() {
        let plan = LaserMixPlan::new(vec![-1.0, 0.0, 1.0], 0).unwrap();
        assert_eq!(plan.bin_of(0.0), Some(1));
        assert_eq!(plan.bin_of(-1.0), Some(0));
        assert_eq!(plan.bin_of(1.0), None);
        assert_eq!(plan.bin_of(-1.5), None);
    }

    #[test]
    fn uncovered_point_is_mismatch() {
        let a = cloud(&[0.5], 0);
        let b = cloud(&[0.0], 0);
        let plan = LaserMixPlan::new(vec![-0.1, 0.1], 0).unwrap();
        assert!(matches!(
            laser_mix(&a, &b, &plan),
            Err(Error::PlanMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn bad_plans_rejected() {
        assert!(LaserMixPlan::new(vec![0.0], 0).is_err());
        assert!(LaserMixPlan::new(vec![0.0, 0.0], 0).is_err());
        assert!(LaserMixPlan::new(vec![0.0, 1.0], 2).is_err());
        assert!(LaserMixConfig {
            bin_choices: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn label_presence_must_agree() {
        let a = cloud(&[0.0], 0);
        let b = PointCloud::new(vec![at(0.0)], vec![0.0], None).unwrap();
        let plan = LaserMixPlan::new(vec![-1.0, 1.0], 0).unwrap();
        assert!(matches!(
            laser_mix(&a, &b, &plan),
            Err(Error::LabelMismatch(_))
        ));
    }
}
