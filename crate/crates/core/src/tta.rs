//! Test-time augmentation around a per-point predictor.
//!
//! Every view is applied to the scan, the predictor scores the transformed
//! copy, and the index-aligned score rows are averaged. The reduction sorts
//! each element's per-view values before summing, so the result does not
//! depend on view order or on the order concurrent predictions finish.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::geometry::{apply_augmentation, AugmentationRanges, PointCloud, RigidAugmentation};

/// Tolerance on the per-row sum of normalized scores.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// Supported view counts for [`canonical_views`].
pub const SUPPORTED_VIEW_COUNTS: [usize; 5] = [1, 2, 4, 8, 16];

/// Row-major `N × C` normalized class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    num_classes: usize,
    scores: Vec<f64>,
}

impl ScoreMap {
    pub fn new(num_classes: usize, scores: Vec<f64>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument(
                "score map needs at least one class".into(),
            ));
        }
        if !scores.len().is_multiple_of(num_classes) {
            return Err(Error::InvalidArgument(format!(
                "{} scores is not a multiple of {num_classes} classes",
                scores.len()
            )));
        }
        for (r, row) in scores.chunks_exact(num_classes).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "row {r} has a negative or non-finite score"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self {
            num_classes,
            scores,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_rows(&self) -> usize {
        self.scores.len() / self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.scores.chunks_exact(self.num_classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

/// Anything that scores every point of a scan.
///
/// Predictions must be a pure function of the input cloud.
pub trait Predictor: Sync {
    fn num_classes(&self) -> usize;

    fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap>;

    /// Whether [`tta_predict`] may call `predict` from several threads.
    fn supports_concurrent_calls(&self) -> bool {
        true
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap> {
        (**self).predict(cloud)
    }
    fn supports_concurrent_calls(&self) -> bool {
        (**self).supports_concurrent_calls()
    }
}

/// Wraps a predictor and counts inference calls.
pub struct CountingPredictor<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: Predictor> CountingPredictor<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: Predictor> Predictor for CountingPredictor<P> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict(cloud)
    }
    fn supports_concurrent_calls(&self) -> bool {
        self.inner.supports_concurrent_calls()
    }
}

/// Deterministic view grid.
///
/// Views are ordered yaw-major over yaw `0, π, π/2, 3π/2` with `flip_x`
/// off/on inside, so `k = 2, 4, 8` are prefixes of the same sequence and
/// `k = 8` is the full yaw × flip grid. `k = 16` repeats that grid at
/// scales 0.95 and 1.05.
pub fn canonical_views(k: usize) -> Result<Vec<RigidAugmentation>> {
    if !SUPPORTED_VIEW_COUNTS.contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "unsupported view count {k}, expected one of {SUPPORTED_VIEW_COUNTS:?}"
        )));
    }
    let grid: Vec<RigidAugmentation> = [0.0, PI, FRAC_PI_2, 3.0 * FRAC_PI_2]
        .into_iter()
        .flat_map(|yaw| {
            [false, true]
                .into_iter()
                .map(move |flip_x| RigidAugmentation {
                    yaw,
                    flip_x,
                    ..RigidAugmentation::IDENTITY
                })
        })
        .collect();
    if k <= 8 {
        return Ok(grid[..k].to_vec());
    }
    Ok([0.95, 1.05]
        .into_iter()
        .flat_map(|scale| grid.iter().map(move |v| RigidAugmentation { scale, ..*v }))
        .collect())
}

/// `k` randomly drawn views; ranges default to yaw over the full turn,
/// scale in [0.95, 1.05] and shifts within ±0.2 m per axis.
pub fn random_views<R: Rng + ?Sized>(
    k: usize,
    ranges: &AugmentationRanges,
    rng: &mut R,
) -> Result<Vec<RigidAugmentation>> {
    if k == 0 {
        return Err(Error::InvalidArgument("view count must be positive".into()));
    }
    ranges.validate()?;
    Ok((0..k).map(|_| ranges.sample(rng)).collect())
}

fn predict_view<P: Predictor + ?Sized>(
    predictor: &P,
    cloud: &PointCloud,
    view: &RigidAugmentation,
) -> Result<ScoreMap> {
    let moved = apply_augmentation(cloud, view)?;
    let scores = predictor.predict(&moved)?;
    if scores.num_rows() != cloud.len() {
        return Err(Error::PredictorContract(format!(
            "predictor returned {} rows for {} points",
            scores.num_rows(),
            cloud.len()
        )));
    }
    if scores.num_classes() != predictor.num_classes() {
        return Err(Error::PredictorContract(format!(
            "predictor declared {} classes but returned {}",
            predictor.num_classes(),
            scores.num_classes()
        )));
    }
    Ok(scores)
}

/// Mean of the per-view score maps, renormalized per row.
pub fn tta_predict<P: Predictor + ?Sized>(
    predictor: &P,
    cloud: &PointCloud,
    views: &[RigidAugmentation],
) -> Result<ScoreMap> {
    if views.is_empty() {
        return Err(Error::InvalidArgument("TTA needs at least one view".into()));
    }
    let maps: Vec<ScoreMap> = if predictor.supports_concurrent_calls() && views.len() > 1 {
        views
            .par_iter()
            .map(|v| predict_view(predictor, cloud, v))
            .collect::<Result<_>>()?
    } else {
        views
            .iter()
            .map(|v| predict_view(predictor, cloud, v))
            .collect::<Result<_>>()?
    };
    if maps.len() == 1 {
        return Ok(maps.into_iter().next().unwrap());
    }
    Ok(aggregate(&maps))
}

fn aggregate(maps: &[ScoreMap]) -> ScoreMap {
    let c = maps[0].num_classes;
    let k = maps.len() as f64;
    let len = maps[0].scores.len();
    let mut out = vec![0.0; len];
    let mut column = Vec::with_capacity(maps.len());
    for (j, o) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(maps.iter().map(|m| m.scores[j]));
        column.sort_unstable_by(f64::total_cmp);
        *o = column.iter().sum::<f64>() / k;
    }
    for row in out.chunks_exact_mut(c) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    ScoreMap {
        num_classes: c,
        scores: out,
    }
}

/// Per-row argmax; ties go to the lowest class index.
pub fn argmax_labels(scores: &ScoreMap) -> Vec<ClassId> {
    scores
        .rows()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            ClassId(best as u32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Returns fixed rows regardless of geometry.
    struct Fixed(Vec<f64>, usize);

    impl Predictor for Fixed {
        fn num_classes(&self) -> usize {
            self.1
        }
        fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap> {
            let rows = self.0.chunks_exact(self.1).cycle().take(cloud.len());
            ScoreMap::new(self.1, rows.flatten().copied().collect())
        }
    }

    /// Scores depend on whether the view flipped y.
    struct FlipAware;

    impl Predictor for FlipAware {
        fn num_classes(&self) -> usize {
            2
        }
        fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap> {
            let mut s = Vec::new();
            for (i, p) in cloud.coords().iter().enumerate() {
                let flipped = p[1] < 0.0;
                let row = match (i, flipped) {
                    (0, false) => [0.8, 0.2],
                    (1, false) => [0.2, 0.8],
                    (0, true) => [0.6, 0.4],
                    _ => [0.4, 0.6],
                };
                s.extend(row);
            }
            ScoreMap::new(2, s)
        }
    }

    struct Short;

    impl Predictor for Short {
        fn num_classes(&self) -> usize {
            1
        }
        fn predict(&self, _: &PointCloud) -> Result<ScoreMap> {
            ScoreMap::new(1, vec![1.0])
        }
    }

    fn two_points() -> PointCloud {
        PointCloud::new(vec![[1.0, 1.0, 0.0], [2.0, 3.0, 0.0]], vec![0.0, 0.0], None).unwrap()
    }

    #[test]
    fn view_grid() {
        assert_eq!(
            canonical_views(1).unwrap(),
            vec![RigidAugmentation::IDENTITY]
        );
        let v8 = canonical_views(8).unwrap();
        assert_eq!(v8.len(), 8);
        assert!(v8[0].is_identity());
        for i in 0..8 {
            for j in 0..i {
                assert_ne!(v8[i], v8[j]);
            }
            assert_eq!(v8[i].scale, 1.0);
            assert_eq!(v8[i].shift, [0.0; 3]);
            assert!(!v8[i].flip_y);
        }
        assert_eq!(canonical_views(4).unwrap(), v8[..4].to_vec());
        assert!(canonical_views(3).is_err());
        assert!(canonical_views(0).is_err());
    }

    #[test]
    fn sixteen_views_enumerate_grid_times_scale() {
        let v16 = canonical_views(16).unwrap();
        let v8 = canonical_views(8).unwrap();
        let mut expected = Vec::new();
        for scale in [0.95, 1.05] {
            for v in &v8 {
                expected.push(RigidAugmentation { scale, ..*v });
            }
        }
        assert_eq!(v16, expected);
    }

    #[test]
    fn single_view_equals_prediction() {
        let c = two_points();
        let direct = FlipAware.predict(&c).unwrap();
        let tta = tta_predict(&FlipAware, &c, &[RigidAugmentation::IDENTITY]).unwrap();
        assert_eq!(tta, direct);
    }

    #[test]
    fn two_view_mean() {
        let c = two_points();
        let views = [
            RigidAugmentation::IDENTITY,
            RigidAugmentation {
                flip_x: true,
                ..RigidAugmentation::IDENTITY
            },
        ];
        let out = tta_predict(&FlipAware, &c, &views).unwrap();
        let expected = [0.7, 0.3, 0.3, 0.7];
        for (g, e) in out.as_slice().iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
        let rev: Vec<_> = views.iter().rev().copied().collect();
        assert_eq!(tta_predict(&FlipAware, &c, &rev).unwrap(), out);
    }

    #[test]
    fn constant_predictor_is_fixed_point() {
        let c = two_points();
        let p = Fixed(vec![0.25, 0.5, 0.25], 3);
        let out = tta_predict(&p, &c, &canonical_views(8).unwrap()).unwrap();
        for row in out.rows() {
            for (g, e) in row.iter().zip([0.25, 0.5, 0.25]) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counts_calls() {
        let p = CountingPredictor::new(Fixed(vec![1.0], 1));
        tta_predict(&p, &two_points(), &canonical_views(8).unwrap()).unwrap();
        assert_eq!(p.calls(), 8);
    }

    #[test]
    fn wrong_row_count_is_contract_error() {
        assert!(matches!(
            tta_predict(&Short, &two_points(), &[RigidAugmentation::IDENTITY]),
            Err(Error::PredictorContract(_))
        ));
        assert!(tta_predict(&Short, &two_points(), &[]).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        let m = ScoreMap::new(2, vec![0.1, 0.9, 0.5, 0.5, 0.9, 0.1]).unwrap();
        assert_eq!(argmax_labels(&m), vec![ClassId(1), ClassId(0), ClassId(0)]);
    }

    #[test]
    fn score_map_validation() {
        assert!(ScoreMap::new(2, vec![0.5, 0.6]).is_err());
        assert!(ScoreMap::new(2, vec![1.0]).is_err());
        assert!(ScoreMap::new(2, vec![-0.1, 1.1]).is_err());
        assert!(ScoreMap::new(0, vec![]).is_err());
        assert_eq!(ScoreMap::new(3, vec![]).unwrap().num_rows(), 0);
    }
}
