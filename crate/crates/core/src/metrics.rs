//! Confusion-matrix accumulation and class-wise IoU / mIoU.
//!
//! Rows are ground truth, columns are predictions. Ground-truth points
//! labeled [`ClassId::IGNORE`] are skipped. Classes with no ground-truth
//! and no predicted points have no IoU and are left out of the mean.

use std::fmt::Write as _;

use crate::classes::ClassId;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one count per non-ignored point. Inputs are validated before
    /// the matrix is touched.
    pub fn accumulate(&mut self, gt: &[ClassId], pred: &[ClassId]) -> Result<()> {
        self.accumulate_with_ignore(gt, pred, ClassId::IGNORE)
    }

    /// As [`accumulate`](Self::accumulate), skipping ground truth equal to
    /// `ignore` instead of the default ignore id.
    pub fn accumulate_with_ignore(
        &mut self,
        gt: &[ClassId],
        pred: &[ClassId],
        ignore: ClassId,
    ) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::LabelMismatch(format!(
                "{} ground-truth labels vs {} predictions",
                gt.len(),
                pred.len()
            )));
        }
        let c = self.num_classes;
        if let Some(i) = pred.iter().position(|p| p.index() >= c) {
            return Err(Error::InvalidLabel {
                index: i,
                value: pred[i].0,
                num_classes: c,
            });
        }
        if let Some(i) = gt.iter().position(|&g| g != ignore && g.index() >= c) {
            return Err(Error::InvalidLabel {
                index: i,
                value: gt[i].0,
                num_classes: c,
            });
        }
        for (&g, p) in gt.iter().zip(pred) {
            if g != ignore {
                self.counts[g.index() * c + p.index()] += 1;
            }
        }
        Ok(())
    }

    /// Element-wise sum; associative and commutative.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "cannot merge {}-class and {}-class matrices",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let c = self.num_classes;
        let mut t = ConfusionMatrix::new(c);
        for g in 0..c {
            for p in 0..c {
                t.counts[p * c + g] = self.get(g, p);
            }
        }
        t
    }

    /// `TP / (TP + FP + FN)` per class; `None` when the denominator is 0.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        let c = self.num_classes;
        let mut row = vec![0u64; c];
        let mut col = vec![0u64; c];
        for (g, counts) in self.counts.chunks_exact(c).enumerate() {
            for (p, &v) in counts.iter().enumerate() {
                row[g] += v;
                col[p] += v;
            }
        }
        (0..c)
            .map(|k| {
                let tp = self.get(k, k);
                let denom = row[k] + col[k] - tp;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect()
    }
}

/// Arithmetic mean over present classes.
pub fn mean_iou(ious: &[Option<f64>]) -> Result<f64> {
    let present: Vec<f64> = ious.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::UndefinedMetric("no class is present".into()));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Per-class IoU and mIoU with class names, rendered for the CLI.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub num_points: u64,
}

impl EvalReport {
    pub fn from_matrix(matrix: &ConfusionMatrix, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != matrix.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "{} class names for a {}-class matrix",
                class_names.len(),
                matrix.num_classes()
            )));
        }
        let per_class_iou = matrix.iou_per_class();
        let miou = mean_iou(&per_class_iou)?;
        Ok(Self {
            class_names,
            per_class_iou,
            miou,
            num_points: matrix.total(),
        })
    }

    /// JSON with fixed keys; IoUs as percentages with two decimals and
    /// absent classes as `null`.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n  \"class_names\": [");
        for (i, n) in self.class_names.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&serde_json::to_string(n).expect("string serializes"));
        }
        s.push_str("],\n  \"per_class_iou\": [");
        for (i, v) in self.per_class_iou.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            match v {
                Some(v) => write!(s, "{:.2}", v * 100.0).unwrap(),
                None => s.push_str("null"),
            }
        }
        write!(
            s,
            "],\n  \"miou\": {:.2},\n  \"num_points\": {}\n}}\n",
            self.miou * 100.0,
            self.num_points
        )
        .unwrap();
        s
    }

    pub fn to_table(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(4)
            .max(4);
        let mut s = String::new();
        for (n, v) in self.class_names.iter().zip(&self.per_class_iou) {
            match v {
                Some(v) => writeln!(s, "{n:<width$}  {:>6.2}", v * 100.0).unwrap(),
                None => writeln!(s, "{n:<width$}  {:>6}", "-").unwrap(),
            }
        }
        writeln!(s, "{:<width$}  {:>6.2}", "mIoU", self.miou * 100.0).unwrap();
        s
    }
}
