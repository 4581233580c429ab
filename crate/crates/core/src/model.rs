//! Voxel-majority classifier used as a stand-in segmentation network.
//!
//! Fitting tallies ground-truth classes per voxel. A point in a known voxel
//! is scored with that voxel's normalized class counts; otherwise the
//! nearest known voxel within `search_radius` voxels (Chebyshev) is used,
//! and failing that the global class prior.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::tta::{Predictor, ScoreMap};

pub type VoxelKey = [i64; 3];

pub const DEFAULT_SEARCH_RADIUS: u32 = 2;
const FORMAT_TAG: &str = "mixseg3d-voxel-majority/1";

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelMajorityModel {
    voxel_size: f64,
    num_classes: usize,
    search_radius: u32,
    prior: Vec<u64>,
    table: HashMap<VoxelKey, Vec<u32>>,
    offsets: Vec<VoxelKey>,
}

/// Neighbor offsets within a cube, nearest first; ties broken by offset.
fn neighbor_offsets(radius: u32) -> Vec<VoxelKey> {
    let r = radius as i64;
    let mut v = Vec::new();
    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v.sort_by_key(|o| (o[0] * o[0] + o[1] * o[1] + o[2] * o[2], *o));
    v
}

impl VoxelMajorityModel {
    pub fn new(voxel_size: f64, num_classes: usize, search_radius: u32) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::Validation(format!(
                "voxel size must be a positive number of meters, got {voxel_size}"
            )));
        }
        if num_classes == 0 {
            return Err(Error::Validation("model needs at least one class".into()));
        }
        Ok(Self {
            voxel_size,
            num_classes,
            search_radius,
            prior: vec![0; num_classes],
            table: HashMap::new(),
            offsets: neighbor_offsets(search_radius),
        })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn num_voxels(&self) -> usize {
        self.table.len()
    }

    #[inline]
    pub fn key(&self, p: [f64; 3]) -> VoxelKey {
        [
            (p[0] / self.voxel_size).floor() as i64,
            (p[1] / self.voxel_size).floor() as i64,
            (p[2] / self.voxel_size).floor() as i64,
        ]
    }

    /// Adds a labeled scan to the tallies; IGNORE points are skipped.
    pub fn observe(&mut self, cloud: &PointCloud) -> Result<()> {
        let labels = cloud
            .labels()
            .ok_or_else(|| Error::LabelMismatch("fitting needs a labeled scan".into()))?;
        if let Some(i) = labels
            .iter()
            .position(|l| !l.is_ignore() && l.index() >= self.num_classes)
        {
            return Err(Error::InvalidLabel {
                index: i,
                value: labels[i].0,
                num_classes: self.num_classes,
            });
        }
        for (&p, l) in cloud.coords().iter().zip(labels) {
            if l.is_ignore() {
                continue;
            }
            let key = self.key(p);
            let c = self.num_classes;
            self.table.entry(key).or_insert_with(|| vec![0; c])[l.index()] += 1;
            self.prior[l.index()] += 1;
        }
        Ok(())
    }

    pub fn fit<'a>(
        clouds: impl IntoIterator<Item = &'a PointCloud>,
        voxel_size: f64,
        num_classes: usize,
        search_radius: u32,
    ) -> Result<Self> {
        let mut m = Self::new(voxel_size, num_classes, search_radius)?;
        for c in clouds {
            m.observe(c)?;
        }
        m.ensure_trained()?;
        Ok(m)
    }

    pub fn ensure_trained(&self) -> Result<()> {
        if self.table.is_empty() {
            return Err(Error::DegenerateInput(
                "no labeled points to fit the model on".into(),
            ));
        }
        Ok(())
    }

    fn counts_for(&self, p: [f64; 3]) -> Option<&[u32]> {
        let k = self.key(p);
        if let Some(c) = self.table.get(&k) {
            return Some(c);
        }
        self.offsets.iter().find_map(|o| {
            self.table
                .get(&[k[0] + o[0], k[1] + o[1], k[2] + o[2]])
                .map(Vec::as_slice)
        })
    }

    pub fn to_json(&self) -> String {
        let mut voxels: Vec<VoxelRecord> = self
            .table
            .iter()
            .map(|(k, counts)| VoxelRecord {
                key: *k,
                counts: counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(c, &n)| [c as u32, n])
                    .collect(),
            })
            .collect();
        voxels.sort_by_key(|v| v.key);
        let file = ModelFile {
            format: FORMAT_TAG.into(),
            voxel_size: self.voxel_size,
            num_classes: self.num_classes,
            search_radius: self.search_radius,
            prior: self.prior.clone(),
            voxels,
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("bad model file: {e}")))?;
        if file.format != FORMAT_TAG {
            return Err(Error::Data(format!(
                "unknown model format {:?}",
                file.format
            )));
        }
        let mut m = Self::new(file.voxel_size, file.num_classes, file.search_radius)?;
        if file.prior.len() != m.num_classes {
            return Err(Error::Data(
                "prior length does not match class count".into(),
            ));
        }
        m.prior = file.prior;
        for v in file.voxels {
            let mut counts = vec![0u32; m.num_classes];
            for [c, n] in v.counts {
                let slot = counts
                    .get_mut(c as usize)
                    .ok_or_else(|| Error::Data(format!("class {c} out of range in model")))?;
                *slot = n;
            }
            m.table.insert(v.key, counts);
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct VoxelRecord {
    key: VoxelKey,
    /// Sparse `[class, count]` pairs.
    counts: Vec<[u32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    voxel_size: f64,
    num_classes: usize,
    search_radius: u32,
    prior: Vec<u64>,
    voxels: Vec<VoxelRecord>,
}

fn normalize_into<T: Copy + Into<f64>>(counts: &[T], out: &mut Vec<f64>) {
    let total: f64 = counts.iter().map(|&c| c.into()).sum();
    if total > 0.0 {
        out.extend(counts.iter().map(|&c| c.into() / total));
    } else {
        let u = 1.0 / counts.len() as f64;
        out.extend(counts.iter().map(|_| u));
    }
}

impl Predictor for VoxelMajorityModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict(&self, cloud: &PointCloud) -> Result<ScoreMap> {
        let prior: Vec<f64> = self.prior.iter().map(|&c| c as f64).collect();
        let mut scores = Vec::with_capacity(cloud.len() * self.num_classes);
        for &p in cloud.coords() {
            match self.counts_for(p) {
                Some(c) => normalize_into(c, &mut scores),
                None => normalize_into(&prior, &mut scores),
            }
        }
        ScoreMap::new(self.num_classes, scores)
    }
}
