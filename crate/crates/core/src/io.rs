//! Binary scan, label and score files; class maps; dataset manifests.
//!
//! * scan file: `N` little-endian records of four `f32` (x, y, z, intensity)
//! * label file: `N` little-endian `u32` class ids, 255 = IGNORE
//! * score file: `N × C` little-endian `f32`, row-major
//! * class map: one `index<TAB>name` line per class plus `255<TAB>IGNORE`
//! * manifest: one `scan<whitespace>labels` pair per line, `#` comments,
//!   paths relative to the manifest's directory

use std::fs;
use std::path::{Path, PathBuf};

use crate::classes::{ClassId, CLASS_NAMES};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::tta::ScoreMap;

pub const SCAN_RECORD_BYTES: usize = 16;
pub const LABEL_RECORD_BYTES: usize = 4;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Encodes coordinates and intensity; labels are not part of a scan file.
pub fn encode_scan(cloud: &PointCloud) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(cloud.len() * SCAN_RECORD_BYTES);
    for (i, (p, &w)) in cloud.coords().iter().zip(cloud.intensity()).enumerate() {
        let rec = [p[0] as f32, p[1] as f32, p[2] as f32, w];
        if rec.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "point {i} does not fit in a float32 record: {p:?}"
            )));
        }
        for v in rec {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_scan(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let whole = bytes.len() - bytes.len() % SCAN_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: whole as u64,
            msg: format!(
                "truncated record: {} trailing bytes (file size {} is not a multiple of {SCAN_RECORD_BYTES})",
                bytes.len() - whole,
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / SCAN_RECORD_BYTES;
    let mut coords = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(SCAN_RECORD_BYTES).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let vals = [f(0), f(1), f(2), f(3)];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "{}: non-finite value in point {i} (byte {})",
                path.display(),
                i * SCAN_RECORD_BYTES
            )));
        }
        coords.push([vals[0] as f64, vals[1] as f64, vals[2] as f64]);
        intensity.push(vals[3]);
    }
    PointCloud::new(coords, intensity, None)
}

pub fn read_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    decode_scan(&read_bytes(path)?, path)
}

pub fn write_scan(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_scan(cloud)?)
}

pub fn encode_labels(labels: &[ClassId]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.0.to_le_bytes()).collect()
}

pub fn decode_labels(
    bytes: &[u8],
    path: &Path,
    expected_n: Option<usize>,
    classmap: &ClassMap,
) -> Result<Vec<ClassId>> {
    let whole = bytes.len() - bytes.len() % LABEL_RECORD_BYTES;
    if whole != bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: whole as u64,
            msg: format!(
                "file size {} is not a multiple of {LABEL_RECORD_BYTES}",
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / LABEL_RECORD_BYTES;
    if let Some(expected) = expected_n {
        if expected != n {
            return Err(Error::Pairing(format!(
                "{} holds {n} labels but the scan has {expected} points",
                path.display()
            )));
        }
    }
    bytes
        .chunks_exact(LABEL_RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let id = ClassId(u32::from_le_bytes(rec.try_into().unwrap()));
            if classmap.contains(id) {
                Ok(id)
            } else {
                Err(Error::Data(format!(
                    "{}: unknown class id {} at label {i}",
                    path.display(),
                    id.0
                )))
            }
        })
        .collect()
}

pub fn read_labels(
    path: impl AsRef<Path>,
    expected_n: Option<usize>,
    classmap: &ClassMap,
) -> Result<Vec<ClassId>> {
    let path = path.as_ref();
    decode_labels(&read_bytes(path)?, path, expected_n, classmap)
}

pub fn write_labels(labels: &[ClassId], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_labels(labels))
}

/// Reads a scan and its paired label file.
pub fn read_labeled_scan(
    scan: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    classmap: &ClassMap,
) -> Result<PointCloud> {
    let cloud = read_scan(scan)?;
    let l = read_labels(labels, Some(cloud.len()), classmap)?;
    cloud.with_labels(l)
}

/// Writes `<stem>.bin` and, if labeled, `<stem>.label`.
pub fn write_labeled_scan(cloud: &PointCloud, scan: &Path, labels: &Path) -> Result<()> {
    write_scan(cloud, scan)?;
    if let Some(l) = cloud.labels() {
        write_labels(l, labels)?;
    }
    Ok(())
}

pub fn write_scores(scores: &ScoreMap, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = scores
        .as_slice()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    write_bytes(path.as_ref(), &bytes)
}

/// Reads raw row-major scores; no normalization check.
pub fn read_scores(path: impl AsRef<Path>, num_classes: usize) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let rec = 4 * num_classes;
    if num_classes == 0 || bytes.len() % rec != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: (bytes.len() - bytes.len() % rec.max(1)) as u64,
            msg: format!("size {} is not a multiple of {rec}", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

/// Class index ↔ name table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMap {
    names: Vec<String>,
}

impl Default for ClassMap {
    fn default() -> Self {
        Self {
            names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ClassMap {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() || names.len() > ClassId::IGNORE.index() {
            return Err(Error::Validation(format!(
                "class map needs 1..=255 classes, got {}",
                names.len()
            )));
        }
        Ok(Self { names })
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.is_ignore() || id.index() < self.names.len()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut saw_ignore = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Config {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg,
            };
            let (idx, name) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `index<TAB>name`".into()))?;
            let idx: u32 = idx
                .trim()
                .parse()
                .map_err(|_| err(format!("bad class index {idx:?}")))?;
            if ClassId(idx).is_ignore() {
                saw_ignore = true;
                continue;
            }
            if idx as usize != names.len() {
                return Err(err(format!(
                    "class indices must be consecutive from 0; expected {}, got {idx}",
                    names.len()
                )));
            }
            names.push(name.trim().to_string());
        }
        if !saw_ignore {
            log::warn!("{}: no 255<TAB>IGNORE line", path.display());
        }
        Self::new(names)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.names.iter().enumerate() {
            s.push_str(&format!("{i}\t{n}\n"));
        }
        s.push_str(&format!("{}\tIGNORE\n", ClassId::IGNORE.0));
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.render().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub scan: PathBuf,
    pub labels: PathBuf,
}

/// Validated list of (scan, labels) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses and eagerly validates: every file exists and each label
    /// file's record count matches its scan.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Config {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: "expected `scan labels`".into(),
                });
            }
            entries.push(ManifestEntry {
                scan: base.join(parts[0]),
                labels: base.join(parts[1]),
            });
        }
        let m = Self { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            let scan_len = fs::metadata(&e.scan)
                .map_err(|err| Error::io(&e.scan, err))?
                .len();
            let label_len = fs::metadata(&e.labels)
                .map_err(|err| Error::io(&e.labels, err))?
                .len();
            let n_scan = scan_len / SCAN_RECORD_BYTES as u64;
            let n_label = label_len / LABEL_RECORD_BYTES as u64;
            if scan_len % SCAN_RECORD_BYTES as u64 != 0 {
                return Err(Error::Format {
                    path: e.scan.clone(),
                    offset: n_scan * SCAN_RECORD_BYTES as u64,
                    msg: "truncated record".into(),
                });
            }
            if n_scan != n_label || label_len % LABEL_RECORD_BYTES as u64 != 0 {
                return Err(Error::Pairing(format!(
                    "{} has {n_scan} points but {} has {n_label} labels",
                    e.scan.display(),
                    e.labels.display()
                )));
            }
        }
        Ok(())
    }

    /// Writes the manifest with paths relative to its directory when possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!("{} {}\n", rel(&e.scan), rel(&e.labels)));
        }
        write_bytes(path, s.as_bytes())
    }
}
