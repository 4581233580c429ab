//! File-level operations behind each CLI subcommand.
//!
//! Output paths are prefixes: a command writing a scan to `out` produces
//! `out.bin` and `out.label` (plus `out.plan.json` or `out.scores` where
//! relevant).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixtures::ABLATION;
use crate::geometry::{PointCloud, RigidAugmentation};
use crate::io::{self, ClassMap, Manifest, ManifestEntry};
use crate::lasermix;
use crate::metrics::{ConfusionMatrix, EvalReport};
use crate::model::VoxelMajorityModel;
use crate::pipeline::{self, stage_rng, MixRecord, MixSources, Stage, Strategy};
use crate::polarmix;
use crate::scene::{self, SceneSpec};
use crate::tta::{self, argmax_labels, CountingPredictor, ScoreMap};

pub const SCAN_EXT: &str = "bin";
pub const LABEL_EXT: &str = "label";
pub const SCORES_EXT: &str = "scores";
pub const PLAN_EXT: &str = "plan.json";

/// `prefix` with `.ext` appended (not replacing any existing extension).
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn absolute(p: &Path) -> Result<PathBuf> {
    let abs = std::path::absolute(p).map_err(|e| Error::io(p, e))?;
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    Ok(out)
}

/// `path` expressed relative to directory `base`.
fn relative_to(path: &Path, base: &Path) -> Result<PathBuf> {
    let (path, base) = (absolute(path)?, absolute(base)?);
    let p: Vec<_> = path.components().collect();
    let b: Vec<_> = base.components().collect();
    let common = p.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &p[common..] {
        rel.push(c);
    }
    Ok(rel)
}

fn dir_of(path: &Path) -> &Path {
    path.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
}

/// A scan file and its label file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanPair {
    pub scan: PathBuf,
    pub labels: PathBuf,
}

impl ScanPair {
    pub fn from_prefix(prefix: &Path) -> Self {
        Self {
            scan: with_ext(prefix, SCAN_EXT),
            labels: with_ext(prefix, LABEL_EXT),
        }
    }

    pub fn read(&self, classmap: &ClassMap) -> Result<PointCloud> {
        io::read_labeled_scan(&self.scan, &self.labels, classmap)
    }

    fn relative_to(&self, base: &Path) -> Result<Self> {
        Ok(Self {
            scan: relative_to(&self.scan, base)?,
            labels: relative_to(&self.labels, base)?,
        })
    }

    fn resolve(&self, base: &Path) -> Self {
        Self {
            scan: base.join(&self.scan),
            labels: base.join(&self.labels),
        }
    }
}

impl From<&ManifestEntry> for ScanPair {
    fn from(e: &ManifestEntry) -> Self {
        Self {
            scan: e.scan.clone(),
            labels: e.labels.clone(),
        }
    }
}

/// Writes a labeled scan to `prefix.bin` / `prefix.label`.
pub fn write_pair(cloud: &PointCloud, prefix: &Path) -> Result<ScanPair> {
    let pair = ScanPair::from_prefix(prefix);
    ensure_parent(&pair.scan)?;
    io::write_labeled_scan(cloud, &pair.scan, &pair.labels)?;
    Ok(pair)
}

pub fn genscene(spec: &SceneSpec, out: &Path) -> Result<PointCloud> {
    let cloud = scene::generate(spec)?;
    write_pair(&cloud, out)?;
    Ok(cloud)
}

/// On-disk plan record: inputs (relative to the plan file) plus the
/// resolved mix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub primary: ScanPair,
    pub lasermix_partner: ScanPair,
    pub polarmix_partner: ScanPair,
    #[serde(flatten)]
    pub record: MixRecord,
}

/// Inputs for one mixed sample.
pub struct MixJob<'a> {
    pub primary: &'a ScanPair,
    pub lasermix_partner: &'a ScanPair,
    pub polarmix_partner: &'a ScanPair,
    pub strategy: Strategy,
    pub seed: u64,
    pub out: &'a Path,
}

pub fn mix(job: &MixJob<'_>, config: &RunConfig, classmap: &ClassMap) -> Result<MixRecord> {
    let a = job.primary.read(classmap)?;
    let lp = job.lasermix_partner.read(classmap)?;
    let pp = if job.polarmix_partner == job.lasermix_partner {
        lp.clone()
    } else {
        job.polarmix_partner.read(classmap)?
    };
    let sources = MixSources {
        primary: &a,
        lasermix_partner: &lp,
        polarmix_partner: &pp,
    };
    let (out, record) = pipeline::mix_sample(sources, job.strategy, config, job.seed)?;
    write_pair(&out, job.out)?;

    let plan_path = with_ext(job.out, PLAN_EXT);
    let base = dir_of(&plan_path);
    let file = PlanFile {
        primary: job.primary.relative_to(base)?,
        lasermix_partner: job.lasermix_partner.relative_to(base)?,
        polarmix_partner: job.polarmix_partner.relative_to(base)?,
        record: record.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("plan serializes");
    write_text(&plan_path, &(json + "\n"))?;
    Ok(record)
}

/// Mixes every manifest entry with partners drawn from the rest of the
/// manifest. Writes `out_dir/mixed_NNNNN.*` and `out_dir/manifest.txt`.
pub fn mix_manifest(
    manifest: &Manifest,
    out_dir: &Path,
    strategy: Strategy,
    seed: u64,
    config: &RunConfig,
    classmap: &ClassMap,
) -> Result<Manifest> {
    config.validate()?;
    let pairs: Vec<ScanPair> = manifest.entries.iter().map(ScanPair::from).collect();
    let n = pairs.len();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = pipeline::sample_seed(seed, i as u64);
            let (l, p) = pipeline::draw_partners(s, i, n)?;
            let out = out_dir.join(format!("mixed_{i:05}"));
            mix(
                &MixJob {
                    primary: &pairs[i],
                    lasermix_partner: &pairs[l],
                    polarmix_partner: &pairs[p],
                    strategy,
                    seed: s,
                    out: &out,
                },
                config,
                classmap,
            )?;
            let pair = ScanPair::from_prefix(&out);
            Ok(ManifestEntry {
                scan: pair.scan,
                labels: pair.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = Manifest { entries };
    out.save(out_dir.join("manifest.txt"))?;
    Ok(out)
}

/// Re-applies a plan file; the output is byte-identical to the original.
pub fn replay(plan_path: &Path, out: &Path, classmap: &ClassMap) -> Result<PointCloud> {
    let text = fs::read_to_string(plan_path).map_err(|e| Error::io(plan_path, e))?;
    let file: PlanFile = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: bad plan file: {e}", plan_path.display())))?;
    let base = dir_of(plan_path);
    let a = file.primary.resolve(base).read(classmap)?;
    let lp = file.lasermix_partner.resolve(base).read(classmap)?;
    let pp = file.polarmix_partner.resolve(base).read(classmap)?;
    let cloud = pipeline::replay(
        MixSources {
            primary: &a,
            lasermix_partner: &lp,
            polarmix_partner: &pp,
        },
        &file.record,
    )?;
    write_pair(&cloud, out)?;
    Ok(cloud)
}

pub fn fit(
    manifest: &Manifest,
    voxel_size: f64,
    search_radius: u32,
    classmap: &ClassMap,
) -> Result<VoxelMajorityModel> {
    let mut model = VoxelMajorityModel::new(voxel_size, classmap.num_classes(), search_radius)?;
    if manifest.entries.is_empty() {
        return Err(Error::DegenerateInput("manifest lists no scans".into()));
    }
    for e in &manifest.entries {
        let cloud = io::read_labeled_scan(&e.scan, &e.labels, classmap)?;
        model.observe(&cloud)?;
    }
    model.ensure_trained()?;
    Ok(model)
}

fn write_prediction(scores: &ScoreMap, out: &Path) -> Result<()> {
    let labels = with_ext(out, LABEL_EXT);
    ensure_parent(&labels)?;
    io::write_labels(&argmax_labels(scores), labels)?;
    io::write_scores(scores, with_ext(out, SCORES_EXT))
}

/// Scores a scan with the model; writes `out.label` and `out.scores`.
pub fn predict(model: &VoxelMajorityModel, scan: &Path, out: &Path) -> Result<ScoreMap> {
    let cloud = io::read_scan(scan)?;
    let scores = tta::Predictor::predict(model, &cloud)?;
    write_prediction(&scores, out)?;
    Ok(scores)
}

/// Canonical grid, or seeded random views when `random` is set.
pub fn tta_views(
    views: usize,
    seed: u64,
    random: bool,
    config: &RunConfig,
) -> Result<Vec<RigidAugmentation>> {
    if random {
        tta::random_views(
            views,
            &config.tta.random_ranges,
            &mut stage_rng(seed, Stage::TtaViews),
        )
    } else {
        tta::canonical_views(views)
    }
}

pub struct TtaOutcome {
    pub scores: ScoreMap,
    pub predictor_calls: usize,
}

pub fn tta(
    model: &VoxelMajorityModel,
    scan: &Path,
    views: &[RigidAugmentation],
    out: &Path,
) -> Result<TtaOutcome> {
    let cloud = io::read_scan(scan)?;
    let counting = CountingPredictor::new(model);
    let scores = tta::tta_predict(&counting, &cloud, views)?;
    write_prediction(&scores, out)?;
    Ok(TtaOutcome {
        scores,
        predictor_calls: counting.calls(),
    })
}

fn label_files(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|e| e == LABEL_EXT) {
            names.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(names)
}

/// Confusion matrix over `.label` files paired by name across two
/// directories.
pub fn eval_matrix(gt_dir: &Path, pred_dir: &Path, classmap: &ClassMap) -> Result<ConfusionMatrix> {
    let gt = label_files(gt_dir)?;
    let pred = label_files(pred_dir)?;
    if gt != pred {
        let mut offenders: Vec<String> = gt
            .difference(&pred)
            .map(|n| format!("{} (no prediction)", gt_dir.join(n).display()))
            .collect();
        offenders.extend(
            pred.difference(&gt)
                .map(|n| format!("{} (no ground truth)", pred_dir.join(n).display())),
        );
        return Err(Error::Pairing(format!(
            "unpaired label files: {}",
            offenders.join(", ")
        )));
    }
    if gt.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "no .{LABEL_EXT} files in {}",
            gt_dir.display()
        )));
    }
    let names: Vec<&String> = gt.iter().collect();
    let c = classmap.num_classes();
    let shards = names
        .par_iter()
        .map(|name| {
            let g = io::read_labels(gt_dir.join(name), None, classmap)?;
            let p = io::read_labels(pred_dir.join(name), Some(g.len()), classmap)?;
            let mut m = ConfusionMatrix::new(c);
            m.accumulate(&g, &p)?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = ConfusionMatrix::new(c);
    for m in &shards {
        total.merge(m)?;
    }
    Ok(total)
}

pub fn eval(gt_dir: &Path, pred_dir: &Path, classmap: &ClassMap) -> Result<EvalReport> {
    let m = eval_matrix(gt_dir, pred_dir, classmap)?;
    EvalReport::from_matrix(&m, classmap.names().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
}

impl Timing {
    /// Nearest-rank statistics over the samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let rank = |q: f64| s[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
            min_ms: s[0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub n_points: usize,
    pub repeats: usize,
    pub lasermix: Timing,
    pub polarmix: Timing,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "points per scan: {}, repeats: {}",
            self.n_points, self.repeats
        )?;
        for (name, t) in [("laser_mix", &self.lasermix), ("polar_mix", &self.polarmix)] {
            writeln!(
                f,
                "{name:<10} median {:>8.3} ms   p95 {:>8.3} ms   min {:>8.3} ms",
                t.median_ms, t.p95_ms, t.min_ms
            )?;
        }
        Ok(())
    }
}

/// Times plan drawing plus mixing for a pair of synthetic scans.
pub fn bench(
    n_points: usize,
    repeats: usize,
    seed: u64,
    config: &RunConfig,
) -> Result<BenchReport> {
    if n_points == 0 {
        return Err(Error::Validation("bench needs at least one point".into()));
    }
    if repeats == 0 {
        return Err(Error::Validation("bench needs at least one repeat".into()));
    }
    let scene = |s: u64| {
        scene::generate(&SceneSpec {
            seed: s,
            num_points: n_points,
            ..Default::default()
        })
    };
    let (a, b) = (scene(seed)?, scene(seed.wrapping_add(1))?);
    let mut lm = Vec::with_capacity(repeats);
    let mut pm = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let s = pipeline::sample_seed(seed, r as u64);
        let t = Instant::now();
        let plan =
            lasermix::make_plan(&a, &b, &config.lasermix, &mut stage_rng(s, Stage::LaserMix))?;
        let out = lasermix::laser_mix(&a, &b, &plan)?;
        lm.push(t.elapsed().as_secs_f64() * 1e3);
        drop(out);

        let t = Instant::now();
        let plan = polarmix::sample_plan(&config.polarmix, &mut stage_rng(s, Stage::PolarMix))?;
        let out = polarmix::polar_mix(&a, &b, &plan)?;
        pm.push(t.elapsed().as_secs_f64() * 1e3);
        drop(out);
    }
    Ok(BenchReport {
        n_points,
        repeats,
        lasermix: Timing::from_samples(&lm),
        polarmix: Timing::from_samples(&pm),
    })
}

/// Grid of stand-in runs mirroring the published ablation layout; the
/// backbone axis becomes the voxel size of the stand-in model.
#[derive(Clone, Debug)]
pub struct AblationOptions {
    pub train_scenes: usize,
    pub val_scenes: usize,
    pub points: usize,
    pub voxel_sizes: Vec<f64>,
    pub views: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationResult {
    pub voxel_size: f64,
    pub augmentation: String,
    pub tta_views: usize,
    pub miou: f64,
    /// Published number for the same augmentation and TTA count, if any.
    pub reference_miou: Option<f64>,
}

pub fn ablate(opts: &AblationOptions, config: &RunConfig) -> Result<Vec<AblationResult>> {
    if opts.train_scenes < 2 || opts.val_scenes == 0 {
        return Err(Error::DegenerateInput(
            "ablation needs at least two training scenes and one validation scene".into(),
        ));
    }
    let make = |s: u64| {
        scene::generate(&SceneSpec {
            seed: s,
            num_points: opts.points,
            ..Default::default()
        })
    };
    let train: Vec<PointCloud> = (0..opts.train_scenes)
        .map(|i| make(pipeline::sample_seed(opts.seed, i as u64)))
        .collect::<Result<_>>()?;
    let val: Vec<PointCloud> = (0..opts.val_scenes)
        .map(|i| make(pipeline::sample_seed(opts.seed ^ 0x5eed, i as u64)))
        .collect::<Result<_>>()?;

    let augs: [(&str, Option<Strategy>); 4] = [
        ("none", None),
        ("lasermix", Some(Strategy::Lasermix)),
        ("polarmix", Some(Strategy::Polarmix)),
        ("both", Some(Strategy::Both)),
    ];
    let mut results = Vec::new();
    for &voxel in &opts.voxel_sizes {
        for (name, strategy) in augs {
            let mut set: Vec<PointCloud> = train.clone();
            if let Some(strategy) = strategy {
                for i in 0..train.len() {
                    let s = pipeline::sample_seed(opts.seed, (1 << 32) + i as u64);
                    let (l, p) = pipeline::draw_partners(s, i, train.len())?;
                    let src = MixSources {
                        primary: &train[i],
                        lasermix_partner: &train[l],
                        polarmix_partner: &train[p],
                    };
                    set.push(pipeline::mix_sample(src, strategy, config, s)?.0);
                }
            }
            let model = VoxelMajorityModel::fit(
                &set,
                voxel,
                config_classes(),
                crate::model::DEFAULT_SEARCH_RADIUS,
            )?;
            for &k in &opts.views {
                let views = tta::canonical_views(k)?;
                let mut m = ConfusionMatrix::new(config_classes());
                for v in &val {
                    let scores = tta::tta_predict(&model, v, &views)?;
                    m.accumulate(v.labels().unwrap(), &argmax_labels(&scores))?;
                }
                let miou = crate::metrics::mean_iou(&m.iou_per_class())?;
                let reference_miou = ABLATION
                    .iter()
                    .find(|r| {
                        r.backbone == "MinkUNet-101" && r.augmentation == name && r.tta_views == k
                    })
                    .map(|r| r.miou);
                results.push(AblationResult {
                    voxel_size: voxel,
                    augmentation: name.to_string(),
                    tta_views: k,
                    miou: miou * 100.0,
                    reference_miou,
                });
            }
        }
    }
    Ok(results)
}

fn config_classes() -> usize {
    crate::classes::NUM_CLASSES
}
