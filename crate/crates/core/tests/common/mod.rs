#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixseg3d_core::fixtures::LEADERBOARD_CLASS_IOU;
use mixseg3d_core::geometry::PointCloud;
use mixseg3d_core::{ClassId, NUM_CLASSES};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sensor-like scan: ranges 1-80 m, full azimuth, inclination -25..3 deg,
/// uniform labels over all classes.
pub fn random_scan(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let mut coords = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let r: f64 = rng.random_range(1.0..80.0);
        let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let inc: f64 = rng.random_range(-25f64..3.0).to_radians();
        coords.push([
            r * inc.cos() * az.cos(),
            r * inc.cos() * az.sin(),
            r * inc.sin(),
        ]);
        intensity.push(rng.random_range(0.0..1.0));
        labels.push(ClassId(rng.random_range(0..NUM_CLASSES as u32)));
    }
    PointCloud::new(coords, intensity, Some(labels)).unwrap()
}

/// Ground-truth / prediction label sequences whose confusion matrix has
/// per-class IoU exactly equal to the leaderboard values.
///
/// Every class gets a union of 1000 points with `TP = 10 * IoU%`. The
/// remaining `1000 - TP` off-diagonal incidences per class are realized as
/// a multigraph with that degree sequence: repeatedly join the two classes
/// with the most unmet degree by one confused point.
pub fn leaderboard_labels() -> (Vec<ClassId>, Vec<ClassId>) {
    let tp: Vec<u64> = LEADERBOARD_CLASS_IOU
        .iter()
        .map(|v| (v * 10.0).round() as u64)
        .collect();
    let mut need: Vec<u64> = tp.iter().map(|t| 1000 - t).collect();
    assert_eq!(need.iter().sum::<u64>() % 2, 0);

    let (mut gt, mut pred) = (Vec::new(), Vec::new());
    for (c, &t) in tp.iter().enumerate() {
        for _ in 0..t {
            gt.push(ClassId(c as u32));
            pred.push(ClassId(c as u32));
        }
    }
    loop {
        let mut order: Vec<usize> = (0..need.len()).collect();
        order.sort_by_key(|&c| (std::cmp::Reverse(need[c]), c));
        let (i, j) = (order[0], order[1]);
        if need[i] == 0 {
            break;
        }
        assert!(need[j] > 0, "degree sequence not realizable");
        gt.push(ClassId(i as u32));
        pred.push(ClassId(j as u32));
        need[i] -= 1;
        need[j] -= 1;
    }
    (gt, pred)
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mixseg3d")
}

/// Runs the CLI in `dir`; panics with stderr if the exit code differs.
pub fn cli(dir: &Path, args: &[&str], expect: i32) -> Output {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(expect),
        "mixseg3d {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// genscene -> mix -> fit -> tta -> eval through the CLI, all inside `dir`.
/// Returns the eval report JSON.
pub fn run_pipeline(dir: &Path) -> String {
    let s = |v: &str| v.to_string();
    std::fs::create_dir_all(dir.join("scenes")).unwrap();
    std::fs::create_dir_all(dir.join("val")).unwrap();
    let mut manifest = String::new();
    for i in 0..4 {
        let seed = (100 + i).to_string();
        cli(
            dir,
            &[
                "--seed",
                &seed,
                "genscene",
                "--points",
                "6000",
                "--out",
                &format!("scenes/train_{i}"),
            ],
            0,
        );
        manifest.push_str(&format!("train_{i}.bin train_{i}.label\n"));
    }
    std::fs::write(dir.join("scenes/manifest.txt"), manifest).unwrap();
    for i in 0..2 {
        let seed = (900 + i).to_string();
        cli(
            dir,
            &[
                "--seed",
                &seed,
                "genscene",
                "--points",
                "5000",
                "--out",
                &format!("val/val_{i}"),
            ],
            0,
        );
    }
    cli(
        dir,
        &[
            "--seed",
            "7",
            "mix",
            "--manifest",
            "scenes/manifest.txt",
            "--out",
            "mixed",
        ],
        0,
    );
    cli(
        dir,
        &[
            "fit",
            "--manifest",
            "mixed/manifest.txt",
            "--voxel-size",
            "0.5",
            "--out",
            "model.json",
        ],
        0,
    );
    for i in 0..2 {
        let args = [
            s("tta"),
            s(&format!("val/val_{i}.bin")),
            s("--model"),
            s("model.json"),
            s("--views"),
            s("8"),
            s("--out"),
            s(&format!("pred/val_{i}")),
        ];
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        cli(dir, &args, 0);
    }
    let out = cli(
        dir,
        &[
            "eval",
            "val",
            "pred",
            "--format",
            "json",
            "--out",
            "report.json",
        ],
        0,
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every file under `dir` as (relative path, bytes), sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
