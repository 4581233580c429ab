mod common;

use std::fs;

use common::{cli, run_pipeline, snapshot};
use mixseg3d_core::io::{self, ClassMap};
use mixseg3d_core::scene::{self, SceneSpec};

fn scenes(dir: &std::path::Path) {
    cli(
        dir,
        &["--seed", "1", "genscene", "--points", "3000", "--out", "a"],
        0,
    );
    cli(
        dir,
        &["--seed", "2", "genscene", "--points", "2500", "--out", "b"],
        0,
    );
}

#[test]
fn genscene_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    cli(
        tmp.path(),
        &["--seed", "5", "genscene", "--points", "1234", "--out", "s"],
        0,
    );
    let got = io::read_labeled_scan(
        tmp.path().join("s.bin"),
        tmp.path().join("s.label"),
        &ClassMap::default(),
    )
    .unwrap();
    let want = scene::generate(&SceneSpec {
        seed: 5,
        num_points: 1234,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(got.len(), 1234);
    assert_eq!(got.labels(), want.labels());
}

#[test]
fn mix_then_replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scenes(d);
    cli(d, &["--seed", "11", "mix", "a", "b", "--out", "out/m"], 0);
    cli(d, &["replay", "out/m.plan.json", "--out", "again"], 0);
    assert_eq!(
        fs::read(d.join("out/m.bin")).unwrap(),
        fs::read(d.join("again.bin")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("out/m.label")).unwrap(),
        fs::read(d.join("again.label")).unwrap()
    );
}

#[test]
fn zero_probabilities_copy_primary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scenes(d);
    fs::write(d.join("off.toml"), "p1 = 0.0\np2 = 0.0\n").unwrap();
    cli(
        d,
        &["--config", "off.toml", "mix", "a", "b", "--out", "m"],
        0,
    );
    assert_eq!(
        fs::read(d.join("a.bin")).unwrap(),
        fs::read(d.join("m.bin")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("a.label")).unwrap(),
        fs::read(d.join("m.label")).unwrap()
    );
}

#[test]
fn lasermix_of_identical_inputs_keeps_points() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scenes(d);
    fs::write(d.join("lm.toml"), "p1 = 1.0\n").unwrap();
    cli(
        d,
        &[
            "--config",
            "lm.toml",
            "mix",
            "a",
            "a",
            "--strategy",
            "lasermix",
            "--out",
            "m",
        ],
        0,
    );
    let cm = ClassMap::default();
    let a = io::read_labeled_scan(d.join("a.bin"), d.join("a.label"), &cm).unwrap();
    let m = io::read_labeled_scan(d.join("m.bin"), d.join("m.label"), &cm).unwrap();
    assert!(m.multiset_eq(&a));
}

#[test]
fn tta_reports_call_count() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scenes(d);
    fs::write(d.join("m.txt"), "a.bin a.label\nb.bin b.label\n").unwrap();
    cli(d, &["fit", "--manifest", "m.txt", "--out", "model.json"], 0);
    let out = cli(
        d,
        &[
            "tta",
            "b.bin",
            "--model",
            "model.json",
            "--views",
            "8",
            "--out",
            "p",
        ],
        0,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("predictor calls: 8"));
    let scores = io::read_scores(d.join("p.scores"), 22).unwrap();
    assert_eq!(scores.len(), 2500 * 22);
    cli(
        d,
        &["predict", "b.bin", "--model", "model.json", "--out", "q"],
        0,
    );
    cli(
        d,
        &[
            "tta",
            "b.bin",
            "--model",
            "model.json",
            "--views",
            "1",
            "--out",
            "r",
        ],
        0,
    );
    assert_eq!(
        fs::read(d.join("q.scores")).unwrap(),
        fs::read(d.join("r.scores")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    scenes(d);

    fs::write(d.join("bad.toml"), "p1 = 1.5\n").unwrap();
    cli(
        d,
        &["--config", "bad.toml", "mix", "a", "b", "--out", "m"],
        2,
    );
    fs::write(d.join("broken.toml"), "p1 = \n").unwrap();
    cli(d, &["--config", "broken.toml", "bench"], 2);
    cli(d, &["bench", "--points", "0"], 2);
    cli(
        d,
        &["tta", "a.bin", "--model", "nope.json", "--out", "x"],
        3,
    );
    cli(d, &["nonsense"], 2);

    let mut bytes = fs::read(d.join("a.bin")).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(d.join("t.bin"), &bytes).unwrap();
    fs::copy(d.join("a.label"), d.join("t.label")).unwrap();
    let out = cli(d, &["mix", "t", "b", "--out", "m"], 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte 47984"));

    fs::write(d.join("one.txt"), "a.bin a.label\n").unwrap();
    cli(d, &["mix", "--manifest", "one.txt", "--out", "mm"], 4);
    fs::write(d.join("pair.txt"), "a.bin b.label\n").unwrap();
    cli(d, &["fit", "--manifest", "pair.txt", "--out", "x.json"], 3);
}

#[test]
fn eval_reports_unpaired_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::create_dir_all(d.join("gt")).unwrap();
    fs::create_dir_all(d.join("pred")).unwrap();
    let l = io::encode_labels(&[mixseg3d_core::ClassId(0)]);
    fs::write(d.join("gt/x.label"), &l).unwrap();
    fs::write(d.join("gt/y.label"), &l).unwrap();
    fs::write(d.join("pred/x.label"), &l).unwrap();
    let out = cli(d, &["eval", "gt", "pred"], 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("y.label"));
    fs::write(d.join("pred/y.label"), &l).unwrap();
    let out = cli(d, &["eval", "gt", "pred", "--format", "json"], 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"miou\": 100.00"));
}

#[test]
fn pipeline_is_deterministic_across_directories_and_jobs() {
    let (t1, t2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_pipeline(t1.path());
    let r2 = run_pipeline(t2.path());
    assert_eq!(r1, r2);
    assert_eq!(snapshot(t1.path()), snapshot(t2.path()));
    let v: serde_json::Value = serde_json::from_str(&r1).unwrap();
    assert!(v["miou"].as_f64().unwrap() > 0.0);

    let d = t1.path();
    cli(
        d,
        &[
            "--jobs",
            "1",
            "--seed",
            "7",
            "mix",
            "--manifest",
            "scenes/manifest.txt",
            "--out",
            "serial",
        ],
        0,
    );
    for i in 0..4 {
        let name = format!("mixed_{i:05}.bin");
        assert_eq!(
            fs::read(d.join("mixed").join(&name)).unwrap(),
            fs::read(d.join("serial").join(&name)).unwrap()
        );
    }
}
