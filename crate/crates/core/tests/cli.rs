use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eqrender::codec::{pnm, tsr};
use eqrender::model::{load_checkpoint, ModelConfig, ToyParams};
use eqrender::rng::SplitMix64;
use eqrender::tensor::{Image, Tensor};

fn eqrender(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqrender")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = eqrender(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor<f32> {
    let mut rng = SplitMix64::new(seed);
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.next_f64() as f32).collect()).unwrap()
}

#[test]
fn rotate_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsr");
    let out = dir.path().join("out.tsr");
    for shape in [vec![3, 9, 9], vec![4, 8, 8, 8]] {
        tsr::write(&random_tensor(shape, 1), &input).unwrap();
        ok(&["rotate", s(&input), "--out", s(&out)]);
        assert_eq!(fs::read(&input).unwrap(), fs::read(&out).unwrap());
    }
}

#[test]
fn rotate_then_inverse_recovers_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsr");
    let mid = dir.path().join("mid.tsr");
    let back = dir.path().join("back.tsr");
    tsr::write(&random_tensor(vec![2, 12, 12], 2), &input).unwrap();
    let stdout = ok(&["rotate", s(&input), "--theta", "-123.4", "--out", s(&mid)]);
    assert!(stdout.contains("quarter turns 3"), "{stdout}");
    ok(&["rotate", s(&mid), "--theta", "-123.4", "--inverse", "--out", s(&back)]);
    assert_eq!(fs::read(&input).unwrap(), fs::read(&back).unwrap());
    assert_ne!(fs::read(&input).unwrap(), fs::read(&mid).unwrap());

    let scene = random_tensor(vec![4, 10, 10, 10], 3).cast::<f64>();
    tsr::write(&scene, &input).unwrap();
    ok(&["rotate", s(&input), "--theta", "33", "--phi", "-150", "--out", s(&mid)]);
    ok(&["rotate", s(&mid), "--theta", "33", "--phi", "-150", "--inverse", "--out", s(&back)]);
    assert_eq!(fs::read(&input).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn rotate_ppm_stays_within_one_quantisation_step() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ppm");
    let out = dir.path().join("out.ppm");
    let img: Image = random_tensor(vec![3, 16, 16], 4);
    pnm::write(&img, &input).unwrap();
    ok(&["rotate", s(&input), "--out", s(&out)]);
    let back = pnm::read(&out).unwrap();
    for (a, b) in img.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 1.0 / 510.0 + 1e-7);
    }
}

#[test]
fn bad_inputs_fail_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.tsr");
    fs::write(&junk, b"nope").unwrap();
    let missing = dir.path().join("missing.tsr");
    let vector = dir.path().join("v.tsr");
    tsr::write(&random_tensor(vec![5], 1), &vector).unwrap();
    let out = dir.path().join("o.tsr");
    for args in [
        vec!["rotate", s(&junk), "--out", s(&out)],
        vec!["rotate", s(&missing), "--out", s(&out)],
        vec!["rotate", s(&vector), "--out", s(&out)],
        vec!["table-resolution", "--size", "1"],
        vec!["bench-aliasing", "--count", "0"],
        vec!["train", "--data", s(dir.path()), "--out", s(dir.path())],
    ] {
        let o = eqrender(&args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: "));
    }
    assert!(!eqrender(&["synth", "--bogus"]).status.success());
}

#[test]
fn resolution_table_matches_known_values() {
    let csv = ok(&["table-resolution", "--size", "8,16,64"]);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for (row, want) in rows.iter().zip([8.21, 3.82, 0.91]) {
        assert!((row[1] - want).abs() <= 0.01);
        assert!((row[2] - row[1]).abs() <= 0.005);
    }
}

#[test]
fn train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = |x: &str| dir.path().join(x);
    ok(&["synth", "--seed", "0", "--out", s(&p("data"))]);
    ok(&["train", "--data", s(&p("data")), "--steps", "0", "--seed", "5", "--out", s(&p("ck0"))]);
    let (params, meta) = load_checkpoint(p("ck0")).unwrap();
    assert_eq!(params, ToyParams::init(ModelConfig::default(), 5).unwrap());
    assert_eq!(meta.steps, 0);
    assert_eq!(fs::read_to_string(p("ck0/train_log.csv")).unwrap(), "step,l_render,l_scene,total,psnr\n");

    ok(&["train", "--data", s(&p("data")), "--steps", "2000", "--seed", "5", "--out", s(&p("ck"))]);
    let log = fs::read_to_string(p("ck/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2001);

    let psnr = |ck: &str, out: &str| -> f64 {
        ok(&["eval", "--data", s(&p("data")), "--checkpoint", s(&p(ck)), "--out", s(&p(out))]);
        let text = fs::read_to_string(p(out).join("eval.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("pairs,mean_psnr_db,mean_equiv_gap"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "64");
        row[1].parse().unwrap()
    };
    assert!(psnr("ck", "ev") > psnr("ck0", "ev0"));
}
