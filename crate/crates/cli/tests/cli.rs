use std::process::Command;

use modelmap::io::{write_binary, write_delimited};
use modelmap::LikelihoodMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modelmap"))
}

fn matrix(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = LikelihoodMatrix::from_array(Array2::from_shape_fn((6, 30), |_| -rng.random_range(1.0..90.0))).unwrap();
    let csv = dir.join("l.csv");
    let raw = dir.join("l.bin");
    write_delimited(std::fs::File::create(&csv).unwrap(), &l).unwrap();
    write_binary(std::fs::File::create(&raw).unwrap(), l.values()).unwrap();
    (csv, raw)
}

fn body(out: &[u8]) -> String {
    String::from_utf8_lossy(out).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn verify_passes() {
    let out = bin().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = matrix(dir.path());
    let usage = bin().args(["error", "-R", "0", "-i"]).arg(&csv).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let unknown = bin().args(["plan", "--nope"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let missing = bin().args(["plan", "-i", "/definitely/not/here.csv"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    std::fs::write(dir.path().join("bad.csv"), "model_id,a,b\nm0,1,2\nm1,3,x\n").unwrap();
    let bad = bin().args(["center", "-i"]).arg(dir.path().join("bad.csv")).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn binary_and_delimited_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, raw) = matrix(dir.path());
    let a = bin().args(["distances", "-i"]).arg(&csv).output().unwrap();
    let b = bin().args(["distances", "-i"]).arg(&raw).output().unwrap();
    assert!(a.status.success() && b.status.success());
    let values = |s: String| -> Vec<String> {
        s.lines().skip(1).flat_map(|l| l.split(',').skip(1).map(str::to_string).collect::<Vec<_>>()).collect()
    };
    assert_eq!(values(body(&a.stdout)), values(body(&b.stdout)));
}

#[test]
fn output_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = matrix(dir.path());
    let target = dir.path().join("plan.csv");
    let out = bin().args(["plan", "--method", "ls", "-i"]).arg(&csv).arg("-o").arg(&target).output().unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&target).unwrap();
    for key in ["# modelmap_version:", "# config_digest:", "# dataset_digest:", "# conventions:"] {
        assert!(text.contains(key), "missing {key}");
    }
    assert_eq!(body(text.as_bytes()).lines().count(), 31);
}
