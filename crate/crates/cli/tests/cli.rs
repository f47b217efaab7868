use std::process::{Command, Output};

use formprobe_core::container::{write_media, MediaFile};
use formprobe_core::media::CatalogMedium;

fn formprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn identities_report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = formprobe(&["identities", "--dim", "2", "--grid", "16", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["probe"], "identities");
    assert!(json["flags"].as_array().unwrap().len() > 40);
}

#[test]
fn identities_print_to_stdout_without_out() {
    let out = formprobe(&["identities", "--dim", "1", "--grid", "8"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["params"]["dim"], 1);
    assert!(String::from_utf8_lossy(&out.stderr).lines().all(|l| l.starts_with("pass")));
}

#[test]
fn bridge_check_passes() {
    let out = formprobe(&["bridge", "--check", "--count", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bridge_without_check_is_an_error() {
    assert_eq!(formprobe(&["bridge"]).status.code(), Some(2));
}

#[test]
fn estimate_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("s.csv");
    let out = formprobe(&[
        "estimate", "--variant", "interior", "--dim", "2", "--rank", "1", "--ensemble", "4", "--grid", "16", "--seed", "3",
        "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["samples"].as_array().unwrap().len(), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,lhs,rhs,ratio,refined_ratio");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn weighted_probe_rejects_nonpositive_tau() {
    let out = formprobe(&["estimate", "--variant", "weighted", "--dim", "2", "--tau", "-1", "--ensemble", "2", "--grid", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("τ > 0"));
}

#[test]
fn media_can_come_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fpm");
    let file = MediaFile::catalog(2, 1, CatalogMedium::GaussianScalar);
    write_media(std::fs::File::create(&path).unwrap(), &file).unwrap();
    let media = format!("file:{}", path.display());
    let out = formprobe(&["estimate", "--variant", "interior", "--dim", "2", "--rank", "1", "--media", &media, "--ensemble", "3", "--grid", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let missing = formprobe(&["estimate", "--variant", "interior", "--dim", "2", "--media", "file:/nonexistent", "--ensemble", "1", "--grid", "8"]);
    assert_eq!(missing.status.code(), Some(2));
}
