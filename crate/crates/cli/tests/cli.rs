use std::path::Path;
use std::process::{Command, Output};

use lfcodec::codec::LfBitstream;
use lfcodec::lf::load_light_field;

fn lfcodec(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_lfcodec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lfcodec");
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lfcodec(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scene(dir: &Path) {
    ok(dir, &["gen-synthetic", "--width", "24", "--height", "16", "--disparity", "0.5", "--seed", "3", "--out", "lf"]);
}

fn stdout_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn encode_is_deterministic_and_reports_payload_bpp() {
    let dir = tempfile::tempdir().unwrap();
    scene(dir.path());
    let a = ok(dir.path(), &["encode", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--qp", "30", "--out", "a"]);
    ok(dir.path(), &["encode", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--qp", "30", "--out", "b"]);
    let sa = std::fs::read(dir.path().join("a/stream.lfd2")).unwrap();
    assert_eq!(sa, std::fs::read(dir.path().join("b/stream.lfd2")).unwrap());
    let stream = LfBitstream::from_bytes(&sa).unwrap();
    assert_eq!(stream.records.len(), 64);
    let bits: usize = stream.records.iter().map(|r| r.payload.len() * 8).sum();
    let expected = bits as f64 / (64.0 * 24.0 * 16.0);
    assert!((stdout_value(&a, "bpp ") - expected).abs() < 1e-6);
}

#[test]
fn decode_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    ok(d, &["encode", "--manifest", "lf/manifest.json", "--policy", "drop-tl4", "--qp", "26", "--out", "enc"]);
    let text = ok(d, &["decode", "--stream", "enc/stream.lfd2", "--no-enhance", "--manifest", "lf/manifest.json", "--out", "dec"]);
    assert!(text.contains("filled 32"), "{text}");
    let views = std::fs::read_to_string(d.join("dec/views.csv")).unwrap();
    assert_eq!(views.lines().filter(|l| l.ends_with(",copied")).count(), 32);
    assert!(d.join("dec/quality.csv").exists());
    let decoded = load_light_field(&d.join("dec/views/manifest.json")).unwrap();
    assert_eq!((decoded.rows(), decoded.cols(), decoded.view_dims()), (8, 8, (24, 16)));

    let same = ok(d, &["eval", "--manifest", "lf/manifest.json", "--decoded", "lf/manifest.json", "--out", "ev"]);
    assert!(same.contains("psnr inf dB"), "{same}");
    assert!(same.contains("ssim 1.000000"), "{same}");
    let csv = std::fs::read_to_string(d.join("ev/eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);

    let lossy = ok(
        d,
        &["eval", "--manifest", "lf/manifest.json", "--decoded", "dec/views/manifest.json", "--stream", "enc/stream.lfd2", "--out", "ev2"],
    );
    assert!(stdout_value(&lossy, "psnr ") > 15.0);
    assert!(stdout_value(&lossy, "bpp ") > 0.0);
}

#[test]
fn keep_all_decode_matches_codec_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    ok(d, &["encode", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--out", "enc"]);
    ok(d, &["decode", "--stream", "enc/stream.lfd2", "--no-enhance", "--out", "dec"]);
    let stream = LfBitstream::from_bytes(&std::fs::read(d.join("enc/stream.lfd2")).unwrap()).unwrap();
    let expected = lfcodec::codec::decode_sequence(&stream).unwrap();
    let decoded = load_light_field(&d.join("dec/views/manifest.json")).unwrap();
    for (poc, view) in &expected.views {
        assert_eq!(decoded.view(expected.seq.entries()[*poc as usize].pos), view);
    }
}

#[test]
fn rd_sweep_and_bd_of_identical_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    ok(d, &["rd-sweep", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--no-enhance", "--qps", "20,28,36,44", "--out", "rd"]);
    let csv = std::fs::read_to_string(d.join("rd/rd.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    let bd = ok(d, &["eval", "--anchor-curve", "rd/rd.csv", "--test-curve", "rd/rd.csv", "--out", "bd"]);
    assert!(bd.contains("BD-BR 0.0000 %") || bd.contains("BD-BR -0.0000 %"), "{bd}");
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    std::fs::write(d.join("cfg.json"), r#"{"qp": 44, "out": "from_config"}"#).unwrap();
    let low = ok(d, &["encode", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--qp", "10", "--out", "flags"]);
    let high = ok(
        d,
        &["encode", "--config", "cfg.json", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--qp", "10", "--out", "flags2"],
    );
    assert!(d.join("from_config/stream.lfd2").exists());
    assert!(!d.join("flags2").exists());
    assert!(stdout_value(&high, "bpp ") < stdout_value(&low, "bpp "));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!lfcodec(d, &["encode", "--manifest", "missing.json", "--out", "x"]).status.success());
    scene(d);
    // Enhancement without a model, RDO without a synthesis model, corrupt stream.
    ok(d, &["encode", "--manifest", "lf/manifest.json", "--policy", "keep-all", "--out", "enc"]);
    assert!(!lfcodec(d, &["decode", "--stream", "enc/stream.lfd2", "--out", "dec"]).status.success());
    assert!(!lfcodec(d, &["encode", "--manifest", "lf/manifest.json", "--out", "rdo"]).status.success());
    std::fs::write(d.join("bad.lfd2"), b"LFD2junk").unwrap();
    let out = lfcodec(d, &["decode", "--stream", "bad.lfd2", "--no-enhance", "--out", "dec"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!lfcodec(d, &["encode", "--manifest", "lf/manifest.json", "--qp", "60", "--out", "q"]).status.success());
}
