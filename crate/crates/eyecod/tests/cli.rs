use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eyecod::io::{read_pgm, write_pgm, GrayImage};
use eyecod::optics::{save_masks, MaskPair};
use eyecod::roi::{synth_eye_mask, EyeClass, RoiRect, SegMask, SynthEye};
use eyecod::sim::SimReport;
use eyecod::workload::{amortized_breakdown, load_workload, LayerKind};
use tempfile::TempDir;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn eyecod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eyecod")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gradient(h: usize, w: usize) -> GrayImage {
    GrayImage::new(h, w, (0..h * w).map(|i| ((i * 37) % 256) as u8).collect())
}

#[test]
fn unknown_subcommand_is_usage() {
    assert_eq!(code(&eyecod(&["frobnicate"])), 1);
    assert_eq!(code(&eyecod(&[])), 1);
}

#[test]
fn zero_frames_is_usage() {
    let d = TempDir::new().unwrap();
    let p = data().join("pipeline.json");
    let out = d.path().join("r.json");
    assert_eq!(code(&eyecod(&["sim", "--pipeline", s(&p), "--frames", "0", "--out", s(&out)])), 1);
    assert!(!out.exists());
}

#[test]
fn missing_input_is_validation() {
    let d = TempDir::new().unwrap();
    let o = eyecod(&["capture", "--scene", "/no/such.pgm", "--masks", "/no/m.json", "--out", s(&d.path().join("y.csv"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/no/such.pgm"));
}

#[test]
fn identity_capture_round_trips() {
    let d = TempDir::new().unwrap();
    let scene = d.path().join("scene.pgm");
    let masks = d.path().join("masks.json");
    let y = d.path().join("y.csv");
    let back = d.path().join("back.pgm");
    let img = gradient(24, 24);
    write_pgm(&scene, &img).unwrap();
    save_masks(&MaskPair::identity(24), None, None, &masks).unwrap();
    assert_eq!(code(&eyecod(&["capture", "--scene", s(&scene), "--masks", s(&masks), "--out", s(&y)])), 0);
    let o = eyecod(&["reconstruct", "--measurement", s(&y), "--masks", s(&masks), "--epsilon", "1e-6", "--out", s(&back)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got = read_pgm(&back).unwrap();
    let mse: f64 = (0..24)
        .flat_map(|r| (0..24).map(move |c| (r, c)))
        .map(|(r, c)| (got.get(r, c) as f64 - img.get(r, c) as f64).powi(2))
        .sum::<f64>()
        / 576.0;
    let psnr = 10.0 * (255.0f64.powi(2) / mse).log10();
    assert!(psnr > 60.0, "psnr {psnr}");
}

#[test]
fn noisy_capture_is_deterministic_per_seed() {
    let d = TempDir::new().unwrap();
    let scene = d.path().join("scene.pgm");
    let masks = d.path().join("masks.json");
    write_pgm(&scene, &gradient(15, 15)).unwrap();
    let o = eyecod(&["masks", "--sensor", "31", "--scene", "15", "--seed", "3", "--out", s(&masks)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = |name: &str, sigma: &str| {
        let y = d.path().join(name);
        let o = eyecod(&["capture", "--scene", s(&scene), "--masks", s(&masks), "--sigma", sigma, "--seed", "7", "--out", s(&y)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(y).unwrap()
    };
    assert_eq!(run("a.csv", "0"), run("b.csv", "0"));
    assert_eq!(run("c.csv", "0.01"), run("d.csv", "0.01"));
}

fn roi_of(d: &TempDir, mask: &SegMask, policy: Option<&Path>) -> (i32, Option<RoiRect>, String) {
    let m = d.path().join("mask.pgm");
    let out = d.path().join("roi.json");
    let _ = std::fs::remove_file(&out);
    write_pgm(&m, &mask.to_gray()).unwrap();
    let mut args = vec!["roi", "--mask", s(&m), "--out", s(&out)];
    if let Some(p) = policy {
        args.extend(["--policy", s(p)]);
    }
    let o = eyecod(&args);
    let rect = std::fs::read_to_string(&out).ok().map(|t| serde_json::from_str(&t).unwrap());
    (code(&o), rect, stderr(&o))
}

#[test]
fn roi_is_centered_with_policy_size() {
    let d = TempDir::new().unwrap();
    let mask = synth_eye_mask(&SynthEye::centered(256, 256), 0).unwrap();
    let (c, rect, _) = roi_of(&d, &mask, Some(&data().join("roi_policy.json")));
    assert_eq!(c, 0);
    let r = rect.unwrap();
    assert_eq!((r.height, r.width), (96, 160));
    assert_eq!((r.row0 + r.height / 2, r.col0 + r.width / 2), (128, 128));
}

#[test]
fn background_mask_has_no_pupil() {
    let d = TempDir::new().unwrap();
    let (c, rect, err) = roi_of(&d, &SegMask::filled(64, 64, EyeClass::Background), None);
    assert_eq!(c, 2);
    assert!(rect.is_none());
    assert!(err.contains("no pupil pixels"), "{err}");
}

#[test]
fn shipped_files_validate() {
    let mut args = vec!["workload".to_string(), "validate".into()];
    for f in eyecod::cli::GENERATED {
        args.push(data().join(f).display().to_string());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = eyecod(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn gen_reproduces_shipped_files() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&eyecod(&["workload", "gen", "--out", s(d.path())])), 0);
    for f in eyecod::cli::GENERATED {
        let a = std::fs::read(d.path().join(f)).unwrap();
        let b = std::fs::read(data().join(f)).unwrap();
        assert!(a == b, "{f} differs from the generator output");
    }
    let p = load_workload(d.path().join("pipeline.json")).unwrap();
    let f = amortized_breakdown(&p).unwrap().fractions();
    for (k, want) in [
        (LayerKind::GenericConv, 0.088),
        (LayerKind::PointwiseConv, 0.688),
        (LayerKind::DepthwiseConv, 0.079),
        (LayerKind::FullyConnected, 0.00001),
    ] {
        assert!((f[&k] - want).abs() <= 0.03, "{k}: {}", f[&k]);
    }
    let optical = load_workload(d.path().join("pipeline_optical.json")).unwrap();
    assert!(optical.optical_first_layer);
    let optical_seg = optical.effective_seg().unwrap().total_macs().unwrap();
    assert!(optical_seg < p.effective_seg().unwrap().total_macs().unwrap());
}

#[test]
fn tampered_kernel_names_layer() {
    let d = TempDir::new().unwrap();
    let src = std::fs::read_to_string(data().join("fbnet_c100_96x160.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&src).unwrap();
    let id = v["layers"][5]["id"].as_str().unwrap().to_string();
    v["layers"][5]["k"] = 0.into();
    let f = d.path().join("net.json");
    std::fs::write(&f, v.to_string()).unwrap();
    let o = eyecod(&["workload", "validate", s(&f)]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains(&id) && err.contains("#/layers/5/k"), "{err}");
}

#[test]
fn sim_report_embeds_manifest_and_reruns_identically() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("report.json");
    let p = data().join("pipeline.json");
    let hw = data().join("hw_default.json");
    let args = ["sim", "--hw", s(&hw), "--pipeline", s(&p), "--mode", "tm", "--frames", "60", "--out", s(&out)];
    let o = eyecod(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fps"));
    let first = std::fs::read(&out).unwrap();
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("frame,stream,") && !csv.contains('\r'));

    let r: SimReport = serde_json::from_slice(&first).unwrap();
    let m: eyecod::cli::RunManifest = serde_json::from_value(r.manifest.unwrap()).unwrap();
    assert_eq!(m.command, "sim");
    assert_eq!(m.tool_version, env!("CARGO_PKG_VERSION"));
    assert!(m.config_paths.contains(&hw.display().to_string()));
    let replay: Vec<&str> = m.args.iter().map(String::as_str).collect();
    assert_eq!(code(&eyecod(&replay)), 0);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn sweep_writes_ladder_and_modes() {
    let d = TempDir::new().unwrap();
    let p = data().join("pipeline.json");
    let o = Command::new(env!("CARGO_BIN_EXE_eyecod"))
        .args(["sweep", "--pipeline", s(&p), "--frames", "60", "--out", s(d.path())])
        .env("EYECOD_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ladder = std::fs::read_to_string(d.path().join("ladder.csv")).unwrap();
    assert_eq!(ladder.lines().count(), 6);
    let fps: Vec<f64> = ladder.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(fps.windows(2).all(|w| w[1] > w[0]), "{fps:?}");
    let modes = std::fs::read_to_string(d.path().join("modes.csv")).unwrap();
    let names: Vec<&str> = modes.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["tm", "cc", "ptm"]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v["manifest"]["command"], "sweep");
}

#[test]
fn sweep_failure_names_the_row() {
    let d = TempDir::new().unwrap();
    let hw = d.path().join("hw.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data().join("hw_default.json")).unwrap()).unwrap();
    v["act_gb_bytes"] = 64.into();
    std::fs::write(&hw, v.to_string()).unwrap();
    let p = data().join("pipeline.json");
    let o = eyecod(&["sweep", "--pipeline", s(&p), "--hw", s(&hw), "--out", s(&d.path().join("out"))]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("lens"), "{}", stderr(&o));
}
