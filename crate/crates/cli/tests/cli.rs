//! End-to-end runs of the `smpci` binary: exit codes, outputs and manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use smpci_core::io::read_image;

const GEOMETRY: &str = r#"
[geometry]
energy_kev = 20.0
z_m = 0.6
pixel_size_um = 27.5
oversampling = 16
oversampling_y = 1
n_pixels_x = 32
n_pixels_y = 2
"#;

const SQUARE: &str = r#"
[mask]
type = "square"
aperture_um = 8.12
period_um = 55.0
m_max = 15
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn smpci(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smpci"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{GEOMETRY}{SQUARE}apertur_um = 3.0\n"));
    let o = smpci(dir.path(), &["mask-analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("apertur_um"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = smpci(dir.path(), &["mask-analyze", "--config", "nope.toml"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_raw_image_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{GEOMETRY}{SQUARE}"));
    let o = smpci(
        dir.path(),
        &["retrieve", "--config", cfg.to_str().unwrap(), "--out", "out", "--raw", "absent.hdr"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

const CONSTANT_MASK: &str = r#"
[mask]
type = "fourier"
coefficients = [0.6]
period_um = 55.0
"#;

#[test]
fn constant_mask_has_no_dpc_sensitivity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{GEOMETRY}{CONSTANT_MASK}"));
    let c = cfg.to_str().unwrap();
    let o = smpci(dir.path(), &["mask-analyze", "--config", c, "--out", "m"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("m/mask_report.txt")).unwrap();
    assert!(report.contains("no DPC sensitivity"), "{report}");
    assert!(report.contains("alpha = 0"), "{report}");
    let o = smpci(dir.path(), &["retrieve", "--config", c, "--out", "m"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no contrast"), "{}", stderr(&o));
}

#[test]
fn fully_open_mask_reports_w_e_equal_to_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let mask = CONSTANT_MASK.replace("[0.6]", "[1.0]");
    let cfg = write_config(dir.path(), &format!("{GEOMETRY}{mask}"));
    let o = smpci(dir.path(), &["mask-analyze", "--config", cfg.to_str().unwrap(), "--out", "m"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("w_e_um = 27.5"), "{}", stdout(&o));
}

fn vacuum_run(dir: &Path) -> PathBuf {
    let body = format!(
        "{GEOMETRY}{SQUARE}\n[phantom]\ntype = \"vacuum\"\n\n[output]\nmodel = \"both\"\n"
    );
    let cfg = write_config(dir, &body);
    let o = smpci(dir, &["simulate", "--config", cfg.to_str().unwrap(), "--out", "sim"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    cfg
}

#[test]
fn vacuum_simulation_records_w_e_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    vacuum_run(dir.path());
    for name in ["flat_closed", "raw_sm_closed", "flat_integrated", "raw_sm_integrated"] {
        let img = read_image(&dir.path().join("sim").join(name)).unwrap();
        for v in img.pixels.iter() {
            assert!((v / 4.06e-6 - 1.0).abs() < 1e-6, "{name}: {v:e}");
        }
    }
}

#[test]
fn flat_over_flat_retrieves_unit_pb_and_zero_dpc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = vacuum_run(dir.path());
    let o = smpci(
        dir.path(),
        &[
            "retrieve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "sim",
            "--raw",
            "sim/flat_closed.hdr",
            "--flat",
            "sim/flat_closed.hdr",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pb = read_image(&dir.path().join("sim/pb")).unwrap();
    let dpc = read_image(&dir.path().join("sim/dpc")).unwrap();
    assert!(pb.pixels.iter().all(|v| *v == 1.0));
    assert!(dpc.pixels.iter().all(|v| *v == 0.0));
}

#[test]
fn mismatched_image_sizes_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = vacuum_run(dir.path());
    let other = GEOMETRY.replace("n_pixels_x = 32", "n_pixels_x = 16");
    let body = format!("{other}{SQUARE}\n[phantom]\ntype = \"vacuum\"\n");
    fs::write(dir.path().join("small.toml"), body).unwrap();
    let o = smpci(dir.path(), &["simulate", "--config", "small.toml", "--out", "small"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = smpci(
        dir.path(),
        &[
            "retrieve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "r",
            "--raw",
            "sim/raw_sm_closed.hdr",
            "--flat",
            "small/flat_closed.hdr",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn manifest_lists_and_hashes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    vacuum_run(dir.path());
    let out = dir.path().join("sim");
    let manifest = fs::read_to_string(out.join("manifest-simulate.sha256")).unwrap();
    let mut listed: Vec<String> = Vec::new();
    for line in manifest.lines() {
        let (hash, name) = line.split_once("  ").unwrap();
        let digest = hex::encode(Sha256::digest(fs::read(out.join(name)).unwrap()));
        assert_eq!(hash, digest, "{name}");
        listed.push(name.to_string());
    }
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with("manifest-"))
        .collect();
    on_disk.sort();
    listed.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn usage_errors_are_reported_by_clap() {
    let dir = tempfile::tempdir().unwrap();
    let o = smpci(dir.path(), &["transmogrify"]);
    assert_eq!(o.status.code(), Some(2));
}
