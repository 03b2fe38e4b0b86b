use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use structcs::grid::{dft2_unitary, ImageGrid};
use structcs::io::{read_complex, read_mask, read_png, write_complex, write_png16};
use structcs::metrics::Quality;

fn structcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structcs"))
        .args(args)
        .env("STRUCTCS_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn smooth_png(path: &Path, n: usize) -> ImageGrid {
    let v: Vec<f64> = (0..n * n)
        .map(|i| {
            let (r, c) = ((i / n) as f64 / n as f64, (i % n) as f64 / n as f64);
            0.5 + 0.25 * (5.0 * r).sin() * (3.0 * c).cos() + if (r - 0.5).abs() < 0.15 && (c - 0.45).abs() < 0.2 { 0.2 } else { 0.0 }
        })
        .collect();
    write_png16(path, &v, n, n, 1.0).unwrap();
    read_png(path).unwrap()
}

#[test]
fn mask_has_requested_popcount_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.pbm");
    let o = structcs(&["mask", "--rows", "256", "--cols", "256", "--samples", "10000", "--sigma", "0.3", "--no-fsr", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_mask(&out).unwrap();
    assert_eq!(m.count(), 10000);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(side["count"], 10000);

    let with = dir.path().join("f.pbm");
    let o = structcs(&["mask", "--rows", "256", "--cols", "256", "--samples", "10000", "--fsr", "--out", with.to_str().unwrap()]);
    assert!(o.status.success());
    let f = read_mask(&with).unwrap();
    assert_eq!(f.count(), 10000);
    assert!(f.fsr().is_some());
}

#[test]
fn infeasible_mask_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.pbm");
    let o = structcs(&["mask", "--rows", "16", "--cols", "16", "--samples", "1000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = structcs(&["mask", "--rows", "16", "--cols", "16", "--sampler", "spiral", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_sampling_recon_is_accurate_and_metrics_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    let truth = smooth_png(&img_path, 32);
    let out = dir.path().join("out");
    let o = structcs(&[
        "recon", "--image", img_path.to_str().unwrap(), "--fraction", "1", "--method", "bpd", "--mode", "wavelet", "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(m["relative_error"].as_f64().unwrap() <= 1e-3);

    let est = read_complex(&out.join("recon.raw")).unwrap();
    let q = Quality::measure(&truth, &est).unwrap();
    assert!((q.ssim - m["ssim"].as_f64().unwrap()).abs() < 1e-12);
    assert!((q.mse - m["mse"].as_f64().unwrap()).abs() < 1e-15);
    assert!((q.relative_error - m["relative_error"].as_f64().unwrap()).abs() < 1e-12);

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,step\n"));
    assert!(out.join("recon.png").exists() && out.join("difference.png").exists() && out.join("mask.pbm").exists());
}

#[test]
fn structured_recon_without_fsr_names_the_extent() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    smooth_png(&img_path, 64);
    let o = structcs(&[
        "recon", "--image", img_path.to_str().unwrap(), "--fraction", "0.3", "--method", "sbpd", "--no-fsr", "--out-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fully-sampled center region of at least ("), "{err}");
}

#[test]
fn recon_from_kspace_matches_image_input() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    let truth = smooth_png(&img_path, 32);
    let k_path = dir.path().join("k.raw");
    write_complex(&k_path, &dft2_unitary(&truth).unwrap()).unwrap();
    let common = ["--fraction", "0.4", "--method", "sbpd", "--mode", "wavelet", "--max-iters", "20", "--reweights", "1"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut args = vec!["recon", "--image", img_path.to_str().unwrap(), "--out-dir", a.to_str().unwrap()];
    args.extend(common);
    assert!(structcs(&args).status.success());
    let mut args = vec!["recon", "--kspace", k_path.to_str().unwrap(), "--out-dir", b.to_str().unwrap()];
    args.extend(common);
    assert!(structcs(&args).status.success());
    let ra = read_complex(&a.join("recon.raw")).unwrap();
    let rb = read_complex(&b.join("recon.raw")).unwrap();
    assert!(ra.sub(&rb).unwrap().norm() <= 1e-9 * ra.norm());
}

#[test]
fn sweep_writes_one_row_per_cell_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    smooth_png(&dir.path().join("a.png"), 32);
    smooth_png(&dir.path().join("b.png"), 32);
    let spec = |out: &str| {
        format!(
            "images = [\"a.png\", \"b.png\"]\nmethods = [\"bpd\", \"bpd_mask\", \"sbpd\"]\nmodes = [\"wavelet\"]\nseeds = [3]\noutput_dir = \"{out}\"\n\n[[samplers]]\nkind = \"laplacian\"\nfraction = 0.3\nfsr = true\n\n[recon]\nmax_iters = 15\nreweights = 1\n"
        )
    };
    fs::write(dir.path().join("s1.toml"), spec("r1")).unwrap();
    fs::write(dir.path().join("s2.toml"), spec("r2")).unwrap();
    for s in ["s1.toml", "s2.toml"] {
        let o = structcs(&["sweep", dir.path().join(s).to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let r1 = fs::read(dir.path().join("r1/results.csv")).unwrap();
    let r2 = fs::read(dir.path().join("r2/results.csv")).unwrap();
    assert_eq!(r1, r2);
    let text = String::from_utf8(r1).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.lines().skip(1).all(|l| l.contains(",ok,")));
}

#[test]
fn sweep_spec_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    fs::write(&p, "images = [\"missing.png\"]\nmethods = [\"bpd\"]\nmodes = [\"wavelet\"]\nseeds = [1]\noutput_dir = \"o\"\n[[samplers]]\nkind = \"laplacian\"\nfraction = 0.2\n").unwrap();
    let o = structcs(&["sweep", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("images"));
}

#[test]
fn transform_dumps_pictures() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    smooth_png(&img_path, 64);
    let out = dir.path().join("t");
    let o = structcs(&["transform", "--image", img_path.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_png(&out.join("wavelet.png")).unwrap().shape(), (64, 64));
    assert!(out.join("curvelet.png").exists());
}

#[test]
fn metrics_subcommand_reports_identity() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    smooth_png(&img_path, 32);
    let o = structcs(&["metrics", "--truth", img_path.to_str().unwrap(), "--estimate", img_path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mse"], 0.0);
    assert!((v["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn non_finite_data_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("x.png");
    let truth = smooth_png(&img_path, 32);
    let mut k = dft2_unitary(&truth).unwrap();
    k.data_mut()[16 * 32 + 16].re = f64::NAN;
    let k_path = dir.path().join("k.raw");
    write_complex(&k_path, &k).unwrap();
    let o = structcs(&[
        "recon", "--kspace", k_path.to_str().unwrap(), "--fraction", "0.5", "--method", "bpd", "--mode", "wavelet", "--out-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
