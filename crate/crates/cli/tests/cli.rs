use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scatlite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatlite"))
        .args(args)
        .output()
        .expect("spawn scatlite")
}

fn image(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(format!("{name}.png"))
        .display()
        .to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn sidecar(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(format!("{}.json", path.display())).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scatter_reports_shape_and_compression() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.sct");
    let res = scatlite(&[
        "scatter",
        "--input",
        &image("astronaut"),
        "--out",
        arg(&out),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let meta = sidecar(&out);
    assert_eq!(meta["shape"], serde_json::json!([75, 28, 28]));
    assert_eq!(meta["coefficient_count"], 3 * 19_600);
    assert_eq!(meta["input_values"], 3 * 50_176);
    assert!((meta["ratio"].as_f64().unwrap() - 0.390625).abs() < 1e-12);
    assert_eq!(meta["regime"], "compression");
    let bytes = std::fs::metadata(&out).unwrap().len();
    assert!(bytes > 75 * 28 * 28 * 4);
}

#[test]
fn two_scales_expand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.sct");
    let res = scatlite(&[
        "scatter",
        "--input",
        &image("coffee"),
        "--out",
        arg(&out),
        "--J",
        "2",
    ]);
    assert!(res.status.success());
    let meta = sidecar(&out);
    assert_eq!(meta["shape"], serde_json::json!([51, 56, 56]));
    assert_eq!(meta["regime"], "expansion");
    assert!(meta["ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.sct");
    let res = scatlite(&[
        "scatter",
        "--input",
        arg(&dir.path().join("absent.png")),
        "--out",
        arg(&out),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn batch_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    std::fs::create_dir(&inputs).unwrap();
    std::fs::copy(image("coffee"), inputs.join("good.png")).unwrap();
    std::fs::write(inputs.join("bad.png"), b"not a png").unwrap();
    let out = dir.path().join("out");
    let pattern = format!("{}/*.png", inputs.display());
    let res = scatlite(&[
        "scatter",
        "--input",
        &pattern,
        "--out",
        arg(&out),
        "--size",
        "64",
        "--J",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(out.join("good.sct").exists());
    assert!(!out.join("bad.sct").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(scatlite(&["scatter", "--bogus"]).status.code(), Some(2));
    assert_eq!(scatlite(&["framecheck", "--J", "0"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.sct");
    let res = scatlite(&[
        "scatter",
        "--input",
        &image("coffee"),
        "--out",
        arg(&out),
        "--size",
        "100",
        "--J",
        "3",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn framecheck_prints_both_conventions() {
    let res = scatlite(&["framecheck", "--size", "128", "--json"]);
    assert!(res.status.success());
    let reports: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    let text = reports.to_string();
    assert!(
        text.contains("analytic_only") && text.contains("with_conjugates"),
        "{text}"
    );
}

#[test]
fn reconstruct_round_trip_with_reference() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("s.sct");
    let png = dir.path().join("r.png");
    let src = image("astronaut");
    let res = scatlite(&[
        "scatter",
        "--input",
        &src,
        "--out",
        arg(&coeffs),
        "--size",
        "32",
        "--J",
        "2",
    ]);
    assert!(res.status.success());
    let args = [
        "reconstruct",
        "--coeffs",
        arg(&coeffs),
        "--out",
        arg(&png),
        "--iters",
        "40",
        "--lr",
        "0.05",
        "--reference",
        &src,
    ];
    let res = scatlite(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = stdout(&res);
    assert!(text.contains("err_J") && text.contains("PSNR"), "{text}");
    assert!(png.exists());
    let trace = sidecar(&png);
    assert_eq!(
        trace["err_history"].as_array().unwrap().len(),
        trace["iterations_run"].as_u64().unwrap() as usize
    );
    assert!(trace["psnr"].as_f64().is_some());

    // Same seed, same trace.
    let png2 = dir.path().join("r2.png");
    let mut again = args;
    again[4] = arg(&png2);
    assert!(scatlite(&again).status.success());
    assert_eq!(trace["err_history"], sidecar(&png2)["err_history"]);
}

#[test]
fn reconstruct_rejects_coefficients_from_another_bank() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("s.sct");
    let res = scatlite(&[
        "scatter",
        "--input",
        &image("coffee"),
        "--out",
        arg(&coeffs),
        "--size",
        "32",
        "--J",
        "2",
    ]);
    assert!(res.status.success());
    let side = format!("{}.json", coeffs.display());
    let text = std::fs::read_to_string(&side).unwrap();
    let mut meta: serde_json::Value = serde_json::from_str(&text).unwrap();
    meta["config_hash"] = "0000000000000000".into();
    std::fs::write(&side, meta.to_string()).unwrap();
    let png = dir.path().join("r.png");
    let res = scatlite(&[
        "reconstruct",
        "--coeffs",
        arg(&coeffs),
        "--out",
        arg(&png),
        "--iters",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!png.exists());
}

#[test]
fn stability_is_deterministic_under_seed() {
    let run = |seed: &str| {
        scatlite(&[
            "stability",
            "--size",
            "32",
            "--J",
            "2",
            "--trials",
            "20",
            "--seed",
            seed,
        ])
    };
    let a = run("7");
    let b = run("7");
    let c = run("8");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    for line in stdout(&a).lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["holds"], true);
    }
}

#[test]
fn blob_prints_cosines_and_saves_images() {
    let dir = tempfile::tempdir().unwrap();
    let res = scatlite(&[
        "blob",
        "--size",
        "32",
        "--J",
        "2",
        "--sigma",
        "4 1 3",
        "--out-dir",
        arg(dir.path()),
        "--iters",
        "10",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = stdout(&res);
    let min: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("min cosine "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(min >= 0.999, "{text}");
    for f in [
        "blob.png",
        "reconstruction_numeric.png",
        "reconstruction_analytic.png",
        "report.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bad = scatlite(&["blob", "--size", "32", "--J", "2", "--sigma", "1 2 1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn dump_filters_writes_heatmaps_and_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let res = scatlite(&[
        "dump-filters",
        "--size",
        "32",
        "--J",
        "2",
        "--angles",
        "4",
        "--out-dir",
        arg(dir.path()),
    ]);
    assert!(res.status.success());
    let pngs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(pngs, 2 * 4 + 1);
}
