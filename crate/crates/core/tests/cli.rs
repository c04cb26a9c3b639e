use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use biphoton::scenario::validate_config;
use biphoton::Error;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn default_config() -> PathBuf {
    manifest().join("configs/default.toml")
}

fn biphoton(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
        .args(args)
        .env("BIPHOTON_THREADS", "2")
        .output()
        .expect("binary runs")
}

/// Copy the default config next to a copy of the dispersion file, with
/// `edit` applied to the text.
fn scratch_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    fs::copy(manifest().join("data/ktp_kato2002.disp"), dir.join("ktp.disp")).unwrap();
    let text = fs::read_to_string(default_config())
        .unwrap()
        .replace("../data/ktp_kato2002.disp", "ktp.disp")
        .replace("dir = \"../out\"", "dir = \"out\"");
    let path = dir.join("scenario.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

fn violations(err: Error) -> Vec<(String, String)> {
    match err {
        Error::Invalid(v) => v.into_iter().map(|v| (v.field, v.message)).collect(),
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn shipped_config_is_valid() {
    let cfg = validate_config(default_config()).unwrap();
    assert_eq!(cfg.sweep.length_scales, vec![0.5, 1.0, 2.0]);
    assert!((cfg.degenerate_nm() - 795.3).abs() < 1e-12);
}

#[test]
fn negative_period_is_one_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| {
        t.replace("poling_period_um = 8.52", "poling_period_um = -8.52")
    });
    let v = violations(validate_config(&path).unwrap_err());
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].0, "crystal.poling_period_um");
}

#[test]
fn all_violations_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| {
        t.replace("length_mm = 12.0", "length_mm = 0.0")
            .replace("fwhm_nm = 4.5", "fwhm_nm = -1.0")
            .replace("filter = \"fp_with_ifs\"", "filter = \"nope\"")
    });
    let fields: Vec<String> = violations(validate_config(&path).unwrap_err())
        .into_iter()
        .map(|v| v.0)
        .collect();
    for f in ["crystal.length_mm", "pump.fwhm_nm", "fig4.filter"] {
        assert!(fields.iter().any(|x| x == f), "{f} missing from {fields:?}");
    }
}

#[test]
fn window_outside_dispersion_range_names_both() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| {
        t.replace(
            "signal = { min_nm = 700.0, max_nm = 900.0, samples = 3000 }",
            "signal = { min_nm = 700.0, max_nm = 1300.0, samples = 3000 }",
        )
    });
    let v = violations(validate_config(&path).unwrap_err());
    let (_, msg) = v.iter().find(|(f, _)| f == "grids.large").expect("grids.large flagged");
    assert!(msg.contains("1300"), "{msg}");
    assert!(msg.contains("1100"), "{msg}");
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| t.replace("qpm_order = 1", "qpm_order = = 1"));
    match validate_config(&path).unwrap_err() {
        Error::Parse { line, column, .. } => {
            let text = fs::read_to_string(&path).unwrap();
            let expected = text.lines().position(|l| l.starts_with("qpm_order")).unwrap() + 1;
            assert_eq!(line, expected);
            assert!(column > 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_dispersion_file_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| t.replace("ktp.disp", "absent.disp"));
    let out_dir = tmp.path().join("out");
    let out = biphoton(&[
        "report",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crystal.dispersion_file"));
    assert!(!out_dir.exists());
}

#[test]
fn unreadable_config_exits_with_config_code() {
    let out = biphoton(&["sweep", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_filter_exits_with_degenerate_code() {
    let tmp = tempfile::tempdir().unwrap();
    // A 1 pm filter 10 nm away from degeneracy leaves nothing on the window.
    let path = scratch_config(tmp.path(), |t| {
        t.replacen(
            "type = \"super-gaussian\"\ncenter_nm = 795.3\nfwhm_nm = 3.0",
            "type = \"super-gaussian\"\ncenter_nm = 806.005\nfwhm_nm = 0.001",
            1,
        )
    });
    let out_dir = tmp.path().join("out");
    let out = biphoton(&[
        "hwp-curve",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(5), "{stderr}");
    assert!(stderr.contains("hwp.filters `if3`"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| t);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let out = biphoton(&[
            "hwp-curve",
            "--config",
            path.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "hwp_fp.csv"));
    assert!(names.iter().all(|n| !n.to_string_lossy().ends_with(".partial")));
    for n in names.iter().filter(|n| *n != "run_metadata.json") {
        let a = fs::read(dirs[0].join(n)).unwrap();
        let b = fs::read(dirs[1].join(n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
}

#[test]
fn format_flag_selects_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| t);
    let csv = tmp.path().join("csv");
    let json = tmp.path().join("json");
    for (dir, fmt) in [(&csv, "csv"), (&json, "structured")] {
        let out = biphoton(&[
            "fig4",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--format",
            fmt,
        ]);
        assert!(out.status.success());
    }
    assert!(csv.join("fig4_transmission.csv").exists());
    assert!(!csv.join("fig4_transmission.json").exists());
    assert!(json.join("fig4_transmission.json").exists());
    assert!(!json.join("fig4_transmission.csv").exists());
    let text = fs::read_to_string(csv.join("fig4_transmission.csv")).unwrap();
    assert!(text.starts_with("wavelength_nm,transmission,member_0,member_1,member_2\n"));
}

#[test]
fn report_and_sweep_from_default_config() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scratch_config(tmp.path(), |t| t);
    let out_dir = tmp.path().join("out");
    for cmd in ["report", "sweep"] {
        let out = biphoton(&[
            cmd,
            "--config",
            path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    let value = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key)?.trim().strip_prefix('=')?.trim().parse().ok())
            .unwrap_or_else(|| panic!("{key} missing"))
    };
    assert!((value("marginal_fwhm_signal_nm") - 60.0).abs() < 15.0);
    assert!((value("marginal_fwhm_idler_nm") - 40.0).abs() < 10.0);
    assert!((value("fedorov_r_signal") - 230.0).abs() < 69.0);
    assert!(value("schmidt_number") > 50.0);

    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = sweep.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 10);
    let v3 = rows.iter().find(|r| r[0] == "1" && r[2] == "3").unwrap()[4]
        .parse::<f64>()
        .unwrap();
    assert!((v3 - 0.38).abs() < 0.05, "{v3}");
    let scales: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(scales.into_iter().collect::<Vec<_>>(), vec!["0.5", "1", "2"]);
}
