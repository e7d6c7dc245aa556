use std::path::Path;
use std::process::{Command, Output};

use epmag_core::spectra::{detect_peaks, Spectrum};
use epmag_core::{Channel, Table};

fn epmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epmag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    all.extend(["--out", p]);
    let out = epmag(&all);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::read_to_string(path).unwrap()
}

fn parse(csv: &str) -> (Vec<String>, Table) {
    let comments: Vec<String> = csv
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l[2..].to_string())
        .collect();
    let mut lines = csv.lines().skip(comments.len());
    let mut table = Table::new(lines.next().unwrap().split(','));
    for l in lines {
        table.rows.push(l.split(',').map(|v| v.parse().unwrap()).collect());
    }
    (comments, table)
}

fn comment_value(comments: &[String], key: &str) -> f64 {
    comments
        .iter()
        .find_map(|c| c.strip_prefix(key))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn eigen_branches_merge_at_exceptional_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(
        dir.path(),
        "eigen.csv",
        &["eigen", "--kappa", "0.3", "--gamma0-khz", "0.7", "--j-max-khz", "0.5"],
    );
    let (comments, t) = parse(&csv);
    assert!(comments[0].starts_with("config {\"command\":\"eigen\""));
    let j = t.column("j_khz").unwrap();
    let gap: Vec<f64> = (0..j.len())
        .map(|k| {
            let r = &t.rows[k];
            (r[3] - r[5]).hypot(r[4] - r[6])
        })
        .collect();
    let k = (0..gap.len()).min_by(|&a, &b| gap[a].total_cmp(&gap[b])).unwrap();
    let step = j[1] - j[0];
    assert!((j[k] - 0.1485).abs() <= step, "merge at {}", j[k]);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["eigen", "--j-max-khz", "0.3", "--j-points", "61"][..],
        &["split", "--j-points", "12", "--channel", "abs"][..],
        &["spectrum", "--j-khz", "0.1,0.2", "--points", "201"][..],
    ] {
        let a = run_to(dir.path(), "a.csv", args);
        let b = run_to(dir.path(), "b.csv", args);
        assert_eq!(a, b, "{args:?}");
        assert!(a.starts_with("# config {"));
        assert!(!a.contains('\r'));
    }
}

#[test]
fn usage_errors_exit_nonzero() {
    for args in [
        &["eigen", "--j-max-khz", "0"][..],
        &["eigen", "--j-max-khz", "-1"][..],
        &["spectrum", "--j-khz"][..],
        &["spectrum"][..],
        &["split", "--model", "five"][..],
        &["split", "--channel", "phase"][..],
        &["eigen", "--kappa", "0.3", "--omega0-khz", "1"][..],
        &[][..],
    ] {
        let out = epmag(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("params.json");
    std::fs::write(
        &cfg,
        r#"{"gamma_big_khz": 5750.0, "gamma0_khz": 1.0, "omega0_khz": 100.0,
            "j0_khz": 0.0, "delta_rf_khz": 0.0, "delta_opt_khz": 0.0}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let csv = run_to(
        dir.path(),
        "e.csv",
        &["eigen", "--config", c, "--j-max-khz", "0.1", "--j-points", "3"],
    );
    assert!(csv.contains("\"gamma0_khz\":1.0"));
    assert!(csv.contains("\"omega0_khz\":100.0"));
    let csv = run_to(
        dir.path(),
        "f.csv",
        &[
            "eigen",
            "--config",
            c,
            "--gamma0-khz",
            "0.5",
            "--j-max-khz",
            "0.1",
            "--j-points",
            "3",
        ],
    );
    assert!(csv.contains("\"gamma0_khz\":0.5"));
    assert!(csv.contains("\"omega0_khz\":100.0"));

    std::fs::write(&cfg, r#"{"gamma0_khz": 1.0, "bogus": 2}"#).unwrap();
    assert!(!epmag(&["eigen", "--config", c]).status.success());
    assert!(!epmag(&["eigen", "--config", "/nonexistent/params.json"])
        .status
        .success());
}

#[test]
fn spectrum_list_goes_from_single_to_split() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "s.csv", &["spectrum", "--j-khz", "0.05,0.10,0.15"]);
    let (_, t) = parse(&csv);
    let j = t.column("j_khz").unwrap();
    let mut counts = Vec::new();
    for target in [0.05, 0.10, 0.15] {
        let rows: Vec<&Vec<f64>> = t
            .rows
            .iter()
            .zip(&j)
            .filter(|(_, &v)| v == target)
            .map(|(r, _)| r)
            .collect();
        assert_eq!(rows.len(), 1001);
        let s = Spectrum::new(
            rows.iter().map(|r| r[1]).collect(),
            rows.iter().map(|r| r[2]).collect(),
            rows.iter().map(|r| r[3]).collect(),
        )
        .unwrap();
        counts.push(detect_peaks(&s, Channel::Mag).unwrap().count);
    }
    assert_eq!(counts[0], 1);
    assert_eq!(counts[2], 2);
}

#[test]
fn full_and_effective_models_agree_on_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let mut seps = Vec::new();
    for model in ["full4", "eff3"] {
        let csv = run_to(dir.path(), "s.csv", &["spectrum", "--j-khz", "0.4", "--model", model]);
        let (_, t) = parse(&csv);
        let s = Spectrum::new(
            t.column("delta_khz").unwrap(),
            t.column("s_abs").unwrap(),
            t.column("s_dis").unwrap(),
        )
        .unwrap();
        seps.push(detect_peaks(&s, Channel::Mag).unwrap().separation());
    }
    assert!((seps[0] - seps[1]).abs() <= 0.05 * seps[1], "{seps:?}");
}

#[test]
fn magnitude_onset_precedes_absorption_onset() {
    let dir = tempfile::tempdir().unwrap();
    let (mag, _) = parse(&run_to(dir.path(), "m.csv", &["split", "--channel", "mag"]));
    let (abs, _) = parse(&run_to(dir.path(), "a.csv", &["split", "--channel", "abs"]));
    let (jm, ja) = (comment_value(&mag, "onset_khz"), comment_value(&abs, "onset_khz"));
    assert!(jm < ja, "{jm} vs {ja}");
}

#[test]
fn sense_reports_square_root_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let (comments, t) = parse(&run_to(dir.path(), "se.csv", &["sense"]));
    let fit = comments.iter().find_map(|c| c.strip_prefix("fit ")).unwrap();
    let fit: serde_json::Value = serde_json::from_str(fit).unwrap();
    let exponent = fit["exponent"].as_f64().unwrap();
    assert!((exponent - 0.5).abs() <= 0.05, "{exponent}");
    assert_eq!(t.columns, ["epsilon_khz", "separation_khz", "enhancement"]);
    assert!(t.column("enhancement").unwrap()[0] > 10.0);
}

#[test]
fn arcs_table_has_linear_exceptional_points() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t) = parse(&run_to(dir.path(), "arcs.csv", &["arcs", "--kappa-points", "4"]));
    assert_eq!(t.columns, ["kappa", "j_ep_khz", "j_opr_khz", "j_abs_khz"]);
    for r in &t.rows {
        assert!((r[1] / r[0] - 0.7 / 2f64.sqrt()).abs() < 1e-12);
        assert!(r[2] < r[3]);
    }
}

#[test]
fn validate_exit_status_reflects_verdict() {
    let pass = epmag(&["validate", "--gamma-ratio", "100"]);
    assert_eq!(pass.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(report["report"]["pass"], true);
    assert!(String::from_utf8_lossy(&pass.stderr).starts_with("PASS"));

    let fail = epmag(&["validate", "--gamma-ratio", "2"]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stderr).starts_with("FAIL"));
}
