use std::path::Path;
use std::process::{Command, Output};

fn swipt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swipt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("runs the CLI")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Number after `"key":` in a one-line JSON object.
fn field(json: &str, key: &str) -> f64 {
    let tag = format!("\"{key}\":");
    let start = json
        .find(&tag)
        .unwrap_or_else(|| panic!("no {key} in {json}"))
        + tag.len();
    let rest = &json[start..];
    let end = rest.find([',', '}']).unwrap();
    rest[..end].trim_matches('"').parse().unwrap()
}

fn worked_config(dir: &Path) {
    std::fs::write(
        dir.join("worked.cfg"),
        "# two relays, unit hop gains\nk = 2\nbeta = 0.5\ngain = 1\nnoise_dbm = 30\ngamma_db = 0\n",
    )
    .unwrap();
}

#[test]
fn min_power_on_worked_instance() {
    let dir = tempfile::tempdir().unwrap();
    worked_config(dir.path());
    let o = swipt(dir.path(), &["min-power", "--config", "worked.cfg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "e0_star_w") - 7.0).abs() < 1e-12);
    assert!((field(&out, "e0_star_dbm") - 38.45098).abs() < 1e-5);
    assert!(out.contains("\"rho\":[0.857142857142857"), "{out}");
    assert!(out.contains(",0.666666666666666"), "{out}");
    // Manifest goes to stderr when writing to stdout.
    assert!(stderr(&o).starts_with("{\"command\":\"min-power\""));
}

#[test]
fn max_rate_on_worked_instance() {
    let dir = tempfile::tempdir().unwrap();
    worked_config(dir.path());
    let e0_dbm = format!("{}", 10.0 * 7f64.log10() + 30.0);
    let o = swipt(
        dir.path(),
        &["max-rate", "--config", "worked.cfg", "--e0-dbm", &e0_dbm],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "gamma_hat") - 1.0).abs() < 1e-12);
    assert!((field(&out, "rate_bps_hz") - 1.0).abs() < 1e-12);
}

#[test]
fn node_count_reports_both_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = swipt(
        dir.path(),
        &["node-count", "--e0-dbm", "50", "--gamma-db", "20"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(field(&out, "difference").abs() <= 1.0);
    assert!(out.contains("\"k_formula\":") && out.contains("\"k_exact\":"));
}

#[test]
fn flag_beats_config_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "beta = 0.4\nd = 3\n").unwrap();
    let o = swipt(
        dir.path(),
        &[
            "min-power",
            "--config",
            "c.cfg",
            "--beta",
            "0.6",
            "--out",
            "r.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(dir.path().join("r.json.manifest.jsonl")).unwrap();
    assert!(manifest.contains(r#"{"key":"beta","value":"0.6","source":"flag"}"#));
    assert!(manifest.contains(r#"{"key":"d","value":"3","source":"config"}"#));
    assert!(manifest.contains(r#"{"key":"alpha","value":"3","source":"default"}"#));
    assert!(manifest
        .lines()
        .next()
        .unwrap()
        .contains(r#""outputs":["r.json","r.json.manifest.jsonl"]"#));
}

#[test]
fn figure_presets_are_defaults_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = swipt(
        dir.path(),
        &["sweep", "fig5", "--trials", "10", "--values", "1,2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = stderr(&o);
    assert!(
        m.contains(r#"{"key":"gamma_db","value":"-10","source":"default"}"#),
        "{m}"
    );
    assert!(
        m.contains(r#"{"key":"values","value":"1,2","source":"flag"}"#),
        "{m}"
    );
    let o = swipt(
        dir.path(),
        &[
            "sweep",
            "fig5",
            "--trials",
            "10",
            "--values",
            "1",
            "--gamma-db",
            "3",
        ],
    );
    assert!(stderr(&o).contains(r#"{"key":"gamma_db","value":"3","source":"flag"}"#));
}

#[test]
fn sweep_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = swipt(
        dir.path(),
        &[
            "sweep",
            "fig4",
            "--trials",
            "50",
            "--values=-10,0,10",
            "--seed",
            "3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "swept_value,metric_optimal_db,metric_fixed_db,metric_optimal_linear,metric_fixed_linear,stderr_optimal,stderr_fixed,trials,seed"
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.ends_with(",50,3") && r.split(',').count() == 9));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = swipt(
        dir.path(),
        &["sweep", "fig8", "--trials", "3000", "--threads", "1"],
    );
    let b = swipt(
        dir.path(),
        &["sweep", "fig8", "--trials", "3000", "--threads", "4"],
    );
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        swipt(dir.path(), &["min-power", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        swipt(dir.path(), &["sweep", "fig99"]).status.code(),
        Some(2)
    );
    std::fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(
        swipt(dir.path(), &["min-power", "--config", "bad.cfg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        swipt(dir.path(), &["min-power", "--config", "missing.cfg"])
            .status
            .code(),
        Some(2)
    );

    // Domain errors.
    assert_eq!(
        swipt(dir.path(), &["min-power", "--beta", "1.5"])
            .status
            .code(),
        Some(1)
    );
    std::fs::write(dir.path().join("dead.cfg"), "gain = 1\ngain.2 = 0\n").unwrap();
    assert_eq!(
        swipt(dir.path(), &["min-power", "--config", "dead.cfg"])
            .status
            .code(),
        Some(1)
    );
    let unit_gain = [
        "node-count",
        "--c-db",
        "0",
        "--beta",
        "1",
        "--d",
        "1",
        "--fading-mean",
        "1",
    ];
    assert_eq!(swipt(dir.path(), &unit_gain).status.code(), Some(1));

    assert_eq!(swipt(dir.path(), &["node-count"]).status.code(), Some(0));
}

#[test]
fn protocol_compare_bits() {
    let dir = tempfile::tempdir().unwrap();
    let o = swipt(dir.path(), &["protocol-compare", "--k", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("\"centralized_node_bits\":[1280,1312,1184,1088,1024]"),
        "{out}"
    );
    assert!(
        out.contains("\"distributed_node_bits\":[1088,1088,1088,1088,1088]"),
        "{out}"
    );
    assert!(field(&out, "max_ratio_gap") <= 1e-12);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = swipt(dir.path(), &["verify", "--instances", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 8);
    assert!(out.lines().all(|l| l.contains("\"pass\":true")), "{out}");
}

#[test]
fn heterogeneous_chain_from_suffixes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("h.cfg"),
        "k = 3\nbeta = 0.5\nbeta.2 = 0.9\nd.3 = 4\nfading = 1\nfading.4 = 0.3\n",
    )
    .unwrap();
    let o = swipt(dir.path(), &["max-rate", "--config", "h.cfg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let gamma = field(&out, "gamma_hat");
    assert!(gamma > 0.0);
    assert!(out.contains("\"rho\":["));
}
