use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bornlab::cli::RHO_COLUMNS;

fn bornlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bornlab"))
        .args(args)
        .current_dir(dir)
        .env("BORNLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn sorkin_on_born_counts() {
    let dir = tempfile::tempdir().unwrap();
    // amplitudes (1, 0.5, -0.25) scaled by 1e5, no background
    let counts = "combination,counts,dwell_s\n\
                  0,0,1\nA,100000,1\nB,25000,1\nC,6250,1\n\
                  AB,225000,1\nBC,6250,1\nCA,56250,1\nABC,156250,1\n";
    fs::write(dir.path().join("counts.csv"), counts).unwrap();
    let out = bornlab(
        &["sorkin", "--counts", "counts.csv", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let table = rows(&dir.path().join("o/sorkin.csv"));
    assert_eq!(header(&dir.path().join("o/sorkin.csv")), RHO_COLUMNS);
    assert_eq!(table.len(), 1);
    let field = |name: &str| -> f64 {
        let i = RHO_COLUMNS.iter().position(|c| *c == name).unwrap();
        table[0][i].parse().unwrap()
    };
    assert_eq!(field("epsilon"), 0.0);
    // I_AB = 2·1·0.5, I_BC = 2·0.5·(−0.25), I_CA = 2·(−0.25)·1, in units of 1e5
    assert_eq!(field("iAB"), 100000.0);
    assert_eq!(field("iBC"), -25000.0);
    assert_eq!(field("iCA"), -50000.0);
    assert_eq!(field("delta"), 175000.0);
    assert_eq!(field("rho"), 0.0);
    assert_eq!(&table[0][15], "true");

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/sorkin.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "sorkin");
    let sigma = manifest["summary"]["poisson_sigma_rho"].as_f64().unwrap();
    assert!(sigma > 0.0 && sigma < 0.01);
}

#[test]
fn sorkin_rejects_short_counts_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.csv"),
        "combination,counts,dwell_s\nA,1,1\n",
    )
    .unwrap();
    let out = bornlab(&["sorkin", "--counts", "c.csv", "--out", "o"], dir.path());
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn hierarchy_reports_vanishing_higher_orders() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("h.toml"),
        "hierarchy_samples = 500\nseed = 3\n",
    )
    .unwrap();
    let out = bornlab(
        &["hierarchy", "--config", "h.toml", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success());
    let table = rows(&dir.path().join("o/hierarchy.csv"));
    let orders: Vec<&str> = table.iter().map(|r| &r[0]).collect();
    assert_eq!(orders, ["2", "3", "4", "5"]);
    let relative = |r: &csv::StringRecord| r[3].parse::<f64>().unwrap();
    assert!(relative(&table[0]) > 0.1);
    for r in &table[1..] {
        assert!(relative(r) <= 1e-12, "order {} = {}", &r[0], &r[3]);
    }
}

#[test]
fn hierarchy_under_cubic_rule_breaks_third_order() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("h.toml"),
        "rule = \"perturbed_cubic\"\nalpha = 0.01\nhierarchy_samples = 200\n",
    )
    .unwrap();
    let out = bornlab(
        &["hierarchy", "--config", "h.toml", "--out", "o"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = rows(&dir.path().join("o/hierarchy.csv"));
    assert!(table[1][3].parse::<f64>().unwrap() > 1e-6);
}

#[test]
fn json_output_matches_csv_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "points = 11\n").unwrap();
    for (format, out) in [("csv", "a"), ("json", "b")] {
        let status = bornlab(
            &[
                "patterns", "--config", "c.toml", "--format", format, "--out", out,
            ],
            dir.path(),
        );
        assert!(status.status.success());
    }
    let csv_rows = rows(&dir.path().join("a/patterns.csv"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b/patterns.json")).unwrap())
            .unwrap();
    let json_rows = json.as_array().unwrap();
    assert_eq!(json_rows.len(), csv_rows.len());
    for (c, j) in csv_rows.iter().zip(json_rows) {
        let from_csv: f64 = c[8].parse().unwrap();
        assert_eq!(j["pABC"].as_f64().unwrap(), from_csv);
    }
}

#[test]
fn sweep_power_appends_sigma_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "points = 21\n").unwrap();
    let out = bornlab(
        &["sweep-power", "--config", "c.toml", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success());
    let cols = header(&dir.path().join("o/sweep-power.csv"));
    assert_eq!(&cols[..16], RHO_COLUMNS);
    assert_eq!(cols[16], "sigma_rho_per_dp");
    // the zeros of the single-slit envelope leave ρ undefined with empty fields
    let table = rows(&dir.path().join("o/sweep-power.csv"));
    assert!(table.iter().any(|r| r[14].is_empty() && &r[15] == "false"));
}

#[test]
fn sorkin_on_run_counts_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "repetitions = 5\nseed = 4\nreference_rate = 20000.0\npower_fluctuation = 0.01\n",
    )
    .unwrap();
    let out = bornlab(&["run", "--config", "c.toml", "--out", "o"], dir.path());
    assert!(out.status.success());
    let out = bornlab(
        &["sorkin", "--counts", "o/run_counts.csv", "--out", "s"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = rows(&dir.path().join("o/run.csv"));
    let again = rows(&dir.path().join("s/sorkin.csv"));
    assert_eq!(run.len(), 5);
    let rho = |t: &[csv::StringRecord]| t.iter().map(|r| r[14].to_string()).collect::<Vec<_>>();
    assert_eq!(rho(&run), rho(&again));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "repetitions = 20\nseed = 1\n").unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["run", "--config", "c.toml", "--out", out];
        args.extend_from_slice(extra);
        assert!(bornlab(&args, dir.path()).status.success());
        fs::read(dir.path().join(out).join("run.csv")).unwrap()
    };
    let a = run(&[], "a");
    let b = run(&["--seed", "1"], "b");
    let c = run(&["--seed", "2"], "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "slit_widht = 3e-5\n").unwrap();
    let out = bornlab(&["patterns", "--config", "c.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("slit_widht"));
}

#[test]
fn invalid_value_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "wavelength = -1.0\n").unwrap();
    let out = bornlab(
        &["patterns", "--config", "c.toml", "--out", "o"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("wavelength"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = bornlab(&["patterns", "--out", "blocker/sub"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocker"));
}

#[test]
fn sweep_detector_warns_about_ignored_optics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "points = 11\nmask_leakage = 0.05\nnonlinearity = 0.01\n",
    )
    .unwrap();
    let out = bornlab(
        &["sweep-detector", "--config", "c.toml", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}
