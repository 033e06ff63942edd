use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tiltprior");

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("spawn binary")
}

fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let both = run(dir.path(), &["bands", "--set", "epsilon=1", "--set", "kappa=0.1"]);
    assert_eq!(both.status.code(), Some(1));
    let unknown = run(dir.path(), &["bands", "--set", "epsilon=1", "--set", "no-such-key=3"]);
    assert_eq!(unknown.status.code(), Some(1));
    let elicit_eps = run(dir.path(), &["elicit", "--set", "epsilon=1"]);
    assert_eq!(elicit_eps.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&elicit_eps.stderr).is_empty());
}

#[test]
fn missing_subcommand_exits_1() {
    let out = Command::new(BIN).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupted_band_exits_2_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["bands", "--set", "epsilon=1", "--set", "bands.presets=[\"increasing\",\"corrupted\"]"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("corrupted"), "{stderr}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bands/summary.json")).unwrap()).unwrap();
    let witness = summary["presets"][1]["violation"].as_f64().unwrap();
    assert!((witness - 1.0).abs() < 0.006);
    assert!(summary["presets"][0]["violation"].is_null());
}

#[test]
fn exhausted_rejection_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["compare-posteriors", "--set", "epsilon=1e-6", "--set", "sampler.n=100", "--set", "sampler.max-attempts=1000"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_epsilon_bands_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["bands", "--set", "epsilon=0", "--set", "bands.epsilons=[0.0]"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["bands_increasing.csv", "bands_decreasing.csv", "bands_non-monotone.csv", "bands_model.csv"] {
        let (header, rows) = read_csv(dir.path().join("bands").join(name));
        assert!(!rows.is_empty());
        for row in rows {
            for (h, v) in header.iter().zip(&row).skip(2) {
                assert_eq!(num(v), 1.0, "{name} column {h}");
            }
        }
    }
}

#[test]
fn poisson_classes_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["classes", "--set", "model=poisson", "--set", "epsilon=1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("classes/classes.csv"));
    for t in ["-1", "0.5", "1"] {
        let abc = header.iter().position(|h| *h == format!("abc t={t}")).unwrap();
        let closed = header.iter().position(|h| *h == format!("closed-form t={t}")).unwrap();
        for row in &rows {
            assert!((num(&row[abc]) - num(&row[closed])).abs() < 1e-6, "t={t} at theta {}", row[0]);
        }
    }
}

#[test]
fn member_at_zero_is_the_base() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["classes", "--set", "epsilon=1", "--set", "classes.internal-fraction=0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("classes/classes.csv"));
    let base = header.iter().position(|h| h == "base").unwrap();
    let zero = header.iter().position(|h| h == "abc t=0").unwrap();
    for row in &rows {
        assert!((num(&row[base]) - num(&row[zero])).abs() < 1e-9);
    }
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["compare-posteriors", "--set", "epsilon=1", "--set", "sampler.n=2000", "--set", "sampler.n-t=20000"];
    let digest = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = Command::new(BIN).args(args).args(["--seed", seed, "--out"]).arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        tiltprior_cli::output::read_digests(&out.join("compare-posteriors")).unwrap()
    };
    let a = digest("a", "3");
    let b = digest("b", "3");
    let c = digest("c", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn prints_output_directory_on_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["diagnostics", "--set", "epsilon=1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.trim().ends_with("diagnostics"), "{printed}");
    assert!(dir.path().join("diagnostics/mtp2.csv").exists());
}
