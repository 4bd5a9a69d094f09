use std::path::Path;
use std::process::{Command, Output};

use gainpdf::synth::default_set;
use gainpdf::workflow::{solve_point, Dataset, ProblemConfig};

fn gainpdf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gainpdf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gainpdf(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn generated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--assets", "8", "--scenarios", "100", "--seed", "7"]);
    dir
}

#[test]
fn gen_is_reproducible() {
    let a = generated();
    let b = tempfile::tempdir().unwrap();
    ok(b.path(), &["gen", "--seed", "7"]);
    for f in ["scenarios.json", "constraints.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let (y, _) = default_set::<f64>().unwrap();
    let text = std::fs::read_to_string(a.path().join("scenarios.json")).unwrap();
    let loaded: gainpdf::ScenarioSet64 = serde_json::from_str(&text).unwrap();
    assert_eq!(loaded, y);
    assert_eq!((loaded.n_assets(), loaded.n_scenarios()), (8, 100));

    ok(b.path(), &["gen", "--format", "csv", "-o", "csv"]);
    assert!(b.path().join("csv/scenarios.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = generated();
    assert_eq!(gainpdf(dir.path(), &["gen", "--scenarios", "1"]).status.code(), Some(2));
    assert_eq!(gainpdf(dir.path(), &["frontier", "--a", ""]).status.code(), Some(2));
    assert_eq!(gainpdf(dir.path(), &["frontier", "--bogus"]).status.code(), Some(2));
    assert_eq!(gainpdf(dir.path(), &["match", "-s", "nope.json"]).status.code(), Some(1));
    assert_eq!(gainpdf(dir.path(), &["frontier", "--a", "0.5", "--budget", "1000"]).status.code(), Some(3));
    assert_eq!(gainpdf(dir.path(), &["marginal", "--target-objective", "5"]).status.code(), Some(4));
}

#[test]
fn frontier_rows_and_endpoints() {
    let dir = generated();
    ok(dir.path(), &["frontier", "--a", "0,0.5,1", "--plot"]);
    let csv = std::fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("frontier.svg").exists());
    let f: gainpdf::Frontier<f64> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("frontier.json")).unwrap()).unwrap();
    let (y, cs) = default_set::<f64>().unwrap();
    let data = Dataset::new(y, cs).unwrap();
    for (pt, a) in f.points.iter().zip([0.0, 0.5, 1.0]) {
        let sol = solve_point(&ProblemConfig::default(), &data, a).unwrap();
        assert_eq!(pt.portfolio, sol.portfolio);
        assert_eq!(pt.objective, sol.objective);
    }
}

#[test]
fn match_identity_and_uncapped() {
    let dir = generated();
    let out = ok(dir.path(), &["match", "--boost-from", "q70", "--gamma", "1.0", "-o", "id"]);
    assert!(out.contains("D 0.000000e0 -> 0.000000e0"), "{out}");
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("id/portfolio.json")).unwrap()).unwrap();
    assert_eq!(p["original"], p["matched"]);

    ok(dir.path(), &["match", "--uncap", "--plot", "-o", "unc"]);
    let r: gainpdf::workflow::MatchReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("unc/report.json")).unwrap()).unwrap();
    assert!(r.discrepancy <= 0.1 * r.initial_discrepancy, "{} vs {}", r.discrepancy, r.initial_discrepancy);
    for f in ["pdfs.csv", "target.json", "match.svg", "portfolio.svg"] {
        assert!(dir.path().join("unc").join(f).exists(), "{f}");
    }
    // The matched portfolio can seed another run under the same constraints,
    // and is rejected as a start under the caps.
    ok(dir.path(), &["match", "--uncap", "--init", "unc/portfolio.json", "--gamma", "1", "-o", "again"]);
    let capped = gainpdf(dir.path(), &["match", "--init", "unc/portfolio.json", "-o", "bad"]);
    assert_eq!(capped.status.code(), Some(3));
}

#[test]
fn user_target_file_round_trips() {
    let dir = generated();
    ok(dir.path(), &["match", "-o", "first"]);
    let out = ok(dir.path(), &["match", "--target", "first/target.json", "-o", "second"]);
    assert!(out.contains("reduction"));
    assert_eq!(
        std::fs::read(dir.path().join("first/target.json")).unwrap(),
        std::fs::read(dir.path().join("second/target.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("first/portfolio.json")).unwrap(),
        std::fs::read(dir.path().join("second/portfolio.json")).unwrap()
    );
}

#[test]
fn marginal_of_baseline_is_zero() {
    let dir = generated();
    let (y, cs) = default_set::<f64>().unwrap();
    let v = solve_point(&ProblemConfig::default(), &Dataset::new(y, cs).unwrap(), 0.5).unwrap().objective;
    let target = format!("{v:e}");
    ok(dir.path(), &["marginal", "--target-objective", &target]);
    let r: gainpdf::MarginalCostResult64 =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("marginal.json")).unwrap()).unwrap();
    assert_eq!(r.delta_b, 0.0);
    ok(dir.path(), &["marginal", "--delta-a", "0"]);
}

#[test]
fn landscape_grid_shape() {
    let dir = generated();
    ok(dir.path(), &["landscape", "--B", "80:120:5", "--a", "0:1:0.1", "--parallel", "4", "--plot"]);
    let csv = std::fs::read_to_string(dir.path().join("landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9 * 11);
    let g: gainpdf::LandscapeGrid64 =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("landscape.json")).unwrap()).unwrap();
    assert_eq!((g.b_values.len(), g.a_values.len()), (9, 11));
    assert!(dir.path().join("iso.json").exists() && dir.path().join("landscape.svg").exists());
}
