use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_linf-ramsey"));
    c.env_remove("MAXNORM_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn validate(path: &str) -> Output {
    run(&["validate", path])
}

fn save(dir: &TempDir, name: &str, v: &Value) -> String {
    write(dir, name, &serde_json::to_string(v).unwrap())
}

#[test]
fn extract_finds_a_valid_unit_baton() {
    let dir = TempDir::new().unwrap();
    let subset = write(&dir, "s.json", r#"{"points":[["0","0"],["1","0"],["2","1"],["0","2"],["2","2"]]}"#);
    let cert = dir.path().join("c.json");
    let o = run(&["extract", "--k", "2", "--n", "2", "--subset", &subset, "--out", cert.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(v["distances_checked"], Value::Bool(true));
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert!(validate(cert.to_str().unwrap()).status.success());
}

#[test]
fn extract_general_baton_with_one_alpha_anchors() {
    let dir = TempDir::new().unwrap();
    // the anchor set for alpha = 3/2 is {0, 1, 3/2, 5/2}
    let subset = write(&dir, "s.json", r#"{"points":[["0"],["1"],["3/2"],["5/2"]]}"#);
    let o = run(&["extract", "--subset", &subset, "--baton", "1,3/2", "--anchor-set", "one-alpha"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = save(&dir, "c.json", &stdout_json(&o));
    assert!(validate(&path).status.success());
}

#[test]
fn extract_below_threshold_is_a_precondition_error() {
    let dir = TempDir::new().unwrap();
    let subset = write(&dir, "s.json", r#"{"points":[["0","0"],["1","0"],["0","1"],["1","1"]]}"#);
    let o = run(&["extract", "--k", "2", "--n", "2", "--subset", &subset]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_row_for_b2_in_three_dimensions() {
    let o = run(&["bounds", "--k", "2", "--n", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,lower,upper"));
    let row: Vec<u64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[..2], [3, 4]);
    assert!(row[2] >= 4 && row[2] <= 8);
}

#[test]
fn exact_cover_of_the_square_torus() {
    let o = run(&["cover", "--m", "3", "--d", "2", "--n", "2", "--exact"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["size"], 3);
    assert_eq!(v["optimal"], true);
}

#[test]
fn cover_table_csv() {
    let o = run(&["cover", "table", "--max", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["n,lower,upper,exact", "1,2,2,true", "2,3,3,true", "3,5,5,true"]);
}

#[test]
fn runs_are_byte_identical() {
    for args in [
        &["anchors", "--steps", "1,3/2"][..],
        &["cover", "--m", "4", "--d", "3", "--n", "3", "--random", "--seed", "5"],
        &["chi", "--grid", "2,2"],
        &["bounds", "--k", "3", "--n", "2"],
    ] {
        let a = run(args);
        let b = run(args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn perturbed_copy_certificate_fails_naming_the_pair() {
    let dir = TempDir::new().unwrap();
    let subset = write(&dir, "s.json", r#"{"points":[["0","0"],["1","0"],["2","1"],["0","2"],["2","2"]]}"#);
    let mut v = stdout_json(&run(&["extract", "--k", "2", "--subset", &subset]));
    v["metric"][0][2] = Value::String("3".into());
    v["metric"][2][0] = Value::String("3".into());
    let path = save(&dir, "bad.json", &v);
    let o = validate(&path);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("(0, 2)"), "{err}");
}

#[test]
fn lowered_anchor_value_is_flagged() {
    let dir = TempDir::new().unwrap();
    let mut v = stdout_json(&run(&["anchors", "--steps", "1,3/2"]));
    v["a"][5] = Value::String("1/2".into());
    let path = save(&dir, "bad.json", &v);
    let o = validate(&path);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("monotone") || err.contains("subadditiv"), "{err}");
}

#[test]
fn exhausted_budget_still_writes_a_valid_partial_result() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("chi.json");
    let fixtures = dir.path().join("chi.csv");
    for _ in 0..2 {
        let o = run(&[
            "chi",
            "--grid",
            "3,3",
            "--budget",
            "100",
            "--fixtures",
            fixtures.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(3));
    }
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["optimal"], false);
    assert!(validate(out.to_str().unwrap()).status.success());
    let csv = fs::read_to_string(&fixtures).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "k,n,metric_id,chi,lower,upper");
    assert!(lines[1].starts_with("3,3,B3,,3,"));
}

#[test]
fn budget_comes_from_the_environment() {
    let o = bin().args(["chi", "--grid", "3,3"]).env("MAXNORM_BUDGET", "50").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("50 nodes"));
}

#[test]
fn chi_of_the_square_with_fixture_row() {
    let dir = TempDir::new().unwrap();
    let fixtures = dir.path().join("f.csv");
    let o = run(&["chi", "--grid", "1,2", "--fixtures", fixtures.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["color_count"], 4);
    let csv = fs::read_to_string(&fixtures).unwrap();
    assert_eq!(csv.lines().nth(1), Some("1,2,B1,4,4,4"));
}

#[test]
fn malformed_metric_reports_its_location() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", "{\n  \"distance_matrix\": [[\"0\", \"1\"],\n  [\"1\" \"0\"]]\n}");
    let o = run(&["embed", "--metric", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn invalid_cover_parameters_exit_with_two() {
    let o = run(&["cover", "--m", "3", "--d", "4", "--n", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["cover", "--m", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn embed_and_copies() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"distance_matrix":[["0","1","3"],["1","0","2"],["3","2","0"]]}"#);
    let o = run(&["embed", "--metric", &m]);
    assert!(o.status.success());
    let path = save(&dir, "e.json", &stdout_json(&o));
    assert!(validate(&path).status.success());

    let b2 = write(&dir, "b2.json", r#"{"points":[["0"],["1"],["2"]]}"#);
    let grid = write(
        &dir,
        "g.json",
        r#"{"points":[["0","0"],["0","1"],["0","2"],["1","0"],["1","1"],["1","2"],["2","0"],["2","1"],["2","2"]]}"#,
    );
    let all = stdout_json(&run(&["copies", "--metric", &b2, "--points", &grid]));
    let distinct = stdout_json(&run(&["copies", "--metric", &b2, "--points", &grid, "--supports"]));
    let (all, distinct) = (all["count"].as_u64().unwrap(), distinct["count"].as_u64().unwrap());
    assert_eq!(all, 2 * distinct);
}

#[test]
fn colorings_validate() {
    let dir = TempDir::new().unwrap();
    let b2 = write(&dir, "b2.json", r#"{"points":[["0"],["1"],["2"]]}"#);
    let cases: Vec<Vec<&str>> = vec![
        vec!["color", "--metric", &b2, "--n", "2", "--variant", "u2", "--seed", "3"],
        vec!["color", "--metric", &b2, "--n", "2", "--variant", "u1"],
        vec!["color", "--cube", "--n", "3"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let v = stdout_json(&o);
        assert!(v["class_count"].as_u64().unwrap() >= 2);
        let path = save(&dir, &format!("c{i}.json"), &v);
        let report = validate(&path);
        assert!(report.status.success(), "{args:?}: {}", String::from_utf8_lossy(&report.stderr));
    }
}

#[test]
fn every_emitted_certificate_validates() {
    let dir = TempDir::new().unwrap();
    for (i, args) in [
        &["anchors", "--steps", "1/2,3/4"][..],
        &["anchors", "--steps", "2", "--faithful"],
        &["cover", "--m", "3", "--d", "2", "--n", "3", "--greedy"],
        &["cover", "--m", "5", "--d", "3", "--n", "2", "--random", "--seed", "9"],
        &["chi", "--grid", "2,2"],
    ]
    .iter()
    .enumerate()
    {
        let o = run(args);
        assert!(o.status.success(), "{args:?}");
        let path = save(&dir, &format!("{i}.json"), &stdout_json(&o));
        assert!(validate(&path).status.success(), "{args:?}");
    }
    assert!(!Path::new(&dir.path().join("missing.json")).exists());
    assert_eq!(validate(dir.path().join("missing.json").to_str().unwrap()).status.code(), Some(1));
}
