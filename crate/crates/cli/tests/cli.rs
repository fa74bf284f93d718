use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonomy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(path: &Path, command: &str, extra: &[&str]) -> Output {
    let p = path.to_string_lossy().into_owned();
    let mut args = vec![command, "--scenario", p.as_str()];
    args.extend_from_slice(extra);
    run(&args)
}

fn records(out: &Output) -> Vec<Value> {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn of_kind<'a>(records: &'a [Value], kind: &str) -> Vec<&'a Value> {
    records.iter().filter(|r| r["record"] == kind).collect()
}

fn temp_scenario(text: &str) -> tempfile::NamedTempFile {
    let file = tempfile::NamedTempFile::new().unwrap();
    fs::write(file.path(), text).unwrap();
    file
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn identity_enumeration_is_a_single_unit_row() {
    let out = records(&run_with(&scenario("identity.json"), "enumerate", &[]));
    let rows = of_kind(&out, "trajectory");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["index"], "0,0");
    assert_eq!(rows[0]["weight"], 1.0);
    assert_eq!(complex(&rows[0]["phase"]), (1.0, 0.0));
    assert_eq!(of_kind(&out, "totals")[0]["total_weight"], 1.0);
}

#[test]
fn dephasing_enumeration_has_eight_rows_summing_to_one() {
    let out = records(&run_with(&scenario("dephasing.json"), "enumerate", &[]));
    let rows = of_kind(&out, "trajectory");
    assert_eq!(rows.len(), 8);
    let sum: f64 = rows.iter().map(|r| r["weight"].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() <= 1e-10);
    // an odd number of phase flips leaves |-> orthogonal to |+>
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[1]["status"], "undefined");
}

#[test]
fn records_carry_provenance() {
    let path = scenario("octant.json");
    let digest = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(fs::read(&path).unwrap()))
    };
    let out = records(&run_with(&path, "interfere", &[]));
    assert!(!out.is_empty());
    for r in &out {
        assert_eq!(r["scenario_hash"], digest.as_str());
        assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn invalid_scenarios_exit_2_without_output() {
    for text in [
        r#"{"dim":3,"initial":{"preset":"zero"},"steps":[{"kraus":[[[[1,0],[0,0]],[[0,0],[1,0]]]]}]}"#,
        r#"{"dim":2,"initial":{"preset":"zero"},"steps":[{"preset":"dephasing","params":[1.5]}]}"#,
        r#"{"dim":2,"initial":{"preset":"zero"}"#,
    ] {
        let file = temp_scenario(text);
        for command in ["enumerate", "sample", "interfere", "average"] {
            let out = run_with(file.path(), command, &[]);
            assert_eq!(out.status.code(), Some(2), "{command} {text}");
            assert!(out.stdout.is_empty());
            assert!(String::from_utf8_lossy(&out.stderr).starts_with("error["));
        }
    }
}

#[test]
fn invalid_flags_exit_2() {
    let path = scenario("dephasing.json");
    for (command, extra) in [
        ("interfere", vec!["--trajectory", "0,2,0"]),
        ("interfere", vec!["--trajectory", "0,x"]),
        ("interfere", vec!["--grid", "4"]),
        ("sample", vec!["--n", "0"]),
        ("enumerate", vec!["--min-weight", "-1"]),
        ("average", vec!["--epsilon", "2"]),
    ] {
        let out = run_with(&path, command, &extra);
        assert_eq!(out.status.code(), Some(2), "{command} {extra:?}");
        assert!(out.stdout.is_empty());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_holonomy"))
        .args(["enumerate", "--scenario", path.to_str().unwrap()])
        .env("HOLONOMY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_enumeration_exits_3() {
    let file = temp_scenario(
        r#"{"dim":2,"initial":{"preset":"plus"},"steps":[{"preset":"depolarizing","params":[0.1],"repeat":11}]}"#,
    );
    let out = run_with(file.path(), "enumerate", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[CombinatorialOverflow]"));
}

#[test]
fn orthogonal_step_is_a_degenerate_fringe() {
    let out = run_with(&scenario("orthogonal_step.json"), "interfere", &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("error[DegenerateFringe]") && err.contains("step 1"),
        "{err}"
    );
}

#[test]
fn octant_protocol_and_fringe_files() {
    let dir = tempfile::tempdir().unwrap();
    let fringes = dir.path().join("fringes");
    let out = records(&run_with(
        &scenario("octant.json"),
        "interfere",
        &["--fringe-dir", fringes.to_str().unwrap()],
    ));
    let steps = of_kind(&out, "step");
    assert_eq!(steps.len(), 3);
    assert_eq!(steps[2]["kind"], "closing");
    let (re, im) = complex(&of_kind(&out, "protocol")[0]["product"]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!(((re - h).powi(2) + (im + h).powi(2)).sqrt() < 1e-4);
    for k in 1..=3 {
        let text = fs::read_to_string(fringes.join(format!("fringe_step_{k:02}.dat"))).unwrap();
        assert_eq!(text.lines().count(), 4096);
        let cols: Vec<f64> = text
            .lines()
            .next()
            .unwrap()
            .split(' ')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(cols.len(), 2);
    }
}

#[test]
fn failed_interfere_writes_no_fringe_files() {
    let dir = tempfile::tempdir().unwrap();
    let fringes = dir.path().join("fringes");
    let out = run_with(
        &scenario("orthogonal_step.json"),
        "interfere",
        &["--fringe-dir", fringes.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(!fringes.exists());
}

#[test]
fn unitary_average_has_unit_modulus() {
    let out = records(&run_with(&scenario("octant.json"), "average", &[]));
    let rows = of_kind(&out, "average");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["label"], "original");
    assert!((rows[0]["modulus"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn identity_mixers_duplicate_the_row() {
    let mixers = scenario("decomposition_demo_identity_mixers.json");
    let out = records(&run_with(
        &scenario("decomposition_demo.json"),
        "average",
        &["--mixers", mixers.to_str().unwrap()],
    ));
    let rows = of_kind(&out, "average");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["gamma"], rows[1]["gamma"]);
    assert_eq!(of_kind(&out, "gap")[0]["gap"], 0.0);
}

#[test]
fn demo_decompositions_differ() {
    let mixers = scenario("decomposition_demo_mixers.json");
    let out = records(&run_with(
        &scenario("decomposition_demo.json"),
        "average",
        &["--mixers", mixers.to_str().unwrap()],
    ));
    let gap = of_kind(&out, "gap")[0]["gap"].as_f64().unwrap();
    assert!(gap >= holonomy::ensemble::DEMO_GAP_BOUND, "{gap}");
    assert!(
        of_kind(&out, "action")[0]["max_deviation"]
            .as_f64()
            .unwrap()
            <= 1e-11
    );
}

#[test]
fn undefined_phase_mass_exits_4_with_weight() {
    let out = run_with(&scenario("dephasing.json"), "average", &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[UndefinedPhaseMass]"));
    assert!(err.contains("excluded weight: 0.578125"), "{err}");
}

#[test]
fn mixed_inputs_give_exploratory_holonomy_average() {
    let out = records(&run_with(
        &scenario("mixed_depolarizing.json"),
        "average",
        &[],
    ));
    let row = &of_kind(&out, "holonomy_average")[0];
    assert_eq!(row["exploratory"], true);
    assert_eq!(row["singular_values"].as_array().unwrap().len(), 2);
    let out = run_with(&scenario("mixed_depolarizing.json"), "interfere", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_sample_of_identity() {
    let out = records(&run_with(
        &scenario("identity.json"),
        "sample",
        &["--n", "1", "--seed", "5"],
    ));
    let samples = of_kind(&out, "sample");
    assert_eq!(samples.len(), 1);
    assert_eq!(samples[0]["index"], "0,0");
    assert_eq!(samples[0]["weight"], 1.0);
    assert_eq!(of_kind(&out, "sample_summary")[0]["dead_ends"], 0);
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let path = scenario("dephasing.json");
    let a = run_with(&path, "sample", &["--n", "500", "--seed", "11"]);
    let b = run_with(&path, "sample", &["--n", "500", "--seed", "11"]);
    let c = run_with(&path, "sample", &["--n", "500", "--seed", "12"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let out = records(&a);
    assert_eq!(of_kind(&out, "frequency").len(), 8);
    let counted: u64 = of_kind(&out, "frequency")
        .iter()
        .map(|r| r["count"].as_u64().unwrap())
        .sum();
    assert_eq!(counted, 500);
}

#[test]
fn csv_mode_prints_one_table() {
    let out = run_with(&scenario("dephasing.json"), "enumerate", &["--csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,weight,final_norm,status,phase_re,phase_im,scenario_hash,version"
    );
    assert!(lines.next().unwrap().starts_with("\"0,0,0\",0.421875,"));
    assert!(text.lines().last().unwrap().starts_with("total,"));
}
