//! End-to-end runs of the `dfc` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfc")).args(args).env_remove("DFC_SEED").output().expect("binary runs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(variant: &str) -> String {
    fixtures().join(variant).join("instance.json").to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bundled_examples_regenerate_checked_in_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    for name in ["ex1", "ex3", "ex4", "ex5", "ex6", "ex7", "orth"] {
        let o = dfc(&["examples", "--name", name, "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
    let mut compared = 0;
    for entry in fs::read_dir(fixtures()).unwrap() {
        let dir = entry.unwrap().path();
        for file in fs::read_dir(&dir).unwrap() {
            let file = file.unwrap().path();
            let fresh = tmp.path().join(dir.file_name().unwrap()).join(file.file_name().unwrap());
            let expected = fs::read_to_string(&file).unwrap();
            let got = fs::read_to_string(&fresh).unwrap_or_else(|_| panic!("missing {}", fresh.display()));
            assert_eq!(got, expected, "{} differs", file.display());
            compared += 1;
        }
    }
    assert!(compared >= 30, "only {compared} files compared");
}

#[test]
fn single_variant_is_selectable() {
    let tmp = TempDir::new().unwrap();
    let o = dfc(&["examples", "--name", "ex4", "--variant", "ex4aug", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("ex4aug/instance.json").exists());
    assert!(!tmp.path().join("ex4").exists());
    let bad = dfc(&["examples", "--name", "ex4", "--variant", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(64));
}

#[test]
fn exact_ideal_check_on_polyhedral_pair() {
    let o = dfc(&["analyze", "--instance", &fixture("ex4"), "--method", "bbj", "--check", "ideal"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let text = stdout(&o);
    let report: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(report["mode"], "exact");
    assert_eq!(report["verdict"], "fail");
    let point: Vec<f64> = serde_json::from_value(report["strongest"]["point"].clone()).unwrap();
    for (a, b) in point.iter().zip([0.0, 0.0, 1.5, 0.5, 0.5]) {
        assert!((a - b).abs() < 1e-9, "{point:?}");
    }
    let aug = dfc(&["analyze", "--instance", &fixture("ex4aug"), "--method", "bbj", "--check", "ideal"]);
    assert_eq!(aug.status.code(), Some(0));
    assert!(stdout(&aug).contains("ideal [exact]: pass"));
}

#[test]
fn empty_family_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let inst = tmp.path().join("empty-family.json");
    fs::write(&inst, r#"{"dim": 2, "sets": [], "base_points": [], "method": "extended"}"#).unwrap();
    let out = tmp.path().join("m.json");
    let o = dfc(&["build", "--instance", inst.to_str().unwrap(), "--method", "extended", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("family invalid"), "{}", stderr(&o));
}

#[test]
fn schema_errors_name_the_path() {
    let tmp = TempDir::new().unwrap();
    let inst = tmp.path().join("bad.json");
    fs::write(
        &inst,
        r#"{"dim": 1, "sets": [{"kind": "box_set", "lo": [0.0], "hi": "x"}], "base_points": [[0.0]], "method": "extended"}"#,
    )
    .unwrap();
    let o = dfc(&["build", "--instance", inst.to_str().unwrap(), "--out", tmp.path().join("m.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema error at sets[0]"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(dfc(&["analyze", "--bogus"]).status.code(), Some(64));
    assert_eq!(dfc(&["analyze", "--instance", "x.json", "--check", "ideal", "--directions", "0"]).status.code(), Some(64));
    assert_eq!(dfc(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(dfc(&["--help"]).status.code(), Some(0));
}

#[test]
fn build_writes_lp_for_linear_models_and_emit_round_trips() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("ex4.json");
    let o = dfc(&["build", "--instance", &fixture("ex4"), "--out", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lp = fs::read_to_string(model.with_extension("lp")).unwrap();
    assert!(lp.contains("Subject To") && lp.contains("Binary"));
    let json = fs::read_to_string(&model).unwrap();
    let again = dfc(&["emit", "--model", model.to_str().unwrap(), "--format", "json"]);
    assert_eq!(stdout(&again), json);
    let as_lp = dfc(&["emit", "--model", model.to_str().unwrap(), "--format", "lp"]);
    assert_eq!(stdout(&as_lp), lp);

    let conic = tmp.path().join("ex1.json");
    let o = dfc(&["build", "--instance", &fixture("ex1"), "--mode", "lifted", "--out", conic.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!conic.with_extension("lp").exists());
    let lp = dfc(&["emit", "--model", conic.to_str().unwrap(), "--format", "lp"]);
    assert_eq!(lp.status.code(), Some(1));
    assert!(stderr(&lp).contains("nonlinear atom"));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    let c = tmp.path().join("c.json");
    let base = ["analyze", "--instance", &fixture("ex1-bigm"), "--check", "sharp", "--directions", "40"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--seed", "7", "--out", a.to_str().unwrap()]);
    dfc(&args);
    let env = Command::new(env!("CARGO_BIN_EXE_dfc"))
        .args(base)
        .args(["--out", b.to_str().unwrap()])
        .env("DFC_SEED", "7")
        .output()
        .unwrap();
    assert!(env.status.code().is_some());
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--out", c.to_str().unwrap()]);
    dfc(&args);
    let (ra, rb, rc) = (fs::read_to_string(a).unwrap(), fs::read_to_string(b).unwrap(), fs::read_to_string(c).unwrap());
    assert_eq!(ra, rb);
    assert!(ra.contains("\"seed\":7"));
    assert!(rc.contains("\"seed\":0"));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let mut texts = Vec::new();
    for jobs in ["1", "3"] {
        let out = tmp.path().join(format!("r{jobs}.json"));
        let o = dfc(&[
            "analyze", "--instance", &fixture("ex3"), "--check", "ideal", "--directions", "60", "--jobs", jobs, "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        texts.push(fs::read_to_string(out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn par_check_needs_piecewise_families() {
    let o = dfc(&["analyze", "--instance", &fixture("ex5"), "--check", "par"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dfc(&["analyze", "--instance", &fixture("ex5-extra"), "--check", "par"]);
    assert_eq!(o.status.code(), Some(0));
    let o = dfc(&["analyze", "--instance", &fixture("ex1"), "--check", "par"]);
    assert_eq!(o.status.code(), Some(1));
}
