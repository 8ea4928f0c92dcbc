use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn abrsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abrsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn report(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("report.toml")).unwrap().parse().unwrap()
}

fn balanced(dir: &Path) -> bool {
    report(dir)["conservation"]["balanced"].as_bool().unwrap()
}

#[test]
fn valid_run_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = abrsim(&[&scenario("n_source"), "--out", out.to_str().unwrap(), "--duration", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in abrsim::report::FILES {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(balanced(&out));
    assert_eq!(report(&out)["run"]["duration"].as_float(), Some(5.0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fairness"));
}

#[test]
fn quiet_run_prints_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = abrsim(&["n_source", "--out", tmp.path().to_str().unwrap(), "--duration", "1", "--quiet"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_scenario_names_the_path() {
    let o = abrsim(&["/no/such/scenario.toml", "--out", "/tmp/unused"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/scenario.toml"));
}

#[test]
fn malformed_scenario_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[topology]\nkind = \"n_source\"\nn = 0\n").unwrap();
    let o = abrsim(&[path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("topology"), "{err}");
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = abrsim(&[
        &scenario("n_source"),
        "--out",
        out.to_str().unwrap(),
        "--duration",
        "4",
        "--sweep",
        "topology.n=2,5,10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in [2, 5, 10] {
        let dir = out.join(format!("topology.n={n}"));
        assert!(balanced(&dir), "n={n}");
        let vcs = report(&dir)["vc"].as_array().unwrap().len();
        assert_eq!(vcs, n);
    }
    let index = fs::read_to_string(out.join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 4);
    assert!(index.lines().skip(1).all(|l| l.contains(",ok,")), "{index}");
    assert!(!fs::read_dir(out).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn sweep_over_unknown_field_fails_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = abrsim(&["n_source", "--out", out.to_str().unwrap(), "--sweep", "topology.nn=1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("topology.nn"));
    assert!(!out.exists());
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_owned(), bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_invocation_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = abrsim(&["n_source_vbr_background", "--out", out.to_str().unwrap(), "--duration", "3", "--seed", "9"]);
        assert!(o.status.success());
    }
    assert_eq!(files(&a), files(&b));
}
