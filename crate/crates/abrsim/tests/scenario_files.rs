use std::path::Path;

use abrsim::{load_scenario, CliError};
use abrsim_core::engine::scenario::TEMPLATES;
use abrsim_core::Scenario;

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

#[test]
fn shipped_files_match_templates() {
    for name in TEMPLATES {
        let from_file = load_scenario(&shipped(name)).unwrap();
        assert_eq!(from_file, Scenario::template(name).unwrap(), "{name}");
    }
}

#[test]
fn template_names_resolve_without_a_file() {
    assert_eq!(load_scenario(Path::new("vsvd_chain")).unwrap(), Scenario::template("vsvd_chain").unwrap());
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[switch]\nfeedbak = \"explicit_rate\"\n").unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert!(matches!(err, CliError::Parse { .. }));
    assert!(err.to_string().contains("feedbak"), "{err}");
}
