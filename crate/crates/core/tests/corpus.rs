//! Replays the fuzz corpus seeds through the parser entry points.

use std::fs;
use std::path::{Path, PathBuf};

use biphoton::dispersion::SellmeierSet;
use biphoton::scenario::parse_config;
use biphoton::tpsa::TpsaGrid;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn dispersion_seeds() {
    for (name, text) in seeds("dispersion") {
        let set = SellmeierSet::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = SellmeierSet::parse(&set.to_text()).unwrap();
        assert_eq!(set.to_text(), again.to_text(), "{name}");
    }
}

#[test]
fn scenario_seeds() {
    let base = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    for (name, text) in seeds("scenario") {
        let result = parse_config(&text, &base);
        match name.as_str() {
            "default.toml" => assert!(result.is_ok(), "{result:?}"),
            _ => assert!(result.is_err(), "{name} should be rejected"),
        }
        let _ = parse_config(&text, Path::new("/nonexistent"));
    }
}

#[test]
fn tpsa_csv_seeds() {
    for (name, text) in seeds("tpsa_csv") {
        let parsed = TpsaGrid::from_csv(&text);
        match name.as_str() {
            "ragged" => assert!(parsed.is_err()),
            _ => {
                let grid = parsed.unwrap_or_else(|e| panic!("{name}: {e}"));
                assert_eq!(TpsaGrid::from_csv(&grid.to_csv()).unwrap(), grid);
            }
        }
    }
}
