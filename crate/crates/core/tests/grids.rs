//! The hyperparameter grid files shipped in `grids/` must parse and expand
//! to the documented search-space sizes.

use std::path::PathBuf;

use statarb::classify::load_grid;

fn grids_dir(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../grids")
        .join(kind)
}

#[test]
fn full_grids_parse_and_expand() {
    let expected = [
        ("logistic", 1980),
        ("sgd", 2160),
        ("mlp", 864),
        ("adaboost", 30),
        ("histgb", 100),
    ];
    for (name, size) in expected {
        let path = grids_dir("full").join(format!("{name}.json"));
        let specs = load_grid(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(specs.len(), size, "{name} grid size");
    }
}

#[test]
fn reduced_grids_parse_and_stay_small() {
    for name in ["logistic", "sgd", "mlp", "adaboost", "histgb"] {
        let path = grids_dir("reduced").join(format!("{name}.json"));
        let specs = load_grid(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            (1..=4).contains(&specs.len()),
            "{name} reduced grid should hold a handful of candidates, got {}",
            specs.len()
        );
    }
}

#[test]
fn every_grid_candidate_has_a_distinct_spec() {
    for kind in ["full", "reduced"] {
        for name in ["logistic", "sgd", "mlp", "adaboost", "histgb"] {
            let specs = load_grid(&grids_dir(kind).join(format!("{name}.json"))).unwrap();
            let mut seen = std::collections::HashSet::new();
            for spec in &specs {
                let key = serde_json::to_string(spec).unwrap();
                assert!(seen.insert(key), "{kind}/{name} expands to duplicates");
            }
        }
    }
}
