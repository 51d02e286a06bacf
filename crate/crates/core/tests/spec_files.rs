use std::path::PathBuf;

use dynfit::harness::{ExperimentKind, ExperimentSpec};

fn docs_examples() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn documented_specs_parse_and_validate() {
    let files = docs_examples();
    assert!(files.len() >= 6);
    let mut kinds = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let spec = ExperimentSpec::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = ExperimentSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        kinds.push(spec.kind);
    }
    for kind in [
        ExperimentKind::TvCurve,
        ExperimentKind::TailCompare,
        ExperimentKind::LandscapeScan,
        ExperimentKind::CriterionScan,
        ExperimentKind::MStar,
        ExperimentKind::R3Sweep,
    ] {
        assert!(kinds.contains(&kind), "no example for {kind}");
    }
}

#[test]
fn unknown_fields_are_rejected_by_name() {
    let err = ExperimentSpec::from_json(r#"{"kind": "mstar", "criterion": {"dists": ["uniform"], "mmax": 3}}"#).unwrap_err();
    assert!(err.to_string().contains("mmax"), "{err}");
    let err = ExperimentSpec::from_json(r#"{"kind": "tail_compare", "model_a": "ba", "sizes": [10, 5]}"#).unwrap_err();
    assert!(err.to_string().contains("sizes"), "{err}");
}
