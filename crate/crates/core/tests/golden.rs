//! Frozen simulator outputs. Regenerate with `UOI_BLESS=1` after an
//! intentional change to the simulator.

use std::path::PathBuf;

use serde_json::{json, Value};
use uoi_core::sim::{generate_scene, run_experiment};
use uoi_core::SimConfig;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Same shape, strings and booleans equal, numbers within `1e-9` relative.
fn assert_close(got: &Value, want: &Value, path: &str) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{path}: {a} != {b}");
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len(), "{path}: length");
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                assert_close(x, y, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>(), "{path}: keys");
            for (k, x) in a {
                assert_close(x, &b[k], &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

fn check(name: &str, got: Value) {
    let path = fixture(name);
    if std::env::var("UOI_BLESS").is_ok_and(|v| v == "1") {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_close(&got, &want, name);
}

#[test]
fn scene_snapshot_seed_42() {
    let config = SimConfig { rng_seed: 42, ..SimConfig::default() };
    let scenes: Vec<Value> = (0..3)
        .map(|i| {
            let s = generate_scene(&config, i).unwrap();
            json!({ "gts": s.gts, "proposals": s.proposals, "origins": s.origins })
        })
        .collect();
    check("scene_seed42.json", Value::Array(scenes));
}

#[test]
fn default_report_seed_7() {
    let report = run_experiment(&SimConfig::default()).unwrap();
    check("report_seed7.json", serde_json::to_value(&report).unwrap());
}
