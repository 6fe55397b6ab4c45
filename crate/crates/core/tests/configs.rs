use std::path::PathBuf;

use algdiff::scenarios::{ScenarioConfig, ScenarioId};
use serde_json::Value;

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn read_json(rel: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(repo_file(rel)).unwrap()).unwrap()
}

#[test]
fn shipped_configs_are_the_defaults() {
    for id in ScenarioId::ALL {
        let text = std::fs::read_to_string(repo_file(&format!("configs/{id}.json"))).unwrap();
        let parsed = ScenarioConfig::from_json_str(id, &text).unwrap();
        assert_eq!(parsed, ScenarioConfig::defaults(id), "configs/{id}.json is stale");
    }
}

#[test]
fn shipped_configs_satisfy_the_schema() {
    let schema = read_json("schemas/scenario_config.schema.json");
    let validator = jsonschema::validator_for(&schema).unwrap();
    for id in ScenarioId::ALL {
        let config = read_json(&format!("configs/{id}.json"));
        let errors: Vec<String> = validator.iter_errors(&config).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{id}: {errors:?}");
        // Serialized defaults must not drift from the schema either.
        let defaults = serde_json::to_value(ScenarioConfig::defaults(id)).unwrap();
        assert!(validator.is_valid(&defaults), "{id} defaults");
    }
}

#[test]
fn schema_rejects_unknown_keys_like_the_loader() {
    let schema = read_json("schemas/scenario_config.schema.json");
    let validator = jsonschema::validator_for(&schema).unwrap();
    let bad = serde_json::json!({"params": {"twotank": {"fault_tme": 1.0}}});
    assert!(!validator.is_valid(&bad));
    assert!(ScenarioConfig::from_json_overrides(ScenarioId::Twotank, &bad).is_err());
    let partial = serde_json::json!({"noise": {"seed": 4}});
    assert!(validator.is_valid(&partial));
    assert!(ScenarioConfig::from_json_overrides(ScenarioId::Twotank, &partial).is_ok());
}
