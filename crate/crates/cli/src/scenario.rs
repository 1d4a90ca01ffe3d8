use std::path::{Path, PathBuf};

use ncprob::circle::CircleArraySpec;
use ncprob::harness::{ArraySpec, Op};
use ncprob::{CircleGenerator, LevyTriple};
use serde::Deserialize;

/// The JSON schema scenarios are checked against, shipped with the binary.
pub const SCHEMA: &str = include_str!("../scenario.schema.json");

fn all_ops() -> Vec<Op> {
    Op::ALL.to_vec()
}

/// A scenario file. `space` selects the real-line or circle harness.
#[derive(Debug, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase", deny_unknown_fields)]
pub enum Scenario {
    Real {
        array: ArraySpec,
        #[serde(default)]
        triple: Option<LevyTriple>,
        #[serde(default = "all_ops")]
        ops: Vec<Op>,
        tolerance: Option<f64>,
        flow_step: Option<f64>,
        output: Option<PathBuf>,
    },
    Circle {
        array: CircleArraySpec,
        triple: CircleGenerator,
        #[serde(default)]
        rotation_correction: bool,
        tolerance: Option<f64>,
        flow_step: Option<f64>,
        output: Option<PathBuf>,
    },
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn tolerance(&self) -> Option<f64> {
        match self {
            Scenario::Real { tolerance, .. } | Scenario::Circle { tolerance, .. } => *tolerance,
        }
    }

    pub fn flow_step(&self) -> Option<f64> {
        match self {
            Scenario::Real { flow_step, .. } | Scenario::Circle { flow_step, .. } => *flow_step,
        }
    }

    pub fn output(&self) -> Option<&Path> {
        match self {
            Scenario::Real { output, .. } | Scenario::Circle { output, .. } => output.as_deref(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_lists_the_accepted_fields() {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        let variants = schema["oneOf"].as_array().unwrap();
        let mut seen = Vec::new();
        for v in variants {
            let space = v["properties"]["space"]["const"].as_str().unwrap().to_string();
            let mut keys: Vec<String> = v["properties"].as_object().unwrap().keys().cloned().collect();
            keys.sort();
            assert_eq!(v["additionalProperties"], serde_json::Value::Bool(false));
            seen.push((space, keys));
        }
        seen.sort();
        let real = ["array", "flow_step", "ops", "output", "space", "tolerance", "triple"];
        let circle = ["array", "flow_step", "output", "rotation_correction", "space", "tolerance", "triple"];
        assert_eq!(seen[0], ("circle".to_string(), circle.iter().map(|s| s.to_string()).collect()));
        assert_eq!(seen[1], ("real".to_string(), real.iter().map(|s| s.to_string()).collect()));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let ok = r#"{"space":"real","array":{"family":"bernoulli_clt"}}"#;
        assert!(serde_json::from_str::<Scenario>(ok).is_ok());
        let bad = r#"{"space":"real","array":{"family":"bernoulli_clt"},"colour":1}"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
        let bad = r#"{"space":"circle","array":{"family":{"kind":"drift","beta":1}},"triple":{},"ops":[]}"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
    }
}
