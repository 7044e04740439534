//! Run configuration: one JSON file with optional sections, overridable
//! from the command line.

use std::path::Path;

use lsdefect::eval::EvalConfig;
use lsdefect::segment::RuleConfig;
use lsdefect::synth::{SceneSpec, SplitPlan};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Configuration for a whole pipeline run. Every section falls back to its
/// documented defaults, so a config file only needs the fields it changes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scene: SceneSpec,
    pub plan: SplitPlan,
    pub rules: RuleConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("cannot parse {}: {e}", p.display()))
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_file() {
        let cfg = RunConfig::load(None).unwrap();
        assert_eq!(cfg.scene.width, 480);
        assert_eq!(cfg.plan.train_per_class, 80);
        assert_eq!(cfg.eval.iou_threshold, 0.5);
        assert_eq!(cfg.rules.min_area, 8);
    }

    #[test]
    fn partial_file_overrides_only_named_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"scene": {"seed": 42, "noise_sigma": 10.0}, "eval": {"score_threshold": 0.8}}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.scene.seed, 42);
        assert_eq!(cfg.scene.noise_sigma, 10.0);
        assert_eq!(cfg.scene.width, 480);
        assert_eq!(cfg.eval.score_threshold, 0.8);
        assert_eq!(cfg.eval.iou_threshold, 0.5);
    }

    #[test]
    fn bad_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, "{nope").unwrap();
        assert!(matches!(
            RunConfig::load(Some(&path)),
            Err(CliError::Config(_))
        ));
    }
}
