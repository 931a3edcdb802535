//! Run configuration: one TOML file with defaults for every field,
//! key=value overrides, and a content hash recorded in run manifests.

use gridworld::WorldConfig;
use meta_controller::MetaConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skill_net::SkillConfig;
use task_space::Scenario;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub height: usize,
    pub width: usize,
    pub wall_density: f64,
    pub object_density: f64,
    pub enemy_spawn_prob: f64,
    pub enemy_lifetime: u32,
    pub episode_limit_train: u32,
    pub episode_limit_eval: u32,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            height: 10,
            width: 10,
            wall_density: 0.05,
            object_density: 0.15,
            enemy_spawn_prob: 0.03,
            enemy_lifetime: 10,
            episode_limit_train: 80,
            episode_limit_eval: 600,
        }
    }
}

impl EnvSection {
    pub fn world(&self, placeable: Vec<u8>, train: bool) -> WorldConfig {
        WorldConfig {
            height: self.height,
            width: self.width,
            wall_density: self.wall_density,
            object_density: self.object_density,
            enemy_spawn_prob: self.enemy_spawn_prob,
            enemy_lifetime: self.enemy_lifetime,
            episode_limit: if train {
                self.episode_limit_train
            } else {
                self.episode_limit_eval
            },
            seed: 0,
            placeable_types: placeable,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkillTrainSection {
    pub distill_iterations: usize,
    pub ac_iterations: usize,
    pub episodes_per_iter: usize,
    pub workers: usize,
    pub lr_distill: f64,
    pub lr_ac: f64,
    pub smoothing: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub value_weight: f64,
    pub entropy_start: f64,
    pub entropy_midpoint: usize,
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
    pub tau_dis: f64,
    pub tau_diff: f64,
    pub analogy_budget: usize,
}

impl Default for SkillTrainSection {
    fn default() -> Self {
        SkillTrainSection {
            distill_iterations: 2000,
            ac_iterations: 2000,
            episodes_per_iter: 32,
            workers: 4,
            lr_distill: 2.5e-4,
            lr_ac: 1e-4,
            smoothing: 0.97,
            eps: 1e-6,
            gamma: 0.99,
            lambda: 0.96,
            alpha: 0.1,
            value_weight: 0.5,
            entropy_start: 0.1,
            entropy_midpoint: 1000,
            xi: 1.0,
            rho_dis: 1.0,
            rho_diff: 1.0,
            tau_dis: 3.0,
            tau_diff: 3.0,
            analogy_budget: 16,
        }
    }
}

impl SkillTrainSection {
    pub fn hyper(&self, lr: f64) -> rl_train::SkillHyper {
        rl_train::SkillHyper {
            lr,
            smoothing: self.smoothing,
            eps: self.eps,
            gamma: self.gamma,
            lambda: self.lambda,
            alpha: self.alpha,
            value_weight: self.value_weight,
            entropy_start: self.entropy_start,
            entropy_midpoint: self.entropy_midpoint,
            xi: self.xi,
            rho_dis: self.rho_dis,
            rho_diff: self.rho_diff,
            tau_dis: self.tau_dis,
            tau_diff: self.tau_diff,
            analogy_budget: self.analogy_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaTrainSection {
    pub soft_iterations: usize,
    pub soft_finetune_iterations: usize,
    pub hard_finetune_iterations: usize,
    pub episodes_per_iter: usize,
    pub workers: usize,
    pub lr_soft: f64,
    pub lr_finetune: f64,
    pub smoothing: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
    pub tau_dis: f64,
    pub tau_diff: f64,
    pub analogy_budget: usize,
    pub instruction_count: usize,
    pub curriculum: bool,
}

impl Default for MetaTrainSection {
    fn default() -> Self {
        MetaTrainSection {
            soft_iterations: 2000,
            soft_finetune_iterations: 500,
            hard_finetune_iterations: 500,
            episodes_per_iter: 32,
            workers: 4,
            lr_soft: 2.5e-4,
            lr_finetune: 1e-4,
            smoothing: 0.97,
            eps: 1e-6,
            gamma: 0.99,
            lambda: 0.96,
            eta: 0.001,
            value_weight: 0.5,
            entropy_weight: 0.0,
            xi: 1.0,
            rho_dis: 1.0,
            rho_diff: 1.0,
            tau_dis: 3.0,
            tau_diff: 3.0,
            analogy_budget: 16,
            instruction_count: 4,
            curriculum: true,
        }
    }
}

impl MetaTrainSection {
    pub fn hyper(&self, lr: f64) -> rl_train::MetaHyper {
        rl_train::MetaHyper {
            lr,
            smoothing: self.smoothing,
            eps: self.eps,
            gamma: self.gamma,
            lambda: self.lambda,
            eta: self.eta,
            value_weight: self.value_weight,
            entropy_weight: self.entropy_weight,
            xi: self.xi,
            rho_dis: self.rho_dis,
            rho_diff: self.rho_diff,
            tau_dis: self.tau_dis,
            tau_diff: self.tau_diff,
            analogy_budget: self.analogy_budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub instruction_counts: Vec<usize>,
    pub episodes_per_cell: usize,
    pub engage_radius: u32,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            instruction_counts: vec![4, 20],
            episodes_per_cell: 500,
            engage_radius: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: Scenario,
    /// Object names forming the task space; empty means all table objects.
    pub objects: Vec<String>,
    pub holdout_fraction: f64,
    /// Optional split file; generated deterministically when absent.
    pub split_file: Option<String>,
    /// Optional object/transform table file; built-in defaults when absent.
    pub tables_file: Option<String>,
    pub env: EnvSection,
    pub skill_net: SkillConfig,
    pub meta_net: MetaConfig,
    pub skill_train: SkillTrainSection,
    pub meta_train: MetaTrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            scenario: Scenario::Independent,
            objects: Vec::new(),
            holdout_fraction: 0.2,
            split_file: None,
            tables_file: None,
            env: EnvSection::default(),
            skill_net: SkillConfig::default(),
            meta_net: MetaConfig::default(),
            skill_train: SkillTrainSection::default(),
            meta_train: MetaTrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// Load from a TOML file (or defaults when `path` is None), apply
    /// `key=value` overrides, and reject unknown keys.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::BadConfig(format!("cannot read {}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e| CliError::BadConfig(format!("config parse error: {e}")))?
            }
            None => toml::Value::Table(Default::default()),
        };
        for pair in overrides {
            let (key, raw) = pair
                .split_once('=')
                .ok_or_else(|| CliError::BadConfig(format!("override {pair:?} is not KEY=VALUE")))?;
            set_path(&mut value, key, raw)?;
        }
        let config: RunConfig = value
            .try_into()
            .map_err(|e| CliError::BadConfig(format!("invalid config: {e}")))?;
        Ok(config)
    }

    /// Canonical serialized form; what the hash and manifests record.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_toml().as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

/// Insert `raw` at dotted path `key`, parsing it as a TOML literal when
/// possible and falling back to a string.
fn set_path(root: &mut toml::Value, key: &str, raw: &str) -> Result<(), CliError> {
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(t) => t["x"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut current = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = current
            .as_table_mut()
            .ok_or_else(|| CliError::BadConfig(format!("override path {key:?} crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        current = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_stably() {
        let c = RunConfig::default();
        let text = c.canonical_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn overrides_merge_and_unknown_keys_fail() {
        let c = RunConfig::load(None, &["seed=9".into(), "env.height=6".into()]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.env.height, 6);
        let err = RunConfig::load(None, &["env.heighth=6".into()]).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("heighth"), "error should name the bad key: {msg}");
    }

    #[test]
    fn override_values_parse_as_literals() {
        let c = RunConfig::load(
            None,
            &["eval.instruction_counts=[1, 2, 3]".into(), "meta_train.curriculum=false".into()],
        )
        .unwrap();
        assert_eq!(c.eval.instruction_counts, vec![1, 2, 3]);
        assert!(!c.meta_train.curriculum);
    }
}
