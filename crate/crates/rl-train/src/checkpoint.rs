//! Checkpoint archives for the skill and meta networks: parameters,
//! optimizer accumulators, and a JSON manifest carrying everything needed
//! to rebuild the nets and reproduce the run.

use std::path::Path;

use gridworld::Tables;
use meta_controller::{HeadKind, MetaConfig, MetaNet};
use serde::{Deserialize, Serialize};
use skill_net::{SkillConfig, SkillNet};
use tensor_core::{Archive, ParamSet, RmsProp};
use task_space::{split_from_toml, split_to_toml, TaskSplit};

use crate::TrainError;

pub const MANIFEST_ENTRY: &str = "manifest.json";
const PARAM_PREFIX: &str = "params";
const OPT_PREFIX: &str = "opt";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkillManifest {
    pub kind: String,
    pub stage: String,
    pub iteration: usize,
    pub seed: u64,
    pub net: SkillConfig,
    pub split_toml: String,
    pub tables_toml: String,
    pub hyper: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaManifest {
    pub kind: String,
    pub stage: String,
    pub iteration: usize,
    pub seed: u64,
    pub net: MetaConfig,
    pub head: String,
    pub vocab_size: usize,
    pub action_arity: usize,
    pub object_arity: usize,
    /// Path and parameter hash of the frozen skill this controller was
    /// trained against.
    pub skill_ref: String,
    pub skill_hash: String,
    pub split_toml: String,
    pub tables_toml: String,
    pub hyper: serde_json::Value,
}

/// FNV over the exact parameter bits, for pairing checks.
pub fn param_hash(params: &ParamSet) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (name, t) in params.iter() {
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        for v in t.to_vec() {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn store_params_and_opt(
    archive: &mut Archive,
    params: &ParamSet,
    opt: Option<&RmsProp>,
) -> Result<(), TrainError> {
    params.store(archive, PARAM_PREFIX)?;
    if let Some(opt) = opt {
        for (name, t) in params.iter() {
            if let Some(acc) = opt.accumulator(t) {
                archive.push_f64(&format!("{OPT_PREFIX}/{name}"), t.shape(), acc.to_vec())?;
            }
        }
    }
    Ok(())
}

/// Restore optimizer accumulators saved next to the parameters; missing
/// entries (e.g. a fresh stage) leave the zero-initialized state.
pub fn restore_optimizer(
    archive: &Archive,
    params: &ParamSet,
    opt: &mut RmsProp,
) -> Result<(), TrainError> {
    for (name, t) in params.iter() {
        if let Ok((_, values)) = archive.f64_entry(&format!("{OPT_PREFIX}/{name}")) {
            opt.load_accumulator(t, values.to_vec())?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn save_skill_checkpoint(
    path: &Path,
    net: &SkillNet,
    split: &TaskSplit,
    tables: &Tables,
    opt: Option<&RmsProp>,
    stage: &str,
    iteration: usize,
    seed: u64,
    hyper: serde_json::Value,
) -> Result<(), TrainError> {
    let manifest = SkillManifest {
        kind: "skill".to_string(),
        stage: stage.to_string(),
        iteration,
        seed,
        net: net.config.clone(),
        split_toml: split_to_toml(split, tables)?,
        tables_toml: tables.to_toml(),
        hyper,
    };
    let mut archive = Archive::new(seed);
    archive.push_bytes(MANIFEST_ENTRY, serde_json::to_vec_pretty(&manifest)?)?;
    store_params_and_opt(&mut archive, net.params(), opt)?;
    archive.save(path)?;
    Ok(())
}

pub struct LoadedSkill {
    pub net: SkillNet,
    pub split: TaskSplit,
    pub tables: Tables,
    pub manifest: SkillManifest,
    pub archive: Archive,
}

pub fn load_skill_checkpoint(path: &Path) -> Result<LoadedSkill, TrainError> {
    let archive = Archive::load(path)?;
    let manifest: SkillManifest = serde_json::from_slice(archive.bytes_entry(MANIFEST_ENTRY)?)?;
    if manifest.kind != "skill" {
        return Err(TrainError::BadCheckpoint(format!(
            "expected a skill checkpoint, found kind {:?}",
            manifest.kind
        )));
    }
    let tables = Tables::parse(&manifest.tables_toml).map_err(TrainError::from)?;
    let split = split_from_toml(&manifest.split_toml, &tables)?;
    let net = SkillNet::new(manifest.net.clone(), &split.space, 0);
    net.params().restore(&archive, PARAM_PREFIX)?;
    Ok(LoadedSkill {
        net,
        split,
        tables,
        manifest,
        archive,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn save_meta_checkpoint(
    path: &Path,
    meta: &MetaNet,
    skill_ref: &str,
    skill_hash: &str,
    split: &TaskSplit,
    tables: &Tables,
    opt: Option<&RmsProp>,
    stage: &str,
    iteration: usize,
    seed: u64,
    hyper: serde_json::Value,
) -> Result<(), TrainError> {
    let manifest = MetaManifest {
        kind: "meta".to_string(),
        stage: stage.to_string(),
        iteration,
        seed,
        net: meta.config.clone(),
        head: match meta.head {
            HeadKind::Subtask => "subtask".to_string(),
            HeadKind::Primitive => "primitive".to_string(),
        },
        vocab_size: meta.vocab_size,
        action_arity: meta.action_arity,
        object_arity: meta.object_arity,
        skill_ref: skill_ref.to_string(),
        skill_hash: skill_hash.to_string(),
        split_toml: split_to_toml(split, tables)?,
        tables_toml: tables.to_toml(),
        hyper,
    };
    let mut archive = Archive::new(seed);
    archive.push_bytes(MANIFEST_ENTRY, serde_json::to_vec_pretty(&manifest)?)?;
    store_params_and_opt(&mut archive, meta.params(), opt)?;
    archive.save(path)?;
    Ok(())
}

pub struct LoadedMeta {
    pub net: MetaNet,
    pub split: TaskSplit,
    pub tables: Tables,
    pub manifest: MetaManifest,
    pub archive: Archive,
}

pub fn load_meta_checkpoint(path: &Path) -> Result<LoadedMeta, TrainError> {
    let archive = Archive::load(path)?;
    let manifest: MetaManifest = serde_json::from_slice(archive.bytes_entry(MANIFEST_ENTRY)?)?;
    if manifest.kind != "meta" {
        return Err(TrainError::BadCheckpoint(format!(
            "expected a meta checkpoint, found kind {:?}",
            manifest.kind
        )));
    }
    let tables = Tables::parse(&manifest.tables_toml).map_err(TrainError::from)?;
    let split = split_from_toml(&manifest.split_toml, &tables)?;
    let head = match manifest.head.as_str() {
        "subtask" => HeadKind::Subtask,
        "primitive" => HeadKind::Primitive,
        other => {
            return Err(TrainError::BadCheckpoint(format!(
                "unknown head kind {other:?}"
            )))
        }
    };
    let net = MetaNet::new(
        manifest.net.clone(),
        manifest.vocab_size,
        manifest.action_arity,
        manifest.object_arity,
        head,
        0,
    );
    net.params().restore(&archive, PARAM_PREFIX)?;
    Ok(LoadedMeta {
        net,
        split,
        tables,
        manifest,
        archive,
    })
}
