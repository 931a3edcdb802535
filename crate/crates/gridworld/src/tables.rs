//! Object names and the transform outcome table, loadable from TOML.
//!
//! File format:
//!
//! ```toml
//! objects = ["cow", "pig", ...]          # 15 names, order fixes channel ids
//!
//! [transform]
//! cow = { becomes = "meat" }
//! tree = { becomes = "rock" }
//! # anything unlisted disappears when transformed
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::ObjectTypeId;
use crate::GridError;

pub const OBJECT_TYPE_COUNT: usize = 15;

pub const DEFAULT_OBJECT_NAMES: [&str; OBJECT_TYPE_COUNT] = [
    "cow", "pig", "sheep", "cat", "duck", "egg", "meat", "tree", "rock", "box", "chest",
    "flower", "key", "hat", "bread",
];

/// Outcome of transforming an interactable object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformOutcome {
    Removed,
    Becomes(ObjectTypeId),
}

/// What a Transform action does to each possible target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformResult {
    Removed,
    Becomes(ObjectTypeId),
    Blocked,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TablesFile {
    objects: Vec<String>,
    #[serde(default)]
    transform: BTreeMap<String, TransformRuleFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TransformRuleFile {
    Keyword(String),
    Becomes { becomes: String },
}

/// Object names plus transform rules. The name order fixes observation
/// channel ids and the integer ids recorded in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    names: Vec<String>,
    outcomes: Vec<TransformOutcome>,
}

impl Default for Tables {
    fn default() -> Self {
        let names: Vec<String> = DEFAULT_OBJECT_NAMES.iter().map(|s| s.to_string()).collect();
        let mut outcomes = vec![TransformOutcome::Removed; names.len()];
        // cow -> meat, tree -> rock; everything else disappears.
        outcomes[0] = TransformOutcome::Becomes(ObjectTypeId(6));
        outcomes[7] = TransformOutcome::Becomes(ObjectTypeId(8));
        Tables { names, outcomes }
    }
}

impl Tables {
    pub fn object_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_of(&self, id: ObjectTypeId) -> Result<&str, GridError> {
        self.names
            .get(id.index())
            .map(|s| s.as_str())
            .ok_or(GridError::UnknownObjectId(id.0))
    }

    pub fn id_of(&self, name: &str) -> Result<ObjectTypeId, GridError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ObjectTypeId(i as u8))
            .ok_or_else(|| GridError::UnknownObjectName(name.to_string()))
    }

    /// Transform outcome for an interactable object type.
    pub fn outcome(&self, id: ObjectTypeId) -> Result<TransformOutcome, GridError> {
        self.outcomes
            .get(id.index())
            .copied()
            .ok_or(GridError::UnknownObjectId(id.0))
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, GridError> {
        let file: TablesFile = toml::from_str(text).map_err(|e| GridError::Table(e.to_string()))?;
        if file.objects.is_empty() {
            return Err(GridError::Table("object list is empty".to_string()));
        }
        let names = file.objects;
        let mut outcomes = vec![TransformOutcome::Removed; names.len()];
        for (name, rule) in &file.transform {
            let id = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| GridError::UnknownObjectName(name.clone()))?;
            outcomes[id] = match rule {
                TransformRuleFile::Keyword(kw) if kw == "removed" => TransformOutcome::Removed,
                TransformRuleFile::Keyword(kw) => {
                    return Err(GridError::Table(format!("unknown transform keyword {kw:?}")))
                }
                TransformRuleFile::Becomes { becomes } => {
                    let target = names
                        .iter()
                        .position(|n| n == becomes)
                        .ok_or_else(|| GridError::UnknownObjectName(becomes.clone()))?;
                    TransformOutcome::Becomes(ObjectTypeId(target as u8))
                }
            };
        }
        Ok(Tables { names, outcomes })
    }

    pub fn to_toml(&self) -> String {
        let transform: BTreeMap<String, TransformRuleFile> = self
            .names
            .iter()
            .zip(&self.outcomes)
            .filter_map(|(name, outcome)| match outcome {
                TransformOutcome::Removed => None,
                TransformOutcome::Becomes(id) => Some((
                    name.clone(),
                    TransformRuleFile::Becomes {
                        becomes: self.names[id.index()].clone(),
                    },
                )),
            })
            .collect();
        let file = TablesFile {
            objects: self.names.clone(),
            transform,
        };
        toml::to_string_pretty(&file).expect("tables serialize cleanly")
    }

    pub fn save(&self, path: &Path) -> Result<(), GridError> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }
}

/// Pure transform lookup covering every legal target; blocks and water are
/// not transformable and enemies always disappear.
pub fn transform_rule(tables: &Tables, target: TransformTarget) -> Result<TransformResult, GridError> {
    Ok(match target {
        TransformTarget::Enemy => TransformResult::Removed,
        TransformTarget::Block | TransformTarget::Water => TransformResult::Blocked,
        TransformTarget::Object(id) => match tables.outcome(id)? {
            TransformOutcome::Removed => TransformResult::Removed,
            TransformOutcome::Becomes(t) => TransformResult::Becomes(t),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformTarget {
    Object(ObjectTypeId),
    Enemy,
    Block,
    Water,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_round_trips_through_toml() {
        let t = Tables::default();
        let text = t.to_toml();
        let back = Tables::parse(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn default_transforms() {
        let t = Tables::default();
        let cow = t.id_of("cow").unwrap();
        let meat = t.id_of("meat").unwrap();
        assert_eq!(t.outcome(cow).unwrap(), TransformOutcome::Becomes(meat));
        let pig = t.id_of("pig").unwrap();
        assert_eq!(t.outcome(pig).unwrap(), TransformOutcome::Removed);
    }

    #[test]
    fn transform_rule_covers_enemy_and_terrain() {
        let t = Tables::default();
        assert_eq!(
            transform_rule(&t, TransformTarget::Enemy).unwrap(),
            TransformResult::Removed
        );
        assert_eq!(
            transform_rule(&t, TransformTarget::Block).unwrap(),
            TransformResult::Blocked
        );
        assert_eq!(
            transform_rule(&t, TransformTarget::Water).unwrap(),
            TransformResult::Blocked
        );
    }

    #[test]
    fn unknown_object_is_an_error() {
        let t = Tables::default();
        assert!(t.id_of("dragon").is_err());
        assert!(t.outcome(ObjectTypeId(200)).is_err());
    }
}
