use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ParamType {
    Int { min: i64, max: i64 },
    /// Fixed-length string of `0`/`1`.
    BitMask { len: usize },
    /// Name of a field zone.
    ZoneRef,
    Text,
}

impl ParamType {
    pub fn accepts(&self, value: &str) -> bool {
        match self {
            ParamType::Int { min, max } => value
                .parse::<i64>()
                .is_ok_and(|v| (*min..=*max).contains(&v)),
            ParamType::BitMask { len } => {
                value.len() == *len && value.chars().all(|c| c == '0' || c == '1')
            }
            ParamType::ZoneRef => {
                !value.is_empty()
                    && value
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            }
            ParamType::Text => true,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ParamType::Int { min, max } => format!("integer in [{min}, {max}]"),
            ParamType::BitMask { len } => format!("{len}-bit string"),
            ParamType::ZoneRef => "zone id".to_string(),
            ParamType::Text => "text".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub description: String,
    pub params: Vec<ParamSpec>,
}

impl NodeSpec {
    fn new(description: &str, params: Vec<ParamSpec>) -> Self {
        NodeSpec {
            description: description.to_string(),
            params,
        }
    }
}

fn required(name: &str, ty: ParamType) -> ParamSpec {
    ParamSpec {
        name: name.to_string(),
        ty,
        required: true,
    }
}

/// Vocabulary the actor may use: leaf kinds with parameter schemas, the
/// allowed composite keywords and free-text authoring rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLibrary {
    pub actions: BTreeMap<String, NodeSpec>,
    pub conditions: BTreeMap<String, NodeSpec>,
    pub composites: BTreeSet<String>,
    pub authoring_rules: String,
}

pub const AUTHORING_RULES: &str = "\
- The root is a Sequence; each direct child of the root is one checkpoint and is followed by a critic pass.
- Give every node a short, stable name; keep names when editing.
- RetryUntilSuccessful wraps exactly one child and counts total attempts.
- A CursorSequence resumes at the step that failed; a Sequence restarts from its first child and rewinds everything below it after it succeeds.
- Do not place a bare CursorSequence directly under RetryUntilSuccessful: once complete it succeeds without doing anything.
- The robot carries at most four blocks; PickBlocks count plus blocks already carried must not exceed four.
- RotateBlocks mask bit i refers to carried slot i in pick order.
- The episode ends when ReturnToStart completes.";

impl NodeLibrary {
    /// Node vocabulary of the warehouse robot.
    pub fn warehouse() -> Self {
        let mut actions = BTreeMap::new();
        actions.insert(
            "NavigateTo".to_string(),
            NodeSpec::new("Drive to the given zone.", vec![required("zone", ParamType::ZoneRef)]),
        );
        actions.insert(
            "PickBlocks".to_string(),
            NodeSpec::new(
                "Lift up to `count` blocks from the current load zone with the vacuum gripper.",
                vec![required("count", ParamType::Int { min: 1, max: 4 })],
            ),
        );
        actions.insert(
            "RotateBlocks".to_string(),
            NodeSpec::new(
                "Flip the carried blocks whose mask bit is 1 (bit i = carried slot i).",
                vec![required("mask", ParamType::BitMask { len: 4 })],
            ),
        );
        actions.insert(
            "PlaceBlocks".to_string(),
            NodeSpec::new("Put every carried block down in the current unload zone.", vec![]),
        );
        actions.insert(
            "MoveShelf".to_string(),
            NodeSpec::new(
                "Push the movable shelf from its current zone to its target zone; the robot must be at the shelf.",
                vec![],
            ),
        );
        actions.insert(
            "ReturnToStart".to_string(),
            NodeSpec::new("Drive back to the start/finish area; ends the episode.", vec![]),
        );

        let mut conditions = BTreeMap::new();
        conditions.insert(
            "ZoneHasBlocks".to_string(),
            NodeSpec::new(
                "True when the zone still holds at least one block.",
                vec![required("zone", ParamType::ZoneRef)],
            ),
        );
        conditions.insert(
            "IsCarrying".to_string(),
            NodeSpec::new("True when the gripper holds at least one block.", vec![]),
        );
        conditions.insert(
            "ShelfAtTarget".to_string(),
            NodeSpec::new("True when the shelf sits in its target zone.", vec![]),
        );

        NodeLibrary {
            actions,
            conditions,
            composites: ["Sequence", "Fallback", "CursorSequence", "RetryUntilSuccessful"]
                .into_iter()
                .map(String::from)
                .collect(),
            authoring_rules: AUTHORING_RULES.to_string(),
        }
    }

    /// Kind names must be unique across actions, conditions and composites.
    pub fn duplicate_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut dups = Vec::new();
        for name in self
            .actions
            .keys()
            .chain(self.conditions.keys())
            .chain(self.composites.iter())
        {
            if !seen.insert(name) {
                dups.push(name.clone());
            }
        }
        dups
    }

    /// Human-readable listing used in actor prompts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        out.push_str("Composites: ");
        out.push_str(&self.composites.iter().cloned().collect::<Vec<_>>().join(", "));
        out.push('\n');
        for (section, table) in [("Action", &self.actions), ("Condition", &self.conditions)] {
            for (name, spec) in table {
                let params: Vec<String> = spec
                    .params
                    .iter()
                    .map(|p| format!("{}: {}", p.name, p.ty.describe()))
                    .collect();
                out.push_str(&format!(
                    "{section} {name}({}) - {}\n",
                    params.join(", "),
                    spec.description
                ));
            }
        }
        out
    }
}
