use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::NodeLibrary;
use crate::bt::{BehaviorTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    UnknownNodeKind,
    BadArity,
    BadParam,
    OrphanNode,
    CycleDetected,
    /// A child or root reference that names no node in the table.
    DanglingReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: NodeId,
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, location: &NodeId, code: ViolationCode, message: String) {
        self.violations.push(Violation {
            location: location.clone(),
            code,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {:?}: {}", v.location, v.code, v.message)?;
        }
        Ok(())
    }
}

/// Lists every structural and vocabulary violation of `tree`.
pub fn validate(tree: &BehaviorTree, library: &NodeLibrary) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (key, node) in &tree.nodes {
        if *key != node.id {
            report.push(
                key,
                ViolationCode::DanglingReference,
                format!("table key {key} holds node {}", node.id),
            );
        }
    }

    // structure: walk from the root
    let mut visited = BTreeSet::new();
    if tree.nodes.contains_key(&tree.root) {
        let mut path = Vec::new();
        walk(tree, &tree.root, &mut path, &mut visited, &mut report);
    } else {
        report.push(
            &tree.root,
            ViolationCode::DanglingReference,
            "root does not exist".into(),
        );
    }
    for id in tree.nodes.keys() {
        if !visited.contains(id) {
            report.push(
                id,
                ViolationCode::OrphanNode,
                "not reachable from the root".into(),
            );
        }
    }

    // per-node kind, arity and parameters
    for (id, node) in &tree.nodes {
        let n = node.children.len();
        match &node.kind {
            NodeKind::Action { name, params } | NodeKind::Condition { name, params } => {
                let (table, label) = match node.kind {
                    NodeKind::Action { .. } => (&library.actions, "action"),
                    _ => (&library.conditions, "condition"),
                };
                if n != 0 {
                    report.push(
                        id,
                        ViolationCode::BadArity,
                        format!("{label} leaf has {n} children"),
                    );
                }
                let Some(spec) = table.get(name) else {
                    report.push(
                        id,
                        ViolationCode::UnknownNodeKind,
                        format!("unknown {label} `{name}`"),
                    );
                    continue;
                };
                for p in &spec.params {
                    match params.get(&p.name) {
                        None if p.required => report.push(
                            id,
                            ViolationCode::BadParam,
                            format!("missing parameter `{}`", p.name),
                        ),
                        Some(v) if !p.ty.accepts(v) => report.push(
                            id,
                            ViolationCode::BadParam,
                            format!("`{}={v}` is not a {}", p.name, p.ty.describe()),
                        ),
                        _ => {}
                    }
                }
                for key in params.keys() {
                    if !spec.params.iter().any(|p| &p.name == key) {
                        report.push(
                            id,
                            ViolationCode::BadParam,
                            format!("`{name}` has no parameter `{key}`"),
                        );
                    }
                }
            }
            composite => {
                let kw = composite.keyword();
                if !library.composites.contains(kw) {
                    report.push(
                        id,
                        ViolationCode::UnknownNodeKind,
                        format!("composite `{kw}` is not in the library"),
                    );
                }
                if let NodeKind::RetryUntilSuccessful { max_attempts } = composite {
                    if n != 1 {
                        report.push(
                            id,
                            ViolationCode::BadArity,
                            format!("RetryUntilSuccessful needs exactly one child, has {n}"),
                        );
                    }
                    if *max_attempts == 0 {
                        report.push(
                            id,
                            ViolationCode::BadParam,
                            "max_attempts must be at least 1".into(),
                        );
                    }
                } else if n == 0 {
                    report.push(id, ViolationCode::BadArity, format!("{kw} has no children"));
                }
            }
        }
    }

    report
}

fn walk(
    tree: &BehaviorTree,
    id: &NodeId,
    path: &mut Vec<NodeId>,
    visited: &mut BTreeSet<NodeId>,
    report: &mut ValidationReport,
) {
    visited.insert(id.clone());
    path.push(id.clone());
    let node = &tree.nodes[id];
    for child in &node.children {
        if !tree.nodes.contains_key(child) {
            report.push(
                id,
                ViolationCode::DanglingReference,
                format!("child {child} does not exist"),
            );
        } else if path.contains(child) {
            report.push(
                id,
                ViolationCode::CycleDetected,
                format!("child {child} is also an ancestor"),
            );
        } else if visited.contains(child) {
            report.push(
                id,
                ViolationCode::CycleDetected,
                format!("child {child} has more than one parent"),
            );
        } else {
            walk(tree, child, path, visited, report);
        }
    }
    path.pop();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn lib() -> NodeLibrary {
        NodeLibrary::warehouse()
    }

    #[test]
    fn unknown_action() {
        let t = parse("(Sequence (Action FlyTo zone=L1))").unwrap();
        let r = validate(&t, &lib());
        assert_eq!(r.codes(), [ViolationCode::UnknownNodeKind].into());
    }

    #[test]
    fn retry_with_two_children() {
        let t = parse(
            "(RetryUntilSuccessful max_attempts=2 (Action PlaceBlocks) (Action ReturnToStart))",
        )
        .unwrap();
        let r = validate(&t, &lib());
        assert_eq!(r.codes(), [ViolationCode::BadArity].into());
    }

    #[test]
    fn blind_rotation_mask_is_valid() {
        let t = parse("(Sequence (Action RotateBlocks mask=1111))").unwrap();
        assert!(validate(&t, &lib()).is_valid());
    }

    #[test]
    fn bad_params() {
        for src in [
            "(Action RotateBlocks mask=111)",
            "(Action PickBlocks count=5)",
            "(Action PickBlocks)",
            "(Action PlaceBlocks speed=2)",
            "(RetryUntilSuccessful max_attempts=0 (Action PlaceBlocks))",
        ] {
            let r = validate(&parse(src).unwrap(), &lib());
            assert_eq!(r.codes(), [ViolationCode::BadParam].into(), "{src}");
        }
    }

    #[test]
    fn structural_violations() {
        let base = parse("(Sequence (a: Action PlaceBlocks) (b: Action ReturnToStart))").unwrap();

        let mut orphan = base.clone();
        let seq = orphan.root.clone();
        orphan.nodes.get_mut(&seq).unwrap().children.pop();
        assert_eq!(validate(&orphan, &lib()).codes(), [ViolationCode::OrphanNode].into());

        let mut cycle = base.clone();
        cycle
            .nodes
            .get_mut(&NodeId::new("root"))
            .unwrap()
            .children
            .push(NodeId::new("root"));
        assert!(validate(&cycle, &lib()).codes().contains(&ViolationCode::CycleDetected));

        let mut shared = base.clone();
        shared
            .nodes
            .get_mut(&NodeId::new("root"))
            .unwrap()
            .children
            .push(NodeId::new("a"));
        assert_eq!(validate(&shared, &lib()).codes(), [ViolationCode::CycleDetected].into());

        let mut dangling = base;
        dangling
            .nodes
            .get_mut(&NodeId::new("root"))
            .unwrap()
            .children
            .push(NodeId::new("ghost"));
        assert_eq!(
            validate(&dangling, &lib()).codes(),
            [ViolationCode::DanglingReference].into()
        );
    }
}
