//! Round-trip and validator-mutant checks over generated trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrl_core::bt::{BTNode, BehaviorTree, NodeId, NodeKind};
use vrl_core::dsl::{parse, serialize, validate, NodeLibrary, ParseError, ViolationCode};

use super::trees::{Names, TreeGen};

fn random_metadata(rng: &mut ChaCha8Rng) -> String {
    let lines = rng.random_range(0..3);
    (0..lines)
        .map(|k| format!("episode {k} note: keep \"{}\"", rng.random_range(0..100)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn check_round_trip(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let names = if i % 2 == 0 { Names::Plain } else { Names::Exotic };
        let size = rng.random_range(1..40);
        let mut tree = TreeGen::new(&mut rng, names, size).tree();
        tree.metadata = random_metadata(&mut rng);
        let text = serialize(&tree);
        let back = parse(&text).map_err(|e| format!("tree {i}: {e}\n{text}"))?;
        if back != tree {
            return Err(format!("tree {i} changed in a round trip:\n{text}"));
        }
        if serialize(&back) != text {
            return Err(format!("tree {i}: serialization is not a fixed point"));
        }
    }
    Ok(())
}

fn pick<'a>(rng: &mut ChaCha8Rng, ids: &'a [NodeId]) -> &'a NodeId {
    &ids[rng.random_range(0..ids.len())]
}

fn ids_where(tree: &BehaviorTree, f: impl Fn(&BTNode) -> bool) -> Vec<NodeId> {
    tree.nodes.values().filter(|n| f(n)).map(|n| n.id.clone()).collect()
}

/// Applies one mutant of the given class to a valid tree.
fn mutate(rng: &mut ChaCha8Rng, tree: &mut BehaviorTree, class: ViolationCode) {
    let leaves = ids_where(tree, |n| n.kind.is_leaf());
    let composites = ids_where(tree, |n| !n.kind.is_leaf());
    let extra = NodeId::new("mutant");
    match class {
        ViolationCode::UnknownNodeKind => {
            let id = pick(rng, &leaves).clone();
            tree.nodes.get_mut(&id).unwrap().kind = NodeKind::action("FlyTo", &[]);
        }
        ViolationCode::BadArity => {
            let id = pick(rng, &leaves).clone();
            tree.nodes
                .insert(extra.clone(), BTNode::new(extra.clone(), NodeKind::action("PlaceBlocks", &[]), vec![]));
            tree.nodes.get_mut(&id).unwrap().children.push(extra);
        }
        ViolationCode::BadParam => {
            let id = pick(rng, &leaves).clone();
            if let NodeKind::Action { params, .. } | NodeKind::Condition { params, .. } =
                &mut tree.nodes.get_mut(&id).unwrap().kind
            {
                match rng.random_range(0..3) {
                    0 if params.contains_key("count") => {
                        params.insert("count".into(), "9".into());
                    }
                    1 if params.contains_key("mask") => {
                        params.insert("mask".into(), "10x1".into());
                    }
                    _ => {
                        params.insert("speed".into(), "fast".into());
                    }
                }
            }
        }
        ViolationCode::OrphanNode => {
            tree.nodes
                .insert(extra.clone(), BTNode::new(extra, NodeKind::action("PlaceBlocks", &[]), vec![]));
        }
        ViolationCode::CycleDetected => {
            // re-attach an ancestor (or the node itself) below a composite
            let id = pick(rng, &composites).clone();
            let mut chain = vec![id.clone()];
            while let Some(p) = tree.parent_of(chain.last().unwrap()) {
                chain.push(p.clone());
            }
            let target = pick(rng, &chain).clone();
            tree.nodes.get_mut(&id).unwrap().children.push(target);
        }
        ViolationCode::DanglingReference => {
            let id = pick(rng, &composites).clone();
            tree.nodes.get_mut(&id).unwrap().children.push(NodeId::new("ghost"));
        }
    }
}

const CLASSES: [ViolationCode; 6] = [
    ViolationCode::UnknownNodeKind,
    ViolationCode::BadArity,
    ViolationCode::BadParam,
    ViolationCode::OrphanNode,
    ViolationCode::CycleDetected,
    ViolationCode::DanglingReference,
];

/// Every generated tree validates clean, every mutant is reported with its
/// class, and a duplicated name is rejected by the parser.
pub fn check_mutants(n: usize, seed: u64) -> Result<(), String> {
    let library = NodeLibrary::warehouse();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let size = rng.random_range(2..30);
        let tree = TreeGen::new(&mut rng, Names::Plain, size).tree();
        let report = validate(&tree, &library);
        if !report.is_valid() {
            return Err(format!("tree {i} flagged: {report}"));
        }
        for class in CLASSES {
            let mut m = tree.clone();
            mutate(&mut rng, &mut m, class);
            if !validate(&m, &library).codes().contains(&class) {
                return Err(format!("tree {i}: {class:?} mutant not caught"));
            }
        }
        let text = serialize(&tree);
        let names: Vec<&NodeId> = tree.nodes.keys().filter(|k| k.as_str() != "root").collect();
        if names.len() >= 2 {
            let (a, b) = (names[0], names[1]);
            let dup = text.replacen(&format!("({b}: "), &format!("({a}: "), 1);
            match parse(&dup) {
                Err(ParseError::DuplicateNodeName { name, .. }) if name == a.as_str() => {}
                other => return Err(format!("tree {i}: duplicate name gave {other:?}")),
            }
        }
    }
    Ok(())
}
