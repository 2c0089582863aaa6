mod common;

use common::trees::{check_tree, random_scripts, Names, TreeGen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn engine_matches_reference_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..2_000 {
        let size = rng.random_range(1..30);
        let tree = TreeGen::new(&mut rng, Names::Plain, size).tree();
        let scripts = random_scripts(&mut rng, &tree);
        check_tree(&tree, &scripts, 4).unwrap_or_else(|e| panic!("tree {i}: {e}"));
    }
}
