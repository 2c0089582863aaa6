use proptest::prelude::*;
use vrl_core::dsl::parse;
use vrl_core::sim::{
    execute_action, init_world, shipped_fields, ActionCall, BlockLocation, FaultModel,
};

const ZONES: [&str; 9] = ["S", "L1", "L2", "L3", "U1", "U2", "SH0", "SH1", "nowhere"];

fn call() -> impl Strategy<Value = ActionCall> {
    prop_oneof![
        (0..ZONES.len()).prop_map(|i| ActionCall::NavigateTo { zone: ZONES[i].into() }),
        (1usize..=4).prop_map(|count| ActionCall::PickBlocks { count }),
        any::<[bool; 4]>().prop_map(|mask| ActionCall::RotateBlocks { mask }),
        Just(ActionCall::PlaceBlocks),
        Just(ActionCall::MoveShelf),
        Just(ActionCall::ReturnToStart),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_action_sequences_keep_the_world_consistent(
        field in 0usize..5,
        seed in any::<u64>(),
        calls in prop::collection::vec(call(), 1..40),
    ) {
        let fields = shipped_fields();
        let mut world = init_world(&fields[field], seed).unwrap();
        let n_blocks = world.blocks.len();
        let faults = FaultModel { p_drop_in_transit: 0.2, p_pick_fail: 0.2, ..FaultModel::default() };
        for c in &calls {
            let before = world.clone();
            match execute_action(&mut world, None, c, &faults) {
                Ok(out) => {
                    prop_assert!(out.duration >= 0.0);
                    prop_assert!(world.clock >= before.clock);
                    prop_assert_eq!(world.events.len(), before.events.len() + 1);
                }
                Err(_) => {
                    prop_assert_eq!(&world.blocks, &before.blocks);
                    prop_assert_eq!(&world.carried, &before.carried);
                    prop_assert_eq!(world.clock, before.clock);
                }
            }
            prop_assert_eq!(world.blocks.len(), n_blocks);
            prop_assert!(world.carried.len() <= 4);
            let carried: Vec<&str> = world
                .blocks
                .iter()
                .filter(|b| b.location == BlockLocation::Carried)
                .map(|b| b.block_id.as_str())
                .collect();
            let mut held: Vec<&str> = world.carried.iter().map(String::as_str).collect();
            held.sort();
            let mut carried_sorted = carried.clone();
            carried_sorted.sort();
            prop_assert_eq!(held, carried_sorted);
            for (i, e) in world.events.iter().enumerate() {
                prop_assert_eq!(e.index as usize, i);
            }
        }
    }

    #[test]
    fn parser_never_panics(src in "[()a-zA-Z0-9:=\" \n#@._\\\\-]{0,80}") {
        let _ = parse(&src);
    }
}
