mod common;

use rand::Rng;
use spectree::data::shuffle_records;
use spectree::speculative::SpeculativeEvaluator;
use spectree::{
    encode_breadth_first, eval_data_parallel, eval_oracle_recursive, eval_serial, eval_speculative,
    eval_speculative_basic, oracle_with_depths, traversal_depths, ClassAssignment,
    DataParallelConfig, Dataset, EncodedTree, LinkedNode, ReductionMode, SpeculativeConfig,
};

fn check_all(
    root: &LinkedNode,
    tree: &EncodedTree,
    d: &Dataset,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let oracle = eval_oracle_recursive(root, d).unwrap();
    let m = d.len();
    assert_eq!(eval_serial(tree, d).unwrap(), oracle);

    let workers = rng.gen_range(1..=m.max(1));
    let chunk = rng.gen_range(m.div_ceil(workers).max(1)..=m.div_ceil(workers).max(1) + 3);
    let dp = DataParallelConfig::new(workers, chunk);
    assert_eq!(eval_data_parallel(tree, d, &dp).unwrap(), oracle, "{dp:?}");

    let per_group = rng.gen_range(1..=64);
    let basic = SpeculativeConfig::one_lane_per_node(tree, per_group, m)
        .with_reductions(rng.gen_range(1..=3));
    assert_eq!(
        eval_speculative_basic(tree, d, &basic).unwrap(),
        oracle,
        "{basic:?}"
    );

    let min_lanes = ((tree.len() - 1) / 2).max(1);
    let mode = if rng.gen_bool(0.25) {
        ReductionMode::Compound
    } else {
        ReductionMode::Doubling
    };
    let spec = SpeculativeConfig::covering(rng.gen_range(min_lanes..=min_lanes + 4), per_group, m)
        .with_reductions(rng.gen_range(1..=3))
        .with_mode(mode);
    assert_eq!(
        eval_speculative(tree, d, &spec).unwrap(),
        oracle,
        "{spec:?}"
    );
}

#[test]
fn exhaustive_small_trees_match_oracle() {
    let mut rng = common::rng(1);
    for internal in 0..=7 {
        let d = common::grid_records(internal);
        for shape in common::all_shapes(internal) {
            let root = common::label_in_order(&shape);
            let tree = encode_breadth_first(&root).unwrap();
            let expected: Vec<u32> = d
                .records()
                .map(|r| {
                    (0..internal as u32)
                        .filter(|&k| r[0] > k as f32 + 0.5)
                        .count() as u32
                })
                .collect();
            assert_eq!(
                eval_oracle_recursive(&root, &d).unwrap().as_slice(),
                expected
            );
            check_all(&root, &tree, &d, &mut rng);
        }
    }
}

#[test]
fn random_trees_match_oracle() {
    let mut rng = common::rng(2);
    for _ in 0..200 {
        let root = common::random_tree(&mut rng, 20);
        let tree = encode_breadth_first(&root).unwrap();
        let count = rng.gen_range(1..=300);
        let d = common::random_records(&mut rng, &tree, count);
        check_all(&root, &tree, &d, &mut rng);
    }
}

#[test]
fn trip_count_equals_leaf_depth() {
    let mut rng = common::rng(3);
    for _ in 0..100 {
        let root = common::random_tree(&mut rng, 16);
        let tree = encode_breadth_first(&root).unwrap();
        let d = common::random_records(&mut rng, &tree, 200);
        let trips = traversal_depths(&tree, &d).unwrap();
        let oracle: Vec<u32> = oracle_with_depths(&root, &d)
            .unwrap()
            .into_iter()
            .map(|(_, depth)| depth)
            .collect();
        assert_eq!(trips, oracle);
    }
}

#[test]
fn permuting_records_permutes_classes() {
    let mut rng = common::rng(4);
    for seed in 0..50 {
        let root = common::random_tree(&mut rng, 12);
        let tree = encode_breadth_first(&root).unwrap();
        let d = common::random_records(&mut rng, &tree, 128);
        let shuffled = shuffle_records(&d, seed);
        let before = eval_serial(&tree, &d).unwrap();
        let after = eval_serial(&tree, &shuffled).unwrap();
        for (i, r) in shuffled.records().enumerate() {
            let j = d.records().position(|x| x == r).unwrap();
            assert_eq!(after.as_slice()[i], before.as_slice()[j]);
        }
    }
}

#[test]
fn empty_dataset_gives_empty_assignment() {
    let mut rng = common::rng(5);
    let root = common::random_tree(&mut rng, 6);
    let tree = encode_breadth_first(&root).unwrap();
    let d = Dataset::empty(tree.required_arity().max(1));
    let empty = ClassAssignment::from(Vec::new());
    assert_eq!(eval_serial(&tree, &d).unwrap(), empty);
    let ev =
        SpeculativeEvaluator::new(&tree, SpeculativeConfig::covering(tree.len(), 4, 0)).unwrap();
    assert_eq!(ev.run(&d).unwrap(), empty);
}
