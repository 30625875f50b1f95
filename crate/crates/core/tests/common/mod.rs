#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectree::data::{
    generate_synthetic_dataset, generate_synthetic_tree, Distribution, TreeShape,
};
use spectree::{Dataset, EncodedTree, LinkedNode};

/// Every full binary tree with `internal` decision nodes, shapes only
/// (attribute 0, placeholder thresholds and classes).
pub fn all_shapes(internal: usize) -> Vec<LinkedNode> {
    if internal == 0 {
        return vec![LinkedNode::leaf(0)];
    }
    let mut out = Vec::new();
    for left in 0..internal {
        let right = internal - 1 - left;
        for l in all_shapes(left) {
            for r in all_shapes(right) {
                out.push(LinkedNode::split(0, 0.0, l.clone(), r));
            }
        }
    }
    out
}

/// Labels a shape as a search tree over one attribute: the k-th decision
/// node in order gets threshold `k + 0.5` and the k-th leaf class `k`, so
/// every leaf owns the interval between its neighbouring thresholds.
pub fn label_in_order(shape: &LinkedNode) -> LinkedNode {
    fn go(n: &LinkedNode, splits: &mut u32, leaves: &mut u32) -> LinkedNode {
        match (&n.left, &n.right) {
            (Some(l), Some(r)) => {
                let left = go(l, splits, leaves);
                let t = *splits as f32 + 0.5;
                *splits += 1;
                let right = go(r, splits, leaves);
                LinkedNode::split(0, t, left, right)
            }
            _ => {
                let c = *leaves;
                *leaves += 1;
                LinkedNode::leaf(c)
            }
        }
    }
    go(shape, &mut 0, &mut 0)
}

/// Single-attribute records on a half-unit grid that covers every leaf
/// interval and lands exactly on every threshold.
pub fn grid_records(internal: usize) -> Dataset {
    let values: Vec<f32> = (0..=2 * internal + 2)
        .map(|i| i as f32 * 0.5 - 0.5)
        .collect();
    Dataset::new(1, values).unwrap()
}

/// A random tree of depth at most `max_depth` with every leaf reachable.
pub fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize) -> LinkedNode {
    let depth = rng.gen_range(0..=max_depth);
    let cap = if depth >= 8 { 256 } else { 1usize << depth };
    let leaves = if depth == 0 {
        1
    } else {
        rng.gen_range(depth + 1..=cap.max(depth + 1))
    };
    let shape = TreeShape {
        depth,
        leaves,
        attributes: rng.gen_range(1..=6),
        classes: rng.gen_range(1..=10),
    };
    generate_synthetic_tree(&shape, rng.gen()).unwrap()
}

/// Records mixing uniform, leaf-targeted and exact-threshold values.
pub fn random_records(rng: &mut ChaCha8Rng, tree: &EncodedTree, count: usize) -> Dataset {
    let arity = tree.required_arity().max(1);
    let seed = rng.gen();
    let base = if rng.gen_bool(0.5) {
        generate_synthetic_dataset(count, arity, seed, Distribution::default()).unwrap()
    } else {
        generate_synthetic_dataset(count, arity, seed, Distribution::LeafTargeted(tree)).unwrap()
    };
    let thresholds: Vec<(u32, f32)> = tree
        .nodes()
        .iter()
        .filter(|n| !n.is_leaf())
        .map(|n| (n.attribute, n.threshold))
        .collect();
    let mut values = base.as_slice().to_vec();
    if !thresholds.is_empty() {
        for row in values.chunks_mut(arity) {
            if rng.gen_bool(0.1) {
                let (a, t) = thresholds[rng.gen_range(0..thresholds.len())];
                row[a as usize] = t;
            }
        }
    }
    Dataset::new(arity, values).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Leaf depth (edges) of every node, by walking child links.
pub fn node_levels(tree: &EncodedTree) -> Vec<u32> {
    let mut level = vec![0u32; tree.len()];
    for (i, n) in tree.nodes().iter().enumerate() {
        if !n.is_leaf() {
            let c = n.child as usize;
            level[c] = level[i] + 1;
            level[c + 1] = level[i] + 1;
        }
    }
    level
}

/// `ceil(log2 d)` for `d >= 1`, by repeated doubling.
pub fn ceil_log2(d: u32) -> u32 {
    let mut steps = 0;
    let mut reach = 1u32;
    while reach < d {
        reach *= 2;
        steps += 1;
    }
    steps
}
