//! Seeded synthetic trees and datasets.
//!
//! Trees are grown inside the unit box: every split picks a threshold strictly
//! inside the parent's current interval on the chosen attribute, so each leaf
//! owns a non-empty region and is reachable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{tile_dataset, Dataset};
use crate::error::{Error, Result};
use crate::tree::{encode_breadth_first, EncodedTree, LinkedNode};

/// Record count of one randomized block in the reference workload.
pub const REFERENCE_BASE_RECORDS: usize = 16_384;
/// Tiling applied to the base block: 16,384 × 4 = 65,536 records.
pub const REFERENCE_TILE_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeShape {
    /// Longest root-to-leaf path in edges.
    pub depth: usize,
    pub leaves: usize,
    pub attributes: usize,
    pub classes: u32,
}

impl TreeShape {
    /// 31 nodes, 16 leaves, depth 11, 19 attributes, 7 classes.
    pub const REFERENCE: TreeShape = TreeShape {
        depth: 11,
        leaves: 16,
        attributes: 19,
        classes: 7,
    };

    fn check(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::argument("class count must be at least 1"));
        }
        if self.depth == 0 {
            if self.leaves != 1 {
                return Err(Error::argument("a depth-0 tree has exactly one leaf"));
            }
            return Ok(());
        }
        if self.attributes == 0 {
            return Err(Error::argument(
                "a tree with splits needs at least one attribute",
            ));
        }
        if self.leaves < self.depth + 1 {
            return Err(Error::argument(format!(
                "depth {} needs at least {} leaves, got {}",
                self.depth,
                self.depth + 1,
                self.leaves
            )));
        }
        if self.depth < 64 && self.leaves as u128 > 1u128 << self.depth {
            return Err(Error::argument(format!(
                "depth {} admits at most 2^{} leaves, got {}",
                self.depth, self.depth, self.leaves
            )));
        }
        Ok(())
    }
}

struct Proto {
    level: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    split: Option<(u32, f32, usize, usize)>,
    class: u32,
}

/// Grows a random full binary tree of exactly `shape.depth` and
/// `shape.leaves`: first a root-to-leaf spine of the full depth, then random
/// splits of shallower leaves until the leaf count is met.
pub fn generate_synthetic_tree(shape: &TreeShape, seed: u64) -> Result<LinkedNode> {
    shape.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = shape.attributes.max(1);
    let mut arena = vec![Proto {
        level: 0,
        lo: vec![0.0; a],
        hi: vec![1.0; a],
        split: None,
        class: rng.gen_range(0..shape.classes),
    }];

    let mut cur = 0;
    for _ in 0..shape.depth {
        let (l, r) = split_leaf(&mut arena, cur, shape, &mut rng)?;
        cur = if rng.gen_bool(0.5) { l } else { r };
    }
    let mut leaves = shape.depth + 1;
    while leaves < shape.leaves {
        let open: Vec<usize> = (0..arena.len())
            .filter(|&i| arena[i].split.is_none() && arena[i].level < shape.depth)
            .collect();
        let pick = open[rng.gen_range(0..open.len())];
        split_leaf(&mut arena, pick, shape, &mut rng)?;
        leaves += 1;
    }
    Ok(build_linked(&arena, 0))
}

fn split_leaf(
    arena: &mut Vec<Proto>,
    index: usize,
    shape: &TreeShape,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize)> {
    let a = shape.attributes;
    let mut chosen = None;
    for _ in 0..4 * a {
        let attr = rng.gen_range(0..a);
        let (lo, hi) = (arena[index].lo[attr], arena[index].hi[attr]);
        let u: f64 = rng.gen_range(0.3..0.7);
        let t = (lo + u * (hi - lo)) as f32;
        if f64::from(t) > lo && f64::from(t) < hi {
            chosen = Some((attr, t));
            break;
        }
    }
    let (attr, t) = chosen.ok_or_else(|| {
        Error::argument("attribute intervals too narrow to place another threshold")
    })?;

    let parent = &arena[index];
    let level = parent.level + 1;
    let (llo, mut lhi) = (parent.lo.clone(), parent.hi.clone());
    let (mut rlo, rhi) = (parent.lo.clone(), parent.hi.clone());
    lhi[attr] = f64::from(t);
    rlo[attr] = f64::from(t);
    let left = arena.len();
    let right = left + 1;
    let lc = rng.gen_range(0..shape.classes);
    let rc = rng.gen_range(0..shape.classes);
    arena.push(Proto {
        level,
        lo: llo,
        hi: lhi,
        split: None,
        class: lc,
    });
    arena.push(Proto {
        level,
        lo: rlo,
        hi: rhi,
        split: None,
        class: rc,
    });
    arena[index].split = Some((attr as u32, t, left, right));
    Ok((left, right))
}

fn build_linked(arena: &[Proto], index: usize) -> LinkedNode {
    match arena[index].split {
        None => LinkedNode::leaf(arena[index].class),
        Some((attr, t, l, r)) => {
            LinkedNode::split(attr, t, build_linked(arena, l), build_linked(arena, r))
        }
    }
}

/// How synthetic attribute values are drawn.
#[derive(Debug, Clone, Copy)]
pub enum Distribution<'a> {
    /// Independent uniform draws from `[low, high)`.
    Uniform { low: f32, high: f32 },
    /// Pick a reachable leaf of the tree uniformly, then draw a point inside
    /// its region. Spreads records across all depths of a skewed tree.
    LeafTargeted(&'a EncodedTree),
}

impl Default for Distribution<'_> {
    fn default() -> Self {
        Distribution::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

pub fn generate_synthetic_dataset(
    records: usize,
    arity: usize,
    seed: u64,
    distribution: Distribution<'_>,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(records * arity);
    match distribution {
        Distribution::Uniform { low, high } => {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(Error::argument(format!(
                    "bad uniform range [{low}, {high})"
                )));
            }
            for _ in 0..records * arity {
                values.push(rng.gen_range(low..high));
            }
        }
        Distribution::LeafTargeted(tree) => {
            if arity < tree.required_arity() {
                return Err(Error::argument(format!(
                    "tree reads attribute {} but arity is {arity}",
                    tree.required_arity() - 1
                )));
            }
            let boxes = leaf_boxes(tree, arity);
            if records > 0 && arity == 0 {
                return Err(Error::argument("cannot draw records of arity 0"));
            }
            for _ in 0..records {
                let (_, bounds) = &boxes[rng.gen_range(0..boxes.len())];
                for &(lo, hi) in bounds {
                    values.push(sample_half_open(&mut rng, lo, hi));
                }
            }
        }
    }
    if arity == 0 {
        return Ok(Dataset::empty(0));
    }
    Dataset::new(arity, values)
}

/// Draws from `(lo, hi]`, falling back to `hi` (itself representable) when
/// the interval is too thin for `f32`.
fn sample_half_open(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f32 {
    let u: f64 = rng.gen();
    let v = (hi - u * (hi - lo)) as f32;
    if f64::from(v) > lo && f64::from(v) <= hi {
        v
    } else {
        hi as f32
    }
}

/// Region `(lo, hi]` per attribute of every reachable leaf.
fn leaf_boxes(tree: &EncodedTree, arity: usize) -> Vec<(usize, Vec<(f64, f64)>)> {
    let finite = tree
        .internal_indices()
        .iter()
        .map(|&i| tree.nodes()[i as usize].threshold)
        .filter(|t| t.is_finite());
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in finite {
        tmin = tmin.min(f64::from(t));
        tmax = tmax.max(f64::from(t));
    }
    let dom_lo = if tmin > 0.0 { 0.0 } else { tmin - 1.0 };
    let dom_hi = if tmax < 1.0 { 1.0 } else { tmax + 1.0 };

    let mut out = Vec::new();
    let mut stack = vec![(0usize, vec![(dom_lo, dom_hi); arity])];
    while let Some((i, bounds)) = stack.pop() {
        if bounds.iter().any(|&(lo, hi)| lo >= hi) {
            continue;
        }
        let node = tree.nodes()[i];
        if node.is_leaf() {
            out.push((i, bounds));
            continue;
        }
        let a = node.attribute as usize;
        let t = f64::from(node.threshold);
        let mut left = bounds.clone();
        left[a].1 = left[a].1.min(t);
        let mut right = bounds;
        right[a].0 = right[a].0.max(t);
        stack.push((node.child as usize + 1, right));
        stack.push((node.child as usize, left));
    }
    out.sort_by_key(|(i, _)| *i);
    out
}

/// The reference workload: a 31-node, depth-11 tree over 19 attributes with
/// 7 classes, and 16,384 leaf-targeted records tiled four times.
#[derive(Debug, Clone)]
pub struct ReferenceFixture {
    pub linked: LinkedNode,
    pub tree: EncodedTree,
    pub base: Dataset,
    pub dataset: Dataset,
}

pub fn reference_fixture(seed: u64) -> Result<ReferenceFixture> {
    let shape = TreeShape::REFERENCE;
    let linked = generate_synthetic_tree(&shape, seed)?;
    let tree = encode_breadth_first(&linked)?;
    let base = generate_synthetic_dataset(
        REFERENCE_BASE_RECORDS,
        shape.attributes,
        seed.wrapping_add(1),
        Distribution::LeafTargeted(&tree),
    )?;
    let dataset = tile_dataset(&base, REFERENCE_TILE_FACTOR)?;
    Ok(ReferenceFixture {
        linked,
        tree,
        base,
        dataset,
    })
}
