//! Serial evaluation: the branchless baseline and a conditional oracle.

use crate::data::{ClassAssignment, Dataset};
use crate::error::{Error, Result};
use crate::tree::{EncodedNode, EncodedTree, LinkedNode};

/// Checks once per call that every attribute the tree reads exists.
pub(crate) fn check_arity(tree: &EncodedTree, d: &Dataset) -> Result<()> {
    let need = tree.required_arity();
    if d.arity() < need {
        return Err(Error::argument(format!(
            "tree reads attribute index {} but records have arity {}",
            need - 1,
            d.arity()
        )));
    }
    Ok(())
}

/// Walks one record to its leaf. The loop guard is the only branch; the
/// child is selected arithmetically.
#[inline(always)]
pub(crate) fn classify(nodes: &[EncodedNode], record: &[f32]) -> u32 {
    let mut i = 0usize;
    loop {
        let node = &nodes[i];
        if let Some(class) = node.class {
            return class;
        }
        i = node.successor(record) as usize;
    }
}

/// Same walk, also returning the number of loop trips (the leaf's depth).
#[inline]
pub(crate) fn classify_counted(nodes: &[EncodedNode], record: &[f32]) -> (u32, u32) {
    let mut i = 0usize;
    let mut trips = 0;
    loop {
        let node = &nodes[i];
        if let Some(class) = node.class {
            return (class, trips);
        }
        i = node.successor(record) as usize;
        trips += 1;
    }
}

pub(crate) fn classify_range(tree: &EncodedTree, d: &Dataset, first: usize, out: &mut [u32]) {
    let nodes = tree.nodes();
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = classify(nodes, d.record(first + k));
    }
}

pub fn eval_serial(tree: &EncodedTree, d: &Dataset) -> Result<ClassAssignment> {
    let mut out = vec![0u32; d.len()];
    eval_serial_into(tree, d, &mut out)?;
    Ok(ClassAssignment::from(out))
}

/// Writes one class per record into a caller-provided buffer of length `M`.
pub fn eval_serial_into(tree: &EncodedTree, d: &Dataset, out: &mut [u32]) -> Result<()> {
    check_arity(tree, d)?;
    check_len(d, out)?;
    classify_range(tree, d, 0, out);
    Ok(())
}

pub(crate) fn check_len(d: &Dataset, out: &[u32]) -> Result<()> {
    if out.len() != d.len() {
        return Err(Error::argument(format!(
            "output buffer holds {} slots for {} records",
            out.len(),
            d.len()
        )));
    }
    Ok(())
}

/// Per-record loop trip counts of the branchless walk.
pub fn traversal_depths(tree: &EncodedTree, d: &Dataset) -> Result<Vec<u32>> {
    check_arity(tree, d)?;
    let nodes = tree.nodes();
    Ok(d.records().map(|r| classify_counted(nodes, r).1).collect())
}

/// Mean depth, in edges, of the leaf each record reaches.
pub fn mean_traversal_depth(tree: &EncodedTree, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::argument("mean depth of an empty dataset"));
    }
    let depths = traversal_depths(tree, d)?;
    let total: u64 = depths.iter().map(|&x| u64::from(x)).sum();
    Ok(total as f64 / d.len() as f64)
}

/// Recursive descent over the linked tree, choosing the child with an
/// ordinary conditional: left on `r <= t`, right otherwise.
pub fn eval_oracle_recursive(root: &LinkedNode, d: &Dataset) -> Result<ClassAssignment> {
    Ok(oracle_with_depths(root, d)?
        .into_iter()
        .map(|(c, _)| c)
        .collect::<Vec<_>>()
        .into())
}

/// Oracle class and leaf depth for every record.
pub fn oracle_with_depths(root: &LinkedNode, d: &Dataset) -> Result<Vec<(u32, u32)>> {
    let need = oracle_required_arity(root, "root")?;
    if d.arity() < need {
        return Err(Error::argument(format!(
            "tree reads attribute index {} but records have arity {}",
            need - 1,
            d.arity()
        )));
    }
    Ok(d.records().map(|r| descend(root, r, 0)).collect())
}

fn descend(node: &LinkedNode, record: &[f32], depth: u32) -> (u32, u32) {
    match (&node.left, &node.right, node.class) {
        (Some(left), Some(right), _) => {
            if record[node.attribute as usize] <= node.threshold {
                descend(left, record, depth + 1)
            } else {
                descend(right, record, depth + 1)
            }
        }
        (_, _, Some(class)) => (class, depth),
        _ => unreachable!("shape checked before descent"),
    }
}

fn oracle_required_arity(node: &LinkedNode, path: &str) -> Result<usize> {
    match (&node.left, &node.right) {
        (Some(l), Some(r)) => {
            let a = oracle_required_arity(l, &format!("{path}.left"))?;
            let b = oracle_required_arity(r, &format!("{path}.right"))?;
            Ok((node.attribute as usize + 1).max(a).max(b))
        }
        (None, None) if node.class.is_some() => Ok(0),
        (None, None) => Err(Error::Structure {
            path: path.into(),
            reason: "leaf has no class".into(),
        }),
        _ => Err(Error::Structure {
            path: path.into(),
            reason: "node has exactly one child".into(),
        }),
    }
}
