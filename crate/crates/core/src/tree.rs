//! Linked and breadth-first encoded tree representations.
//!
//! The encoded layout stores the left child index only; the right child sits
//! at `child + 1`. Leaves are rewritten into self-loops (`child == own index`)
//! with a `+inf` threshold so the single successor rule
//! `child + (r[a] > t)` maps every leaf back onto itself for any finite
//! record. The JSON writer can emit the `-inf` leaf convention instead; see
//! [`crate::data::LeafThresholdStyle`].

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of a pointer-linked classification tree.
///
/// A full binary tree has either zero or two children per node, and carries a
/// class id exactly on the childless nodes. Those rules are checked by
/// [`encode_breadth_first`], not by the type, so that malformed input read
/// from disk can be reported with the offending path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedNode {
    #[serde(rename = "attr", default)]
    pub attribute: u32,
    #[serde(rename = "thr", default)]
    pub threshold: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Box<LinkedNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Box<LinkedNode>>,
    #[serde(default)]
    pub class: Option<u32>,
}

impl LinkedNode {
    pub fn leaf(class: u32) -> Self {
        LinkedNode {
            attribute: 0,
            threshold: 0.0,
            left: None,
            right: None,
            class: Some(class),
        }
    }

    /// Decision node sending `r[attribute] <= threshold` left.
    pub fn split(attribute: u32, threshold: f32, left: LinkedNode, right: LinkedNode) -> Self {
        LinkedNode {
            attribute,
            threshold,
            left: Some(Box::new(left)),
            right: Some(Box::new(right)),
            class: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    pub fn node_count(&self) -> usize {
        1 + self.left.as_ref().map_or(0, |n| n.node_count())
            + self.right.as_ref().map_or(0, |n| n.node_count())
    }

    /// Longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        match (&self.left, &self.right) {
            (None, None) => 0,
            (l, r) => {
                1 + l
                    .as_ref()
                    .map_or(0, |n| n.depth())
                    .max(r.as_ref().map_or(0, |n| n.depth()))
            }
        }
    }

    /// Structural equality that ignores the unused attribute and threshold
    /// fields of leaves.
    pub fn is_isomorphic(&self, other: &LinkedNode) -> bool {
        match (self.is_leaf(), other.is_leaf()) {
            (true, true) => self.class == other.class,
            (false, false) => {
                self.attribute == other.attribute
                    && self.threshold.to_bits() == other.threshold.to_bits()
                    && self.class == other.class
                    && children_isomorphic(&self.left, &other.left)
                    && children_isomorphic(&self.right, &other.right)
            }
            _ => false,
        }
    }
}

fn children_isomorphic(a: &Option<Box<LinkedNode>>, b: &Option<Box<LinkedNode>>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.is_isomorphic(b),
        (None, None) => true,
        _ => false,
    }
}

/// One entry of the breadth-first node array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedNode {
    pub attribute: u32,
    /// Split threshold; `+inf` on leaves.
    pub threshold: f32,
    /// Left child index for decision nodes, own index for leaves.
    pub child: u32,
    /// `None` marks a decision node.
    pub class: Option<u32>,
}

impl EncodedNode {
    pub fn leaf(index: u32, class: u32) -> Self {
        EncodedNode {
            attribute: 0,
            threshold: f32::INFINITY,
            child: index,
            class: Some(class),
        }
    }

    pub fn split(attribute: u32, threshold: f32, child: u32) -> Self {
        EncodedNode {
            attribute,
            threshold,
            child,
            class: None,
        }
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.class.is_some()
    }

    /// Branchless successor: left child when `r[a] <= t`, right child
    /// (`child + 1`) otherwise. Leaves return their own index.
    #[inline(always)]
    pub fn successor(&self, record: &[f32]) -> u32 {
        self.child + (record[self.attribute as usize] > self.threshold) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    /// Longest root-to-leaf path in edges.
    pub depth: usize,
}

impl fmt::Display for TreeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes={} leaves={} depth={}",
            self.nodes, self.leaves, self.depth
        )
    }
}

/// A validated breadth-first encoded tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTree {
    nodes: Vec<EncodedNode>,
    levels: Vec<u32>,
    internal: Vec<u32>,
    leaf_count: usize,
    depth: usize,
}

impl EncodedTree {
    /// Wraps a node array after checking every layout invariant. Leaf
    /// attributes are reset to 0 so any non-empty record can be read at a
    /// leaf.
    pub fn new(mut nodes: Vec<EncodedNode>) -> Result<Self> {
        let diagnostics = validate(&nodes);
        if !diagnostics.is_empty() {
            let rendered: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
            return Err(Error::InvalidTree(rendered.join("; ")));
        }
        for n in nodes.iter_mut().filter(|n| n.is_leaf()) {
            n.attribute = 0;
        }
        let mut levels = vec![0u32; nodes.len()];
        let mut internal = Vec::with_capacity(nodes.len() / 2);
        for (i, node) in nodes.iter().enumerate() {
            if !node.is_leaf() {
                internal.push(i as u32);
                let c = node.child as usize;
                levels[c] = levels[i] + 1;
                levels[c + 1] = levels[i] + 1;
            }
        }
        let depth = levels.iter().copied().max().unwrap_or(0) as usize;
        let leaf_count = nodes.len() - internal.len();
        Ok(EncodedTree {
            nodes,
            levels,
            internal,
            leaf_count,
            depth,
        })
    }

    #[inline]
    pub fn nodes(&self) -> &[EncodedNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Depth in edges of node `index`.
    pub fn level(&self, index: usize) -> usize {
        self.levels[index] as usize
    }

    /// Decision-node indices in breadth-first order.
    pub fn internal_indices(&self) -> &[u32] {
        &self.internal
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            nodes: self.nodes.len(),
            leaves: self.leaf_count,
            depth: self.depth,
        }
    }

    /// Smallest record arity the tree can be evaluated against.
    pub fn required_arity(&self) -> usize {
        self.internal
            .iter()
            .map(|&i| self.nodes[i as usize].attribute as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn leaf_paths(&self) -> LeafPaths {
        leaf_paths(self)
    }

    pub fn processor_node_map(&self) -> ProcessorNodeMap {
        processor_node_map(self)
    }

    /// Rebuilds the linked form by following the child links from the root.
    pub fn decode(&self) -> LinkedNode {
        self.decode_at(0)
    }

    fn decode_at(&self, index: usize) -> LinkedNode {
        let node = &self.nodes[index];
        match node.class {
            Some(class) => LinkedNode {
                attribute: node.attribute,
                threshold: node.threshold,
                left: None,
                right: None,
                class: Some(class),
            },
            None => {
                let c = node.child as usize;
                LinkedNode::split(
                    node.attribute,
                    node.threshold,
                    self.decode_at(c),
                    self.decode_at(c + 1),
                )
            }
        }
    }
}

/// Breadth-first encoding driven by a FIFO queue and a running child counter
/// that starts at 1 and advances by one per enqueued child.
pub fn encode_breadth_first(root: &LinkedNode) -> Result<EncodedTree> {
    check_full_binary(root)?;

    let mut nodes = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back(root);
    let mut child_index: u32 = 1;

    while let Some(n) = queue.pop_front() {
        let index = nodes.len() as u32;
        let mut node = EncodedNode {
            attribute: n.attribute,
            threshold: n.threshold,
            child: child_index,
            class: n.class,
        };
        if let Some(left) = n.left.as_deref() {
            queue.push_back(left);
            child_index += 1;
        }
        if let Some(right) = n.right.as_deref() {
            queue.push_back(right);
            child_index += 1;
        }
        if let Some(class) = n.class {
            node = EncodedNode::leaf(index, class);
        }
        nodes.push(node);
    }

    EncodedTree::new(nodes)
}

fn check_full_binary(root: &LinkedNode) -> Result<()> {
    let mut stack = vec![(root, String::from("root"))];
    while let Some((node, path)) = stack.pop() {
        let fail = |reason: &str| Error::Structure {
            path: path.clone(),
            reason: reason.to_string(),
        };
        match (&node.left, &node.right) {
            (Some(l), Some(r)) => {
                if node.class.is_some() {
                    return Err(fail("decision node carries a class"));
                }
                if node.threshold.is_nan() {
                    return Err(fail("threshold is NaN"));
                }
                stack.push((r, format!("{path}.right")));
                stack.push((l, format!("{path}.left")));
            }
            (None, None) => {
                if node.class.is_none() {
                    return Err(fail("leaf has no class"));
                }
            }
            _ => return Err(fail("node has exactly one child")),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    EmptyTree,
    /// Leaf whose child index is not its own index.
    LeafNotSelfLoop {
        child: u32,
    },
    /// Leaf whose threshold is not the `+inf` sentinel.
    LeafThreshold,
    /// Decision node pointing at or before itself.
    NonBfsChildLink {
        child: u32,
    },
    /// Decision node whose right child would fall past the array end.
    ChildOutOfRange {
        child: u32,
    },
    /// Child links that are forward and in range but not in breadth-first order.
    NotBreadthFirst {
        child: u32,
        expected: u32,
    },
    NanThreshold,
    /// Node never referenced as anyone's child.
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnostic {
    pub node: usize,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.node;
        match self.kind {
            DiagnosticKind::EmptyTree => write!(f, "tree has no nodes"),
            DiagnosticKind::LeafNotSelfLoop { child } => {
                write!(f, "node {n}: leaf child index {child} is not a self-loop")
            }
            DiagnosticKind::LeafThreshold => {
                write!(f, "node {n}: leaf threshold is not the +inf sentinel")
            }
            DiagnosticKind::NonBfsChildLink { child } => {
                write!(f, "node {n}: non-BFS child link to {child}")
            }
            DiagnosticKind::ChildOutOfRange { child } => {
                write!(f, "node {n}: child pair {child},{} out of range", child + 1)
            }
            DiagnosticKind::NotBreadthFirst { child, expected } => write!(
                f,
                "node {n}: child index {child} breaks breadth-first order (expected {expected})"
            ),
            DiagnosticKind::NanThreshold => write!(f, "node {n}: threshold is NaN"),
            DiagnosticKind::Unreachable => write!(f, "node {n}: unreachable from the root"),
        }
    }
}

/// Checks the encoded-node invariants and reports one diagnostic per
/// violation. An empty result means the array is a valid encoding.
pub fn validate(nodes: &[EncodedNode]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if nodes.is_empty() {
        out.push(Diagnostic {
            node: 0,
            kind: DiagnosticKind::EmptyTree,
        });
        return out;
    }
    let n = nodes.len();
    let mut next_child: u64 = 1;
    for (i, node) in nodes.iter().enumerate() {
        let kind = match node.class {
            Some(_) if node.child as usize != i => {
                Some(DiagnosticKind::LeafNotSelfLoop { child: node.child })
            }
            Some(_) if node.threshold != f32::INFINITY => Some(DiagnosticKind::LeafThreshold),
            Some(_) => None,
            None => {
                let expected = next_child;
                next_child += 2;
                let child = node.child;
                if node.threshold.is_nan() {
                    Some(DiagnosticKind::NanThreshold)
                } else if child as usize <= i {
                    Some(DiagnosticKind::NonBfsChildLink { child })
                } else if child as usize + 1 >= n {
                    Some(DiagnosticKind::ChildOutOfRange { child })
                } else if u64::from(child) != expected {
                    Some(DiagnosticKind::NotBreadthFirst {
                        child,
                        expected: expected as u32,
                    })
                } else {
                    None
                }
            }
        };
        if let Some(kind) = kind {
            out.push(Diagnostic { node: i, kind });
        }
    }
    // Children occupy 1..next_child; anything past that has no parent.
    for i in (next_child as usize)..n {
        out.push(Diagnostic {
            node: i,
            kind: DiagnosticKind::Unreachable,
        });
    }
    out
}

/// Static successor table for one record group: identity on every index, so
/// leaves start out resolved. Decision-node entries are overwritten per record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPaths(Vec<u32>);

impl LeafPaths {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

pub fn leaf_paths(tree: &EncodedTree) -> LeafPaths {
    LeafPaths((0..tree.len() as u32).collect())
}

/// Lane rank to decision-node index, breadth-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorNodeMap(Vec<u32>);

impl ProcessorNodeMap {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn processor_node_map(tree: &EncodedTree) -> ProcessorNodeMap {
    ProcessorNodeMap(tree.internal_indices().to_vec())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn single_leaf_encodes_to_self_loop() {
        let tree = encode_breadth_first(&LinkedNode::leaf(7)).unwrap();
        assert_eq!(tree.nodes(), &[EncodedNode::leaf(0, 7)]);
        assert_eq!(tree.nodes()[0].attribute, 0);
        assert_eq!(
            tree.stats(),
            TreeStats {
                nodes: 1,
                leaves: 1,
                depth: 0
            }
        );
    }

    #[test]
    fn three_node_queue_trace() {
        let tree = encode_breadth_first(&three_node()).unwrap();
        let n = tree.nodes();
        assert_eq!(n[0], EncodedNode::split(0, 0.5, 1));
        assert_eq!(n[1], EncodedNode::leaf(1, 7));
        assert_eq!(n[2], EncodedNode::leaf(2, 9));
    }

    #[test]
    fn five_node_counter_advances_by_two() {
        let root = LinkedNode::split(
            1,
            2.0,
            LinkedNode::split(0, 1.0, LinkedNode::leaf(3), LinkedNode::leaf(4)),
            LinkedNode::leaf(5),
        );
        let tree = encode_breadth_first(&root).unwrap();
        let n = tree.nodes();
        assert_eq!(n[0].child, 1);
        assert_eq!(n[1], EncodedNode::split(0, 1.0, 3));
        assert_eq!(n[2], EncodedNode::leaf(2, 5));
        assert_eq!(n[3], EncodedNode::leaf(3, 3));
        assert_eq!(n[4], EncodedNode::leaf(4, 4));
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn one_child_is_a_structure_error_with_path() {
        let mut root = complete_depth2();
        root.left.as_mut().unwrap().right = None;
        match encode_breadth_first(&root) {
            Err(Error::Structure { path, .. }) => assert_eq!(path, "root.left"),
            other => panic!("expected structure error, got {other:?}"),
        }
    }

    #[test]
    fn leaf_without_class_rejected() {
        let mut root = three_node();
        root.right.as_mut().unwrap().class = None;
        assert!(matches!(
            encode_breadth_first(&root),
            Err(Error::Structure { .. })
        ));
    }

    #[test]
    fn validate_accepts_encoder_output() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        assert!(validate(tree.nodes()).is_empty());
    }

    #[test]
    fn validate_flags_leaf_without_self_loop() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let mut nodes = tree.nodes().to_vec();
        nodes[4].child = 3;
        let d = validate(&nodes);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].node, 4);
        assert!(matches!(
            d[0].kind,
            DiagnosticKind::LeafNotSelfLoop { child: 3 }
        ));
    }

    #[test]
    fn validate_flags_backward_link() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let mut nodes = tree.nodes().to_vec();
        nodes[2].child = 1;
        let d = validate(&nodes);
        assert_eq!(d[0].node, 2);
        assert!(d[0].to_string().contains("non-BFS child link"));
    }

    #[test]
    fn validate_flags_out_of_range_and_orphans() {
        let mut nodes = encode_breadth_first(&three_node())
            .unwrap()
            .nodes()
            .to_vec();
        nodes[0].child = 2;
        let d = validate(&nodes);
        assert!(matches!(
            d[0].kind,
            DiagnosticKind::ChildOutOfRange { child: 2 }
        ));

        let mut nodes = encode_breadth_first(&three_node())
            .unwrap()
            .nodes()
            .to_vec();
        nodes.push(EncodedNode::leaf(3, 1));
        let d = validate(&nodes);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::Unreachable);
        assert!(validate(&[])
            .iter()
            .any(|d| d.kind == DiagnosticKind::EmptyTree));
    }

    #[test]
    fn validate_flags_non_breadth_first_layout() {
        // Swap the child pairs of nodes 1 and 2: still a valid tree, but
        // no longer in breadth-first order.
        let root = LinkedNode::split(
            0,
            0.5,
            LinkedNode::split(0, 0.25, LinkedNode::leaf(0), LinkedNode::leaf(1)),
            LinkedNode::split(0, 0.75, LinkedNode::leaf(2), LinkedNode::leaf(3)),
        );
        let mut nodes = encode_breadth_first(&root).unwrap().nodes().to_vec();
        nodes[1].child = 5;
        nodes[2].child = 3;
        let d = validate(&nodes);
        assert!(d
            .iter()
            .any(|d| matches!(d.kind, DiagnosticKind::NotBreadthFirst { .. })));
    }

    #[test]
    fn leaf_paths_are_identity() {
        let t1 = encode_breadth_first(&LinkedNode::leaf(0)).unwrap();
        assert_eq!(t1.leaf_paths().as_slice(), &[0]);
        let t3 = encode_breadth_first(&three_node()).unwrap();
        assert_eq!(t3.leaf_paths().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn processor_node_map_lists_internal_nodes() {
        let t1 = encode_breadth_first(&LinkedNode::leaf(0)).unwrap();
        assert!(t1.processor_node_map().is_empty());
        let t3 = encode_breadth_first(&three_node()).unwrap();
        assert_eq!(t3.processor_node_map().as_slice(), &[0]);
        let t7 = encode_breadth_first(&complete_depth2()).unwrap();
        assert_eq!(t7.processor_node_map().as_slice(), &[0, 1, 2]);
        assert_eq!(
            t7.stats(),
            TreeStats {
                nodes: 7,
                leaves: 4,
                depth: 2
            }
        );
    }

    #[test]
    fn leaf_successor_is_fixpoint() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        for probe in [f32::MIN, -1.0, 0.0, 0.5, 1.0, f32::MAX] {
            for (i, node) in tree.nodes().iter().enumerate() {
                if node.is_leaf() {
                    assert_eq!(node.successor(&[probe]) as usize, i);
                }
            }
        }
    }

    #[test]
    fn decode_round_trip() {
        let root = complete_depth2();
        let tree = encode_breadth_first(&root).unwrap();
        assert!(tree.decode().is_isomorphic(&root));
        assert_eq!(tree.decode().node_count(), 7);
    }
}
