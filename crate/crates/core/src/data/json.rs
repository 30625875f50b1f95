//! Versioned JSON documents for encoded and linked trees.
//!
//! Encoded form:
//!
//! ```text
//! { "version": 1,
//!   "nodes": [ { "attr": 0, "thr": 0.5,    "child": 1, "class": null },
//!              { "attr": 0, "thr": "-inf", "child": 1, "class": 7 }, ... ] }
//! ```
//!
//! Index 0 is the root. Finite thresholds are written in shortest round-trip
//! form, so save/load is exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{EncodedNode, EncodedTree, LinkedNode};

pub const TREE_SCHEMA_VERSION: u32 = 1;

/// How leaf thresholds are spelled on disk. In memory leaves always hold
/// `+inf`; the loader accepts either spelling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LeafThresholdStyle {
    /// `"-inf"`, the classic "leaves evaluate to themselves" convention.
    #[default]
    NegativeInfinity,
    PositiveInfinity,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    version: u32,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    attr: u32,
    thr: ThresholdDoc,
    child: u32,
    class: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdDoc {
    Number(f32),
    Text(String),
}

impl ThresholdDoc {
    fn from_value(v: f32) -> Self {
        if v.is_finite() {
            ThresholdDoc::Number(v)
        } else if v > 0.0 {
            ThresholdDoc::Text("inf".into())
        } else {
            ThresholdDoc::Text("-inf".into())
        }
    }

    fn value(&self) -> Option<f32> {
        match self {
            ThresholdDoc::Number(v) => Some(*v),
            ThresholdDoc::Text(s) => match s.as_str() {
                "-inf" => Some(f32::NEG_INFINITY),
                "inf" | "+inf" => Some(f32::INFINITY),
                _ => None,
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkedDoc {
    version: u32,
    root: LinkedNode,
}

pub fn save_tree_json<W: Write>(
    tree: &EncodedTree,
    mut sink: W,
    style: LeafThresholdStyle,
) -> Result<()> {
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| {
            let thr = match (n.is_leaf(), style) {
                (true, LeafThresholdStyle::NegativeInfinity) => f32::NEG_INFINITY,
                (true, LeafThresholdStyle::PositiveInfinity) => f32::INFINITY,
                (false, _) => n.threshold,
            };
            NodeDoc {
                attr: n.attribute,
                thr: ThresholdDoc::from_value(thr),
                child: n.child,
                class: n.class,
            }
        })
        .collect();
    let doc = TreeDoc {
        version: TREE_SCHEMA_VERSION,
        nodes,
    };
    serde_json::to_writer_pretty(&mut sink, &doc).map_err(json_io)?;
    writeln!(sink)?;
    sink.flush()?;
    Ok(())
}

pub fn load_tree_json<R: Read>(source: R) -> Result<EncodedTree> {
    let doc: TreeDoc = parse(source)?;
    check_version(doc.version)?;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (i, n) in doc.nodes.iter().enumerate() {
        let thr = n.thr.value().ok_or_else(|| Error::Schema {
            path: format!("nodes[{i}].thr"),
            reason: "threshold must be a number, \"-inf\" or \"inf\"".into(),
        })?;
        nodes.push(match n.class {
            Some(class) => EncodedNode {
                attribute: 0,
                threshold: f32::INFINITY,
                child: n.child,
                class: Some(class),
            },
            None => EncodedNode::split(n.attr, thr, n.child),
        });
    }
    EncodedTree::new(nodes)
}

pub fn save_linked_json<W: Write>(root: &LinkedNode, mut sink: W) -> Result<()> {
    let doc = LinkedDoc {
        version: TREE_SCHEMA_VERSION,
        root: root.clone(),
    };
    serde_json::to_writer_pretty(&mut sink, &doc).map_err(json_io)?;
    writeln!(sink)?;
    sink.flush()?;
    Ok(())
}

pub fn load_linked_json<R: Read>(source: R) -> Result<LinkedNode> {
    let doc: LinkedDoc = parse(source)?;
    check_version(doc.version)?;
    Ok(doc.root)
}

fn parse<T: serde::de::DeserializeOwned, R: Read>(source: R) -> Result<T> {
    // serde_json's default nesting limit (128) caps linked trees at roughly
    // 125 levels, far deeper than any tree worth evaluating this way.
    let mut de = serde_json::Deserializer::from_reader(source);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_io() {
            return Error::Io(inner.into());
        }
        Error::Schema {
            path,
            reason: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Schema {
        path: ".".into(),
        reason: e.to_string(),
    })?;
    Ok(value)
}

fn check_version(version: u32) -> Result<()> {
    if version != TREE_SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "version".into(),
            reason: format!("unsupported version {version}, expected {TREE_SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

fn json_io(e: serde_json::Error) -> Error {
    Error::Io(e.into())
}
