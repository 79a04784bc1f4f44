//! Interaction hypergraph over users (U), posts (P) and comments/replies (C),
//! s-closeness centrality, and top-fraction target selection.

mod centrality;
mod select;

use std::collections::HashMap;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forum::{ActionRecord, ActionType};
use crate::timefmt;

pub use centrality::{s_closeness, CentralityTable, CLOSENESS_CONVENTION};
pub use select::{select_top_targets, top_count, RankedTarget, TargetSelection};

#[derive(Debug, Error, PartialEq)]
pub enum HypergraphError {
    #[error("adjacency level s must be >= 1, got {0}")]
    InvalidLevel(usize),
    #[error("selection fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeType {
    U,
    P,
    C,
}

/// Node identity. Users, posts and comments live in separate namespaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub node_type: NodeType,
    pub node_id: String,
}

impl NodeKey {
    pub fn new(node_type: NodeType, node_id: impl Into<String>) -> Self {
        Self { node_type, node_id: node_id.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergraphNode {
    pub node_id: String,
    pub node_type: NodeType,
    #[serde(with = "timefmt::option", default)]
    pub created_at: Option<DateTime<Utc>>,
}

impl HypergraphNode {
    pub fn key(&self) -> NodeKey {
        NodeKey::new(self.node_type, self.node_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub record_id: String,
    /// Indices into [`Hypergraph::nodes`], sorted and distinct.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Hypergraph {
    nodes: Vec<HypergraphNode>,
    index: HashMap<NodeKey, usize>,
    hyperedges: Vec<Hyperedge>,
}

impl Hypergraph {
    pub fn nodes(&self) -> &[HypergraphNode] {
        &self.nodes
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn node_index(&self, key: &NodeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperedges.is_empty()
    }

    /// Member keys of one hyperedge.
    pub fn edge_keys(&self, edge: &Hyperedge) -> Vec<NodeKey> {
        edge.members.iter().map(|&i| self.nodes[i].key()).collect()
    }

    /// Builds a hypergraph from explicit node-key sets, one hyperedge per set.
    pub fn from_edges<I, E>(edges: I) -> Self
    where
        I: IntoIterator<Item = (String, E)>,
        E: IntoIterator<Item = NodeKey>,
    {
        let mut graph = Hypergraph::default();
        for (record_id, members) in edges {
            let members: Vec<NodeKey> = members.into_iter().collect();
            graph.push_edge(record_id, members);
        }
        graph
    }

    fn intern(&mut self, key: NodeKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(HypergraphNode { node_id: key.node_id.clone(), node_type: key.node_type, created_at: None });
        self.index.insert(key, i);
        i
    }

    fn push_edge(&mut self, record_id: String, members: Vec<NodeKey>) {
        let mut idx: Vec<usize> = members.into_iter().map(|k| self.intern(k)).collect();
        idx.sort_unstable();
        idx.dedup();
        self.hyperedges.push(Hyperedge { record_id, members: idx });
    }

    /// Writes one `{node_id, node_type, score}` object per line.
    pub fn export_scores<W: Write>(&self, table: &CentralityTable, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            node_id: &'a str,
            node_type: NodeType,
            score: f64,
        }
        for node in &self.nodes {
            let score = table.score(&node.key()).unwrap_or(0.0);
            let line = Line { node_id: &node.node_id, node_type: node.node_type, score };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Members of the hyperedge for one record. Coincident roles (actor equal to
/// an author) collapse because members form a set.
pub fn hyperedge_members(record: &ActionRecord) -> Vec<NodeKey> {
    let mut members = vec![
        NodeKey::new(NodeType::U, record.actor_id.clone()),
        NodeKey::new(NodeType::P, record.post_id.clone()),
        NodeKey::new(NodeType::U, record.post_author_id.clone()),
    ];
    if record.action_type.has_comment() {
        if let (Some(c), Some(a)) = (&record.comment_id, &record.comment_author_id) {
            members.push(NodeKey::new(NodeType::C, c.clone()));
            members.push(NodeKey::new(NodeType::U, a.clone()));
        }
    }
    if record.action_type.has_reply() {
        if let (Some(r), Some(a)) = (&record.reply_id, &record.reply_author_id) {
            members.push(NodeKey::new(NodeType::C, r.clone()));
            members.push(NodeKey::new(NodeType::U, a.clone()));
        }
    }
    members.sort();
    members.dedup();
    members
}

/// Builds the hypergraph from records whose timestamp falls in the half-open
/// window `[start, end)`. Creation times of P/C nodes are taken from the
/// creating record anywhere in `records`, inside the window or not.
pub fn build_hypergraph(records: &[ActionRecord], start: DateTime<Utc>, end: DateTime<Utc>) -> Hypergraph {
    let mut graph = Hypergraph::default();
    for record in records.iter().filter(|r| r.timestamp >= start && r.timestamp < end) {
        graph.push_edge(record.record_id.clone(), hyperedge_members(record));
    }
    if graph.nodes.is_empty() {
        return graph;
    }
    for record in records {
        let created = match record.action_type {
            ActionType::Posted => Some(NodeKey::new(NodeType::P, record.post_id.clone())),
            ActionType::Commented => record.comment_id.clone().map(|c| NodeKey::new(NodeType::C, c)),
            ActionType::Replied => record.reply_id.clone().map(|r| NodeKey::new(NodeType::C, r)),
            _ => None,
        };
        if let Some(i) = created.and_then(|k| graph.index.get(&k).copied()) {
            graph.nodes[i].created_at.get_or_insert(record.timestamp);
        }
    }
    graph
}
