use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Hypergraph, HypergraphError, NodeKey};

/// Normalization recorded alongside every centrality table.
pub const CLOSENESS_CONVENTION: &str =
    "component-restricted closeness (|C|-1)/sum(d); isolated nodes score 0; no component-size scaling";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityTable {
    pub s: usize,
    pub convention: String,
    #[serde(with = "score_list")]
    pub scores: BTreeMap<NodeKey, f64>,
}

mod score_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::hypergraph::{NodeKey, NodeType};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        node_id: String,
        node_type: NodeType,
        score: f64,
    }

    pub fn serialize<S: Serializer>(scores: &BTreeMap<NodeKey, f64>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = scores
            .iter()
            .map(|(k, &score)| Entry { node_id: k.node_id.clone(), node_type: k.node_type, score })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodeKey, f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (NodeKey::new(e.node_type, e.node_id), e.score)).collect())
    }
}

impl CentralityTable {
    pub fn score(&self, key: &NodeKey) -> Option<f64> {
        self.scores.get(key).copied()
    }
}

/// Closeness on the s-adjacency graph: two nodes are adjacent when they
/// co-occur in at least `s` hyperedges. Scores are restricted to the node's
/// connected component.
pub fn s_closeness(h: &Hypergraph, s: usize) -> Result<CentralityTable, HypergraphError> {
    if s == 0 {
        return Err(HypergraphError::InvalidLevel(s));
    }
    let n = h.nodes().len();
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for edge in h.hyperedges() {
        for (i, &a) in edge.members.iter().enumerate() {
            for &b in &edge.members[i + 1..] {
                *shared.entry((a, b)).or_default() += 1;
            }
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    for (&(a, b), &count) in &shared {
        if count >= s {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    // Sorted neighbor lists keep traversal order independent of hash order.
    for list in &mut adjacency {
        list.sort_unstable();
    }

    let mut scores = BTreeMap::new();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for source in 0..n {
        dist.fill(usize::MAX);
        dist[source] = 0;
        queue.clear();
        queue.push_back(source);
        let (mut reached, mut total) = (0usize, 0usize);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    reached += 1;
                    total += dist[w];
                    queue.push_back(w);
                }
            }
        }
        let score = if reached == 0 { 0.0 } else { reached as f64 / total as f64 };
        scores.insert(h.nodes()[source].key(), score);
    }
    Ok(CentralityTable { s, convention: CLOSENESS_CONVENTION.to_string(), scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::NodeType;

    fn graph(edges: &[&[&str]]) -> Hypergraph {
        Hypergraph::from_edges(
            edges
                .iter()
                .enumerate()
                .map(|(i, e)| (format!("e{i}"), e.iter().map(|id| NodeKey::new(NodeType::U, *id)).collect::<Vec<_>>())),
        )
    }

    fn score(t: &CentralityTable, id: &str) -> f64 {
        t.score(&NodeKey::new(NodeType::U, id)).unwrap()
    }

    #[test]
    fn path_of_two_edges() {
        let t = s_closeness(&graph(&[&["a", "b"], &["b", "c"]]), 1).unwrap();
        assert_eq!(score(&t, "b"), 1.0);
        assert_eq!(score(&t, "a"), 2.0 / 3.0);
        assert_eq!(score(&t, "c"), 2.0 / 3.0);
    }

    #[test]
    fn disjoint_components_score_within_component() {
        let t = s_closeness(&graph(&[&["a", "b"], &["c", "d"]]), 1).unwrap();
        for id in ["a", "b", "c", "d"] {
            assert_eq!(score(&t, id), 1.0);
        }
    }

    #[test]
    fn node_without_s_shared_pair_scores_zero() {
        // a-b share two edges, c shares only one with b.
        let t = s_closeness(&graph(&[&["a", "b"], &["a", "b", "c"]]), 2).unwrap();
        assert_eq!(score(&t, "c"), 0.0);
        assert_eq!(score(&t, "a"), 1.0);
    }

    #[test]
    fn zero_level_is_rejected() {
        assert_eq!(s_closeness(&graph(&[&["a", "b"]]), 0), Err(HypergraphError::InvalidLevel(0)));
    }
}
