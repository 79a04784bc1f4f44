use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CentralityTable, HypergraphError, HypergraphNode, NodeType};
use crate::timefmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTarget {
    pub node_id: String,
    pub score: f64,
    #[serde(with = "timefmt::option", default)]
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSelection {
    pub selected_posts: Vec<RankedTarget>,
    pub selected_comments: Vec<RankedTarget>,
    pub fraction: f64,
}

/// `ceil(fraction * count)`, tolerant of binary rounding (0.07 * 100 must
/// give 7, not 8).
pub fn top_count(fraction: f64, count: usize) -> usize {
    if count == 0 {
        return 0;
    }
    let raw = fraction * count as f64;
    let k = (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize;
    k.min(count)
}

/// Ranks P and C nodes separately by score (descending), breaking ties by
/// newer `created_at` first and then node id, and keeps the top
/// `ceil(fraction * count)` of each type.
pub fn select_top_targets(
    table: &CentralityTable,
    nodes: &[HypergraphNode],
    fraction: f64,
) -> Result<TargetSelection, HypergraphError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(HypergraphError::InvalidFraction(fraction));
    }
    let rank = |ty: NodeType| {
        let mut ranked: Vec<RankedTarget> = nodes
            .iter()
            .filter(|n| n.node_type == ty)
            .map(|n| RankedTarget {
                node_id: n.node_id.clone(),
                score: table.score(&n.key()).unwrap_or(0.0),
                created_at: n.created_at,
            })
            .collect();
        ranked.sort_by(rank_order);
        let k = top_count(fraction, ranked.len());
        ranked.truncate(k);
        ranked
    };
    Ok(TargetSelection { selected_posts: rank(NodeType::P), selected_comments: rank(NodeType::C), fraction })
}

fn rank_order(a: &RankedTarget, b: &RankedTarget) -> Ordering {
    b.score
        .total_cmp(&a.score)
        // Some(newer) first; unknown creation times sort last.
        .then_with(|| b.created_at.cmp(&a.created_at))
        .then_with(|| a.node_id.cmp(&b.node_id))
}
