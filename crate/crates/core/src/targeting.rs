//! Daily targeting run: network-structure triggers from the recent
//! hypergraph, learner-reply triggers from replies to the agent, and
//! alternating with/without-agent condition assignment of focal posts.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::forum::{ActionType, ArtifactKind, ForumStore};
use crate::hypergraph::{self, HypergraphError, CLOSENESS_CONVENTION};
use crate::timefmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Network,
    LearnerReply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    WithPca,
    WithoutPca,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::WithPca => "with_pca",
            Condition::WithoutPca => "without_pca",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which condition odd sequence positions receive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityMapping {
    #[default]
    OddWithPca,
    OddWithoutPca,
}

impl ParityMapping {
    pub fn condition_for(self, sequence_index: usize) -> Condition {
        let odd = sequence_index % 2 == 1;
        match (self, odd) {
            (ParityMapping::OddWithPca, true) | (ParityMapping::OddWithoutPca, false) => Condition::WithPca,
            _ => Condition::WithoutPca,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionTarget {
    pub target_id: String,
    pub trigger: Trigger,
    pub root_post_id: String,
    #[serde(with = "timefmt")]
    pub selected_at: DateTime<Utc>,
    pub centrality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAssignment {
    pub post_id: String,
    pub condition: Condition,
    /// 1-based position in the global assignment sequence.
    pub sequence_index: usize,
    #[serde(with = "timefmt")]
    pub posted_at: DateTime<Utc>,
    /// Network centrality of the post when it was first selected, if it was
    /// selected through the network trigger.
    #[serde(default)]
    pub centrality: Option<f64>,
}

/// Persistent post → condition map. A post is assigned exactly once.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConditionRegistry {
    parity: ParityMapping,
    assignments: BTreeMap<String, ConditionAssignment>,
}

/// A focal post offered for assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalPost {
    pub post_id: String,
    pub posted_at: DateTime<Utc>,
    pub centrality: Option<f64>,
}

impl FocalPost {
    pub fn new(post_id: impl Into<String>, posted_at: DateTime<Utc>) -> Self {
        Self { post_id: post_id.into(), posted_at, centrality: None }
    }
}

impl ConditionRegistry {
    pub fn new(parity: ParityMapping) -> Self {
        Self { parity, assignments: BTreeMap::new() }
    }

    pub fn parity(&self) -> ParityMapping {
        self.parity
    }

    pub fn get(&self, post_id: &str) -> Option<&ConditionAssignment> {
        self.assignments.get(post_id)
    }

    pub fn condition_of(&self, post_id: &str) -> Option<Condition> {
        self.get(post_id).map(|a| a.condition)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// All assignments in sequence order.
    pub fn assignments(&self) -> Vec<&ConditionAssignment> {
        let mut all: Vec<_> = self.assignments.values().collect();
        all.sort_by_key(|a| a.sequence_index);
        all
    }

    pub(crate) fn restore(&mut self, assignment: ConditionAssignment) {
        self.assignments.insert(assignment.post_id.clone(), assignment);
    }

    /// Sorts the batch by `(timestamp, post_id)` and labels unassigned posts
    /// alternately, continuing the global sequence. Posts assigned in an
    /// earlier batch keep their original label. Returns the batch's
    /// assignments in sorted order.
    pub fn assign_conditions(&mut self, focal_posts: &[FocalPost]) -> Vec<ConditionAssignment> {
        let mut batch: Vec<&FocalPost> = focal_posts.iter().collect();
        batch.sort_by(|a, b| a.posted_at.cmp(&b.posted_at).then_with(|| a.post_id.cmp(&b.post_id)));
        batch.dedup_by(|a, b| a.post_id == b.post_id);
        let mut out = Vec::with_capacity(batch.len());
        for post in batch {
            if let Some(existing) = self.assignments.get(&post.post_id) {
                out.push(existing.clone());
                continue;
            }
            let sequence_index = self.assignments.len() + 1;
            let assignment = ConditionAssignment {
                post_id: post.post_id.clone(),
                condition: self.parity.condition_for(sequence_index),
                sequence_index,
                posted_at: post.posted_at,
                centrality: post.centrality,
            };
            self.assignments.insert(post.post_id.clone(), assignment.clone());
            out.push(assignment);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetingParams {
    pub window_hours: i64,
    pub fraction: f64,
    pub s: usize,
}

impl Default for TargetingParams {
    fn default() -> Self {
        Self { window_hours: 48, fraction: 0.05, s: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredTarget {
    pub target_id: String,
    pub reason: String,
}

/// Persisted record of one targeting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(with = "timefmt")]
    pub as_of: DateTime<Utc>,
    #[serde(with = "timefmt")]
    pub window_start: DateTime<Utc>,
    #[serde(with = "timefmt")]
    pub window_end: DateTime<Utc>,
    #[serde(with = "timefmt::option")]
    pub previous_run: Option<DateTime<Utc>>,
    pub network_candidates: usize,
    pub learner_reply_candidates: usize,
    pub emitted: usize,
    pub filtered_out: Vec<FilteredTarget>,
    /// Assignments created by this run.
    pub assignment_delta: Vec<ConditionAssignment>,
    pub parity_mapping: ParityMapping,
    pub fraction: f64,
    pub s: usize,
    pub centrality_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingRun {
    pub manifest: RunManifest,
    pub targets: Vec<InterventionTarget>,
}

/// Executes one targeting run as of `as_of`.
///
/// `previous_run` bounds the learner-reply scan from below; `None` scans the
/// whole store. Network targets authored by the agent itself are skipped.
pub fn run_daily_targeting(
    store: &ForumStore,
    registry: &mut ConditionRegistry,
    agent_id: &str,
    previous_run: Option<DateTime<Utc>>,
    as_of: DateTime<Utc>,
    params: &TargetingParams,
) -> Result<TargetingRun, HypergraphError> {
    let window_start = as_of - Duration::hours(params.window_hours);
    let graph = hypergraph::build_hypergraph(store.records(), window_start, as_of);
    let table = hypergraph::s_closeness(&graph, params.s)?;
    let selection = hypergraph::select_top_targets(&table, graph.nodes(), params.fraction)?;

    let mut filtered_out = Vec::new();
    let mut candidates: Vec<InterventionTarget> = Vec::new();

    for reply in store.records().iter().filter(|r| {
        r.action_type == ActionType::Replied
            && r.actor_id != agent_id
            && r.timestamp < as_of
            && previous_run.is_none_or(|prev| r.timestamp >= prev)
    }) {
        if store.addressee(reply) == Some(agent_id) {
            let target_id = reply.reply_id.clone().unwrap_or_default();
            candidates.push(InterventionTarget {
                target_id,
                trigger: Trigger::LearnerReply,
                root_post_id: reply.post_id.clone(),
                selected_at: as_of,
                centrality: None,
            });
        }
    }
    let learner_reply_candidates = candidates.len();

    let mut seen: HashSet<String> = candidates.iter().map(|t| t.target_id.clone()).collect();
    let mut network_candidates = 0;
    for ranked in selection.selected_posts.iter().chain(&selection.selected_comments) {
        network_candidates += 1;
        if store.artifact_author(&ranked.node_id) == Some(agent_id) {
            filtered_out.push(FilteredTarget { target_id: ranked.node_id.clone(), reason: "authored by agent".into() });
            continue;
        }
        if !seen.insert(ranked.node_id.clone()) {
            // learner_reply provenance already holds this target
            continue;
        }
        let root = store.root_post_of(&ranked.node_id).unwrap_or(&ranked.node_id).to_string();
        candidates.push(InterventionTarget {
            target_id: ranked.node_id.clone(),
            trigger: Trigger::Network,
            root_post_id: root,
            selected_at: as_of,
            centrality: Some(ranked.score),
        });
    }

    // Resolve roots, then assign conditions to newly seen focal posts.
    let mut resolvable = Vec::new();
    let mut focal = Vec::new();
    for target in candidates {
        match store.resolve_thread(&target.target_id) {
            Ok(_) => {
                let posted_at = match store.artifact(&target.root_post_id) {
                    Some((ArtifactKind::Post, r)) => r.timestamp,
                    _ => unreachable!("resolve_thread verified the root post"),
                };
                let centrality = if target.target_id == target.root_post_id { target.centrality } else { None };
                focal.push(FocalPost { post_id: target.root_post_id.clone(), posted_at, centrality });
                resolvable.push(target);
            }
            Err(e) => filtered_out.push(FilteredTarget { target_id: target.target_id, reason: e.to_string() }),
        }
    }
    let before = registry.len();
    let batch = registry.assign_conditions(&focal);
    let assignment_delta: Vec<ConditionAssignment> = batch.into_iter().filter(|a| a.sequence_index > before).collect();

    let mut targets = Vec::new();
    for target in resolvable {
        match registry.condition_of(&target.root_post_id) {
            Some(Condition::WithPca) => targets.push(target),
            _ => filtered_out.push(FilteredTarget {
                target_id: target.target_id,
                reason: format!("root post {} is without_pca", target.root_post_id),
            }),
        }
    }
    for f in &filtered_out {
        info!(target_id = %f.target_id, reason = %f.reason, "target filtered");
    }

    let manifest = RunManifest {
        as_of,
        window_start,
        window_end: as_of,
        previous_run,
        network_candidates,
        learner_reply_candidates,
        emitted: targets.len(),
        filtered_out,
        assignment_delta,
        parity_mapping: registry.parity(),
        fraction: params.fraction,
        s: params.s,
        centrality_convention: CLOSENESS_CONVENTION.to_string(),
    };
    Ok(TargetingRun { manifest, targets })
}
