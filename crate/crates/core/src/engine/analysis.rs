use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::config::StatsConfig;
use crate::presence::{
    learner_level_means, write_learner_means_tsv, IndexName, InteractionMode, LearnerMean, PresenceIndexVector,
};
use crate::stats::{
    balance_check, permutation_sensitivity, run_goal1, run_goal2, BalancePost, BalanceTable, Goal1Row, Goal2Row,
    GoalOptions, GoalReport, GroupedMeans, PairedMeans, PermutationObservation, PermutationResult, StatsError,
};
use crate::targeting::Condition;

/// One coded learner record inside a focal thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record_id: String,
    pub learner_id: String,
    pub condition: Condition,
    #[serde(with = "crate::timefmt")]
    pub timestamp: DateTime<Utc>,
    pub indices: PresenceIndexVector,
}

/// Owned inputs for every analysis, detached from the engine so the
/// computations can run without holding the engine lock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisData {
    pub records: Vec<ScoredRecord>,
    pub modes: Vec<InteractionMode>,
    pub focal_posts: Vec<BalancePost>,
    pub stats: StatsConfig,
}

pub fn iso_week_label(ts: &DateTime<Utc>) -> String {
    let w = ts.iso_week();
    format!("{}-W{:02}", w.year(), w.week())
}

impl AnalysisData {
    pub fn goal_options(&self) -> GoalOptions {
        GoalOptions { alpha: self.stats.alpha, zero_method: self.stats.zero_method, by_subgroup: false }
    }

    pub fn learner_means(&self) -> BTreeMap<(String, Condition), LearnerMean> {
        learner_level_means(self.records.iter().map(|r| (r.learner_id.as_str(), r.condition, &r.indices)))
    }

    /// Learners observed under both conditions.
    pub fn paired_means(&self) -> Vec<PairedMeans> {
        let means = self.learner_means();
        let mut out = Vec::new();
        for ((learner, condition), with) in &means {
            if *condition != Condition::WithPca {
                continue;
            }
            if let Some(without) = means.get(&(learner.clone(), Condition::WithoutPca)) {
                out.push(PairedMeans {
                    learner_id: learner.clone(),
                    without: without.indices,
                    with: with.indices,
                    subgroup: None,
                });
            }
        }
        out
    }

    /// With-condition means of learners carrying an interaction-mode label.
    pub fn grouped_means(&self) -> Vec<GroupedMeans> {
        let means = self.learner_means();
        self.modes
            .iter()
            .filter_map(|m| {
                means.get(&(m.learner_id.clone(), Condition::WithPca)).map(|lm| GroupedMeans {
                    learner_id: m.learner_id.clone(),
                    mode: m.mode,
                    indices: lm.indices,
                    subgroup: None,
                })
            })
            .collect()
    }

    pub fn goal1(&self) -> Result<GoalReport<Goal1Row>, StatsError> {
        run_goal1(&self.paired_means(), &self.goal_options())
    }

    pub fn goal2(&self) -> Result<GoalReport<Goal2Row>, StatsError> {
        run_goal2(&self.grouped_means(), &self.goal_options())
    }

    /// Permutation sensitivity for every index, in report row order.
    pub fn permutation(&self) -> Result<Vec<PermutationResult>, StatsError> {
        IndexName::ALL
            .iter()
            .map(|&ix| {
                let obs: Vec<PermutationObservation> = self
                    .records
                    .iter()
                    .map(|r| PermutationObservation {
                        learner_id: r.learner_id.clone(),
                        iso_week: iso_week_label(&r.timestamp),
                        condition: r.condition,
                        value: r.indices.get(ix),
                    })
                    .collect();
                permutation_sensitivity(ix.as_str(), &obs, self.stats.permutation_n, self.stats.permutation_seed)
            })
            .collect()
    }

    pub fn balance(&self) -> Result<BalanceTable, StatsError> {
        balance_check(&self.focal_posts)
    }

    /// Learner means table with `group` set to the condition.
    pub fn write_means_tsv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let means = self.learner_means();
        write_learner_means_tsv(
            means.values().map(|m| (m.learner_id.as_str(), m.condition.as_str(), m.n_records, &m.indices)),
            out,
        )
    }
}
