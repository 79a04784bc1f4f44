use std::io::{self, Write};

use chrono::{DateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{mean, median, StatsError};
use crate::targeting::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePost {
    pub post_id: String,
    pub condition: Condition,
    #[serde(with = "crate::timefmt")]
    pub timestamp: DateTime<Utc>,
    /// Focal-post centrality; missing when the post was never scored.
    pub centrality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub metric: String,
    pub value_without: Option<f64>,
    pub value_with: Option<f64>,
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub n_without: usize,
    pub n_with: usize,
    pub rows: Vec<BalanceRow>,
}

impl BalanceTable {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "Metric\tWithout_PCA\tWith_PCA\tDiff_with_minus_without")?;
        let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            writeln!(out, "{}\t{}\t{}\t{}", r.metric, cell(r.value_without), cell(r.value_with), cell(r.difference))?;
        }
        Ok(())
    }
}

fn row(metric: &str, without: Option<f64>, with: Option<f64>) -> BalanceRow {
    let difference = match (without, with) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    BalanceRow { metric: metric.to_string(), value_without: without, value_with: with, difference }
}

/// Post-level comparability of the two conditions. Posting hour is taken in
/// UTC, which is how timestamps are stored.
pub fn balance_check(posts: &[BalancePost]) -> Result<BalanceTable, StatsError> {
    let split = |c: Condition| posts.iter().filter(move |p| p.condition == c);
    let (with, without): (Vec<_>, Vec<_>) =
        (split(Condition::WithPca).collect(), split(Condition::WithoutPca).collect());
    if with.is_empty() || without.is_empty() {
        return Err(StatsError::Analysis("balance check needs posts from both conditions".into()));
    }
    let hours = |ps: &[&BalancePost]| mean(&ps.iter().map(|p| f64::from(p.timestamp.hour())).collect::<Vec<_>>());
    let centralities = |ps: &[&BalancePost]| ps.iter().filter_map(|p| p.centrality).collect::<Vec<f64>>();
    let (cw, co) = (centralities(&with), centralities(&without));
    let opt_mean = |xs: &[f64]| (!xs.is_empty()).then(|| mean(xs));
    Ok(BalanceTable {
        n_without: without.len(),
        n_with: with.len(),
        rows: vec![
            row("mean_posting_hour", Some(hours(&without)), Some(hours(&with))),
            row("mean_centrality", opt_mean(&co), opt_mean(&cw)),
            row("median_centrality", median(&co), median(&cw)),
        ],
    })
}
