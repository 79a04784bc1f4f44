//! Inferential battery: normality gate, paired and independent tests with
//! directional tails, effect sizes, BH adjustment, balance diagnostics and
//! the within-user-week permutation analysis.

mod balance;
mod normality;
mod parametric;
mod permutation;
mod rank;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use balance::{balance_check, BalancePost, BalanceRow, BalanceTable};
pub use normality::{shapiro_wilk, ShapiroWilk};
pub use parametric::paired_t;
pub use permutation::{permutation_sensitivity, PermutationObservation, PermutationResult};
pub use rank::{
    exact_mann_whitney_p, exact_wilcoxon_p, mann_whitney_u, mann_whitney_u_with, normal_mann_whitney_p,
    normal_wilcoxon_p, wilcoxon_signed_rank, wilcoxon_signed_rank_with, PMethod, ZeroMethod, EXACT_MAX_N,
};
pub use report::{
    run_goal1, run_goal2, Goal1Row, Goal2Row, GoalOptions, GoalReport, GroupedMeans, IndexOutcome, PairedMeans,
    ReportRow,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample size {got} outside supported range ({needed})")]
    SampleSize { got: usize, needed: &'static str },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("validation error: {0}")]
    Validation(String),
}

/// Direction of the alternative hypothesis. For two-sample tests,
/// `OneTailedGreater` means the first sample tends to be larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    OneTailedGreater,
    OneTailedLess,
    TwoTailed,
}

impl Tail {
    pub fn flipped(self) -> Tail {
        match self {
            Tail::OneTailedGreater => Tail::OneTailedLess,
            Tail::OneTailedLess => Tail::OneTailedGreater,
            Tail::TwoTailed => Tail::TwoTailed,
        }
    }

    /// Combines the two one-sided p-values for this tail.
    pub(crate) fn pick(self, p_greater: f64, p_less: f64) -> f64 {
        let p = match self {
            Tail::OneTailedGreater => p_greater,
            Tail::OneTailedLess => p_less,
            Tail::TwoTailed => 2.0 * p_greater.min(p_less),
        };
        p.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    CohenD,
    RankR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub kind: EffectKind,
    pub value: f64,
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            EffectKind::CohenD => "d",
            EffectKind::RankR => "r",
        };
        write!(f, "{label}={:.3}", self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
    Wilcoxon,
    MannWhitney,
}

impl TestKind {
    pub fn label(self) -> &'static str {
        match self {
            TestKind::PairedT => "paired t",
            TestKind::Wilcoxon => "Wilcoxon",
            TestKind::MannWhitney => "Mann-Whitney U",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub z_value: Option<f64>,
    pub p_value: f64,
    pub p_method: PMethod,
    pub tail: Tail,
    pub effect_size: EffectSize,
    pub n_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedPValues {
    pub raw: Vec<f64>,
    pub adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<AdjustedPValues, StatsError> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::Argument(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (rank0, &i) in order.iter().enumerate().rev() {
        let candidate = (p_values[i] * (m as f64 / (rank0 + 1) as f64)).min(1.0);
        running = running.min(candidate);
        adjusted[i] = running;
    }
    Ok(AdjustedPValues { raw: p_values.to_vec(), adjusted })
}

pub(crate) fn std_normal() -> Normal {
    Normal::standard()
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    std_normal().sf(z)
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median with the midpoint rule for even lengths. `None` when empty.
pub(crate) fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Linear-interpolation quantile on sorted data (the `(n - 1) q` rule).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
