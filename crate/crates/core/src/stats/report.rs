use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{
    bh_adjust, mann_whitney_u, mean, median, paired_t, shapiro_wilk, wilcoxon_signed_rank_with, ShapiroWilk,
    StatsError, Tail, TestResult, ZeroMethod,
};
use crate::presence::{IndexName, Mode, PresenceIndexVector};

/// One learner's condition means for the within-subjects comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMeans {
    pub learner_id: String,
    pub without: PresenceIndexVector,
    pub with: PresenceIndexVector,
    #[serde(default)]
    pub subgroup: Option<String>,
}

/// One learner's with-condition means and interaction-mode label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedMeans {
    pub learner_id: String,
    pub mode: Mode,
    pub indices: PresenceIndexVector,
    #[serde(default)]
    pub subgroup: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalOptions {
    /// Shapiro-Wilk gate: diffs with p at or above this are treated as normal.
    pub alpha: f64,
    pub zero_method: ZeroMethod,
    /// Also report each subgroup separately, with BH applied within it.
    pub by_subgroup: bool,
}

impl Default for GoalOptions {
    fn default() -> Self {
        Self { alpha: 0.05, zero_method: ZeroMethod::Wilcox, by_subgroup: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IndexOutcome {
    Tested { result: TestResult, normality: Option<ShapiroWilk>, p_bh: f64 },
    Failed { error: String },
}

impl IndexOutcome {
    pub fn result(&self) -> Option<&TestResult> {
        match self {
            IndexOutcome::Tested { result, .. } => Some(result),
            IndexOutcome::Failed { .. } => None,
        }
    }

    pub fn p_bh(&self) -> Option<f64> {
        match self {
            IndexOutcome::Tested { p_bh, .. } => Some(*p_bh),
            IndexOutcome::Failed { .. } => None,
        }
    }

    fn cells(&self) -> [String; 3] {
        match self {
            IndexOutcome::Tested { result, p_bh, .. } => {
                [result.effect_size.to_string(), format!("{:.4}", result.p_value), format!("{p_bh:.4}")]
            }
            IndexOutcome::Failed { error } => [format!("error: {error}"), "NA".into(), "NA".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal1Row {
    pub indicator: IndexName,
    pub subgroup: Option<String>,
    pub n_learners: usize,
    pub m_without: Option<f64>,
    pub m_with: Option<f64>,
    pub delta_m: Option<f64>,
    pub outcome: IndexOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal2Row {
    pub indicator: IndexName,
    pub subgroup: Option<String>,
    pub n_direct: usize,
    pub n_co: usize,
    pub m_co: Option<f64>,
    pub m_direct: Option<f64>,
    pub mdn_co: Option<f64>,
    pub mdn_direct: Option<f64>,
    pub delta_m: Option<f64>,
    pub outcome: IndexOutcome,
}

/// A row that knows its delimited-text rendering.
pub trait ReportRow {
    const HEADER: &'static [&'static str];
    fn subgroup(&self) -> Option<&str>;
    fn cells(&self) -> Vec<String>;
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.3}"))
}

impl ReportRow for Goal1Row {
    const HEADER: &'static [&'static str] =
        &["Indicator", "M_without", "M_with", "Delta_M", "Test", "Effect_Size", "p", "p_BH"];

    fn subgroup(&self) -> Option<&str> {
        self.subgroup.as_deref()
    }

    fn cells(&self) -> Vec<String> {
        let test = self.outcome.result().map_or("NA", |r| r.test.label()).to_string();
        let [effect, p, p_bh] = self.outcome.cells();
        vec![
            self.indicator.as_str().into(),
            num(self.m_without),
            num(self.m_with),
            num(self.delta_m),
            test,
            effect,
            p,
            p_bh,
        ]
    }
}

impl ReportRow for Goal2Row {
    const HEADER: &'static [&'static str] =
        &["Indicator", "M_co", "M_direct", "Mdn_co", "Mdn_direct", "Delta_M", "Effect_Size", "p", "p_BH"];

    fn subgroup(&self) -> Option<&str> {
        self.subgroup.as_deref()
    }

    fn cells(&self) -> Vec<String> {
        let [effect, p, p_bh] = self.outcome.cells();
        vec![
            self.indicator.as_str().into(),
            num(self.m_co),
            num(self.m_direct),
            num(self.mdn_co),
            num(self.mdn_direct),
            num(self.delta_m),
            effect,
            p,
            p_bh,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalReport<R> {
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<R>,
}

impl<R: ReportRow> GoalReport<R> {
    /// Tab-separated table; a leading `Subgroup` column appears only when
    /// subgroup blocks are present.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let with_subgroup = self.rows.iter().any(|r| r.subgroup().is_some());
        let mut header: Vec<&str> = R::HEADER.to_vec();
        if with_subgroup {
            header.insert(0, "Subgroup");
        }
        writeln!(out, "{}", header.join("\t"))?;
        for row in &self.rows {
            let mut cells = row.cells();
            if with_subgroup {
                cells.insert(0, row.subgroup().unwrap_or("all").to_string());
            }
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }

    pub fn to_tsv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is UTF-8")
    }
}

fn opt_mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| mean(xs))
}

/// Fills `p_bh` across the rows that produced a p-value.
fn adjust_block(outcomes: &mut [IndexOutcome]) -> Result<(), StatsError> {
    let raw: Vec<f64> = outcomes.iter().filter_map(|o| o.result().map(|r| r.p_value)).collect();
    let adjusted = bh_adjust(&raw)?.adjusted;
    let mut it = adjusted.into_iter();
    for o in outcomes {
        if let IndexOutcome::Tested { p_bh, .. } = o {
            *p_bh = it.next().expect("one adjusted value per tested row");
        }
    }
    Ok(())
}

fn goal1_index(diffs: &[f64], opts: &GoalOptions) -> IndexOutcome {
    let tail = Tail::OneTailedGreater;
    let tested = |result: Result<TestResult, StatsError>, normality| match result {
        Ok(result) => IndexOutcome::Tested { result, normality, p_bh: f64::NAN },
        Err(e) => IndexOutcome::Failed { error: e.to_string() },
    };
    match shapiro_wilk(diffs) {
        Ok(sw) if sw.p_value >= opts.alpha => tested(paired_t(diffs, tail), Some(sw)),
        Ok(sw) => tested(wilcoxon_signed_rank_with(diffs, tail, opts.zero_method, None), Some(sw)),
        // Constant nonzero diffs cannot be gated; the rank test still applies.
        Err(StatsError::Degenerate(_)) => tested(wilcoxon_signed_rank_with(diffs, tail, opts.zero_method, None), None),
        Err(e) => IndexOutcome::Failed { error: e.to_string() },
    }
}

fn goal1_block(
    rows: &[&PairedMeans],
    subgroup: Option<String>,
    opts: &GoalOptions,
) -> Result<Vec<Goal1Row>, StatsError> {
    let mut out: Vec<Goal1Row> = IndexName::ALL
        .iter()
        .map(|&ix| {
            let without: Vec<f64> = rows.iter().map(|r| r.without.get(ix)).collect();
            let with: Vec<f64> = rows.iter().map(|r| r.with.get(ix)).collect();
            let diffs: Vec<f64> = with.iter().zip(&without).map(|(w, o)| w - o).collect();
            let (m_without, m_with) = (opt_mean(&without), opt_mean(&with));
            Goal1Row {
                indicator: ix,
                subgroup: subgroup.clone(),
                n_learners: rows.len(),
                m_without,
                m_with,
                delta_m: m_with.zip(m_without).map(|(a, b)| a - b),
                outcome: goal1_index(&diffs, opts),
            }
        })
        .collect();
    let mut outcomes: Vec<IndexOutcome> = out.iter().map(|r| r.outcome.clone()).collect();
    adjust_block(&mut outcomes)?;
    for (row, o) in out.iter_mut().zip(outcomes) {
        row.outcome = o;
    }
    Ok(out)
}

fn subgroups<T>(rows: &[T], label: impl Fn(&T) -> Option<&str>) -> BTreeMap<String, Vec<&T>> {
    let mut groups: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for r in rows {
        if let Some(g) = label(r) {
            groups.entry(g.to_string()).or_default().push(r);
        }
    }
    groups
}

fn base_metadata(goal: &str, opts: &GoalOptions) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("goal".into(), goal.into());
    m.insert("tail".into(), "one_tailed_greater".into());
    m.insert("bh_scope".into(), "nine indices within each block".into());
    m.insert("exact_max_n".into(), super::EXACT_MAX_N.to_string());
    m.insert("normality_alpha".into(), opts.alpha.to_string());
    m.insert("zero_method".into(), format!("{:?}", opts.zero_method).to_lowercase());
    m
}

/// Within-subjects comparison of with- versus without-condition means.
pub fn run_goal1(rows: &[PairedMeans], opts: &GoalOptions) -> Result<GoalReport<Goal1Row>, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Validation("goal 1 needs at least one paired learner".into()));
    }
    let mut metadata = base_metadata("goal1_paired", opts);
    metadata.insert("n_learners".into(), rows.len().to_string());
    metadata.insert("wilcoxon_effect_n".into(), "nonzero differences".into());
    let all: Vec<&PairedMeans> = rows.iter().collect();
    let mut out = goal1_block(&all, None, opts)?;
    if opts.by_subgroup {
        for (label, members) in subgroups(rows, |r| r.subgroup.as_deref()) {
            out.extend(goal1_block(&members, Some(label), opts)?);
        }
    }
    Ok(GoalReport { metadata, rows: out })
}

fn goal2_block(rows: &[&GroupedMeans], subgroup: Option<String>) -> Result<Vec<Goal2Row>, StatsError> {
    let mut out: Vec<Goal2Row> = IndexName::ALL
        .iter()
        .map(|&ix| {
            let pick =
                |mode: Mode| rows.iter().filter(|r| r.mode == mode).map(|r| r.indices.get(ix)).collect::<Vec<f64>>();
            let (direct, co) = (pick(Mode::Direct), pick(Mode::CoPresence));
            let (m_direct, m_co) = (opt_mean(&direct), opt_mean(&co));
            let outcome = match mann_whitney_u(&direct, &co, Tail::OneTailedGreater) {
                Ok(result) => IndexOutcome::Tested { result, normality: None, p_bh: f64::NAN },
                Err(e) => IndexOutcome::Failed { error: e.to_string() },
            };
            Goal2Row {
                indicator: ix,
                subgroup: subgroup.clone(),
                n_direct: direct.len(),
                n_co: co.len(),
                m_co,
                m_direct,
                mdn_co: median(&co),
                mdn_direct: median(&direct),
                delta_m: m_direct.zip(m_co).map(|(a, b)| a - b),
                outcome,
            }
        })
        .collect();
    let mut outcomes: Vec<IndexOutcome> = out.iter().map(|r| r.outcome.clone()).collect();
    adjust_block(&mut outcomes)?;
    for (row, o) in out.iter_mut().zip(outcomes) {
        row.outcome = o;
    }
    Ok(out)
}

/// Independent comparison of direct-interaction against co-presence learners.
pub fn run_goal2(rows: &[GroupedMeans], opts: &GoalOptions) -> Result<GoalReport<Goal2Row>, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Validation("goal 2 needs learners with mode labels".into()));
    }
    let mut metadata = base_metadata("goal2_independent", opts);
    let count = |m: Mode| rows.iter().filter(|r| r.mode == m).count();
    metadata.insert("n_direct".into(), count(Mode::Direct).to_string());
    metadata.insert("n_co".into(), count(Mode::CoPresence).to_string());
    metadata.insert("mann_whitney_effect_n".into(), "n_direct + n_co".into());
    let all: Vec<&GroupedMeans> = rows.iter().collect();
    let mut out = goal2_block(&all, None)?;
    if opts.by_subgroup {
        for (label, members) in subgroups(rows, |r| r.subgroup.as_deref()) {
            out.extend(goal2_block(&members, Some(label))?);
        }
    }
    Ok(GoalReport { metadata, rows: out })
}
