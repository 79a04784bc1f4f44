//! Social and cognitive presence coding: the indicator vocabulary, record
//! scoring, index aggregation, learner-level means, interaction modes,
//! inter-coder agreement and model-assisted coding.

mod coding;
mod kappa;
mod modes;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::targeting::Condition;

pub use coding::{
    llm_code_records, parse_coding_output, CodingOutcome, CodingParams, CodingParseError, CodingRejection,
    CodingScheme, SchemeEntry,
};
pub use kappa::{cohens_kappa, cohens_kappa_binary, kappa_by_indicator, parse_gold_codes, GoldCode, Kappa};
pub use modes::{classify_interaction_modes, pca_thread_ids, InteractionMode, Mode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PresenceError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("coders cover different record sets ({only_a} only in first, {only_b} only in second)")]
    RecordSetMismatch { only_a: usize, only_b: usize },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Indicator {
    AF1,
    AF2,
    OC1,
    OC2,
    NC1,
    NC2,
    PT1,
    PT2,
    EX1,
    EX2,
    IN1,
    IN2,
    RC1,
    RC2,
}

impl Indicator {
    pub const ALL: [Indicator; 14] = [
        Indicator::AF1,
        Indicator::AF2,
        Indicator::OC1,
        Indicator::OC2,
        Indicator::NC1,
        Indicator::NC2,
        Indicator::PT1,
        Indicator::PT2,
        Indicator::EX1,
        Indicator::EX2,
        Indicator::IN1,
        Indicator::IN2,
        Indicator::RC1,
        Indicator::RC2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        const CODES: [&str; 14] =
            ["AF1", "AF2", "OC1", "OC2", "NC1", "NC2", "PT1", "PT2", "EX1", "EX2", "IN1", "IN2", "RC1", "RC2"];
        CODES[self.index()]
    }

    pub fn category(self) -> Category {
        Category::ALL[self.index() / 2]
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Indicator {
    type Err = PresenceError;

    /// Accepts `AF1` and the hyphenated `AF-1`, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.trim().chars().filter(|c| *c != '-').collect::<String>().to_ascii_uppercase();
        Indicator::ALL
            .into_iter()
            .find(|i| i.code() == norm)
            .ok_or_else(|| PresenceError::Validation(format!("unknown indicator code: {}", s.trim())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    AF,
    OC,
    NC,
    PT,
    EX,
    IN,
    RC,
}

impl Category {
    pub const ALL: [Category; 7] =
        [Category::AF, Category::OC, Category::NC, Category::PT, Category::EX, Category::IN, Category::RC];

    pub fn is_social(self) -> bool {
        matches!(self, Category::AF | Category::OC | Category::NC)
    }

    pub fn indicators(self) -> [Indicator; 2] {
        let i = self as usize * 2;
        [Indicator::ALL[i], Indicator::ALL[i + 1]]
    }
}

/// The nine reported indices, in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IndexName {
    #[serde(rename = "SP_AF")]
    SpAf,
    #[serde(rename = "SP_OC")]
    SpOc,
    #[serde(rename = "SP_NC")]
    SpNc,
    #[serde(rename = "SP_total")]
    SpTotal,
    #[serde(rename = "CP_PT")]
    CpPt,
    #[serde(rename = "CP_EX")]
    CpEx,
    #[serde(rename = "CP_IN")]
    CpIn,
    #[serde(rename = "CP_RC")]
    CpRc,
    #[serde(rename = "CP_total")]
    CpTotal,
}

impl IndexName {
    pub const ALL: [IndexName; 9] = [
        IndexName::SpAf,
        IndexName::SpOc,
        IndexName::SpNc,
        IndexName::SpTotal,
        IndexName::CpPt,
        IndexName::CpEx,
        IndexName::CpIn,
        IndexName::CpRc,
        IndexName::CpTotal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexName::SpAf => "SP_AF",
            IndexName::SpOc => "SP_OC",
            IndexName::SpNc => "SP_NC",
            IndexName::SpTotal => "SP_total",
            IndexName::CpPt => "CP_PT",
            IndexName::CpEx => "CP_EX",
            IndexName::CpIn => "CP_IN",
            IndexName::CpRc => "CP_RC",
            IndexName::CpTotal => "CP_total",
        }
    }
}

impl fmt::Display for IndexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexName {
    type Err = PresenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IndexName::ALL
            .into_iter()
            .find(|i| i.as_str() == s.trim())
            .ok_or_else(|| PresenceError::Validation(format!("unknown index: {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Salience {
    Primary,
    Secondary,
}

impl Salience {
    pub fn value(self) -> f64 {
        match self {
            Salience::Primary => 1.0,
            Salience::Secondary => 0.5,
        }
    }
}

impl FromStr for Salience {
    type Err = PresenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" => Ok(Salience::Primary),
            "secondary" => Ok(Salience::Secondary),
            other => Err(PresenceError::Validation(format!("unknown salience: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodedUnit {
    pub record_id: String,
    pub indicator: Indicator,
    pub salience: Salience,
}

impl CodedUnit {
    /// Builds a unit from raw code and salience strings.
    pub fn parse(record_id: &str, code: &str, salience: &str) -> Result<Self, PresenceError> {
        Ok(Self { record_id: record_id.to_string(), indicator: code.parse()?, salience: salience.parse()? })
    }
}

/// Per-indicator scores for one record, indexed by [`Indicator::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IndicatorVector(pub [f64; 14]);

impl IndicatorVector {
    pub fn get(&self, indicator: Indicator) -> f64 {
        self.0[indicator.index()]
    }
}

/// Scores one record: 1.0 when any unit for an indicator is primary, 0.5
/// when only secondary units exist, 0.0 when absent.
pub fn score_record(units: &[CodedUnit]) -> Result<IndicatorVector, PresenceError> {
    if let Some(first) = units.first() {
        if let Some(other) = units.iter().find(|u| u.record_id != first.record_id) {
            return Err(PresenceError::Validation(format!(
                "units span records {} and {}",
                first.record_id, other.record_id
            )));
        }
    }
    let mut v = IndicatorVector::default();
    for unit in units {
        let slot = &mut v.0[unit.indicator.index()];
        *slot = slot.max(unit.salience.value());
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PresenceIndexVector {
    #[serde(rename = "SP_AF")]
    pub sp_af: f64,
    #[serde(rename = "SP_OC")]
    pub sp_oc: f64,
    #[serde(rename = "SP_NC")]
    pub sp_nc: f64,
    #[serde(rename = "SP_total")]
    pub sp_total: f64,
    #[serde(rename = "CP_PT")]
    pub cp_pt: f64,
    #[serde(rename = "CP_EX")]
    pub cp_ex: f64,
    #[serde(rename = "CP_IN")]
    pub cp_in: f64,
    #[serde(rename = "CP_RC")]
    pub cp_rc: f64,
    #[serde(rename = "CP_total")]
    pub cp_total: f64,
}

impl PresenceIndexVector {
    /// Builds the vector from the seven category values; totals are derived
    /// so the sum identities hold exactly.
    pub fn from_categories(c: [f64; 7]) -> Self {
        Self {
            sp_af: c[0],
            sp_oc: c[1],
            sp_nc: c[2],
            sp_total: c[0] + c[1] + c[2],
            cp_pt: c[3],
            cp_ex: c[4],
            cp_in: c[5],
            cp_rc: c[6],
            cp_total: c[3] + c[4] + c[5] + c[6],
        }
    }

    pub fn categories(&self) -> [f64; 7] {
        [self.sp_af, self.sp_oc, self.sp_nc, self.cp_pt, self.cp_ex, self.cp_in, self.cp_rc]
    }

    pub fn get(&self, index: IndexName) -> f64 {
        match index {
            IndexName::SpAf => self.sp_af,
            IndexName::SpOc => self.sp_oc,
            IndexName::SpNc => self.sp_nc,
            IndexName::SpTotal => self.sp_total,
            IndexName::CpPt => self.cp_pt,
            IndexName::CpEx => self.cp_ex,
            IndexName::CpIn => self.cp_in,
            IndexName::CpRc => self.cp_rc,
            IndexName::CpTotal => self.cp_total,
        }
    }
}

pub fn aggregate_indices(v: &IndicatorVector) -> PresenceIndexVector {
    let mut cats = [0.0; 7];
    for (slot, cat) in cats.iter_mut().zip(Category::ALL) {
        let [a, b] = cat.indicators();
        *slot = v.get(a) + v.get(b);
    }
    PresenceIndexVector::from_categories(cats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerMean {
    pub learner_id: String,
    pub condition: Condition,
    pub n_records: usize,
    pub indices: PresenceIndexVector,
}

/// Averages record-level indices per (learner, condition). Category means
/// are taken directly; totals are the sums of those means.
pub fn learner_level_means<'a, I>(scores: I) -> BTreeMap<(String, Condition), LearnerMean>
where
    I: IntoIterator<Item = (&'a str, Condition, &'a PresenceIndexVector)>,
{
    let mut sums: BTreeMap<(String, Condition), ([f64; 7], usize)> = BTreeMap::new();
    for (learner, condition, v) in scores {
        let (acc, n) = sums.entry((learner.to_string(), condition)).or_insert(([0.0; 7], 0));
        for (a, x) in acc.iter_mut().zip(v.categories()) {
            *a += x;
        }
        *n += 1;
    }
    sums.into_iter()
        .map(|((learner_id, condition), (acc, n))| {
            let means = acc.map(|x| x / n as f64);
            let mean = LearnerMean {
                learner_id: learner_id.clone(),
                condition,
                n_records: n,
                indices: PresenceIndexVector::from_categories(means),
            };
            ((learner_id, condition), mean)
        })
        .collect()
}

const MEANS_HEADER: [&str; 3] = ["learner_id", "group", "n_records"];

/// Tab-separated learner means keyed by (learner_id, group). `group` is a
/// condition or an interaction mode label.
pub fn write_learner_means_tsv<'a, W: Write>(
    rows: impl IntoIterator<Item = (&'a str, &'a str, usize, &'a PresenceIndexVector)>,
    mut out: W,
) -> std::io::Result<()> {
    let mut header: Vec<&str> = MEANS_HEADER.to_vec();
    header.extend(IndexName::ALL.iter().map(|i| i.as_str()));
    writeln!(out, "{}", header.join("\t"))?;
    for (learner, group, n, v) in rows {
        let values: Vec<String> = IndexName::ALL.iter().map(|i| format!("{}", v.get(*i))).collect();
        writeln!(out, "{learner}\t{group}\t{n}\t{}", values.join("\t"))?;
    }
    Ok(())
}

/// One row of a learner-means table.
#[derive(Debug, Clone, PartialEq)]
pub struct MeansRow {
    pub learner_id: String,
    pub group: String,
    pub n_records: usize,
    pub indices: PresenceIndexVector,
}

/// Reads a table written by [`write_learner_means_tsv`]. Columns may appear
/// in any order; every index column is required.
pub fn read_learner_means_tsv<R: BufRead>(input: R) -> Result<Vec<MeansRow>, PresenceError> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(PresenceError::Io(e.to_string())),
        None => return Err(PresenceError::Validation("empty means table".into())),
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| PresenceError::Validation(format!("missing column: {name}")))
    };
    let learner_col = find("learner_id")?;
    let group_col = find("group")?;
    let n_col = cols.iter().position(|c| *c == "n_records");
    let index_cols: Vec<usize> = IndexName::ALL.iter().map(|i| find(i.as_str())).collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| PresenceError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |c: usize| {
            fields.get(c).copied().ok_or(PresenceError::Line { line: i + 1, reason: "too few columns".into() })
        };
        let mut vals = [0.0; 9];
        for (slot, &c) in vals.iter_mut().zip(&index_cols) {
            let raw = get(c)?;
            *slot = raw
                .trim()
                .parse()
                .map_err(|_| PresenceError::Line { line: i + 1, reason: format!("not a number: {raw}") })?;
        }
        let n_records = match n_col {
            Some(c) => get(c)?
                .trim()
                .parse()
                .map_err(|_| PresenceError::Line { line: i + 1, reason: "bad n_records".into() })?,
            None => 0,
        };
        // The file is authoritative for totals, so keep them as written.
        let indices = PresenceIndexVector {
            sp_af: vals[0],
            sp_oc: vals[1],
            sp_nc: vals[2],
            sp_total: vals[3],
            cp_pt: vals[4],
            cp_ex: vals[5],
            cp_in: vals[6],
            cp_rc: vals[7],
            cp_total: vals[8],
        };
        rows.push(MeansRow {
            learner_id: get(learner_col)?.trim().to_string(),
            group: get(group_col)?.trim().to_string(),
            n_records,
            indices,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(code: &str, sal: &str) -> CodedUnit {
        CodedUnit::parse("r1", code, sal).unwrap()
    }

    #[test]
    fn primary_and_secondary_map_to_one_and_half() {
        let v = score_record(&[unit("OC1", "primary"), unit("OC2", "secondary")]).unwrap();
        assert_eq!(v.get(Indicator::OC1), 1.0);
        assert_eq!(v.get(Indicator::OC2), 0.5);
        assert_eq!(v.0.iter().sum::<f64>(), 1.5);
    }

    #[test]
    fn empty_units_score_zero() {
        assert_eq!(score_record(&[]).unwrap(), IndicatorVector::default());
    }

    #[test]
    fn duplicate_indicator_takes_max() {
        let v = score_record(&[unit("AF1", "secondary"), unit("AF1", "primary")]).unwrap();
        assert_eq!(v.get(Indicator::AF1), 1.0);
    }

    #[test]
    fn unknown_code_is_validation_error() {
        assert!(matches!(CodedUnit::parse("r1", "XX1", "primary"), Err(PresenceError::Validation(_))));
        assert_eq!("af-2".parse::<Indicator>().unwrap(), Indicator::AF2);
    }

    #[test]
    fn mixed_records_rejected() {
        let mut b = unit("AF1", "primary");
        b.record_id = "r2".into();
        assert!(score_record(&[unit("AF1", "primary"), b]).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let v = score_record(&[unit("AF1", "primary"), unit("AF2", "secondary")]).unwrap();
        let p = aggregate_indices(&v);
        assert_eq!((p.sp_af, p.sp_total, p.cp_total), (1.5, 1.5, 0.0));

        let all: Vec<_> = Indicator::ALL.iter().map(|i| unit(i.code(), "primary")).collect();
        let p = aggregate_indices(&score_record(&all).unwrap());
        assert_eq!((p.sp_total, p.cp_total), (6.0, 8.0));

        assert_eq!(aggregate_indices(&IndicatorVector::default()), PresenceIndexVector::default());
    }

    #[test]
    fn learner_means_average_per_condition() {
        let one = PresenceIndexVector::from_categories([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let zero = PresenceIndexVector::default();
        let means = learner_level_means([
            ("u1", Condition::WithPca, &one),
            ("u1", Condition::WithPca, &zero),
            ("u2", Condition::WithoutPca, &one),
        ]);
        assert_eq!(means[&("u1".to_string(), Condition::WithPca)].indices.sp_total, 0.5);
        assert_eq!(means[&("u2".to_string(), Condition::WithoutPca)].indices, one);
        assert!(!means.contains_key(&("u2".to_string(), Condition::WithPca)));
    }

    #[test]
    fn means_table_round_trips() {
        let v = PresenceIndexVector::from_categories([0.25, 0.5, 0.0, 1.0, 0.125, 0.0, 2.0]);
        let mut buf = Vec::new();
        write_learner_means_tsv([("u1", "with_pca", 3, &v)], &mut buf).unwrap();
        let rows = read_learner_means_tsv(buf.as_slice()).unwrap();
        assert_eq!(rows[0].indices, v);
        assert_eq!(rows[0].n_records, 3);
    }

    #[test]
    fn means_table_missing_column_is_validation_error() {
        let tsv = "learner_id\tgroup\tSP_AF\n u1\twith_pca\t1\n";
        assert!(
            matches!(read_learner_means_tsv(tsv.as_bytes()), Err(PresenceError::Validation(m)) if m.contains("SP_OC"))
        );
    }
}
