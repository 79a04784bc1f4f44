use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{Indicator, PresenceError, Salience};

/// Agreement between two coders on one indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kappa {
    Value {
        kappa: f64,
        p_o: f64,
        p_e: f64,
        n: usize,
    },
    /// Both coders gave the same constant answer, so chance agreement is 1.
    Degenerate {
        p_o: f64,
        n: usize,
    },
}

impl Kappa {
    pub fn value(&self) -> Option<f64> {
        match self {
            Kappa::Value { kappa, .. } => Some(*kappa),
            Kappa::Degenerate { .. } => None,
        }
    }
}

/// Cohen's kappa for two aligned binary codings.
pub fn cohens_kappa_binary(a: &[bool], b: &[bool]) -> Result<Kappa, PresenceError> {
    if a.len() != b.len() {
        return Err(PresenceError::Validation(format!("coding lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(PresenceError::Validation("no records to compare".into()));
    }
    let n = a.len();
    let nf = n as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let yes_a = a.iter().filter(|x| **x).count() as f64 / nf;
    let yes_b = b.iter().filter(|x| **x).count() as f64 / nf;
    let p_o = agree as f64 / nf;
    let p_e = yes_a * yes_b + (1.0 - yes_a) * (1.0 - yes_b);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(Kappa::Degenerate { p_o, n });
    }
    Ok(Kappa::Value { kappa: (p_o - p_e) / (1.0 - p_e), p_o, p_e, n })
}

/// Kappa on presence/absence of `indicator` per record. Both coders must
/// cover exactly the same records.
pub fn cohens_kappa(
    codes_a: &BTreeMap<String, BTreeSet<Indicator>>,
    codes_b: &BTreeMap<String, BTreeSet<Indicator>>,
    indicator: Indicator,
) -> Result<Kappa, PresenceError> {
    let only_a = codes_a.keys().filter(|k| !codes_b.contains_key(*k)).count();
    let only_b = codes_b.keys().filter(|k| !codes_a.contains_key(*k)).count();
    if only_a > 0 || only_b > 0 {
        return Err(PresenceError::RecordSetMismatch { only_a, only_b });
    }
    let a: Vec<bool> = codes_a.values().map(|s| s.contains(&indicator)).collect();
    let b: Vec<bool> = codes_b.values().map(|s| s.contains(&indicator)).collect();
    cohens_kappa_binary(&a, &b)
}

/// One line of a gold-set coding file. `indicator` is `None` for a line
/// whose code is `NONE`, which marks a record the coder saw and left uncoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldCode {
    pub record_id: String,
    pub indicator: Option<Indicator>,
    pub salience: Option<Salience>,
    pub coder_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGold {
    record_id: String,
    indicator: String,
    #[serde(default)]
    salience: Option<String>,
    coder_id: String,
}

/// Reads a line-delimited gold coding file.
pub fn parse_gold_codes<R: BufRead>(input: R) -> Result<Vec<GoldCode>, PresenceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PresenceError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| PresenceError::Line { line: i + 1, reason };
        let raw: RawGold = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let (indicator, salience) = if raw.indicator.trim().eq_ignore_ascii_case("NONE") {
            (None, None)
        } else {
            let ind = raw.indicator.parse::<Indicator>().map_err(|e| bad(e.to_string()))?;
            let sal = raw
                .salience
                .as_deref()
                .ok_or_else(|| bad("missing salience".into()))?
                .parse::<Salience>()
                .map_err(|e| bad(e.to_string()))?;
            (Some(ind), Some(sal))
        };
        out.push(GoldCode { record_id: raw.record_id, indicator, salience, coder_id: raw.coder_id });
    }
    Ok(out)
}

fn codes_for(codes: &[GoldCode], coder: &str) -> BTreeMap<String, BTreeSet<Indicator>> {
    let mut map: BTreeMap<String, BTreeSet<Indicator>> = BTreeMap::new();
    for c in codes.iter().filter(|c| c.coder_id == coder) {
        let entry = map.entry(c.record_id.clone()).or_default();
        if let Some(ind) = c.indicator {
            entry.insert(ind);
        }
    }
    map
}

/// Per-indicator kappa between two coders of a gold file, plus the pooled
/// kappa over all (record, indicator) cells.
pub fn kappa_by_indicator(
    codes: &[GoldCode],
    coder_a: &str,
    coder_b: &str,
) -> Result<(BTreeMap<Indicator, Kappa>, Kappa), PresenceError> {
    let a = codes_for(codes, coder_a);
    let b = codes_for(codes, coder_b);
    let mut per = BTreeMap::new();
    for ind in Indicator::ALL {
        per.insert(ind, cohens_kappa(&a, &b, ind)?);
    }
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for (sa, sb) in a.values().zip(b.values()) {
        for ind in Indicator::ALL {
            pa.push(sa.contains(&ind));
            pb.push(sb.contains(&ind));
        }
    }
    Ok((per, cohens_kappa_binary(&pa, &pb)?))
}
