use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantile_sorted, StatsError};
use crate::targeting::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationObservation {
    pub learner_id: String,
    /// ISO-8601 week label, e.g. `2025-W07`.
    pub iso_week: String,
    pub condition: Condition,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub indicator: String,
    pub observed_delta: f64,
    pub null_interval_95: (f64, f64),
    pub percentile: f64,
    pub empirical_p_two_tailed: f64,
    pub n_permutations: usize,
    pub seed: u64,
    pub n_learners: usize,
    pub n_strata: usize,
    /// Strata dropped for having one observation or a single condition,
    /// as `learner_id/iso_week`.
    pub excluded_strata: Vec<String>,
}

impl PermutationResult {
    pub const TSV_HEADER: &'static str =
        "Indicator\tObserved_Delta_M\tNull_95_interval\tPercentile\tEmpirical_p_two_tailed";

    pub fn write_tsv<W: Write>(results: &[PermutationResult], mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::TSV_HEADER)?;
        for r in results {
            writeln!(
                out,
                "{}\t{:.4}\t[{:.4}, {:.4}]\t{:.4}\t{:.4}",
                r.indicator,
                r.observed_delta,
                r.null_interval_95.0,
                r.null_interval_95.1,
                r.percentile,
                r.empirical_p_two_tailed
            )?;
        }
        Ok(())
    }
}

struct Stratum {
    learner: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

/// Mean over learners of (mean with - mean without), pooling each learner's
/// eligible strata.
fn learner_delta(strata: &[Stratum], labels: impl Fn(usize) -> Vec<bool>, n_learners: usize) -> f64 {
    // (sum_with, n_with, sum_without, n_without)
    let mut acc = vec![(0.0, 0usize, 0.0, 0usize); n_learners];
    for (i, s) in strata.iter().enumerate() {
        let lab = labels(i);
        let slot = &mut acc[s.learner];
        for (v, with) in s.values.iter().zip(lab) {
            if with {
                slot.0 += v;
                slot.1 += 1;
            } else {
                slot.2 += v;
                slot.3 += 1;
            }
        }
    }
    let total: f64 = acc.iter().map(|(sw, nw, so, no)| sw / *nw as f64 - so / *no as f64).sum();
    total / n_learners as f64
}

/// Shuffles condition labels within each (learner, week) stratum and
/// compares the observed learner-level mean difference against the
/// resulting null distribution. Replicate `i` draws from ChaCha8 stream `i`
/// of `seed`, so results do not depend on thread scheduling.
pub fn permutation_sensitivity(
    indicator: &str,
    data: &[PermutationObservation],
    n_permutations: usize,
    seed: u64,
) -> Result<PermutationResult, StatsError> {
    if n_permutations == 0 {
        return Err(StatsError::Argument("n_permutations must be at least 1".into()));
    }
    if data.iter().any(|o| !o.value.is_finite()) {
        return Err(StatsError::Argument("observations contain non-finite values".into()));
    }
    let mut cells: BTreeMap<(&str, &str), Vec<&PermutationObservation>> = BTreeMap::new();
    for o in data {
        cells.entry((o.learner_id.as_str(), o.iso_week.as_str())).or_default().push(o);
    }
    let mut learners: BTreeMap<&str, usize> = BTreeMap::new();
    let mut strata = Vec::new();
    let mut excluded = Vec::new();
    for ((learner, week), obs) in cells {
        let n_with = obs.iter().filter(|o| o.condition == Condition::WithPca).count();
        if obs.len() < 2 || n_with == 0 || n_with == obs.len() {
            tracing::debug!(learner, week, n = obs.len(), "excluding permutation stratum");
            excluded.push(format!("{learner}/{week}"));
            continue;
        }
        let next = learners.len();
        let idx = *learners.entry(learner).or_insert(next);
        strata.push(Stratum {
            learner: idx,
            values: obs.iter().map(|o| o.value).collect(),
            labels: obs.iter().map(|o| o.condition == Condition::WithPca).collect(),
        });
    }
    if strata.is_empty() {
        return Err(StatsError::Analysis("no eligible user-week stratum".into()));
    }
    if !excluded.is_empty() {
        tracing::info!(indicator, excluded = excluded.len(), "permutation strata excluded");
    }
    let n_learners = learners.len();
    let observed = learner_delta(&strata, |i| strata[i].labels.clone(), n_learners);

    let mut null: Vec<f64> = (0..n_permutations)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let shuffled: Vec<Vec<bool>> = strata
                .iter()
                .map(|s| {
                    let mut lab = s.labels.clone();
                    lab.shuffle(&mut rng);
                    lab
                })
                .collect();
            learner_delta(&strata, |i| shuffled[i].clone(), n_learners)
        })
        .collect();

    let tol = 1e-9 * observed.abs().max(1.0);
    let extreme = null.iter().filter(|d| d.abs() >= observed.abs() - tol).count();
    let at_or_below = null.iter().filter(|d| **d <= observed + tol).count();
    null.sort_by(f64::total_cmp);
    Ok(PermutationResult {
        indicator: indicator.to_string(),
        observed_delta: observed,
        null_interval_95: (quantile_sorted(&null, 0.025), quantile_sorted(&null, 0.975)),
        percentile: at_or_below as f64 / n_permutations as f64,
        empirical_p_two_tailed: (1 + extreme) as f64 / (n_permutations + 1) as f64,
        n_permutations,
        seed,
        n_learners,
        n_strata: strata.len(),
        excluded_strata: excluded,
    })
}
