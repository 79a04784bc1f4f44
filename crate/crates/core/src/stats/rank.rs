use serde::{Deserialize, Serialize};

use super::{normal_cdf, normal_sf, EffectKind, EffectSize, StatsError, Tail, TestKind, TestResult};

/// Largest total sample size for which p-values are enumerated exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    NormalApprox,
    TDist,
}

/// Treatment of zero differences in the signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Drop zeros before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then drop their ranks.
    Pratt,
}

/// Doubled mid-ranks (always integers) in input order, plus tie-group sizes.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1, midrank (i+1 + j+1)/2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn check_finite(xs: &[f64], what: &str) -> Result<(), StatsError> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::Argument(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Continuity-corrected normal tail probabilities for a statistic with the
/// given mean and variance. Returns (P(S >= s), P(S <= s)).
fn normal_tails(s: f64, mean: f64, var: f64) -> (f64, f64) {
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let upper = normal_sf((s - mean - 0.5) / sd).min(1.0);
    let lower = normal_cdf((s - mean + 0.5) / sd).min(1.0);
    (upper, lower)
}

fn z_score(s: f64, mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        0.0
    } else {
        (s - mean) / var.sqrt()
    }
}

/// Exact (P(W+ >= obs), P(W+ <= obs)) from the sign-flip distribution over
/// doubled ranks.
fn signed_rank_exact(ranks: &[u64], observed: u64) -> (f64, f64) {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0.0_f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all: f64 = counts.iter().sum();
    let obs = observed as usize;
    let ge: f64 = counts[obs..].iter().sum();
    let le: f64 = counts[..=obs].iter().sum();
    (ge / all, le / all)
}

pub fn wilcoxon_signed_rank(diffs: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(diffs, tail, ZeroMethod::Wilcox, None)
}

/// Signed-rank test. `force` overrides the automatic exact/normal choice.
pub fn wilcoxon_signed_rank_with(
    diffs: &[f64],
    tail: Tail,
    zero_method: ZeroMethod,
    force: Option<PMethod>,
) -> Result<TestResult, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::Argument("empty sample".into()));
    }
    check_finite(diffs, "diffs")?;
    let kept: Vec<f64> = match zero_method {
        ZeroMethod::Wilcox => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.to_vec(),
    };
    let abs: Vec<f64> = kept.iter().map(|d| d.abs()).collect();
    let (all_ranks, _) = doubled_midranks(&abs);
    let (ranks, signs): (Vec<u64>, Vec<bool>) =
        kept.iter().zip(all_ranks).filter(|(d, _)| **d != 0.0).map(|(d, r)| (r, *d > 0.0)).unzip();
    let n = ranks.len();
    if n == 0 {
        return Err(StatsError::Degenerate("all differences are zero".into()));
    }
    let w_plus2: u64 = ranks.iter().zip(&signs).filter(|(_, pos)| **pos).map(|(r, _)| r).sum();
    let w_plus = w_plus2 as f64 / 2.0;
    let mean = ranks.iter().map(|&r| r as f64 / 2.0).sum::<f64>() / 2.0;
    let var = ranks.iter().map(|&r| (r as f64 / 2.0).powi(2)).sum::<f64>() / 4.0;
    let z = z_score(w_plus, mean, var);

    let method = force.unwrap_or(if n <= EXACT_MAX_N { PMethod::Exact } else { PMethod::NormalApprox });
    let (p_ge, p_le) = match method {
        PMethod::Exact => {
            if n > 40 {
                return Err(StatsError::Argument(format!("exact enumeration unsupported for n = {n}")));
            }
            signed_rank_exact(&ranks, w_plus2)
        }
        PMethod::NormalApprox => normal_tails(w_plus, mean, var),
        PMethod::TDist => return Err(StatsError::Argument("t distribution not applicable to ranks".into())),
    };
    Ok(TestResult {
        test: TestKind::Wilcoxon,
        statistic: w_plus,
        z_value: Some(z),
        p_value: tail.pick(p_ge, p_le),
        p_method: method,
        tail,
        effect_size: EffectSize { kind: EffectKind::RankR, value: z / (n as f64).sqrt() },
        n_used: n,
    })
}

/// Exact (P(U >= obs), P(U <= obs)) by enumerating which doubled ranks fall
/// in sample a.
fn rank_sum_exact(ranks: &[u64], n_a: usize, observed: u64) -> (f64, f64) {
    let total: u64 = ranks.iter().sum();
    let width = total as usize + 1;
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0_f64; width]; n_a + 1];
    counts[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (0..n_a).rev() {
            let (lo, hi) = counts.split_at_mut(k + 1);
            for s in (0..width - r).rev() {
                if lo[k][s] != 0.0 {
                    hi[0][s + r] += lo[k][s];
                }
            }
        }
    }
    let row = &counts[n_a];
    let all: f64 = row.iter().sum();
    let obs = observed as usize;
    let ge: f64 = row[obs..].iter().sum();
    let le: f64 = row[..=obs].iter().sum();
    (ge / all, le / all)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    mann_whitney_u_with(a, b, tail, None)
}

/// Two-sample rank-sum test on `a` versus `b`. `Tail::OneTailedGreater`
/// tests whether `a` tends to be larger. The statistic is U for sample a.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], tail: Tail, force: Option<PMethod>) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Argument("both samples must be non-empty".into()));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let r_a2: u64 = ranks[..n_a].iter().sum();
    let offset = (n_a * (n_a + 1)) as f64 / 2.0;
    let u = r_a2 as f64 / 2.0 - offset;

    let (nf, naf, nbf) = (n as f64, n_a as f64, n_b as f64);
    let mean = naf * nbf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = if n > 1 { naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0))) } else { 0.0 };
    let z = z_score(u, mean, var);

    let method = force.unwrap_or(if n <= EXACT_MAX_N { PMethod::Exact } else { PMethod::NormalApprox });
    let (p_ge, p_le) = match method {
        PMethod::Exact => {
            if n > 60 {
                return Err(StatsError::Argument(format!("exact enumeration unsupported for n = {n}")));
            }
            // U >= u  <=>  doubled R_a >= r_a2
            rank_sum_exact(&ranks, n_a, r_a2)
        }
        PMethod::NormalApprox => normal_tails(u, mean, var),
        PMethod::TDist => return Err(StatsError::Argument("t distribution not applicable to ranks".into())),
    };
    Ok(TestResult {
        test: TestKind::MannWhitney,
        statistic: u,
        z_value: Some(z),
        p_value: tail.pick(p_ge, p_le),
        p_method: method,
        tail,
        effect_size: EffectSize { kind: EffectKind::RankR, value: z / nf.sqrt() },
        n_used: n,
    })
}

pub fn exact_wilcoxon_p(diffs: &[f64], tail: Tail) -> Result<f64, StatsError> {
    wilcoxon_signed_rank_with(diffs, tail, ZeroMethod::Wilcox, Some(PMethod::Exact)).map(|r| r.p_value)
}

pub fn normal_wilcoxon_p(diffs: &[f64], tail: Tail) -> Result<f64, StatsError> {
    wilcoxon_signed_rank_with(diffs, tail, ZeroMethod::Wilcox, Some(PMethod::NormalApprox)).map(|r| r.p_value)
}

pub fn exact_mann_whitney_p(a: &[f64], b: &[f64], tail: Tail) -> Result<f64, StatsError> {
    mann_whitney_u_with(a, b, tail, Some(PMethod::Exact)).map(|r| r.p_value)
}

pub fn normal_mann_whitney_p(a: &[f64], b: &[f64], tail: Tail) -> Result<f64, StatsError> {
    mann_whitney_u_with(a, b, tail, Some(PMethod::NormalApprox)).map(|r| r.p_value)
}
