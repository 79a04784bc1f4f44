use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{mean, EffectKind, EffectSize, PMethod, StatsError, Tail, TestKind, TestResult};

/// One-sample t-test on paired differences with Cohen's d = mean / sd.
pub fn paired_t(diffs: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    let n = diffs.len();
    if n < 2 {
        return Err(StatsError::SampleSize { got: n, needed: "at least 2" });
    }
    if diffs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::Argument("diffs contain non-finite values".into()));
    }
    let m = mean(diffs);
    let var = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * m.abs().max(1.0) {
        return Err(StatsError::Degenerate("differences have zero variance".into()));
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
    Ok(TestResult {
        test: TestKind::PairedT,
        statistic: t,
        z_value: None,
        p_value: tail.pick(dist.sf(t), dist.cdf(t)),
        p_method: PMethod::TDist,
        tail,
        effect_size: EffectSize { kind: EffectKind::CohenD, value: m / sd },
        n_used: n,
    })
}
