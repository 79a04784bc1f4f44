#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use facihub_core::review::{Decision, DecisionPayload, Dimension, Verdict};
use facihub_core::synth::{synthetic_log, to_ndjson, SynthParams};
use facihub_core::{Engine, EngineConfig};

pub fn config_in(dir: &Path) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.storage.data_dir = dir.to_path_buf();
    cfg.stats.permutation_n = 200;
    cfg
}

/// Accepts roughly seven in ten candidates, chosen by a hash of the id so
/// the script is reproducible.
pub fn scripted_decision(candidate_id: &str) -> DecisionPayload {
    let h = candidate_id.bytes().fold(2166136261u32, |h, b| (h ^ b as u32).wrapping_mul(16777619));
    let accept = h % 10 < 7;
    let mut flags = BTreeMap::new();
    for d in Dimension::ALL {
        flags.insert(d, Verdict::Pass);
    }
    if !accept {
        flags.insert(Dimension::FactualPlausibility, Verdict::Fail);
    }
    DecisionPayload {
        decision: if accept { Decision::Accept } else { Decision::Reject },
        dimension_flags: flags,
        note: (!accept).then(|| "unsupported claim".to_string()),
        reviewer_id: "script".into(),
        criteria_version: None,
    }
}

pub fn accept_all() -> DecisionPayload {
    DecisionPayload {
        decision: Decision::Accept,
        dimension_flags: Dimension::ALL.iter().map(|d| (*d, Verdict::Pass)).collect(),
        note: None,
        reviewer_id: "r1".into(),
        criteria_version: None,
    }
}

/// Published candidates must always be a subset of accepted ones.
pub fn assert_publication_sound(engine: &Engine) {
    for p in engine.queue().publications() {
        let review = engine.queue().review(&p.candidate_id).expect("published candidate has a review");
        assert_eq!(review.decision, Decision::Accept, "{} published without acceptance", p.candidate_id);
    }
}

pub struct PipelineOutput {
    pub goal1: String,
    pub goal2: String,
    pub published: usize,
    pub enqueued: usize,
}

/// Daily cycle over a synthetic log: targeting, stub generation, scripted
/// review and publication, then coding and both goal reports.
pub fn run_pipeline(engine: &mut Engine, params: &SynthParams) -> PipelineOutput {
    let log = to_ndjson(&synthetic_log(params));
    let report = engine.ingest_str(&log).unwrap();
    assert_eq!(report.accepted, params.n_records);
    let mut enqueued = 0;
    let mut published = 0;
    for day in 1..=params.days {
        let as_of: DateTime<Utc> = params.start + Duration::days(day);
        let outcome = engine.run(as_of).unwrap();
        assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
        for id in &outcome.enqueued {
            engine.decide(id, scripted_decision(id), as_of + Duration::hours(1)).unwrap();
        }
        enqueued += outcome.enqueued.len();
        published += engine.publish(None, as_of + Duration::hours(2)).unwrap().len();
        assert_publication_sound(engine);
    }
    engine.code_pending().unwrap();
    let data = engine.analysis_data().unwrap();
    PipelineOutput {
        goal1: data.goal1().unwrap().to_tsv_string(),
        goal2: data.goal2().unwrap().to_tsv_string(),
        published,
        enqueued,
    }
}
