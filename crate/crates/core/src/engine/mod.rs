//! The engine ties the modules together over one persistent state
//! directory: an append-only event log and a periodic snapshot.

mod analysis;
mod jobs;
mod storage;

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use analysis::{iso_week_label, AnalysisData, ScoredRecord};
pub use jobs::{JobSlot, JobStatus, JobTicket};

use crate::agent::stub::{StubCoderClient, StubReplyClient};
use crate::agent::{
    assemble_prompt, generate_candidate, run_bounded, AgentError, CandidateResponse, CompletionClient,
    GenerationParams, HttpCompletionClient, PromptBundle, PromptTemplates, RoleFramework,
};
use crate::config::{ConfigError, EngineConfig};
use crate::forum::{ActionRecord, ForumError, ForumStore, IngestReport, ThreadContext};
use crate::hypergraph::HypergraphError;
use crate::presence::{
    aggregate_indices, classify_interaction_modes, llm_code_records, score_record, CodedUnit, CodingOutcome,
    CodingParams, CodingScheme, GoldCode, PresenceError,
};
use crate::review::{
    parse_decision_payload, publication_record, AcceptanceMetrics, Decision, DecisionPayload, PublicationEvent,
    QueueEntry, ReviewError, ReviewQueue, ReviewRecord,
};
use crate::stats::{BalancePost, StatsError};
use crate::targeting::{
    run_daily_targeting, ConditionRegistry, InterventionTarget, RunManifest, TargetingParams, TargetingRun,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("corrupt state: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Forum(#[from] ForumError),
    #[error(transparent)]
    Targeting(#[from] HypergraphError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Presence(#[from] PresenceError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Everything that changes engine state, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Ingested { records: Vec<ActionRecord> },
    TargetingRun { run: TargetingRun },
    Enqueued { entry: QueueEntry },
    Decided { review: ReviewRecord },
    Published { publication: PublicationEvent, record: ActionRecord },
    Coded { records: Vec<String>, units: Vec<CodedUnit> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Snapshot {
    records: Vec<ActionRecord>,
    registry: ConditionRegistry,
    runs: Vec<TargetingRun>,
    queue: ReviewQueue,
    codes: BTreeMap<String, Vec<CodedUnit>>,
}

/// One reply to generate: a resolved target and its assembled prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub candidate_id: String,
    pub target: InterventionTarget,
    pub context: ThreadContext,
    pub bundle: PromptBundle,
}

/// Targeting output waiting for generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub run: TargetingRun,
    pub jobs: Vec<GenerationJob>,
    /// Targets that already have a candidate from an earlier run.
    pub already_answered: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub candidate_id: String,
    pub target_id: String,
    pub error: String,
    pub retryable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub targets: Vec<InterventionTarget>,
    pub enqueued: Vec<String>,
    pub already_answered: Vec<String>,
    pub failures: Vec<GenerationFailure>,
}

/// The reply client with the settings needed to call it, detachable from
/// the engine so slow model calls do not hold the engine lock.
#[derive(Clone)]
pub struct Generator {
    client: Arc<dyn CompletionClient>,
    framework: RoleFramework,
    reminder: String,
    parallelism: usize,
}

impl Generator {
    pub fn generate(
        &self,
        jobs: &[GenerationJob],
        generated_at: DateTime<Utc>,
    ) -> Vec<Result<CandidateResponse, AgentError>> {
        run_bounded(jobs, self.parallelism, |job| {
            generate_candidate(
                &job.bundle,
                self.client.as_ref(),
                &self.framework,
                &self.reminder,
                &job.candidate_id,
                &job.target.target_id,
                generated_at,
            )
        })
    }
}

/// Coded records and units added by an import.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub records: usize,
    pub units: usize,
    pub unknown_records: Vec<String>,
}

/// A queue entry with its review and publication, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    #[serde(flatten)]
    pub entry: QueueEntry,
    pub review: Option<ReviewRecord>,
    pub publication: Option<PublicationEvent>,
}

pub fn candidate_id_for(target_id: &str, as_of: DateTime<Utc>) -> String {
    format!("cand-{}-{target_id}", as_of.format("%Y%m%dT%H%M%SZ"))
}

pub struct Engine {
    config: EngineConfig,
    store: ForumStore,
    registry: ConditionRegistry,
    runs: Vec<TargetingRun>,
    queue: ReviewQueue,
    codes: BTreeMap<String, Vec<CodedUnit>>,
    storage: Option<storage::Storage>,
    templates: PromptTemplates,
    framework: RoleFramework,
    scheme: CodingScheme,
    reply_client: Arc<dyn CompletionClient>,
    coder_client: Arc<dyn CompletionClient>,
}

impl Engine {
    /// An engine without persistence.
    pub fn in_memory(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let (templates, scheme) = match &config.agent.prompts_dir {
            Some(dir) => (
                PromptTemplates::load_dir(dir).map_err(|e| EngineError::Storage(format!("{}: {e}", dir.display())))?,
                CodingScheme::load_dir(dir)?,
            ),
            None => (PromptTemplates::default(), CodingScheme::default()),
        };
        let framework = RoleFramework::profile(config.agent.framework);
        let (reply_client, coder_client): (Arc<dyn CompletionClient>, Arc<dyn CompletionClient>) =
            match &config.llm.endpoint {
                Some(url) => {
                    let timeout = Duration::from_secs(config.llm.timeout_secs);
                    let http = Arc::new(HttpCompletionClient::new(url.clone(), config.llm.api_key.clone(), timeout));
                    (http.clone(), http)
                }
                None => (
                    Arc::new(StubReplyClient::new(framework.enabled.iter().map(|r| r.as_str()))),
                    Arc::new(StubCoderClient),
                ),
            };
        Ok(Self {
            registry: ConditionRegistry::new(config.targeting.parity_mapping),
            config,
            store: ForumStore::new(),
            runs: Vec::new(),
            queue: ReviewQueue::new(),
            codes: BTreeMap::new(),
            storage: None,
            templates,
            framework,
            scheme,
            reply_client,
            coder_client,
        })
    }

    /// Opens the state directory named in the config, replaying the log
    /// after the last snapshot.
    pub fn open(config: EngineConfig) -> Result<Self, EngineError> {
        let mut engine = Self::in_memory(config)?;
        let (storage, snapshot, events) =
            storage::Storage::open(&engine.config.storage.data_dir, engine.config.storage.snapshot_every)?;
        if let Some(s) = snapshot {
            engine.store = ForumStore::from_records(s.records)?;
            engine.registry = s.registry;
            engine.runs = s.runs;
            engine.queue = s.queue;
            engine.queue.reindex();
            engine.codes = s.codes;
        }
        let replayed = events.len();
        for ev in events {
            engine.apply(ev).map_err(|e| EngineError::Corrupt(format!("replay failed: {e}")))?;
        }
        if replayed > 0 {
            tracing::info!(replayed, "replayed events after snapshot");
        }
        engine.storage = Some(storage);
        Ok(engine)
    }

    /// Replaces the model clients (both default to the configured endpoint
    /// or the deterministic stubs).
    pub fn with_clients(mut self, reply: Arc<dyn CompletionClient>, coder: Arc<dyn CompletionClient>) -> Self {
        self.reply_client = reply;
        self.coder_client = coder;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &ForumStore {
        &self.store
    }

    pub fn registry(&self) -> &ConditionRegistry {
        &self.registry
    }

    pub fn runs(&self) -> &[TargetingRun] {
        &self.runs
    }

    pub fn queue(&self) -> &ReviewQueue {
        &self.queue
    }

    pub fn codes(&self) -> &BTreeMap<String, Vec<CodedUnit>> {
        &self.codes
    }

    pub fn agent_id(&self) -> &str {
        &self.config.agent.id
    }

    fn apply(&mut self, event: Event) -> Result<(), EngineError> {
        match event {
            Event::Ingested { records } => {
                for r in records {
                    self.store.append(r)?;
                }
            }
            Event::TargetingRun { run } => {
                for a in &run.manifest.assignment_delta {
                    self.registry.restore(a.clone());
                }
                self.runs.push(run);
            }
            Event::Enqueued { entry } => {
                self.queue.enqueue(entry.candidate, entry.context, entry.enqueued_at)?;
            }
            Event::Decided { review } => {
                let payload = DecisionPayload {
                    decision: review.decision,
                    dimension_flags: review.dimension_flags,
                    note: review.note,
                    reviewer_id: review.reviewer_id,
                    criteria_version: review.criteria_version,
                };
                self.queue.decide(&review.candidate_id, payload, review.decided_at)?;
            }
            Event::Published { publication, record } => {
                self.store.append(record)?;
                self.queue.record_publication(publication)?;
            }
            Event::Coded { records, units } => {
                for id in records {
                    self.codes.insert(id, Vec::new());
                }
                for u in units {
                    self.codes.entry(u.record_id.clone()).or_default().push(u);
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            records: self.store.records().to_vec(),
            registry: self.registry.clone(),
            runs: self.runs.clone(),
            queue: self.queue.clone(),
            codes: self.codes.clone(),
        }
    }

    /// Logs an event whose effect is already in memory.
    fn persist(&mut self, event: &Event) -> Result<(), EngineError> {
        let Some(storage) = self.storage.as_mut() else { return Ok(()) };
        storage.append(event)?;
        if storage.snapshot_due() {
            let snap = self.snapshot();
            self.storage.as_mut().expect("checked above").write_snapshot(snap)?;
        }
        Ok(())
    }

    /// Validates, applies and logs an event.
    fn commit(&mut self, event: Event) -> Result<(), EngineError> {
        self.apply(event.clone())?;
        self.persist(&event)
    }

    /// Writes a snapshot now, regardless of the schedule.
    pub fn compact(&mut self) -> Result<(), EngineError> {
        let snap = self.snapshot();
        match self.storage.as_mut() {
            Some(s) => s.write_snapshot(snap),
            None => Ok(()),
        }
    }

    pub fn ingest<R: BufRead>(&mut self, source: R) -> Result<IngestReport, EngineError> {
        let (report, accepted) = self.store.ingest_log(source)?;
        if !accepted.is_empty() {
            self.persist(&Event::Ingested { records: accepted })?;
        }
        Ok(report)
    }

    pub fn ingest_str(&mut self, text: &str) -> Result<IngestReport, EngineError> {
        let (report, accepted) = self.store.ingest_lines(text.lines());
        if !accepted.is_empty() {
            self.persist(&Event::Ingested { records: accepted })?;
        }
        Ok(report)
    }

    /// The most recent earlier run, which bounds the learner-reply scan.
    pub fn previous_run(&self, as_of: DateTime<Utc>) -> Option<DateTime<Utc>> {
        self.runs.iter().map(|r| r.manifest.as_of).filter(|t| *t < as_of).max()
    }

    pub fn generator(&self) -> Generator {
        Generator {
            client: self.reply_client.clone(),
            framework: self.framework.clone(),
            reminder: self.templates.format_reminder.clone(),
            parallelism: self.config.llm.parallelism,
        }
    }

    /// Runs targeting, records the run and assembles prompts for targets
    /// that have no candidate yet.
    pub fn plan_run(&mut self, as_of: DateTime<Utc>) -> Result<RunPlan, EngineError> {
        let t = &self.config.targeting;
        let params = TargetingParams { window_hours: t.window_hours, fraction: t.fraction, s: t.s };
        let previous = self.previous_run(as_of);
        let mut registry = self.registry.clone();
        let run = run_daily_targeting(&self.store, &mut registry, &self.config.agent.id, previous, as_of, &params)?;
        self.registry = registry;
        self.runs.push(run.clone());
        self.persist(&Event::TargetingRun { run: run.clone() })?;

        let answered: BTreeSet<&str> = self.queue.entries().iter().map(|e| e.candidate.target_id.as_str()).collect();
        let gen_params = GenerationParams {
            model_name: self.config.llm.model_name.clone(),
            temperature: self.config.llm.temperature,
        };
        let mut jobs = Vec::new();
        let mut already_answered = Vec::new();
        for target in &run.targets {
            if answered.contains(target.target_id.as_str()) {
                already_answered.push(target.target_id.clone());
                continue;
            }
            let context = self.store.resolve_thread(&target.target_id)?;
            let bundle = assemble_prompt(target, &context, &self.framework, &self.templates, &gen_params)?;
            jobs.push(GenerationJob {
                candidate_id: candidate_id_for(&target.target_id, as_of),
                target: target.clone(),
                context,
                bundle,
            });
        }
        Ok(RunPlan { run, jobs, already_answered })
    }

    /// Enqueues generated candidates; failures are reported, not fatal.
    pub fn commit_candidates(
        &mut self,
        plan: RunPlan,
        results: Vec<Result<CandidateResponse, AgentError>>,
        enqueued_at: DateTime<Utc>,
    ) -> Result<RunOutcome, EngineError> {
        if results.len() != plan.jobs.len() {
            return Err(EngineError::Argument("one generation result per job is required".into()));
        }
        let mut enqueued = Vec::new();
        let mut failures = Vec::new();
        for (job, result) in plan.jobs.into_iter().zip(results) {
            match result {
                Ok(candidate) => {
                    let entry = QueueEntry { candidate, context: job.context, enqueued_at };
                    enqueued.push(entry.candidate.candidate_id.clone());
                    self.commit(Event::Enqueued { entry })?;
                }
                Err(e) => {
                    tracing::warn!(candidate_id = %job.candidate_id, error = %e, "generation failed");
                    failures.push(GenerationFailure {
                        candidate_id: job.candidate_id,
                        target_id: job.target.target_id,
                        retryable: e.is_retryable(),
                        error: e.to_string(),
                    });
                }
            }
        }
        Ok(RunOutcome {
            manifest: plan.run.manifest,
            targets: plan.run.targets,
            enqueued,
            already_answered: plan.already_answered,
            failures,
        })
    }

    /// Targeting, generation and enqueueing in one call. Candidates are
    /// stamped with `as_of` so runs are reproducible.
    pub fn run(&mut self, as_of: DateTime<Utc>) -> Result<RunOutcome, EngineError> {
        let plan = self.plan_run(as_of)?;
        let results = self.generator().generate(&plan.jobs, as_of);
        self.commit_candidates(plan, results, as_of)
    }

    /// A fresh candidate for a previously selected target, reviewed on its
    /// own. Allowed only once every earlier candidate for the target has
    /// been rejected, so a target never carries two live replies.
    pub fn regenerate(&mut self, target_id: &str, at: DateTime<Utc>) -> Result<CandidateView, EngineError> {
        let target = self
            .runs
            .iter()
            .rev()
            .flat_map(|r| &r.targets)
            .find(|t| t.target_id == target_id)
            .cloned()
            .ok_or_else(|| EngineError::Argument(format!("{target_id} was never selected as a target")))?;
        let earlier: Vec<&QueueEntry> =
            self.queue.entries().iter().filter(|e| e.candidate.target_id == target_id).collect();
        if let Some(live) = earlier
            .iter()
            .find(|e| self.queue.review(&e.candidate.candidate_id).is_none_or(|r| r.decision != Decision::Reject))
        {
            return Err(EngineError::Argument(format!(
                "candidate {} for {target_id} is pending or accepted",
                live.candidate.candidate_id
            )));
        }
        let candidate_id = candidate_id_for(target_id, at);
        if self.queue.entry(&candidate_id).is_some() {
            return Err(ReviewError::AlreadyEnqueued(candidate_id).into());
        }
        let context = self.store.resolve_thread(target_id)?;
        let gen_params = GenerationParams {
            model_name: self.config.llm.model_name.clone(),
            temperature: self.config.llm.temperature,
        };
        let bundle = assemble_prompt(&target, &context, &self.framework, &self.templates, &gen_params)?;
        let job = GenerationJob { candidate_id: candidate_id.clone(), target, context, bundle };
        let candidate = self.generator().generate(std::slice::from_ref(&job), at).pop().expect("one result per job")?;
        self.commit(Event::Enqueued { entry: QueueEntry { candidate, context: job.context, enqueued_at: at } })?;
        Ok(self.candidate(&candidate_id).expect("just enqueued"))
    }

    pub fn candidate(&self, candidate_id: &str) -> Option<CandidateView> {
        self.queue.entry(candidate_id).map(|entry| CandidateView {
            entry: entry.clone(),
            review: self.queue.review(candidate_id).cloned(),
            publication: self.queue.publication(candidate_id).cloned(),
        })
    }

    pub fn decide(
        &mut self,
        candidate_id: &str,
        payload: DecisionPayload,
        decided_at: DateTime<Utc>,
    ) -> Result<ReviewRecord, EngineError> {
        let review = self.queue.decide(candidate_id, payload, decided_at)?;
        self.persist(&Event::Decided { review: review.clone() })?;
        Ok(review)
    }

    /// Decision from an untrusted structured body.
    pub fn decide_json(
        &mut self,
        candidate_id: &str,
        body: &Value,
        decided_at: DateTime<Utc>,
    ) -> Result<ReviewRecord, EngineError> {
        let payload = parse_decision_payload(body).map_err(ReviewError::Validation)?;
        self.decide(candidate_id, payload, decided_at)
    }

    /// Publishes every accepted, unpublished candidate decided at or after
    /// `since`, adding the agent's reply to the forum store.
    pub fn publish(
        &mut self,
        since: Option<DateTime<Utc>>,
        at: DateTime<Utc>,
    ) -> Result<Vec<PublicationEvent>, EngineError> {
        let since = since.unwrap_or(DateTime::<Utc>::MIN_UTC);
        let ready: Vec<QueueEntry> = self.queue.publishable(since).into_iter().cloned().collect();
        let mut out = Vec::new();
        for entry in ready {
            let record = publication_record(&entry.candidate, &entry.context, &self.config.agent.id, at);
            let publication = PublicationEvent {
                candidate_id: entry.candidate.candidate_id.clone(),
                target_id: entry.candidate.target_id.clone(),
                published_at: at,
                record_id: record.record_id.clone(),
            };
            self.commit(Event::Published { publication: publication.clone(), record })?;
            out.push(publication);
        }
        Ok(out)
    }

    pub fn metrics(&self, from: NaiveDate, to: NaiveDate) -> AcceptanceMetrics {
        self.queue.acceptance_metrics(from, to)
    }

    /// Codes every learner text record not yet coded.
    pub fn code_pending(&mut self) -> Result<CodingOutcome, EngineError> {
        let agent = self.config.agent.id.as_str();
        let todo: Vec<ActionRecord> = self
            .store
            .records()
            .iter()
            .filter(|r| r.actor_id != agent && !self.codes.contains_key(&r.record_id))
            .cloned()
            .collect();
        let params = CodingParams {
            model_name: self.config.llm.coder_model_name.clone(),
            temperature: self.config.llm.coder_temperature,
            parallelism: self.config.llm.parallelism,
        };
        let outcome = llm_code_records(&todo, self.coder_client.as_ref(), &self.scheme, &params);
        if !outcome.coded_records.is_empty() {
            self.commit(Event::Coded { records: outcome.coded_records.clone(), units: outcome.units.clone() })?;
        }
        Ok(outcome)
    }

    /// Loads externally produced codes, optionally from one coder only.
    /// Imported records replace any earlier codes for the same record.
    pub fn import_codes(&mut self, codes: &[GoldCode], coder: Option<&str>) -> Result<ImportReport, EngineError> {
        let mut records: BTreeSet<String> = BTreeSet::new();
        let mut units = Vec::new();
        let mut unknown = BTreeSet::new();
        for c in codes.iter().filter(|c| coder.is_none_or(|k| c.coder_id == k)) {
            if !self.store.contains(&c.record_id) {
                unknown.insert(c.record_id.clone());
                continue;
            }
            records.insert(c.record_id.clone());
            if let (Some(indicator), Some(salience)) = (c.indicator, c.salience) {
                units.push(CodedUnit { record_id: c.record_id.clone(), indicator, salience });
            }
        }
        let report =
            ImportReport { records: records.len(), units: units.len(), unknown_records: unknown.into_iter().collect() };
        if !records.is_empty() {
            self.commit(Event::Coded { records: records.into_iter().collect(), units })?;
        }
        Ok(report)
    }

    /// Snapshot of the analysis inputs: scored learner records in focal
    /// threads, interaction modes and focal-post balance rows.
    pub fn analysis_data(&self) -> Result<AnalysisData, EngineError> {
        let agent = self.config.agent.id.as_str();
        let mut records = Vec::new();
        for (record_id, units) in &self.codes {
            let Some(rec) = self.store.get(record_id) else { continue };
            if rec.actor_id == agent {
                continue;
            }
            let Some(condition) = self.registry.condition_of(&rec.post_id) else { continue };
            let indices = aggregate_indices(&score_record(units)?);
            records.push(ScoredRecord {
                record_id: record_id.clone(),
                learner_id: rec.actor_id.clone(),
                condition,
                timestamp: rec.timestamp,
                indices,
            });
        }
        let modes = classify_interaction_modes(&self.store, self.queue.publications(), agent);
        let focal_posts = self
            .registry
            .assignments()
            .into_iter()
            .map(|a| BalancePost {
                post_id: a.post_id.clone(),
                condition: a.condition,
                timestamp: a.posted_at,
                centrality: a.centrality,
            })
            .collect();
        Ok(AnalysisData { records, modes, focal_posts, stats: self.config.stats.clone() })
    }
}
