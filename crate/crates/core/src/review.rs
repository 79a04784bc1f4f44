//! Moderation queue, human decisions against the three-dimension checklist,
//! publication gating and acceptance metrics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{CandidateResponse, CandidateStatus, Role};
use crate::forum::{ActionRecord, ActionType, ArtifactKind, ThreadContext};
use crate::timefmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    RoleTaskAlignment,
    InteractionalAppropriateness,
    FactualPlausibility,
}

impl Dimension {
    pub const ALL: [Dimension; 3] =
        [Dimension::RoleTaskAlignment, Dimension::InteractionalAppropriateness, Dimension::FactualPlausibility];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::RoleTaskAlignment => "role_task_alignment",
            Dimension::InteractionalAppropriateness => "interactional_appropriateness",
            Dimension::FactualPlausibility => "factual_plausibility",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// A validation failure tied to one payload field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

/// A reviewer's submission before it becomes a [`ReviewRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPayload {
    pub decision: Decision,
    pub dimension_flags: BTreeMap<Dimension, Verdict>,
    #[serde(default)]
    pub note: Option<String>,
    pub reviewer_id: String,
    #[serde(default)]
    pub criteria_version: Option<String>,
}

impl DecisionPayload {
    /// Checks completeness of the checklist and its consistency with the decision.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        for d in Dimension::ALL {
            if !self.dimension_flags.contains_key(&d) {
                errors.push(FieldError::new(format!("dimension_flags.{d}"), "required"));
            }
        }
        if self.reviewer_id.trim().is_empty() {
            errors.push(FieldError::new("reviewer_id", "must not be empty"));
        }
        if errors.is_empty() {
            let failing: Vec<Dimension> =
                self.dimension_flags.iter().filter(|(_, v)| **v == Verdict::Fail).map(|(d, _)| *d).collect();
            match self.decision {
                Decision::Accept => {
                    for d in failing {
                        errors.push(FieldError::new(
                            format!("dimension_flags.{d}"),
                            "accept requires every dimension to pass",
                        ));
                    }
                }
                Decision::Reject if failing.is_empty() => {
                    errors.push(FieldError::new("decision", "reject requires at least one failing dimension"));
                }
                Decision::Reject => {}
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn expect_enum<T: for<'de> Deserialize<'de>>(
    obj: &serde_json::Map<String, Value>,
    field: &str,
    label: &str,
    allowed: &str,
    errors: &mut Vec<FieldError>,
) -> Option<T> {
    match obj.get(field) {
        None | Some(Value::Null) => {
            errors.push(FieldError::new(label, "required"));
            None
        }
        Some(v) => match serde_json::from_value::<T>(v.clone()) {
            Ok(t) => Some(t),
            Err(_) => {
                errors.push(FieldError::new(label, format!("expected one of: {allowed}")));
                None
            }
        },
    }
}

fn optional_string(obj: &serde_json::Map<String, Value>, field: &str, errors: &mut Vec<FieldError>) -> Option<String> {
    match obj.get(field) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(FieldError::new(field, "expected a string"));
            None
        }
    }
}

/// Parses an untrusted decision body, collecting every field-level problem
/// instead of stopping at the first.
pub fn parse_decision_payload(body: &Value) -> Result<DecisionPayload, Vec<FieldError>> {
    let Some(obj) = body.as_object() else {
        return Err(vec![FieldError::new("$", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    for key in obj.keys() {
        if !["decision", "dimension_flags", "note", "reviewer_id", "criteria_version"].contains(&key.as_str()) {
            errors.push(FieldError::new(key.clone(), "unknown field"));
        }
    }
    let decision: Option<Decision> = expect_enum(obj, "decision", "decision", "accept, reject", &mut errors);

    let mut flags = BTreeMap::new();
    match obj.get("dimension_flags") {
        Some(Value::Object(map)) => {
            for key in map.keys() {
                let label = format!("dimension_flags.{key}");
                match serde_json::from_value::<Dimension>(Value::String(key.clone())) {
                    Ok(dim) => {
                        if let Some(v) = expect_enum::<Verdict>(map, key, &label, "pass, fail", &mut errors) {
                            flags.insert(dim, v);
                        }
                    }
                    Err(_) => {
                        errors.push(FieldError::new(label, "unknown dimension"));
                    }
                }
            }
            for d in Dimension::ALL {
                if !map.contains_key(d.as_str()) {
                    errors.push(FieldError::new(format!("dimension_flags.{d}"), "required"));
                }
            }
        }
        None | Some(Value::Null) => errors.push(FieldError::new("dimension_flags", "required")),
        Some(_) => errors.push(FieldError::new("dimension_flags", "expected an object")),
    }

    let reviewer_id = match obj.get("reviewer_id") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
        Some(Value::String(_)) => {
            errors.push(FieldError::new("reviewer_id", "must not be empty"));
            None
        }
        None | Some(Value::Null) => {
            errors.push(FieldError::new("reviewer_id", "required"));
            None
        }
        Some(_) => {
            errors.push(FieldError::new("reviewer_id", "expected a string"));
            None
        }
    };
    let note = optional_string(obj, "note", &mut errors);
    let criteria_version = optional_string(obj, "criteria_version", &mut errors);

    if !errors.is_empty() {
        return Err(errors);
    }
    let payload = DecisionPayload {
        decision: decision.expect("checked above"),
        dimension_flags: flags,
        note,
        reviewer_id: reviewer_id.expect("checked above"),
        criteria_version,
    };
    payload.validate()?;
    Ok(payload)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub candidate_id: String,
    pub decision: Decision,
    pub dimension_flags: BTreeMap<Dimension, Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub reviewer_id: String,
    #[serde(with = "timefmt")]
    pub decided_at: DateTime<Utc>,
    /// Free-form tag for the moderation criteria in force.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationEvent {
    pub candidate_id: String,
    pub target_id: String,
    #[serde(with = "timefmt")]
    pub published_at: DateTime<Utc>,
    /// The synthetic forum record that carries the published reply.
    pub record_id: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviewError {
    #[error("unknown candidate {0}")]
    NotFound(String),
    #[error("candidate {0} is already enqueued")]
    AlreadyEnqueued(String),
    #[error("candidate {0} is not pending")]
    NotPending(String),
    #[error("candidate {} was already decided", .0.candidate_id)]
    Conflict(Box<ReviewRecord>),
    #[error("invalid decision payload")]
    Validation(Vec<FieldError>),
    #[error("candidate {0} is not accepted")]
    NotAccepted(String),
    #[error("candidate {0} is already published")]
    AlreadyPublished(String),
}

/// A candidate together with the thread it answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub candidate: CandidateResponse,
    pub context: ThreadContext,
    #[serde(with = "timefmt")]
    pub enqueued_at: DateTime<Utc>,
}

/// All review state. Callers serialize access; every mutation is a single
/// check-then-write on `&mut self`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReviewQueue {
    entries: Vec<QueueEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    reviews: BTreeMap<String, ReviewRecord>,
    publications: BTreeMap<String, PublicationEvent>,
}

impl ReviewQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.entries.iter().enumerate().map(|(i, e)| (e.candidate.candidate_id.clone(), i)).collect();
    }

    /// Adds a pending candidate; returns its 1-based position among pending entries.
    pub fn enqueue(
        &mut self,
        candidate: CandidateResponse,
        context: ThreadContext,
        enqueued_at: DateTime<Utc>,
    ) -> Result<usize, ReviewError> {
        if self.index.contains_key(&candidate.candidate_id) {
            return Err(ReviewError::AlreadyEnqueued(candidate.candidate_id));
        }
        if candidate.status != CandidateStatus::Pending {
            return Err(ReviewError::NotPending(candidate.candidate_id));
        }
        self.index.insert(candidate.candidate_id.clone(), self.entries.len());
        self.entries.push(QueueEntry { candidate, context, enqueued_at });
        Ok(self.pending().count())
    }

    /// Pending entries in FIFO order.
    pub fn pending(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.iter().filter(|e| e.candidate.status == CandidateStatus::Pending)
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn entry(&self, candidate_id: &str) -> Option<&QueueEntry> {
        self.index.get(candidate_id).map(|&i| &self.entries[i])
    }

    pub fn review(&self, candidate_id: &str) -> Option<&ReviewRecord> {
        self.reviews.get(candidate_id)
    }

    pub fn reviews(&self) -> impl Iterator<Item = &ReviewRecord> {
        self.reviews.values()
    }

    pub fn publication(&self, candidate_id: &str) -> Option<&PublicationEvent> {
        self.publications.get(candidate_id)
    }

    pub fn publications(&self) -> impl Iterator<Item = &PublicationEvent> {
        self.publications.values()
    }

    /// Records a decision. The first decision wins; later attempts get the
    /// winning record back in the conflict error.
    pub fn decide(
        &mut self,
        candidate_id: &str,
        payload: DecisionPayload,
        decided_at: DateTime<Utc>,
    ) -> Result<ReviewRecord, ReviewError> {
        let &i = self.index.get(candidate_id).ok_or_else(|| ReviewError::NotFound(candidate_id.to_string()))?;
        if let Some(existing) = self.reviews.get(candidate_id) {
            return Err(ReviewError::Conflict(Box::new(existing.clone())));
        }
        payload.validate().map_err(ReviewError::Validation)?;
        let record = ReviewRecord {
            candidate_id: candidate_id.to_string(),
            decision: payload.decision,
            dimension_flags: payload.dimension_flags,
            note: payload.note,
            reviewer_id: payload.reviewer_id,
            decided_at,
            criteria_version: payload.criteria_version,
        };
        self.entries[i].candidate.status = match record.decision {
            Decision::Accept => CandidateStatus::Accepted,
            Decision::Reject => CandidateStatus::Rejected,
        };
        self.reviews.insert(candidate_id.to_string(), record.clone());
        Ok(record)
    }

    /// Pending entries enqueued before `now - horizon`. Flagged only.
    pub fn stale_pending(&self, now: DateTime<Utc>, horizon: chrono::Duration) -> Vec<&QueueEntry> {
        self.pending().filter(|e| e.enqueued_at < now - horizon).collect()
    }

    /// Accepted, unpublished entries whose decision was made at or after `since`.
    pub fn publishable(&self, since: DateTime<Utc>) -> Vec<&QueueEntry> {
        self.entries
            .iter()
            .filter(|e| e.candidate.status == CandidateStatus::Accepted)
            .filter(|e| !self.publications.contains_key(&e.candidate.candidate_id))
            .filter(|e| self.reviews.get(&e.candidate.candidate_id).is_some_and(|r| r.decided_at >= since))
            .collect()
    }

    pub fn record_publication(&mut self, event: PublicationEvent) -> Result<(), ReviewError> {
        let id = &event.candidate_id;
        match self.reviews.get(id) {
            Some(r) if r.decision == Decision::Accept => {}
            Some(_) => return Err(ReviewError::NotAccepted(id.clone())),
            None if self.index.contains_key(id) => return Err(ReviewError::NotAccepted(id.clone())),
            None => return Err(ReviewError::NotFound(id.clone())),
        }
        if self.publications.contains_key(id) {
            return Err(ReviewError::AlreadyPublished(id.clone()));
        }
        self.publications.insert(id.clone(), event);
        Ok(())
    }

    /// Per-day rows over `[from, to]` keyed by the date candidates were generated.
    pub fn acceptance_metrics(&self, from: NaiveDate, to: NaiveDate) -> AcceptanceMetrics {
        acceptance_metrics(self.entries.iter().map(|e| &e.candidate), from, to)
    }
}

/// Synthetic forum record placing a published candidate in its thread:
/// a comment on a post target, otherwise a reply in the target's chain.
pub fn publication_record(
    candidate: &CandidateResponse,
    ctx: &ThreadContext,
    agent_id: &str,
    published_at: DateTime<Utc>,
) -> ActionRecord {
    let artifact_id = format!("pca-{}", candidate.candidate_id);
    let mut record = ActionRecord {
        record_id: format!("pub-{}", candidate.candidate_id),
        timestamp: published_at,
        actor_id: agent_id.to_string(),
        action_type: ActionType::Commented,
        post_id: ctx.post.post_id.clone(),
        post_author_id: ctx.post.author_id.clone(),
        comment_id: None,
        comment_author_id: None,
        reply_id: None,
        reply_author_id: None,
        text: Some(candidate.text.clone()),
        parent_reply_id: None,
        title: None,
    };
    match ctx.target_kind {
        ArtifactKind::Post => {
            record.comment_id = Some(artifact_id);
            record.comment_author_id = Some(agent_id.to_string());
        }
        ArtifactKind::Comment | ArtifactKind::Reply => {
            let top = &ctx.comment_chain[0];
            record.action_type = ActionType::Replied;
            record.comment_id = Some(top.id.clone());
            record.comment_author_id = Some(top.author_id.clone());
            record.reply_id = Some(artifact_id);
            record.reply_author_id = Some(agent_id.to_string());
            if ctx.target_kind == ArtifactKind::Reply {
                record.parent_reply_id = Some(ctx.target_id().to_string());
            }
        }
    }
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub date: NaiveDate,
    pub generated: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// `accepted / (accepted + rejected)`; `None` when nothing was decided.
    pub acceptance_rate: Option<f64>,
    /// Share of generated candidates per role; empty when nothing was generated.
    pub role_composition: BTreeMap<Role, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceMetrics {
    pub rows: Vec<MetricsRow>,
    pub total: MetricsTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTotal {
    pub generated: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub acceptance_rate: Option<f64>,
    pub role_composition: BTreeMap<Role, f64>,
}

#[derive(Default)]
struct Tally {
    generated: usize,
    accepted: usize,
    rejected: usize,
    roles: BTreeMap<Role, usize>,
}

impl Tally {
    fn add(&mut self, c: &CandidateResponse) {
        self.generated += 1;
        *self.roles.entry(c.role).or_default() += 1;
        match c.status {
            CandidateStatus::Accepted => self.accepted += 1,
            CandidateStatus::Rejected => self.rejected += 1,
            CandidateStatus::Pending => {}
        }
    }

    fn rate(&self) -> Option<f64> {
        let decided = self.accepted + self.rejected;
        (decided > 0).then(|| self.accepted as f64 / decided as f64)
    }

    fn composition(&self) -> BTreeMap<Role, f64> {
        self.roles.iter().map(|(r, n)| (*r, *n as f64 / self.generated as f64)).collect()
    }
}

/// Daily and overall counts for candidates generated within `[from, to]`.
pub fn acceptance_metrics<'a>(
    candidates: impl IntoIterator<Item = &'a CandidateResponse>,
    from: NaiveDate,
    to: NaiveDate,
) -> AcceptanceMetrics {
    let mut days: BTreeMap<NaiveDate, Tally> = BTreeMap::new();
    let mut total = Tally::default();
    for c in candidates {
        let day = c.generated_at.date_naive();
        if day < from || day > to {
            continue;
        }
        days.entry(day).or_default().add(c);
        total.add(c);
    }
    let mut rows = Vec::new();
    for date in from.iter_days().take_while(|d| *d <= to) {
        let tally = days.remove(&date).unwrap_or_default();
        rows.push(MetricsRow {
            date,
            generated: tally.generated,
            accepted: tally.accepted,
            rejected: tally.rejected,
            acceptance_rate: tally.rate(),
            role_composition: tally.composition(),
        });
    }
    AcceptanceMetrics {
        rows,
        total: MetricsTotal {
            generated: total.generated,
            accepted: total.accepted,
            rejected: total.rejected,
            acceptance_rate: total.rate(),
            role_composition: total.composition(),
        },
    }
}

impl AcceptanceMetrics {
    /// Tab-separated export: date, counts, rate (`NA` when undefined), one
    /// ratio column per role.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["date", "generated", "accepted", "rejected", "rate"];
        header.extend(Role::ALL.iter().map(|r| r.as_str()));
        writeln!(out, "{}", header.join("\t"))?;
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        for row in &self.rows {
            let mut cols = vec![
                row.date.to_string(),
                row.generated.to_string(),
                row.accepted.to_string(),
                row.rejected.to_string(),
                fmt_opt(row.acceptance_rate),
            ];
            for role in Role::ALL {
                let share = (row.generated > 0).then(|| row.role_composition.get(&role).copied().unwrap_or(0.0));
                cols.push(fmt_opt(share));
            }
            writeln!(out, "{}", cols.join("\t"))?;
        }
        Ok(())
    }
}
